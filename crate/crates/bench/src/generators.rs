//! Seeded synthetic stand-ins for the case studies. Every generator returns a
//! [`Table`] whose first column is time.

use std::f64::consts::{PI, TAU};

use greybox_core::latent_force::{ObservationChannel, Quantity, StructuralModel};
use greybox_core::physics::{morison_force, MorisonParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::Table;
use crate::sim::{band_limited, simulate_mdof_chain, simulate_sdof, Forcing, OscillatorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Trend(TrendSpec),
    Wave(WaveSpec),
    Sdof(SdofSpec),
    Field(FieldSpec),
    Chain(ChainSpec),
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Trend(_) => "trend",
            GeneratorSpec::Wave(_) => "wave",
            GeneratorSpec::Sdof(_) => "sdof",
            GeneratorSpec::Field(_) => "field",
            GeneratorSpec::Chain(_) => "chain",
        }
    }

    pub fn generate(&self) -> Result<Table> {
        match self {
            GeneratorSpec::Trend(s) => s.generate(),
            GeneratorSpec::Wave(s) => s.generate(),
            GeneratorSpec::Sdof(s) => s.generate(),
            GeneratorSpec::Field(s) => s.generate(),
            GeneratorSpec::Chain(s) => s.generate(),
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Hourly deflection of a structure whose response is linear in ambient
/// temperature plus a daily cycle. Temperature declines over the record, so a
/// leading training window sees only the warm regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendSpec {
    pub seed: u64,
    pub days: usize,
    pub samples_per_day: usize,
    pub temp_start: f64,
    pub temp_end: f64,
    pub daily_swing: f64,
    pub temp_noise: f64,
    pub intercept: f64,
    pub slope: f64,
    pub periodic_amplitude: f64,
    pub noise_std: f64,
}

impl Default for TrendSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            days: 10,
            samples_per_day: 24,
            temp_start: 18.0,
            temp_end: 2.0,
            daily_swing: 3.0,
            temp_noise: 0.3,
            intercept: 10.0,
            slope: -0.8,
            periodic_amplitude: 1.5,
            noise_std: 0.2,
        }
    }
}

impl TrendSpec {
    /// Noise-free response for given inputs.
    pub fn response(&self, temperature: f64, hour: f64) -> f64 {
        self.intercept + self.slope * temperature + self.periodic_amplitude * (TAU * hour / 24.0).sin()
    }

    pub fn generate(&self) -> Result<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.days * self.samples_per_day;
        let step = 24.0 / self.samples_per_day as f64;
        let mut time = Vec::with_capacity(n);
        let mut temp = Vec::with_capacity(n);
        let mut hour = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * step;
            let h = t % 24.0;
            let frac = i as f64 / (n.max(2) - 1) as f64;
            let trend = self.temp_start + (self.temp_end - self.temp_start) * frac;
            // Warmest mid-afternoon.
            let temperature = trend
                + self.daily_swing * (TAU * (h - 9.0) / 24.0).sin()
                + self.temp_noise * gauss(&mut rng);
            time.push(t);
            temp.push(temperature);
            hour.push(h);
            y.push(self.response(temperature, h) + self.noise_std * gauss(&mut rng));
        }
        Table::new("time", time)
            .with("temperature", temp)?
            .with("hour", hour)?
            .with("deflection", y)
    }
}

/// Trend series with default settings and the given seed.
pub fn generate_trend_series(seed: u64) -> Result<Table> {
    TrendSpec {
        seed,
        ..TrendSpec::default()
    }
    .generate()
}

/// Wave loading on a slender member: Morison force from measured particle
/// velocity and acceleration, plus a slowly varying term the Morison model
/// misses. The sea state grows over the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveSpec {
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub amplitude_start: f64,
    pub amplitude_end: f64,
    pub components: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    pub morison: MorisonParams,
    /// AR(1) coefficient of the unmodelled term.
    pub memory: f64,
    /// Gain from velocity into the unmodelled term.
    pub memory_gain: f64,
    pub noise_std: f64,
}

impl Default for WaveSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 1600,
            dt: 0.1,
            amplitude_start: 0.3,
            amplitude_end: 1.5,
            components: 5,
            f_lo: 0.08,
            f_hi: 0.3,
            morison: MorisonParams {
                drag: 0.8,
                inertia: 1.6,
            },
            memory: 0.8,
            memory_gain: 0.3,
            noise_std: 0.02,
        }
    }
}

impl WaveSpec {
    pub fn generate(&self) -> Result<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let comps: Vec<(f64, f64, f64)> = (0..self.components.max(1))
            .map(|_| {
                let w = TAU * rng.random_range(self.f_lo..=self.f_hi);
                let a = rng.random_range(0.5..1.0);
                let ph = rng.random_range(0.0..TAU);
                (w, a, ph)
            })
            .collect();
        let norm = comps.iter().map(|c| c.1 * c.1 / 2.0).sum::<f64>().sqrt();
        let duration = self.steps as f64 * self.dt;
        let slope = (self.amplitude_end - self.amplitude_start) / duration;

        let mut time = Vec::with_capacity(self.steps);
        let mut vel = Vec::with_capacity(self.steps);
        let mut acc = Vec::with_capacity(self.steps);
        let mut force = Vec::with_capacity(self.steps);
        let mut residual = 0.0;
        for i in 0..self.steps {
            let t = i as f64 * self.dt;
            let env = self.amplitude_start + slope * t;
            let (mut g, mut dg) = (0.0, 0.0);
            for (w, a, ph) in &comps {
                g += a * (w * t + ph).cos() / norm;
                dg -= a * w * (w * t + ph).sin() / norm;
            }
            let u = env * g;
            let du = slope * g + env * dg;
            residual = self.memory * residual + self.memory_gain * u;
            time.push(t);
            vel.push(u);
            acc.push(du);
            force.push(morison_force(&self.morison, u, du) + residual + self.noise_std * gauss(&mut rng));
        }
        Table::new("time", time)
            .with("velocity", vel)?
            .with("acceleration", acc)?
            .with("force", force)
    }
}

/// White-noise-driven oscillator with an optional cubic stiffness term,
/// integrated at `dt / substeps` and sampled every `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdofSpec {
    pub seed: u64,
    pub mass: f64,
    pub zeta: f64,
    pub natural_frequency_hz: f64,
    pub cubic: f64,
    /// White-noise intensity is `forcing_sigma^2`.
    pub forcing_sigma: f64,
    pub dt: f64,
    pub steps: usize,
    pub substeps: usize,
    /// Samples discarded before recording, to reach stationarity.
    pub burn_in: usize,
    pub noise_std: f64,
}

impl Default for SdofSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            mass: 1.0,
            zeta: 0.05,
            natural_frequency_hz: 1.5,
            cubic: 0.0,
            forcing_sigma: 1.0,
            dt: 0.025,
            steps: 800,
            substeps: 10,
            burn_in: 400,
            noise_std: 0.0,
        }
    }
}

impl SdofSpec {
    pub fn params(&self) -> OscillatorParams {
        OscillatorParams::from_modal(self.mass, self.zeta, TAU * self.natural_frequency_hz, self.cubic)
    }

    pub fn generate(&self) -> Result<Table> {
        let sub = self.substeps.max(1);
        let fine_dt = self.dt / sub as f64;
        let total = (self.steps + self.burn_in) * sub;
        let rec = simulate_sdof(
            &self.params(),
            &Forcing::WhiteNoise {
                sigma: self.forcing_sigma,
            },
            fine_dt,
            total,
            (0.0, 0.0),
            self.seed,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let keep = |v: &[f64]| -> Vec<f64> {
            (self.burn_in..self.burn_in + self.steps).map(|i| v[i * sub]).collect()
        };
        let clean = keep(&rec.displacement);
        let noisy: Vec<f64> = clean.iter().map(|y| y + self.noise_std * gauss(&mut rng)).collect();
        let time = (0..self.steps).map(|i| i as f64 * self.dt).collect();
        Table::new("time", time)
            .with("force", keep(&rec.force))?
            .with("displacement", noisy)?
            .with("displacement_clean", clean)
    }
}

/// Smooth 2-D field on `[-L, L]^2` vanishing on the boundary, observed on a
/// coarse training grid and a dense test grid. Column `train` marks rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSpec {
    pub seed: u64,
    pub half_width: f64,
    pub train_grid: usize,
    pub test_grid: usize,
    pub noise_std: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            half_width: 1.0,
            train_grid: 4,
            test_grid: 21,
            noise_std: 0.01,
        }
    }
}

impl FieldSpec {
    pub fn field(&self, x: f64, y: f64) -> f64 {
        let l = self.half_width;
        let envelope = (PI * x / (2.0 * l)).cos() * (PI * y / (2.0 * l)).cos();
        envelope * (1.0 + 0.5 * (2.0 * x / l + 1.0).sin() + 0.4 * (3.0 * y / l).cos())
    }

    fn grid(&self, k: usize) -> Vec<f64> {
        let l = self.half_width;
        (0..k).map(|i| -l + 2.0 * l * (i + 1) as f64 / (k + 1) as f64).collect()
    }

    pub fn generate(&self) -> Result<Table> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (mut x1, mut x2, mut v, mut flag) = (vec![], vec![], vec![], vec![]);
        for (k, is_train, noise) in [(self.train_grid, 1.0, self.noise_std), (self.test_grid, 0.0, 0.0)] {
            let g = self.grid(k);
            for &a in &g {
                for &b in &g {
                    x1.push(a);
                    x2.push(b);
                    v.push(self.field(a, b) + noise * gauss(&mut rng));
                    flag.push(is_train);
                }
            }
        }
        let index = (0..v.len()).map(|i| i as f64).collect();
        Table::new("index", index)
            .with("x1", x1)?
            .with("x2", x2)?
            .with("value", v)?
            .with("train", flag)
    }
}

/// Chain structure driven at one DOF by a band-limited force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSpec {
    pub seed: u64,
    pub masses: Vec<f64>,
    pub dampings: Vec<f64>,
    pub stiffnesses: Vec<f64>,
    pub force_dof: usize,
    pub channels: Vec<ObservationChannel>,
    pub dt: f64,
    pub steps: usize,
    pub substeps: usize,
    pub force_band_hz: (f64, f64),
    pub force_components: usize,
    pub force_std: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        let disp = |dof| ObservationChannel {
            quantity: Quantity::Displacement,
            dof,
            noise_var: 1e-6,
        };
        Self {
            seed: 0,
            masses: vec![1.0; 3],
            dampings: vec![0.8; 3],
            stiffnesses: vec![400.0; 3],
            force_dof: 2,
            channels: vec![disp(0), disp(1), disp(2)],
            dt: 0.01,
            steps: 2000,
            substeps: 10,
            force_band_hz: (0.2, 1.0),
            force_components: 6,
            force_std: 10.0,
        }
    }
}

/// Column name used for an observation channel, e.g. `disp_2`.
pub fn channel_name(ch: &ObservationChannel) -> String {
    let q = match ch.quantity {
        Quantity::Displacement => "disp",
        Quantity::Velocity => "vel",
        Quantity::Acceleration => "acc",
    };
    format!("{q}_{}", ch.dof)
}

impl ChainSpec {
    pub fn structure(&self) -> Result<StructuralModel> {
        Ok(StructuralModel::chain(
            &self.masses,
            &self.dampings,
            &self.stiffnesses,
            self.force_dof,
            self.channels.clone(),
        )?)
    }

    pub fn generate(&self) -> Result<Table> {
        let s = self.structure()?;
        let sub = self.substeps.max(1);
        let fine_dt = self.dt / sub as f64;
        let fine_force = band_limited(
            self.steps * sub,
            fine_dt,
            self.force_band_hz.0,
            self.force_band_hz.1,
            self.force_components,
            self.force_std,
            self.seed,
        );
        // Clean states at the fine step, then noisy samples at `dt`.
        let rec = simulate_mdof_chain(&s, &fine_force, fine_dt, self.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let time = (0..self.steps).map(|i| i as f64 * self.dt).collect();
        let force = (0..self.steps).map(|i| fine_force[i * sub]).collect();
        let mut table = Table::new("time", time).with("force", force)?;
        for ch in &s.channels {
            let col = (0..self.steps)
                .map(|i| {
                    let states = match ch.quantity {
                        Quantity::Displacement => &rec.displacement,
                        Quantity::Velocity => &rec.velocity,
                        Quantity::Acceleration => &rec.acceleration,
                    };
                    states[(i * sub, ch.dof)] + ch.noise_var.sqrt() * gauss(&mut rng)
                })
                .collect();
            table.push(&channel_name(ch), col)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use greybox_core::narx::coverage_metric;
    use greybox_core::Dataset;
    use nalgebra::DMatrix;

    #[test]
    fn generators_are_reproducible() {
        let specs = [
            GeneratorSpec::Trend(TrendSpec::default()),
            GeneratorSpec::Wave(WaveSpec::default()),
            GeneratorSpec::Sdof(SdofSpec {
                steps: 100,
                ..SdofSpec::default()
            }),
            GeneratorSpec::Field(FieldSpec::default()),
            GeneratorSpec::Chain(ChainSpec {
                steps: 100,
                ..ChainSpec::default()
            }),
        ];
        for spec in specs {
            let a = spec.generate().unwrap().to_csv_string().unwrap();
            let b = spec.generate().unwrap().to_csv_string().unwrap();
            assert_eq!(a, b, "{}", spec.name());
        }
        assert_ne!(generate_trend_series(1).unwrap(), generate_trend_series(2).unwrap());
    }

    #[test]
    fn noiseless_trend_is_exact() {
        let spec = TrendSpec {
            noise_std: 0.0,
            ..TrendSpec::default()
        };
        let t = spec.generate().unwrap();
        let (temp, hour, y) = (
            t.column("temperature").unwrap(),
            t.column("hour").unwrap(),
            t.column("deflection").unwrap(),
        );
        for i in 0..t.len() {
            assert_eq!(y[i], spec.response(temp[i], hour[i]));
        }
    }

    #[test]
    fn trend_test_window_extrapolates() {
        let t = generate_trend_series(3).unwrap();
        let n = t.len();
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                t.column("temperature").unwrap()[i]
            } else {
                t.column("hour").unwrap()[i]
            }
        });
        let y = nalgebra::DVector::from_column_slice(t.column("deflection").unwrap());
        let all = Dataset::new(x, y).unwrap();
        let train = all.select(&(0..n / 2).collect::<Vec<_>>());
        let test = all.select(&(n / 2..n).collect::<Vec<_>>());
        assert!(coverage_metric(&train, &test).unwrap() < 100.0);
    }

    #[test]
    fn field_vanishes_on_boundary() {
        let f = FieldSpec::default();
        for s in [-1.0, -0.3, 0.5, 1.0] {
            assert!(f.field(1.0, s).abs() < 1e-15);
            assert!(f.field(s, -1.0).abs() < 1e-15);
        }
        let t = f.generate().unwrap();
        let n_train = t.column("train").unwrap().iter().filter(|v| **v == 1.0).count();
        assert_eq!(n_train, 16);
        assert_eq!(t.len(), 16 + 21 * 21);
    }

    #[test]
    fn wave_sea_state_grows() {
        let t = WaveSpec::default().generate().unwrap();
        let u = t.column("velocity").unwrap();
        let half = u.len() / 2;
        let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak(&u[half..]) > 1.5 * peak(&u[..half]));
    }

    #[test]
    fn chain_columns_follow_channels() {
        let spec = ChainSpec {
            steps: 50,
            ..ChainSpec::default()
        };
        let t = spec.generate().unwrap();
        assert_eq!(t.names(), &["time", "force", "disp_0", "disp_1", "disp_2"]);
    }
}
