//! Fixed-step RK4 simulators. Forcing is held constant over each step.

use greybox_core::latent_force::{Quantity, StructuralModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

const BLOW_UP: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    /// Coefficient of the cubic restoring term `k3 y^3`.
    #[serde(default)]
    pub cubic: f64,
}

impl OscillatorParams {
    /// Linear parameters from damping ratio and natural frequency.
    pub fn from_modal(mass: f64, zeta: f64, omega_n: f64, cubic: f64) -> Self {
        Self {
            mass,
            damping: 2.0 * zeta * omega_n * mass,
            stiffness: omega_n * omega_n * mass,
            cubic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// Independent Gaussian samples of variance `sigma^2 / dt`, one per step,
    /// approximating white noise of intensity `sigma^2`.
    WhiteNoise { sigma: f64 },
    /// One value per step.
    Series(Vec<f64>),
}

impl Forcing {
    fn samples(&self, steps: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
        match self {
            Forcing::WhiteNoise { sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = sigma / dt.sqrt();
                Ok((0..steps)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect())
            }
            Forcing::Series(v) => {
                if v.len() < steps {
                    return Err(BenchError::Data(format!(
                        "forcing series has {} samples, {steps} needed",
                        v.len()
                    )));
                }
                Ok(v[..steps].to_vec())
            }
        }
    }
}

/// Sampled single-degree-of-freedom response; index `i` is time `i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdofRecord {
    pub dt: f64,
    pub force: Vec<f64>,
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

impl SdofRecord {
    pub fn time(&self) -> Vec<f64> {
        (0..self.displacement.len()).map(|i| i as f64 * self.dt).collect()
    }
}

fn rk4_step(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], dt: f64) -> Vec<f64> {
    let k1 = f(x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = f(&x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = f(&x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = f(&x4);
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn check_stable(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() < BLOW_UP) {
        Ok(())
    } else {
        Err(BenchError::Numerical(format!(
            "response overflowed at step {step}; reduce dt"
        )))
    }
}

/// Integrate `m y'' + c y' + k y + k3 y^3 = F(t)` for `steps` samples
/// starting from `(y0, v0)`. The white-noise forcing is drawn from `seed`.
pub fn simulate_sdof(
    params: &OscillatorParams,
    forcing: &Forcing,
    dt: f64,
    steps: usize,
    initial: (f64, f64),
    seed: u64,
) -> Result<SdofRecord> {
    let OscillatorParams {
        mass,
        damping,
        stiffness,
        cubic,
    } = *params;
    if !(mass > 0.0) {
        return Err(BenchError::Config(format!("mass must be positive, got {mass}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(BenchError::Config(format!("dt must be positive, got {dt}")));
    }
    let force = forcing.samples(steps, dt, seed)?;
    let accel = |y: f64, v: f64, f: f64| (f - damping * v - stiffness * y - cubic * y * y * y) / mass;

    let mut rec = SdofRecord {
        dt,
        force: force.clone(),
        displacement: Vec::with_capacity(steps),
        velocity: Vec::with_capacity(steps),
        acceleration: Vec::with_capacity(steps),
    };
    let mut state = vec![initial.0, initial.1];
    for (i, &f) in force.iter().enumerate() {
        rec.displacement.push(state[0]);
        rec.velocity.push(state[1]);
        rec.acceleration.push(accel(state[0], state[1], f));
        state = rk4_step(|x| vec![x[1], accel(x[0], x[1], f)], &state, dt);
        check_stable(&state, i)?;
    }
    Ok(rec)
}

/// Sampled response of a chain structure.
#[derive(Debug, Clone, PartialEq)]
pub struct MdofRecord {
    pub dt: f64,
    pub force: Vec<f64>,
    /// `T x p` noiseless states.
    pub displacement: DMatrix<f64>,
    pub velocity: DMatrix<f64>,
    pub acceleration: DMatrix<f64>,
    /// `T x channels` noisy measurements following `structural.channels`.
    pub observations: DMatrix<f64>,
}

/// Integrate `M x'' + C x' + K x = b f(t)` from rest with RK4 and sample the
/// observation channels with Gaussian noise drawn from `seed`.
pub fn simulate_mdof_chain(
    structural: &StructuralModel,
    force: &[f64],
    dt: f64,
    seed: u64,
) -> Result<MdofRecord> {
    let zero = vec![0.0; structural.dofs()];
    simulate_mdof_from(structural, force, dt, (&zero, &zero), seed)
}

/// As [`simulate_mdof_chain`] with explicit initial displacement and velocity.
pub fn simulate_mdof_from(
    structural: &StructuralModel,
    force: &[f64],
    dt: f64,
    initial: (&[f64], &[f64]),
    seed: u64,
) -> Result<MdofRecord> {
    structural.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(BenchError::Config(format!("dt must be positive, got {dt}")));
    }
    let p = structural.dofs();
    if initial.0.len() != p || initial.1.len() != p {
        return Err(BenchError::Config("initial state length differs from dofs".into()));
    }
    let m_inv = structural
        .mass
        .clone()
        .try_inverse()
        .ok_or_else(|| BenchError::Numerical("singular mass matrix".into()))?;
    let stiff = &m_inv * &structural.stiffness;
    let damp = &m_inv * &structural.damping;
    let route = &m_inv * &structural.force_input;
    let accel = |x: &[f64], f: f64| -> DVector<f64> {
        let pos = DVector::from_column_slice(&x[..p]);
        let vel = DVector::from_column_slice(&x[p..]);
        -&stiff * pos - &damp * vel + &route * f
    };

    let t = force.len();
    let mut rec = MdofRecord {
        dt,
        force: force.to_vec(),
        displacement: DMatrix::zeros(t, p),
        velocity: DMatrix::zeros(t, p),
        acceleration: DMatrix::zeros(t, p),
        observations: DMatrix::zeros(t, structural.channels.len()),
    };
    let mut state: Vec<f64> = initial.0.iter().chain(initial.1).copied().collect();
    for (i, &f) in force.iter().enumerate() {
        let a = accel(&state, f);
        for j in 0..p {
            rec.displacement[(i, j)] = state[j];
            rec.velocity[(i, j)] = state[p + j];
            rec.acceleration[(i, j)] = a[j];
        }
        state = rk4_step(
            |x| {
                let a = accel(x, f);
                x[p..].iter().copied().chain(a.iter().copied()).collect()
            },
            &state,
            dt,
        );
        check_stable(&state, i)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..t {
        for (c, ch) in structural.channels.iter().enumerate() {
            let clean = match ch.quantity {
                Quantity::Displacement => rec.displacement[(i, ch.dof)],
                Quantity::Velocity => rec.velocity[(i, ch.dof)],
                Quantity::Acceleration => rec.acceleration[(i, ch.dof)],
            };
            rec.observations[(i, c)] =
                clean + ch.noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(rec)
}

/// Smooth band-limited signal: a sum of `components` sinusoids with
/// frequencies (Hz) drawn uniformly from `[f_lo, f_hi]`, random phases, and
/// amplitudes scaled so the signal's standard deviation is `std`.
pub fn band_limited(
    steps: usize,
    dt: f64,
    f_lo: f64,
    f_hi: f64,
    components: usize,
    std: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<(f64, f64)> = (0..components.max(1))
        .map(|_| {
            let f = rng.random_range(f_lo..=f_hi);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (std::f64::consts::TAU * f, phase)
        })
        .collect();
    // Each unit sinusoid has variance 1/2.
    let amp = std * (2.0 / comps.len() as f64).sqrt();
    (0..steps)
        .map(|i| {
            let t = i as f64 * dt;
            amp * comps.iter().map(|(w, ph)| (w * t + ph).sin()).sum::<f64>()
        })
        .collect()
}
