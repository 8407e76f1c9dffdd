//! Particle swarm minimization over a bounded box.
//!
//! Parameters flagged [`ParamScale::Log`] are searched in log space; bounds
//! and returned parameters are always in natural units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParamScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: ParamScale,
}

impl ParamBound {
    pub fn linear(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            scale: ParamScale::Linear,
        }
    }

    pub fn log(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            scale: ParamScale::Log,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lower.is_finite()
            && self.upper.is_finite()
            && self.lower < self.upper
            && (self.scale == ParamScale::Linear || self.lower > 0.0);
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidConfig(format!(
                "invalid bound [{}, {}] ({:?})",
                self.lower, self.upper, self.scale
            )))
        }
    }

    fn search_interval(&self) -> (f64, f64) {
        match self.scale {
            ParamScale::Linear => (self.lower, self.upper),
            ParamScale::Log => (self.lower.ln(), self.upper.ln()),
        }
    }

    fn to_natural(&self, s: f64) -> f64 {
        match self.scale {
            ParamScale::Linear => s,
            ParamScale::Log => s.exp().clamp(self.lower, self.upper),
        }
    }
}

fn default_particles() -> usize {
    30
}
fn default_iterations() -> usize {
    200
}
fn default_inertia() -> f64 {
    0.72
}
fn default_acceleration() -> f64 {
    1.49
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_acceleration")]
    pub cognitive: f64,
    #[serde(default = "default_acceleration")]
    pub social: f64,
    pub bounds: Vec<ParamBound>,
    #[serde(default)]
    pub seed: u64,
}

impl PsoConfig {
    pub fn new(bounds: Vec<ParamBound>, seed: u64) -> Self {
        Self {
            particles: default_particles(),
            iterations: default_iterations(),
            inertia: default_inertia(),
            cognitive: default_acceleration(),
            social: default_acceleration(),
            bounds,
            seed,
        }
    }

    pub fn with_budget(mut self, particles: usize, iterations: usize) -> Self {
        self.particles = particles;
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.iterations == 0 {
            return Err(GpError::InvalidConfig(
                "particle and iteration counts must be at least 1".into(),
            ));
        }
        if self.bounds.is_empty() {
            return Err(GpError::InvalidConfig("no parameters to optimize".into()));
        }
        self.bounds.iter().try_for_each(ParamBound::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Global-best value after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_value: f64,
}

/// Minimize `objective` over the box in `cfg`. Non-finite objective values
/// count as `+inf`.
pub fn pso_minimize<F>(objective: F, cfg: &PsoConfig) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;
    let intervals: Vec<(f64, f64)> = cfg.bounds.iter().map(ParamBound::search_interval).collect();
    let vmax: Vec<f64> = intervals.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations = 0usize;

    let mut evaluate = |s: &[f64]| {
        evaluations += 1;
        let natural: Vec<f64> = cfg
            .bounds
            .iter()
            .zip(s)
            .map(|(b, v)| b.to_natural(*v))
            .collect();
        let value = objective(&natural);
        if value.is_finite() {
            value
        } else {
            f64::INFINITY
        }
    };

    let mut swarm: Vec<Particle> = (0..cfg.particles)
        .map(|_| {
            let position: Vec<f64> = intervals
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect();
            let velocity: Vec<f64> = vmax
                .iter()
                .map(|&v| 0.2 * v * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_value: f64::INFINITY,
            }
        })
        .collect();
    for p in &mut swarm {
        p.best_value = evaluate(&p.position);
    }

    let (mut global_position, mut global_value) = best_of(&swarm);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(global_value);

    for _ in 0..cfg.iterations {
        for p in &mut swarm {
            for k in 0..intervals.len() {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let v = cfg.inertia * p.velocity[k]
                    + cfg.cognitive * r1 * (p.best_position[k] - p.position[k])
                    + cfg.social * r2 * (global_position[k] - p.position[k]);
                p.velocity[k] = v.clamp(-vmax[k], vmax[k]);
                let (lo, hi) = intervals[k];
                let x = p.position[k] + p.velocity[k];
                if x < lo || x > hi {
                    p.velocity[k] = 0.0;
                }
                p.position[k] = x.clamp(lo, hi);
            }
        }
        // Synchronous update: every particle sees the same global best
        // within an iteration; ties resolve to the lowest particle index.
        for p in &mut swarm {
            let value = evaluate(&p.position);
            if value < p.best_value {
                p.best_value = value;
                p.best_position.clone_from(&p.position);
            }
        }
        let (pos, value) = best_of(&swarm);
        if value < global_value {
            global_value = value;
            global_position = pos;
        }
        trace.push(global_value);
    }

    let best_params = cfg
        .bounds
        .iter()
        .zip(&global_position)
        .map(|(b, v)| b.to_natural(*v))
        .collect();
    Ok(PsoResult {
        best_params,
        best_value: global_value,
        trace,
        evaluations,
    })
}

fn best_of(swarm: &[Particle]) -> (Vec<f64>, f64) {
    let mut best = &swarm[0];
    for p in &swarm[1..] {
        if p.best_value < best.best_value {
            best = p;
        }
    }
    (best.best_position.clone(), best.best_value)
}
