//! Euler–Maruyama integration of the coupled system.
//!
//! One Gaussian increment per step drives both components: the actual state
//! and the filter see the same measurement record. The control is held
//! constant over each step (zero-order hold on the estimate).
//!
//! Noise streams are ChaCha8 keyed by the master seed, with the ChaCha stream
//! id set to the trajectory index. Normal deviates come from
//! `rand_distr::StandardNormal`. This pairing is fixed for bit-reproducibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::lyapunov_v;
use crate::controller::FeedbackLaw;
use crate::dynamics::{
    diffusion_actual, diffusion_estimate, drift_actual, drift_estimate, EstParams, PhysParams,
    VectorField3,
};
use crate::error::{Error, Result};
use crate::qstate::{bures_to_pole, BlochVector, CoupledState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    #[default]
    RadialClip,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub projection: Projection,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            dt: 1e-3,
            t_final: 10.0,
            record_stride: 10,
            seed: 0,
            scheme: Scheme::EulerMaruyama,
            projection: Projection::RadialClip,
        }
    }
}

impl SdeConfig {
    /// `t_final = 0` is accepted and yields a single recorded state.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::param("t_final", format!("must be >= 0, got {}", self.t_final)));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::param(
                "dt",
                format!("must not exceed t_final ({} > {})", self.dt, self.t_final),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be >= 1"));
        }
        if self.dt > 1e-2 {
            log::warn!("dt = {} is coarse; 1e-2 or below is recommended", self.dt);
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Source of Wiener increments. Implementations return `dW ~ N(0, dt)`.
pub trait NoiseSource {
    fn increment(&mut self, dt: f64) -> f64;
}

/// Gaussian increments from a counter-based ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianNoise { rng }
    }
}

impl NoiseSource for GaussianNoise {
    fn increment(&mut self, dt: f64) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        n * dt.sqrt()
    }
}

/// Replays a fixed list of increments (then zeros).
#[derive(Debug, Clone)]
pub struct ReplayNoise {
    increments: Vec<f64>,
    pos: usize,
}

impl ReplayNoise {
    pub fn new(increments: Vec<f64>) -> Self {
        ReplayNoise { increments, pos: 0 }
    }
}

impl NoiseSource for ReplayNoise {
    fn increment(&mut self, _dt: f64) -> f64 {
        let v = self.increments.get(self.pos).copied().unwrap_or(0.0);
        self.pos += 1;
        v
    }
}

pub fn project(b: BlochVector) -> BlochVector {
    let n = b.norm();
    if n > 1.0 {
        BlochVector::new_unchecked(b.x / n, b.y / n, b.z / n)
    } else {
        b
    }
}

fn apply_projection(b: BlochVector, projection: Projection) -> BlochVector {
    match projection {
        Projection::RadialClip => project(b),
        Projection::None => b,
    }
}

fn em_update(b: &BlochVector, drift: VectorField3, diffusion: VectorField3, dt: f64, dw: f64) -> BlochVector {
    BlochVector::new_unchecked(
        b.x + drift.dx * dt + diffusion.dx * dw,
        b.y + drift.dy * dt + diffusion.dy * dw,
        b.z + drift.dz * dt + diffusion.dz * dw,
    )
}

/// One Euler–Maruyama step with the given projection, without finiteness checks.
pub fn step_raw(
    s: &CoupledState,
    u: f64,
    dw: f64,
    dt: f64,
    p: &PhysParams,
    e: &EstParams,
    projection: Projection,
) -> CoupledState {
    let actual = em_update(&s.actual, drift_actual(&s.actual, u, p), diffusion_actual(&s.actual, p), dt, dw);
    let estimate = em_update(
        &s.estimate,
        drift_estimate(s, u, p, e),
        diffusion_estimate(&s.estimate, e),
        dt,
        dw,
    );
    CoupledState {
        actual: apply_projection(actual, projection),
        estimate: apply_projection(estimate, projection),
    }
}

/// One step with radial clipping. A non-finite result is reported as a
/// blow-up at step 0.
pub fn step(
    s: &CoupledState,
    u: f64,
    dw: f64,
    dt: f64,
    p: &PhysParams,
    e: &EstParams,
) -> Result<CoupledState> {
    let next = step_raw(s, u, dw, dt, p, e, Projection::RadialClip);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Blowup { step: 0, time: dt })
    }
}

/// Recorded samples of one coupled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CoupledState>,
    pub controls: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub noise_seed: u64,
    pub noise_stream: u64,
}

impl Trajectory {
    fn with_capacity(n: usize, seed: u64, stream: u64) -> Self {
        Trajectory {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            controls: Vec::with_capacity(n),
            lyapunov: Vec::with_capacity(n),
            noise_seed: seed,
            noise_stream: stream,
        }
    }

    fn push(&mut self, t: f64, s: CoupledState, u: f64, v: f64) {
        self.times.push(t);
        self.states.push(s);
        self.controls.push(u);
        self.lyapunov.push(v);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&CoupledState> {
        self.states.last()
    }

    /// Bures distances of each recorded component to the law's target pole.
    pub fn bures_to_target(&self, law: &FeedbackLaw) -> Vec<(f64, f64)> {
        self.states
            .iter()
            .map(|s| (bures_to_pole(&s.actual, law.target), bures_to_pole(&s.estimate, law.target)))
            .collect()
    }
}

/// What a [`run`] observer wants to happen next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Result of [`run`]: the time at which the observer stopped the run, if it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub stopped_at: Option<f64>,
    pub steps_taken: usize,
    pub final_state: CoupledState,
}

/// Core stepping loop. `observe` sees every recorded sample
/// `(t, state, u)` and may stop the run early.
pub fn run<N, F>(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    noise: &mut N,
    mut observe: F,
) -> Result<RunOutcome>
where
    N: NoiseSource + ?Sized,
    F: FnMut(f64, &CoupledState, f64) -> Flow,
{
    cfg.validate()?;
    ic.check()?;
    let n_steps = cfg.n_steps();
    let mut s = *ic;
    let mut u = law.u(&s.estimate);
    if observe(0.0, &s, u) == Flow::Stop {
        return Ok(RunOutcome { stopped_at: Some(0.0), steps_taken: 0, final_state: s });
    }
    for k in 1..=n_steps {
        let dw = noise.increment(cfg.dt);
        s = step_raw(&s, u, dw, cfg.dt, p, e, cfg.projection);
        let t = k as f64 * cfg.dt;
        if !s.is_finite() {
            return Err(Error::Blowup { step: k, time: t });
        }
        u = law.u(&s.estimate);
        if k % cfg.record_stride == 0 && observe(t, &s, u) == Flow::Stop {
            return Ok(RunOutcome { stopped_at: Some(t), steps_taken: k, final_state: s });
        }
    }
    Ok(RunOutcome { stopped_at: None, steps_taken: n_steps, final_state: s })
}

/// Simulates with an explicit noise source and records every
/// `record_stride`-th state.
pub fn simulate_with_noise<N: NoiseSource + ?Sized>(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    noise: &mut N,
    stream: u64,
) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(cfg.n_steps() / cfg.record_stride.max(1) + 1, cfg.seed, stream);
    run(ic, p, e, law, cfg, noise, |t, s, u| {
        traj.push(t, *s, u, lyapunov_v(s, law.target));
        Flow::Continue
    })?;
    Ok(traj)
}

/// Simulates trajectory `stream` of the ensemble keyed by `cfg.seed`.
pub fn simulate_stream(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    stream: u64,
) -> Result<Trajectory> {
    let mut noise = GaussianNoise::new(cfg.seed, stream);
    simulate_with_noise(ic, p, e, law, cfg, &mut noise, stream)
}

/// Deterministic in `(inputs, cfg.seed)`; uses noise stream 0.
pub fn simulate(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
) -> Result<Trajectory> {
    simulate_stream(ic, p, e, law, cfg, 0)
}
