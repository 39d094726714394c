//! Parallel Monte Carlo over independent trajectories.
//!
//! Trajectory `i` draws its noise from ChaCha stream `i` of the master seed, so
//! every per-trajectory result is independent of scheduling. Results are
//! reduced in index order after the parallel phase; summaries are therefore
//! bit-identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{default_window, estimate_sample_exponent, lyapunov_v};
use crate::controller::FeedbackLaw;
use crate::dynamics::{EstParams, PhysParams};
use crate::error::{Error, Result};
use crate::integrator::{run, simulate_stream, Flow, GaussianNoise, SdeConfig};
use crate::qstate::{bures_to_pole, coupled_distance_to_poles, BlochVector, CoupledState, TargetState};

/// Salt separating initial-condition sampling streams from noise streams.
const IC_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleOptions {
    /// Terminal-distance threshold for the convergence fractions.
    pub threshold: f64,
    /// Per-trajectory exponent window; defaults to the last 80% of the span.
    pub window: Option<(f64, f64)>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            threshold: 0.05,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub q10: Vec<f64>,
    pub q50: Vec<f64>,
    pub q90: Vec<f64>,
    /// Least-squares slope of `log V` per trajectory; `None` when the fit failed.
    pub per_traj_exponents: Vec<Option<f64>>,
    pub terminal_v: Vec<Option<f64>>,
    pub terminal_states: Vec<Option<CoupledState>>,
    /// Fraction of trajectories whose terminal coupled Bures distance to the
    /// target pair is below `threshold`.
    pub convergence_fraction: f64,
    /// Fraction of trajectories whose terminal `V` is below `threshold`.
    pub v_convergence_fraction: f64,
    pub threshold: f64,
    pub failures: Vec<TrajectoryFailure>,
}

struct PathResult {
    lyapunov: Vec<f64>,
    times: Vec<f64>,
    terminal: CoupledState,
    exponent: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn run_ensemble(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    n_traj: usize,
) -> Result<EnsembleSummary> {
    run_ensemble_with(ic, p, e, law, cfg, n_traj, &EnsembleOptions::default())
}

pub fn run_ensemble_with(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    n_traj: usize,
    opts: &EnsembleOptions,
) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(Error::param("n_traj", "must be >= 1"));
    }
    cfg.validate()?;
    ic.check()?;

    let results: Vec<std::result::Result<PathResult, Error>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let traj = simulate_stream(ic, p, e, law, cfg, i as u64)?;
            let window = opts.window.unwrap_or_else(|| default_window(&traj.times));
            let exponent = estimate_sample_exponent(&traj.times, &traj.lyapunov, window)
                .ok()
                .map(|r| r.slope);
            let terminal = *traj.last_state().expect("trajectory records the initial state");
            Ok(PathResult {
                lyapunov: traj.lyapunov,
                times: traj.times,
                terminal,
                exponent,
            })
        })
        .collect();

    let mut failures = Vec::new();
    let mut ok: Vec<&PathResult> = Vec::with_capacity(n_traj);
    let mut per_traj_exponents = Vec::with_capacity(n_traj);
    let mut terminal_v = Vec::with_capacity(n_traj);
    let mut terminal_states = Vec::with_capacity(n_traj);
    let (mut converged, mut v_converged) = (0usize, 0usize);
    for (index, r) in results.iter().enumerate() {
        match r {
            Ok(path) => {
                let v_end = lyapunov_v(&path.terminal, law.target);
                let d_end = coupled_distance_to_poles(&path.terminal, law.target, law.target);
                converged += (d_end < opts.threshold) as usize;
                v_converged += (v_end < opts.threshold) as usize;
                per_traj_exponents.push(path.exponent);
                terminal_v.push(Some(v_end));
                terminal_states.push(Some(path.terminal));
                ok.push(path);
            }
            Err(err) => {
                failures.push(TrajectoryFailure {
                    index,
                    message: err.to_string(),
                });
                per_traj_exponents.push(None);
                terminal_v.push(None);
                terminal_states.push(None);
            }
        }
    }

    let times = ok.first().map(|r| r.times.clone()).unwrap_or_default();
    let n_times = times.len();
    let (mut mean_v, mut q10, mut q50, mut q90) = (
        Vec::with_capacity(n_times),
        Vec::with_capacity(n_times),
        Vec::with_capacity(n_times),
        Vec::with_capacity(n_times),
    );
    let mut column = Vec::with_capacity(ok.len());
    for k in 0..n_times {
        column.clear();
        column.extend(ok.iter().map(|r| r.lyapunov[k]));
        mean_v.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        q10.push(quantile(&column, 0.1));
        q50.push(quantile(&column, 0.5));
        q90.push(quantile(&column, 0.9));
    }

    Ok(EnsembleSummary {
        n_traj,
        times,
        mean_v,
        q10,
        q50,
        q90,
        per_traj_exponents,
        terminal_v,
        terminal_states,
        convergence_fraction: converged as f64 / n_traj as f64,
        v_convergence_fraction: v_converged as f64 / n_traj as f64,
        threshold: opts.threshold,
        failures,
    })
}

impl EnsembleSummary {
    /// Median of the successful per-trajectory exponent fits.
    pub fn median_exponent(&self) -> Option<f64> {
        let mut xs: Vec<f64> = self.per_traj_exponents.iter().flatten().copied().collect();
        if xs.is_empty() {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        Some(quantile(&xs, 0.5))
    }
}

/// Uniform point of the closed unit ball.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let b = BlochVector::new_unchecked(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if b.norm_sq() <= 1.0 {
            return b;
        }
    }
}

/// Lowest `s z` (with `s` the pole's sign) of points within Bures distance `r`
/// of the pole: `d_B < r  <=>  (1 + s z) / 2 > (1 - r^2/2)^2`.
fn cap_height(radius: f64) -> f64 {
    let root = (1.0 - 0.5 * radius * radius).max(0.0);
    (2.0 * root * root - 1.0).max(-1.0)
}

/// Uniform point of the ball restricted to the Bures cap of `radius` around
/// `pole`, by rejection from the cap's bounding box.
fn sample_cap<R: Rng + ?Sized>(rng: &mut R, pole: TargetState, radius: f64) -> BlochVector {
    let zc = cap_height(radius);
    let half = if zc > 0.0 { (1.0 - zc * zc).sqrt() } else { 1.0 };
    let sign = pole.z_sign();
    loop {
        let b = BlochVector::new_unchecked(
            rng.random_range(-half..=half),
            rng.random_range(-half..=half),
            sign * rng.random_range(zc..=1.0),
        );
        if b.norm_sq() <= 1.0 && bures_to_pole(&b, pole) < radius {
            return b;
        }
    }
}

/// Uniform sample of the punctured coupled Bures ball of `radius` around the
/// pole pair `center`. Proposals are uniform on the product of component
/// caps, which contains the coupled ball, so accepted points are uniform on it.
pub fn sample_coupled_ball<R: Rng + ?Sized>(
    rng: &mut R,
    center: (TargetState, TargetState),
    radius: f64,
) -> CoupledState {
    loop {
        let s = CoupledState {
            actual: sample_cap(rng, center.0, radius),
            estimate: sample_cap(rng, center.1, radius),
        };
        let d = coupled_distance_to_poles(&s, center.0, center.1);
        if d < radius && d > 0.0 {
            return s;
        }
    }
}

/// `n` initial conditions uniform on ball x ball, deterministic in `seed`.
pub fn sample_initial_conditions(n: usize, seed: u64) -> Vec<CoupledState> {
    (0..n)
        .map(|i| {
            let mut rng = ic_rng(seed, i as u64);
            CoupledState {
                actual: sample_ball(&mut rng),
                estimate: sample_ball(&mut rng),
            }
        })
        .collect()
}

fn ic_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ IC_SALT);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitStudy {
    pub radius: f64,
    pub n_traj: usize,
    pub exit_fraction: f64,
    /// Mean exit time among trajectories that exited.
    pub mean_exit_time: Option<f64>,
    pub exit_times: Vec<Option<f64>>,
    /// Exit is detected on the recording grid, every `record_stride * dt`.
    pub detection_interval: f64,
    pub failures: Vec<TrajectoryFailure>,
}

/// Exit from the coupled ball around the unstable pair (antipode, target):
/// initial points are sampled uniformly in the punctured ball.
pub fn exit_time_study(
    radius: f64,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    n_traj: usize,
) -> Result<ExitStudy> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", format!("must be > 0, got {radius}")));
    }
    let center = (law.target.antipode(), law.target);
    let ics: Vec<CoupledState> = (0..n_traj)
        .map(|i| sample_coupled_ball(&mut ic_rng(cfg.seed, i as u64), center, radius))
        .collect();
    exit_study_from(&ics, radius, p, e, law, cfg)
}

/// Exit study from explicit initial points (one trajectory per point).
pub fn exit_study_from(
    ics: &[CoupledState],
    radius: f64,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
) -> Result<ExitStudy> {
    if ics.is_empty() {
        return Err(Error::param("n_traj", "must be >= 1"));
    }
    cfg.validate()?;
    let center = (law.target.antipode(), law.target);
    let hits = hitting_times(ics, p, e, law, cfg, |s| {
        coupled_distance_to_poles(s, center.0, center.1) >= radius
    });
    let (times, failures) = split_hits(hits);
    let exited: Vec<f64> = times.iter().flatten().copied().collect();
    Ok(ExitStudy {
        radius,
        n_traj: ics.len(),
        exit_fraction: exited.len() as f64 / ics.len() as f64,
        mean_exit_time: mean(&exited),
        exit_times: times,
        detection_interval: cfg.dt * cfg.record_stride as f64,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachStudy {
    pub radius: f64,
    pub n_traj: usize,
    pub reach_fraction: f64,
    /// Mean hitting time among trajectories that reached the ball.
    pub mean_tau_r: Option<f64>,
    pub hit_times: Vec<Option<f64>>,
    pub detection_interval: f64,
    pub failures: Vec<TrajectoryFailure>,
}

/// Hitting of the coupled ball of `radius` around (target, target).
/// Trajectory `i` starts from `ics[i % ics.len()]`.
pub fn reach_time_study(
    ics: &[CoupledState],
    radius: f64,
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    n_traj: usize,
) -> Result<ReachStudy> {
    if ics.is_empty() || n_traj == 0 {
        return Err(Error::param("n_traj", "need at least one initial condition and one trajectory"));
    }
    if !(radius > 0.0) {
        return Err(Error::param("radius", format!("must be > 0, got {radius}")));
    }
    cfg.validate()?;
    let bad = CoupledState::at_poles(law.target.antipode(), law.target);
    if ics.contains(&bad) {
        log::warn!("an initial condition sits on the unstable equilibrium and cannot reach the target");
    }
    let starts: Vec<CoupledState> = (0..n_traj).map(|i| ics[i % ics.len()]).collect();
    let target = law.target;
    let hits = hitting_times(&starts, p, e, law, cfg, |s| {
        coupled_distance_to_poles(s, target, target) < radius
    });
    let (times, failures) = split_hits(hits);
    let reached: Vec<f64> = times.iter().flatten().copied().collect();
    Ok(ReachStudy {
        radius,
        n_traj,
        reach_fraction: reached.len() as f64 / n_traj as f64,
        mean_tau_r: mean(&reached),
        hit_times: times,
        detection_interval: cfg.dt * cfg.record_stride as f64,
        failures,
    })
}

fn hitting_times<F>(
    starts: &[CoupledState],
    p: &PhysParams,
    e: &EstParams,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    hit: F,
) -> Vec<Result<Option<f64>>>
where
    F: Fn(&CoupledState) -> bool + Sync,
{
    starts
        .par_iter()
        .enumerate()
        .map(|(i, ic)| {
            let mut noise = GaussianNoise::new(cfg.seed, i as u64);
            let outcome = run(ic, p, e, law, cfg, &mut noise, |_, s, _| {
                if hit(s) {
                    Flow::Stop
                } else {
                    Flow::Continue
                }
            })?;
            Ok(outcome.stopped_at)
        })
        .collect()
}

fn split_hits(hits: Vec<Result<Option<f64>>>) -> (Vec<Option<f64>>, Vec<TrajectoryFailure>) {
    let mut failures = Vec::new();
    let times = hits
        .into_iter()
        .enumerate()
        .map(|(index, h)| match h {
            Ok(t) => t,
            Err(err) => {
                failures.push(TrajectoryFailure {
                    index,
                    message: err.to_string(),
                });
                None
            }
        })
        .collect();
    (times, failures)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}
