//! `simulate`, `ensemble`, `exponent` and `exit-time`.

use std::io::Write;

use qfeedback::analysis::{default_window, CAPTION_NU_AV, CAPTION_NU_S};
use qfeedback::ensemble::{run_ensemble_with, TrajectoryFailure};
use qfeedback::{
    estimate_sample_exponent, exit_time_study, k_bound, nu_av, nu_s, simulate, validate_hypothesis_h,
    validate_param_condition, EnsembleOptions, EnsembleSummary, ExitStudy, ExponentReport, HypothesisReport,
    ParamCondition, Trajectory,
};
use serde::Serialize;

use crate::csv::{read_columns, write_header, write_row};
use crate::scenario::{Resolved, Scenario};
use crate::CliError;

pub const SIMULATE_COLUMNS: [&str; 11] =
    ["t", "x", "y", "z", "x_hat", "y_hat", "z_hat", "u", "V", "dB_actual", "dB_estimate"];
pub const ENSEMBLE_COLUMNS: [&str; 5] = ["t", "mean_V", "q10", "q50", "q90"];

fn resolve_warn(scn: &Scenario) -> Result<Resolved, CliError> {
    let r = scn.resolve()?;
    let pc = validate_param_condition(&r.phys, &r.est);
    if !pc.ok {
        log::warn!("eta_hat M_hat >= 4 eta M (margin {}); convergence is not guaranteed", pc.margin);
    }
    Ok(r)
}

/// One trajectory, written as CSV rows at the recorded times.
pub fn cmd_simulate<W: Write + ?Sized>(scn: &Scenario, out: &mut W) -> Result<Trajectory, CliError> {
    let r = resolve_warn(scn)?;
    let h = validate_hypothesis_h(&r.law);
    if !h.ok {
        log::warn!("feedback law violates the stabilization hypothesis: {}", h.violations.join("; "));
    }
    let traj = simulate(&r.ic, &r.phys, &r.est, &r.law, &r.sde)?;
    write_header(out, &SIMULATE_COLUMNS)?;
    let dists = traj.bures_to_target(&r.law);
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let (a, e) = (s.actual, s.estimate);
        write_row(
            out,
            &[traj.times[k], a.x, a.y, a.z, e.x, e.y, e.z, traj.controls[k], traj.lyapunov[k], dists[k].0, dists[k].1],
        )?;
    }
    Ok(traj)
}

/// Reference exponents: formula values next to the published reference values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rates {
    pub nu_av: f64,
    pub nu_s: f64,
    pub k_bound: f64,
    pub caption_nu_av: f64,
    pub caption_nu_s: f64,
}

impl Rates {
    fn of(r: &Resolved) -> Self {
        Rates {
            nu_av: nu_av(&r.phys, &r.est),
            nu_s: nu_s(&r.phys, &r.est),
            k_bound: k_bound(&r.phys, &r.est),
            caption_nu_av: CAPTION_NU_AV,
            caption_nu_s: CAPTION_NU_S,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub n_traj: usize,
    pub rates: Rates,
    /// Fit of the mean `V` curve; absent when the window holds too few samples.
    pub mean_curve: Option<ExponentReport>,
    pub per_traj_exponents: Vec<Option<f64>>,
    pub median_exponent: Option<f64>,
    pub convergence_fraction: f64,
    pub v_convergence_fraction: f64,
    pub threshold: f64,
    pub terminal_v: Vec<Option<f64>>,
    pub param_condition: ParamCondition,
    pub hypothesis: HypothesisReport,
    pub failures: Vec<TrajectoryFailure>,
}

fn ensemble_summary(scn: &Scenario) -> Result<(Resolved, EnsembleSummary), CliError> {
    let r = resolve_warn(scn)?;
    let opts = EnsembleOptions {
        threshold: scn.threshold,
        window: scn.window(),
    };
    let summary = run_ensemble_with(&r.ic, &r.phys, &r.est, &r.law, &r.sde, scn.n_traj, &opts)?;
    for f in &summary.failures {
        log::warn!("trajectory {} failed: {}", f.index, f.message);
    }
    Ok((r, summary))
}

fn mean_curve_fit(summary: &EnsembleSummary, window: Option<(f64, f64)>) -> Result<ExponentReport, CliError> {
    let w = window.unwrap_or_else(|| default_window(&summary.times));
    Ok(estimate_sample_exponent(&summary.times, &summary.mean_v, w)?)
}

/// Runs the ensemble, writes the `t,mean_V,q10,q50,q90` CSV and returns the
/// JSON summary.
pub fn cmd_ensemble<W: Write + ?Sized>(scn: &Scenario, csv: &mut W) -> Result<EnsembleReport, CliError> {
    let (r, summary) = ensemble_summary(scn)?;
    write_header(csv, &ENSEMBLE_COLUMNS)?;
    for k in 0..summary.times.len() {
        write_row(csv, &[summary.times[k], summary.mean_v[k], summary.q10[k], summary.q50[k], summary.q90[k]])?;
    }
    Ok(EnsembleReport {
        scenario: scn.clone(),
        seed: scn.seed,
        n_traj: summary.n_traj,
        rates: Rates::of(&r),
        mean_curve: mean_curve_fit(&summary, scn.window()).ok(),
        median_exponent: summary.median_exponent(),
        per_traj_exponents: summary.per_traj_exponents,
        convergence_fraction: summary.convergence_fraction,
        v_convergence_fraction: summary.v_convergence_fraction,
        threshold: summary.threshold,
        terminal_v: summary.terminal_v,
        param_condition: validate_param_condition(&r.phys, &r.est),
        hypothesis: validate_hypothesis_h(&r.law),
        failures: summary.failures,
    })
}

pub enum ExponentSource<'a> {
    /// Run the scenario's ensemble.
    Ensemble(&'a Scenario),
    /// Fit a CSV already on disk; it needs a `t` column and a `mean_V` or `V` column.
    Csv { text: &'a str, scenario: Option<&'a Scenario> },
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentSummary {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub mean_curve: ExponentReport,
    pub per_traj_exponents: Vec<Option<f64>>,
    pub median_exponent: Option<f64>,
    pub rates: Option<Rates>,
    /// Mean-curve slope at most `nu_av + 0.1`.
    pub mean_within_nu_av: Option<bool>,
    /// Median per-trajectory slope at most `nu_s + 0.1`.
    pub median_within_nu_s: Option<bool>,
}

pub fn cmd_exponent(source: ExponentSource<'_>, window: Option<(f64, f64)>) -> Result<ExponentSummary, CliError> {
    match source {
        ExponentSource::Ensemble(scn) => {
            let (r, summary) = ensemble_summary(scn)?;
            let mean_curve = mean_curve_fit(&summary, window.or(scn.window()))?;
            let rates = Rates::of(&r);
            let median = summary.median_exponent();
            Ok(ExponentSummary {
                scenario: Some(scn.clone()),
                seed: Some(scn.seed),
                mean_within_nu_av: Some(mean_curve.slope <= rates.nu_av + 0.1),
                median_within_nu_s: median.map(|m| m <= rates.nu_s + 0.1),
                mean_curve,
                per_traj_exponents: summary.per_traj_exponents,
                median_exponent: median,
                rates: Some(rates),
            })
        }
        ExponentSource::Csv { text, scenario } => {
            let (header, cols) = read_columns(text).map_err(CliError::Config)?;
            let find = |name: &str| header.iter().position(|h| h == name);
            let t = find("t").ok_or_else(|| CliError::Config("CSV has no `t` column".into()))?;
            let v = find("mean_V")
                .or_else(|| find("V"))
                .ok_or_else(|| CliError::Config("CSV has no `mean_V` or `V` column".into()))?;
            let w = window
                .or(scenario.and_then(|s| s.window()))
                .unwrap_or_else(|| default_window(&cols[t]));
            let mean_curve = estimate_sample_exponent(&cols[t], &cols[v], w)?;
            let rates = match scenario {
                Some(s) => Some(Rates::of(&s.resolve()?)),
                None => None,
            };
            Ok(ExponentSummary {
                scenario: scenario.cloned(),
                seed: scenario.map(|s| s.seed),
                mean_within_nu_av: rates.map(|r| mean_curve.slope <= r.nu_av + 0.1),
                median_within_nu_s: None,
                mean_curve,
                per_traj_exponents: Vec::new(),
                median_exponent: None,
                rates,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub study: ExitStudy,
}

/// Exit study from the coupled ball around (antipode, target); `radius`
/// overrides the scenario's.
pub fn cmd_exit_time(scn: &Scenario, radius: Option<f64>) -> Result<ExitReport, CliError> {
    let r = resolve_warn(scn)?;
    let radius = radius.unwrap_or(scn.radius);
    let study = exit_time_study(radius, &r.phys, &r.est, &r.law, &r.sde, scn.n_traj)?;
    for f in &study.failures {
        log::warn!("trajectory {} failed: {}", f.index, f.message);
    }
    Ok(ExitReport {
        scenario: Scenario { radius, ..scn.clone() },
        seed: scn.seed,
        study,
    })
}
