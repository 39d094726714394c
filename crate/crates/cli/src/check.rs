//! Invariant batteries behind `check`, also reused by the acceptance suite.

use qfeedback::dynamics::{
    bloch_image, diffusion_actual, diffusion_estimate, drift_actual, drift_estimate, filter_drift_matrix,
    superoperator_g, superoperator_l, VectorField3,
};
use qfeedback::ensemble::sample_ball;
use qfeedback::qstate::bloch_to_density;
use qfeedback::{
    generator_v_closed, generator_v_numeric, run_ensemble, validate_hypothesis_h, validate_param_condition,
    CoupledState, DerivativeMode, EstParams, FeedbackLaw, PhysParams, SdeConfig, TargetState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::Scenario;
use crate::CliError;

pub const GENERATOR_TOL: f64 = 1e-9;
pub const MATRIX_TOL: f64 = 1e-12;

/// Parameters drawn uniformly from a box and kept when `eta_hat M_hat < 4 eta M`.
pub fn random_admissible_params<R: Rng + ?Sized>(rng: &mut R) -> (PhysParams, EstParams) {
    loop {
        let p = PhysParams::new(rng.random_range(0.0..2.0), rng.random_range(0.01..=1.0), rng.random_range(0.05..3.0));
        let e = EstParams::new(rng.random_range(0.0..2.0), rng.random_range(0.01..=1.0), rng.random_range(0.05..3.0));
        if let (Ok(p), Ok(e)) = (p, e) {
            if validate_param_condition(&p, &e).ok {
                return (p, e);
            }
        }
    }
}

/// Largest `|closed - generic|` generator deviation over `points` random
/// interior states and controls per parameter set.
pub fn generator_battery(sets: &[(PhysParams, EstParams)], points: usize, seed: u64) -> Result<f64, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (p, e) in sets {
        for _ in 0..points {
            let s = CoupledState { actual: sample_ball(&mut rng), estimate: sample_ball(&mut rng) };
            let u = rng.random_range(-10.0..10.0);
            let closed = generator_v_closed(&s, u, p, e)?;
            let generic = generator_v_numeric(&s, u, p, e, TargetState::Excited, DerivativeMode::Analytic)?;
            worst = worst.max((closed - generic).abs());
        }
    }
    Ok(worst)
}

fn field_dev(a: VectorField3, b: VectorField3) -> f64 {
    (a.dx - b.dx).abs().max((a.dy - b.dy).abs()).max((a.dz - b.dz).abs())
}

/// Largest deviation between the matrix forms of the actual and filter
/// dynamics and their Bloch fields, over `states` random state pairs per set.
pub fn matrix_bloch_battery(sets: &[(PhysParams, EstParams)], states: usize, seed: u64) -> Result<f64, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (p, e) in sets {
        let ep = e.as_phys();
        for _ in 0..states {
            let s = CoupledState { actual: sample_ball(&mut rng), estimate: sample_ball(&mut rng) };
            let u = rng.random_range(-10.0..10.0);
            let rho = bloch_to_density(s.actual)?;
            let rho_hat = bloch_to_density(s.estimate)?;
            let devs = [
                field_dev(bloch_image(&superoperator_l(&rho, u, p)), drift_actual(&s.actual, u, p)),
                field_dev(bloch_image(&superoperator_g(&rho, p)), diffusion_actual(&s.actual, p)),
                field_dev(bloch_image(&filter_drift_matrix(&rho, &rho_hat, u, p, e)), drift_estimate(&s, u, p, e)),
                field_dev(bloch_image(&superoperator_g(&rho_hat, &ep)), diffusion_estimate(&s.estimate, e)),
            ];
            worst = devs.iter().fold(worst, |w, d| w.max(*d));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MartingaleResult {
    pub z0: f64,
    pub mean_z: f64,
    pub std_err: f64,
    pub n_traj: usize,
    /// `|mean z_T - z0| <= 3 std_err`.
    pub ok: bool,
}

/// With `u = 0` the actual `z` has no drift, so its ensemble mean at `t_final`
/// stays at `z0` up to sampling error.
pub fn martingale_test(
    ic: &CoupledState,
    p: &PhysParams,
    e: &EstParams,
    target: TargetState,
    n_traj: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<MartingaleResult, CliError> {
    let cfg = SdeConfig {
        dt,
        t_final,
        record_stride: ((t_final / dt).round() as usize).max(1),
        seed,
        ..SdeConfig::default()
    };
    let summary = run_ensemble(ic, p, e, &FeedbackLaw::zero(target), &cfg, n_traj)?;
    if let Some(f) = summary.failures.first() {
        return Err(CliError::Config(format!("martingale trajectory {} failed: {}", f.index, f.message)));
    }
    let zs: Vec<f64> = summary.terminal_states.iter().flatten().map(|s| s.actual.z).collect();
    let n = zs.len() as f64;
    let mean_z = zs.iter().sum::<f64>() / n;
    let var = zs.iter().map(|z| (z - mean_z).powi(2)).sum::<f64>() / (n - 1.0);
    let std_err = (var / n).sqrt();
    let z0 = ic.actual.z;
    Ok(MartingaleResult {
        z0,
        mean_z,
        std_err,
        n_traj: zs.len(),
        ok: (mean_z - z0).abs() <= 3.0 * std_err,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

const CHECK_POINTS: usize = 1000;
const MARTINGALE_TRAJ: usize = 10_000;

/// Runs every battery against the scenario's parameters. The martingale test
/// starts from the scenario's initial condition.
pub fn cmd_check(scn: &Scenario) -> Result<CheckReport, CliError> {
    let r = scn.resolve()?;
    let sets = [(r.phys, r.est)];
    let mut props = Vec::new();

    let gen = generator_battery(&sets, CHECK_POINTS, scn.seed)?;
    props.push(PropertyResult {
        name: "generator_equality",
        passed: gen < GENERATOR_TOL,
        detail: serde_json::json!({ "max_deviation": gen, "tolerance": GENERATOR_TOL, "points": CHECK_POINTS }),
    });

    let mat = matrix_bloch_battery(&sets, CHECK_POINTS, scn.seed)?;
    props.push(PropertyResult {
        name: "matrix_bloch_consistency",
        passed: mat <= MATRIX_TOL,
        detail: serde_json::json!({ "max_deviation": mat, "tolerance": MATRIX_TOL, "states": CHECK_POINTS }),
    });

    let mart = martingale_test(&r.ic, &r.phys, &r.est, r.law.target, MARTINGALE_TRAJ, 1.0, 1e-3, scn.seed)?;
    props.push(PropertyResult {
        name: "martingale",
        passed: mart.ok,
        detail: serde_json::to_value(mart)?,
    });

    let h = validate_hypothesis_h(&r.law);
    props.push(PropertyResult {
        name: "hypothesis_h",
        passed: h.ok,
        detail: serde_json::to_value(&h)?,
    });

    let pc = validate_param_condition(&r.phys, &r.est);
    props.push(PropertyResult {
        name: "param_condition",
        passed: pc.ok,
        detail: serde_json::to_value(pc)?,
    });

    Ok(CheckReport {
        scenario: scn.clone(),
        seed: scn.seed,
        passed: props.iter().all(|p| p.passed),
        properties: props,
    })
}

