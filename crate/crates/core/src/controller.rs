//! Feedback laws `u(rho_hat)` and checks of the conditions a law must meet
//! for the target to be stabilizable.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{EstParams, PhysParams};
use crate::qstate::{BlochVector, TargetState};

type LawFn = dyn Fn(&BlochVector) -> f64 + Send + Sync;

/// A user-supplied law, evaluated on the estimated Bloch vector.
#[derive(Clone)]
pub struct CustomLaw {
    pub tag: String,
    f: Arc<LawFn>,
}

impl CustomLaw {
    pub fn new(tag: impl Into<String>, f: impl Fn(&BlochVector) -> f64 + Send + Sync + 'static) -> Self {
        CustomLaw {
            tag: tag.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw").field("tag", &self.tag).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum LawKind {
    /// `alpha (1 - Tr(rho_hat P_target))^beta`.
    Power,
    Zero,
    Custom(CustomLaw),
}

#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    pub target: TargetState,
    pub alpha: f64,
    pub beta: f64,
    pub kind: LawKind,
}

impl FeedbackLaw {
    pub fn power(target: TargetState, alpha: f64, beta: f64) -> Self {
        FeedbackLaw {
            target,
            alpha,
            beta,
            kind: LawKind::Power,
        }
    }

    pub fn zero(target: TargetState) -> Self {
        FeedbackLaw {
            target,
            alpha: 0.0,
            beta: 1.0,
            kind: LawKind::Zero,
        }
    }

    pub fn custom(target: TargetState, law: CustomLaw) -> Self {
        FeedbackLaw {
            target,
            alpha: 0.0,
            beta: 1.0,
            kind: LawKind::Custom(law),
        }
    }

    /// Parameter sanity for the power law: `alpha > 0`, `beta >= 1`.
    pub fn check_gains(&self) -> Result<(), String> {
        if let LawKind::Power = self.kind {
            if !(self.alpha.is_finite() && self.alpha > 0.0) {
                return Err(format!("alpha must be > 0, got {}", self.alpha));
            }
            if !(self.beta.is_finite() && self.beta >= 1.0) {
                return Err(format!("beta must be >= 1, got {}", self.beta));
            }
        }
        Ok(())
    }

    /// Distance-like coordinate `1 - Tr(rho_hat P_target)`, i.e. `(1 ∓ z_hat) / 2`.
    pub fn infidelity(&self, b_hat: &BlochVector) -> f64 {
        (1.0 - self.target.population(b_hat)).max(0.0)
    }

    pub fn u(&self, b_hat: &BlochVector) -> f64 {
        match &self.kind {
            LawKind::Power => self.alpha * self.infidelity(b_hat).powf(self.beta),
            LawKind::Zero => 0.0,
            LawKind::Custom(c) => (c.f)(b_hat),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            LawKind::Power => format!("power(alpha={}, beta={})", self.alpha, self.beta),
            LawKind::Zero => "zero".to_string(),
            LawKind::Custom(c) => format!("custom({})", c.tag),
        }
    }
}

pub fn feedback_u(law: &FeedbackLaw, b_hat: &BlochVector) -> f64 {
    law.u(b_hat)
}

/// Outcome of checking a law against the stabilization hypothesis:
/// `u(target) = 0`, `u(antipode) != 0`, and `|u| <= C (1 - Tr(rho_hat P_target))^a`
/// near the target with `a > 1/2`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub ok: bool,
    /// Growth-bound constant `C`.
    pub c: f64,
    /// Growth-bound exponent `a`.
    pub alpha_exp: f64,
    pub violations: Vec<String>,
}

const GROWTH_SAMPLES: usize = 10_000;

/// Checks a law against the hypothesis. Power laws are certified analytically;
/// other laws are sampled near the target and the growth exponent is fitted.
pub fn validate_hypothesis_h(law: &FeedbackLaw) -> HypothesisReport {
    let mut violations = Vec::new();
    let at_target = law.u(&BlochVector::pole(law.target));
    let at_antipode = law.u(&BlochVector::pole(law.target.antipode()));
    if at_target != 0.0 {
        violations.push(format!("u(target) = {at_target} is not zero"));
    }
    if at_antipode == 0.0 || !at_antipode.is_finite() {
        violations.push(format!("u(antipode) = {at_antipode} must be non-zero"));
    }
    if let Err(msg) = law.check_gains() {
        violations.push(msg);
    }

    let (c, alpha_exp) = match law.kind {
        LawKind::Power => (law.alpha, law.beta),
        LawKind::Zero => (0.0, f64::INFINITY),
        LawKind::Custom(_) => fit_growth(law, &mut violations),
    };
    if !(alpha_exp > 0.5) {
        violations.push(format!("growth exponent {alpha_exp} does not exceed 1/2"));
    }

    HypothesisReport {
        ok: violations.is_empty(),
        c,
        alpha_exp,
        violations,
    }
}

/// Samples points with infidelity `s` in `[1e-8, 1e-2]` (log-uniform) and fits
/// `log|u| = log C + a log s` by least squares.
fn fit_growth(law: &FeedbackLaw, violations: &mut Vec<String>) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_db0d);
    let sign = law.target.z_sign();
    let mut pts = Vec::with_capacity(GROWTH_SAMPLES);
    for _ in 0..GROWTH_SAMPLES {
        let s = 10f64.powf(rng.random_range(-8.0..-2.0));
        let z = sign * (1.0 - 2.0 * s);
        let rmax = (1.0 - z * z).max(0.0).sqrt();
        let r = rmax * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let b = BlochVector::new_unchecked(r * phi.cos(), r * phi.sin(), z);
        let u = law.u(&b);
        if !u.is_finite() {
            violations.push(format!("u is not finite at {b:?}"));
            return (f64::NAN, f64::NAN);
        }
        pts.push((s.ln(), u.abs()));
    }
    let nonzero: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|&(ls, u)| (ls, u.ln())).collect();
    if nonzero.is_empty() {
        return (0.0, f64::INFINITY);
    }
    if nonzero.len() < 3 {
        violations.push("too few non-zero samples to fit a growth exponent".to_string());
        return (f64::NAN, f64::NAN);
    }
    let n = nonzero.len() as f64;
    let mx = nonzero.iter().map(|p| p.0).sum::<f64>() / n;
    let my = nonzero.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = nonzero.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = nonzero.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    // Smallest C making the bound hold on every sample with the fitted exponent.
    let c = pts
        .iter()
        .map(|&(ls, u)| u / (slope * ls).exp())
        .fold(0.0f64, f64::max);
    (c, slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamCondition {
    pub ok: bool,
    /// `4 eta M - eta_hat M_hat`.
    pub margin: f64,
}

/// Admissibility of the filter parameters: `eta_hat M_hat < 4 eta M`.
pub fn validate_param_condition(p: &PhysParams, e: &EstParams) -> ParamCondition {
    let margin = 4.0 * p.eta * p.m - e.eta_hat * e.m_hat;
    ParamCondition {
        ok: margin > 0.0,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TargetState::*;

    fn zhat(z: f64) -> BlochVector {
        BlochVector::new_unchecked(0.0, 0.0, z)
    }

    #[test]
    fn power_law_examples() {
        let law = FeedbackLaw::power(Excited, 10.0, 2.0);
        assert_eq!(law.u(&zhat(1.0)), 0.0);
        assert!((law.u(&zhat(0.0)) - 2.5).abs() < 1e-15);
        assert!((law.u(&zhat(-1.0)) - 10.0).abs() < 1e-15);
        assert_eq!(FeedbackLaw::zero(Excited).u(&zhat(-1.0)), 0.0);
    }

    #[test]
    fn ground_law_is_reflection_of_excited() {
        let e = FeedbackLaw::power(Excited, 3.0, 1.5);
        let g = FeedbackLaw::power(Ground, 3.0, 1.5);
        for i in 0..=20 {
            let z = -1.0 + 0.1 * i as f64;
            let b = BlochVector::new_unchecked(0.1, -0.2, z * 0.9);
            let reflected = BlochVector::new_unchecked(b.x, b.y, -b.z);
            assert!((e.u(&reflected) - g.u(&b)).abs() < 1e-14);
        }
    }

    #[test]
    fn hypothesis_examples() {
        let r = validate_hypothesis_h(&FeedbackLaw::power(Excited, 10.0, 2.0));
        assert!(r.ok);
        assert_eq!(r.alpha_exp, 2.0);
        assert_eq!(r.c, 10.0);

        let r = validate_hypothesis_h(&FeedbackLaw::zero(Excited));
        assert!(!r.ok);
        assert!(r.violations.iter().any(|v| v.contains("antipode")));

        let r = validate_hypothesis_h(&FeedbackLaw::power(Excited, 10.0, 1.0));
        assert!(r.ok);
        assert_eq!(r.alpha_exp, 1.0);

        let r = validate_hypothesis_h(&FeedbackLaw::power(Ground, 10.0, 2.0));
        assert!(r.ok);
    }

    #[test]
    fn power_gains_checked() {
        assert!(!validate_hypothesis_h(&FeedbackLaw::power(Excited, 0.0, 2.0)).ok);
        assert!(!validate_hypothesis_h(&FeedbackLaw::power(Excited, 1.0, 0.5)).ok);
    }

    #[test]
    fn custom_law_exponent_is_fitted() {
        let law = FeedbackLaw::custom(
            Excited,
            CustomLaw::new("quadratic", |b| 4.0 * ((1.0 - b.z) / 2.0).powi(2)),
        );
        let r = validate_hypothesis_h(&law);
        assert!(r.ok, "{r:?}");
        assert!((r.alpha_exp - 2.0).abs() < 1e-6);
        assert!((r.c - 4.0).abs() < 1e-6);

        // sqrt growth is too slow near the target
        let law = FeedbackLaw::custom(
            Excited,
            CustomLaw::new("sqrt", |b| ((1.0 - b.z) / 2.0).max(0.0).powf(0.4)),
        );
        let r = validate_hypothesis_h(&law);
        assert!(!r.ok);
        assert!((r.alpha_exp - 0.4).abs() < 1e-6);

        // not zero at the target
        let law = FeedbackLaw::custom(Excited, CustomLaw::new("offset", |b| 1.0 + b.x));
        assert!(!validate_hypothesis_h(&law).ok);
    }

    #[test]
    fn param_condition_examples() {
        let p = PhysParams::new(0.3, 0.3, 1.3).unwrap();
        let e = EstParams::new(0.5, 0.5, 1.5).unwrap();
        let c = validate_param_condition(&p, &e);
        assert!(c.ok);
        assert!((c.margin - 0.81).abs() < 1e-12);

        let c = validate_param_condition(&p, &p.exact_estimate());
        assert!(c.ok);

        let p = PhysParams::new(0.0, 0.1, 1.0).unwrap();
        let e = EstParams::new(0.0, 1.0, 0.5).unwrap();
        let c = validate_param_condition(&p, &e);
        assert!(!c.ok);
        assert!((c.margin + 0.1).abs() < 1e-12);
    }

    #[test]
    fn power_law_continuity_by_finite_differences() {
        use rand::{Rng, SeedableRng};
        let law = FeedbackLaw::power(Excited, 10.0, 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..1000 {
            let z: f64 = rng.random_range(-0.999..0.999);
            let b = zhat(z);
            let fd = (law.u(&zhat(z + h)) - law.u(&zhat(z - h))) / (2.0 * h);
            // d/dz of alpha ((1 - z)/2)^beta
            let exact = -10.0 * ((1.0 - z) / 2.0);
            assert!((fd - exact).abs() < 1e-6, "z = {z}: {fd} vs {exact}");
            // only z enters
            let shifted = BlochVector::new_unchecked(0.01, -0.02, z);
            assert_eq!(law.u(&b), law.u(&shifted));
        }
    }
}
