//! Lyapunov functions, their infinitesimal generators, the exponent bounds
//! and least-squares exponent fits on simulated curves.

use serde::Serialize;

use crate::dynamics::{
    diffusion_actual, diffusion_estimate, drift_actual, drift_estimate, innovation_factor, EstParams,
    PhysParams,
};
use crate::error::{Error, Result};
use crate::qstate::{coupled_distance_to_poles, CoupledState, TargetState};

/// Exponent printed alongside the reference curves of the excited-target run.
pub const CAPTION_NU_S: f64 = -0.5408;
/// Exponent printed alongside the mean reference curves.
pub const CAPTION_NU_AV: f64 = -0.3458;

/// Samples with `V` below this are treated as numerically zero by the fits.
pub const V_FLOOR: f64 = 1e-12;

/// `sqrt(1 - s z) + sqrt(1 - s z_hat)` with `s = +1` for the excited target and
/// `s = -1` for the ground target.
pub fn lyapunov_v(s: &CoupledState, target: TargetState) -> f64 {
    let sign = target.z_sign();
    (1.0 - sign * s.actual.z).max(0.0).sqrt() + (1.0 - sign * s.estimate.z).max(0.0).sqrt()
}

/// Closed form of the generator of `V = sqrt(1 - z) + sqrt(1 - z_hat)`:
/// `LV = u U1 + U2`.
pub fn generator_v_closed(s: &CoupledState, u: f64, p: &PhysParams, e: &EstParams) -> Result<f64> {
    let (x, z) = (s.actual.x, s.actual.z);
    let (xh, zh) = (s.estimate.x, s.estimate.z);
    if z >= 1.0 {
        return Err(Error::SingularGenerator("z = 1"));
    }
    if zh >= 1.0 {
        return Err(Error::SingularGenerator("z_hat = 1"));
    }
    let (em, em_hat) = (p.eta * p.m, e.eta_hat * e.m_hat);
    let (k, k_hat) = (p.signal_rate(), e.signal_rate());
    let u1 = 0.5 * (x / (1.0 - z).sqrt() + xh / (1.0 - zh).sqrt());
    let u2 = -0.125 * (em * (1.0 + z).powi(2) * (1.0 - z).sqrt() + em_hat * (1.0 + zh).powi(2) * (1.0 - zh).sqrt())
        + 0.5 * k_hat * (1.0 + zh) * (k_hat * zh - k * z) * (1.0 - zh).sqrt();
    Ok(u * u1 + u2)
}

/// A smooth scalar function of the six Bloch coordinates
/// `[x, y, z, x_hat, y_hat, z_hat]`.
pub trait SmoothFn6 {
    fn value(&self, v: &[f64; 6]) -> f64;
    fn gradient(&self, v: &[f64; 6]) -> [f64; 6];
    fn hessian(&self, v: &[f64; 6]) -> [[f64; 6]; 6];
}

/// The Lyapunov candidate with analytic partials.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovCandidate(pub TargetState);

impl SmoothFn6 for LyapunovCandidate {
    fn value(&self, v: &[f64; 6]) -> f64 {
        lyapunov_v(&CoupledState::from_array(*v), self.0)
    }

    fn gradient(&self, v: &[f64; 6]) -> [f64; 6] {
        let s = self.0.z_sign();
        let mut g = [0.0; 6];
        // d/dz sqrt(1 - s z) = -s / (2 sqrt(1 - s z))
        g[2] = -0.5 * s / (1.0 - s * v[2]).sqrt();
        g[5] = -0.5 * s / (1.0 - s * v[5]).sqrt();
        g
    }

    fn hessian(&self, v: &[f64; 6]) -> [[f64; 6]; 6] {
        let s = self.0.z_sign();
        let mut h = [[0.0; 6]; 6];
        h[2][2] = -0.25 / (1.0 - s * v[2]).powf(1.5);
        h[5][5] = -0.25 / (1.0 - s * v[5]).powf(1.5);
        h
    }
}

/// Wraps any value function and differentiates it by central differences.
pub struct FiniteDifference<F> {
    pub f: F,
    pub h: f64,
}

impl<F: Fn(&[f64; 6]) -> f64> SmoothFn6 for FiniteDifference<F> {
    fn value(&self, v: &[f64; 6]) -> f64 {
        (self.f)(v)
    }

    fn gradient(&self, v: &[f64; 6]) -> [f64; 6] {
        let mut g = [0.0; 6];
        for (i, gi) in g.iter_mut().enumerate() {
            let (mut a, mut b) = (*v, *v);
            a[i] += self.h;
            b[i] -= self.h;
            *gi = ((self.f)(&a) - (self.f)(&b)) / (2.0 * self.h);
        }
        g
    }

    fn hessian(&self, v: &[f64; 6]) -> [[f64; 6]; 6] {
        let h = self.h;
        let f0 = (self.f)(v);
        let mut out = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in i..6 {
                let val = if i == j {
                    let (mut a, mut b) = (*v, *v);
                    a[i] += h;
                    b[i] -= h;
                    ((self.f)(&a) - 2.0 * f0 + (self.f)(&b)) / (h * h)
                } else {
                    let shifted = |di: f64, dj: f64| {
                        let mut w = *v;
                        w[i] += di;
                        w[j] += dj;
                        (self.f)(&w)
                    };
                    (shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h)) / (4.0 * h * h)
                };
                out[i][j] = val;
                out[j][i] = val;
            }
        }
        out
    }
}

/// Generic generator of the coupled Bloch SDE applied to `f`:
/// `drift . grad f + 1/2 sigma^T (Hess f) sigma`, where `sigma` is the
/// six-component diffusion vector of the single shared noise.
pub fn generator_of<F: SmoothFn6 + ?Sized>(
    f: &F,
    s: &CoupledState,
    u: f64,
    p: &PhysParams,
    e: &EstParams,
) -> f64 {
    let da = drift_actual(&s.actual, u, p);
    let de = drift_estimate(s, u, p, e);
    let sa = diffusion_actual(&s.actual, p);
    let se = diffusion_estimate(&s.estimate, e);
    let drift = [da.dx, da.dy, da.dz, de.dx, de.dy, de.dz];
    let sigma = [sa.dx, sa.dy, sa.dz, se.dx, se.dy, se.dz];
    let v = s.to_array();
    let g = f.gradient(&v);
    let h = f.hessian(&v);
    let first: f64 = drift.iter().zip(&g).map(|(a, b)| a * b).sum();
    let mut second = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            second += sigma[i] * h[i][j] * sigma[j];
        }
    }
    first + 0.5 * second
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences with the given step; accurate to roughly 1e-5.
    FiniteDifference,
}

/// Generator of `V` computed from the generic formula, for either target.
pub fn generator_v_numeric(
    s: &CoupledState,
    u: f64,
    p: &PhysParams,
    e: &EstParams,
    target: TargetState,
    mode: DerivativeMode,
) -> Result<f64> {
    let sign = target.z_sign();
    if sign * s.actual.z >= 1.0 {
        return Err(Error::SingularGenerator("actual state at the target pole"));
    }
    if sign * s.estimate.z >= 1.0 {
        return Err(Error::SingularGenerator("estimate at the target pole"));
    }
    Ok(match mode {
        DerivativeMode::Analytic => generator_of(&LyapunovCandidate(target), s, u, p, e),
        DerivativeMode::FiniteDifference => {
            let fd = FiniteDifference {
                f: move |v: &[f64; 6]| {
                    (1.0 - sign * v[2]).max(0.0).sqrt() + (1.0 - sign * v[5]).max(0.0).sqrt()
                },
                h: 1e-4,
            };
            generator_of(&fd, s, u, p, e)
        }
    })
}

/// Reference rate of the mean Lyapunov curve:
/// `-sqrt(eta_hat eta M_hat M) + eta_hat M_hat / 2`.
pub fn nu_av(p: &PhysParams, e: &EstParams) -> f64 {
    -cross_rate(p, e) + 0.5 * e.eta_hat * e.m_hat
}

/// Sample-path exponent bound:
/// `-sqrt(eta_hat eta M_hat M) - min(eta M - eta_hat M_hat, 0) / 2`.
pub fn nu_s(p: &PhysParams, e: &EstParams) -> f64 {
    -cross_rate(p, e) - 0.5 * (p.eta * p.m - e.eta_hat * e.m_hat).min(0.0)
}

/// `min(eta M, eta_hat M_hat)`.
pub fn k_bound(p: &PhysParams, e: &EstParams) -> f64 {
    (p.eta * p.m).min(e.eta_hat * e.m_hat)
}

/// `sqrt(eta_hat eta M_hat M)`.
pub fn cross_rate(p: &PhysParams, e: &EstParams) -> f64 {
    (e.eta_hat * p.eta * e.m_hat * p.m).sqrt()
}

/// `1/2 max(-eta M, -2 sqrt(eta_hat eta M_hat M) + eta_hat M_hat)`: the limsup of
/// `U2 / V` at the excited pole pair.
pub fn generator_ratio_limsup(p: &PhysParams, e: &EstParams) -> f64 {
    0.5 * (-p.eta * p.m).max(-2.0 * cross_rate(p, e) + e.eta_hat * e.m_hat)
}

/// Limit of `U2 / V` along a path where `sqrt(1 - z) / sqrt(1 - z_hat) -> ratio`.
/// The limsup over all paths is the `ratio = 0` case.
pub fn generator_ratio_path_limit(p: &PhysParams, e: &EstParams, ratio: f64) -> f64 {
    let a = -p.eta * p.m;
    let b = -2.0 * cross_rate(p, e) + e.eta_hat * e.m_hat;
    (a * ratio + b) / (2.0 * (ratio + 1.0))
}

/// `U2 / V` at the interior point `s` (excited target).
pub fn generator_ratio(s: &CoupledState, p: &PhysParams, e: &EstParams) -> Result<f64> {
    Ok(generator_v_closed(s, 0.0, p, e)? / lyapunov_v(s, TargetState::Excited))
}

/// Innovation factor at the unstable pair (z, z_hat) = (-1, +1), which drives
/// the estimate away from the wrong pole.
pub fn escape_innovation(p: &PhysParams, e: &EstParams) -> f64 {
    innovation_factor(-1.0, 1.0, p, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentReport {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_samples: usize,
}

/// Default fit window: the last 80% of the span.
pub fn default_window(times: &[f64]) -> (f64, f64) {
    match (times.first(), times.last()) {
        (Some(&t0), Some(&t1)) => (t0 + 0.2 * (t1 - t0), t1),
        _ => (0.0, 0.0),
    }
}

/// Least-squares slope of `log V` against `t` over `window`. Samples stop at the
/// first `V < 1e-12` inside the window.
pub fn estimate_sample_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<ExponentReport> {
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v >= V_FLOOR) {
            break;
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::TooFewSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        ((sty * sty) / (stt * syy)).clamp(0.0, 1.0)
    };
    Ok(ExponentReport {
        slope,
        intercept,
        window,
        r_squared,
        n_samples: pts.len(),
    })
}

/// Ratio `V / d_B((rho, rho_hat), (P_target, P_target))`; `None` at the target.
pub fn norm_ratio(s: &CoupledState, target: TargetState) -> Option<f64> {
    let d = coupled_distance_to_poles(s, target, target);
    (d > 0.0).then(|| lyapunov_v(s, target) / d)
}
