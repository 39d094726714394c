//! Drift and diffusion of the coupled system, in Bloch coordinates and as
//! superoperators acting on density matrices.
//!
//! A single Wiener process drives both the actual state and the estimated
//! filter. The filter sees the actual state only through the innovation
//! factor `E(z, z_hat)`, i.e. through the `sz` measurement signal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{mul, pauli_coordinates, pauli_y, pauli_z, BlochVector, CoupledState, DensityMatrix, Mat2};

/// Physical parameters of the monitored spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Detuning between excited and ground energies.
    pub omega: f64,
    /// Detector efficiency in `(0, 1]`.
    pub eta: f64,
    /// Measurement strength.
    #[serde(rename = "M")]
    pub m: f64,
}

/// Parameters the filter believes in. They need not match [`PhysParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstParams {
    pub omega_hat: f64,
    pub eta_hat: f64,
    #[serde(rename = "M_hat")]
    pub m_hat: f64,
}

fn check_triplet(
    omega: (&'static str, f64),
    eta: (&'static str, f64),
    m: (&'static str, f64),
) -> Result<()> {
    if !(omega.1.is_finite() && omega.1 >= 0.0) {
        return Err(Error::param(omega.0, format!("must be finite and >= 0, got {}", omega.1)));
    }
    if !(eta.1 > 0.0 && eta.1 <= 1.0) {
        return Err(Error::param(eta.0, format!("must lie in (0, 1], got {}", eta.1)));
    }
    if !(m.1.is_finite() && m.1 > 0.0) {
        return Err(Error::param(m.0, format!("must be finite and > 0, got {}", m.1)));
    }
    Ok(())
}

impl PhysParams {
    pub fn new(omega: f64, eta: f64, m: f64) -> Result<Self> {
        let p = PhysParams { omega, eta, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_triplet(("omega", self.omega), ("eta", self.eta), ("M", self.m))
    }

    /// `sqrt(eta M)`, the amplitude of the measurement signal.
    pub fn signal_rate(&self) -> f64 {
        (self.eta * self.m).sqrt()
    }

    /// Filter parameters equal to these physical ones (an exact filter).
    pub fn exact_estimate(&self) -> EstParams {
        EstParams {
            omega_hat: self.omega,
            eta_hat: self.eta,
            m_hat: self.m,
        }
    }
}

impl EstParams {
    pub fn new(omega_hat: f64, eta_hat: f64, m_hat: f64) -> Result<Self> {
        let e = EstParams {
            omega_hat,
            eta_hat,
            m_hat,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        check_triplet(
            ("omega_hat", self.omega_hat),
            ("eta_hat", self.eta_hat),
            ("M_hat", self.m_hat),
        )
    }

    pub fn signal_rate(&self) -> f64 {
        (self.eta_hat * self.m_hat).sqrt()
    }

    /// The same numbers viewed as a parameter set for the generic superoperators.
    pub fn as_phys(&self) -> PhysParams {
        PhysParams {
            omega: self.omega_hat,
            eta: self.eta_hat,
            m: self.m_hat,
        }
    }
}

/// A 3-vector used both for drift rates and for diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorField3 {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl VectorField3 {
    pub const fn new(dx: f64, dy: f64, dz: f64) -> Self {
        VectorField3 { dx, dy, dz }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dz.is_finite()
    }
}

/// `E(z, z_hat) = sqrt(eta_hat M_hat) (sqrt(eta_hat M_hat) z_hat - sqrt(eta M) z)`.
pub fn innovation_factor(z: f64, z_hat: f64, p: &PhysParams, e: &EstParams) -> f64 {
    let k_hat = e.signal_rate();
    k_hat * (k_hat * z_hat - p.signal_rate() * z)
}

pub fn drift_actual(b: &BlochVector, u: f64, p: &PhysParams) -> VectorField3 {
    VectorField3 {
        dx: -p.omega * b.y - 0.5 * p.m * b.x + u * b.z,
        dy: p.omega * b.x - 0.5 * p.m * b.y,
        dz: -u * b.x,
    }
}

pub fn diffusion_actual(b: &BlochVector, p: &PhysParams) -> VectorField3 {
    let k = p.signal_rate();
    VectorField3 {
        dx: -k * b.x * b.z,
        dy: -k * b.y * b.z,
        dz: k * (1.0 - b.z * b.z),
    }
}

pub fn drift_estimate(s: &CoupledState, u: f64, p: &PhysParams, e: &EstParams) -> VectorField3 {
    let b = &s.estimate;
    let innovation = innovation_factor(s.actual.z, b.z, p, e);
    VectorField3 {
        dx: -e.omega_hat * b.y - 0.5 * e.m_hat * b.x + u * b.z + b.x * b.z * innovation,
        dy: e.omega_hat * b.x - 0.5 * e.m_hat * b.y + b.y * b.z * innovation,
        dz: -u * b.x - (1.0 - b.z * b.z) * innovation,
    }
}

pub fn diffusion_estimate(b_hat: &BlochVector, e: &EstParams) -> VectorField3 {
    let k = e.signal_rate();
    VectorField3 {
        dx: -k * b_hat.x * b_hat.z,
        dy: -k * b_hat.y * b_hat.z,
        dz: k * (1.0 - b_hat.z * b_hat.z),
    }
}

fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn scale(a: &Mat2, s: Complex64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    add(&mul(a, b), &scale(&mul(b, a), Complex64::new(-1.0, 0.0)))
}

/// Deterministic generator `-i/2 [omega sz + u sy, rho] + M/4 (sz rho sz - rho)`.
pub fn superoperator_l(rho: &DensityMatrix, u: f64, p: &PhysParams) -> Mat2 {
    let r = rho.entries();
    let h = add(
        &scale(&pauli_z(), Complex64::new(p.omega, 0.0)),
        &scale(&pauli_y(), Complex64::new(u, 0.0)),
    );
    let hamiltonian = scale(&commutator(&h, r), Complex64::new(0.0, -0.5));
    let sz = pauli_z();
    let dephasing = scale(
        &add(&mul(&mul(&sz, r), &sz), &scale(r, Complex64::new(-1.0, 0.0))),
        Complex64::new(0.25 * p.m, 0.0),
    );
    add(&hamiltonian, &dephasing)
}

/// Measurement back-action `sqrt(eta M)/2 (sz rho + rho sz - 2 Tr(sz rho) rho)`.
pub fn superoperator_g(rho: &DensityMatrix, p: &PhysParams) -> Mat2 {
    let r = rho.entries();
    let sz = pauli_z();
    let z = crate::qstate::trace(&mul(&sz, r)).re;
    let anti = add(&mul(&sz, r), &mul(r, &sz));
    scale(
        &add(&anti, &scale(r, Complex64::new(-2.0 * z, 0.0))),
        Complex64::new(0.5 * p.signal_rate(), 0.0),
    )
}

/// Matrix-form drift of the filter:
/// `L_hat(rho_hat) + G_hat(rho_hat) (sqrt(eta M) Tr(sz rho) - sqrt(eta_hat M_hat) Tr(sz rho_hat))`.
pub fn filter_drift_matrix(
    rho: &DensityMatrix,
    rho_hat: &DensityMatrix,
    u: f64,
    p: &PhysParams,
    e: &EstParams,
) -> Mat2 {
    let sz = pauli_z();
    let z = crate::qstate::trace(&mul(&sz, rho.entries())).re;
    let z_hat = crate::qstate::trace(&mul(&sz, rho_hat.entries())).re;
    let mismatch = p.signal_rate() * z - e.signal_rate() * z_hat;
    let ep = e.as_phys();
    add(
        &superoperator_l(rho_hat, u, &ep),
        &scale(&superoperator_g(rho_hat, &ep), Complex64::new(mismatch, 0.0)),
    )
}

/// Bloch image of a traceless Hermitian rate matrix.
pub fn bloch_image(a: &Mat2) -> VectorField3 {
    let [dx, dy, dz] = pauli_coordinates(a);
    VectorField3 { dx, dy, dz }
}
