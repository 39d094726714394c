//! Qubit states: Bloch vectors, 2x2 density matrices and the fidelity / Bures
//! distance between them.
//!
//! Convention: `rho = (1 + x sx + y sy + z sz) / 2` with the standard Pauli
//! matrices, so `Tr(sz rho) = z`. The excited target is the pole `z = +1`
//! (the projector `diag(1, 0)` in this basis) and the ground target is `z = -1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric slack allowed on physicality checks.
pub const BALL_EPS: f64 = 1e-12;

/// A 2x2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const CENTER: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 0.0 };

    /// Checked constructor; rejects points outside the closed unit ball.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = BlochVector { x, y, z };
        b.check()?;
        Ok(b)
    }

    pub const fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn pole(target: TargetState) -> Self {
        BlochVector::new_unchecked(0.0, 0.0, target.z_sign())
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn check(&self) -> Result<()> {
        let norm_sq = self.norm_sq();
        if !self.is_finite() || norm_sq > 1.0 + BALL_EPS {
            return Err(Error::OutsideBall {
                x: self.x,
                y: self.y,
                z: self.z,
                norm_sq,
            });
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        BlochVector::new_unchecked(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetState {
    Excited,
    Ground,
}

impl TargetState {
    /// `+1` for the excited pole, `-1` for the ground pole.
    pub fn z_sign(self) -> f64 {
        match self {
            TargetState::Excited => 1.0,
            TargetState::Ground => -1.0,
        }
    }

    pub fn antipode(self) -> TargetState {
        match self {
            TargetState::Excited => TargetState::Ground,
            TargetState::Ground => TargetState::Excited,
        }
    }

    pub fn projector(self) -> DensityMatrix {
        bloch_to_density_unchecked(BlochVector::pole(self))
    }

    /// Population `Tr(rho * P_target)` of a Bloch vector, i.e. `(1 ± z) / 2`.
    pub fn population(self, b: &BlochVector) -> f64 {
        0.5 * (1.0 + self.z_sign() * b.z)
    }
}

/// The pair (actual state, estimated filter state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub actual: BlochVector,
    pub estimate: BlochVector,
}

impl CoupledState {
    pub fn new(actual: BlochVector, estimate: BlochVector) -> Result<Self> {
        actual.check()?;
        estimate.check()?;
        Ok(CoupledState { actual, estimate })
    }

    pub fn at_poles(actual: TargetState, estimate: TargetState) -> Self {
        CoupledState {
            actual: BlochVector::pole(actual),
            estimate: BlochVector::pole(estimate),
        }
    }

    pub fn check(&self) -> Result<()> {
        self.actual.check()?;
        self.estimate.check()
    }

    pub fn is_finite(&self) -> bool {
        self.actual.is_finite() && self.estimate.is_finite()
    }

    /// Flattened `[x, y, z, x_hat, y_hat, z_hat]`.
    pub fn to_array(&self) -> [f64; 6] {
        let a = self.actual;
        let e = self.estimate;
        [a.x, a.y, a.z, e.x, e.y, e.z]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        CoupledState {
            actual: BlochVector::new_unchecked(v[0], v[1], v[2]),
            estimate: BlochVector::new_unchecked(v[3], v[4], v[5]),
        }
    }

    /// Largest componentwise difference between the actual and estimated vectors.
    pub fn mismatch(&self) -> f64 {
        let a = self.actual;
        let e = self.estimate;
        (a.x - e.x).abs().max((a.y - e.y).abs()).max((a.z - e.z).abs())
    }
}

/// A validated qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity (all within `BALL_EPS`).
    pub fn new(m: Mat2) -> Result<Self> {
        for row in &m {
            for c in row {
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(Error::NonPhysical("non-finite entry"));
                }
            }
        }
        if m[0][0].im.abs() > BALL_EPS || m[1][1].im.abs() > BALL_EPS {
            return Err(Error::NonPhysical("diagonal is not real"));
        }
        if (m[1][0] - m[0][1].conj()).norm() > BALL_EPS {
            return Err(Error::NonPhysical("matrix is not Hermitian"));
        }
        let tr = m[0][0].re + m[1][1].re;
        if (tr - 1.0).abs() > BALL_EPS {
            return Err(Error::NonPhysical("trace differs from one"));
        }
        // Eigenvalues of a unit-trace Hermitian 2x2: (1 ± sqrt(1 - 4 det)) / 2.
        let dm = DensityMatrix { m };
        if dm.det() < -BALL_EPS {
            return Err(Error::NonPhysical("matrix has a negative eigenvalue"));
        }
        Ok(dm)
    }

    pub fn entries(&self) -> &Mat2 {
        &self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Determinant; real for Hermitian input.
    pub fn det(&self) -> f64 {
        (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]).re
    }

    /// `Tr(self * other)`.
    pub fn product_trace(&self, other: &DensityMatrix) -> f64 {
        trace(&mul(&self.m, &other.m)).re
    }
}

pub(crate) fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn trace(a: &Mat2) -> Complex64 {
    a[0][0] + a[1][1]
}

pub(crate) fn pauli_x() -> Mat2 {
    [[ZERO, Complex64::new(1.0, 0.0)], [Complex64::new(1.0, 0.0), ZERO]]
}

pub(crate) fn pauli_y() -> Mat2 {
    [[ZERO, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), ZERO]]
}

pub(crate) fn pauli_z() -> Mat2 {
    [[Complex64::new(1.0, 0.0), ZERO], [ZERO, Complex64::new(-1.0, 0.0)]]
}

/// Pauli coordinates `(Tr(sx A), Tr(sy A), Tr(sz A))` of a 2x2 matrix.
pub fn pauli_coordinates(a: &Mat2) -> [f64; 3] {
    [
        trace(&mul(&pauli_x(), a)).re,
        trace(&mul(&pauli_y(), a)).re,
        trace(&mul(&pauli_z(), a)).re,
    ]
}

fn bloch_to_density_unchecked(b: BlochVector) -> DensityMatrix {
    let h = 0.5;
    DensityMatrix {
        m: [
            [Complex64::new(h * (1.0 + b.z), 0.0), Complex64::new(h * b.x, -h * b.y)],
            [Complex64::new(h * b.x, h * b.y), Complex64::new(h * (1.0 - b.z), 0.0)],
        ],
    }
}

pub fn bloch_to_density(b: BlochVector) -> Result<DensityMatrix> {
    b.check()?;
    Ok(bloch_to_density_unchecked(b))
}

/// Inverse of [`bloch_to_density`]. The argument is already validated by
/// construction of [`DensityMatrix`].
pub fn density_to_bloch(rho: &DensityMatrix) -> BlochVector {
    let m = rho.entries();
    BlochVector::new_unchecked(2.0 * m[1][0].re, 2.0 * m[1][0].im, (m[0][0] - m[1][1]).re)
}

/// Qubit fidelity `Tr(a b) + 2 sqrt(det a det b)`, clamped to `[0, 1]`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let dets = (a.det().max(0.0) * b.det().max(0.0)).sqrt();
    (a.product_trace(b) + 2.0 * dets).clamp(0.0, 1.0)
}

fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 - 2.0 * f.sqrt()).max(0.0).sqrt()
}

pub fn bures_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    bures_from_fidelity(fidelity(a, b))
}

/// Fidelity evaluated directly on Bloch vectors:
/// `(1 + r.s + sqrt((1 - |r|^2)(1 - |s|^2))) / 2`.
pub fn fidelity_bloch(a: &BlochVector, b: &BlochVector) -> f64 {
    let mixed = ((1.0 - a.norm_sq()).max(0.0) * (1.0 - b.norm_sq()).max(0.0)).sqrt();
    (0.5 * (1.0 + a.dot(b) + mixed)).clamp(0.0, 1.0)
}

pub fn bures_distance_bloch(a: &BlochVector, b: &BlochVector) -> f64 {
    bures_from_fidelity(fidelity_bloch(a, b))
}

/// Bures distance from `b` to the pure target pole.
pub fn bures_to_pole(b: &BlochVector, target: TargetState) -> f64 {
    bures_from_fidelity(target.population(b).clamp(0.0, 1.0))
}

/// Sum of the component Bures distances of two coupled states.
pub fn coupled_distance(s: &CoupledState, t: &CoupledState) -> f64 {
    bures_distance_bloch(&s.actual, &t.actual) + bures_distance_bloch(&s.estimate, &t.estimate)
}

/// Coupled Bures distance from `s` to the pole pair `(actual_pole, estimate_pole)`.
pub fn coupled_distance_to_poles(
    s: &CoupledState,
    actual_pole: TargetState,
    estimate_pole: TargetState,
) -> f64 {
    bures_to_pole(&s.actual, actual_pole) + bures_to_pole(&s.estimate, estimate_pole)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn dm(x: f64, y: f64, z: f64) -> DensityMatrix {
        bloch_to_density(BlochVector::new(x, y, z).unwrap()).unwrap()
    }

    fn ball_point() -> impl Strategy<Value = BlochVector> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("inside ball", |(x, y, z)| x * x + y * y + z * z <= 1.0)
            .prop_map(|(x, y, z)| BlochVector::new_unchecked(x, y, z))
    }

    #[test]
    fn bloch_to_density_examples() {
        let center = dm(0.0, 0.0, 0.0);
        assert_eq!(center.entries()[0][0], Complex64::new(0.5, 0.0));
        assert_eq!(center.entries()[1][1], Complex64::new(0.5, 0.0));
        assert_eq!(center.entries()[0][1], ZERO);

        let up = dm(0.0, 0.0, 1.0);
        assert!((up.product_trace(&TargetState::Excited.projector()) - 1.0).abs() < 1e-15);

        let plus = dm(1.0, 0.0, 0.0);
        for row in plus.entries() {
            for c in row {
                assert_eq!(*c, Complex64::new(0.5, 0.0));
            }
        }
    }

    #[test]
    fn density_to_bloch_examples() {
        assert_eq!(density_to_bloch(&dm(0.0, 0.0, 0.0)), BlochVector::CENTER);
        assert_eq!(
            density_to_bloch(&TargetState::Excited.projector()),
            BlochVector::new_unchecked(0.0, 0.0, 1.0)
        );
        let b = density_to_bloch(&dm(0.3, -0.4, 0.5));
        assert!((b.x - 0.3).abs() < 1e-15 && (b.y + 0.4).abs() < 1e-15 && (b.z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sigma_z_expectation_is_z() {
        let rho = dm(0.1, 0.2, -0.7);
        let c = pauli_coordinates(rho.entries());
        assert!((c[0] - 0.1).abs() < 1e-15);
        assert!((c[1] - 0.2).abs() < 1e-15);
        assert!((c[2] + 0.7).abs() < 1e-15);
    }

    #[test]
    fn out_of_ball_rejected() {
        assert!(matches!(
            BlochVector::new(0.0, 0.8, 0.8),
            Err(Error::OutsideBall { .. })
        ));
        assert!(bloch_to_density(BlochVector::new_unchecked(1.0, 1.0, 0.0)).is_err());
        // within slack
        assert!(BlochVector::new(0.0, 0.0, 1.0 + 1e-13).is_ok());
        assert!(BlochVector::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn non_physical_matrices_rejected() {
        let one = Complex64::new(1.0, 0.0);
        let half = Complex64::new(0.5, 0.0);
        assert_eq!(
            DensityMatrix::new([[one, ZERO], [ZERO, one]]),
            Err(Error::NonPhysical("trace differs from one"))
        );
        assert_eq!(
            DensityMatrix::new([[half, Complex64::new(0.1, 0.2)], [Complex64::new(0.1, 0.2), half]]),
            Err(Error::NonPhysical("matrix is not Hermitian"))
        );
        assert_eq!(
            DensityMatrix::new([[half, one], [one, half]]),
            Err(Error::NonPhysical("matrix has a negative eigenvalue"))
        );
    }

    #[test]
    fn fidelity_examples() {
        let e = TargetState::Excited.projector();
        let g = TargetState::Ground.projector();
        let mixed = dm(0.0, 0.0, 0.0);
        assert!((fidelity(&e, &e) - 1.0).abs() < 1e-15);
        assert!(fidelity(&g, &e).abs() < 1e-15);
        assert!((fidelity(&mixed, &e) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bures_examples() {
        let e = TargetState::Excited.projector();
        let g = TargetState::Ground.projector();
        let mixed = dm(0.0, 0.0, 0.0);
        assert!(bures_distance(&e, &e).abs() < 1e-12);
        assert!((bures_distance(&g, &e) - SQRT2).abs() < 1e-12);
        assert!((bures_distance(&mixed, &e) - (2.0 - SQRT2).sqrt()).abs() < 1e-12);
        assert!((bures_distance(&mixed, &e) - 0.765367).abs() < 1e-6);
    }

    #[test]
    fn coupled_distance_examples() {
        use TargetState::*;
        let s = CoupledState::new(
            BlochVector::new_unchecked(0.2, 0.1, 0.3),
            BlochVector::new_unchecked(-0.5, 0.0, 0.1),
        )
        .unwrap();
        assert!(coupled_distance(&s, &s).abs() < 1e-7);
        let ge = CoupledState::at_poles(Ground, Excited);
        let ee = CoupledState::at_poles(Excited, Excited);
        let gg = CoupledState::at_poles(Ground, Ground);
        assert!((coupled_distance(&ge, &ee) - SQRT2).abs() < 1e-12);
        assert!((coupled_distance(&gg, &ee) - 2.0 * SQRT2).abs() < 1e-12);
        assert!((coupled_distance_to_poles(&gg, Excited, Excited) - 2.0 * SQRT2).abs() < 1e-12);
    }

    #[test]
    fn round_trip_battery() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut done = 0;
        while done < 10_000 {
            let b = BlochVector::new_unchecked(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if b.norm_sq() > 1.0 {
                continue;
            }
            let back = density_to_bloch(&bloch_to_density(b).unwrap());
            assert!((back.x - b.x).abs() <= 1e-14);
            assert!((back.y - b.y).abs() <= 1e-14);
            assert!((back.z - b.z).abs() <= 1e-14);
            done += 1;
        }
    }

    proptest! {
        #[test]
        fn fidelity_symmetric_and_bounded(a in ball_point(), b in ball_point()) {
            let (ra, rb) = (bloch_to_density(a).unwrap(), bloch_to_density(b).unwrap());
            let f = fidelity(&ra, &rb);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - fidelity(&rb, &ra)).abs() < 1e-15);
            prop_assert!((f - fidelity_bloch(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn bures_triangle_inequality(a in ball_point(), b in ball_point(), c in ball_point()) {
            let (ra, rb, rc) = (
                bloch_to_density(a).unwrap(),
                bloch_to_density(b).unwrap(),
                bloch_to_density(c).unwrap(),
            );
            let ab = bures_distance(&ra, &rb);
            let bc = bures_distance(&rb, &rc);
            let ac = bures_distance(&ra, &rc);
            prop_assert!(ac <= ab + bc + 1e-10);
        }

        #[test]
        fn pure_target_bures_collapses(a in ball_point(), excited in any::<bool>()) {
            let target = if excited { TargetState::Excited } else { TargetState::Ground };
            let ra = bloch_to_density(a).unwrap();
            let p = target.projector();
            let d = bures_distance(&ra, &p);
            let expected = 2.0 - 2.0 * ra.product_trace(&p).max(0.0).sqrt();
            prop_assert!((d * d - expected).abs() < 1e-12);
            prop_assert!((d - bures_to_pole(&a, target)).abs() < 1e-12);
        }
    }

    #[test]
    fn bures_triangle_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut sample = || loop {
            let b = BlochVector::new_unchecked(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if b.norm_sq() <= 1.0 {
                return bloch_to_density(b).unwrap();
            }
        };
        for _ in 0..1000 {
            let (a, b, c) = (sample(), sample(), sample());
            assert!(bures_distance(&a, &c) <= bures_distance(&a, &b) + bures_distance(&b, &c) + 1e-10);
        }
    }
}
