//! Single-qubit states: 2×2 density matrices and Bloch vectors.
//!
//! Basis convention: |0⟩ is the σ_z = +1 eigenstate.

use nalgebra::{ Matrix2, Vector3, Vector4 };
use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::error::{ Error, Result };

pub type Mat2 = Matrix2<C64>;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-9;

pub fn identity() -> Mat2 { Mat2::identity() }

pub fn sigma_x() -> Mat2 {
    Mat2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
}

pub fn sigma_y() -> Mat2 {
    Mat2::new(C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0))
}

pub fn sigma_z() -> Mat2 {
    Mat2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0))
}

/// σ_+ = (σ_x + iσ_y)/2 = |0⟩⟨1|
pub fn sigma_plus() -> Mat2 {
    Mat2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
}

/// σ_- = (σ_x - iσ_y)/2 = |1⟩⟨0|
pub fn sigma_minus() -> Mat2 {
    Mat2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
}

/// {𝟙, σ_x, σ_y, σ_z}
pub fn pauli_basis() -> [Mat2; 4] { [identity(), sigma_x(), sigma_y(), sigma_z()] }

/// A Bloch vector r = (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self { Self(Vector3::new(x, y, z)) }

    pub fn zero() -> Self { Self(Vector3::zeros()) }

    /// Extended form r̃ = (1, r).
    pub fn extended(&self) -> Vector4<f64> { Vector4::new(1.0, self.0.x, self.0.y, self.0.z) }

    pub fn from_extended(v: &Vector4<f64>) -> Self { Self(Vector3::new(v[1], v[2], v[3])) }

    pub fn norm(&self) -> f64 { self.0.norm() }

    pub fn x(&self) -> f64 { self.0.x }

    pub fn y(&self) -> f64 { self.0.y }

    pub fn z(&self) -> f64 { self.0.z }
}

/// A validated 2×2 density matrix.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DensityMatrix2(Mat2);

impl DensityMatrix2 {
    /// Validates Hermiticity, unit trace and positivity (to 1e-9).
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = (m - m.adjoint()).norm();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let rho = Self(m);
        let lo = rho.min_eigenvalue();
        if lo < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
        }
        Ok(rho)
    }

    /// Builds the state without the positivity check; used for perturbative
    /// dynamics that may leave the Bloch ball slightly.
    pub(crate) fn from_matrix_unchecked(m: Mat2) -> Self { Self(m) }

    pub fn from_bloch(r: &BlochVector) -> Result<Self> {
        if r.norm() > 1.0 + POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("Bloch vector outside the ball: |r| = {}", r.norm())));
        }
        Ok(Self::from_bloch_unchecked(r))
    }

    /// Builds the state without the Bloch-ball check; truncated expansions may
    /// leave the ball slightly.
    pub fn from_bloch_unchecked(r: &BlochVector) -> Self {
        let [id, x, y, z] = pauli_basis();
        Self((id + x * C64::from(r.x()) + y * C64::from(r.y()) + z * C64::from(r.z())) * C64::from(0.5))
    }

    /// Pure state cos(ϑ/2)|0⟩ + e^{iφ} sin(ϑ/2)|1⟩.
    pub fn pure(amplitudes: [C64; 2]) -> Result<Self> {
        let n = amplitudes[0].norm_sqr() + amplitudes[1].norm_sqr();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("state vector norm² {n} != 1")));
        }
        let [a, b] = amplitudes;
        Ok(Self(Mat2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj())))
    }

    pub fn matrix(&self) -> &Mat2 { &self.0 }

    pub fn bloch(&self) -> BlochVector {
        let m = &self.0;
        BlochVector::new(2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re)
    }

    pub fn trace(&self) -> C64 { self.0.trace() }

    pub fn determinant(&self) -> f64 { self.0.determinant().re }

    pub fn coherence(&self) -> C64 { self.0[(0, 1)] }

    pub fn excited_population(&self) -> f64 { self.0[(0, 0)].re }

    pub fn min_eigenvalue(&self) -> f64 {
        let tr = self.0.trace().re;
        let det = self.determinant();
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        0.5 * tr - disc
    }

    /// Hermiticity defect ‖ρ − ρ†‖.
    pub fn hermiticity_defect(&self) -> f64 { (self.0 - self.0.adjoint()).norm() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_states() {
        let mixed = DensityMatrix2::new(identity() * C64::from(0.5)).unwrap();
        assert_eq!(mixed.bloch(), BlochVector::zero());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix2::pure([C64::from(s), C64::from(s)]).unwrap();
        let r = plus.bloch();
        assert!((r.x() - 1.0).abs() < 1e-15 && r.y().abs() < 1e-15 && r.z().abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let not_unit = identity();
        assert!(DensityMatrix2::new(not_unit).is_err());
        let non_herm = Mat2::new(C64::from(0.5), C64::from(0.3), C64::from(0.1), C64::from(0.5));
        assert!(DensityMatrix2::new(non_herm).is_err());
        let negative = Mat2::new(C64::from(1.2), C64::from(0.0), C64::from(0.0), C64::from(-0.2));
        assert!(DensityMatrix2::new(negative).is_err());
        assert!(DensityMatrix2::from_bloch(&BlochVector::new(1.0, 0.5, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn bloch_round_trip(theta in 0.0..std::f64::consts::PI, phi in 0.0..6.3f64, len in 0.0..1.0f64) {
            let r = BlochVector::new(len * theta.sin() * phi.cos(), len * theta.sin() * phi.sin(), len * theta.cos());
            let rho = DensityMatrix2::from_bloch(&r).unwrap();
            let again = DensityMatrix2::new(*rho.matrix()).unwrap().bloch();
            prop_assert!((again.0 - r.0).norm() < 1e-14);
            prop_assert!((rho.trace() - 1.0).norm() < 1e-15);
            prop_assert!(rho.min_eigenvalue() > -1e-15);
        }
    }
}
