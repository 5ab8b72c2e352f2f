//! Affine Bloch-space representation of qubit maps and truncated Dyson
//! expansions of the TCL2 dynamical map as matrix polynomials in t.
//!
//! A map acts on the extended Bloch vector r̃ = (1, r) through a 4×4 real
//! matrix whose first row is (1, 0, 0, 0); the first column below the corner
//! is the translation ν and the lower-right block is the linear part V.

use nalgebra::{ Matrix3, Matrix4, Vector3, Vector4 };
use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::error::{ Error, Result };
use crate::qubit::DensityMatrix2;
use crate::spectral::{ Bath, EnvParameter };
use crate::special::factorial;
use crate::tcl::{ dissipative_matrix, generator_matrix, ProbeConfig, TclCoefficients };

pub use crate::qubit::BlochVector;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 7;

/// Bloch vector of a density matrix.
pub fn bloch_from_density(rho: &DensityMatrix2) -> BlochVector { rho.bloch() }

/// Density matrix of a Bloch vector in the closed ball.
pub fn density_from_bloch(r: &BlochVector) -> Result<DensityMatrix2> { DensityMatrix2::from_bloch(r) }

/// A qubit map in affine Bloch form.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperOp(Matrix4<f64>);

impl SuperOp {
    pub fn identity() -> Self { Self(Matrix4::identity()) }

    /// Validates that the first row is exactly (1, 0, 0, 0).
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        if m.row(0) != Matrix4::<f64>::identity().row(0) {
            return Err(Error::InvalidParameter(format!("first row of a qubit map must be (1,0,0,0), got {}", m.row(0))));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> Self { Self(m) }

    pub fn matrix(&self) -> &Matrix4<f64> { &self.0 }

    /// Translation ν.
    pub fn translation(&self) -> Vector3<f64> { Vector3::new(self.0[(1, 0)], self.0[(2, 0)], self.0[(3, 0)]) }

    /// Linear block V.
    pub fn linear(&self) -> Matrix3<f64> { self.0.fixed_view::<3, 3>(1, 1).into_owned() }

    /// r ↦ ν + V r.
    pub fn apply(&self, r: &BlochVector) -> BlochVector { BlochVector::from_extended(&self.apply_extended(&r.extended())) }

    pub fn apply_extended(&self, r: &Vector4<f64>) -> Vector4<f64> { self.0 * r }

    pub fn compose(&self, other: &SuperOp) -> SuperOp { SuperOp(self.0 * other.0) }
}

/// A matrix polynomial D(t) = Σ_j M_j t^j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePolySuperOp {
    pub coefficients: Vec<Matrix4<f64>>,
}

impl TimePolySuperOp {
    pub fn order(&self) -> usize { self.coefficients.len().saturating_sub(1) }

    /// Horner evaluation of the raw matrix polynomial.
    pub fn eval_matrix(&self, t: f64) -> Matrix4<f64> {
        self.coefficients.iter().rev().fold(Matrix4::zeros(), |acc, m| acc * t + m)
    }

    /// Evaluation as a qubit map. Only meaningful for map polynomials
    /// (M_0 = 𝟙, first row of higher coefficients zero).
    pub fn eval(&self, t: f64) -> SuperOp { SuperOp(self.eval_matrix(t)) }

    pub fn to_json(&self) -> Result<String> { Ok(serde_json::to_string_pretty(self)?) }

    pub fn from_json(s: &str) -> Result<Self> { Ok(serde_json::from_str(s)?) }
}

pub fn eval_poly(p: &TimePolySuperOp, t: f64) -> SuperOp { p.eval(t) }

pub fn apply(d: &SuperOp, r: &Vector4<f64>) -> Vector4<f64> { d.apply_extended(r) }

/// Taylor coefficient of t^{m+1} in Γ(ξ, t):
/// i^m/(m+1)! Σ_n binom(m, n) ζ(n) ξ^{m-n}.
fn gamma_taylor(m: usize, xi: f64, zeta: &[f64]) -> C64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for (n, z) in zeta.iter().enumerate().take(m + 1) {
        sum += binom * z * xi.powi((m - n) as i32);
        binom *= (m - n) as f64 / (n + 1) as f64;
    }
    C64::new(0.0, 1.0).powi(m as i32) * (sum / factorial(m as u32 + 1))
}

/// Generator coefficients G_1 … G_k built from the given moment sequence,
/// without the system Hamiltonian.
fn dissipative_taylor(probe: &ProbeConfig, zeta: &[f64], order: usize) -> Vec<Matrix4<f64>> {
    let xi = probe.gamma_frequencies();
    (0..order)
        .map(|m| {
            let g = xi.map(|x| gamma_taylor(m, x, zeta));
            dissipative_matrix(&TclCoefficients::from_gammas(probe, g))
        })
        .collect()
}

fn check_order(order: usize, lowest: usize) -> Result<()> {
    if order < lowest || order > MAX_ORDER {
        return Err(Error::InvalidParameter(format!("truncation order must lie in [{lowest}, {MAX_ORDER}], got {order}")));
    }
    Ok(())
}

/// Taylor polynomial of the generator D^{L(t)} through t^order.
pub fn generator_taylor(probe: &ProbeConfig, bath: &Bath, order: usize) -> Result<TimePolySuperOp> {
    check_order(order, 0)?;
    let zeta = bath.moments(order)?;
    let mut coefficients = vec![generator_matrix(&TclCoefficients::from_gammas(probe, [C64::new(0.0, 0.0); 3]), probe)];
    coefficients.extend(dissipative_taylor(probe, &zeta, order));
    Ok(TimePolySuperOp { coefficients })
}

/// Coefficients of the solution of dM/dt = G(t) M, M(0) = 𝟙, through t^order.
fn dyson_from_generator(g: &[Matrix4<f64>], order: usize) -> Vec<Matrix4<f64>> {
    let mut m = vec![Matrix4::identity()];
    for k in 0..order {
        let mut acc = Matrix4::zeros();
        for j in 0..=k {
            acc += g[j] * m[k - j];
        }
        m.push(acc / (k + 1) as f64);
    }
    m
}

/// Dyson expansion of the TCL2 map truncated at total degree `order`.
pub fn dyson_truncated(probe: &ProbeConfig, bath: &Bath, order: usize) -> Result<TimePolySuperOp> {
    check_order(order, 2)?;
    let g = generator_taylor(probe, bath, order)?;
    Ok(TimePolySuperOp { coefficients: dyson_from_generator(&g.coefficients, order) })
}

/// The truncated Dyson map together with its exact derivative with respect to
/// an environment parameter.
pub fn dyson_with_derivative(
    probe: &ProbeConfig,
    bath: &Bath,
    order: usize,
    tag: EnvParameter,
) -> Result<(TimePolySuperOp, TimePolySuperOp)> {
    check_order(order, 2)?;
    let g = generator_taylor(probe, bath, order)?.coefficients;
    let dzeta = bath.moment_derivatives(order, tag)?;
    let mut dg = vec![Matrix4::zeros()];
    dg.extend(dissipative_taylor(probe, &dzeta, order));
    let m = dyson_from_generator(&g, order);
    let mut dm = vec![Matrix4::zeros()];
    for k in 0..order {
        let mut acc = Matrix4::zeros();
        for j in 0..=k {
            acc += dg[j] * m[k - j] + g[j] * dm[k - j];
        }
        dm.push(acc / (k + 1) as f64);
    }
    Ok((TimePolySuperOp { coefficients: m }, TimePolySuperOp { coefficients: dm }))
}
