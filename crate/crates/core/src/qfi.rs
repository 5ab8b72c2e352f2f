//! Quantum Fisher information of the probe with respect to an environment
//! parameter η: the fidelity limit, the affine Bloch-map formula, the
//! short-time closed form and the ratio against pure dephasing.
//!
//! Also hosts the exact pure-dephasing solution used as an oracle for the
//! numerical backends.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::Vector4;
use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::error::{ Error, Result };
use crate::quad::{ integrate_half_line, Tolerance };
use crate::qubit::{ BlochVector, DensityMatrix2, Mat2 };
use crate::spectral::{ coth_half, Bath, EnvParameter };
use crate::superop::{ dyson_with_derivative, SuperOp };
use crate::tcl::{ evolve_tcl_map, ProbeConfig, TclOptions };

/// Below this, 2 - |D r̃|² is treated as a pure-state denominator.
const PURE_DENOMINATOR: f64 = 1e-12;
/// Negative QFI values above this are roundoff and clamped to zero.
const CLAMP_THRESHOLD: f64 = -1e-6;
/// Largest cos² of the angle between r̃ and ṙ accepted on the pure-state branch.
const RADIAL_TOLERANCE: f64 = 1e-6;
const DET_TOLERANCE: f64 = 1e-9;
const SAME_INITIAL_STATE: f64 = 1e-12;

/// r₀(α) = (cos α, 0, sin α).
pub fn initial_state(alpha: f64) -> BlochVector { BlochVector::new(alpha.cos(), 0.0, alpha.sin()) }

fn checked_det(rho: &DensityMatrix2) -> Result<f64> {
    let d = rho.determinant();
    if d < -DET_TOLERANCE {
        return Err(Error::NegativeDeterminant(d));
    }
    Ok(d.max(0.0))
}

/// Uhlmann fidelity of two qubit states,
/// F = Tr(ρ₁ρ₂) + 2√(det ρ₁ det ρ₂).
pub fn fidelity(rho1: &DensityMatrix2, rho2: &DensityMatrix2) -> Result<f64> {
    let d = checked_det(rho1)? * checked_det(rho2)?;
    let overlap = (rho1.matrix() * rho2.matrix()).trace().re;
    Ok((overlap + 2.0 * d.sqrt()).clamp(0.0, 1.0))
}

/// 1 - F computed from Bloch vectors without cancellation:
/// 1 - F = ¼[|r₂ - r₁|² + (√a - √b)²], a = 1 - |r₁|², b = 1 - |r₂|².
pub fn infidelity(rho1: &DensityMatrix2, rho2: &DensityMatrix2) -> Result<f64> {
    checked_det(rho1)?;
    checked_det(rho2)?;
    let r1 = rho1.bloch().0;
    let r2 = rho2.bloch().0;
    let d = r2 - r1;
    let a = (1.0 - r1.norm_squared()).max(0.0);
    let b = (1.0 - r2.norm_squared()).max(0.0);
    let root_sum = a.sqrt() + b.sqrt();
    let root_diff = if root_sum > 0.0 { -d.dot(&(r1 + r2)) / root_sum } else { 0.0 };
    Ok((0.25 * (d.norm_squared() + root_diff * root_diff)).clamp(0.0, 1.0))
}

/// 1 - √F without cancellation.
pub fn sqrt_infidelity(rho1: &DensityMatrix2, rho2: &DensityMatrix2) -> Result<f64> {
    let one_minus_f = infidelity(rho1, rho2)?;
    Ok(one_minus_f / (1.0 + (1.0 - one_minus_f).sqrt()))
}

/// Finite-difference scheme for η.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceScheme {
    Forward,
    Central,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiConfig {
    pub delta: f64,
    pub scheme: DifferenceScheme,
    pub parameter: EnvParameter,
}

impl QfiConfig {
    pub fn new(parameter: EnvParameter) -> Self { Self { delta: 1e-4, scheme: DifferenceScheme::Central, parameter } }

    /// The two parameter values at which the family is evaluated.
    pub fn stencil(&self, eta: f64) -> Result<(f64, f64)> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {}", self.delta)));
        }
        if self.delta >= 0.1 * eta.abs() {
            return Err(Error::InvalidParameter(format!("step {} is not small against eta = {eta}", self.delta)));
        }
        Ok(match self.scheme {
            DifferenceScheme::Forward => (eta, eta + self.delta),
            DifferenceScheme::Central => (eta - 0.5 * self.delta, eta + 0.5 * self.delta),
        })
    }
}

/// One member ρ_η(t) of a state family, with the initial state it evolved from.
#[derive(Copy, Clone, Debug)]
pub struct FamilyMember {
    pub initial: BlochVector,
    pub state: DensityMatrix2,
}

pub(crate) fn clamp_qfi(q: f64) -> Result<f64> {
    if q < CLAMP_THRESHOLD {
        return Err(Error::InvalidParameter(format!("negative QFI {q:e} beyond roundoff")));
    }
    Ok(q.max(0.0))
}

/// Q ≈ 8(1 - √F(ρ_η, ρ_{η+δη}))/δη².
pub fn qfi_from_fidelity<F>(family: F, eta: f64, config: &QfiConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<FamilyMember>,
{
    let (lo, hi) = config.stencil(eta)?;
    let a = family(lo)?;
    let b = family(hi)?;
    if (a.initial.0 - b.initial.0).norm() > SAME_INITIAL_STATE {
        return Err(Error::FamilyMismatch(format!(
            "initial states differ: {:?} vs {:?}",
            a.initial.0.as_slice(),
            b.initial.0.as_slice()
        )));
    }
    clamp_qfi(8.0 * sqrt_infidelity(&a.state, &b.state)? / (config.delta * config.delta))
}

/// Q = |Ḋr̃₀|² + (Dr̃₀ · Ḋr̃₀)²/(2 - |Dr̃₀|²) with extended 4-vectors.
pub fn qfi_bloch(d: &SuperOp, dd: &Vector4<f64>, r0: &BlochVector) -> Result<f64> {
    let r = d.apply_extended(&r0.extended());
    let dr = dd;
    qfi_bloch_vectors(&r, dr)
}

/// The Bloch formula on an evolved extended vector r̃ and its derivative.
pub fn qfi_bloch_vectors(r: &Vector4<f64>, dr: &Vector4<f64>) -> Result<f64> {
    let first = dr.norm_squared();
    let numerator = r.dot(dr).powi(2);
    let denominator = 2.0 - r.norm_squared();
    let second = if denominator < PURE_DENOMINATOR {
        // On the sphere a smooth family satisfies r·ṙ = 0, so the limit of
        // the second term vanishes. A truncated map can put the state a
        // hair outside the ball with a small radial drift; only a drift
        // that is not small against |r̃||ṙ| is singular.
        if numerator <= RADIAL_TOLERANCE * r.norm_squared() * first || first == 0.0 {
            0.0
        } else {
            return Err(Error::SingularQfi { denominator, numerator, tangential: first });
        }
    } else {
        numerator / denominator
    };
    clamp_qfi(first + second)
}

/// Matrix form of `qfi_bloch`, taking Ḋ as a map.
pub fn qfi_bloch_map(d: &SuperOp, dd: &nalgebra::Matrix4<f64>, r0: &BlochVector) -> Result<f64> {
    qfi_bloch(d, &(dd * r0.extended()), r0)
}

/// Leading short-time QFI (t²/4) sin²(α - θ) (∂_η ζ(0))²/ζ(0).
pub fn qfi_short_closed_form(tag: EnvParameter, bath: &Bath, t: f64, theta: f64, alpha: f64) -> Result<f64> {
    let z0 = bath.moment(0)?;
    let dz0 = bath.moment_derivative(0, tag)?;
    Ok(0.25 * t * t * (alpha - theta).sin().powi(2) * dz0 * dz0 / z0)
}

/// R = (Q - Q_ref)/Q_ref.
pub fn ratio_r(q_candidate: f64, q_reference: f64) -> Result<f64> {
    if !(q_reference > 0.0) {
        return Err(Error::InvalidParameter(format!("reference QFI must be positive, got {q_reference}")));
    }
    Ok((q_candidate - q_reference) / q_reference)
}

/// Γ_d(t) = ∫_0^∞ J(ω) coth(βω/2) (1 - cos ωt)/ω² dω.
pub fn decoherence_exponent(bath: &Bath, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let beta = bath.beta();
    let sd = bath.spectral;
    let f = |w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        let half = (0.5 * w * t).sin();
        sd.eval(w).unwrap_or(0.0) * coth_half(beta * w) * 2.0 * half * half / (w * w)
    };
    // Panels no wider than a quarter period keep the oscillation resolved.
    let panel = (4.0 * sd.cutoff()).min(1.5 / t.max(1e-3));
    let extent = (60.0 + 4.0 * sd.ohmicity()) * sd.cutoff();
    let tol = Tolerance { abs: 1e-13, rel: 1e-13, ..Tolerance::default() };
    Ok(integrate_half_line(f, 0.0, panel, extent, tol)?.0)
}

/// Exact reduced state for θ = π/2: populations frozen and
/// ρ_01(t) = ρ_01(0) e^{-iω_S t} e^{-Γ_d(t)}.
pub fn dephasing_oracle(bath: &Bath, omega_s: f64, rho0: &DensityMatrix2, t: f64) -> Result<DensityMatrix2> {
    let decay = (-decoherence_exponent(bath, t)?).exp();
    let m = rho0.matrix();
    let c = m[(0, 1)] * C64::from_polar(decay, -omega_s * t);
    Ok(DensityMatrix2::from_matrix_unchecked(Mat2::new(m[(0, 0)], c, c.conj(), m[(1, 1)])))
}

/// Evolution backend used to produce a QFI series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QfiBackend {
    Tcl { options: TclOptions },
    Dyson { order: usize },
    Tebd,
}

impl QfiBackend {
    pub fn label(&self) -> String {
        match self {
            QfiBackend::Tcl { .. } => "tcl".into(),
            QfiBackend::Dyson { order } => format!("dyson-{order}"),
            QfiBackend::Tebd => "tebd".into(),
        }
    }
}

/// One sample of a QFI series.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiSample {
    pub t: f64,
    pub qfi: f64,
}

impl QfiSample {
    /// q = Q/t, undefined at t = 0.
    pub fn rate(&self) -> Option<f64> { (self.t > 0.0).then(|| self.qfi / self.t) }
}

/// Q(η, t) and q(η, t) with the metadata that produced them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QfiSeries {
    pub samples: Vec<QfiSample>,
    pub metadata: BTreeMap<String, String>,
}

impl QfiSeries {
    pub const CSV_HEADER: &'static str = "t,Q,q";

    /// Metadata as `# key = value` lines, then `t,Q,q` rows (q empty at t = 0).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            match s.rate() {
                Some(q) => writeln!(w, "{:.16e},{:.16e},{:.16e}", s.t, s.qfi, q)?,
                None => writeln!(w, "{:.16e},{:.16e},", s.t, s.qfi)?,
            }
        }
        Ok(())
    }
}

/// QFI along a time grid from the truncated Dyson map, with the exact
/// η-derivative of the map.
pub fn qfi_series_dyson(
    probe: &ProbeConfig,
    bath: &Bath,
    alpha: f64,
    order: usize,
    tag: EnvParameter,
    times: &[f64],
) -> Result<Vec<f64>> {
    let (map, dmap) = dyson_with_derivative(probe, bath, order, tag)?;
    let r0 = initial_state(alpha);
    times.iter().map(|&t| qfi_bloch_map(&map.eval(t), &dmap.eval_matrix(t), &r0)).collect()
}

/// One cell of a (θ, α) QFI map.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub theta: f64,
    pub alpha: f64,
    pub qfi: f64,
    pub ratio: f64,
}

/// QFI over a (θ, α) grid at time t from the order-k Dyson map, with R_t
/// relative to pure dephasing from |+⟩ (θ = π/2, α = 0).
pub fn qfi_map_dyson(
    omega_s: f64,
    bath: &Bath,
    order: usize,
    tag: EnvParameter,
    t: f64,
    thetas: &[f64],
    alphas: &[f64],
) -> Result<Vec<MapCell>> {
    let reference = qfi_series_dyson(&ProbeConfig::new(omega_s, FRAC_PI_2)?, bath, 0.0, order, tag, &[t])?[0];
    let mut cells = Vec::with_capacity(thetas.len() * alphas.len());
    for &theta in thetas {
        let (map, dmap) = dyson_with_derivative(&ProbeConfig::new(omega_s, theta)?, bath, order, tag)?;
        let (d, dd) = (map.eval(t), dmap.eval_matrix(t));
        for &alpha in alphas {
            let qfi = qfi_bloch_map(&d, &dd, &initial_state(alpha))?;
            cells.push(MapCell { theta, alpha, qfi, ratio: ratio_r(qfi, reference)? });
        }
    }
    Ok(cells)
}

/// QFI along a time grid from TCL2 maps at η ± δη/2 (or η, η + δη),
/// integrated with a fixed step so both members share one discretisation.
pub fn qfi_series_tcl(
    probe: &ProbeConfig,
    bath: &Bath,
    alpha: f64,
    config: &QfiConfig,
    options: TclOptions,
    times: &[f64],
) -> Result<Vec<f64>> {
    let options = TclOptions { fixed_step: Some(options.fixed_step.unwrap_or(2e-3)), ..options };
    let eta = bath.parameter(config.parameter);
    let (lo, hi) = config.stencil(eta)?;
    let maps_lo = evolve_tcl_map(probe, &bath.with_parameter(config.parameter, lo)?, times, options)?;
    let maps_hi = evolve_tcl_map(probe, &bath.with_parameter(config.parameter, hi)?, times, options)?;
    let r0 = initial_state(alpha);
    maps_lo
        .iter()
        .zip(&maps_hi)
        .map(|(a, b)| {
            let ra = DensityMatrix2::from_bloch_unchecked(&a.apply(&r0));
            let rb = DensityMatrix2::from_bloch_unchecked(&b.apply(&r0));
            clamp_qfi(8.0 * sqrt_infidelity(&ra, &rb)? / (config.delta * config.delta))
        })
        .collect()
}
