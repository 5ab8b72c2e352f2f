//! Ohmic spectral densities, thermal occupations, the thermalized spectral
//! density, the bath two-time correlation function and its moments.
//!
//! All frequencies and times are in units of the cutoff frequency of the
//! reference bath; the cutoff itself is kept as an explicit parameter so that
//! it can be perturbed when estimating it.

use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::error::{ Error, Result };
use crate::quad::{ integrate_half_line, Tolerance };
use crate::special::{ factorial, hurwitz_zeta, polygamma };

/// J(ω) = λ ω^s e^{-ω/ω_c} / ω_c^{s-1}.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OhmicSpectralDensity {
    coupling: f64,
    ohmicity: f64,
    cutoff: f64,
}

impl OhmicSpectralDensity {
    pub fn new(coupling: f64, ohmicity: f64, cutoff: f64) -> Result<Self> {
        for (name, v) in [("coupling", coupling), ("ohmicity", ohmicity), ("cutoff", cutoff)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { coupling, ohmicity, cutoff })
    }

    pub fn coupling(&self) -> f64 { self.coupling }

    pub fn ohmicity(&self) -> f64 { self.ohmicity }

    pub fn cutoff(&self) -> f64 { self.cutoff }

    /// `Some(s)` when the ohmicity is a positive integer, enabling the closed
    /// forms.
    pub fn integer_ohmicity(&self) -> Option<u32> {
        let s = self.ohmicity;
        (s.fract() == 0.0 && s >= 1.0 && s <= 30.0).then_some(s as u32)
    }

    /// J(ω) for ω ≥ 0.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral density is defined for omega >= 0, got {omega}"
            )));
        }
        Ok(self.eval_unchecked(omega))
    }

    pub(crate) fn eval_unchecked(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        self.coupling * omega.powf(self.ohmicity) * (-omega / self.cutoff).exp()
            / self.cutoff.powf(self.ohmicity - 1.0)
    }

    /// lim_{ω→0} J(ω)/ω.
    fn slope_at_zero(&self) -> f64 {
        let s = self.ohmicity;
        if s > 1.0 {
            0.0
        } else if s == 1.0 {
            self.coupling
        } else {
            f64::INFINITY
        }
    }
}

/// Bath temperature; T and β = 1/T are stored together.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemperatureRepr", into = "TemperatureRepr")]
pub struct BathTemperature {
    temperature: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct TemperatureRepr {
    temperature: f64,
}

impl TryFrom<TemperatureRepr> for BathTemperature {
    type Error = Error;

    fn try_from(r: TemperatureRepr) -> Result<Self> { Self::from_temperature(r.temperature) }
}

impl From<BathTemperature> for TemperatureRepr {
    fn from(t: BathTemperature) -> Self { Self { temperature: t.temperature } }
}

impl BathTemperature {
    pub fn from_temperature(temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { temperature, beta: 1.0 / temperature })
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { temperature: 1.0 / beta, beta })
    }

    pub fn temperature(&self) -> f64 { self.temperature }

    pub fn beta(&self) -> f64 { self.beta }
}

/// The environment parameter being estimated.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvParameter {
    InverseTemperature,
    Temperature,
    Cutoff,
    Coupling,
    Ohmicity,
}

impl EnvParameter {
    pub const ALL: [EnvParameter; 5] = [
        EnvParameter::InverseTemperature,
        EnvParameter::Temperature,
        EnvParameter::Cutoff,
        EnvParameter::Coupling,
        EnvParameter::Ohmicity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvParameter::InverseTemperature => "beta",
            EnvParameter::Temperature => "temperature",
            EnvParameter::Cutoff => "cutoff",
            EnvParameter::Coupling => "coupling",
            EnvParameter::Ohmicity => "ohmicity",
        }
    }
}

impl std::str::FromStr for EnvParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beta" | "inverse_temperature" => Ok(EnvParameter::InverseTemperature),
            "t" | "temperature" => Ok(EnvParameter::Temperature),
            "cutoff" | "omega_c" | "wc" => Ok(EnvParameter::Cutoff),
            "coupling" | "lambda" => Ok(EnvParameter::Coupling),
            "ohmicity" | "s" => Ok(EnvParameter::Ohmicity),
            other => Err(Error::InvalidParameter(format!("unknown environment parameter '{other}'"))),
        }
    }
}

/// 1/(e^{βω} - 1), taking the product βω.
pub fn bose_occupation(beta_omega: f64) -> Result<f64> {
    if beta_omega == 0.0 {
        return Err(Error::Pole { function: "bose_occupation", argument: "0".into() });
    }
    Ok(1.0 / beta_omega.exp_m1())
}

/// coth(x/2) = 1 + 2/(e^x - 1), stable for large |x|.
pub(crate) fn coth_half(x: f64) -> f64 { 1.0 + 2.0 / x.exp_m1() }

/// 1/sinh²(x/2), stable for large |x|.
fn csch2_half(x: f64) -> f64 {
    let x = x.abs();
    let e = (-x).exp();
    4.0 * e / ((1.0 - e) * (1.0 - e))
}

fn default_tolerance() -> Tolerance { Tolerance::default() }

/// A spectral density together with the bath temperature.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    pub spectral: OhmicSpectralDensity,
    pub temperature: BathTemperature,
}

impl Bath {
    pub fn new(spectral: OhmicSpectralDensity, temperature: BathTemperature) -> Self {
        Self { spectral, temperature }
    }

    pub fn beta(&self) -> f64 { self.temperature.beta() }

    /// Current value of the selected parameter.
    pub fn parameter(&self, tag: EnvParameter) -> f64 {
        match tag {
            EnvParameter::InverseTemperature => self.temperature.beta(),
            EnvParameter::Temperature => self.temperature.temperature(),
            EnvParameter::Cutoff => self.spectral.cutoff,
            EnvParameter::Coupling => self.spectral.coupling,
            EnvParameter::Ohmicity => self.spectral.ohmicity,
        }
    }

    /// A copy of the bath with the selected parameter set to `value`.
    pub fn with_parameter(&self, tag: EnvParameter, value: f64) -> Result<Bath> {
        let sd = self.spectral;
        let mut out = *self;
        match tag {
            EnvParameter::InverseTemperature => out.temperature = BathTemperature::from_beta(value)?,
            EnvParameter::Temperature => out.temperature = BathTemperature::from_temperature(value)?,
            EnvParameter::Cutoff => out.spectral = OhmicSpectralDensity::new(sd.coupling, sd.ohmicity, value)?,
            EnvParameter::Coupling => out.spectral = OhmicSpectralDensity::new(value, sd.ohmicity, sd.cutoff)?,
            EnvParameter::Ohmicity => out.spectral = OhmicSpectralDensity::new(sd.coupling, value, sd.cutoff)?,
        }
        Ok(out)
    }

    /// Thermalized spectral density
    /// j_β(ω) = ½[1 + coth(βω/2)][J(ω)Θ(ω) - J(-ω)Θ(-ω)], defined on ℝ.
    pub fn j_beta(&self, omega: f64) -> f64 {
        let beta = self.beta();
        if omega > 0.0 {
            // (1 + n_β) J
            self.spectral.eval_unchecked(omega) / -(-beta * omega).exp_m1()
        } else if omega < 0.0 {
            let u = -omega;
            // n_β J
            self.spectral.eval_unchecked(u) / (beta * u).exp_m1()
        } else {
            self.spectral.slope_at_zero() / beta
        }
    }

    /// Two-time correlation function C(t) = ∫_0^∞ J(ω)[(1+n_β)e^{-iωt} + n_β e^{iωt}] dω.
    ///
    /// Uses the polygamma closed form for integer ohmicity and adaptive
    /// quadrature otherwise.
    pub fn ttcf(&self, t: f64) -> Result<C64> {
        match self.spectral.integer_ohmicity() {
            Some(s) => self.ttcf_closed_form(s, t),
            None => self.ttcf_quadrature(t),
        }
    }

    fn ttcf_closed_form(&self, s: u32, t: f64) -> Result<C64> {
        let lam = self.spectral.coupling;
        let wc = self.spectral.cutoff;
        let beta = self.beta();
        let vacuum = lam * factorial(s) * wc * wc / C64::new(1.0, wc * t).powi(s as i32 + 1);
        let bwc = beta * wc;
        let z_plus = 1.0 + C64::new(1.0, wc * t) / bwc;
        let z_minus = 1.0 + C64::new(1.0, -wc * t) / bwc;
        let prefactor = lam * wc * wc * (-1.0 / bwc).powi(s as i32 + 1);
        let thermal = (polygamma(s, z_plus)? + polygamma(s, z_minus)?) * prefactor;
        Ok(vacuum + thermal)
    }

    /// Quadrature evaluation of C(t), valid for any ohmicity.
    pub fn ttcf_quadrature(&self, t: f64) -> Result<C64> {
        let beta = self.beta();
        let sd = self.spectral;
        let f = |w: f64| {
            if w == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let j = sd.eval_unchecked(w);
            C64::new(j * coth_half(beta * w) * (w * t).cos(), -j * (w * t).sin())
        };
        let (v, _) = integrate_half_line(f, 0.0, 4.0 * sd.cutoff, 60.0 * sd.cutoff, default_tolerance())?;
        Ok(v)
    }

    /// ζ(n) = (1/iⁿ) dⁿC/dtⁿ at t = 0
    ///      = ∫_0^∞ ωⁿ J(ω)[n_β + (-1)ⁿ(1 + n_β)] dω.
    pub fn moment(&self, n: u32) -> Result<f64> {
        match self.spectral.integer_ohmicity() {
            Some(s) => Ok(self.moment_symbolic(s, n)),
            None => self.moment_quadrature(n),
        }
    }

    /// ζ(0), …, ζ(count-1).
    pub fn moments(&self, count: usize) -> Result<Vec<f64>> {
        (0..count as u32).map(|n| self.moment(n)).collect()
    }

    fn moment_symbolic(&self, s: u32, n: u32) -> f64 {
        let parts = MomentParts::new(self, s, n);
        if n % 2 == 0 {
            parts.prefactor * (parts.vacuum + 2.0 * parts.thermal(0))
        } else {
            -parts.prefactor * parts.vacuum
        }
    }

    /// Quadrature evaluation of ζ(n), valid for any ohmicity.
    pub fn moment_quadrature(&self, n: u32) -> Result<f64> {
        let beta = self.beta();
        let sd = self.spectral;
        let odd = n % 2 == 1;
        let f = |w: f64| {
            if w == 0.0 {
                return 0.0;
            }
            let base = w.powi(n as i32) * sd.eval_unchecked(w);
            if odd { -base } else { base * coth_half(beta * w) }
        };
        let extent = (60.0 + 4.0 * (n as f64 + sd.ohmicity)) * sd.cutoff;
        let (v, _) = integrate_half_line(f, 0.0, 4.0 * sd.cutoff, extent, default_tolerance())?;
        Ok(v)
    }

    /// ∂ζ(n)/∂η for the selected parameter.
    ///
    /// Closed form for integer ohmicity (except η = s), quadrature of the
    /// differentiated integrand otherwise.
    pub fn moment_derivative(&self, n: u32, tag: EnvParameter) -> Result<f64> {
        match (self.spectral.integer_ohmicity(), tag) {
            (Some(s), t) if t != EnvParameter::Ohmicity => Ok(self.moment_derivative_symbolic(s, n, t)),
            _ => self.moment_derivative_quadrature(n, tag),
        }
    }

    pub fn moment_derivatives(&self, count: usize, tag: EnvParameter) -> Result<Vec<f64>> {
        (0..count as u32).map(|n| self.moment_derivative(n, tag)).collect()
    }

    fn moment_derivative_symbolic(&self, s: u32, n: u32, tag: EnvParameter) -> f64 {
        let beta = self.beta();
        let wc = self.spectral.cutoff;
        let odd = n % 2 == 1;
        let p = MomentParts::new(self, s, n);
        let m = p.order as f64;
        match tag {
            EnvParameter::Coupling => self.moment_symbolic(s, n) / self.spectral.coupling,
            EnvParameter::InverseTemperature | EnvParameter::Temperature => {
                let d_beta = if odd {
                    0.0
                } else {
                    // ∂_β S_m = -(m/β)(S_m - c S_{m+1})
                    let c = 1.0 / wc;
                    -2.0 * p.prefactor * (m / beta) * (p.thermal(0) - c * p.thermal(1))
                };
                if tag == EnvParameter::Temperature { -beta * beta * d_beta } else { d_beta }
            }
            EnvParameter::Cutoff => {
                let dp = (1.0 - s as f64) / wc;
                // d/dω_c ω_c^m = m ω_c^{m-1};  d/dω_c S_m = m S_{m+1}/ω_c²
                let d_vac = m * wc.powf(m - 1.0);
                if odd {
                    -p.prefactor * (dp * p.vacuum + d_vac)
                } else {
                    let bracket = p.vacuum + 2.0 * p.thermal(0);
                    let d_bracket = d_vac + 2.0 * m * p.thermal(1) / (wc * wc);
                    p.prefactor * (dp * bracket + d_bracket)
                }
            }
            EnvParameter::Ohmicity => unreachable!("ohmicity derivative uses quadrature"),
        }
    }

    fn moment_derivative_quadrature(&self, n: u32, tag: EnvParameter) -> Result<f64> {
        let beta = self.beta();
        let sd = self.spectral;
        let odd = n % 2 == 1;
        let f = |w: f64| {
            if w == 0.0 {
                return 0.0;
            }
            let j = sd.eval_unchecked(w);
            let wn = w.powi(n as i32);
            let weight = if odd { -1.0 } else { coth_half(beta * w) };
            match tag {
                EnvParameter::Coupling => wn * weight * j / sd.coupling,
                EnvParameter::Ohmicity => wn * weight * j * (w / sd.cutoff).ln(),
                EnvParameter::Cutoff => {
                    wn * weight * j * (w / (sd.cutoff * sd.cutoff) + (1.0 - sd.ohmicity) / sd.cutoff)
                }
                EnvParameter::InverseTemperature | EnvParameter::Temperature => {
                    if odd {
                        0.0
                    } else {
                        let d_beta = wn * j * (-0.5 * w) * csch2_half(beta * w);
                        if tag == EnvParameter::Temperature { -beta * beta * d_beta } else { d_beta }
                    }
                }
            }
        };
        let extent = (60.0 + 4.0 * (n as f64 + sd.ohmicity)) * sd.cutoff;
        let (v, _) = integrate_half_line(f, 0.0, 4.0 * sd.cutoff, extent, default_tolerance())?;
        Ok(v)
    }
}

/// Pieces of the integer-ohmicity moment formula
/// ζ(n) = P [c^{-m} ± 2 S_m], P = λ ω_c^{1-s} (n+s)!, c = 1/ω_c, m = n+s+1,
/// S_m = Σ_{k≥1} (kβ + c)^{-m}.
struct MomentParts {
    prefactor: f64,
    vacuum: f64,
    order: u32,
    beta: f64,
    c: f64,
}

impl MomentParts {
    fn new(bath: &Bath, s: u32, n: u32) -> Self {
        let sd = bath.spectral;
        let order = n + s + 1;
        let prefactor = sd.coupling * sd.cutoff.powf(1.0 - s as f64) * factorial(n + s);
        Self {
            prefactor,
            vacuum: sd.cutoff.powi(order as i32),
            order,
            beta: bath.beta(),
            c: 1.0 / sd.cutoff,
        }
    }

    /// S_{m + shift}
    fn thermal(&self, shift: u32) -> f64 {
        let m = self.order + shift;
        let h = hurwitz_zeta(m, 1.0 + self.c / self.beta).expect("valid Hurwitz arguments");
        h / self.beta.powi(m as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn bath(lam: f64, s: f64, beta: f64) -> Bath {
        Bath::new(
            OhmicSpectralDensity::new(lam, s, 1.0).unwrap(),
            BathTemperature::from_beta(beta).unwrap(),
        )
    }

    #[test]
    fn spectral_density_values() {
        let sd = OhmicSpectralDensity::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(sd.eval(0.0).unwrap(), 0.0);
        assert!((sd.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let sd = OhmicSpectralDensity::new(2.0, 3.0, 1.0).unwrap();
        assert!((sd.eval(2.0).unwrap() - 16.0 * (-2.0f64).exp()).abs() < 1e-14);
        assert!(sd.eval(-0.1).is_err());
        assert!(OhmicSpectralDensity::new(0.0, 1.0, 1.0).is_err());
        assert!(OhmicSpectralDensity::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn temperature_round_trip() {
        let t = BathTemperature::from_temperature(0.07).unwrap();
        assert!((t.beta() * t.temperature() - 1.0).abs() <= f64::EPSILON);
        assert!(BathTemperature::from_temperature(0.0).is_err());
    }

    #[test]
    fn bose_occupation_values() {
        assert!((bose_occupation(LN_2).unwrap() - 1.0).abs() < 1e-15);
        assert!(bose_occupation(50.0).unwrap() < 2e-22);
        let x: f64 = 1e-3;
        let series = 1.0 / x - 0.5 + x / 12.0 - x.powi(3) / 720.0;
        assert!((bose_occupation(x).unwrap() - series).abs() < 1e-9);
        assert!(matches!(bose_occupation(0.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn thermalized_density_limits() {
        let b = bath(1.0, 1.0, 1.0);
        assert!(b.j_beta(200.0) < 1e-80);
        // continuity at the origin for s = 1
        assert!((b.j_beta(1e-9) - b.j_beta(0.0)).abs() < 1e-8);
        assert!((b.j_beta(-1e-9) - b.j_beta(0.0)).abs() < 1e-8);
        assert!((b.j_beta(1.0) - b.j_beta(-1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn correlation_at_zero_is_real_zeroth_moment() {
        for s in [1.0, 2.0, 3.0] {
            let b = bath(1.0, s, 14.3);
            let c0 = b.ttcf(0.0).unwrap();
            assert!(c0.im.abs() < 1e-14);
            let z0 = b.moment_quadrature(0).unwrap();
            assert!((c0.re - z0).abs() < 1e-8 * z0, "s = {s}");
        }
    }

    #[test]
    fn first_moment_is_minus_two_for_unit_ohmic() {
        for beta in [0.5, 1.0, 100.0] {
            let b = bath(1.0, 1.0, beta);
            assert!((b.moment(1).unwrap() + 2.0).abs() < 1e-14);
            assert!((b.moment_quadrature(1).unwrap() + 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_temperature_zeroth_moment() {
        // thermal excess is 2 ζ_R(2)/β² ≈ 3.3e-6 at β = 1e3
        let b = bath(1.0, 1.0, 1e3);
        assert!((b.moment(0).unwrap() - 1.0 - std::f64::consts::PI.powi(2) / 3.0 * 1e-6).abs() < 1e-8);
        let b = bath(1.0, 1.0, 1e4);
        assert!((b.moment(0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symbolic_and_quadrature_moments_agree() {
        for s in [1.0, 2.0, 3.0] {
            for beta in [0.5, 5.0, 50.0] {
                let b = bath(0.7, s, beta);
                for n in 0..7 {
                    let a = b.moment(n).unwrap();
                    let q = b.moment_quadrature(n).unwrap();
                    assert!((a - q).abs() < 1e-9 * a.abs().max(1.0), "s={s} beta={beta} n={n}: {a} vs {q}");
                }
            }
        }
    }

    #[test]
    fn moment_derivatives_match_quadrature() {
        let b = bath(0.8, 1.0, 14.3);
        for tag in [
            EnvParameter::InverseTemperature,
            EnvParameter::Temperature,
            EnvParameter::Cutoff,
            EnvParameter::Coupling,
        ] {
            for n in 0..6 {
                let a = b.moment_derivative(n, tag).unwrap();
                let q = b.moment_derivative_quadrature(n, tag).unwrap();
                assert!((a - q).abs() < 1e-8 * a.abs().max(1e-3), "{tag:?} n={n}: {a} vs {q}");
            }
        }
    }

    #[test]
    fn moment_derivatives_match_finite_differences() {
        let b = bath(0.8, 2.0, 3.0);
        let h = 1e-5;
        for tag in EnvParameter::ALL {
            for n in 0..4 {
                let x = b.parameter(tag);
                let up = b.with_parameter(tag, x + h).unwrap().moment_quadrature(n).unwrap();
                let dn = b.with_parameter(tag, x - h).unwrap().moment_quadrature(n).unwrap();
                let fd = (up - dn) / (2.0 * h);
                let d = b.moment_derivative(n, tag).unwrap();
                assert!((fd - d).abs() < 1e-5 * d.abs().max(1.0), "{tag:?} n={n}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn noninteger_ohmicity_uses_quadrature() {
        let b = bath(1.0, 0.5, 2.0);
        assert!(b.spectral.integer_ohmicity().is_none());
        let c = b.ttcf(0.7).unwrap();
        let cm = b.ttcf(-0.7).unwrap();
        assert!((c - cm.conj()).norm() < 1e-9);
        assert!((b.ttcf(0.0).unwrap().re - b.moment(0).unwrap()).abs() < 1e-8);
    }
}
