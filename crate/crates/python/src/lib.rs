use num_complex::Complex64 as C64;
use pyo3::exceptions::{ PyRuntimeError, PyValueError };
use pyo3::prelude::*;

use qprobe::chainmap::{ chain_coefficients, ChainSettings };
use qprobe::error::Error;
use qprobe::qfi::{ initial_state, qfi_map_dyson, qfi_series_dyson, qfi_short_closed_form };
use qprobe::qubit::DensityMatrix2;
use qprobe::spectral::{ Bath as CoreBath, BathTemperature, EnvParameter, OhmicSpectralDensity };
use qprobe::tcl::{ evolve_tcl, ProbeConfig, TclOptions };
use qprobe::tebd::{ evolve_tebd, TebdConfig };

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Pole { .. } | Error::InsufficientSupport { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn tag(name: &str) -> PyResult<EnvParameter> { name.parse().map_err(to_py) }

/// Ohmic bath J(ω) = λ ω_c^{1-s} ω^s e^{-ω/ω_c} at inverse temperature β.
#[pyclass(frozen)]
#[derive(Clone)]
struct Bath(CoreBath);

#[pymethods]
impl Bath {
    #[new]
    #[pyo3(signature = (coupling = 1.0, ohmicity = 1.0, cutoff = 1.0, *, temperature = None, beta = None))]
    fn new(coupling: f64, ohmicity: f64, cutoff: f64, temperature: Option<f64>, beta: Option<f64>) -> PyResult<Self> {
        let t = match (temperature, beta) {
            (Some(t), None) => BathTemperature::from_temperature(t),
            (None, Some(b)) => BathTemperature::from_beta(b),
            _ => return Err(PyValueError::new_err("give exactly one of temperature and beta")),
        }
        .map_err(to_py)?;
        let sd = OhmicSpectralDensity::new(coupling, ohmicity, cutoff).map_err(to_py)?;
        Ok(Self(CoreBath::new(sd, t)))
    }

    #[getter]
    fn beta(&self) -> f64 { self.0.beta() }

    /// ζ(n), the n-th moment of the thermalized spectral density.
    fn moment(&self, n: u32) -> PyResult<f64> { self.0.moment(n).map_err(to_py) }

    /// C(t), the bath two-time correlation function.
    fn correlation(&self, t: f64) -> PyResult<C64> { self.0.ttcf(t).map_err(to_py) }

    fn j_beta(&self, omega: f64) -> f64 { self.0.j_beta(omega) }

    /// Returns a copy with one parameter ("beta", "cutoff", ...) replaced.
    fn with_parameter(&self, parameter: &str, value: f64) -> PyResult<Self> {
        Ok(Self(self.0.with_parameter(tag(parameter)?, value).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        let sd = self.0.spectral;
        format!("Bath(coupling={}, ohmicity={}, cutoff={}, beta={})", sd.coupling(), sd.ohmicity(), sd.cutoff(), self.0.beta())
    }
}

fn states(samples: &[(f64, DensityMatrix2)]) -> Vec<(f64, [f64; 3])> {
    samples.iter().map(|(t, rho)| (*t, rho.bloch().0.into())).collect()
}

/// TCL2 evolution of r₀(α); returns (t, Bloch vector) pairs.
#[pyfunction]
#[pyo3(signature = (bath, omega_s, theta, alpha, times, rtol = 1e-9, atol = 1e-12))]
fn evolve_tcl_bloch(bath: &Bath, omega_s: f64, theta: f64, alpha: f64, times: Vec<f64>, rtol: f64, atol: f64) -> PyResult<Vec<(f64, [f64; 3])>> {
    let probe = ProbeConfig::new(omega_s, theta).map_err(to_py)?;
    let rho0 = DensityMatrix2::from_bloch(&initial_state(alpha)).map_err(to_py)?;
    let traj = evolve_tcl(&probe, &bath.0, &rho0, &times, TclOptions { rtol, atol, fixed_step: None }).map_err(to_py)?;
    Ok(states(&traj.samples))
}

/// QFI of the order-k Dyson map along `times`.
#[pyfunction]
#[pyo3(signature = (bath, omega_s, theta, alpha, times, parameter = "beta", order = 7))]
fn qfi_series(bath: &Bath, omega_s: f64, theta: f64, alpha: f64, times: Vec<f64>, parameter: &str, order: usize) -> PyResult<Vec<f64>> {
    let probe = ProbeConfig::new(omega_s, theta).map_err(to_py)?;
    qfi_series_dyson(&probe, &bath.0, alpha, order, tag(parameter)?, &times).map_err(to_py)
}

/// (θ, α, Q, R) over a grid at time t from the order-k Dyson map.
#[pyfunction]
#[pyo3(signature = (bath, omega_s, t, thetas, alphas, parameter = "beta", order = 7))]
fn qfi_map(bath: &Bath, omega_s: f64, t: f64, thetas: Vec<f64>, alphas: Vec<f64>, parameter: &str, order: usize) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let cells = qfi_map_dyson(omega_s, &bath.0, order, tag(parameter)?, t, &thetas, &alphas).map_err(to_py)?;
    Ok(cells.into_iter().map(|c| (c.theta, c.alpha, c.qfi, c.ratio)).collect())
}

/// Leading short-time QFI (t²/4) sin²(α - θ) (∂ζ(0))²/ζ(0).
#[pyfunction]
#[pyo3(signature = (bath, t, theta, alpha, parameter = "beta"))]
fn qfi_short_time(bath: &Bath, t: f64, theta: f64, alpha: f64, parameter: &str) -> PyResult<f64> {
    qfi_short_closed_form(tag(parameter)?, &bath.0, t, theta, alpha).map_err(to_py)
}

/// Chain frequencies and couplings (ω_n, κ_n) of the thermalized bath.
#[pyfunction]
#[pyo3(signature = (bath, sites, omega_max = None, node_count = None))]
fn chain(bath: &Bath, sites: usize, omega_max: Option<f64>, node_count: Option<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = chain_coefficients(&bath.0, &ChainSettings { sites, omega_max, node_count }).map_err(to_py)?;
    Ok((c.frequencies, c.couplings))
}

/// TEBD evolution of r₀(α) on the chain; returns (samples, max bond, flags).
#[pyfunction]
#[pyo3(signature = (bath, omega_s, theta, alpha, t_final, preset = "desk", chain_length = None, chi = None, d_max = None, dt = None))]
#[allow(clippy::too_many_arguments)]
fn evolve_tebd_bloch(
    bath: &Bath,
    omega_s: f64,
    theta: f64,
    alpha: f64,
    t_final: f64,
    preset: &str,
    chain_length: Option<usize>,
    chi: Option<usize>,
    d_max: Option<usize>,
    dt: Option<f64>,
) -> PyResult<(Vec<(f64, [f64; 3])>, usize, Vec<String>)> {
    let base = TebdConfig::preset(preset).map_err(to_py)?;
    let config = TebdConfig {
        chain_length: chain_length.unwrap_or(base.chain_length),
        chi: chi.unwrap_or(base.chi),
        d_max: d_max.unwrap_or(base.d_max),
        dt: dt.unwrap_or(base.dt),
        ..base
    };
    let probe = ProbeConfig::new(omega_s, theta).map_err(to_py)?;
    let chain = chain_coefficients(&bath.0, &ChainSettings::new(config.chain_length)).map_err(to_py)?;
    let run = evolve_tebd(&config, &chain, &probe, alpha, t_final).map_err(to_py)?;
    Ok((states(&run.trajectory.samples), run.metadata.max_bond, run.metadata.flags))
}

#[pymodule]
#[pyo3(name = "qprobe")]
fn qprobe_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Bath>()?;
    m.add_function(wrap_pyfunction!(evolve_tcl_bloch, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_tebd_bloch, m)?)?;
    m.add_function(wrap_pyfunction!(qfi_series, m)?)?;
    m.add_function(wrap_pyfunction!(qfi_map, m)?)?;
    m.add_function(wrap_pyfunction!(qfi_short_time, m)?)?;
    m.add_function(wrap_pyfunction!(chain, m)?)?;
    Ok(())
}
