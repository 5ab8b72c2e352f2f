//! Second-order time-convolutionless (TCL2) master equation for the probe.
//!
//! The interaction operator A(θ) = (σ_x cos θ + σ_z sin θ)/2 is split into
//! the jump operators σ_+, σ_-, σ_z with amplitudes a_± = cos θ/2,
//! a_z = sin θ/2. With Γ_+ = Γ(-ω_S, t), Γ_- = Γ(ω_S, t), Γ_z = Γ(0, t) the
//! generator reads
//!
//! ```text
//! L_t ρ = -i[H_S + H_LS(t), ρ] + Σ_kj b_kj(t) (σ_k ρ σ_j† - ½{σ_j† σ_k, ρ})
//! b_kj  = a_j a_k (Γ_k + Γ_j*)
//! H_LS  = Σ_kj a_j a_k (Γ_k - Γ_j*)/(2i) σ_j† σ_k   (zz term dropped, it is ∝ 𝟙)
//! ```
//!
//! Every quantity above is real-linear in the three Γ values, which the
//! Dyson module exploits by feeding Taylor coefficients of Γ through the same
//! assembly.

use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::error::{ Error, Result };
use crate::quad::GaussLegendre;
use crate::qubit::{ pauli_basis, sigma_minus, sigma_plus, sigma_z, DensityMatrix2, Mat2 };
use crate::spectral::Bath;
use crate::superop::SuperOp;

pub const PLUS: usize = 0;
pub const MINUS: usize = 1;
pub const Z: usize = 2;

/// Width of the checkpoint panels of the Γ cache.
const GAMMA_PANEL: f64 = 0.1;
const GAMMA_NODES: usize = 16;

/// Minimum eigenvalue below which a TCL2 sample is flagged.
const POSITIVITY_ALARM: f64 = -1e-6;

/// Probe frequency and interaction angle.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub omega_s: f64,
    pub theta: f64,
}

impl ProbeConfig {
    pub fn new(omega_s: f64, theta: f64) -> Result<Self> {
        if !(omega_s.is_finite() && omega_s >= 0.0) {
            return Err(Error::InvalidParameter(format!("omega_s must be >= 0, got {omega_s}")));
        }
        let eps = 1e-12;
        if !(theta >= -eps && theta <= std::f64::consts::FRAC_PI_2 + eps) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, pi/2], got {theta}")));
        }
        Ok(Self { omega_s, theta: theta.clamp(0.0, std::f64::consts::FRAC_PI_2) })
    }

    /// A(θ) = (σ_x cos θ + σ_z sin θ)/2.
    pub fn interaction_operator(&self) -> Mat2 {
        let [_, x, _, z] = pauli_basis();
        (x * C64::from(self.theta.cos()) + z * C64::from(self.theta.sin())) * C64::from(0.5)
    }

    /// H_S = ω_S σ_z / 2.
    pub fn system_hamiltonian(&self) -> Mat2 { sigma_z() * C64::from(0.5 * self.omega_s) }

    /// Amplitudes (a_+, a_-, a_z).
    pub fn amplitudes(&self) -> [f64; 3] {
        let c = 0.5 * self.theta.cos();
        [c, c, 0.5 * self.theta.sin()]
    }

    /// Frequencies ξ at which Γ(ξ, t) enters, ordered as (+, -, z).
    pub fn gamma_frequencies(&self) -> [f64; 3] { [-self.omega_s, self.omega_s, 0.0] }
}

fn jump_operators() -> [Mat2; 3] { [sigma_plus(), sigma_minus(), sigma_z()] }

/// Dissipator coefficients b_kj (k, j ∈ {+, -, z}) and the Lamb-shift
/// Hamiltonian.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TclCoefficients {
    pub b: [[C64; 3]; 3],
    pub lamb_shift: Mat2,
}

impl TclCoefficients {
    /// Assembles the coefficients from (Γ_+, Γ_-, Γ_z).
    pub fn from_gammas(probe: &ProbeConfig, gammas: [C64; 3]) -> Self {
        let a = probe.amplitudes();
        let ops = jump_operators();
        let mut b = [[C64::new(0.0, 0.0); 3]; 3];
        let mut lamb_shift = Mat2::zeros();
        for k in 0..3 {
            for j in 0..3 {
                let w = a[j] * a[k];
                b[k][j] = (gammas[k] + gammas[j].conj()) * w;
                // σ_z σ_z = 𝟙 only shifts the energy origin.
                if (k, j) != (Z, Z) {
                    let h = (gammas[k] - gammas[j].conj()) * w / C64::new(0.0, 2.0);
                    lamb_shift += ops[j].adjoint() * ops[k] * h;
                }
            }
        }
        let out = Self { b, lamb_shift };
        debug_assert!(out.symmetry_defect() < 1e-12 * (1.0 + gammas.iter().map(|g| g.norm()).sum::<f64>()));
        out
    }

    /// Largest violation of b_kj = conj(b_jk), real diagonal and Hermitian H_LS.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d = (self.lamb_shift - self.lamb_shift.adjoint()).norm();
        for k in 0..3 {
            for j in 0..3 {
                d = d.max((self.b[k][j] - self.b[j][k].conj()).norm());
            }
        }
        d
    }

    /// Lamb-shift entry H_ij.
    pub fn h(&self, i: usize, j: usize) -> C64 { self.lamb_shift[(i, j)] }

    /// Action of the dissipator plus the Lamb shift (no H_S) on a 2×2 matrix.
    pub fn apply_without_system(&self, rho: &Mat2) -> Mat2 {
        let ops = jump_operators();
        let i = C64::new(0.0, 1.0);
        let h = &self.lamb_shift;
        let mut out = -(h * rho - rho * h) * i;
        for k in 0..3 {
            for j in 0..3 {
                let b = self.b[k][j];
                if b == C64::new(0.0, 0.0) {
                    continue;
                }
                let sj_dag = ops[j].adjoint();
                let prod = sj_dag * ops[k];
                out += (ops[k] * rho * sj_dag - (prod * rho + rho * prod) * C64::from(0.5)) * b;
            }
        }
        out
    }
}

/// Real 4×4 matrix of a linear map on 2×2 matrices in the basis {𝟙, σ}/√2.
/// The first row is set to zero since every TCL2 generator is traceless.
pub(crate) fn bloch_matrix_of<F: Fn(&Mat2) -> Mat2>(op: F) -> Matrix4<f64> {
    let basis = pauli_basis();
    let mut d = Matrix4::zeros();
    for (beta, sb) in basis.iter().enumerate() {
        let image = op(sb);
        for (alpha, sa) in basis.iter().enumerate().skip(1) {
            d[(alpha, beta)] = 0.5 * (sa * image).trace().re;
        }
    }
    d
}

/// The generator D^{L(t)} as a 4×4 real matrix acting on r̃ = (1, r).
pub fn generator_matrix(coeffs: &TclCoefficients, probe: &ProbeConfig) -> Matrix4<f64> {
    let hs = probe.system_hamiltonian();
    let i = C64::new(0.0, 1.0);
    bloch_matrix_of(|rho| coeffs.apply_without_system(rho) - (hs * rho - rho * hs) * i)
}

/// Generator contribution of the coefficients alone (no H_S).
pub(crate) fn dissipative_matrix(coeffs: &TclCoefficients) -> Matrix4<f64> {
    bloch_matrix_of(|rho| coeffs.apply_without_system(rho))
}

/// Incremental evaluator of Γ(ξ, t) = ∫_0^t e^{iξτ} C(τ) dτ for a fixed set of
/// frequencies.
///
/// Values at the checkpoints kP (P = 0.1) are accumulated once, so that the
/// result for a given t does not depend on the order of queries.
#[derive(Clone, Debug)]
pub struct GammaCache {
    bath: Bath,
    xi: [f64; 3],
    rule: GaussLegendre,
    checkpoints: Vec<[C64; 3]>,
}

impl GammaCache {
    pub fn new(bath: Bath, xi: [f64; 3]) -> Self {
        Self { bath, xi, rule: GaussLegendre::new(GAMMA_NODES), checkpoints: vec![[C64::new(0.0, 0.0); 3]] }
    }

    pub fn for_probe(bath: Bath, probe: &ProbeConfig) -> Self { Self::new(bath, probe.gamma_frequencies()) }

    fn segment(&self, a: f64, b: f64) -> Result<[C64; 3]> {
        let mut acc = [C64::new(0.0, 0.0); 3];
        for (tau, w) in self.rule.mapped(a, b) {
            let c = self.bath.ttcf(tau)? * w;
            for (v, xi) in acc.iter_mut().zip(self.xi) {
                *v += C64::from_polar(1.0, xi * tau) * c;
            }
        }
        Ok(acc)
    }

    /// (Γ(ξ_0, t), Γ(ξ_1, t), Γ(ξ_2, t)).
    pub fn eval(&mut self, t: f64) -> Result<[C64; 3]> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("Gamma needs t >= 0, got {t}")));
        }
        let k = (t / GAMMA_PANEL).floor() as usize;
        while self.checkpoints.len() <= k {
            let n = self.checkpoints.len();
            let a = (n - 1) as f64 * GAMMA_PANEL;
            let seg = self.segment(a, n as f64 * GAMMA_PANEL)?;
            let prev = self.checkpoints[n - 1];
            self.checkpoints.push([prev[0] + seg[0], prev[1] + seg[1], prev[2] + seg[2]]);
        }
        let base = self.checkpoints[k];
        let a = k as f64 * GAMMA_PANEL;
        if t == a {
            return Ok(base);
        }
        let seg = self.segment(a, t)?;
        Ok([base[0] + seg[0], base[1] + seg[1], base[2] + seg[2]])
    }
}

/// Γ(ξ, t) for a single frequency.
pub fn gamma(bath: &Bath, xi: f64, t: f64) -> Result<C64> {
    Ok(GammaCache::new(*bath, [xi, 0.0, 0.0]).eval(t)?[0])
}

/// TCL2 coefficients at time t.
pub fn tcl_coefficients(probe: &ProbeConfig, bath: &Bath, t: f64) -> Result<TclCoefficients> {
    let g = GammaCache::for_probe(*bath, probe).eval(t)?;
    Ok(TclCoefficients::from_gammas(probe, g))
}

/// Integration settings for the TCL2 equation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TclOptions {
    pub rtol: f64,
    pub atol: f64,
    /// When set, integrate with this uniform step (shrunk to fit each sample
    /// interval) instead of adaptively. Makes results smooth functions of the
    /// bath parameters, as needed for finite-difference derivatives.
    pub fixed_step: Option<f64>,
}

impl Default for TclOptions {
    fn default() -> Self { Self { rtol: 1e-9, atol: 1e-12, fixed_step: None } }
}

/// An ordered sequence of reduced probe states.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<(f64, DensityMatrix2)>,
    /// Convergence or validity warnings raised while producing the samples.
    pub flags: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> { self.samples.iter().map(|(t, _)| *t).collect() }

    pub fn states(&self) -> impl Iterator<Item = &DensityMatrix2> { self.samples.iter().map(|(_, r)| r) }

    pub fn len(&self) -> usize { self.samples.len() }

    pub fn is_empty(&self) -> bool { self.samples.is_empty() }

    pub const CSV_HEADER: &'static str = "t,re_rho00,im_rho00,re_rho01,im_rho01,re_rho10,im_rho10,re_rho11,im_rho11";

    /// Rows (t, Re/Im of ρ_00, ρ_01, ρ_10, ρ_11) with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (t, rho) in &self.samples {
            let m = rho.matrix();
            write!(w, "{t:.16e}")?;
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                write!(w, ",{:.16e},{:.16e}", m[(i, j)].re, m[(i, j)].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if !(t_grid[0] >= 0.0) {
        return Err(Error::InvalidParameter(format!("time grid must start at t >= 0, got {}", t_grid[0])));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates dΦ/dt = G(t)Φ, Φ(0) = 𝟙, reporting Φ at each grid time.
struct MapIntegrator<'a> {
    probe: &'a ProbeConfig,
    cache: GammaCache,
    options: TclOptions,
}

impl MapIntegrator<'_> {
    fn generator(&mut self, t: f64) -> Result<Matrix4<f64>> {
        let g = self.cache.eval(t)?;
        Ok(generator_matrix(&TclCoefficients::from_gammas(self.probe, g), self.probe))
    }

    /// One Dormand–Prince step; returns (Φ_new, error estimate).
    fn step(&mut self, t: f64, h: f64, phi: &Matrix4<f64>) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
        let mut k: [Matrix4<f64>; 7] = [Matrix4::zeros(); 7];
        for s in 0..7 {
            let mut y = *phi;
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    y += kj * (h * A[s][j]);
                }
            }
            k[s] = self.generator(t + C[s] * h)? * y;
        }
        let mut y5 = *phi;
        let mut err = Matrix4::zeros();
        for s in 0..7 {
            y5 += k[s] * (h * B5[s]);
            err += k[s] * (h * (B5[s] - B4[s]));
        }
        Ok((y5, err))
    }

    fn run(&mut self, t_grid: &[f64]) -> Result<Vec<Matrix4<f64>>> {
        check_grid(t_grid)?;
        let mut out = Vec::with_capacity(t_grid.len());
        let mut phi = Matrix4::identity();
        let mut t = 0.0;
        let mut h_proposed = self.options.fixed_step.unwrap_or(1e-2);
        for &target in t_grid {
            if let Some(h_fixed) = self.options.fixed_step {
                let span = target - t;
                if span > 0.0 {
                    let n = (span / h_fixed).ceil().max(1.0) as usize;
                    let h = span / n as f64;
                    for i in 0..n {
                        phi = self.step(t + i as f64 * h, h, &phi)?.0;
                    }
                }
                t = target;
            } else {
                while t < target {
                    let remaining = target - t;
                    let last = h_proposed >= remaining;
                    let h = if last { remaining } else { h_proposed };
                    if h < 1e-14 * (1.0 + t) {
                        return Err(Error::StepSizeUnderflow { t, h });
                    }
                    let (y, e) = self.step(t, h, &phi)?;
                    let mut ratio: f64 = 0.0;
                    for (i, ei) in e.iter().enumerate() {
                        let scale = self.options.atol + self.options.rtol * phi[i].abs().max(y[i].abs());
                        ratio = ratio.max(ei.abs() / scale);
                    }
                    let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                    if ratio <= 1.0 {
                        phi = y;
                        t = if last { target } else { t + h };
                        // A step shortened to land on a sample does not limit the next one.
                        h_proposed = if last { h_proposed.max(h * factor) } else { h * factor };
                    } else {
                        h_proposed = h * factor;
                    }
                }
            }
            // Trace preservation: keep the first row exactly (1, 0, 0, 0).
            phi[(0, 0)] = 1.0;
            for j in 1..4 {
                phi[(0, j)] = 0.0;
            }
            out.push(phi);
        }
        Ok(out)
    }
}

/// The TCL2 dynamical map D^{Λ(t)} at each grid time.
pub fn evolve_tcl_map(probe: &ProbeConfig, bath: &Bath, t_grid: &[f64], options: TclOptions) -> Result<Vec<SuperOp>> {
    let mut integrator = MapIntegrator { probe, cache: GammaCache::for_probe(*bath, probe), options };
    Ok(integrator.run(t_grid)?.into_iter().map(SuperOp::from_matrix_unchecked).collect())
}

/// Evolves ρ₀ under the TCL2 master equation, sampling at `t_grid`.
pub fn evolve_tcl(
    probe: &ProbeConfig,
    bath: &Bath,
    rho0: &DensityMatrix2,
    t_grid: &[f64],
    options: TclOptions,
) -> Result<Trajectory> {
    let maps = evolve_tcl_map(probe, bath, t_grid, options)?;
    let r0 = rho0.bloch();
    let mut traj = Trajectory::default();
    for (&t, map) in t_grid.iter().zip(&maps) {
        let rho = if t == 0.0 {
            *rho0
        } else {
            DensityMatrix2::from_bloch_unchecked(&map.apply(&r0))
        };
        let lo = rho.min_eigenvalue();
        if lo < POSITIVITY_ALARM {
            let msg = format!("TCL2 state leaves the Bloch ball at t = {t}: min eigenvalue {lo:e}");
            log::warn!("{msg}");
            traj.flags.push(msg);
        }
        traj.samples.push((t, rho));
    }
    Ok(traj)
}
