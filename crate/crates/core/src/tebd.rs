//! Time-evolving block decimation of the probe + oscillator chain.
//!
//! Site 0 of the matrix product state is the qubit, sites 1..=n are chain
//! oscillators truncated to `d_max` levels. Bond j couples sites j and j+1.
//! Each bond carries a two-site Hamiltonian; on-site terms of interior
//! oscillators are split half-and-half between their two bonds, while the
//! qubit and the last oscillator belong to a single bond. A second-order step
//! applies the even bonds for dt/2, the odd bonds for dt and the even bonds
//! again for dt/2. Every gate is followed by a truncated SVD.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{ s, Array1, Array2, Array3 };
use ndarray_linalg::{ Eigh, QR, SVD, UPLO };
use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };

use crate::chainmap::{ chain_coefficients_on, default_omega_max, ChainCoefficients, ChainSettings, QuadratureLayout };
use crate::error::{ Error, Result };
use crate::qfi::{ clamp_qfi, sqrt_infidelity, QfiConfig };
use crate::qubit::{ DensityMatrix2, Mat2 };
use crate::spectral::Bath;
use crate::tcl::{ ProbeConfig, Trajectory };

/// Occupation of the last two chain sites above which the run is flagged as
/// reaching the end of the chain.
pub const BOUNDARY_SENTINEL: f64 = 1e-8;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TebdConfig {
    pub dt: f64,
    /// Bond dimension cap χ.
    pub chi: usize,
    /// Singular values below `svd_cutoff` times the largest one are dropped.
    pub svd_cutoff: f64,
    /// Local oscillator dimension.
    pub d_max: usize,
    /// Number of chain oscillators n.
    pub chain_length: usize,
    pub sample_interval: f64,
    /// Discarded weight per step that raises a convergence flag.
    pub truncation_alarm: f64,
}

impl TebdConfig {
    /// n = 60, χ = 30, d_max = 8, dt = 0.01.
    pub fn desk() -> Self {
        Self { dt: 0.01, chi: 30, svd_cutoff: 1e-10, d_max: 8, chain_length: 60, sample_interval: 0.05, truncation_alarm: 1e-6 }
    }

    /// n = 150, χ = 50, d_max = 12, dt = 0.01.
    pub fn full() -> Self { Self { chi: 50, d_max: 12, chain_length: 150, ..Self::desk() } }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::InvalidParameter(format!("unknown TEBD preset '{other}' (expected desk or full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.chi < 2 || self.d_max < 2 || self.chain_length < 2 {
            return bad(format!("need chi, d_max, n >= 2, got {}, {}, {}", self.chi, self.d_max, self.chain_length));
        }
        if !(self.svd_cutoff >= 0.0 && self.svd_cutoff < 1.0) {
            return bad(format!("svd cutoff must lie in [0, 1), got {}", self.svd_cutoff));
        }
        if !(self.sample_interval >= self.dt) {
            return bad(format!("sample interval {} is shorter than dt = {}", self.sample_interval, self.dt));
        }
        steps_for(self.sample_interval, self.dt).map(|_| ())
    }

    fn sample_every(&self) -> usize { (self.sample_interval / self.dt).round() as usize }
}

/// Number of steps of length dt covering `span`; `span` must be a multiple of dt.
fn steps_for(span: f64, dt: f64) -> Result<usize> {
    let k = (span / dt).round();
    if (k * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidParameter(format!("{span} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

fn linalg(e: ndarray_linalg::error::LinalgError) -> Error { Error::Linalg(e.to_string()) }

fn dagger(m: &Array2<C64>) -> Array2<C64> { m.t().mapv(|x| x.conj()) }

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn annihilation(d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(i, j)| if j == i + 1 { C64::from((j as f64).sqrt()) } else { C64::from(0.0) })
}

fn number(d: usize) -> Array2<C64> { Array2::from_diag(&Array1::from_shape_fn(d, |i| C64::from(i as f64))) }

fn from_mat2(m: &Mat2) -> Array2<C64> { Array2::from_shape_fn((2, 2), |(i, j)| m[(i, j)]) }

fn reshape2(a: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).expect("reshape preserves length")
}

fn reshape3(a: Array2<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    a.as_standard_layout().into_owned().into_shape_with_order(shape).expect("reshape preserves length")
}

/// Two-site Hamiltonians of every bond of the probe + chain system.
pub fn bond_hamiltonians(chain: &ChainCoefficients, probe: &ProbeConfig, d_max: usize) -> Result<Vec<Array2<C64>>> {
    let n = chain.len();
    if n < 2 || chain.couplings.len() != n {
        return Err(Error::InvalidParameter(format!("chain of {n} sites is too short for TEBD")));
    }
    let c = annihilation(d_max);
    let x = &c + &dagger(&c);
    let num = number(d_max);
    let id_q = Array2::<C64>::eye(2);
    let id_b = Array2::<C64>::eye(d_max);
    let weight = |site: usize| if site + 1 == n { 1.0 } else { 0.5 };
    let mut out = Vec::with_capacity(n);
    let h_sys = from_mat2(&probe.system_hamiltonian());
    let a_op = from_mat2(&probe.interaction_operator());
    out.push(
        kron(&h_sys, &id_b)
            + kron(&a_op, &x) * C64::from(chain.couplings[0])
            + kron(&id_q, &num) * C64::from(weight(0) * chain.frequencies[0]),
    );
    for j in 1..n {
        let hop = kron(&c, &dagger(&c)) + kron(&dagger(&c), &c);
        out.push(
            hop * C64::from(chain.couplings[j])
                + kron(&num, &id_b) * C64::from(0.5 * chain.frequencies[j - 1])
                + kron(&id_b, &num) * C64::from(weight(j) * chain.frequencies[j]),
        );
    }
    Ok(out)
}

/// exp(-i h τ) for a Hermitian h.
fn propagator(h: &Array2<C64>, tau: f64) -> Result<Array2<C64>> {
    let (e, v) = h.eigh(UPLO::Upper).map_err(linalg)?;
    let phases = e.mapv(|x| C64::from_polar(1.0, -x * tau));
    let scaled = &v * &phases.insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&dagger(&v)))
}

/// Thin SVD by the QR-iteration driver. The divide-and-conquer driver of some
/// LAPACK builds returns inaccurate factors for these matrices, so the result
/// is verified: the leading columns must reproduce the matrix.
fn checked_svd(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    let (u, sv, vt) = m.svd(true, true).map_err(linalg)?;
    let k = sv.len();
    let u = u.expect("requested U").slice(s![.., ..k]).to_owned();
    let vt = vt.expect("requested V^T").slice(s![..k, ..]).to_owned();
    let scale: f64 = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rebuilt = (&u * &sv.mapv(C64::from).insert_axis(ndarray::Axis(0))).dot(&vt);
    let residual = (&rebuilt - m).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if !(residual <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Linalg(format!("inaccurate SVD of a {:?} matrix: residual {residual:e}", m.dim())));
    }
    Ok((u, sv, vt))
}

/// Matrix product state of the qubit and the chain in mixed canonical form.
#[derive(Clone, Debug)]
pub struct MpsState {
    /// Site tensors with index order (left bond, physical, right bond).
    pub tensors: Vec<Array3<C64>>,
    center: usize,
    /// Discarded weight per completed Trotter step.
    pub truncation_log: Vec<f64>,
}

/// |ψ(α)⟩ ⊗ |0…0⟩ with |ψ(α)⟩ = cos(ϑ/2)|0⟩ + sin(ϑ/2)|1⟩, ϑ = π/2 - α.
pub fn init_mps(alpha: f64, n: usize, d_max: usize) -> MpsState {
    let vartheta = std::f64::consts::FRAC_PI_2 - alpha;
    let mut tensors = Vec::with_capacity(n + 1);
    let mut q = Array3::zeros((1, 2, 1));
    q[(0, 0, 0)] = C64::from((0.5 * vartheta).cos());
    q[(0, 1, 0)] = C64::from((0.5 * vartheta).sin());
    tensors.push(q);
    for _ in 0..n {
        let mut b = Array3::zeros((1, d_max, 1));
        b[(0, 0, 0)] = C64::from(1.0);
        tensors.push(b);
    }
    MpsState { tensors, center: 0, truncation_log: Vec::new() }
}

/// Singular-value truncation settings.
#[derive(Copy, Clone, Debug)]
struct Truncation {
    chi: usize,
    cutoff: f64,
}

impl MpsState {
    pub fn len(&self) -> usize { self.tensors.len() }

    pub fn is_empty(&self) -> bool { self.tensors.is_empty() }

    pub fn center(&self) -> usize { self.center }

    pub fn bond_dimensions(&self) -> Vec<usize> { self.tensors[..self.len() - 1].iter().map(|t| t.dim().2).collect() }

    pub fn max_bond(&self) -> usize { self.bond_dimensions().into_iter().max().unwrap_or(1) }

    pub fn total_discarded_weight(&self) -> f64 { self.truncation_log.iter().sum() }

    /// Squared norm, read off at the orthogonality center.
    pub fn norm_sqr(&self) -> f64 { self.tensors[self.center].iter().map(|x| x.norm_sqr()).sum() }

    fn shift_right(&mut self) -> Result<()> {
        let i = self.center;
        let (l, d, r) = self.tensors[i].dim();
        let (q, rr) = reshape2(&self.tensors[i], l * d, r).qr().map_err(linalg)?;
        let k = q.dim().1;
        self.tensors[i] = reshape3(q, (l, d, k));
        let (_, d2, r2) = self.tensors[i + 1].dim();
        let next = rr.dot(&reshape2(&self.tensors[i + 1], r, d2 * r2));
        self.tensors[i + 1] = reshape3(next, (k, d2, r2));
        self.center = i + 1;
        Ok(())
    }

    fn shift_left(&mut self) -> Result<()> {
        let i = self.center;
        let (l, d, r) = self.tensors[i].dim();
        let (q, rr) = dagger(&reshape2(&self.tensors[i], l, d * r)).qr().map_err(linalg)?;
        let k = q.dim().1;
        self.tensors[i] = reshape3(dagger(&q), (k, d, r));
        let (l0, d0, _) = self.tensors[i - 1].dim();
        let prev = reshape2(&self.tensors[i - 1], l0 * d0, l).dot(&dagger(&rr));
        self.tensors[i - 1] = reshape3(prev, (l0, d0, k));
        self.center = i - 1;
        Ok(())
    }

    /// Moves the orthogonality center to `site` with exact QR factorizations.
    pub fn move_center(&mut self, site: usize) -> Result<()> {
        while self.center < site {
            self.shift_right()?;
        }
        while self.center > site {
            self.shift_left()?;
        }
        Ok(())
    }

    /// Applies a two-site gate on bond (j, j+1) and refactorizes; the center
    /// ends on j+1 when `to_right`, on j otherwise. Returns the discarded weight.
    fn apply_gate(&mut self, j: usize, gate: &Array2<C64>, trunc: Truncation, to_right: bool) -> Result<f64> {
        if self.center != j && self.center != j + 1 {
            self.move_center(j)?;
        }
        let (l, d1, k) = self.tensors[j].dim();
        let (_, d2, r) = self.tensors[j + 1].dim();
        let theta = reshape2(&self.tensors[j], l * d1, k).dot(&reshape2(&self.tensors[j + 1], k, d2 * r));
        let theta = theta.into_shape_with_order((l, d1, d2, r)).expect("reshape preserves length").permuted_axes([1, 2, 0, 3]);
        let theta = theta.as_standard_layout().into_owned().into_shape_with_order((d1 * d2, l * r)).expect("reshape preserves length");
        let evolved = gate.dot(&theta).into_shape_with_order((d1, d2, l, r)).expect("reshape preserves length").permuted_axes([2, 0, 1, 3]);
        let m = evolved.as_standard_layout().into_owned().into_shape_with_order((l * d1, d2 * r)).expect("reshape preserves length");
        let (u, sv, vt) = checked_svd(&m)?;
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let floor = trunc.cutoff * sv[0];
        let keep = sv.iter().take(trunc.chi).take_while(|x| **x > floor).count().max(1);
        let kept: f64 = sv.iter().take(keep).map(|x| x * x).sum();
        let discarded = if total > 0.0 { sv.iter().skip(keep).map(|x| x * x).sum::<f64>() / total } else { 0.0 };
        let norm = kept.sqrt();
        let s_kept = sv.slice(s![..keep]).mapv(|x| C64::from(x / norm));
        let mut left = u.slice(s![.., ..keep]).to_owned();
        let mut right = vt.slice(s![..keep, ..]).to_owned();
        if to_right {
            right *= &s_kept.insert_axis(ndarray::Axis(1));
            self.center = j + 1;
        } else {
            left *= &s_kept.insert_axis(ndarray::Axis(0));
            self.center = j;
        }
        self.tensors[j] = reshape3(left, (l, d1, keep));
        self.tensors[j + 1] = reshape3(right, (keep, d2, r));
        Ok(discarded)
    }

    /// Reduced qubit state: the center is moved to site 0 and its tensor is
    /// contracted with its conjugate.
    pub fn reduce_probe(&mut self) -> Result<DensityMatrix2> {
        self.move_center(0)?;
        let a = &self.tensors[0];
        let mut m = Mat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = a.slice(s![0, i, ..]).iter().zip(a.slice(s![0, j, ..]).iter()).map(|(x, y)| x * y.conj()).sum();
            }
        }
        DensityMatrix2::new(m)
    }

    /// ⟨c†c⟩ on chain oscillator `site` (MPS site `site + 1`).
    pub fn occupation(&mut self, site: usize) -> Result<f64> {
        self.move_center(site + 1)?;
        let a = &self.tensors[site + 1];
        Ok(a.indexed_iter().map(|((_, k, _), x)| k as f64 * x.norm_sqr()).sum())
    }
}

/// Gates of one Trotter layer: the bonds it acts on and their propagators.
struct Layer {
    bonds: Vec<usize>,
    gates: Vec<Array2<C64>>,
}

impl Layer {
    fn new(hams: &[Array2<C64>], parity: usize, tau: f64) -> Result<Self> {
        let bonds: Vec<usize> = (parity..hams.len()).step_by(2).collect();
        let gates = bonds.iter().map(|&b| propagator(&hams[b], tau)).collect::<Result<_>>()?;
        Ok(Self { bonds, gates })
    }

    /// Sweeps from whichever end of the layer is nearer the center.
    fn apply(&self, state: &mut MpsState, trunc: Truncation) -> Result<f64> {
        let first = self.bonds[0];
        let last = self.bonds[self.bonds.len() - 1];
        let to_right = state.center.abs_diff(first) <= state.center.abs_diff(last + 1);
        let mut discarded = 0.0;
        if to_right {
            for (b, g) in self.bonds.iter().zip(&self.gates) {
                state.move_center(*b)?;
                discarded += state.apply_gate(*b, g, trunc, true)?;
            }
        } else {
            for (b, g) in self.bonds.iter().zip(&self.gates).rev() {
                state.move_center(b + 1)?;
                discarded += state.apply_gate(*b, g, trunc, false)?;
            }
        }
        Ok(discarded)
    }
}

/// Precomputed gates of the second-order splitting.
pub struct TrotterPropagator {
    even_half: Layer,
    even_full: Layer,
    odd_full: Layer,
    trunc: Truncation,
}

impl TrotterPropagator {
    pub fn new(chain: &ChainCoefficients, probe: &ProbeConfig, config: &TebdConfig) -> Result<Self> {
        config.validate()?;
        let hams = bond_hamiltonians(chain, probe, config.d_max)?;
        Ok(Self {
            even_half: Layer::new(&hams, 0, 0.5 * config.dt)?,
            even_full: Layer::new(&hams, 0, config.dt)?,
            odd_full: Layer::new(&hams, 1, config.dt)?,
            trunc: Truncation { chi: config.chi, cutoff: config.svd_cutoff },
        })
    }

    /// One symmetric step: even bonds dt/2, odd bonds dt, even bonds dt/2.
    pub fn trotter_step(&self, state: &mut MpsState) -> Result<f64> {
        let w = self.even_half.apply(state, self.trunc)? + self.odd_full.apply(state, self.trunc)? + self.even_half.apply(state, self.trunc)?;
        state.truncation_log.push(w);
        Ok(w)
    }

    /// `steps` consecutive steps with the adjacent even half-steps fused into
    /// full steps.
    pub fn advance(&self, state: &mut MpsState, steps: usize) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let mut w = self.even_half.apply(state, self.trunc)?;
        for k in 0..steps {
            w += self.odd_full.apply(state, self.trunc)?;
            let closing = if k + 1 == steps { &self.even_half } else { &self.even_full };
            w += closing.apply(state, self.trunc)?;
            state.truncation_log.push(w);
            w = 0.0;
        }
        Ok(())
    }
}

/// Convergence record of one TEBD run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TebdMetadata {
    pub steps: usize,
    pub max_bond: usize,
    pub total_discarded_weight: f64,
    pub max_step_discarded_weight: f64,
    pub max_boundary_occupation: f64,
    pub flags: Vec<String>,
    pub config: Option<TebdConfig>,
}

impl TebdMetadata {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TebdRun {
    pub trajectory: Trajectory,
    pub metadata: TebdMetadata,
}

/// Evolves |ψ(α)⟩ ⊗ vacuum up to `t_final`, sampling the probe every
/// `sample_interval` and at `t_final`.
pub fn evolve_tebd(config: &TebdConfig, chain: &ChainCoefficients, probe: &ProbeConfig, alpha: f64, t_final: f64) -> Result<TebdRun> {
    config.validate()?;
    if chain.len() != config.chain_length {
        return Err(Error::InvalidParameter(format!("chain has {} sites but the configuration expects {}", chain.len(), config.chain_length)));
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("final time must be non-negative, got {t_final}")));
    }
    let total_steps = steps_for(t_final, config.dt)?;
    let every = config.sample_every();
    let prop = TrotterPropagator::new(chain, probe, config)?;
    let mut state = init_mps(alpha, config.chain_length, config.d_max);
    let mut meta = TebdMetadata { config: Some(*config), ..Default::default() };
    let mut trajectory = Trajectory { samples: vec![(0.0, state.reduce_probe()?)], flags: vec![] };
    let n = config.chain_length;
    let mut done = 0;
    while done < total_steps {
        let block = every.min(total_steps - done);
        prop.advance(&mut state, block)?;
        done += block;
        let boundary = state.occupation(n - 1)?.max(state.occupation(n - 2)?);
        meta.max_boundary_occupation = meta.max_boundary_occupation.max(boundary);
        meta.max_bond = meta.max_bond.max(state.max_bond());
        trajectory.samples.push((done as f64 * config.dt, state.reduce_probe()?));
    }
    meta.steps = total_steps;
    meta.max_bond = meta.max_bond.max(state.max_bond());
    meta.total_discarded_weight = state.total_discarded_weight();
    meta.max_step_discarded_weight = state.truncation_log.iter().cloned().fold(0.0, f64::max);
    if meta.max_step_discarded_weight > config.truncation_alarm {
        meta.flags.push(format!(
            "truncation: discarded weight {:.3e} per step exceeds {:.1e}",
            meta.max_step_discarded_weight, config.truncation_alarm
        ));
    }
    if meta.max_boundary_occupation > BOUNDARY_SENTINEL {
        meta.flags.push(format!(
            "boundary: occupation {:.3e} at the chain end exceeds {:.1e}",
            meta.max_boundary_occupation, BOUNDARY_SENTINEL
        ));
    }
    for f in &meta.flags {
        log::warn!("tebd: {f}");
    }
    trajectory.flags = meta.flags.clone();
    Ok(TebdRun { trajectory, metadata: meta })
}

/// QFI series from two TEBD runs at the finite-difference stencil. Both
/// chains are built on the quadrature layout of the nominal bath.
pub fn qfi_series_tebd(
    config: &TebdConfig,
    settings: &ChainSettings,
    probe: &ProbeConfig,
    bath: &Bath,
    alpha: f64,
    qfi: &QfiConfig,
    t_final: f64,
) -> Result<(Vec<(f64, f64)>, BTreeMap<String, TebdMetadata>)> {
    let eta = bath.parameter(qfi.parameter);
    let (lo, hi) = qfi.stencil(eta)?;
    let (bath_lo, bath_hi) = (bath.with_parameter(qfi.parameter, lo)?, bath.with_parameter(qfi.parameter, hi)?);
    let omega_max = settings.omega_max.unwrap_or_else(|| default_omega_max(bath) + bath.spectral.cutoff());
    let layout = QuadratureLayout::new(bath, Some(omega_max), settings.nodes())?;
    let run_lo = evolve_tebd(config, &chain_coefficients_on(&layout, &bath_lo, settings.sites)?, probe, alpha, t_final)?;
    let run_hi = evolve_tebd(config, &chain_coefficients_on(&layout, &bath_hi, settings.sites)?, probe, alpha, t_final)?;
    let series = run_lo
        .trajectory
        .samples
        .iter()
        .zip(&run_hi.trajectory.samples)
        .map(|((t, a), (_, b))| Ok((*t, clamp_qfi(8.0 * sqrt_infidelity(a, b)? / (qfi.delta * qfi.delta))?)))
        .collect::<Result<Vec<_>>>()?;
    let meta = BTreeMap::from([("lower".to_string(), run_lo.metadata), ("upper".to_string(), run_hi.metadata)]);
    Ok((series, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainmap::chain_coefficients;
    use crate::qfi::{ dephasing_oracle, fidelity, initial_state };
    use crate::spectral::{ BathTemperature, OhmicSpectralDensity };
    use crate::tcl::{ evolve_tcl, TclOptions };
    use std::f64::consts::{ FRAC_PI_2, FRAC_PI_4 };

    fn small(n: usize, d: usize, chi: usize, dt: f64) -> TebdConfig {
        TebdConfig { dt, chi, svd_cutoff: 1e-12, d_max: d, chain_length: n, sample_interval: dt, truncation_alarm: 1e-6 }
    }

    fn bath(lambda: f64, beta: f64) -> Bath {
        Bath::new(OhmicSpectralDensity::new(lambda, 1.0, 1.0).unwrap(), BathTemperature::from_beta(beta).unwrap())
    }

    #[test]
    fn initial_probe_state() {
        for alpha in [0.0, 0.4, FRAC_PI_2, 2.5] {
            let r = init_mps(alpha, 4, 3).reduce_probe().unwrap().bloch();
            assert!((r.0 - initial_state(alpha).0).norm() < 1e-14);
        }
    }

    #[test]
    fn maximally_entangled_toy_state() {
        let mut st = init_mps(0.0, 2, 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = Array3::zeros((1, 2, 2));
        a[(0, 0, 0)] = C64::from(s);
        a[(0, 1, 1)] = C64::from(s);
        let mut b = Array3::zeros((2, 2, 1));
        b[(0, 0, 0)] = C64::from(1.0);
        b[(1, 1, 0)] = C64::from(1.0);
        st.tensors[0] = a;
        st.tensors[1] = b;
        st.center = 0;
        let rho = st.reduce_probe().unwrap();
        assert!((rho.matrix() - Mat2::identity() * C64::from(0.5)).norm() < 1e-15);
    }

    #[test]
    fn propagator_is_unitary() {
        let chain = ChainCoefficients { frequencies: vec![0.3, 0.7, 1.1], couplings: vec![0.4, 0.5, 0.2] };
        let hams = bond_hamiltonians(&chain, &ProbeConfig::new(1.0, 0.3).unwrap(), 4).unwrap();
        for h in &hams {
            assert!((h - &dagger(h)).iter().all(|x| x.norm() < 1e-15));
            let u = propagator(h, 0.37).unwrap();
            let eye = Array2::<C64>::eye(u.dim().0);
            assert!((u.dot(&dagger(&u)) - eye).iter().all(|x| x.norm() < 1e-13));
        }
    }

    #[test]
    fn decoupled_probe_precesses_freely() {
        let chain = ChainCoefficients { frequencies: vec![0.5; 4], couplings: vec![0.0, 0.3, 0.3, 0.3] };
        let probe = ProbeConfig::new(1.3, FRAC_PI_4).unwrap();
        let cfg = small(4, 3, 8, 0.02);
        let run = evolve_tebd(&cfg, &chain, &probe, 0.0, 2.0).unwrap();
        assert_eq!(run.trajectory.len(), 101);
        for (t, rho) in &run.trajectory.samples {
            let c = rho.coherence();
            assert!((c.norm() - 0.5).abs() < 1e-10);
            assert!((c - C64::from_polar(0.5, -1.3 * t)).norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn zero_final_time_gives_initial_state() {
        let chain = chain_coefficients(&bath(1.0, 14.3), &ChainSettings::new(5)).unwrap();
        let run = evolve_tebd(&small(5, 4, 8, 0.01), &chain, &ProbeConfig::new(1.0, 0.2).unwrap(), 0.7, 0.0).unwrap();
        assert_eq!(run.trajectory.len(), 1);
        assert!((run.trajectory.samples[0].1.bloch().0 - initial_state(0.7).0).norm() < 1e-14);
    }

    #[test]
    fn fused_and_plain_steps_agree() {
        let chain = chain_coefficients(&bath(0.5, 5.0), &ChainSettings::new(6)).unwrap();
        let probe = ProbeConfig::new(1.0, 0.6).unwrap();
        let cfg = small(6, 4, 16, 0.05);
        let prop = TrotterPropagator::new(&chain, &probe, &cfg).unwrap();
        let mut a = init_mps(0.3, 6, 4);
        let mut b = a.clone();
        prop.advance(&mut a, 10).unwrap();
        for _ in 0..10 {
            prop.trotter_step(&mut b).unwrap();
        }
        let (ra, rb) = (a.reduce_probe().unwrap(), b.reduce_probe().unwrap());
        assert!((ra.matrix() - rb.matrix()).norm() < 1e-10);
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(a.truncation_log.iter().all(|w| *w >= 0.0));
        assert_eq!(a.truncation_log.len(), 10);
    }

    #[test]
    fn bond_cap_is_respected() {
        let chain = chain_coefficients(&bath(1.0, 2.0), &ChainSettings::new(8)).unwrap();
        let cfg = TebdConfig { chi: 4, ..small(8, 4, 4, 0.05) };
        let run = evolve_tebd(&cfg, &chain, &ProbeConfig::new(1.0, 0.0).unwrap(), 0.0, 2.0).unwrap();
        assert!(run.metadata.max_bond <= 4);
        assert!(run.metadata.total_discarded_weight > 0.0);
        for rho in run.trajectory.states() {
            assert!((rho.trace() - 1.0).norm() < 1e-12);
            assert!(rho.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn short_chain_trips_boundary_sentinel() {
        let chain = chain_coefficients(&bath(1.0, 14.3), &ChainSettings::new(3)).unwrap();
        let run = evolve_tebd(&small(3, 4, 8, 0.05), &chain, &ProbeConfig::new(1.0, FRAC_PI_2).unwrap(), 0.0, 3.0).unwrap();
        assert!(run.metadata.flags.iter().any(|f| f.starts_with("boundary")));
    }

    #[test]
    fn pure_dephasing_matches_oracle() {
        let b = Bath::new(OhmicSpectralDensity::new(1.0, 1.0, 1.0).unwrap(), BathTemperature::from_temperature(0.07).unwrap());
        let cfg = TebdConfig { chain_length: 30, chi: 16, d_max: 6, sample_interval: 0.1, ..TebdConfig::desk() };
        let chain = chain_coefficients(&b, &ChainSettings::new(30)).unwrap();
        let probe = ProbeConfig::new(1.0, FRAC_PI_2).unwrap();
        let run = evolve_tebd(&cfg, &chain, &probe, 0.0, 2.0).unwrap();
        let rho0 = DensityMatrix2::from_bloch(&initial_state(0.0)).unwrap();
        for (t, rho) in &run.trajectory.samples {
            let exact = dephasing_oracle(&b, 1.0, &rho0, *t).unwrap();
            assert!((rho.coherence().norm() - exact.coherence().norm()).abs() < 1e-3, "t = {t}");
            assert!((rho.excited_population() - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn weak_coupling_agrees_with_tcl() {
        let b = bath(0.1, 14.3);
        let probe = ProbeConfig::new(1.0, FRAC_PI_4).unwrap();
        let cfg = TebdConfig { chain_length: 20, chi: 16, d_max: 4, dt: 0.005, sample_interval: 0.05, ..TebdConfig::desk() };
        let chain = chain_coefficients(&b, &ChainSettings::new(20)).unwrap();
        let run = evolve_tebd(&cfg, &chain, &probe, 0.3, 0.4).unwrap();
        let rho0 = DensityMatrix2::from_bloch(&initial_state(0.3)).unwrap();
        let tcl = evolve_tcl(&probe, &b, &rho0, &run.trajectory.times(), TclOptions::default()).unwrap();
        for ((t, a), (_, c)) in run.trajectory.samples.iter().zip(&tcl.samples) {
            assert!(fidelity(a, c).unwrap() >= 1.0 - 1e-4, "t = {t}");
        }
    }

    #[test]
    fn trotter_error_is_second_order() {
        let b = bath(0.5, 5.0);
        let chain = chain_coefficients(&b, &ChainSettings::new(6)).unwrap();
        let probe = ProbeConfig::new(1.0, 0.5).unwrap();
        let rho_at = |dt: f64| {
            let cfg = TebdConfig { sample_interval: 1.0, ..small(6, 5, 64, dt) };
            *evolve_tebd(&cfg, &chain, &probe, 0.2, 1.0).unwrap().trajectory.samples.last().unwrap().1.matrix()
        };
        let (r1, r2, r3) = (rho_at(0.1), rho_at(0.05), rho_at(0.025));
        let ratio = (r1 - r2).norm() / (r2 - r3).norm();
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn config_validation() {
        assert!(TebdConfig::desk().validate().is_ok());
        assert_eq!(TebdConfig::preset("full").unwrap().chain_length, 150);
        assert!(TebdConfig { chi: 1, ..TebdConfig::desk() }.validate().is_err());
        assert!(TebdConfig { sample_interval: 0.015, ..TebdConfig::desk() }.validate().is_err());
        let chain = ChainCoefficients { frequencies: vec![1.0; 3], couplings: vec![0.1; 3] };
        assert!(evolve_tebd(&TebdConfig::desk(), &chain, &ProbeConfig::new(1.0, 0.0).unwrap(), 0.0, 1.0).is_err());
    }
}
