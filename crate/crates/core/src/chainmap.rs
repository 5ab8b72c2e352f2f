//! Chain mapping of the thermalized environment: the measure J_β(ω)dω on the
//! whole real line is discretized, and the recurrence coefficients of its
//! orthogonal polynomials give the frequencies and couplings of a
//! nearest-neighbour oscillator chain coupled to the probe at one end.

use std::fs;
use std::io::Write;
use std::path::{ Path, PathBuf };

use serde::{ Deserialize, Serialize };
use sha2::{ Digest, Sha256 };

use crate::error::{ Error, Result };
use crate::quad::GaussLegendre;
use crate::spectral::Bath;
use crate::tcl::ProbeConfig;

/// Tail level, relative to the peak of J_β, that the support must reach.
pub const TAIL_THRESHOLD: f64 = 1e-12;
const PANEL_NODES: usize = 64;
const GRADING_RATIO: f64 = 4.0;
const GRADING_FLOOR: f64 = 0.05;
/// Minimum number of quadrature nodes per chain site.
pub const MIN_NODES_PER_SITE: usize = 10;
pub const DEFAULT_NODES_PER_SITE: usize = 20;

/// Nodes and non-negative weights of a discrete measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub omega_max: f64,
}

impl DiscretizedMeasure {
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter("nodes and weights must be non-empty and of equal length".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative measure weight {w}")));
        }
        let omega_max = nodes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(Self { nodes, weights, omega_max })
    }

    pub fn mass(&self) -> f64 { self.weights.iter().sum() }

    pub fn len(&self) -> usize { self.nodes.len() }

    pub fn is_empty(&self) -> bool { self.nodes.is_empty() }
}

/// Peak of J_β located on a fine grid; J_β is unimodal for the Ohmic family.
fn thermalized_peak(bath: &Bath) -> f64 {
    let wc = bath.spectral.cutoff();
    let hi = wc * (bath.spectral.ohmicity() + 4.0);
    let lo = -hi.min(20.0 / bath.beta());
    // J_β diverges at ω = 0 for s < 1, so only finite grid values count.
    (0..=4000).map(|i| bath.j_beta(lo + (hi - lo) * i as f64 / 4000.0)).filter(|v| v.is_finite()).fold(0.0, f64::max)
}

/// Smallest ω_max (on a 0.25 ω_c grid) where J_β(±ω_max) < 10⁻¹² of the peak.
pub fn default_omega_max(bath: &Bath) -> f64 {
    let level = TAIL_THRESHOLD * thermalized_peak(bath);
    let step = 0.25 * bath.spectral.cutoff();
    let mut w = step;
    while bath.j_beta(w) >= level || bath.j_beta(-w) >= level {
        w += step;
    }
    w
}

/// Quadrature nodes and plain weights on [-ω_max, ω_max]; multiplying the
/// weights by J_β gives the discretized measure. Sharing one layout between
/// neighbouring parameter values keeps the discretization smooth in them.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureLayout {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub omega_max: f64,
}

impl QuadratureLayout {
    /// Composite Gauss–Legendre panels split at ω = 0. About `node_count`
    /// nodes sit on uniform panels; panels graded towards ω = 0 add a few
    /// hundred more. `omega_max = None` selects the default support.
    pub fn new(bath: &Bath, omega_max: Option<f64>, node_count: usize) -> Result<Self> {
        let omega_max = match omega_max {
            Some(w) => {
                check_support(bath, w)?;
                w
            }
            None => default_omega_max(bath),
        };
        let panels = (node_count as f64 / (2 * PANEL_NODES) as f64).round().max(1.0) as usize;
        let rule = GaussLegendre::new(PANEL_NODES);
        let width = omega_max / panels as f64;
        let mut nodes = Vec::with_capacity(2 * (panels + 8) * PANEL_NODES);
        let mut weights = Vec::with_capacity(nodes.capacity());
        // Distances from ω = 0 of the panel edges on either side: geometric
        // grading down to the thermal scale, then uniform panels.
        let inner = GRADING_FLOOR * (1.0 / bath.beta()).min(1.0).min(width);
        let mut edges = vec![inner];
        while edges[edges.len() - 1] * GRADING_RATIO < width {
            let next = edges[edges.len() - 1] * GRADING_RATIO;
            edges.push(next);
        }
        edges.pop();
        edges.extend((1..=panels).map(|k| k as f64 * width));
        let s = bath.spectral.ohmicity();
        // ω = e·u^p on [0, e] smooths the ω^{s-1} endpoint behaviour.
        let power = if s.fract() == 0.0 { 1.0 } else { (8.0 / s).ceil() };
        for sign in [-1.0, 1.0] {
            for (x, w) in rule.mapped(0.0, 1.0) {
                nodes.push(sign * inner * x.powf(power));
                weights.push(w * inner * power * x.powf(power - 1.0));
            }
            for pair in edges.windows(2) {
                for (x, w) in rule.mapped(pair[0], pair[1]) {
                    nodes.push(sign * x);
                    weights.push(w);
                }
            }
        }
        Ok(Self { nodes, weights, omega_max })
    }

    pub fn discretize(&self, bath: &Bath) -> Result<DiscretizedMeasure> {
        check_support(bath, self.omega_max)?;
        let weights = self.nodes.iter().zip(&self.weights).map(|(x, w)| w * bath.j_beta(*x)).collect();
        Ok(DiscretizedMeasure { nodes: self.nodes.clone(), weights, omega_max: self.omega_max })
    }
}

fn check_support(bath: &Bath, omega_max: f64) -> Result<()> {
    let peak = thermalized_peak(bath);
    let tail = bath.j_beta(omega_max).max(bath.j_beta(-omega_max));
    if !(omega_max > 0.0) || tail >= TAIL_THRESHOLD * peak {
        return Err(Error::InsufficientSupport { omega_max, tail: tail / peak, threshold: TAIL_THRESHOLD });
    }
    Ok(())
}

/// Discretization of J_β(ω)dω on its own default layout.
pub fn thermalized_measure(bath: &Bath, omega_max: Option<f64>, node_count: usize) -> Result<DiscretizedMeasure> {
    QuadratureLayout::new(bath, omega_max, node_count)?.discretize(bath)
}

/// Recurrence coefficients (a_n, b_n), n < count, of the monic orthogonal
/// polynomials of the measure, with b_0 the total mass.
///
/// Lanczos iteration on diag(nodes) with full reorthogonalization.
pub fn recurrence_coefficients(measure: &DiscretizedMeasure, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = measure.len();
    if count == 0 || count > m {
        return Err(Error::InvalidParameter(format!("need 1 <= N <= {m} recurrence coefficients, got {count}")));
    }
    let mass = measure.mass();
    if !(mass > 0.0) {
        return Err(Error::RecurrenceBreakdown { index: 0, value: mass });
    }
    let x = &measure.nodes;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut q: Vec<f64> = measure.weights.iter().map(|w| (w / mass).sqrt()).collect();
    let mut a = Vec::with_capacity(count);
    let mut b = vec![mass];
    for n in 0..count {
        let mut r: Vec<f64> = q.iter().zip(x).map(|(qi, xi)| qi * xi).collect();
        let an: f64 = r.iter().zip(&q).map(|(ri, qi)| ri * qi).sum();
        a.push(an);
        basis.push(q);
        if n + 1 == count {
            break;
        }
        // Two passes of classical Gram–Schmidt against every previous vector.
        for _ in 0..2 {
            for v in &basis {
                let c: f64 = r.iter().zip(v).map(|(ri, vi)| ri * vi).sum();
                r.iter_mut().zip(v).for_each(|(ri, vi)| *ri -= c * vi);
            }
        }
        let norm2: f64 = r.iter().map(|ri| ri * ri).sum();
        let scale = x.iter().fold(0.0f64, |acc, xi| acc.max(xi.abs())).max(1.0);
        if !(norm2 > 1e-28 * scale * scale) {
            return Err(Error::RecurrenceBreakdown { index: n + 1, value: norm2 });
        }
        b.push(norm2);
        let norm = norm2.sqrt();
        q = r.into_iter().map(|ri| ri / norm).collect();
    }
    Ok((a, b))
}

/// Chain parameters: on-site frequencies ω_n and couplings κ_n (κ_0 couples
/// the probe to site 0, κ_n for n ≥ 1 couples sites n-1 and n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCoefficients {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl ChainCoefficients {
    pub fn len(&self) -> usize { self.frequencies.len() }

    pub fn is_empty(&self) -> bool { self.frequencies.is_empty() }

    pub fn from_recurrence(a: &[f64], b: &[f64]) -> Self {
        Self { frequencies: a.to_vec(), couplings: b.iter().map(|x| x.sqrt()).collect() }
    }

    pub const CSV_HEADER: &'static str = "n,omega_n,kappa_n";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (n, (om, ka)) in self.frequencies.iter().zip(&self.couplings).enumerate() {
            writeln!(w, "{n},{om:.16e},{ka:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut out = Self { frequencies: vec![], couplings: vec![] };
        for (i, line) in text.lines().filter(|l| !l.starts_with('#')).enumerate() {
            if i == 0 {
                if line.trim() != Self::CSV_HEADER {
                    return Err(Error::InvalidParameter(format!("unexpected chain CSV header '{line}'")));
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("bad chain CSV value '{s}': {e}")));
            if cols.len() != 3 {
                return Err(Error::InvalidParameter(format!("bad chain CSV row '{line}'")));
            }
            out.frequencies.push(parse(cols[1])?);
            out.couplings.push(parse(cols[2])?);
        }
        Ok(out)
    }
}

/// Settings of the chain construction.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub sites: usize,
    /// `None` selects the default support.
    pub omega_max: Option<f64>,
    /// `None` selects 20 nodes per site.
    pub node_count: Option<usize>,
}

impl ChainSettings {
    pub fn new(sites: usize) -> Self { Self { sites, omega_max: None, node_count: None } }

    pub fn nodes(&self) -> usize { self.node_count.unwrap_or(DEFAULT_NODES_PER_SITE * self.sites) }
}

/// Chain coefficients for a bath.
pub fn chain_coefficients(bath: &Bath, settings: &ChainSettings) -> Result<ChainCoefficients> {
    check_node_count(settings)?;
    let layout = QuadratureLayout::new(bath, settings.omega_max, settings.nodes())?;
    chain_coefficients_on(&layout, bath, settings.sites)
}

/// Chain coefficients for a bath on a given quadrature layout.
pub fn chain_coefficients_on(layout: &QuadratureLayout, bath: &Bath, sites: usize) -> Result<ChainCoefficients> {
    let (a, b) = recurrence_coefficients(&layout.discretize(bath)?, sites)?;
    Ok(ChainCoefficients::from_recurrence(&a, &b))
}

fn check_node_count(settings: &ChainSettings) -> Result<()> {
    let nodes = settings.nodes();
    if nodes < MIN_NODES_PER_SITE * settings.sites {
        return Err(Error::InvalidParameter(format!(
            "{nodes} quadrature nodes are too few for {} sites (need at least {} per site)",
            settings.sites, MIN_NODES_PER_SITE
        )));
    }
    Ok(())
}

/// One term of the nearest-neighbour probe + chain Hamiltonian.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HamiltonianTerm {
    /// ω_S σ_z / 2
    System { omega_s: f64 },
    /// κ_0 A(θ) (c_0 + c_0†)
    SystemChain { kappa: f64, theta: f64 },
    /// ω_n c_n† c_n
    OnSite { site: usize, omega: f64 },
    /// κ (c_{site} c_{site+1}† + c_{site}† c_{site+1})
    Hopping { site: usize, kappa: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainHamiltonian {
    pub terms: Vec<HamiltonianTerm>,
}

impl ChainHamiltonian {
    pub fn chain_length(&self) -> usize {
        self.terms.iter().filter(|t| matches!(t, HamiltonianTerm::OnSite { .. })).count()
    }
}

pub fn chain_hamiltonian(coeffs: &ChainCoefficients, probe: &ProbeConfig) -> ChainHamiltonian {
    let mut terms = vec![
        HamiltonianTerm::System { omega_s: probe.omega_s },
        HamiltonianTerm::SystemChain { kappa: coeffs.couplings[0], theta: probe.theta },
    ];
    terms.extend(coeffs.frequencies.iter().enumerate().map(|(site, &omega)| HamiltonianTerm::OnSite { site, omega }));
    terms.extend(coeffs.couplings.iter().skip(1).enumerate().map(|(site, &kappa)| HamiltonianTerm::Hopping { site, kappa }));
    ChainHamiltonian { terms }
}

/// On-disk cache of chain coefficients keyed by a hash of every input.
#[derive(Clone, Debug)]
pub struct ChainCache {
    dir: PathBuf,
}

impl ChainCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self { Self { dir: dir.into() } }

    pub fn dir(&self) -> &Path { &self.dir }

    /// Hex SHA-256 of (λ, s, ω_c, β, ω_max, node count, N) with exact float bits.
    pub fn key(bath: &Bath, settings: &ChainSettings) -> String {
        let sd = bath.spectral;
        let omega_max = settings.omega_max.unwrap_or_else(|| default_omega_max(bath));
        let canonical = format!(
            "lambda={:016x};s={:016x};omega_c={:016x};beta={:016x};omega_max={:016x};nodes={};sites={}",
            sd.coupling().to_bits(),
            sd.ohmicity().to_bits(),
            sd.cutoff().to_bits(),
            bath.beta().to_bits(),
            omega_max.to_bits(),
            settings.nodes(),
            settings.sites
        );
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn path(&self, bath: &Bath, settings: &ChainSettings) -> PathBuf {
        self.dir.join(format!("chain-{}.csv", Self::key(bath, settings)))
    }

    /// Returns the coefficients and whether they came from the cache.
    pub fn load_or_compute(&self, bath: &Bath, settings: &ChainSettings) -> Result<(ChainCoefficients, bool)> {
        let path = self.path(bath, settings);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(c) = ChainCoefficients::read_csv(&text) {
                if c.len() == settings.sites {
                    return Ok((c, true));
                }
            }
            log::warn!("ignoring unreadable chain cache entry {}", path.display());
        }
        let coeffs = chain_coefficients(bath, settings)?;
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("csv.tmp");
        coeffs.write_csv(fs::File::create(&tmp)?)?;
        fs::rename(&tmp, &path)?;
        Ok((coeffs, false))
    }
}
