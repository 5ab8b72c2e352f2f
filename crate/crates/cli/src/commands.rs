use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{ bail, Context, Result };

use qprobe::chainmap::{ recurrence_coefficients, ChainCache, ChainCoefficients, DiscretizedMeasure };
use qprobe::qfi::{ initial_state, qfi_map_dyson, qfi_series_dyson, qfi_series_tcl, ratio_r, MapCell, QfiSample, QfiSeries };
use qprobe::quad::GaussLegendre;
use qprobe::qubit::DensityMatrix2;
use qprobe::spectral::{ Bath, BathTemperature, OhmicSpectralDensity };
use qprobe::tcl::{ evolve_tcl, ProbeConfig };
use qprobe::tebd::{ evolve_tebd, qfi_series_tebd, TebdMetadata };

use crate::config::{ BackendSection, RunConfig };
use crate::manifest::ResultManifest;
use crate::pool;

pub const CACHE_ENV: &str = "QPROBE_CACHE_DIR";

/// `QPROBE_CACHE_DIR`, else `$XDG_CACHE_HOME/qprobe`, else `~/.cache/qprobe`.
pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return dir.into();
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("qprobe");
    }
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache").join("qprobe")).unwrap_or_else(|| PathBuf::from(".qprobe-cache"))
}

fn num(x: f64) -> String { format!("{x:.16e}") }

/// One probe setting of a sweep.
#[derive(Copy, Clone, Debug)]
struct Point {
    index: usize,
    omega_s: f64,
    theta: f64,
    alpha: f64,
}

impl Point {
    fn probe(&self) -> Result<ProbeConfig> { Ok(ProbeConfig::new(self.omega_s, self.theta)?) }

    fn file(&self, dir: &str, ext: &str) -> String { format!("{dir}/point-{:04}.{ext}", self.index) }

    fn metadata(&self, config: &RunConfig) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("omega_s".into(), num(self.omega_s)),
            ("theta".into(), num(self.theta)),
            ("alpha".into(), num(self.alpha)),
            ("backend".into(), config.backend.label()),
        ])
    }
}

fn points(config: &RunConfig) -> Vec<Point> {
    let mut out = Vec::new();
    for &omega_s in &config.probe.omega_s {
        for &theta in &config.probe.theta {
            for &alpha in &config.probe.alpha {
                out.push(Point { index: out.len(), omega_s, theta, alpha });
            }
        }
    }
    out
}

fn output_dir(config: &RunConfig, command: &str) -> PathBuf { config.output.join(command) }

fn finish(mut manifest: ResultManifest, config: &RunConfig, start: Instant) -> Result<ResultManifest> {
    manifest.timings.insert("total".into(), start.elapsed().as_secs_f64());
    let dir = output_dir(config, &manifest.command);
    let path = manifest.save(&dir)?;
    log::info!("wrote {}", path.display());
    Ok(manifest)
}

/// C(t) on the time grid, closed form next to quadrature, with ζ(n) in the header.
pub fn correlation(config: &RunConfig) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let mut manifest = ResultManifest::new("correlation", config)?;
    let mut csv = String::new();
    for (n, z) in bath.moments(4)?.iter().enumerate() {
        writeln!(csv, "# zeta{n} = {}", num(*z))?;
    }
    writeln!(csv, "t,re_C,im_C,re_C_quadrature,im_C_quadrature")?;
    for t in config.time.grid()? {
        let (c, q) = (bath.ttcf(t)?, bath.ttcf_quadrature(t)?);
        writeln!(csv, "{},{},{},{},{}", num(t), num(c.re), num(c.im), num(q.re), num(q.im))?;
    }
    manifest.write_file(&output_dir(config, "correlation"), "correlation.csv", csv.as_bytes())?;
    finish(manifest, config, start)
}

fn map_row_tcl(config: &RunConfig, bath: &Bath, omega_s: f64, theta: f64, t: f64, reference: f64) -> Result<Vec<MapCell>> {
    let qfi = config.qfi.config()?;
    let probe = ProbeConfig::new(omega_s, theta)?;
    config
        .probe
        .alpha
        .iter()
        .map(|&alpha| {
            let q = qfi_series_tcl(&probe, bath, alpha, &qfi, config.backend.tcl_options(), &[t])?[0];
            Ok(MapCell { theta, alpha, qfi: q, ratio: ratio_r(q, reference)? })
        })
        .collect()
}

/// Q and R_t over the (θ, α) grid at the last time of the grid, one file per ω_S.
pub fn qfi_map(config: &RunConfig) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let tag = config.qfi.tag()?;
    let t = config.time.last()?;
    let mut manifest = ResultManifest::new("qfi-map", config)?;
    let dir = output_dir(config, "qfi-map");
    let mut references = Vec::new();
    for (k, &omega_s) in config.probe.omega_s.iter().enumerate() {
        let dephasing = ProbeConfig::new(omega_s, FRAC_PI_2)?;
        let reference = match config.backend {
            BackendSection::Dyson { order } => qfi_series_dyson(&dephasing, &bath, 0.0, order, tag, &[t]),
            BackendSection::Tcl { .. } => qfi_series_tcl(&dephasing, &bath, 0.0, &config.qfi.config()?, config.backend.tcl_options(), &[t]),
            BackendSection::Tebd => bail!("qfi-map supports the dyson and tcl backends"),
        }
        .with_context(|| format!("reference QFI (theta = pi/2, alpha = 0) at omega_s = {omega_s}"))?[0];
        manifest.notes.insert(format!("reference_qfi[{k}]"), num(reference));
        references.push(reference);
    }
    let jobs: Vec<(f64, f64, f64)> = config
        .probe
        .omega_s
        .iter()
        .zip(&references)
        .flat_map(|(&w, &r)| config.probe.theta.iter().map(move |&th| (w, th, r)))
        .collect();
    let rows = pool::run(&jobs, pool::worker_count(), |&(omega_s, theta, reference)| -> Result<Vec<MapCell>> {
        match config.backend {
            BackendSection::Dyson { order } => Ok(qfi_map_dyson(omega_s, &bath, order, tag, t, &[theta], &config.probe.alpha)?),
            _ => map_row_tcl(config, &bath, omega_s, theta, t, reference),
        }
    });
    let mut rows = rows.into_iter();
    for (k, &omega_s) in config.probe.omega_s.iter().enumerate() {
        let mut csv = String::new();
        writeln!(csv, "# omega_s = {}", num(omega_s))?;
        writeln!(csv, "# t = {}", num(t))?;
        writeln!(csv, "# parameter = {}", tag.name())?;
        writeln!(csv, "# backend = {}", config.backend.label())?;
        writeln!(csv, "# reference = theta pi/2, alpha 0")?;
        writeln!(csv, "# loci = alpha - theta = +-pi/2 (mod pi)")?;
        writeln!(csv, "theta,alpha,Q,R")?;
        for _ in &config.probe.theta {
            for cell in rows.next().expect("one row per job")? {
                writeln!(csv, "{},{},{},{}", num(cell.theta), num(cell.alpha), num(cell.qfi), num(cell.ratio))?;
            }
        }
        manifest.write_file(&dir, &format!("qfi-map-{k:02}.csv"), csv.as_bytes())?;
    }
    finish(manifest, config, start)
}

struct SeriesResult {
    series: QfiSeries,
    flags: Vec<String>,
    seconds: f64,
}

fn series_point(config: &RunConfig, bath: &Bath, point: &Point) -> Result<SeriesResult> {
    let start = Instant::now();
    let probe = point.probe()?;
    let qfi = config.qfi.config()?;
    let mut metadata = point.metadata(config);
    metadata.insert("parameter".into(), qfi.parameter.name().into());
    let mut flags = Vec::new();
    let samples: Vec<(f64, f64)> = match config.backend {
        BackendSection::Dyson { order } => {
            let times = config.time.grid()?;
            let q = qfi_series_dyson(&probe, bath, point.alpha, order, qfi.parameter, &times)?;
            times.into_iter().zip(q).collect()
        }
        BackendSection::Tcl { .. } => {
            metadata.insert("delta".into(), num(qfi.delta));
            let times = config.time.grid()?;
            let q = qfi_series_tcl(&probe, bath, point.alpha, &qfi, config.backend.tcl_options(), &times)?;
            times.into_iter().zip(q).collect()
        }
        BackendSection::Tebd => {
            metadata.insert("delta".into(), num(qfi.delta));
            let tebd = config.tebd.config()?;
            let settings = config.chain_settings()?;
            let (series, meta) = qfi_series_tebd(&tebd, &settings, &probe, bath, point.alpha, &qfi, config.time.last()?)?;
            for (side, m) in &meta {
                flags.extend(m.flags.iter().map(|f| format!("point {} ({side}): {f}", point.index)));
                metadata.insert(format!("max_bond_{side}"), m.max_bond.to_string());
                metadata.insert(format!("discarded_weight_{side}"), num(m.total_discarded_weight));
            }
            series
        }
    };
    let series = QfiSeries { samples: samples.into_iter().map(|(t, qfi)| QfiSample { t, qfi }).collect(), metadata };
    Ok(SeriesResult { series, flags, seconds: start.elapsed().as_secs_f64() })
}

/// Q(η, t) and q = Q/t per (ω_S, θ, α), plus a combined long table.
pub fn qfi_series(config: &RunConfig) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let mut manifest = ResultManifest::new("qfi-series", config)?;
    let dir = output_dir(config, "qfi-series");
    let jobs = points(config);
    let results = pool::run(&jobs, pool::worker_count(), |p| series_point(config, &bath, p));
    let mut long = String::from("omega_s,theta,alpha,t,Q,q\n");
    for (p, r) in jobs.iter().zip(results) {
        let r = r.with_context(|| format!("point {} (omega_s = {}, theta = {}, alpha = {})", p.index, p.omega_s, p.theta, p.alpha))?;
        let mut csv = Vec::new();
        r.series.write_csv(&mut csv)?;
        manifest.write_file(&dir, &p.file("points", "csv"), &csv)?;
        for s in &r.series.samples {
            let q = s.rate().map(num).unwrap_or_default();
            writeln!(long, "{},{},{},{},{},{q}", num(p.omega_s), num(p.theta), num(p.alpha), num(s.t), num(s.qfi))?;
        }
        manifest.flags.extend(r.flags);
        manifest.timings.insert(format!("point-{:04}", p.index), r.seconds);
    }
    manifest.write_file(&dir, "qfi-series.csv", long.as_bytes())?;
    finish(manifest, config, start)
}

/// Chain coefficients through the cache, with κ₀² and ζ(0) in the header.
pub fn chain(config: &RunConfig, legendre_check: bool) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let settings = config.chain_settings()?;
    let mut manifest = ResultManifest::new("chain", config)?;
    let cache = ChainCache::new(cache_dir());
    let (coeffs, hit) = cache.load_or_compute(&bath, &settings)?;
    manifest.notes.insert("cache".into(), if hit { "hit" } else { "miss" }.into());
    manifest.notes.insert("cache_file".into(), cache.path(&bath, &settings).display().to_string());
    let kappa0 = coeffs.couplings.first().copied().unwrap_or(0.0);
    let mut csv = format!("# kappa0^2 = {}\n# zeta0 = {}\n", num(kappa0 * kappa0), num(bath.moment(0)?)).into_bytes();
    coeffs.write_csv(&mut csv)?;
    manifest.write_file(&output_dir(config, "chain"), "chain.csv", &csv)?;
    if legendre_check {
        let residual = legendre_residual()?;
        let pass = residual <= 1e-10;
        manifest.notes.insert("legendre_check".into(), format!("{} (residual {residual:.3e})", if pass { "pass" } else { "fail" }));
        println!("legendre check: {} (max residual {residual:.3e})", if pass { "PASS" } else { "FAIL" });
        if !pass {
            manifest.flags.push(format!("legendre check failed with residual {residual:.3e}"));
        }
    }
    finish(manifest, config, start)
}

/// Largest deviation of the recurrence of the Gauss–Legendre measure from
/// a_n = 0, b_n = n²/(4n² - 1).
pub fn legendre_residual() -> Result<f64> {
    let (x, w): (Vec<f64>, Vec<f64>) = GaussLegendre::new(400).mapped(-1.0, 1.0).unzip();
    let (a, b) = recurrence_coefficients(&DiscretizedMeasure::from_nodes(x, w)?, 40)?;
    let mut worst = (b[0] - 2.0).abs();
    for n in 1..b.len() {
        let nf = n as f64;
        worst = worst.max((b[n] - nf * nf / (4.0 * nf * nf - 1.0)).abs());
    }
    Ok(a.iter().fold(worst, |m, v| m.max(v.abs())))
}

/// TCL2 trajectories per (ω_S, θ, α).
pub fn tcl_evolve(config: &RunConfig) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let times = config.time.grid()?;
    let options = config.backend.tcl_options();
    let mut manifest = ResultManifest::new("tcl-evolve", config)?;
    let dir = output_dir(config, "tcl-evolve");
    let jobs = points(config);
    let results = pool::run(&jobs, pool::worker_count(), |p| -> Result<_> {
        let rho0 = DensityMatrix2::from_bloch(&initial_state(p.alpha))?;
        Ok(evolve_tcl(&p.probe()?, &bath, &rho0, &times, options)?)
    });
    let mut index = String::from("point,omega_s,theta,alpha\n");
    for (p, r) in jobs.iter().zip(results) {
        let traj = r.with_context(|| format!("point {}", p.index))?;
        let mut csv = Vec::new();
        traj.write_csv(&mut csv)?;
        manifest.write_file(&dir, &p.file("points", "csv"), &csv)?;
        manifest.flags.extend(traj.flags.iter().map(|f| format!("point {}: {f}", p.index)));
        writeln!(index, "{},{},{},{}", p.index, num(p.omega_s), num(p.theta), num(p.alpha))?;
    }
    manifest.write_file(&dir, "points.csv", index.as_bytes())?;
    finish(manifest, config, start)
}

/// TEBD trajectories per (ω_S, θ, α), each with a JSON convergence sidecar.
pub fn tebd_evolve(config: &RunConfig) -> Result<ResultManifest> {
    let start = Instant::now();
    let bath = config.bath()?;
    let tebd = config.tebd.config()?;
    let settings = config.chain_settings()?;
    if settings.sites != tebd.chain_length {
        bail!("chain.sites = {} differs from tebd.chain_length = {}", settings.sites, tebd.chain_length);
    }
    let t_final = config.time.last()?;
    let mut manifest = ResultManifest::new("tebd-evolve", config)?;
    let dir = output_dir(config, "tebd-evolve");
    let (chain, hit): (ChainCoefficients, bool) = ChainCache::new(cache_dir()).load_or_compute(&bath, &settings)?;
    manifest.notes.insert("chain_cache".into(), if hit { "hit" } else { "miss" }.into());
    let jobs = points(config);
    let results = pool::run(&jobs, pool::worker_count(), |p| -> Result<_> {
        let t0 = Instant::now();
        let run = evolve_tebd(&tebd, &chain, &p.probe()?, p.alpha, t_final)?;
        Ok((run, t0.elapsed().as_secs_f64()))
    });
    let mut index = String::from("point,omega_s,theta,alpha\n");
    for (p, r) in jobs.iter().zip(results) {
        let (run, seconds) = r.with_context(|| format!("point {}", p.index))?;
        let mut csv = Vec::new();
        run.trajectory.write_csv(&mut csv)?;
        manifest.write_file(&dir, &p.file("points", "csv"), &csv)?;
        let meta: &TebdMetadata = &run.metadata;
        let mut json = Vec::new();
        meta.write_json(&mut json)?;
        manifest.write_file(&dir, &p.file("points", "json"), &json)?;
        manifest.flags.extend(meta.flags.iter().map(|f| format!("point {}: {f}", p.index)));
        manifest.timings.insert(format!("point-{:04}", p.index), seconds);
        writeln!(index, "{},{},{},{}", p.index, num(p.omega_s), num(p.theta), num(p.alpha))?;
    }
    manifest.write_file(&dir, "points.csv", index.as_bytes())?;
    finish(manifest, config, start)
}

/// Quick oracle checks; returns (name, pass, detail) per check.
pub fn self_test() -> Result<Vec<(String, bool, String)>> {
    let mut out = Vec::new();
    let bath = |beta: f64| -> Result<Bath> { Ok(Bath::new(OhmicSpectralDensity::new(1.0, 1.0, 1.0)?, BathTemperature::from_beta(beta)?)) };

    let residual = legendre_residual()?;
    out.push(("legendre recurrence".into(), residual <= 1e-10, format!("max residual {residual:.3e}")));

    let z1 = bath(14.3)?.moment(1)?;
    out.push(("zeta(1) = -2 for s = 1".into(), (z1 + 2.0).abs() <= 1e-12, format!("zeta(1) = {z1:.15}")));

    let b = bath(5.0)?;
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.3, 1.0, 3.0] {
        worst = worst.max((b.ttcf(t)? - b.ttcf_quadrature(t)?).norm());
    }
    out.push(("C(t) closed form vs quadrature".into(), worst <= 1e-8, format!("max deviation {worst:.3e}")));

    let b = bath(14.3)?;
    let mut balance: f64 = 0.0;
    for om in [0.1, 0.5, 1.0, 2.0] {
        balance = balance.max((b.j_beta(-om) - (-14.3 * om).exp() * b.j_beta(om)).abs() / b.j_beta(-om));
    }
    out.push(("detailed balance".into(), balance <= 1e-12, format!("max relative deviation {balance:.3e}")));

    let tag = qprobe::spectral::EnvParameter::InverseTemperature;
    let weak = Bath::new(OhmicSpectralDensity::new(0.01, 1.0, 1.0)?, BathTemperature::from_temperature(0.07)?);
    let q = qfi_series_dyson(&ProbeConfig::new(0.1, 0.3)?, &weak, 1.2, 2, tag, &[0.05])?[0];
    let closed = qprobe::qfi::qfi_short_closed_form(tag, &weak, 0.05, 0.3, 1.2)?;
    let rel = (q - closed).abs() / closed;
    out.push(("short-time QFI closed form".into(), rel <= 1e-4, format!("relative deviation {rel:.3e}")));
    Ok(out)
}
