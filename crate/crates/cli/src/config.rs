use std::path::{ Path, PathBuf };

use anyhow::{ anyhow, bail, Context, Result };
use serde::{ Deserialize, Serialize };
use sha2::{ Digest, Sha256 };

use qprobe::chainmap::ChainSettings;
use qprobe::qfi::{ DifferenceScheme, QfiConfig };
use qprobe::spectral::{ Bath, BathTemperature, EnvParameter, OhmicSpectralDensity };
use qprobe::tcl::TclOptions;
use qprobe::tebd::TebdConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "one")]
    pub ohmicity: f64,
    #[serde(default = "one")]
    pub cutoff: f64,
    /// Exactly one of `temperature` and `beta`.
    pub temperature: Option<f64>,
    pub beta: Option<f64>,
}

fn one() -> f64 { 1.0 }

impl BathSection {
    pub fn bath(&self) -> Result<Bath> {
        let temperature = match (self.temperature, self.beta) {
            (Some(t), None) => BathTemperature::from_temperature(t)?,
            (None, Some(b)) => BathTemperature::from_beta(b)?,
            (Some(_), Some(_)) => bail!("bath: give either temperature or beta, not both"),
            (None, None) => bail!("bath: temperature or beta is required"),
        };
        Ok(Bath::new(OhmicSpectralDensity::new(self.coupling, self.ohmicity, self.cutoff)?, temperature))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub omega_s: Vec<f64>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Either an explicit list or `count` points on [start, stop].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub start: f64,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub values: Option<Vec<f64>>,
}

impl TimeSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match (&self.values, self.stop, self.count) {
            (Some(v), None, None) => Ok(v.clone()),
            (None, Some(stop), Some(count)) if count >= 2 => {
                Ok((0..count).map(|i| self.start + (stop - self.start) * i as f64 / (count - 1) as f64).collect())
            }
            (None, Some(stop), Some(1)) => Ok(vec![stop]),
            _ => bail!("time: give either values, or stop and count (>= 1)"),
        }
    }

    pub fn last(&self) -> Result<f64> { self.grid()?.last().copied().ok_or_else(|| anyhow!("time: empty grid")) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfiSection {
    pub parameter: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_scheme")]
    pub scheme: DifferenceScheme,
}

fn default_delta() -> f64 { 1e-4 }

fn default_scheme() -> DifferenceScheme { DifferenceScheme::Central }

impl QfiSection {
    pub fn tag(&self) -> Result<EnvParameter> { Ok(self.parameter.parse()?) }

    pub fn config(&self) -> Result<QfiConfig> { Ok(QfiConfig { delta: self.delta, scheme: self.scheme, parameter: self.tag()? }) }
}

impl Default for QfiSection {
    fn default() -> Self { Self { parameter: "beta".into(), delta: default_delta(), scheme: default_scheme() } }
}

/// TEBD settings: a preset with optional field overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebdSection {
    pub preset: Option<String>,
    pub dt: Option<f64>,
    pub chi: Option<usize>,
    pub svd_cutoff: Option<f64>,
    pub d_max: Option<usize>,
    pub chain_length: Option<usize>,
    pub sample_interval: Option<f64>,
    pub truncation_alarm: Option<f64>,
}

impl TebdSection {
    pub fn config(&self) -> Result<TebdConfig> {
        let mut c = TebdConfig::preset(self.preset.as_deref().unwrap_or("desk"))?;
        c.dt = self.dt.unwrap_or(c.dt);
        c.chi = self.chi.unwrap_or(c.chi);
        c.svd_cutoff = self.svd_cutoff.unwrap_or(c.svd_cutoff);
        c.d_max = self.d_max.unwrap_or(c.d_max);
        c.chain_length = self.chain_length.unwrap_or(c.chain_length);
        c.sample_interval = self.sample_interval.unwrap_or(c.sample_interval);
        c.truncation_alarm = self.truncation_alarm.unwrap_or(c.truncation_alarm);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// Defaults to the TEBD chain length.
    pub sites: Option<usize>,
    pub omega_max: Option<f64>,
    pub node_count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSection {
    Tcl {
        #[serde(default = "default_rtol")]
        rtol: f64,
        #[serde(default = "default_atol")]
        atol: f64,
        fixed_step: Option<f64>,
    },
    Dyson {
        #[serde(default = "default_order")]
        order: usize,
    },
    Tebd,
}

fn default_rtol() -> f64 { 1e-9 }

fn default_atol() -> f64 { 1e-12 }

fn default_order() -> usize { 7 }

impl BackendSection {
    pub fn label(&self) -> String {
        match self {
            BackendSection::Tcl { .. } => "tcl".into(),
            BackendSection::Dyson { order } => format!("dyson:{order}"),
            BackendSection::Tebd => "tebd".into(),
        }
    }

    pub fn tcl_options(&self) -> TclOptions {
        match *self {
            BackendSection::Tcl { rtol, atol, fixed_step } => TclOptions { rtol, atol, fixed_step },
            _ => TclOptions::default(),
        }
    }
}

impl Default for BackendSection {
    fn default() -> Self { BackendSection::Dyson { order: default_order() } }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bath: BathSection,
    pub probe: ProbeSection,
    pub time: TimeSection,
    #[serde(default)]
    pub qfi: QfiSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub tebd: TebdSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf { PathBuf::from("qprobe-out") }

impl RunConfig {
    /// Reads a TOML file and applies `key.path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("parsing configuration")?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.bath.bath()?;
        for (name, list) in [("omega_s", &self.probe.omega_s), ("theta", &self.probe.theta), ("alpha", &self.probe.alpha)] {
            if list.is_empty() {
                bail!("probe.{name} must not be empty");
            }
        }
        if self.time.grid()?.is_empty() {
            bail!("time grid must not be empty");
        }
        self.qfi.config()?.stencil(self.bath()?.parameter(self.qfi.tag()?))?;
        match &self.backend {
            BackendSection::Dyson { order } if !(2..=7).contains(order) => bail!("backend dyson: order must lie in [2, 7], got {order}"),
            BackendSection::Tcl { rtol, atol, .. } if !(*rtol > 0.0 && *atol > 0.0) => bail!("backend tcl: tolerances must be positive"),
            BackendSection::Tebd => {
                self.tebd.config()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn bath(&self) -> Result<Bath> { self.bath.bath() }

    pub fn chain_settings(&self) -> Result<ChainSettings> {
        let sites = match self.chain.sites {
            Some(n) => n,
            None => self.tebd.config()?.chain_length,
        };
        Ok(ChainSettings { sites, omega_max: self.chain.omega_max, node_count: self.chain.node_count })
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        Ok(hex_digest(canonical.as_bytes()))
    }
}

pub fn hex_digest(bytes: &[u8]) -> String { Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect() }

/// `a.b.c=value`, with the value read as TOML and falling back to a string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| anyhow!("override '{item}' is not of the form key=value"))?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| anyhow!("override '{item}' has an empty key"))?;
    let mut node = table;
    for part in parts {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| anyhow!("override '{item}': '{part}' is not a table"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
