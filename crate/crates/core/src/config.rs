//! Structured-text (TOML) configuration: module sections plus a list of
//! experiments, each of which may override any key.
//!
//! ```toml
//! [engine]
//! num_drops = 10
//!
//! [[experiments]]
//! label = "sparse_lmmse"
//! gap_min_m = 200
//! gap_max_m = 300
//! receiver = "lmmse"
//! precoding = "off"
//! overrides = { "channel.shadowing_sigma_db" = 6.0 }
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::ChannelConfig;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::l2s::L2sConfig;
use crate::mac::MacConfig;
use crate::output::format_float;
use crate::phy::{PhyConfig, ReceiverKind};
use crate::scenario::HighwayConfig;

const SECTIONS: [&str; 6] = ["scenario", "channel", "phy", "l2s", "mac", "engine"];

/// Every module's parameters for one run.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub scenario: HighwayConfig,
    pub channel: ChannelConfig,
    pub phy: PhyConfig,
    pub l2s: L2sConfig,
    pub mac: MacConfig,
    pub engine: EngineConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.channel.validate()?;
        self.phy.validate()?;
        self.l2s.validate()?;
        self.mac.validate()?;
        self.engine.validate(&self.scenario)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub label: String,
    pub gap_min_m: f64,
    pub gap_max_m: f64,
    pub receiver: ReceiverKind,
    #[serde(default, deserialize_with = "crate::phy::on_off")]
    pub precoding: bool,
    /// Defaults to 2 with precoding and to `phy.tx_antennas` otherwise.
    #[serde(default)]
    pub tx_antennas: Option<usize>,
    /// `"section.key" = value` pairs applied on top of the file's sections.
    #[serde(default)]
    pub overrides: toml::Table,
}

/// An experiment with its fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub config: SimConfig,
}

impl Experiment {
    /// Density label such as `[200 300]`.
    pub fn config_label(&self) -> String {
        format!(
            "[{} {}]",
            format_float(self.config.scenario.min_gap),
            format_float(self.config.scenario.max_gap)
        )
    }

    pub fn receiver_label(&self) -> String {
        self.config.phy.label()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub base: SimConfig,
    pub experiments: Vec<Experiment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    scenario: HighwayConfig,
    #[serde(default)]
    channel: ChannelConfig,
    #[serde(default)]
    phy: PhyConfig,
    #[serde(default)]
    l2s: L2sConfig,
    #[serde(default)]
    mac: MacConfig,
    #[serde(default)]
    engine: EngineConfig,
    #[serde(default)]
    experiments: Vec<ExperimentSpec>,
}

pub fn parse_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// `origin` is only used in error messages and to resolve relative paths.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ConfigFile> {
    let parse_error = |e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().trim().to_string(),
    };
    let doc: toml::Table = text.parse().map_err(parse_error)?;
    let raw: RawFile = toml::from_str(text).map_err(parse_error)?;
    let base = SimConfig {
        scenario: raw.scenario,
        channel: raw.channel,
        phy: raw.phy,
        l2s: raw.l2s,
        mac: raw.mac,
        engine: raw.engine,
    };
    if raw.experiments.is_empty() {
        return Err(Error::NoExperiments);
    }
    let mut labels = BTreeSet::new();
    let mut experiments = Vec::with_capacity(raw.experiments.len());
    for spec in raw.experiments {
        if !labels.insert(spec.label.clone()) {
            return Err(Error::config("experiments.label", format!("duplicate label `{}`", spec.label)));
        }
        let mut config = resolve(&doc, &spec)?;
        if let Some(csv) = &config.l2s.table_csv {
            if csv.is_relative() {
                let dir = origin.parent().unwrap_or(Path::new(""));
                config.l2s.table_csv = Some(dir.join(csv));
            }
        }
        config.validate().map_err(|e| in_experiment(&spec.label, e))?;
        experiments.push(Experiment { spec, config });
    }
    Ok(ConfigFile { base, experiments })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn in_experiment(label: &str, e: Error) -> Error {
    match e {
        Error::Config { key, reason } => Error::Config {
            key,
            reason: format!("{reason} (experiment `{label}`)"),
        },
        other => other,
    }
}

/// Merges the experiment's fields and overrides into the file's sections
/// and deserializes the result.
fn resolve(doc: &toml::Table, spec: &ExperimentSpec) -> Result<SimConfig> {
    let mut merged = toml::Table::new();
    for section in SECTIONS {
        let table = match doc.get(section) {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => toml::Table::new(),
        };
        merged.insert(section.to_string(), toml::Value::Table(table));
    }
    let mut set = |section: &str, key: &str, value: toml::Value| {
        if let Some(toml::Value::Table(t)) = merged.get_mut(section) {
            t.insert(key.to_string(), value);
        }
    };
    set("scenario", "gap_min_m", toml::Value::Float(spec.gap_min_m));
    set("scenario", "gap_max_m", toml::Value::Float(spec.gap_max_m));
    let receiver = match spec.receiver {
        ReceiverKind::Mrc => "mrc",
        ReceiverKind::Lmmse => "lmmse",
    };
    set("phy", "receiver", toml::Value::String(receiver.into()));
    set("phy", "precoding", toml::Value::Boolean(spec.precoding));
    let tx = match spec.tx_antennas {
        Some(n) => Some(n),
        None if spec.precoding => Some(2),
        None => None,
    };
    if let Some(n) = tx {
        set("phy", "tx_antennas", toml::Value::Integer(n as i64));
    }
    for (path, value) in &spec.overrides {
        let Some((section, key)) = path.split_once('.') else {
            return Err(Error::config(path.clone(), "override keys must look like `section.key`"));
        };
        if !SECTIONS.contains(&section) {
            return Err(Error::config(path.clone(), format!("unknown section `{section}`")));
        }
        set(section, key, value.clone());
    }
    toml::Value::Table(merged)
        .try_into::<SimConfig>()
        .map_err(|e| Error::config(format!("experiments.{}", spec.label), e.message().trim().to_string()))
}

/// Path of the configuration shipped with the crate for reproducing the
/// four densities × three receivers table.
pub fn default_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/highway.toml")
}
