//! The TTI loop. A drop deploys a fresh highway, then every millisecond
//! runs traffic arrivals, CQI feedback, per-RSU scheduling, SINR
//! evaluation of the granted PRBs and HARQ decoding. Mobility, shadowing
//! and cell association advance on a coarser grid.

mod metrics;
mod sim;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::scenario::HighwayConfig;

pub use metrics::{aggregate, empirical_cdf, nearest_rank, MetricsStore, ResultsRow, ResultsTables, SinrSample, VehicleRecord};
pub use sim::{run_drop, DropDiagnostics, DropResult, DropSim, RunOptions, TtiTrace};

/// Which RSUs contribute statistics.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MeasuredRsus {
    /// `num_rsus / 2`, the RSU farthest from the seam of the id order.
    #[default]
    Middle,
    List(Vec<usize>),
}

impl MeasuredRsus {
    pub fn resolve(&self, num_rsus: usize) -> Vec<usize> {
        match self {
            MeasuredRsus::Middle => vec![num_rsus / 2],
            MeasuredRsus::List(l) => l.clone(),
        }
    }
}

impl<'de> Deserialize<'de> for MeasuredRsus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "middle" => Ok(MeasuredRsus::Middle),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "expected \"middle\" or a list of RSU ids, got `{s}`"
            ))),
            Raw::List(l) => Ok(MeasuredRsus::List(l)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub num_drops: usize,
    pub ttis_per_drop: u64,
    /// Drop `i` uses seed `master_seed + i`.
    pub master_seed: u64,
    pub measured_rsus: MeasuredRsus,
    /// Grid of mobility, shadowing and association updates.
    pub large_scale_interval_ms: u64,
    pub outage_kbps: f64,
    /// A vehicle achieves the target at this fraction of the target rate.
    pub target_fraction: f64,
    /// Vehicles served by a measured RSU for less than this fraction of the
    /// drop are left out of the throughput statistics.
    pub min_measured_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            num_drops: 10,
            ttis_per_drop: 2000,
            master_seed: 1,
            measured_rsus: MeasuredRsus::Middle,
            large_scale_interval_ms: 100,
            outage_kbps: 1.0,
            target_fraction: 0.95,
            min_measured_fraction: 0.5,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, scenario: &HighwayConfig) -> Result<()> {
        if self.num_drops == 0 {
            return Err(Error::config("engine.num_drops", "must be at least 1"));
        }
        if self.ttis_per_drop == 0 {
            return Err(Error::config("engine.ttis_per_drop", "must be at least 1"));
        }
        if self.large_scale_interval_ms == 0 {
            return Err(Error::config("engine.large_scale_interval_ms", "must be at least 1"));
        }
        let measured = self.measured_rsus.resolve(scenario.num_rsus);
        if measured.is_empty() {
            return Err(Error::config("engine.measured_rsus", "empty list"));
        }
        if let Some(b) = measured.iter().find(|&&b| b >= scenario.num_rsus) {
            return Err(Error::config(
                "engine.measured_rsus",
                format!("RSU {b} does not exist ({} RSUs)", scenario.num_rsus),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_measured_fraction) {
            return Err(Error::config("engine.min_measured_fraction", "must be in [0, 1]"));
        }
        if !(self.target_fraction > 0.0) {
            return Err(Error::config("engine.target_fraction", "must be positive"));
        }
        Ok(())
    }

    pub fn drop_seed(&self, drop_index: usize) -> u64 {
        self.master_seed.wrapping_add(drop_index as u64)
    }
}
