//! Link-to-system interface: MIESM effective SINR, FER prediction, CQI and
//! transport-block sizing.

mod mcs;
mod mi;

use std::path::PathBuf;

use serde::Deserialize;

use crate::channel::linear_to_db;
use crate::error::{Error, Result};
use crate::phy::PrecoderIndex;

pub use mcs::{McsEntry, McsTable};
pub use mi::{curve, MiCurve, Modulation};

pub const SUBCARRIERS_PER_PRB: u64 = 12;
/// 14 OFDM symbols per TTI minus 3 for control and reference signals.
pub const DATA_SYMBOLS_PER_TTI: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CqiMode {
    PerPrb,
    Wideband,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L2sConfig {
    pub fer_target: f64,
    pub fer_slope_per_db: f64,
    pub fer_offset_db: f64,
    pub cqi_mode: CqiMode,
    /// Optional CSV replacing the built-in MCS/FER table.
    pub table_csv: Option<PathBuf>,
}

impl Default for L2sConfig {
    fn default() -> Self {
        Self {
            fer_target: 0.1,
            fer_slope_per_db: 2.0,
            fer_offset_db: 0.5,
            cqi_mode: CqiMode::PerPrb,
            table_csv: None,
        }
    }
}

impl L2sConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fer_target > 0.0 && self.fer_target < 1.0) {
            return Err(Error::config("l2s.fer_target", "must be in (0, 1)"));
        }
        if !(self.fer_slope_per_db > 0.0) {
            return Err(Error::config("l2s.fer_slope_per_db", "must be positive"));
        }
        Ok(())
    }

    pub fn table(&self) -> Result<McsTable> {
        match &self.table_csv {
            Some(path) => McsTable::from_csv(path),
            None => Ok(McsTable::standard(self.fer_slope_per_db, self.fer_offset_db)),
        }
    }
}

/// `I⁻¹(mean I(γ_prb))` over the allocated PRBs, linear in and out.
pub fn effective_sinr(sinrs: &[f64], modulation: Modulation) -> Result<f64> {
    if sinrs.is_empty() {
        return Err(Error::EmptyAllocation);
    }
    let c = curve(modulation);
    let logs: Vec<f64> = sinrs.iter().map(|&g| c.ln_deficit(g.max(0.0))).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / logs.len() as f64).ln();
    Ok(c.gamma_from_ln_deficit(mean))
}

/// Predicted FER of `entry` at a linear effective SINR.
pub fn frame_error_probability(gamma_eff: f64, entry: &McsEntry) -> f64 {
    entry.fer_db(linear_to_db(gamma_eff))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqiReport {
    pub generated_tti: u64,
    /// Per PRB, 0 = out of range.
    pub cqi: Vec<u8>,
    pub precoder: PrecoderIndex,
}

/// MCS selection against a fixed FER target, with the per-MCS SINR
/// thresholds precomputed.
#[derive(Debug, Clone)]
pub struct LinkAdaptation {
    table: McsTable,
    fer_target: f64,
    thresholds_db: Vec<f64>,
    thresholds_lin: Vec<f64>,
}

impl LinkAdaptation {
    pub fn new(table: McsTable, fer_target: f64) -> Self {
        let thresholds_db: Vec<f64> = table.entries().iter().map(|e| e.threshold_db(fer_target)).collect();
        let thresholds_lin = thresholds_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
        Self {
            table,
            fer_target,
            thresholds_db,
            thresholds_lin,
        }
    }

    pub fn table(&self) -> &McsTable {
        &self.table
    }

    pub fn fer_target(&self) -> f64 {
        self.fer_target
    }

    pub fn max_cqi(&self) -> u8 {
        self.table.len() as u8
    }

    /// Highest CQI whose FER at this single-PRB SINR meets the target.
    pub fn cqi_for_sinr(&self, gamma: f64) -> u8 {
        self.thresholds_lin.partition_point(|&t| t <= gamma) as u8
    }

    /// The lowest SINR (linear) consistent with a reported CQI.
    pub fn implied_sinr(&self, cqi: u8) -> f64 {
        if cqi == 0 {
            0.0
        } else {
            self.thresholds_lin[cqi as usize - 1]
        }
    }

    pub fn threshold_db(&self, cqi: u8) -> f64 {
        self.thresholds_db[cqi as usize - 1]
    }

    /// Information bits one PRB carries at a CQI.
    pub fn prb_bits(&self, cqi: u8) -> u64 {
        if cqi == 0 {
            0
        } else {
            tb_size(1, self.table.entry(cqi).efficiency()).expect("one PRB")
        }
    }

    pub fn compute_cqi(&self, sinrs: &[f64], mode: CqiMode) -> Vec<u8> {
        match mode {
            CqiMode::PerPrb => sinrs.iter().map(|&g| self.cqi_for_sinr(g)).collect(),
            CqiMode::Wideband => {
                let c = self.select_mcs(sinrs).unwrap_or(0);
                vec![c; sinrs.len()]
            }
        }
    }

    /// Highest MCS whose FER at the MIESM effective SINR of `sinrs` meets
    /// the target; `None` when even the lowest MCS misses it.
    pub fn select_mcs(&self, sinrs: &[f64]) -> Option<u8> {
        if sinrs.is_empty() {
            return None;
        }
        (1..=self.max_cqi()).rev().find(|&c| {
            let e = self.table.entry(c);
            let eff = effective_sinr(sinrs, e.modulation).expect("non-empty");
            frame_error_probability(eff, e) <= self.fer_target
        })
    }
}

/// `floor(prbs × 12 × 11 × efficiency)`.
pub fn tb_size(num_prbs: usize, efficiency: f64) -> Result<u64> {
    if num_prbs == 0 {
        return Err(Error::EmptyAllocation);
    }
    Ok((num_prbs as f64 * (SUBCARRIERS_PER_PRB * DATA_SYMBOLS_PER_TTI) as f64 * efficiency).floor() as u64)
}
