use std::path::Path;

use serde::Deserialize;

use super::mi::Modulation;
use crate::error::{Error, Result};

/// 4-bit CQI ladder: (modulation bits, code rate × 1024).
const STANDARD_LADDER: [(u32, u32); 15] = [
    (2, 78),
    (2, 120),
    (2, 193),
    (2, 308),
    (2, 449),
    (2, 602),
    (4, 378),
    (4, 490),
    (4, 616),
    (6, 466),
    (6, 567),
    (6, 666),
    (6, 772),
    (6, 873),
    (6, 948),
];

/// One MCS with its logistic FER curve
/// `FER(γ_dB) = 1 / (1 + exp(slope · (γ_dB − γ50)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct McsEntry {
    pub cqi: u8,
    pub modulation: Modulation,
    pub code_rate: f64,
    pub gamma50_db: f64,
    pub slope_per_db: f64,
}

impl McsEntry {
    /// Bits per modulation symbol.
    pub fn efficiency(&self) -> f64 {
        self.modulation.bits() as f64 * self.code_rate
    }

    pub fn fer_db(&self, gamma_db: f64) -> f64 {
        1.0 / (1.0 + (self.slope_per_db * (gamma_db - self.gamma50_db)).exp())
    }

    /// SINR (dB) at which the FER equals `target`.
    pub fn threshold_db(&self, target: f64) -> f64 {
        self.gamma50_db + ((1.0 - target) / target).ln() / self.slope_per_db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    cqi: u8,
    mod_order: u32,
    code_rate: f64,
    gamma50_db: f64,
    slope_per_db: f64,
}

impl McsTable {
    /// The standard 15-entry ladder with `γ50` placed `offset_db` above
    /// the Shannon threshold `10·log10(2^eff − 1)`.
    pub fn standard(slope_per_db: f64, offset_db: f64) -> Self {
        let entries = STANDARD_LADDER
            .iter()
            .enumerate()
            .map(|(i, &(bits, rate))| {
                let modulation = Modulation::from_order(bits).expect("ladder uses 2/4/6");
                let code_rate = rate as f64 / 1024.0;
                let eff = bits as f64 * code_rate;
                McsEntry {
                    cqi: i as u8 + 1,
                    modulation,
                    code_rate,
                    gamma50_db: 10.0 * (2f64.powf(eff) - 1.0).log10() + offset_db,
                    slope_per_db,
                }
            })
            .collect();
        Self { entries }
    }

    /// Reads `cqi,mod_order,code_rate,gamma50_db,slope_per_db`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for row in reader.deserialize() {
            let row: CsvRow = row?;
            let modulation = Modulation::from_order(row.mod_order).ok_or_else(|| {
                Error::config("l2s.table_csv", format!("cqi {}: mod_order must be 2, 4 or 6", row.cqi))
            })?;
            entries.push(McsEntry {
                cqi: row.cqi,
                modulation,
                code_rate: row.code_rate,
                gamma50_db: row.gamma50_db,
                slope_per_db: row.slope_per_db,
            });
        }
        let table = Self { entries };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::config("l2s.table_csv", "empty MCS table"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.cqi as usize != i + 1 {
                return Err(Error::config("l2s.table_csv", "cqi values must run 1, 2, 3, ..."));
            }
            if !(e.code_rate > 0.0 && e.code_rate < 1.0) {
                return Err(Error::config("l2s.table_csv", format!("cqi {}: code_rate outside (0, 1)", e.cqi)));
            }
            if !(e.slope_per_db > 0.0) || !e.gamma50_db.is_finite() {
                return Err(Error::config("l2s.table_csv", format!("cqi {}: bad FER parameters", e.cqi)));
            }
        }
        if self.entries.windows(2).any(|w| w[1].efficiency() <= w[0].efficiency()) {
            return Err(Error::config("l2s.table_csv", "efficiency must increase strictly with cqi"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for CQI/MCS index `cqi` (1-based).
    pub fn entry(&self, cqi: u8) -> &McsEntry {
        &self.entries[cqi as usize - 1]
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }
}
