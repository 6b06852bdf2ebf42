//! Per-RSU medium access: constant-rate traffic, buffer-gated
//! proportional-fair scheduling on delayed CQI, and HARQ with chase
//! combining.

mod harq;
mod scheduler;
mod traffic;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::l2s::CqiReport;

pub use harq::{transmit_and_ack, AckOutcome, HarqProcess, HarqState};
pub use scheduler::{buffer_capped_mcs, new_tx_eligible, schedule_tti, Grant, ScheduleDecision};
pub use traffic::{arrivals_in_tti, arrive_traffic};

/// Lower bound on the PF average rate, bits/ms.
pub const PF_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    pub pf_horizon_tti: f64,
    pub harq_max_tx: u32,
    pub harq_rtt_ms: u64,
    pub harq_processes: usize,
    pub cqi_period_ms: u64,
    pub cqi_delay_ms: u64,
    pub target_rate_kbps: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            pf_horizon_tti: 100.0,
            harq_max_tx: 4,
            harq_rtt_ms: 8,
            harq_processes: 8,
            cqi_period_ms: 6,
            cqi_delay_ms: 2,
            target_rate_kbps: 128.0,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pf_horizon_tti >= 1.0) {
            return Err(Error::config("mac.pf_horizon_tti", "must be at least 1"));
        }
        if self.harq_max_tx == 0 {
            return Err(Error::config("mac.harq_max_tx", "must be at least 1"));
        }
        if self.harq_rtt_ms == 0 {
            return Err(Error::config("mac.harq_rtt_ms", "must be at least 1"));
        }
        if self.harq_processes == 0 {
            return Err(Error::config("mac.harq_processes", "must be at least 1"));
        }
        if self.cqi_period_ms == 0 {
            return Err(Error::config("mac.cqi_period_ms", "must be at least 1"));
        }
        if !(self.target_rate_kbps >= 0.0) || !self.target_rate_kbps.is_finite() {
            return Err(Error::config("mac.target_rate_kbps", "must be a non-negative number"));
        }
        Ok(())
    }
}

/// MAC state of one vehicle. It travels with the vehicle across handovers.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleMac {
    /// Bits waiting that are not part of any transport block.
    pub buffer_bits: u64,
    pub arrived_bits: u64,
    pub delivered_bits: u64,
    /// Transport blocks given up after the last allowed transmission.
    pub dropped_tbs: u64,
    /// PF average served rate, bits/ms.
    pub avg_rate: f64,
    pub harq: Vec<HarqProcess>,
    reports: Vec<CqiReport>,
}

impl VehicleMac {
    pub fn new(config: &MacConfig) -> Self {
        Self {
            buffer_bits: 0,
            arrived_bits: 0,
            delivered_bits: 0,
            dropped_tbs: 0,
            avg_rate: PF_FLOOR,
            harq: (0..config.harq_processes).map(HarqProcess::idle).collect(),
            reports: Vec::new(),
        }
    }

    /// Bits inside transport blocks that are neither delivered nor dropped.
    pub fn in_flight_bits(&self) -> u64 {
        self.harq
            .iter()
            .filter(|p| p.state != HarqState::Idle)
            .map(|p| p.tb_bits)
            .sum()
    }

    pub fn idle_process(&self) -> Option<usize> {
        self.harq.iter().position(|p| p.state == HarqState::Idle)
    }

    /// Earliest-due pending retransmission at `tti`, if any.
    pub fn due_retransmission(&self, tti: u64) -> Option<usize> {
        self.harq
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p.state {
                HarqState::PendingRetx { due } if due <= tti => Some((due, i)),
                _ => None,
            })
            .min()
            .map(|(_, i)| i)
    }

    /// Queues a freshly generated report; it becomes usable `delay` TTIs
    /// after its generation.
    pub fn push_report(&mut self, report: CqiReport, delay: u64) {
        let now = report.generated_tti;
        self.reports.push(report);
        self.prune(now, delay);
    }

    /// Newest report whose feedback delay has elapsed by `now`. Older
    /// reports are discarded.
    pub fn usable_report(&mut self, now: u64, delay: u64) -> Option<&CqiReport> {
        self.prune(now, delay);
        self.reports.first().filter(|r| r.generated_tti + delay <= now)
    }

    fn prune(&mut self, now: u64, delay: u64) {
        if let Some(usable) = self.reports.iter().rposition(|r| r.generated_tti + delay <= now) {
            self.reports.drain(..usable);
        }
    }

    /// Like [`VehicleMac::usable_report`] without pruning.
    pub fn peek_report(&self, now: u64, delay: u64) -> Option<&CqiReport> {
        self.reports.iter().rev().find(|r| r.generated_tti + delay <= now)
    }

    /// `avg ← (1 − 1/T)·avg + served/T`, floored.
    pub fn update_pf(&mut self, served_bits: u64, horizon: f64) {
        let a = 1.0 / horizon;
        self.avg_rate = ((1.0 - a) * self.avg_rate + a * served_bits as f64).max(PF_FLOOR);
    }
}
