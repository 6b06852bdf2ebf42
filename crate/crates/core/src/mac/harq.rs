use super::{MacConfig, ScheduleDecision, VehicleMac};
use crate::l2s::{effective_sinr, frame_error_probability, LinkAdaptation};
use crate::rng::{hash_key, stream, unit_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqState {
    Idle,
    /// Transmitted this TTI, outcome not yet known.
    WaitingAck,
    PendingRetx { due: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    pub id: usize,
    pub state: HarqState,
    pub tb_bits: u64,
    pub mcs: u8,
    pub num_prbs: usize,
    pub tx_count: u32,
    /// Linear SINR summed over transmissions, one entry per PRB slot.
    pub accumulated_sinr: Vec<f64>,
}

impl HarqProcess {
    pub fn idle(id: usize) -> Self {
        Self {
            id,
            state: HarqState::Idle,
            tb_bits: 0,
            mcs: 0,
            num_prbs: 0,
            tx_count: 0,
            accumulated_sinr: Vec::new(),
        }
    }

    /// Chase combining: add this transmission's SINR slot by slot.
    pub fn combine(&mut self, sinr: &[f64]) {
        if self.accumulated_sinr.len() != sinr.len() {
            self.accumulated_sinr = vec![0.0; sinr.len()];
        }
        for (acc, s) in self.accumulated_sinr.iter_mut().zip(sinr) {
            *acc += s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckOutcome {
    pub vehicle: usize,
    pub ack: bool,
    pub delivered_bits: u64,
    /// The block failed its last allowed transmission.
    pub dropped: bool,
    pub fer: f64,
}

/// Decodes every granted transport block against the true per-PRB SINR
/// (`true_sinr[g]` belongs to `decision.grants[g]`) and updates HARQ,
/// buffers and delivery counters.
pub fn transmit_and_ack(
    decision: &ScheduleDecision,
    true_sinr: &[Vec<f64>],
    macs: &mut [VehicleMac],
    la: &LinkAdaptation,
    config: &MacConfig,
    seed: u64,
) -> Vec<AckOutcome> {
    assert_eq!(decision.grants.len(), true_sinr.len());
    let tti = decision.tti;
    decision
        .grants
        .iter()
        .zip(true_sinr)
        .map(|(grant, sinr)| {
            let mac = &mut macs[grant.vehicle];
            let process = &mut mac.harq[grant.process];
            process.combine(sinr);
            let entry = la.table().entry(process.mcs);
            let gamma = effective_sinr(&process.accumulated_sinr, entry.modulation).expect("grant has PRBs");
            let fer = frame_error_probability(gamma, entry);
            let u = unit_f64(hash_key(&[stream::ACK, seed, grant.vehicle as u64, tti]));
            let ack = u >= fer;
            let bits = process.tb_bits;
            let mut outcome = AckOutcome {
                vehicle: grant.vehicle,
                ack,
                delivered_bits: 0,
                dropped: false,
                fer,
            };
            if ack {
                *process = HarqProcess::idle(process.id);
                mac.delivered_bits += bits;
                outcome.delivered_bits = bits;
            } else if process.tx_count >= config.harq_max_tx {
                *process = HarqProcess::idle(process.id);
                mac.buffer_bits += bits;
                mac.dropped_tbs += 1;
                outcome.dropped = true;
            } else {
                process.state = HarqState::PendingRetx {
                    due: tti + config.harq_rtt_ms,
                };
            }
            outcome
        })
        .collect()
}
