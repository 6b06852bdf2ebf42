use super::{HarqState, MacConfig, VehicleMac};
use crate::l2s::{tb_size, LinkAdaptation};
use crate::phy::PrecoderIndex;

/// One transport block for one vehicle in one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct Grant {
    pub vehicle: usize,
    pub process: usize,
    pub mcs: u8,
    /// Ascending PRB indices.
    pub prbs: Vec<usize>,
    pub tb_bits: u64,
    pub retransmission: bool,
    pub precoder: PrecoderIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    pub rsu: usize,
    pub tti: u64,
    /// Owning vehicle of each PRB.
    pub prb_owner: Vec<Option<usize>>,
    pub grants: Vec<Grant>,
}

impl ScheduleDecision {
    pub fn used_prbs(&self) -> usize {
        self.prb_owner.iter().filter(|o| o.is_some()).count()
    }
}

/// Whether a vehicle may start a new transport block at `tti`: data
/// waiting, a usable CQI report, a free HARQ process and no retransmission
/// due.
pub fn new_tx_eligible(mac: &VehicleMac, tti: u64, cqi_delay_ms: u64) -> bool {
    mac.buffer_bits > 0
        && mac.peek_report(tti, cqi_delay_ms).is_some()
        && mac.idle_process().is_some()
        && mac.due_retransmission(tti).is_none()
}

struct Candidate {
    vehicle: usize,
    cqi: Vec<u8>,
    precoder: PrecoderIndex,
    avg: f64,
    buffer: u64,
    estimate: u64,
    prbs: Vec<usize>,
}

/// Lowest MCS up to `top` whose transport block holds `buffer` bits, or
/// `top` if none does, with its TB size.
pub fn buffer_capped_mcs(la: &LinkAdaptation, num_prbs: usize, top: u8, buffer: u64) -> (u8, u64) {
    let size = |m: u8| tb_size(num_prbs, la.table().entry(m).efficiency()).expect("non-empty");
    (1..top)
        .map(|m| (m, size(m)))
        .find(|&(_, bits)| bits >= buffer)
        .unwrap_or((top, size(top)))
}

/// PF scheduling of one RSU for one TTI. `vehicles` are the RSU's served
/// vehicles in ascending id order; their MAC state is updated in place
/// (buffers drained into transport blocks, HARQ processes armed).
///
/// Due retransmissions go first with their original PRB count and MCS on
/// the best free PRBs; a retransmission that does not fit waits a TTI.
/// Remaining PRBs are handed out in index order to the highest
/// `r_inst / avg_rate` among eligible vehicles whose estimated allocation
/// does not yet cover their buffer; PRBs still left over then go to the
/// best eligible vehicle regardless of that cap. The MCS is the highest
/// one the reports support, lowered to the smallest that still carries the
/// whole buffer.
pub fn schedule_tti(
    rsu: usize,
    vehicles: &[usize],
    macs: &mut [VehicleMac],
    la: &LinkAdaptation,
    config: &MacConfig,
    tti: u64,
    num_prbs: usize,
) -> ScheduleDecision {
    let delay = config.cqi_delay_ms;
    let mut decision = ScheduleDecision {
        rsu,
        tti,
        prb_owner: vec![None; num_prbs],
        grants: Vec::new(),
    };
    let report_of = |mac: &mut VehicleMac| mac.usable_report(tti, delay).map(|r| (r.cqi.clone(), r.precoder));

    let mut retx: Vec<(u64, usize, usize)> = vehicles
        .iter()
        .filter_map(|&v| {
            let p = macs[v].due_retransmission(tti)?;
            match macs[v].harq[p].state {
                HarqState::PendingRetx { due } => Some((due, v, p)),
                _ => None,
            }
        })
        .collect();
    retx.sort_unstable();
    let mut retransmitting = Vec::new();
    for (_, v, p) in retx {
        let Some((cqi, precoder)) = report_of(&mut macs[v]) else {
            continue;
        };
        let need = macs[v].harq[p].num_prbs;
        let mut free: Vec<usize> = (0..num_prbs).filter(|&q| decision.prb_owner[q].is_none()).collect();
        if free.len() < need {
            continue;
        }
        // stable sort keeps the lowest index first among equal CQIs
        free.sort_by_key(|&q| std::cmp::Reverse(la.prb_bits(cqi[q])));
        let mut prbs = free[..need].to_vec();
        prbs.sort_unstable();
        for &q in &prbs {
            decision.prb_owner[q] = Some(v);
        }
        retransmitting.push(v);
        let process = &mut macs[v].harq[p];
        process.state = HarqState::WaitingAck;
        process.tx_count += 1;
        decision.grants.push(Grant {
            vehicle: v,
            process: p,
            mcs: process.mcs,
            prbs,
            tb_bits: process.tb_bits,
            retransmission: true,
            precoder,
        });
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for &v in vehicles {
        if retransmitting.contains(&v) || !new_tx_eligible(&macs[v], tti, delay) {
            continue;
        }
        let (cqi, precoder) = report_of(&mut macs[v]).expect("eligible implies a report");
        candidates.push(Candidate {
            vehicle: v,
            cqi,
            precoder,
            avg: macs[v].avg_rate,
            buffer: macs[v].buffer_bits,
            estimate: 0,
            prbs: Vec::new(),
        });
    }
    for capped in [true, false] {
        for q in 0..num_prbs {
            if decision.prb_owner[q].is_some() {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in candidates.iter().enumerate() {
                let cqi = c.cqi[q];
                if cqi == 0 || (capped && c.estimate >= c.buffer) {
                    continue;
                }
                let metric = la.prb_bits(cqi) as f64 / c.avg;
                if best.is_none_or(|(_, m)| metric > m) {
                    best = Some((i, metric));
                }
            }
            if let Some((i, _)) = best {
                let c = &mut candidates[i];
                c.estimate += la.prb_bits(c.cqi[q]);
                c.prbs.push(q);
                decision.prb_owner[q] = Some(c.vehicle);
            }
        }
    }

    for mut c in candidates {
        if c.prbs.is_empty() {
            continue;
        }
        c.prbs.sort_unstable();
        let implied: Vec<f64> = c.prbs.iter().map(|&q| la.implied_sinr(c.cqi[q])).collect();
        let top = la.select_mcs(&implied).unwrap_or(1);
        let mac = &mut macs[c.vehicle];
        let (mcs, capacity) = buffer_capped_mcs(la, c.prbs.len(), top, mac.buffer_bits);
        let bits = capacity.min(mac.buffer_bits);
        mac.buffer_bits -= bits;
        let p = mac.idle_process().expect("eligible implies an idle process");
        let process = &mut mac.harq[p];
        process.state = HarqState::WaitingAck;
        process.tb_bits = bits;
        process.mcs = mcs;
        process.num_prbs = c.prbs.len();
        process.tx_count = 1;
        process.accumulated_sinr.clear();
        decision.grants.push(Grant {
            vehicle: c.vehicle,
            process: p,
            mcs,
            prbs: c.prbs,
            tb_bits: bits,
            retransmission: false,
            precoder: c.precoder,
        });
    }
    decision
}
