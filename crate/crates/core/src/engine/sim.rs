use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{MetricsStore, SinrSample, VehicleRecord};
use crate::channel::{db_to_linear, linear_to_db, noise_power_dbm, DopplerPhasors, FadingModel, LargeScaleMap, Link};
use crate::config::SimConfig;
use crate::error::Result;
use crate::l2s::{CqiReport, LinkAdaptation};
use crate::mac::{arrivals_in_tti, new_tx_eligible, schedule_tti, transmit_and_ack, AckOutcome, ScheduleDecision, VehicleMac};
use crate::phy::{argmax_first, InterferenceMode, LinkSnapshot, PhyContext, PrecoderIndex, VehicleChannels, CODEBOOK_SIZE};
use crate::rng::{hash_key, stream};
use crate::scenario::{deploy, RsuId, ScenarioState, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Check scheduler and buffer invariants every TTI.
    pub debug_checks: bool,
    pub record_sinr: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            debug_checks: false,
            record_sinr: true,
        }
    }
}

/// Invariant counters; all violation counts stay zero in a correct run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropDiagnostics {
    pub ttis: u64,
    /// Idle PRBs on which some vehicle could have started a block.
    pub work_conservation_violations: u64,
    pub orthogonality_violations: u64,
    /// TTIs where `arrived ≠ delivered + buffered + in flight`.
    pub ledger_violations: u64,
    /// Retransmissions sent before their due TTI.
    pub early_retransmissions: u64,
    /// Retransmissions sent after their due TTI for lack of PRBs.
    pub deferred_retransmissions: u64,
    pub retransmissions: u64,
    pub new_transmissions: u64,
    pub dropped_tbs: u64,
    pub idle_prb_ttis: u64,
}

#[derive(Debug, Clone)]
pub struct DropResult {
    pub metrics: MetricsStore,
    pub diagnostics: DropDiagnostics,
}

/// What happened in one TTI.
#[derive(Debug, Clone)]
pub struct TtiTrace {
    pub tti: u64,
    pub decisions: Vec<ScheduleDecision>,
    pub outcomes: Vec<AckOutcome>,
}

/// One drop in progress.
#[derive(Debug)]
pub struct DropSim {
    config: SimConfig,
    la: LinkAdaptation,
    fading: FadingModel,
    seed: u64,
    drop_index: usize,
    options: RunOptions,
    rng: ChaCha8Rng,
    state: ScenarioState,
    large: LargeScaleMap,
    /// `sqrt(P_prb · g / N0)` per link, vehicle-major.
    amplitude: Vec<f64>,
    macs: Vec<VehicleMac>,
    prev_active: Vec<Vec<bool>>,
    measured_index: Vec<Option<usize>>,
    tti: u64,
    channel_cache: Vec<Option<VehicleChannels>>,
    doppler: Option<DopplerPhasors>,
    cached: Vec<usize>,
    nack_at: Vec<Vec<Option<u64>>>,
    sinr_samples: Vec<SinrSample>,
    measured_ttis: Vec<u64>,
    measured_delivered: Vec<u64>,
    rsu_ttis: Vec<Vec<u64>>,
    served_vehicle_ttis: u64,
    diagnostics: DropDiagnostics,
}

impl DropSim {
    /// Deploys drop `drop_index` with seed `master_seed + drop_index`.
    pub fn new(config: &SimConfig, drop_index: usize, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let seed = config.engine.drop_seed(drop_index);
        let state = deploy(&config.scenario, seed)?;
        Self::from_state(config, state, seed, drop_index, options)
    }

    /// Runs on a hand-made scenario. Association is redone with shadowing.
    pub fn from_state(
        config: &SimConfig,
        state: ScenarioState,
        seed: u64,
        drop_index: usize,
        options: RunOptions,
    ) -> Result<Self> {
        config.validate()?;
        let la = LinkAdaptation::new(config.l2s.table()?, config.l2s.fer_target);
        let fading = FadingModel::new(&config.channel, config.scenario.speed_mps(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(hash_key(&[stream::SHADOW, seed]));
        let large = LargeScaleMap::initial(&state, config.channel.shadowing(), &mut rng);
        let state = state.associate(&large);
        let num_v = state.num_vehicles();
        let num_r = state.num_rsus();
        let measured = config.engine.measured_rsus.resolve(num_r);
        let mut measured_index = vec![None; num_r];
        for (i, &b) in measured.iter().enumerate() {
            measured_index[b] = Some(i);
        }
        let mut sim = Self {
            config: config.clone(),
            la,
            fading,
            seed,
            drop_index,
            options,
            rng,
            state,
            large,
            amplitude: Vec::new(),
            macs: vec![VehicleMac::new(&config.mac); num_v],
            prev_active: vec![vec![true; config.channel.num_prbs]; num_r],
            measured_index,
            tti: 0,
            channel_cache: vec![None; num_v],
            doppler: None,
            cached: Vec::new(),
            nack_at: vec![vec![None; config.mac.harq_processes]; num_v],
            sinr_samples: Vec::new(),
            measured_ttis: vec![0; num_v],
            measured_delivered: vec![0; num_v],
            rsu_ttis: vec![vec![0; measured.len()]; num_v],
            served_vehicle_ttis: 0,
            diagnostics: DropDiagnostics::default(),
        };
        sim.refresh_amplitudes();
        Ok(sim)
    }

    pub fn state(&self) -> &ScenarioState {
        &self.state
    }

    pub fn macs(&self) -> &[VehicleMac] {
        &self.macs
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn link_adaptation(&self) -> &LinkAdaptation {
        &self.la
    }

    pub fn diagnostics(&self) -> &DropDiagnostics {
        &self.diagnostics
    }

    fn refresh_amplitudes(&mut self) {
        let n0 = noise_power_dbm(&self.config.channel.noise_model());
        let p = self.config.channel.prb_tx_power_dbm();
        let num_r = self.state.num_rsus();
        self.amplitude = (0..self.state.num_vehicles() * num_r)
            .map(|i| {
                let g = self.large.gain_db(RsuId(i % num_r), VehicleId(i / num_r));
                db_to_linear(p + g - n0).sqrt()
            })
            .collect();
    }

    fn update_large_scale(&mut self, now: u64) {
        let dt = self.config.engine.large_scale_interval_ms as f64 / 1000.0;
        self.state = self.state.advance_mobility(dt);
        self.large = self.large.update_shadowing(&self.state, &mut self.rng, now);
        self.state = self.state.associate(&self.large);
        self.refresh_amplitudes();
    }

    fn ensure_channels(&mut self, v: usize) {
        if self.channel_cache[v].is_some() {
            return;
        }
        if self.doppler.as_ref().map(|d| d.tti()) != Some(self.tti) {
            self.doppler = Some(self.fading.doppler_phasors(self.tti));
        }
        let doppler = self.doppler.as_ref().expect("just built");
        let serving = self.state.vehicles[v].serving_rsu.0;
        let num_r = self.state.num_rsus();
        let with_interferers = self.config.phy.interference != InterferenceMode::Off;
        let order = std::iter::once(serving).chain((0..num_r).filter(|&b| b != serving && with_interferers));
        let links = order
            .map(|b| LinkSnapshot {
                rsu: b,
                amplitude: self.amplitude[v * num_r + b],
                taps: self
                    .fading
                    .tap_gains_at(doppler, Link { rsu: b, vehicle: v }, self.config.phy.tx_antennas),
            })
            .collect();
        self.channel_cache[v] = Some(VehicleChannels { links });
        self.cached.push(v);
    }

    fn phy(&self) -> PhyContext<'_> {
        PhyContext {
            fading: &self.fading,
            receiver: self.config.phy.receiver,
            tx_antennas: self.config.phy.tx_antennas,
            seed: self.seed,
        }
    }

    fn interferer_active(&self) -> impl Fn(usize, usize) -> bool + '_ {
        let mode = self.config.phy.interference;
        move |rsu, prb| match mode {
            InterferenceMode::FullBuffer => true,
            InterferenceMode::Off => false,
            InterferenceMode::LoadCoupled => self.prev_active[rsu][prb],
        }
    }

    fn generate_cqi(&mut self, v: usize) {
        let t = self.tti;
        self.ensure_channels(v);
        let all = {
            let channels = self.channel_cache[v].as_ref().expect("just built");
            let active = self.interferer_active();
            self.phy().sinr_all_codewords(channels, t, &active)
        };
        let k = if self.config.phy.precoding {
            let mut sums = [0.0; CODEBOOK_SIZE];
            for per_prb in &all {
                for (s, x) in sums.iter_mut().zip(per_prb) {
                    *s += x;
                }
            }
            argmax_first(&sums)
        } else {
            0
        };
        let column: Vec<f64> = all.iter().map(|a| a[k]).collect();
        let cqi = self.la.compute_cqi(&column, self.config.l2s.cqi_mode);
        let delay = self.config.mac.cqi_delay_ms;
        let serving = self.state.vehicles[v].serving_rsu.0;
        if self.options.record_sinr && self.measured_index[serving].is_some() {
            let in_use = self.macs[v].peek_report(t, delay).map_or(0, |r| r.precoder.0);
            let mean = all.iter().map(|a| a[in_use]).sum::<f64>() / all.len() as f64;
            self.sinr_samples.push(SinrSample {
                rsu: serving,
                vehicle: v,
                tti: t,
                sinr_db: linear_to_db(mean),
            });
        }
        self.macs[v].push_report(
            CqiReport {
                generated_tti: t,
                cqi,
                precoder: PrecoderIndex(k),
            },
            delay,
        );
    }

    /// Advances one TTI.
    pub fn step(&mut self) -> TtiTrace {
        let t = self.tti;
        let num_r = self.state.num_rsus();
        let num_v = self.state.num_vehicles();
        let num_prbs = self.config.channel.num_prbs;
        let mac_cfg = self.config.mac.clone();

        if t > 0 && t.is_multiple_of(self.config.engine.large_scale_interval_ms) {
            self.update_large_scale(t);
        }

        let bits = arrivals_in_tti(mac_cfg.target_rate_kbps, t);
        for m in &mut self.macs {
            m.buffer_bits += bits;
            m.arrived_bits += bits;
        }

        let period = mac_cfg.cqi_period_ms;
        for v in 0..num_v {
            if t % period == v as u64 % period {
                self.generate_cqi(v);
            }
        }

        let mut served: Vec<Vec<usize>> = vec![Vec::new(); num_r];
        for veh in &self.state.vehicles {
            served[veh.serving_rsu.0].push(veh.id.0);
        }

        let contenders = self.options.debug_checks.then(|| self.contenders(&served));

        let decisions: Vec<ScheduleDecision> = (0..num_r)
            .map(|b| schedule_tti(b, &served[b], &mut self.macs, &self.la, &mac_cfg, t, num_prbs))
            .collect();

        let mut outcomes = Vec::new();
        for d in &decisions {
            let mut sinrs = Vec::with_capacity(d.grants.len());
            for g in &d.grants {
                self.ensure_channels(g.vehicle);
                let channels = self.channel_cache[g.vehicle].as_ref().expect("just built");
                let active = self.interferer_active();
                sinrs.push(self.phy().per_prb_sinr(channels, &g.prbs, g.precoder, t, &active));
            }
            outcomes.extend(transmit_and_ack(d, &sinrs, &mut self.macs, &self.la, &mac_cfg, self.seed));
        }

        let mut delivered_now = vec![0u64; num_v];
        for o in &outcomes {
            delivered_now[o.vehicle] += o.delivered_bits;
        }
        for (m, &d) in self.macs.iter_mut().zip(&delivered_now) {
            m.update_pf(d, mac_cfg.pf_horizon_tti);
        }

        for veh in &self.state.vehicles {
            if let Some(i) = self.measured_index[veh.serving_rsu.0] {
                let v = veh.id.0;
                self.measured_ttis[v] += 1;
                self.measured_delivered[v] += delivered_now[v];
                self.rsu_ttis[v][i] += 1;
                self.served_vehicle_ttis += 1;
            }
        }

        self.tally(&decisions, &outcomes, contenders.as_deref(), &served);

        for (mask, d) in self.prev_active.iter_mut().zip(&decisions) {
            for (a, o) in mask.iter_mut().zip(&d.prb_owner) {
                *a = o.is_some();
            }
        }
        for v in self.cached.drain(..) {
            self.channel_cache[v] = None;
        }
        self.tti += 1;
        TtiTrace {
            tti: t,
            decisions,
            outcomes,
        }
    }

    /// Per RSU, the CQI vectors of vehicles able to start a new block now.
    fn contenders(&self, served: &[Vec<usize>]) -> Vec<Vec<Vec<u8>>> {
        let delay = self.config.mac.cqi_delay_ms;
        served
            .iter()
            .map(|vs| {
                vs.iter()
                    .filter(|&&v| new_tx_eligible(&self.macs[v], self.tti, delay))
                    .filter_map(|&v| self.macs[v].peek_report(self.tti, delay).map(|r| r.cqi.clone()))
                    .collect()
            })
            .collect()
    }

    fn tally(
        &mut self,
        decisions: &[ScheduleDecision],
        outcomes: &[AckOutcome],
        contenders: Option<&[Vec<Vec<u8>>]>,
        served: &[Vec<usize>],
    ) {
        let t = self.tti;
        let rtt = self.config.mac.harq_rtt_ms;
        let diag = &mut self.diagnostics;
        diag.ttis += 1;
        for d in decisions {
            diag.idle_prb_ttis += d.prb_owner.iter().filter(|o| o.is_none()).count() as u64;
            for g in &d.grants {
                if g.retransmission {
                    diag.retransmissions += 1;
                    if let Some(nack) = self.nack_at[g.vehicle][g.process] {
                        match (t - nack).cmp(&rtt) {
                            std::cmp::Ordering::Less => diag.early_retransmissions += 1,
                            std::cmp::Ordering::Greater => diag.deferred_retransmissions += 1,
                            std::cmp::Ordering::Equal => {}
                        }
                    }
                } else {
                    diag.new_transmissions += 1;
                }
            }
        }
        for g in decisions.iter().flat_map(|d| &d.grants) {
            self.nack_at[g.vehicle][g.process] = None;
        }
        let mut grant_iter = decisions.iter().flat_map(|d| d.grants.iter());
        for o in outcomes {
            let g = grant_iter.next().expect("one outcome per grant");
            if o.dropped {
                diag.dropped_tbs += 1;
            } else if !o.ack {
                self.nack_at[g.vehicle][g.process] = Some(t);
            }
        }
        let Some(contenders) = contenders else {
            return;
        };
        for (b, d) in decisions.iter().enumerate() {
            let mut seen = vec![false; d.prb_owner.len()];
            for g in &d.grants {
                if !served[b].contains(&g.vehicle) {
                    diag.orthogonality_violations += 1;
                }
                for &q in &g.prbs {
                    if seen[q] || d.prb_owner[q] != Some(g.vehicle) {
                        diag.orthogonality_violations += 1;
                    }
                    seen[q] = true;
                }
            }
            if seen.iter().zip(&d.prb_owner).any(|(s, o)| *s != o.is_some()) {
                diag.orthogonality_violations += 1;
            }
            for (q, owner) in d.prb_owner.iter().enumerate() {
                if owner.is_none() && contenders[b].iter().any(|cqi| cqi[q] >= 1) {
                    diag.work_conservation_violations += 1;
                }
            }
        }
        for m in &self.macs {
            if m.arrived_bits != m.delivered_bits + m.buffer_bits + m.in_flight_bits() {
                diag.ledger_violations += 1;
                break;
            }
        }
    }

    pub fn finish(self) -> DropResult {
        let ttis = self.tti;
        let engine = &self.config.engine;
        let measured = engine.measured_rsus.resolve(self.state.num_rsus());
        let target = engine.target_fraction * self.config.mac.target_rate_kbps;
        let vehicles = (0..self.state.num_vehicles())
            .filter(|&v| self.measured_ttis[v] > 0 && self.measured_ttis[v] as f64 >= engine.min_measured_fraction * ttis as f64)
            .map(|v| {
                let i = argmax_first(&self.rsu_ttis[v].iter().map(|&x| x as f64).collect::<Vec<_>>());
                let mut r = VehicleRecord {
                    vehicle: v,
                    rsu: measured[i],
                    delivered_bits: self.measured_delivered[v],
                    measured_ttis: self.measured_ttis[v],
                    outage: false,
                    achieved_target: false,
                };
                let thr = r.mean_thr_kbps();
                r.outage = thr < engine.outage_kbps;
                r.achieved_target = thr >= target;
                r
            })
            .collect();
        DropResult {
            metrics: MetricsStore {
                drop: self.drop_index,
                ttis,
                num_measured_rsus: measured.len(),
                served_vehicle_ttis: self.served_vehicle_ttis,
                sinr_samples: self.sinr_samples,
                vehicles,
            },
            diagnostics: self.diagnostics,
        }
    }
}

/// Runs one full drop.
pub fn run_drop(config: &SimConfig, drop_index: usize, options: RunOptions) -> Result<DropResult> {
    let mut sim = DropSim::new(config, drop_index, options)?;
    for _ in 0..config.engine.ttis_per_drop {
        sim.step();
    }
    Ok(sim.finish())
}
