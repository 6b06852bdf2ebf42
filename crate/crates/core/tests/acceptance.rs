//! One pass/fail line per acceptance criterion. Criteria 7 to 9 run the
//! full batch twice (10 drops × 2000 TTIs per cell) and take a while.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2xsim::batch::{run_batch, BatchOptions, BatchReport, SINR_SAMPLES_FILE};
use v2xsim::channel::linear_to_db;
use v2xsim::config::{default_config_path, parse_config, ConfigFile};
use v2xsim::engine::{nearest_rank, DropSim, ResultsRow, RunOptions};
use v2xsim::l2s::{effective_sinr, frame_error_probability, tb_size, CqiReport, LinkAdaptation, McsTable, Modulation};
use v2xsim::mac::{schedule_tti, transmit_and_ack, HarqProcess, HarqState, MacConfig, VehicleMac};
use v2xsim::par::Execution;
use v2xsim::phy::{
    codebook, lmmse_sinr, mrc_sinr, receiver_sinr, select_precoder, CVec2, CovarianceEstimate, PrecoderIndex,
    ReceiverKind, CODEBOOK_SIZE,
};
use v2xsim::scenario::{deploy, HighwayConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn la() -> LinkAdaptation {
    LinkAdaptation::new(McsTable::standard(2.0, 0.5), 0.1)
}

const DENSITIES: [(&str, f64, f64, f64); 4] = [
    ("[38 116]", 38.0, 116.0, 135.0),
    ("[116 116]", 116.0, 116.0, 90.0),
    ("[100 200]", 100.0, 200.0, 65.0),
    ("[200 300]", 200.0, 300.0, 40.0),
];

fn mean_vehicles_per_rsu(min_gap: f64, max_gap: f64) -> f64 {
    let config = HighwayConfig {
        min_gap,
        max_gap,
        ..HighwayConfig::default()
    };
    let total: usize = (0..100).map(|s| deploy(&config, s).unwrap().num_vehicles()).sum();
    total as f64 / 100.0 / config.num_rsus as f64
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, lo, hi, expected) in DENSITIES {
        let mean = mean_vehicles_per_rsu(lo, hi);
        pass &= (mean / expected - 1.0).abs() <= 0.10;
        parts.push(format!("{label} {mean:.1} (want {expected})"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    verdict(pass, format!("{}; {secs:.2} s", parts.join(", ")))
}

fn criterion_2() -> Verdict {
    let deficit = mean_vehicles_per_rsu(38.0, 116.0) - 50.0;
    verdict((deficit - 85.0).abs() <= 14.0, format!("deficit {deficit:.1} PRBs (want 85 ± 14)"))
}

fn random_cvec(rng: &mut ChaCha8Rng) -> CVec2 {
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    CVec2::new(c(), c())
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let book = codebook();
    let (mut order, mut white, mut argmax) = (0, 0, 0);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    for i in 0..10_000 {
        let two_by_two = i % 2 == 1;
        let n0 = rng.random_range(0.01..2.0);
        let interferers: Vec<(CVec2, f64)> = (0..rng.random_range(1..4))
            .map(|_| (random_cvec(&mut rng), rng.random_range(0.01..10.0)))
            .collect();
        let cov = CovarianceEstimate::from_interferers(&interferers, n0);
        let inv = cov.inverse().unwrap();
        let cols = [random_cvec(&mut rng), random_cvec(&mut rng)];
        let h = if two_by_two {
            let f = book[rng.random_range(0..CODEBOOK_SIZE)];
            cols[0] * f[0] + cols[1] * f[1]
        } else {
            cols[0]
        };
        let mrc = mrc_sinr(&h, &interferers, n0, 1.0);
        let lmmse = lmmse_sinr(&h, &cov).unwrap();
        if lmmse < mrc * (1.0 - 1e-9) {
            order += 1;
        }
        let w = CovarianceEstimate::white(n0);
        if rel(lmmse_sinr(&h, &w).unwrap(), mrc_sinr(&h, &[], n0, 1.0)) > 1e-9 {
            white += 1;
        }
        if two_by_two {
            let effective = [book.map(|f| cols[0] * f[0] + cols[1] * f[1])];
            for kind in [ReceiverKind::Mrc, ReceiverKind::Lmmse] {
                let chosen = select_precoder(&effective, std::slice::from_ref(&cov), kind).unwrap();
                let sinrs: Vec<f64> = effective[0].iter().map(|e| receiver_sinr(kind, e, &cov, &inv)).collect();
                let best = (0..CODEBOOK_SIZE).fold(0, |b, k| if sinrs[k] > sinrs[b] { k } else { b });
                if chosen != PrecoderIndex(best) {
                    argmax += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        order == 0 && white == 0 && argmax == 0 && secs < 30.0,
        format!("10^4 instances: {order} order, {white} white-noise, {argmax} precoder mismatches; {secs:.2} s"),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mods = [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut identity = 0.0f64;
    for m in mods {
        for i in 0..600 {
            let g = -19.0 + i as f64 * 0.1;
            let e = effective_sinr(&[db(g); 7], m).unwrap();
            identity = identity.max((linear_to_db(e) - g).abs());
        }
    }
    let mut monotone = 0;
    for i in 0..1000 {
        let n = rng.random_range(1..=50);
        let alloc: Vec<f64> = (0..n).map(|_| db(rng.random_range(-15.0..35.0))).collect();
        let mut up = alloc.clone();
        let q = rng.random_range(0..n);
        up[q] *= db(rng.random_range(0.01..10.0));
        let m = mods[i % 3];
        if effective_sinr(&up, m).unwrap() < effective_sinr(&alloc, m).unwrap() * (1.0 - 1e-12) {
            monotone += 1;
        }
    }
    let la = la();
    let mut worst = 0.0f64;
    for e in la.table().entries() {
        let fer = frame_error_probability(db(e.gamma50_db), e);
        let errors = (0..10_000).filter(|_| rng.random::<f64>() < fer).count();
        worst = worst.max((errors as f64 / 10_000.0 - 0.5).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        identity < 1e-6 && monotone == 0 && worst <= 0.02 && secs < 30.0,
        format!(
            "identity error {identity:.1e} dB, {monotone} monotonicity violations, \
             worst FER deviation at γ50 {worst:.4}; {secs:.2} s"
        ),
    )
}

fn backlogged(config: &MacConfig, bits: u64) -> VehicleMac {
    let mut m = VehicleMac::new(config);
    m.buffer_bits = bits;
    m.arrived_bits = bits;
    m
}

fn report(tti: u64, cqi: Vec<u8>) -> CqiReport {
    CqiReport {
        generated_tti: tti,
        cqi,
        precoder: PrecoderIndex(0),
    }
}

fn criterion_5() -> Verdict {
    let mut p = HarqProcess::idle(0);
    p.combine(&[2.5; 4]);
    let one = effective_sinr(&p.accumulated_sinr, Modulation::Qpsk).unwrap();
    p.combine(&[2.5; 4]);
    let two = effective_sinr(&p.accumulated_sinr, Modulation::Qpsk).unwrap();
    let gain = linear_to_db(two) - linear_to_db(one);
    let combining = (gain - 10.0 * 2f64.log10()).abs() < 1e-6;

    let config = MacConfig {
        cqi_delay_ms: 0,
        ..MacConfig::default()
    };
    let la = la();
    let mut macs = vec![backlogged(&config, 3000)];
    macs[0].push_report(report(0, vec![7; 50]), 0);
    let mut due = Vec::new();
    let mut retx_ttis = Vec::new();
    let mut dropped_at = None;
    for tti in 0..=24u64 {
        let d = schedule_tti(0, &[0], &mut macs, &la, &config, tti, 50);
        retx_ttis.extend(d.grants.iter().filter(|g| g.retransmission).map(|_| tti));
        let sinr: Vec<Vec<f64>> = d.grants.iter().map(|g| vec![0.0; g.prbs.len()]).collect();
        for o in transmit_and_ack(&d, &sinr, &mut macs, &la, &config, 1) {
            if o.dropped && dropped_at.is_none() {
                dropped_at = Some(tti);
            }
        }
        if let HarqState::PendingRetx { due: t } = macs[0].harq[0].state {
            if due.last() != Some(&t) {
                due.push(t);
            }
        }
    }
    let timing = due == [8, 16, 24] && retx_ttis == [8, 16, 24];
    let dropped = dropped_at == Some(24) && macs[0].dropped_tbs >= 1;
    verdict(
        combining && timing && dropped,
        format!(
            "combining gain {gain:.4} dB, retransmissions at {:?} ms, dropped at {dropped_at:?} ms",
            &retx_ttis[..retx_ttis.len().min(3)]
        ),
    )
}

fn criterion_6(file: &ConfigFile) -> Verdict {
    let experiment = file.experiments.iter().find(|e| e.spec.label == "dense_lmmse").unwrap();
    let mut c = experiment.config.clone();
    c.engine.ttis_per_drop = 2000;
    let options = RunOptions {
        debug_checks: true,
        record_sinr: false,
    };
    let mut sim = DropSim::new(&c, 0, options).unwrap();
    for _ in 0..c.engine.ttis_per_drop {
        sim.step();
    }
    let la = sim.link_adaptation().clone();
    let quantum = tb_size(c.channel.num_prbs, la.table().entry(la.max_cqi()).efficiency()).unwrap() as f64;
    let ttis = c.engine.ttis_per_drop as f64;
    let over_drop = sim
        .macs()
        .iter()
        .filter(|m| m.delivered_bits as f64 / ttis > 128.0 + quantum / ttis)
        .count();
    let result = sim.finish();
    let over_window = result
        .metrics
        .vehicles
        .iter()
        .filter(|r| r.mean_thr_kbps() > 128.0 + quantum / r.measured_ttis as f64)
        .count();
    let idle = result.diagnostics.work_conservation_violations;

    let config = MacConfig {
        cqi_delay_ms: 0,
        ..MacConfig::default()
    };
    let mut macs = vec![backlogged(&config, u64::MAX / 4); 2];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut prbs = [0u64; 2];
    for tti in 0..10_000u64 {
        for m in macs.iter_mut() {
            m.push_report(report(tti, (0..50).map(|_| rng.random_range(1..=15)).collect()), 0);
        }
        let d = schedule_tti(0, &[0, 1], &mut macs, &la, &config, tti, 50);
        let mut served = [0u64; 2];
        for g in &d.grants {
            prbs[g.vehicle] += g.prbs.len() as u64;
            served[g.vehicle] += g.tb_bits;
            macs[g.vehicle].harq[g.process] = HarqProcess::idle(g.process);
        }
        for (m, s) in macs.iter_mut().zip(served) {
            m.update_pf(s, config.pf_horizon_tti);
        }
    }
    let share = prbs[0] as f64 / prbs[1] as f64;
    verdict(
        idle == 0 && (share - 1.0).abs() < 0.05 && over_drop == 0 && over_window == 0,
        format!(
            "{idle} idle-PRB violations over a dense drop, PF share ratio {share:.4}, \
             {over_drop} vehicles above the rate cap ({over_window} in the measured window)"
        ),
    )
}

fn cell(rows: &[&ResultsRow], config: &str, receiver: &str) -> f64 {
    rows.iter()
        .find(|r| r.config_label == config && r.receiver == receiver)
        .map(|r| r.target_prob)
        .unwrap_or(f64::NAN)
}

fn criterion_7(report: &BatchReport) -> Verdict {
    let rows = report.rows();
    let receivers = ["mrc", "lmmse", "lmmse+precoding"];
    let mut rows_ok = true;
    let mut table = Vec::new();
    for (label, ..) in DENSITIES {
        let v: Vec<f64> = receivers.iter().map(|r| cell(&rows, label, r)).collect();
        rows_ok &= v[0] <= v[1] && v[1] <= v[2];
        table.push(format!("{label} {:.3}/{:.3}/{:.3}", v[0], v[1], v[2]));
    }
    let mut columns_ok = true;
    for r in receivers {
        let v: Vec<f64> = DENSITIES.iter().map(|d| cell(&rows, d.0, r)).collect();
        columns_ok &= v.windows(2).all(|w| w[0] <= w[1]);
    }
    let sparse = cell(&rows, "[200 300]", "lmmse+precoding");
    let dense = cell(&rows, "[38 116]", "mrc");
    let parts = [
        ("a", rows_ok),
        ("b", columns_ok),
        ("c", sparse >= 0.90),
        ("d", dense <= 0.65),
    ];
    let failed: Vec<&str> = parts.iter().filter(|p| !p.1).map(|p| p.0).collect();
    verdict(
        failed.is_empty() && report.success(),
        format!(
            "{}; failing parts: {}",
            table.join(", "),
            if failed.is_empty() { "none".into() } else { failed.join(" ") }
        ),
    )
}

fn sorted_sinr(dir: &Path, label: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(dir.join(label).join(SINR_SAMPLES_FILE)).unwrap();
    let column = reader.headers().unwrap().iter().position(|h| h == "sinr_db").unwrap();
    let mut v: Vec<f64> = reader.records().map(|r| r.unwrap()[column].parse().unwrap()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn criterion_8(dir: &Path) -> Verdict {
    let mrc = sorted_sinr(dir, "sparse_mrc");
    let lmmse = sorted_sinr(dir, "sparse_lmmse");
    let precoded = sorted_sinr(dir, "sparse_lmmse_precoding");
    let median = |v: &[f64]| nearest_rank(v, 0.5);
    let p5 = nearest_rank(&lmmse, 0.05);
    let gap = median(&lmmse) - median(&mrc);
    let gain = median(&precoded) - median(&lmmse);
    let m = median(&lmmse);
    verdict(
        (m - 15.0).abs() <= 4.0 && (p5 - 2.0).abs() <= 4.0 && (gap - 3.0).abs() <= 1.5 && gain <= 1.0,
        format!(
            "LMMSE median {m:.2} dB, 5th percentile {p5:.2} dB, LMMSE−MRC median gap {gap:.2} dB, \
             precoding median gain {gain:.2} dB"
        ),
    )
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9(first: &Path, file: &ConfigFile, scratch: &Path) -> Verdict {
    let second = scratch.join("sequential");
    let options = BatchOptions {
        threads: Some(1),
        execution: Execution::Sequential,
        ..BatchOptions::default()
    };
    let report = run_batch(file, &options, &second).unwrap();
    let a = files_under(first);
    let b = files_under(&second);
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    verdict(
        report.success() && differing == 0 && !a.is_empty(),
        format!("{} CSV files, {differing} differ between 2 threads and 1 thread", a.len()),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and name filters come through here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if args.iter().any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }

    let file = parse_config(&default_config_path()).expect("shipped config parses");
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "deployment arithmetic", criterion_1()),
        (2, "PRB deficit", criterion_2()),
        (3, "receiver math oracles", criterion_3()),
        (4, "MIESM/FER properties", criterion_4()),
        (5, "HARQ", criterion_5()),
        (6, "scheduler", criterion_6(&file)),
    ];
    for (n, name, v) in &results {
        println!("criterion {n} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }

    let start = Instant::now();
    let first = scratch.path().join("parallel");
    let options = BatchOptions {
        threads: Some(2),
        execution: Execution::Parallel,
        ..BatchOptions::default()
    };
    let report = run_batch(&file, &options, &first).expect("batch runs");
    let batch_secs = start.elapsed().as_secs_f64();
    let late = [
        (7, "target probability trends", criterion_7(&report)),
        (8, "SINR trends", criterion_8(&first)),
        (9, "determinism", criterion_9(&first, &file, scratch.path())),
    ];
    for (n, name, v) in &late {
        println!("criterion {n} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    results.extend(late);
    println!("full batch: {batch_secs:.0} s");

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
