use v2xsim::batch::run_experiments;
use v2xsim::config::{default_config_path, parse_config, Experiment, SimConfig};
use v2xsim::engine::{run_drop, DropSim, RunOptions};
use v2xsim::l2s::tb_size;
use v2xsim::par::{with_threads, Execution};
use v2xsim::phy::InterferenceMode;
use v2xsim::scenario::{deploy, RsuId, VehicleId};

fn experiment(label: &str) -> Experiment {
    parse_config(&default_config_path())
        .unwrap()
        .experiments
        .into_iter()
        .find(|e| e.spec.label == label)
        .unwrap()
}

fn config(label: &str, ttis: u64) -> SimConfig {
    let mut c = experiment(label).config;
    c.engine.ttis_per_drop = ttis;
    c
}

const CHECKED: RunOptions = RunOptions {
    debug_checks: true,
    record_sinr: true,
};

#[test]
fn same_seed_same_drop() {
    let c = config("dense_lmmse_precoding", 300);
    let a = run_drop(&c, 1, RunOptions::default()).unwrap();
    let b = run_drop(&c, 1, RunOptions::default()).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.diagnostics, b.diagnostics);
    let other = run_drop(&c, 2, RunOptions::default()).unwrap();
    assert_ne!(a.metrics.sinr_samples, other.metrics.sinr_samples);
}

#[test]
fn isolated_vehicle_gets_its_full_rate() {
    let mut c = config("sparse_mrc", 2000);
    c.phy.interference = InterferenceMode::Off;
    c.channel.shadowing_sigma_db = 0.0;
    let mut state = deploy(&c.scenario, 4).unwrap();
    let middle = c.scenario.middle_rsu();
    let mut v = state.vehicles[0].clone();
    v.id = VehicleId(0);
    v.lane = 2;
    v.position = state.rsus[middle.0].x - 30.0;
    state.vehicles = vec![v];
    let mut sim = DropSim::from_state(&c, state, 4, 0, CHECKED).unwrap();
    for _ in 0..c.engine.ttis_per_drop {
        sim.step();
    }
    assert_eq!(sim.state().vehicles[0].serving_rsu, middle);
    let mac = sim.macs()[0].clone();
    let result = sim.finish();
    let record = result.metrics.vehicles[0];
    assert_eq!(record.measured_ttis, 2000);
    assert!(record.achieved_target, "{} kb/s", record.mean_thr_kbps());
    assert!(record.mean_thr_kbps() <= 128.0);
    assert_eq!(mac.arrived_bits, 128 * 2000);
    assert_eq!(result.diagnostics.dropped_tbs, 0);
}

#[test]
fn full_drop_invariants() {
    let c = config("medium_lmmse", 2000);
    let result = run_drop(&c, 0, CHECKED).unwrap();
    let d = &result.diagnostics;
    assert_eq!(d.ttis, 2000);
    assert_eq!(d.work_conservation_violations, 0);
    assert_eq!(d.orthogonality_violations, 0);
    assert_eq!(d.ledger_violations, 0);
    assert_eq!(d.early_retransmissions, 0);
    assert!(d.new_transmissions > 0 && d.retransmissions > 0);
}

#[test]
fn delivered_rate_never_exceeds_offered_load() {
    let c = config("sparse_lmmse", 1000);
    let mut sim = DropSim::new(&c, 3, RunOptions::default()).unwrap();
    for _ in 0..1000 {
        sim.step();
    }
    let quantum = tb_size(c.channel.num_prbs, sim.link_adaptation().table().entry(15).efficiency()).unwrap();
    for m in sim.macs() {
        assert!(m.delivered_bits <= 128 * 1000);
        assert_eq!(m.arrived_bits, 128 * 1000);
    }
    for r in &sim.finish().metrics.vehicles {
        let cap = 128.0 + quantum as f64 / r.measured_ttis as f64;
        assert!(r.mean_thr_kbps() <= cap, "vehicle {}: {}", r.vehicle, r.mean_thr_kbps());
    }
}

#[test]
fn stepping_reports_every_grant() {
    let c = config("fixed_mrc", 50);
    let mut sim = DropSim::new(&c, 0, CHECKED).unwrap();
    for t in 0..50 {
        let trace = sim.step();
        assert_eq!(trace.tti, t);
        assert_eq!(trace.decisions.len(), c.scenario.num_rsus);
        let grants: usize = trace.decisions.iter().map(|d| d.grants.len()).sum();
        assert_eq!(grants, trace.outcomes.len());
        for d in &trace.decisions {
            for g in &d.grants {
                assert_eq!(sim.state().vehicles[g.vehicle].serving_rsu, RsuId(d.rsu));
            }
        }
    }
    assert_eq!(sim.tti(), 50);
}

#[test]
fn drops_do_not_depend_on_their_neighbours() {
    let mut e = experiment("fixed_lmmse");
    e.config.engine.ttis_per_drop = 200;
    e.config.engine.num_drops = 3;
    let together = run_experiments(std::slice::from_ref(&e), Execution::Sequential, RunOptions::default());
    let together = together.into_iter().next().unwrap().unwrap();
    let alone = run_drop(&e.config, 2, RunOptions::default()).unwrap().metrics;
    assert_eq!(together[2], alone);
    let parallel = with_threads(Some(3), || {
        run_experiments(std::slice::from_ref(&e), Execution::Parallel, RunOptions::default())
    });
    assert_eq!(parallel.into_iter().next().unwrap().unwrap(), together);
}

#[test]
fn interference_lowers_sinr() {
    let mut quiet = config("dense_mrc", 60);
    quiet.phy.interference = InterferenceMode::Off;
    let loud = config("dense_mrc", 60);
    let median = |c: &SimConfig| {
        let mut s: Vec<f64> = run_drop(c, 0, RunOptions::default())
            .unwrap()
            .metrics
            .sinr_samples
            .iter()
            .map(|x| x.sinr_db)
            .collect();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    assert!(median(&quiet) > median(&loud) + 10.0);
}

#[test]
fn measured_vehicles_are_served_by_the_middle_rsu() {
    let c = config("sparse_mrc", 500);
    let m = run_drop(&c, 0, RunOptions::default()).unwrap().metrics;
    assert!(!m.vehicles.is_empty());
    assert!(m.vehicles.iter().all(|v| v.rsu == 3 && v.measured_ttis >= 250));
    assert!(m.sinr_samples.iter().all(|s| s.rsu == 3));
    let state = deploy(&c.scenario, c.engine.drop_seed(0)).unwrap();
    assert!(state.distance_m(RsuId(3), VehicleId(0)) > 0.0);
}
