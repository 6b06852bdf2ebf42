use rand::Rng;
use rand_distr::StandardNormal;

use super::path_loss_db;
use crate::scenario::{RsuId, ScenarioState, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingParams {
    pub sigma_db: f64,
    pub decorr_m: f64,
}

/// Per-link large-scale gain `-(path loss + shadowing)` in dB.
///
/// Shadowing on each link is a Gauss–Markov process in the distance the
/// vehicle has travelled: after moving `Δ` metres the correlation with the
/// previous value is `exp(-Δ / decorr_m)`. Links to different RSUs are
/// independent.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleMap {
    num_rsus: usize,
    gain_db: Vec<f64>,
    shadow_db: Vec<f64>,
    positions: Vec<f64>,
    params: ShadowingParams,
    pub last_update_ms: u64,
}

impl LargeScaleMap {
    /// Fresh, independent shadowing draw for every link.
    pub fn initial<R: Rng>(state: &ScenarioState, params: ShadowingParams, rng: &mut R) -> Self {
        let num_rsus = state.num_rsus();
        let shadow_db = (0..state.num_vehicles() * num_rsus)
            .map(|_| params.sigma_db * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut map = Self {
            num_rsus,
            gain_db: Vec::new(),
            shadow_db,
            positions: state.vehicles.iter().map(|v| v.position).collect(),
            params,
            last_update_ms: 0,
        };
        map.recompute_gains(state);
        map
    }

    /// Advances every link's shadowing by the displacement since the last
    /// update and re-evaluates path loss at the new positions.
    pub fn update_shadowing<R: Rng>(&self, state: &ScenarioState, rng: &mut R, now_ms: u64) -> Self {
        let length = state.config.road_length();
        let mut next = self.clone();
        for (v, vehicle) in state.vehicles.iter().enumerate() {
            let raw = (vehicle.position - self.positions[v]).abs().rem_euclid(length);
            let moved = raw.min(length - raw);
            let rho = (-moved / self.params.decorr_m).exp();
            let innovation = self.params.sigma_db * (1.0 - rho * rho).max(0.0).sqrt();
            for b in 0..self.num_rsus {
                let i = v * self.num_rsus + b;
                let z: f64 = rng.sample(StandardNormal);
                next.shadow_db[i] = rho * self.shadow_db[i] + innovation * z;
            }
            next.positions[v] = vehicle.position;
        }
        next.last_update_ms = now_ms;
        next.recompute_gains(state);
        next
    }

    fn recompute_gains(&mut self, state: &ScenarioState) {
        self.gain_db = (0..state.num_vehicles())
            .flat_map(|v| (0..self.num_rsus).map(move |b| (v, b)))
            .map(|(v, b)| {
                let d_km = state.distance_m(RsuId(b), VehicleId(v)) / 1000.0;
                -(path_loss_db(d_km).expect("rsu offset keeps distance positive")
                    + self.shadow_db[v * self.num_rsus + b])
            })
            .collect();
    }

    pub fn gain_db(&self, rsu: RsuId, vehicle: VehicleId) -> f64 {
        self.gain_db[vehicle.0 * self.num_rsus + rsu.0]
    }

    pub fn shadowing_db(&self, rsu: RsuId, vehicle: VehicleId) -> f64 {
        self.shadow_db[vehicle.0 * self.num_rsus + rsu.0]
    }

    pub fn num_rsus(&self) -> usize {
        self.num_rsus
    }

    pub fn num_vehicles(&self) -> usize {
        self.positions.len()
    }

    /// Overrides one link's shadowing; mostly for tests and what-if runs.
    pub fn set_shadowing_db(&mut self, state: &ScenarioState, rsu: RsuId, vehicle: VehicleId, value: f64) {
        self.shadow_db[vehicle.0 * self.num_rsus + rsu.0] = value;
        self.recompute_gains(state);
    }
}
