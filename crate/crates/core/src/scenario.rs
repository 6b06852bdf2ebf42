//! Highway geometry, vehicle deployment, mobility and cell association.
//!
//! The road is a torus of length `num_rsus × rsu_spacing`: vehicles leaving
//! one end re-enter at the other and distances to RSUs are measured the short
//! way around, so every RSU sees the same interference geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::channel::{path_loss_db, LargeScaleMap};
use crate::error::{Error, Result};
use crate::rng::{hash_key, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RsuId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighwayConfig {
    #[serde(rename = "lanes")]
    pub num_lanes: usize,
    #[serde(rename = "lane_width_m")]
    pub lane_width: f64,
    #[serde(rename = "rsu_spacing_m")]
    pub rsu_spacing: f64,
    /// Lateral distance from the nearest lane edge to the RSU.
    #[serde(rename = "rsu_offset_m")]
    pub rsu_offset: f64,
    pub num_rsus: usize,
    pub speed_kmh: f64,
    #[serde(rename = "gap_min_m")]
    pub min_gap: f64,
    #[serde(rename = "gap_max_m")]
    pub max_gap: f64,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        Self {
            num_lanes: 6,
            lane_width: 4.0,
            rsu_spacing: 1732.0,
            rsu_offset: 35.0,
            num_rsus: 7,
            speed_kmh: 140.0,
            min_gap: 200.0,
            max_gap: 300.0,
        }
    }
}

impl HighwayConfig {
    pub fn road_length(&self) -> f64 {
        self.num_rsus as f64 * self.rsu_spacing
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn mean_gap(&self) -> f64 {
        0.5 * (self.min_gap + self.max_gap)
    }

    pub fn middle_rsu(&self) -> RsuId {
        RsuId(self.num_rsus / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_lanes == 0 {
            return Err(Error::config("scenario.lanes", "must be at least 1"));
        }
        if self.num_rsus == 0 {
            return Err(Error::config("scenario.num_rsus", "must be at least 1"));
        }
        if !(self.rsu_spacing > 0.0) {
            return Err(Error::config("scenario.rsu_spacing_m", "must be positive"));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::config("scenario.lane_width_m", "must be positive"));
        }
        if !(self.rsu_offset >= 0.0) {
            return Err(Error::config("scenario.rsu_offset_m", "must be non-negative"));
        }
        if !(self.speed_kmh >= 0.0) {
            return Err(Error::config("scenario.speed_kmh", "must be non-negative"));
        }
        if !(self.min_gap > 0.0) {
            return Err(Error::config("scenario.gap_min_m", "must be positive"));
        }
        if !(self.min_gap <= self.max_gap) {
            return Err(Error::config(
                "scenario.gap_min_m",
                format!("gap_min_m ({}) exceeds gap_max_m ({})", self.min_gap, self.max_gap),
            ));
        }
        if self.max_gap >= self.road_length() {
            return Err(Error::config("scenario.gap_max_m", "must be shorter than the road"));
        }
        Ok(())
    }

    /// Lateral coordinate of a lane centre; the RSU row sits at `-rsu_offset`.
    pub fn lane_y(&self, lane: usize) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }

    /// Lanes `1..=n/2` move forward (+x), the rest backward.
    pub fn lane_direction(&self, lane: usize) -> Direction {
        if lane * 2 <= self.num_lanes.max(2) {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rsu {
    pub id: RsuId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    /// 1-based lane index.
    pub lane: usize,
    pub position: f64,
    pub direction: Direction,
    pub serving_rsu: RsuId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    pub config: HighwayConfig,
    pub rsus: Vec<Rsu>,
    pub vehicles: Vec<Vehicle>,
}

/// Places RSUs and vehicles. Vehicles are initially associated on distance
/// alone; callers holding a [`LargeScaleMap`] re-run [`ScenarioState::associate`]
/// to fold shadowing in.
pub fn deploy(config: &HighwayConfig, seed: u64) -> Result<ScenarioState> {
    config.validate()?;
    let length = config.road_length();
    let rsus = (0..config.num_rsus)
        .map(|b| Rsu {
            id: RsuId(b),
            x: (b as f64 + 0.5) * config.rsu_spacing,
            y: -config.rsu_offset,
        })
        .collect::<Vec<_>>();

    let mut rng = ChaCha8Rng::seed_from_u64(hash_key(&[stream::DEPLOY, seed]));
    let mut vehicles = Vec::new();
    for lane in 1..=config.num_lanes {
        let direction = config.lane_direction(lane);
        let start = rng.random::<f64>() * config.max_gap;
        // The wrap-around gap back to the first vehicle must stay >= min_gap.
        let limit = start + length - config.min_gap;
        let mut x = start;
        while x <= limit {
            vehicles.push(Vehicle {
                id: VehicleId(vehicles.len()),
                lane,
                position: x.rem_euclid(length),
                direction,
                serving_rsu: RsuId(0),
            });
            x += draw_gap(&mut rng, config);
        }
    }

    let mut state = ScenarioState {
        config: config.clone(),
        rsus,
        vehicles,
    };
    for v in 0..state.vehicles.len() {
        let best = (0..state.rsus.len())
            .map(|b| {
                let d = state.distance_m(RsuId(b), VehicleId(v));
                (b, path_loss_db(d / 1000.0).expect("distance is positive"))
            })
            .fold((0usize, f64::INFINITY), |acc, (b, pl)| if pl < acc.1 { (b, pl) } else { acc });
        state.vehicles[v].serving_rsu = RsuId(best.0);
    }
    Ok(state)
}

fn draw_gap(rng: &mut ChaCha8Rng, config: &HighwayConfig) -> f64 {
    if config.max_gap > config.min_gap {
        rng.random_range(config.min_gap..=config.max_gap)
    } else {
        config.min_gap
    }
}

impl ScenarioState {
    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn num_rsus(&self) -> usize {
        self.rsus.len()
    }

    /// Euclidean RSU–vehicle distance in metres, taking the short way
    /// around the torus along the road.
    pub fn distance_m(&self, rsu: RsuId, vehicle: VehicleId) -> f64 {
        let r = &self.rsus[rsu.0];
        let v = &self.vehicles[vehicle.0];
        let length = self.config.road_length();
        let raw = (v.position - r.x).abs().rem_euclid(length);
        let dx = raw.min(length - raw);
        let dy = self.config.lane_y(v.lane) - r.y;
        dx.hypot(dy)
    }

    pub fn advance_mobility(&self, dt_s: f64) -> ScenarioState {
        let mut next = self.clone();
        if dt_s <= 0.0 {
            return next;
        }
        let length = self.config.road_length();
        let step = self.config.speed_mps() * dt_s;
        for v in &mut next.vehicles {
            v.position = (v.position + v.direction.sign() * step).rem_euclid(length);
            // rem_euclid can round up to exactly `length`
            if v.position >= length {
                v.position -= length;
            }
        }
        next
    }

    /// Serving RSU = argmax of large-scale gain (i.e. argmin of path loss
    /// plus shadowing); ties go to the lowest RSU id.
    pub fn associate(&self, large_scale: &LargeScaleMap) -> ScenarioState {
        let mut next = self.clone();
        for v in &mut next.vehicles {
            let mut best = RsuId(0);
            let mut best_gain = f64::NEG_INFINITY;
            for b in 0..self.rsus.len() {
                let g = large_scale.gain_db(RsuId(b), v.id);
                if g > best_gain {
                    best_gain = g;
                    best = RsuId(b);
                }
            }
            v.serving_rsu = best;
        }
        next
    }

    pub fn vehicles_of(&self, rsu: RsuId) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.iter().filter(move |v| v.serving_rsu == rsu)
    }

    pub fn lane_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.config.num_lanes];
        for v in &self.vehicles {
            counts[v.lane - 1] += 1;
        }
        counts
    }
}
