//! Large-scale (path loss + shadowing) and small-scale (tapped-delay-line
//! Rayleigh) channel generation for every RSU–vehicle link.

mod fading;
mod large_scale;

use serde::Deserialize;

use crate::error::{Error, Result};

pub use fading::{CMat2, DopplerPhasors, FadingModel, Link, TapGains, MAX_TAPS};
pub use large_scale::{LargeScaleMap, ShadowingParams};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub carrier_ghz: f64,
    pub shadowing_sigma_db: f64,
    pub decorr_m: f64,
    pub num_taps: usize,
    /// Delay of the last tap; taps are evenly spaced from zero.
    pub delay_spread_us: f64,
    pub tap_decay_db: f64,
    pub num_sinusoids: usize,
    pub noise_figure_db: f64,
    pub noise_density_dbm_hz: f64,
    pub tx_power_dbm: f64,
    pub num_prbs: usize,
    pub prb_bandwidth_hz: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.0,
            shadowing_sigma_db: 8.0,
            decorr_m: 50.0,
            num_taps: 6,
            delay_spread_us: 2.5,
            tap_decay_db: 3.0,
            num_sinusoids: 16,
            noise_figure_db: 9.0,
            noise_density_dbm_hz: -174.0,
            tx_power_dbm: 46.0,
            num_prbs: 50,
            prb_bandwidth_hz: 180_000.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_ghz > 0.0) {
            return Err(Error::config("channel.carrier_ghz", "must be positive"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("channel.shadowing_sigma_db", "must be non-negative"));
        }
        if !(self.decorr_m > 0.0) {
            return Err(Error::config("channel.decorr_m", "must be positive"));
        }
        if self.num_taps == 0 || self.num_taps > MAX_TAPS {
            return Err(Error::config(
                "channel.num_taps",
                format!("must be between 1 and {MAX_TAPS}"),
            ));
        }
        if !(self.delay_spread_us >= 0.0) {
            return Err(Error::config("channel.delay_spread_us", "must be non-negative"));
        }
        if self.num_sinusoids == 0 {
            return Err(Error::config("channel.num_sinusoids", "must be at least 1"));
        }
        if self.num_prbs == 0 {
            return Err(Error::config("channel.num_prbs", "must be at least 1"));
        }
        if !(self.prb_bandwidth_hz > 0.0) {
            return Err(Error::config("channel.prb_bandwidth_hz", "must be positive"));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            noise_density_dbm_hz: self.noise_density_dbm_hz,
            noise_figure_db: self.noise_figure_db,
            prb_bandwidth_hz: self.prb_bandwidth_hz,
        }
    }

    /// Transmit power per PRB with the total spread evenly over the band.
    pub fn prb_tx_power_dbm(&self) -> f64 {
        self.tx_power_dbm - 10.0 * (self.num_prbs as f64).log10()
    }

    pub fn shadowing(&self) -> ShadowingParams {
        ShadowingParams {
            sigma_db: self.shadowing_sigma_db,
            decorr_m: self.decorr_m,
        }
    }
}

/// `100.7 + 23.5 log10(d)` with `d` in kilometres.
pub fn path_loss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!("path loss distance must be positive, got {d_km} km")));
    }
    Ok(100.7 + 23.5 * d_km.log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub prb_bandwidth_hz: f64,
}

/// Thermal noise over one PRB plus the receiver noise figure.
pub fn noise_power_dbm(model: &NoiseModel) -> f64 {
    model.noise_density_dbm_hz + 10.0 * model.prb_bandwidth_hz.log10() + model.noise_figure_db
}

pub fn doppler_hz(speed_mps: f64, carrier_hz: f64) -> f64 {
    speed_mps * carrier_hz / SPEED_OF_LIGHT
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
