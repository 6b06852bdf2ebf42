//! Receive combining and post-combining SINR.
//!
//! Two-antenna vehicles combine with either MRC (`w = h`) or LMMSE
//! (`W = (H Hᴴ + R)⁻¹ H`, with `R` the genie interference-plus-noise
//! covariance). Two-antenna RSUs transmit a single stream through the
//! 4-entry rank-1 codebook.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{CMat2, FadingModel, TapGains};
use crate::error::{Error, Result};
use crate::rng::{hash_key, stream};

pub type CVec2 = Vector2<Complex64>;

pub const CODEBOOK_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Mrc,
    Lmmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Every other RSU transmits on every PRB.
    FullBuffer,
    /// Other RSUs interfere only on PRBs they used in the previous TTI.
    LoadCoupled,
    /// Noise only.
    Off,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub receiver: ReceiverKind,
    #[serde(deserialize_with = "on_off")]
    pub precoding: bool,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub interference: InterferenceMode,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            receiver: ReceiverKind::Mrc,
            precoding: false,
            tx_antennas: 1,
            rx_antennas: 2,
            interference: InterferenceMode::FullBuffer,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rx_antennas != 2 {
            return Err(Error::config("phy.rx_antennas", "only 2 receive antennas are supported"));
        }
        if !(1..=2).contains(&self.tx_antennas) {
            return Err(Error::config("phy.tx_antennas", "must be 1 or 2"));
        }
        if self.precoding && self.tx_antennas != 2 {
            return Err(Error::config("phy.precoding", "precoding requires tx_antennas = 2"));
        }
        Ok(())
    }

    /// Short name used in result tables: `mrc`, `lmmse`, `lmmse+precoding`.
    pub fn label(&self) -> String {
        let base = match self.receiver {
            ReceiverKind::Mrc => "mrc",
            ReceiverKind::Lmmse => "lmmse",
        };
        if self.precoding {
            format!("{base}+precoding")
        } else {
            base.to_string()
        }
    }
}

pub(crate) fn on_off<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Text(String),
    }
    match Flag::deserialize(d)? {
        Flag::Bool(b) => Ok(b),
        Flag::Text(s) => match s.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected `on` or `off`, got `{other}`"))),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrecoderIndex(pub usize);

/// `(1/√2)·[1, 1]`, `[1, −1]`, `[1, j]`, `[1, −j]`.
pub fn codebook() -> [CVec2; CODEBOOK_SIZE] {
    let s = Complex64::from(FRAC_1_SQRT_2);
    let j = Complex64::new(0.0, 1.0);
    [
        CVec2::new(s, s),
        CVec2::new(s, -s),
        CVec2::new(s, s * j),
        CVec2::new(s, -s * j),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverWeights {
    pub w: CVec2,
    pub kind: ReceiverKind,
}

/// Interference-plus-noise covariance of one PRB. Hermitian positive
/// definite whenever the noise floor is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate(pub CMat2);

impl CovarianceEstimate {
    pub fn white(n0: f64) -> Self {
        CovarianceEstimate(CMat2::identity() * Complex64::from(n0))
    }

    /// `Σ pᵢ gᵢ gᵢᴴ + n0 I`.
    pub fn from_interferers(interferers: &[(CVec2, f64)], n0: f64) -> Self {
        let mut r = Self::white(n0);
        for (g, p) in interferers {
            r.add_rank_one(g, *p);
        }
        r
    }

    #[inline]
    pub fn add_rank_one(&mut self, g: &CVec2, power: f64) {
        let a = g[0];
        let b = g[1];
        self.0[(0, 0)] += Complex64::from(power * a.norm_sqr());
        self.0[(1, 1)] += Complex64::from(power * b.norm_sqr());
        let off = a * b.conj() * power;
        self.0[(0, 1)] += off;
        self.0[(1, 0)] += off.conj();
    }

    /// Closed-form inverse of the 2×2 Hermitian matrix.
    pub fn inverse(&self) -> Result<CMat2> {
        hermitian_inverse(&self.0)
    }

    /// `vᴴ R v`.
    #[inline]
    pub fn quadratic(&self, v: &CVec2) -> f64 {
        quadratic_form(&self.0, v)
    }
}

#[inline]
fn quadratic_form(m: &CMat2, v: &CVec2) -> f64 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    a * v[0].norm_sqr() + d * v[1].norm_sqr() + 2.0 * (v[0].conj() * b * v[1]).re
}

fn hermitian_inverse(m: &CMat2) -> Result<CMat2> {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let det = a * d - b.norm_sqr();
    if !(det > 0.0) || !det.is_finite() || !(a > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let inv_det = 1.0 / det;
    Ok(CMat2::new(
        Complex64::from(d * inv_det),
        -b * inv_det,
        -b.conj() * inv_det,
        Complex64::from(a * inv_det),
    ))
}

/// SINR of an arbitrary combiner: `|wᴴh|² / (wᴴ R w)` where `R` excludes
/// the desired signal.
pub fn post_combining_sinr(w: &CVec2, h: &CVec2, cov: &CovarianceEstimate) -> f64 {
    let signal = w.dotc(h).norm_sqr();
    let denom = cov.quadratic(w);
    if signal == 0.0 {
        0.0
    } else {
        signal / denom
    }
}

/// MRC with `w = h_desired`, interferers given as `(channel, power)`.
pub fn mrc_sinr(h_desired: &CVec2, interferers: &[(CVec2, f64)], n0: f64, p_tx: f64) -> f64 {
    let norm2 = h_desired.norm_squared();
    if norm2 == 0.0 {
        return 0.0;
    }
    let interference: f64 = interferers
        .iter()
        .map(|(g, p)| h_desired.dotc(g).norm_sqr() * p)
        .sum();
    norm2 * norm2 * p_tx / (interference + norm2 * n0)
}

/// `W = (h hᴴ + R)⁻¹ h`; `h` already carries the transmit amplitude.
pub fn lmmse_weights(h_desired: &CVec2, cov: &CovarianceEstimate) -> Result<ReceiverWeights> {
    let mut total = *cov;
    total.add_rank_one(h_desired, 1.0);
    let inv = total.inverse()?;
    Ok(ReceiverWeights {
        w: inv * h_desired,
        kind: ReceiverKind::Lmmse,
    })
}

pub fn lmmse_sinr(h_desired: &CVec2, cov: &CovarianceEstimate) -> Result<f64> {
    let weights = lmmse_weights(h_desired, cov)?;
    Ok(post_combining_sinr(&weights.w, h_desired, cov))
}

/// Post-combining SINR for either receiver against a known covariance.
/// LMMSE uses the equivalent closed form `hᴴ R⁻¹ h`.
#[inline]
pub fn receiver_sinr(kind: ReceiverKind, h: &CVec2, cov: &CovarianceEstimate, cov_inv: &CMat2) -> f64 {
    match kind {
        ReceiverKind::Mrc => {
            let norm2 = h.norm_squared();
            if norm2 == 0.0 {
                0.0
            } else {
                norm2 * norm2 / cov.quadratic(h)
            }
        }
        ReceiverKind::Lmmse => quadratic_form(cov_inv, h).max(0.0),
    }
}

/// Codeword maximising the SINR averaged over the given PRBs.
/// `effective[p][k]` is the desired channel on PRB `p` through codeword `k`.
/// Ties resolve to the lowest index.
pub fn select_precoder(
    effective: &[[CVec2; CODEBOOK_SIZE]],
    covs: &[CovarianceEstimate],
    receiver: ReceiverKind,
) -> Result<PrecoderIndex> {
    let mut sums = [0.0; CODEBOOK_SIZE];
    for (per_codeword, cov) in effective.iter().zip(covs) {
        let inv = cov.inverse()?;
        for (k, h) in per_codeword.iter().enumerate() {
            sums[k] += receiver_sinr(receiver, h, cov, &inv);
        }
    }
    Ok(PrecoderIndex(argmax_first(&sums)))
}

pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Large-scale amplitude and tap gains of one RSU → vehicle link at one TTI.
#[derive(Debug, Clone, Copy)]
pub struct LinkSnapshot {
    pub rsu: usize,
    /// `sqrt(p_prb · g / n0)`: noise is normalised to one.
    pub amplitude: f64,
    pub taps: TapGains,
}

/// All links seen by one vehicle at one TTI; `links[0]` is the serving RSU.
#[derive(Debug, Clone)]
pub struct VehicleChannels {
    pub links: Vec<LinkSnapshot>,
}

/// Fixed per-run PHY parameters.
#[derive(Debug, Clone, Copy)]
pub struct PhyContext<'a> {
    pub fading: &'a FadingModel,
    pub receiver: ReceiverKind,
    pub tx_antennas: usize,
    pub seed: u64,
}

impl PhyContext<'_> {
    /// Codeword an interfering two-antenna RSU happens to use on a PRB;
    /// uniform over the codebook and fixed by `(seed, rsu, prb, tti)`.
    pub fn interferer_codeword(&self, rsu: usize, prb: usize, tti: u64) -> usize {
        (hash_key(&[stream::INTERFERER_PMI, self.seed, rsu as u64, prb as u64, tti]) % CODEBOOK_SIZE as u64)
            as usize
    }

    fn effective(&self, h: &CMat2, precoder: &CVec2) -> CVec2 {
        if self.tx_antennas == 1 {
            h.column(0).into_owned()
        } else {
            h * precoder
        }
    }

    /// Desired channel matrix and interference covariance on one PRB.
    /// `active(rsu, prb)` says whether an interferer transmits there.
    pub fn prb_terms(
        &self,
        channels: &VehicleChannels,
        prb: usize,
        tti: u64,
        active: &dyn Fn(usize, usize) -> bool,
    ) -> (CMat2, CovarianceEstimate) {
        let book = codebook();
        let serving = &channels.links[0];
        let desired = self.fading.response(&serving.taps, prb) * Complex64::from(serving.amplitude);
        let mut cov = CovarianceEstimate::white(1.0);
        for link in &channels.links[1..] {
            if !active(link.rsu, prb) {
                continue;
            }
            let h = self.fading.response(&link.taps, prb) * Complex64::from(link.amplitude);
            let f = &book[if self.tx_antennas == 2 {
                self.interferer_codeword(link.rsu, prb, tti)
            } else {
                0
            }];
            cov.add_rank_one(&self.effective(&h, f), 1.0);
        }
        (desired, cov)
    }

    /// Linear SINR on each requested PRB with the serving RSU using
    /// codeword `precoder` (ignored for one transmit antenna).
    pub fn per_prb_sinr(
        &self,
        channels: &VehicleChannels,
        prbs: &[usize],
        precoder: PrecoderIndex,
        tti: u64,
        active: &dyn Fn(usize, usize) -> bool,
    ) -> Vec<f64> {
        let f = codebook()[precoder.0];
        prbs.iter()
            .map(|&prb| {
                let (desired, cov) = self.prb_terms(channels, prb, tti, active);
                let inv = cov.inverse().expect("unit noise floor keeps R invertible");
                receiver_sinr(self.receiver, &self.effective(&desired, &f), &cov, &inv)
            })
            .collect()
    }

    /// SINR on every PRB for every codeword, `out[prb][k]`. With one
    /// transmit antenna all four columns are equal.
    pub fn sinr_all_codewords(
        &self,
        channels: &VehicleChannels,
        tti: u64,
        active: &dyn Fn(usize, usize) -> bool,
    ) -> Vec<[f64; CODEBOOK_SIZE]> {
        let book = codebook();
        (0..self.fading.num_prbs())
            .map(|prb| {
                let (desired, cov) = self.prb_terms(channels, prb, tti, active);
                let inv = cov.inverse().expect("unit noise floor keeps R invertible");
                if self.tx_antennas == 1 {
                    let s = receiver_sinr(self.receiver, &desired.column(0).into_owned(), &cov, &inv);
                    [s; CODEBOOK_SIZE]
                } else {
                    book.map(|f| receiver_sinr(self.receiver, &(desired * f), &cov, &inv))
                }
            })
            .collect()
    }
}
