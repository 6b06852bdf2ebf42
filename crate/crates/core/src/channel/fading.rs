use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::{doppler_hz, ChannelConfig};
use crate::rng::{hash_key, mix64, stream};

pub const MAX_TAPS: usize = 16;

/// 2×2 complex matrix: rows are receive antennas, columns transmit antennas.
/// Single-antenna transmitters leave column 1 at zero.
pub type CMat2 = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Link {
    pub rsu: usize,
    pub vehicle: usize,
}

/// Complex tap gains of one link at one instant, indexed `[rx][tx][tap]`,
/// each with unit mean power.
#[derive(Debug, Clone, Copy)]
pub struct TapGains {
    pub tx_antennas: usize,
    pub gains: [[[Complex64; MAX_TAPS]; 2]; 2],
}

/// Random rotations of the arrival-angle set are drawn from this many
/// evenly spaced values, so every arrival angle lies on a grid of
/// `num_sinusoids × ROTATIONS` points around the circle.
const ROTATIONS: usize = 64;
const PHASE_BITS: u32 = 12;

/// Tapped-delay-line Rayleigh fading with a classical (Jakes) Doppler
/// spectrum.
///
/// Every tap of every antenna pair is a sum of `M` complex sinusoids whose
/// arrival angles are evenly spread around the circle with a random
/// rotation, each with an independent random phase. All randomness is
/// hashed from `(seed, link, antenna pair, tap)`, so a coefficient is a pure
/// function of its key and the TTI.
///
/// Rotations and phases are quantised (64 rotations, 4096 phases) so that
/// the Doppler phasors of one TTI can be tabulated once and shared by all
/// links.
#[derive(Debug, Clone)]
pub struct FadingModel {
    seed: u64,
    num_taps: usize,
    num_sinusoids: usize,
    doppler_hz: f64,
    num_prbs: usize,
    /// `sqrt(P_l) · exp(-j 2π f_prb τ_l)`, row-major by PRB.
    prb_phasors: Vec<Complex64>,
    /// `exp(j 2π k / 4096)`.
    phase_table: Vec<Complex64>,
}

/// `exp(j ω t cos(2π (64 i + k) / (64 M)))` for one TTI, laid out by
/// rotation `k`, then sinusoid `i`.
#[derive(Debug, Clone)]
pub struct DopplerPhasors {
    tti: u64,
    table: Vec<Complex64>,
}

impl DopplerPhasors {
    pub fn tti(&self) -> u64 {
        self.tti
    }
}

impl FadingModel {
    pub fn new(config: &ChannelConfig, speed_mps: f64, seed: u64) -> Self {
        Self::with_params(
            config.num_taps,
            config.delay_spread_us,
            config.tap_decay_db,
            config.num_sinusoids,
            doppler_hz(speed_mps, config.carrier_ghz * 1e9),
            config.num_prbs,
            config.prb_bandwidth_hz,
            seed,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_params(
        num_taps: usize,
        delay_spread_us: f64,
        tap_decay_db: f64,
        num_sinusoids: usize,
        doppler_hz: f64,
        num_prbs: usize,
        prb_bandwidth_hz: f64,
        seed: u64,
    ) -> Self {
        assert!((1..=MAX_TAPS).contains(&num_taps));
        assert!(num_sinusoids >= 1);
        let powers: Vec<f64> = (0..num_taps)
            .map(|l| 10f64.powf(-tap_decay_db * l as f64 / 10.0))
            .collect();
        let total: f64 = powers.iter().sum();
        let delays_s: Vec<f64> = (0..num_taps)
            .map(|l| {
                if num_taps > 1 {
                    delay_spread_us * 1e-6 * l as f64 / (num_taps - 1) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let centre = 0.5 * (num_prbs as f64 - 1.0);
        let mut prb_phasors = Vec::with_capacity(num_prbs * num_taps);
        for p in 0..num_prbs {
            let f = (p as f64 - centre) * prb_bandwidth_hz;
            for l in 0..num_taps {
                let amp = (powers[l] / total).sqrt();
                prb_phasors.push(Complex64::from_polar(amp, -TAU * f * delays_s[l]));
            }
        }
        let phases = 1usize << PHASE_BITS;
        let phase_table = (0..phases)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / phases as f64))
            .collect();
        Self {
            seed,
            num_taps,
            num_sinusoids,
            doppler_hz,
            num_prbs,
            prb_phasors,
            phase_table,
        }
    }

    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn num_prbs(&self) -> usize {
        self.num_prbs
    }

    /// Doppler rotations shared by every link at one TTI (1 ms grid).
    pub fn doppler_phasors(&self, tti: u64) -> DopplerPhasors {
        let m = self.num_sinusoids;
        let grid = m * ROTATIONS;
        let omega_t = TAU * self.doppler_hz * tti as f64 * 1e-3;
        let half: Vec<Complex64> = (0..=grid / 2)
            .map(|n| Complex64::from_polar(1.0, omega_t * (TAU * n as f64 / grid as f64).cos()))
            .collect();
        let mut table = Vec::with_capacity(grid);
        for k in 0..ROTATIONS {
            for i in 0..m {
                let n = i * ROTATIONS + k;
                table.push(half[if n > grid / 2 { grid - n } else { n }]);
            }
        }
        DopplerPhasors { tti, table }
    }

    fn link_key(&self, link: Link) -> u64 {
        hash_key(&[stream::FADING, self.seed, link.rsu as u64, link.vehicle as u64])
    }

    fn tap_key(link_key: u64, rx: usize, tx: usize, tap: usize) -> u64 {
        mix64(link_key ^ (((rx * 2 + tx) * MAX_TAPS + tap + 1) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn sum_of_sinusoids(&self, key: u64, doppler: &DopplerPhasors) -> Complex64 {
        let m = self.num_sinusoids;
        let rotation = (key % ROTATIONS as u64) as usize;
        let rot = &doppler.table[rotation * m..(rotation + 1) * m];
        let mask = (1u64 << PHASE_BITS) - 1;
        let per_word = (64 / PHASE_BITS) as usize;
        let (mut re, mut im) = (0.0, 0.0);
        let mut h = key;
        for chunk in rot.chunks(per_word) {
            h = mix64(h);
            let mut bits = h;
            for d in chunk {
                let p = self.phase_table[(bits & mask) as usize];
                bits >>= PHASE_BITS;
                re += p.re * d.re - p.im * d.im;
                im += p.re * d.im + p.im * d.re;
            }
        }
        Complex64::new(re, im) / (m as f64).sqrt()
    }

    /// One unit-power tap coefficient at a given TTI.
    pub fn tap_gain(&self, link: Link, rx: usize, tx: usize, tap: usize, tti: u64) -> Complex64 {
        let doppler = self.doppler_phasors(tti);
        self.sum_of_sinusoids(Self::tap_key(self.link_key(link), rx, tx, tap), &doppler)
    }

    pub fn tap_gains(&self, link: Link, tti: u64, tx_antennas: usize) -> TapGains {
        self.tap_gains_at(&self.doppler_phasors(tti), link, tx_antennas)
    }

    /// [`FadingModel::tap_gains`] with the TTI's Doppler table supplied.
    pub fn tap_gains_at(&self, doppler: &DopplerPhasors, link: Link, tx_antennas: usize) -> TapGains {
        let mut out = TapGains {
            tx_antennas,
            gains: [[[Complex64::new(0.0, 0.0); MAX_TAPS]; 2]; 2],
        };
        let link_key = self.link_key(link);
        for rx in 0..2 {
            for tx in 0..tx_antennas {
                for l in 0..self.num_taps {
                    let key = Self::tap_key(link_key, rx, tx, l);
                    out.gains[rx][tx][l] = self.sum_of_sinusoids(key, doppler);
                }
            }
        }
        out
    }

    /// Frequency response at the PRB centre, unit mean power per entry.
    pub fn response(&self, taps: &TapGains, prb: usize) -> CMat2 {
        let row = &self.prb_phasors[prb * self.num_taps..(prb + 1) * self.num_taps];
        let mut m = CMat2::zeros();
        for rx in 0..2 {
            for tx in 0..taps.tx_antennas {
                let g = &taps.gains[rx][tx];
                m[(rx, tx)] = row.iter().zip(g).map(|(p, g)| p * g).sum();
            }
        }
        m
    }

    /// Channel matrix of a link on one PRB, scaled so each entry's mean
    /// power equals `gain_linear`.
    pub fn generate(&self, link: Link, tti: u64, prb: usize, tx_antennas: usize, gain_linear: f64) -> CMat2 {
        self.response(&self.tap_gains(link, tti, tx_antennas), prb) * Complex64::from(gain_linear.sqrt())
    }
}
