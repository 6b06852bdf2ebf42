//! BICM mutual-information curves for Gray-mapped QPSK / 16-QAM / 64-QAM.
//!
//! A square Gray-mapped QAM splits into two independent Gray PAM
//! constellations on I and Q, so the per-symbol MI is twice the PAM MI at
//! the same SNR. Curves are stored as the *log deficit* `ln(m − I(γ))`,
//! which stays strictly decreasing and precise deep into saturation where
//! `I(γ)` itself rounds to `m`.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use serde::Deserialize;

/// Grid of the precomputed tables.
pub const GRID_START_DB: f64 = -20.0;
pub const GRID_STEP_DB: f64 = 0.1;
pub const GRID_POINTS: usize = 601;

/// Below this log deficit the quadrature is replaced by the asymptotic
/// `ln D ≈ a − b·γ` tail.
const QUADRATURE_FLOOR: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn from_order(bits: u32) -> Option<Self> {
        match bits {
            2 => Some(Modulation::Qpsk),
            4 => Some(Modulation::Qam16),
            6 => Some(Modulation::Qam64),
            _ => None,
        }
    }

    /// Bits per complex symbol.
    pub fn bits(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    fn pam_size(self) -> usize {
        1 << (self.bits() / 2)
    }
}

/// One real dimension of the constellation, with unit complex symbol energy
/// split evenly across I and Q.
struct Pam {
    points: Vec<f64>,
    labels: Vec<usize>,
    bits: usize,
    spacing: f64,
    /// Per point: distance to the farthest of its nearest opposite-bit
    /// neighbours, over all bit positions.
    reach: Vec<f64>,
}

impl Pam {
    fn new(size: usize) -> Self {
        let bits = size.trailing_zeros() as usize;
        let mean_sq = (size * size - 1) as f64 / 3.0;
        let scale = (0.5 / mean_sq).sqrt();
        let points: Vec<f64> = (0..size)
            .map(|i| (2.0 * i as f64 - (size as f64 - 1.0)) * scale)
            .collect();
        let labels: Vec<usize> = (0..size).map(|i| i ^ (i >> 1)).collect();
        let reach = (0..size)
            .map(|j| {
                (0..bits)
                    .map(|k| {
                        (0..size)
                            .filter(|&q| (labels[q] >> k) & 1 != (labels[j] >> k) & 1)
                            .map(|q| (points[q] - points[j]).abs())
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        Self {
            points,
            labels,
            bits,
            spacing: 2.0 * scale,
            reach,
        }
    }

    /// `ln(bits − I_pam(γ))` by trapezoidal quadrature over the noise,
    /// accumulated in the log domain.
    fn ln_deficit(&self, gamma: f64) -> f64 {
        let size = self.points.len();
        let sigma = (0.5 / gamma).sqrt();
        let inv_two_var = 0.5 / (sigma * sigma);
        let ln_norm = -(sigma * (2.0 * PI).sqrt()).ln() - LN_2.ln();
        let mut acc = LogSum::default();
        let mut log_lik = vec![0.0; size];
        let mut lik = vec![0.0; size];
        for j in 0..size {
            let half = 0.5 * self.reach[j] + 12.0 * sigma;
            let step = (sigma / 8.0).min(sigma * sigma / (4.0 * self.spacing));
            let steps = (2.0 * half / step).ceil() as usize;
            let step = 2.0 * half / steps as f64;
            let ln_step = step.ln();
            for i in 0..=steps {
                let n = -half + i as f64 * step;
                let y = self.points[j] + n;
                let mut top = f64::NEG_INFINITY;
                for (q, l) in log_lik.iter_mut().enumerate() {
                    let e = y - self.points[q];
                    *l = -e * e * inv_two_var;
                    top = top.max(*l);
                }
                for (l, ll) in lik.iter_mut().zip(&log_lik) {
                    *l = (ll - top).exp();
                }
                let weight = ln_step + ln_norm - n * n * inv_two_var;
                for k in 0..self.bits {
                    let bit = (self.labels[j] >> k) & 1;
                    let (mut same, mut other) = (0.0, 0.0);
                    for q in 0..size {
                        if (self.labels[q] >> k) & 1 == bit {
                            same += lik[q];
                        } else {
                            other += lik[q];
                        }
                    }
                    let a = if same > 0.0 && other > 0.0 {
                        other.ln() - same.ln()
                    } else {
                        let (same_ll, other_ll): (Vec<f64>, Vec<f64>) = (0..size)
                            .map(|q| ((self.labels[q] >> k) & 1 == bit, log_lik[q]))
                            .fold((Vec::new(), Vec::new()), |(mut s, mut o), (is_same, ll)| {
                                if is_same {
                                    s.push(ll);
                                } else {
                                    o.push(ll);
                                }
                                (s, o)
                            });
                        log_sum_exp(&other_ll) - log_sum_exp(&same_ll)
                    };
                    if a > f64::NEG_INFINITY {
                        acc.add(ln_softplus(a) + weight);
                    }
                }
            }
        }
        acc.value() - (size as f64).ln()
    }
}

/// ln(ln(1 + e^a)).
fn ln_softplus(a: f64) -> f64 {
    if a > 30.0 {
        a.ln()
    } else if a < -30.0 {
        a
    } else {
        a.exp().ln_1p().ln()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Streaming log-sum-exp.
#[derive(Default)]
struct LogSum {
    max: f64,
    sum: f64,
    started: bool,
}

impl LogSum {
    fn add(&mut self, x: f64) {
        if !self.started {
            self.max = x;
            self.sum = 1.0;
            self.started = true;
        } else if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn value(&self) -> f64 {
        if self.started {
            self.max + self.sum.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Tabulated MI curve of one modulation.
#[derive(Debug, Clone)]
pub struct MiCurve {
    modulation: Modulation,
    bits: f64,
    ln_deficit: Vec<f64>,
    /// Slope of `ln D` in linear SINR beyond the top of the grid.
    tail_slope: f64,
}

impl MiCurve {
    pub fn compute(modulation: Modulation) -> Self {
        let pam = Pam::new(modulation.pam_size());
        let bits = modulation.bits() as f64;
        let mut ln_deficit: Vec<f64> = Vec::with_capacity(GRID_POINTS);
        for i in 0..GRID_POINTS {
            let g = grid_linear(i);
            let value = match ln_deficit.len() {
                n if n >= 2 && ln_deficit[n - 1] < QUADRATURE_FLOOR => {
                    let slope = (ln_deficit[n - 1] - ln_deficit[n - 2]) / (grid_linear(n - 1) - grid_linear(n - 2));
                    ln_deficit[n - 1] + slope * (g - grid_linear(n - 1))
                }
                // two real dimensions
                _ => pam.ln_deficit(g) + LN_2,
            };
            ln_deficit.push(value);
        }
        debug_assert!(ln_deficit.windows(2).all(|w| w[1] < w[0]));
        let n = GRID_POINTS;
        let tail_slope = (ln_deficit[n - 1] - ln_deficit[n - 2]) / (grid_linear(n - 1) - grid_linear(n - 2));
        Self {
            modulation,
            bits,
            ln_deficit,
            tail_slope,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits(&self) -> f64 {
        self.bits
    }

    /// Table domain in dB.
    pub fn domain_db() -> (f64, f64) {
        (GRID_START_DB, grid_db(GRID_POINTS - 1))
    }

    /// `ln(m − I(γ))` for linear SINR `γ ≥ 0`.
    pub fn ln_deficit(&self, gamma: f64) -> f64 {
        let bottom = grid_linear(0);
        let top_index = GRID_POINTS - 1;
        if gamma <= bottom {
            // I grows linearly from the origin
            let i0 = self.bits - self.ln_deficit[0].exp();
            let mi = i0 * gamma.max(0.0) / bottom;
            return (self.bits - mi).ln();
        }
        if gamma >= grid_linear(top_index) {
            return self.ln_deficit[top_index] + self.tail_slope * (gamma - grid_linear(top_index));
        }
        let pos = (10.0 * gamma.log10() - GRID_START_DB) / GRID_STEP_DB;
        let i = (pos.floor() as usize).min(top_index - 1);
        let frac = pos - i as f64;
        self.ln_deficit[i] + frac * (self.ln_deficit[i + 1] - self.ln_deficit[i])
    }

    /// Inverse of [`MiCurve::ln_deficit`]; returns linear SINR.
    pub fn gamma_from_ln_deficit(&self, ln_d: f64) -> f64 {
        let top_index = GRID_POINTS - 1;
        if ln_d >= self.ln_deficit[0] {
            let i0 = self.bits - self.ln_deficit[0].exp();
            let mi = (self.bits - ln_d.exp()).max(0.0);
            return grid_linear(0) * mi / i0;
        }
        if ln_d <= self.ln_deficit[top_index] {
            return grid_linear(top_index) + (ln_d - self.ln_deficit[top_index]) / self.tail_slope;
        }
        // first grid index whose value is below ln_d
        let hi = self.ln_deficit.partition_point(|&v| v >= ln_d);
        let lo = hi - 1;
        let frac = (ln_d - self.ln_deficit[lo]) / (self.ln_deficit[hi] - self.ln_deficit[lo]);
        let db = grid_db(lo) + frac * GRID_STEP_DB;
        10f64.powf(db / 10.0)
    }

    /// Mutual information in bits per symbol at `gamma_db`.
    pub fn mi(&self, gamma_db: f64) -> f64 {
        self.bits - self.ln_deficit(10f64.powf(gamma_db / 10.0)).exp()
    }

    /// SINR in dB whose MI equals `mi`; `mi` is clamped to `[0, m)`.
    pub fn inverse(&self, mi: f64) -> f64 {
        let deficit = (self.bits - mi.clamp(0.0, self.bits)).max(f64::MIN_POSITIVE);
        10.0 * self.gamma_from_ln_deficit(deficit.ln()).log10()
    }
}

fn grid_db(i: usize) -> f64 {
    GRID_START_DB + i as f64 * GRID_STEP_DB
}

fn grid_linear(i: usize) -> f64 {
    10f64.powf(grid_db(i) / 10.0)
}

/// Shared, lazily computed curve for a modulation.
pub fn curve(modulation: Modulation) -> &'static MiCurve {
    static CURVES: [OnceLock<MiCurve>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match modulation {
        Modulation::Qpsk => 0,
        Modulation::Qam16 => 1,
        Modulation::Qam64 => 2,
    };
    CURVES[slot].get_or_init(|| MiCurve::compute(modulation))
}
