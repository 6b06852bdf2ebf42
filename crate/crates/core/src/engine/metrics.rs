use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub rsu: usize,
    pub vehicle: usize,
    pub tti: u64,
    /// Wideband post-combining SINR: mean linear SINR over the band, in dB.
    pub sinr_db: f64,
}

/// Throughput bookkeeping of one vehicle while served by a measured RSU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRecord {
    pub vehicle: usize,
    /// The measured RSU that served it longest.
    pub rsu: usize,
    pub delivered_bits: u64,
    pub measured_ttis: u64,
    pub outage: bool,
    pub achieved_target: bool,
}

impl VehicleRecord {
    /// Bits per millisecond equal kilobits per second.
    pub fn mean_thr_kbps(&self) -> f64 {
        if self.measured_ttis == 0 {
            0.0
        } else {
            self.delivered_bits as f64 / self.measured_ttis as f64
        }
    }
}

/// Everything one drop contributes to the statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsStore {
    pub drop: usize,
    pub ttis: u64,
    pub num_measured_rsus: usize,
    /// Sum over TTIs of the number of vehicles attached to measured RSUs.
    pub served_vehicle_ttis: u64,
    pub sinr_samples: Vec<SinrSample>,
    pub vehicles: Vec<VehicleRecord>,
}

/// Pooled statistics of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTables {
    pub sinr_cdf: Vec<(f64, f64)>,
    pub throughput_cdf: Vec<(f64, f64)>,
    pub num_vehicles: usize,
    pub target_prob: f64,
    pub cell_edge_kbps: f64,
    pub outage_frac: f64,
    pub mean_vehicles_per_rsu: f64,
}

impl ResultsTables {
    pub fn row(&self, config_label: &str, receiver: &str) -> ResultsRow {
        ResultsRow {
            config_label: config_label.to_string(),
            receiver: receiver.to_string(),
            target_prob: self.target_prob,
            cell_edge_kbps: self.cell_edge_kbps,
            outage_frac: self.outage_frac,
            mean_vehicles_per_rsu: self.mean_vehicles_per_rsu,
        }
    }
}

/// One line of `results_table.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub config_label: String,
    pub receiver: String,
    pub target_prob: f64,
    pub cell_edge_kbps: f64,
    pub outage_frac: f64,
    pub mean_vehicles_per_rsu: f64,
}

/// `(x_i, i/n)` steps of the empirical CDF of `values`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Nearest-rank percentile of sorted data, `q` in (0, 1].
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Pools drops. The result does not depend on the order of `stores`.
pub fn aggregate(stores: &[MetricsStore]) -> Result<ResultsTables> {
    if stores.is_empty() {
        return Err(Error::NoDrops);
    }
    let records: Vec<&VehicleRecord> = stores.iter().flat_map(|s| &s.vehicles).collect();
    if records.is_empty() {
        return Err(Error::Domain("no vehicle was measured long enough to be counted".into()));
    }
    let n = records.len();
    let thr: Vec<f64> = records.iter().map(|r| r.mean_thr_kbps()).collect();
    let throughput_cdf = empirical_cdf(&thr);
    let sorted: Vec<f64> = throughput_cdf.iter().map(|p| p.0).collect();
    let sinr: Vec<f64> = stores
        .iter()
        .flat_map(|s| s.sinr_samples.iter().map(|x| x.sinr_db))
        .collect();
    let served: u64 = stores.iter().map(|s| s.served_vehicle_ttis).sum();
    let slots: u64 = stores.iter().map(|s| s.ttis * s.num_measured_rsus as u64).sum();
    Ok(ResultsTables {
        sinr_cdf: empirical_cdf(&sinr),
        throughput_cdf,
        num_vehicles: n,
        target_prob: records.iter().filter(|r| r.achieved_target).count() as f64 / n as f64,
        cell_edge_kbps: nearest_rank(&sorted, 0.05),
        outage_frac: records.iter().filter(|r| r.outage).count() as f64 / n as f64,
        mean_vehicles_per_rsu: served as f64 / slots as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(drop: usize, thr: &[u64]) -> MetricsStore {
        MetricsStore {
            drop,
            ttis: 1000,
            num_measured_rsus: 1,
            served_vehicle_ttis: 1000 * thr.len() as u64,
            sinr_samples: thr
                .iter()
                .enumerate()
                .map(|(i, &t)| SinrSample {
                    rsu: 3,
                    vehicle: i,
                    tti: 0,
                    sinr_db: t as f64 / 10.0,
                })
                .collect(),
            vehicles: thr
                .iter()
                .enumerate()
                .map(|(i, &t)| VehicleRecord {
                    vehicle: i,
                    rsu: 3,
                    delivered_bits: t * 1000,
                    measured_ttis: 1000,
                    outage: t < 1,
                    achieved_target: t as f64 >= 0.95 * 128.0,
                })
                .collect(),
        }
    }

    #[test]
    fn all_at_target() {
        let r = aggregate(&[store(0, &[128; 20])]).unwrap();
        assert_eq!(r.target_prob, 1.0);
        assert_eq!(r.outage_frac, 0.0);
        assert_eq!(r.cell_edge_kbps, 128.0);
        assert_eq!(r.mean_vehicles_per_rsu, 20.0);
    }

    #[test]
    fn cdf_is_monotone_to_one() {
        let r = aggregate(&[store(0, &[5, 0, 128, 77, 128, 3])]).unwrap();
        assert!(r.throughput_cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(r.throughput_cdf.last().unwrap().1, 1.0);
        assert!(r.sinr_cdf.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!((r.outage_frac - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(aggregate(&[]), Err(Error::NoDrops)));
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.05), 5.0);
        assert_eq!(nearest_rank(&v[..10], 0.05), 1.0);
        assert_eq!(nearest_rank(&v[..21], 0.05), 2.0);
    }
}
