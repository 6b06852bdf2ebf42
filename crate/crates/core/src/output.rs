//! CSV result files. Floats are written with six significant digits in
//! `%g` style so that outputs are stable byte for byte.

use std::fs;
use std::path::Path;

use crate::engine::{MetricsStore, ResultsRow};
use crate::error::{Error, Result};

pub const SINR_SAMPLES_HEADER: [&str; 5] = ["drop", "rsu", "vehicle", "tti", "sinr_db"];
pub const VEHICLE_SUMMARY_HEADER: [&str; 6] = ["drop", "vehicle", "rsu", "mean_thr_kbps", "outage", "achieved_target"];
pub const RESULTS_TABLE_HEADER: [&str; 6] = [
    "config_label",
    "receiver",
    "target_prob",
    "cell_edge_kbps",
    "outage_frac",
    "mean_vehicles_per_rsu",
];

/// `printf("%g")` with six significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Round to six significant digits first; the exponent of the rounded
    // value picks the notation.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_sinr_samples(path: &Path, stores: &[MetricsStore]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SINR_SAMPLES_HEADER)?;
    for store in stores {
        let drop = store.drop.to_string();
        for s in &store.sinr_samples {
            w.write_record([
                drop.as_str(),
                &s.rsu.to_string(),
                &s.vehicle.to_string(),
                &s.tti.to_string(),
                &format_float(s.sinr_db),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vehicle_summary(path: &Path, stores: &[MetricsStore]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(VEHICLE_SUMMARY_HEADER)?;
    for store in stores {
        for v in &store.vehicles {
            w.write_record([
                store.drop.to_string(),
                v.vehicle.to_string(),
                v.rsu.to_string(),
                format_float(v.mean_thr_kbps()),
                flag(v.outage).to_string(),
                flag(v.achieved_target).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The string fields of a results row exactly as written to CSV.
pub fn results_fields(row: &ResultsRow) -> [String; 6] {
    [
        row.config_label.clone(),
        row.receiver.clone(),
        format_float(row.target_prob),
        format_float(row.cell_edge_kbps),
        format_float(row.outage_frac),
        format_float(row.mean_vehicles_per_rsu),
    ]
}

pub fn write_results_table(path: &Path, rows: &[ResultsRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_TABLE_HEADER)?;
    for row in rows {
        w.write_record(results_fields(row))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
