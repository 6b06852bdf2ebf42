//! Experiment batches: flag overrides, drop fan-out, CSV output and the
//! printed summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ConfigFile, Experiment};
use crate::engine::{aggregate, run_drop, MetricsStore, ResultsRow, RunOptions};
use crate::error::{Error, Result};
use crate::output::{format_float, write_results_table, write_sinr_samples, write_vehicle_summary};
use crate::par::{map_jobs, with_threads, Execution};

pub const SINR_SAMPLES_FILE: &str = "sinr_samples.csv";
pub const VEHICLE_SUMMARY_FILE: &str = "vehicle_summary.csv";
pub const RESULTS_TABLE_FILE: &str = "results_table.csv";

/// Command-line overrides and execution settings.
#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub seed: Option<u64>,
    pub drops: Option<usize>,
    pub ttis: Option<u64>,
    /// Labels to run; `None` runs every experiment.
    pub experiments: Option<Vec<String>>,
    pub threads: Option<usize>,
    pub execution: Execution,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub label: String,
    pub dir: PathBuf,
    pub result: Result<ResultsRow>,
}

#[derive(Debug)]
pub struct BatchReport {
    pub outcomes: Vec<ExperimentOutcome>,
    /// Failure writing the combined table, if any.
    pub table_error: Option<Error>,
}

impl BatchReport {
    pub fn rows(&self) -> Vec<&ResultsRow> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect()
    }

    pub fn failures(&self) -> Vec<(&str, &Error)> {
        let mut out: Vec<(&str, &Error)> = self
            .outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (o.label.as_str(), e)))
            .collect();
        if let Some(e) = &self.table_error {
            out.push((RESULTS_TABLE_FILE, e));
        }
        out
    }

    pub fn success(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Experiments selected by `filter`, in file order, with the flag
/// overrides applied. Unknown labels are an error.
pub fn select_experiments(file: &ConfigFile, options: &BatchOptions) -> Result<Vec<Experiment>> {
    if let Some(filter) = &options.experiments {
        for label in filter {
            if !file.experiments.iter().any(|e| &e.spec.label == label) {
                return Err(Error::config("experiments", format!("unknown experiment `{label}`")));
            }
        }
    }
    let mut out = Vec::new();
    for e in &file.experiments {
        if let Some(filter) = &options.experiments {
            if !filter.contains(&e.spec.label) {
                continue;
            }
        }
        let mut e = e.clone();
        if let Some(seed) = options.seed {
            e.config.engine.master_seed = seed;
        }
        if let Some(drops) = options.drops {
            e.config.engine.num_drops = drops;
        }
        if let Some(ttis) = options.ttis {
            e.config.engine.ttis_per_drop = ttis;
        }
        e.config.validate()?;
        out.push(e);
    }
    if out.is_empty() {
        return Err(Error::NoExperiments);
    }
    Ok(out)
}

/// Runs every drop of every experiment as one flat job list and returns the
/// metrics grouped per experiment, drops in order.
pub fn run_experiments(
    experiments: &[Experiment],
    execution: Execution,
    options: RunOptions,
) -> Vec<Result<Vec<MetricsStore>>> {
    let jobs: Vec<(usize, usize)> = experiments
        .iter()
        .enumerate()
        .flat_map(|(i, e)| (0..e.config.engine.num_drops).map(move |d| (i, d)))
        .collect();
    let results = map_jobs(jobs.len(), execution, |j| {
        let (i, d) = jobs[j];
        run_drop(&experiments[i].config, d, options).map(|r| r.metrics)
    });
    let mut grouped: Vec<Result<Vec<MetricsStore>>> = experiments.iter().map(|_| Ok(Vec::new())).collect();
    for ((i, _), r) in jobs.into_iter().zip(results) {
        match (&mut grouped[i], r) {
            (Ok(stores), Ok(m)) => stores.push(m),
            (slot @ Ok(_), Err(e)) => *slot = Err(e),
            (Err(_), _) => {}
        }
    }
    grouped
}

fn write_experiment(dir: &Path, experiment: &Experiment, stores: &[MetricsStore]) -> Result<ResultsRow> {
    let row = aggregate(stores)?.row(&experiment.config_label(), &experiment.receiver_label());
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_sinr_samples(&dir.join(SINR_SAMPLES_FILE), stores)?;
    write_vehicle_summary(&dir.join(VEHICLE_SUMMARY_FILE), stores)?;
    write_results_table(&dir.join(RESULTS_TABLE_FILE), std::slice::from_ref(&row))?;
    Ok(row)
}

/// Runs the selected experiments and writes
/// `<output_dir>/<label>/{sinr_samples,vehicle_summary,results_table}.csv`
/// plus a combined `<output_dir>/results_table.csv`.
///
/// A failing experiment does not stop the others; failures are collected in
/// the report.
pub fn run_batch(file: &ConfigFile, options: &BatchOptions, output_dir: &Path) -> Result<BatchReport> {
    let experiments = select_experiments(file, options)?;
    let run_options = RunOptions::default();
    let grouped = with_threads(options.threads, || {
        run_experiments(&experiments, options.execution, run_options)
    });
    let outcomes: Vec<ExperimentOutcome> = experiments
        .iter()
        .zip(grouped)
        .map(|(e, stores)| {
            let dir = output_dir.join(&e.spec.label);
            let result = stores.and_then(|s| write_experiment(&dir, e, &s));
            ExperimentOutcome {
                label: e.spec.label.clone(),
                dir,
                result,
            }
        })
        .collect();
    let rows: Vec<ResultsRow> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().cloned())
        .collect();
    let table_error = fs::create_dir_all(output_dir)
        .map_err(|e| Error::io(output_dir, e))
        .and_then(|_| write_results_table(&output_dir.join(RESULTS_TABLE_FILE), &rows))
        .err();
    Ok(BatchReport { outcomes, table_error })
}

/// Target probability laid out like the published table: one line per
/// density, one column per receiver, values exactly as in the CSV.
pub fn format_summary(rows: &[&ResultsRow]) -> String {
    let mut densities: Vec<&str> = Vec::new();
    let mut receivers: Vec<&str> = Vec::new();
    for r in rows {
        if !densities.contains(&r.config_label.as_str()) {
            densities.push(&r.config_label);
        }
        if !receivers.contains(&r.receiver.as_str()) {
            receivers.push(&r.receiver);
        }
    }
    let cell = |d: &str, rx: &str, f: fn(&ResultsRow) -> f64| {
        rows.iter()
            .find(|r| r.config_label == d && r.receiver == rx)
            .map(|r| format_float(f(r)))
            .unwrap_or_else(|| "-".to_string())
    };
    let mut out = String::new();
    let sections: [(&str, fn(&ResultsRow) -> f64); 2] = [
        ("target_prob", |r| r.target_prob),
        ("cell_edge_kbps", |r| r.cell_edge_kbps),
    ];
    for (i, (name, f)) in sections.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{:<16}", name);
        for rx in &receivers {
            let _ = write!(out, " {:>16}", rx);
        }
        out.push('\n');
        for d in &densities {
            let _ = write!(out, "{:<16}", d);
            for rx in &receivers {
                let _ = write!(out, " {:>16}", cell(d, rx, f));
            }
            out.push('\n');
        }
    }
    out
}
