use pignn::noise::{NoiseKind, NoiseSpec};
use pignn::trainer::{Method, RunResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Accuracy reported per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Clean test accuracy after the last epoch.
    #[default]
    FinalTest,
    /// Clean test accuracy at the epoch with the best (noisy) validation accuracy.
    BestValTest,
}

/// One sweep cell, flat so that it maps onto a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: Method,
    pub noise_kind: NoiseKind,
    pub noise_rate: f64,
    pub seed: u64,
    pub status: String,
    pub final_test_acc: Option<f64>,
    pub best_val_test_acc: Option<f64>,
    pub final_val_acc: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub best_val_epoch: Option<usize>,
    pub beta: Option<f64>,
    pub wall_clock_secs: Option<f64>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn new(
        dataset: &str,
        method: Method,
        noise: NoiseSpec,
        seed: u64,
        outcome: CliResult<(RunResult, Option<f64>)>,
    ) -> CellResult {
        let mut cell = CellResult {
            dataset: dataset.to_owned(),
            method,
            noise_kind: noise.kind,
            noise_rate: noise.rate,
            seed,
            status: "ok".into(),
            final_test_acc: None,
            best_val_test_acc: None,
            final_val_acc: None,
            final_train_acc: None,
            best_val_epoch: None,
            beta: None,
            wall_clock_secs: None,
            error: None,
        };
        match outcome {
            Ok((r, secs)) => {
                let m = &r.metrics;
                cell.final_test_acc = Some(m.final_test_acc);
                cell.best_val_test_acc = Some(m.best_val_test_acc);
                cell.final_val_acc = Some(m.final_val_acc);
                cell.final_train_acc = Some(m.final_train_acc);
                cell.best_val_epoch = Some(m.best_val_epoch);
                cell.beta = Some(r.beta);
                cell.wall_clock_secs = secs;
            }
            Err(e) => {
                cell.status = match e.exit_code() {
                    crate::error::EXIT_DIVERGENCE => "diverged".into(),
                    _ => "error".into(),
                };
                cell.error = Some(e.to_string());
            }
        }
        cell
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::FinalTest => self.final_test_acc,
            Metric::BestValTest => self.best_val_test_acc,
        }
    }
}

/// Aggregate over seeds for one (dataset, method, noise) key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub noise_kind: NoiseKind,
    pub noise_rate: f64,
    pub n: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; needs at least two seeds.
    pub std: Option<f64>,
    pub values: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

/// Table cell: mean to three decimals, standard deviation to two in brackets.
pub fn format_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.3}({s:.2})"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "-".into(),
    }
}

/// Group cells by key in first-appearance order.
pub fn summarize(cells: &[CellResult], metric: Metric) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = Vec::new();
    for c in cells {
        let idx = rows.iter().position(|r| {
            r.dataset == c.dataset
                && r.method == c.method
                && r.noise_kind == c.noise_kind
                && r.noise_rate == c.noise_rate
        });
        let idx = idx.unwrap_or_else(|| {
            rows.push(ResultRow {
                dataset: c.dataset.clone(),
                method: c.method,
                noise_kind: c.noise_kind,
                noise_rate: c.noise_rate,
                n: 0,
                failures: 0,
                mean: None,
                std: None,
                values: Vec::new(),
            });
            rows.len() - 1
        });
        match c.metric(metric) {
            Some(v) => rows[idx].values.push(v),
            None => rows[idx].failures += 1,
        }
    }
    for r in &mut rows {
        r.n = r.values.len();
        (r.mean, r.std) = mean_std(&r.values);
    }
    rows
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::usage(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One line per run.
pub fn runs_csv(cells: &[CellResult]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(c).map_err(csv_err)?;
    }
    finish(w)
}

/// One line per aggregated key; per-seed values are in the JSON report.
pub fn summary_csv(rows: &[ResultRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "method",
        "noise_kind",
        "noise_rate",
        "n",
        "failures",
        "mean",
        "std",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.noise_kind.to_string(),
            r.noise_rate.to_string(),
            r.n.to_string(),
            r.failures.to_string(),
            opt(r.mean),
            opt(r.std),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

impl ResultRow {
    fn spec(&self) -> NoiseSpec {
        NoiseSpec {
            kind: self.noise_kind,
            rate: self.noise_rate,
        }
    }
}

/// Methods as rows, noise settings as columns, `mean(std)` cells.
pub fn pivot_csv(rows: &[ResultRow]) -> CliResult<String> {
    let mut columns: Vec<NoiseSpec> = Vec::new();
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in rows {
        if !columns.contains(&r.spec()) {
            columns.push(r.spec());
        }
        let key = (r.dataset.clone(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset".to_owned(), "method".to_owned()];
    header.extend(columns.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (dataset, method) in &keys {
        let mut record = vec![dataset.clone(), method.to_string()];
        for col in &columns {
            let row = rows
                .iter()
                .find(|r| &r.dataset == dataset && r.method == *method && r.spec() == *col);
            record.push(row.map_or_else(|| "-".into(), |r| format_cell(r.mean, r.std)));
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(Some(0.515), Some(0.03)), "0.515(0.03)");
        assert_eq!(format_cell(Some(0.4461), Some(0.0649)), "0.446(0.06)");
        assert_eq!(format_cell(Some(0.5), None), "0.500");
        assert_eq!(format_cell(None, None), "-");
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (Some(0.7), None));
    }
}
