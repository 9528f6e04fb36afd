use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use pignn::noise::{NoiseKind, NoiseSpec};
use pignn::trainer::{train, Method, RunResult, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::SweepArgs;
use crate::config::{read_json, train_config};
use crate::dataset::{observed_labels, DatasetRef};
use crate::error::{CliError, CliResult};
use crate::output::{emit, to_json};
use crate::table::{pivot_csv, runs_csv, summarize, summary_csv, CellResult, Metric, ResultRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseGrid {
    pub kinds: Vec<NoiseKind>,
    pub rates: Vec<f64>,
}

impl NoiseGrid {
    pub fn specs(&self) -> Vec<NoiseSpec> {
        self.kinds
            .iter()
            .flat_map(|&kind| self.rates.iter().map(move |&rate| NoiseSpec { kind, rate }))
            .collect()
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

/// Experiment file for `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetRef,
    pub noise: NoiseGrid,
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Partial training configuration applied to every cell.
    #[serde(default)]
    pub train: Option<Value>,
    #[serde(default)]
    pub clean_val: bool,
    #[serde(default)]
    pub metric: Metric,
}

impl ExperimentSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(CliError::usage("experiment needs methods and seeds"));
        }
        if self.noise.kinds.is_empty() || self.noise.rates.is_empty() {
            return Err(CliError::usage("experiment needs noise kinds and rates"));
        }
        if let Some(r) = self.noise.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(CliError::usage(format!("noise rate {r} outside [0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Method,
    noise: NoiseSpec,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    name: &'a str,
    dataset: &'a str,
    metric: Metric,
    rows: &'a [ResultRow],
    runs: &'a [CellResult],
}

pub fn sweep(args: &SweepArgs, quiet: bool) -> CliResult<()> {
    let mut spec: ExperimentSpec = read_json(&args.spec)?;
    spec.validate()?;
    if let Some(base) = args.spec.parent() {
        spec.dataset.rebase(base);
    }
    let base_cfg = train_config(spec.train.as_ref(), &args.train)?;
    // reject bad combinations before any training starts; a global beta
    // applies to the pair-loss methods only
    let configs: Vec<(Method, TrainConfig)> = spec
        .methods
        .iter()
        .map(|&m| {
            let cfg = m.configure(base_cfg.clone());
            cfg.validate()
                .map(|_| (m, cfg))
                .map_err(|e| CliError::usage(e.to_string()))
        })
        .collect::<CliResult<_>>()?;

    let inputs = spec.dataset.load()?;
    let ds = &inputs.dataset;
    let name = spec.name.clone().unwrap_or_else(|| ds.name.clone());

    let cells: Vec<Cell> = spec
        .noise
        .specs()
        .into_iter()
        .flat_map(|noise| {
            let seeds = &spec.seeds;
            spec.methods.iter().flat_map(move |&method| {
                seeds.iter().map(move |&seed| Cell {
                    method,
                    noise,
                    seed,
                })
            })
        })
        .collect();
    let total = cells.len();
    let done = AtomicUsize::new(0);

    let run_cell = |cell: &Cell| -> CellResult {
        let cfg = TrainConfig {
            seed: cell.seed,
            ..configs
                .iter()
                .find(|(m, _)| *m == cell.method)
                .expect("configured method")
                .1
                .clone()
        };
        let start = Instant::now();
        let outcome = observed_labels(&inputs, Some(cell.noise), None, spec.clean_val, cell.seed)
            .and_then(|(observed, _)| Ok(train(ds, &observed, &cfg)?.1));
        let secs = start.elapsed().as_secs_f64();
        let result = CellResult::new(
            &ds.name,
            cell.method,
            cell.noise,
            cell.seed,
            outcome.map(|r: RunResult| (r, (!args.deterministic).then_some(secs))),
        );
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if !quiet {
            match &result.error {
                None => eprintln!(
                    "[{k}/{total}] {} {} seed {}: test {:.4}",
                    cell.method,
                    cell.noise,
                    cell.seed,
                    result.metric(spec.metric).unwrap_or(f64::NAN)
                ),
                Some(e) => eprintln!(
                    "[{k}/{total}] {} {} seed {}: failed: {e}",
                    cell.method, cell.noise, cell.seed
                ),
            }
        }
        result
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| cells.par_iter().map(run_cell).collect());

    let rows = summarize(&results, spec.metric);
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    emit(Some(&dir.join("runs.csv")), &runs_csv(&results)?)?;
    emit(Some(&dir.join("summary.csv")), &summary_csv(&rows)?)?;
    emit(Some(&dir.join("table.csv")), &pivot_csv(&rows)?)?;
    let report = SweepReport {
        name: &name,
        dataset: &ds.name,
        metric: spec.metric,
        rows: &rows,
        runs: &results,
    };
    emit(Some(&dir.join("results.json")), &to_json(&report))?;
    let failures = results.iter().filter(|r| r.error.is_some()).count();
    if !quiet {
        eprintln!(
            "{} runs, {failures} failed; results in {}",
            results.len(),
            Path::new(dir).display()
        );
    }
    Ok(())
}
