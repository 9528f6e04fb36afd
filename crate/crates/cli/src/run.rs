use std::path::Path;
use std::time::Instant;

use pignn::data::{save_model, RunInputs};
use pignn::trainer::{train_full, Method, RunResult};
use serde::{Deserialize, Serialize};

use crate::args::RunArgs;
use crate::config::{configure_method, train_config, RunConfigFile};
use crate::dataset::{observed_labels, LabelChoice};
use crate::error::CliResult;
use crate::output::{emit, to_json};

/// Result of one `run` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: Method,
    pub labels: LabelChoice,
    pub result: RunResult,
}

pub fn run(args: &RunArgs, quiet: bool) -> CliResult<()> {
    let file = match &args.config {
        Some(p) => RunConfigFile::read(p)?,
        None => RunConfigFile::default(),
    };
    let method = args.method.or(file.method).unwrap_or(Method::PiGnn);
    let cfg = train_config(file.train.as_ref(), &args.train)?;
    let cfg = configure_method(method, cfg)?;

    let noise = match args.labels.noise {
        Some(n) => Some(n),
        None => file.noise()?,
    };
    let noise_seed = args.labels.noise_seed.or(file.noise_seed);
    let clean_val = args.labels.clean_val || file.clean_val.unwrap_or(false);

    let inputs = RunInputs::load(&args.data)?;
    let (observed, labels) = observed_labels(&inputs, noise, noise_seed, clean_val, cfg.seed)?;
    let ds = &inputs.dataset;

    let start = Instant::now();
    let out = train_full(ds, &observed, &cfg)?;
    let mut result = out.result;
    if !args.deterministic {
        result.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    }
    if !quiet {
        let m = &result.metrics;
        eprintln!(
            "{method} on {} seed {}: final test {:.4}, best-val test {:.4} (epoch {})",
            ds.name, cfg.seed, m.final_test_acc, m.best_val_test_acc, m.best_val_epoch
        );
    }

    if let Some(dir) = &args.save_model {
        save_model(dir, &out.task, "task")?;
    }
    if let Some(dir) = &args.save_mask_model {
        match &out.mask {
            Some(mask) => {
                save_model(dir, mask, "mask")?;
            }
            None => log::warn!("method {method} trains no mask generator; nothing saved"),
        }
    }

    let record = RunRecord {
        dataset: ds.name.clone(),
        method,
        labels,
        result,
    };
    emit(args.out.as_deref().map(Path::new), &to_json(&record))
}
