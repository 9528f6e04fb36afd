use pignn::data::{load_model, RunInputs};
use pignn::trainer::{
    build_pi_labels, compare_confidence_halves, mask_from_model, mask_histogram,
    train_mask_generator, ConfidenceComparison, TrainConfig, HISTOGRAM_BINS,
};
use serde::Serialize;

use crate::args::MaskReportArgs;
use crate::config::train_config;
use crate::dataset::observed_labels;
use crate::error::{CliError, CliResult};
use crate::output::{emit, to_json};
use crate::table::mean_std;

#[derive(Debug, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    #[serde(flatten)]
    pub comparison: ConfidenceComparison,
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub seeds: Vec<SeedComparison>,
    pub mean_top_acc: f64,
    pub mean_bottom_acc: f64,
    pub mean_difference: f64,
    pub std_difference: Option<f64>,
}

pub fn mask_report(args: &MaskReportArgs, quiet: bool) -> CliResult<()> {
    if args.compare && args.hist_out.is_none() && args.compare_out.is_none() {
        return Err(CliError::usage(
            "with --compare, send the histogram or the comparison to a file (--hist-out / --compare-out)",
        ));
    }
    let base = train_config(None, &args.train)?;
    base.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let seeds = match &args.seeds {
        Some(s) => s.0.clone(),
        None => vec![base.seed],
    };
    let checkpoint = args.checkpoint.as_deref().map(load_model).transpose()?;
    let inputs = RunInputs::load(&args.data)?;
    let ds = &inputs.dataset;

    let mut hist = csv::Writer::from_writer(Vec::new());
    hist.write_record(["seed", "bin", "lower", "upper", "count"])
        .map_err(|e| CliError::usage(format!("csv: {e}")))?;
    let mut comparisons = Vec::new();
    for &seed in &seeds {
        let cfg = TrainConfig {
            seed,
            ..base.clone()
        };
        let (observed, _) = observed_labels(
            &inputs,
            args.labels.noise,
            args.labels.noise_seed,
            args.labels.clean_val,
            seed,
        )?;
        let labels = build_pi_labels(ds, &observed, &cfg)?;
        let generator = match &checkpoint {
            Some(m) => m.clone(),
            None => train_mask_generator(ds, &labels, &cfg)?,
        };
        let mask = mask_from_model(&generator, ds, &labels, cfg.embedding)?;
        for (bin, count) in mask_histogram(&mask).into_iter().enumerate() {
            let lower = bin as f64 / HISTOGRAM_BINS as f64;
            let upper = (bin + 1) as f64 / HISTOGRAM_BINS as f64;
            hist.write_record([
                seed.to_string(),
                bin.to_string(),
                lower.to_string(),
                upper.to_string(),
                count.to_string(),
            ])
            .map_err(|e| CliError::usage(format!("csv: {e}")))?;
        }
        if args.compare {
            let comparison = compare_confidence_halves(ds, &observed, &cfg, &labels, &mask)?;
            if !quiet {
                eprintln!(
                    "seed {seed}: confident half {:.4}, unconfident half {:.4}",
                    comparison.top_acc, comparison.bottom_acc
                );
            }
            comparisons.push(SeedComparison { seed, comparison });
        } else if !quiet {
            eprintln!("seed {seed}: {} scored pairs", mask.len());
        }
    }
    let bytes = hist
        .into_inner()
        .map_err(|e| CliError::usage(format!("csv: {e}")))?;
    emit(
        args.hist_out.as_deref(),
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )?;

    if args.compare {
        let col = |f: fn(&ConfidenceComparison) -> f64| -> Vec<f64> {
            comparisons.iter().map(|c| f(&c.comparison)).collect()
        };
        let (mean_top, _) = mean_std(&col(|c| c.top_acc));
        let (mean_bottom, _) = mean_std(&col(|c| c.bottom_acc));
        let (mean_diff, std_diff) = mean_std(&col(|c| c.difference));
        let report = ComparisonReport {
            dataset: ds.name.clone(),
            seeds: comparisons,
            mean_top_acc: mean_top.expect("at least one seed"),
            mean_bottom_acc: mean_bottom.expect("at least one seed"),
            mean_difference: mean_diff.expect("at least one seed"),
            std_difference: std_diff,
        };
        emit(args.compare_out.as_deref(), &to_json(&report))?;
    }
    Ok(())
}
