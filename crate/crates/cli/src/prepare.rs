use std::collections::BTreeMap;

use pignn::noise::corrupt_labels;
use pignn::rng::{derive_seed, stream};
use serde::Serialize;

use crate::args::PrepareArgs;
use crate::dataset::{DatasetRef, DatasetSummary};
use crate::error::CliResult;
use crate::output::{emit, to_json};

#[derive(Serialize)]
struct PrepareSummary {
    out: String,
    #[serde(flatten)]
    dataset: DatasetSummary,
    noise: Option<String>,
    seeds: BTreeMap<String, u64>,
    sha256: BTreeMap<String, String>,
}

pub fn prepare(args: &PrepareArgs, quiet: bool) -> CliResult<()> {
    let source = DatasetRef::from_args(&args.source, &args.split)?;
    let mut inputs = source.load()?;
    if let Some(spec) = args.noise {
        let seed = args.noise_seed.unwrap_or_else(|| {
            derive_seed(inputs.seeds.get("sbm").copied().unwrap_or(0), stream::NOISE)
        });
        let ds = &inputs.dataset;
        let q = spec.matrix(ds.num_classes)?;
        inputs.corrupted_labels = Some(corrupt_labels(
            &ds.clean_labels,
            &q,
            &ds.split,
            seed,
            args.clean_val,
        ));
        inputs.seeds.insert("noise".into(), seed);
        inputs
            .dataset
            .meta
            .insert("noise".into(), spec.to_string().into());
        inputs
            .dataset
            .meta
            .insert("clean_val".into(), args.clean_val.into());
    }
    let manifest = inputs.save(&args.out)?;
    if !quiet {
        eprintln!(
            "prepared {} ({} nodes) in {}",
            manifest.name,
            manifest.num_nodes,
            args.out.display()
        );
    }
    let summary = PrepareSummary {
        out: args.out.display().to_string(),
        dataset: DatasetSummary::of(&inputs.dataset),
        noise: args.noise.map(|n| n.to_string()),
        seeds: manifest.seeds.clone(),
        sha256: manifest
            .files
            .iter()
            .map(|(k, f)| (k.clone(), f.sha256.clone()))
            .collect(),
    };
    emit(None, &to_json(&summary))
}
