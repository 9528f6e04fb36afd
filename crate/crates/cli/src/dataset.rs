use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pignn::data::{generate_sbm, load_csv_graph, load_raw_citation, Dataset, RunInputs, SbmSpec};
use pignn::graph::ExplicitSplit;
use pignn::noise::{corrupt_labels, NoiseSpec};
use pignn::rng::{derive_seed, stream};
use pignn::{Role, SplitPolicy};
use serde::{Deserialize, Serialize};

use crate::args::{SourceArgs, SplitArgs};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_per_class: usize,
    pub val_per_class: usize,
    /// Explicit node lists; replaces the per-class counts.
    pub file: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_per_class: 20,
            val_per_class: 30,
            file: None,
        }
    }
}

impl SplitConfig {
    pub fn policy(&self) -> CliResult<SplitPolicy> {
        Ok(match &self.file {
            Some(path) => SplitPolicy::Explicit(ExplicitSplit::from_json_file(path)?),
            None => SplitPolicy::PerClass {
                train_k: self.train_per_class,
                val_k: self.val_per_class,
            },
        })
    }
}

impl From<&SplitArgs> for SplitConfig {
    fn from(a: &SplitArgs) -> Self {
        SplitConfig {
            train_per_class: a.train_per_class,
            val_per_class: a.val_per_class,
            file: a.split_file.clone(),
        }
    }
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetRef {
    /// A directory written by `prepare`; its split is kept.
    Bundle { path: PathBuf },
    Sbm {
        #[serde(default)]
        sbm: SbmSpec,
        #[serde(default)]
        split: SplitConfig,
    },
    Raw {
        content: PathBuf,
        cites: PathBuf,
        #[serde(default)]
        split: SplitConfig,
    },
    Csv {
        nodes: PathBuf,
        edges: PathBuf,
        #[serde(default)]
        split: SplitConfig,
    },
}

impl DatasetRef {
    pub fn from_args(source: &SourceArgs, split: &SplitArgs) -> CliResult<DatasetRef> {
        let split = SplitConfig::from(split);
        if let Some(tokens) = &source.sbm {
            return Ok(DatasetRef::Sbm {
                sbm: parse_sbm_tokens(tokens)?,
                split,
            });
        }
        if let (Some(content), Some(cites)) = (&source.content, &source.cites) {
            return Ok(DatasetRef::Raw {
                content: content.clone(),
                cites: cites.clone(),
                split,
            });
        }
        if let (Some(nodes), Some(edges)) = (&source.nodes_csv, &source.edges_csv) {
            return Ok(DatasetRef::Csv {
                nodes: nodes.clone(),
                edges: edges.clone(),
                split,
            });
        }
        Err(CliError::usage(
            "no dataset: pass --sbm, --content/--cites or --nodes-csv/--edges-csv",
        ))
    }

    /// Resolve relative paths against `base` (the directory of a spec file).
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetRef::Bundle { path } => fix(path),
            DatasetRef::Sbm { split, .. } => split.file.iter_mut().for_each(fix),
            DatasetRef::Raw {
                content,
                cites,
                split,
            } => {
                fix(content);
                fix(cites);
                split.file.iter_mut().for_each(fix);
            }
            DatasetRef::Csv {
                nodes,
                edges,
                split,
            } => {
                fix(nodes);
                fix(edges);
                split.file.iter_mut().for_each(fix);
            }
        }
    }

    pub fn load(&self) -> CliResult<RunInputs> {
        let mut seeds = BTreeMap::new();
        let dataset = match self {
            DatasetRef::Bundle { path } => return Ok(RunInputs::load(path)?),
            DatasetRef::Sbm { sbm, split } => {
                seeds.insert("sbm".to_owned(), sbm.rng_seed);
                generate_sbm(sbm, &split.policy()?)?
            }
            DatasetRef::Raw {
                content,
                cites,
                split,
            } => load_raw_citation(content, cites, &split.policy()?)?.0,
            DatasetRef::Csv {
                nodes,
                edges,
                split,
            } => load_csv_graph(nodes, edges, &split.policy()?)?.0,
        };
        Ok(RunInputs {
            dataset,
            corrupted_labels: None,
            seeds,
        })
    }
}

/// Parse `key=value` tokens over the default SBM.
pub fn parse_sbm_tokens(tokens: &[String]) -> CliResult<SbmSpec> {
    let mut spec = SbmSpec::default();
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--sbm token `{token}` is not KEY=VALUE")))?;
        let bad = || CliError::usage(format!("--sbm {key}: bad value `{value}`"));
        match key.replace('_', "-").as_str() {
            "blocks" => spec.num_blocks = value.parse().map_err(|_| bad())?,
            "size" => spec.block_size = value.parse().map_err(|_| bad())?,
            "p-in" => spec.p_in = value.parse().map_err(|_| bad())?,
            "p-out" => spec.p_out = value.parse().map_err(|_| bad())?,
            "dim" => spec.feature_dim = value.parse().map_err(|_| bad())?,
            "signal" => spec.feature_signal = value.parse().map_err(|_| bad())?,
            "seed" => spec.rng_seed = value.parse().map_err(|_| bad())?,
            _ => {
                return Err(CliError::usage(format!(
                    "unknown --sbm key `{key}` (blocks, size, p-in, p-out, dim, signal, seed)"
                )))
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Labels a run trains on, and where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelChoice {
    /// `clean`, `bundle` or `generated`.
    pub source: String,
    pub noise: Option<NoiseSpec>,
    pub noise_seed: Option<u64>,
    pub clean_val: bool,
}

/// Corrupt with `noise` when given (seed defaults to one derived from
/// `run_seed`), else take the bundle's stored labels, else the clean ones.
pub fn observed_labels(
    inputs: &RunInputs,
    noise: Option<NoiseSpec>,
    noise_seed: Option<u64>,
    clean_val: bool,
    run_seed: u64,
) -> CliResult<(Vec<usize>, LabelChoice)> {
    let ds = &inputs.dataset;
    if let Some(spec) = noise {
        let seed = noise_seed.unwrap_or_else(|| derive_seed(run_seed, stream::NOISE));
        let q = spec.matrix(ds.num_classes)?;
        let labels = corrupt_labels(&ds.clean_labels, &q, &ds.split, seed, clean_val);
        return Ok((
            labels,
            LabelChoice {
                source: "generated".into(),
                noise: Some(spec),
                noise_seed: Some(seed),
                clean_val,
            },
        ));
    }
    if noise_seed.is_some() {
        return Err(CliError::usage("--noise-seed needs --noise"));
    }
    Ok(match &inputs.corrupted_labels {
        Some(labels) => (
            labels.clone(),
            LabelChoice {
                source: "bundle".into(),
                noise: None,
                noise_seed: inputs.seeds.get("noise").copied(),
                clean_val,
            },
        ),
        None => (
            ds.clean_labels.clone(),
            LabelChoice {
                source: "clean".into(),
                noise: None,
                noise_seed: None,
                clean_val,
            },
        ),
    })
}

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        DatasetSummary {
            name: ds.name.clone(),
            num_nodes: ds.num_nodes(),
            num_edges: ds.graph.num_edges(),
            num_classes: ds.num_classes,
            feature_dim: ds.graph.feature_dim(),
            train: ds.split.count(Role::Train),
            val: ds.split.count(Role::Val),
            test: ds.split.count(Role::Test),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_tokens() {
        let spec =
            parse_sbm_tokens(&["blocks=3".into(), "p_in=0.1".into(), "seed=7".into()]).unwrap();
        assert_eq!(spec.num_blocks, 3);
        assert_eq!(spec.p_in, 0.1);
        assert_eq!(spec.rng_seed, 7);
        assert_eq!(spec.block_size, 250);
        assert!(parse_sbm_tokens(&["color=red".into()]).is_err());
        assert!(parse_sbm_tokens(&["blocks".into()]).is_err());
    }

    #[test]
    fn dataset_ref_json() {
        let r: DatasetRef = serde_json::from_str(
            r#"{"source": "sbm", "sbm": {"block_size": 40}, "split": {"train_per_class": 5}}"#,
        )
        .unwrap();
        match r {
            DatasetRef::Sbm { sbm, split } => {
                assert_eq!(sbm.block_size, 40);
                assert_eq!(split.train_per_class, 5);
                assert_eq!(split.val_per_class, 30);
            }
            other => panic!("{other:?}"),
        }
    }
}
