//! Datasets: raw citation loaders, a stochastic block model generator and
//! the on-disk bundle format for experiment inputs, checkpoints and PI labels.

mod bundle;
mod raw;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, make_split, Graph, Split, SplitPolicy};

pub use bundle::{
    load_model, load_pi_labels, save_model, save_pi_labels, Bundle, BundleWriter, Dtype, FileEntry,
    Manifest, RunInputs, FORMAT_VERSION,
};
pub use raw::{load_csv_graph, load_raw_citation, LoadReport};

/// Twenty training and thirty validation nodes per class.
pub const DEFAULT_SPLIT: SplitPolicy = SplitPolicy::PerClass {
    train_k: 20,
    val_k: 30,
};

pub type Meta = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub clean_labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
    /// Free-form provenance (generator spec, loader warnings, reference
    /// statistics).
    pub meta: Meta,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        clean_labels: Vec<usize>,
        num_classes: usize,
        split: Split,
        meta: Meta,
    ) -> Result<Dataset> {
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "{num_classes} classes; need at least 2"
            )));
        }
        if clean_labels.len() != graph.num_nodes() || split.len() != graph.num_nodes() {
            return Err(Error::Shape(format!(
                "{} labels and {} split roles for {} nodes",
                clean_labels.len(),
                split.len(),
                graph.num_nodes()
            )));
        }
        if let Some((v, y)) = clean_labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y >= num_classes)
        {
            return Err(Error::invalid(format!(
                "label {y} of node {v} out of range"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            graph,
            clean_labels,
            num_classes,
            split,
            meta,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Same data under a different split.
    pub fn with_split(mut self, policy: &SplitPolicy) -> Result<Dataset> {
        self.split = make_split(&self.clean_labels, self.num_classes, policy)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmSpec {
    pub num_blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Mean offset added to the feature coordinates owned by a node's block.
    pub feature_signal: f64,
    pub rng_seed: u64,
}

impl Default for SbmSpec {
    /// Four blocks of 250 nodes, sparse within-block edges and weak features.
    fn default() -> Self {
        SbmSpec {
            num_blocks: 4,
            block_size: 250,
            p_in: 0.02,
            p_out: 0.002,
            feature_dim: 16,
            feature_signal: 1.0,
            rng_seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks < 2 || self.block_size == 0 {
            return Err(Error::invalid("an SBM needs at least 2 non-empty blocks"));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if !(self.feature_signal >= 0.0 && self.feature_signal.is_finite()) {
            return Err(Error::invalid(format!(
                "feature signal {} must be finite and >= 0",
                self.feature_signal
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        Ok(())
    }
}

/// Sample a planted-partition graph. Node `v` belongs to block
/// `v / block_size`, which is also its label. Feature coordinate `c` belongs to
/// block `c % num_blocks`; features are unit Gaussians shifted by
/// `feature_signal` on the owned coordinates.
pub fn generate_sbm(spec: &SbmSpec, policy: &SplitPolicy) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.num_blocks * spec.block_size;
    let labels: Vec<usize> = (0..n).map(|v| v / spec.block_size).collect();

    let mut rng = crate::rng::seeded(crate::rng::derive_seed(spec.rng_seed, 1));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut rng = crate::rng::seeded(crate::rng::derive_seed(spec.rng_seed, 2));
    let mut features = Array2::<f64>::zeros((n, spec.feature_dim));
    for (v, mut row) in features.rows_mut().into_iter().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *x = noise
                + if c % spec.num_blocks == labels[v] {
                    spec.feature_signal
                } else {
                    0.0
                };
        }
    }

    let graph = build_graph(&edges, n, features)?;
    let split = make_split(&labels, spec.num_blocks, policy)?;
    let mut meta = Meta::new();
    meta.insert(
        "generator".into(),
        serde_json::to_value(spec).expect("plain struct"),
    );
    Dataset::new(
        format!("sbm{}x{}", spec.num_blocks, spec.block_size),
        graph,
        labels,
        spec.num_blocks,
        split,
        meta,
    )
}
