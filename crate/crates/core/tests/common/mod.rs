#![allow(dead_code)]

use ndarray::Array2;
use pignn::data::{generate_sbm, Dataset, SbmSpec};
use pignn::graph::build_graph;
use pignn::{Graph, SplitPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph with Gaussian features.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, dim: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let features = Array2::from_shape_simple_fn((n, dim), || rng.random::<f64>() * 2.0 - 1.0);
    build_graph(&edges, n, features).unwrap()
}

pub fn random_embeddings(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || (rng.random::<f64>() * 2.0 - 1.0) * scale)
}

/// Small SBM with 5 train / 5 val nodes per class.
pub fn small_sbm(blocks: usize, size: usize, seed: u64) -> Dataset {
    let spec = SbmSpec {
        num_blocks: blocks,
        block_size: size,
        p_in: 0.1,
        p_out: 0.01,
        feature_dim: 8,
        feature_signal: 1.0,
        rng_seed: seed,
    };
    generate_sbm(
        &spec,
        &SplitPolicy::PerClass {
            train_k: 5,
            val_k: 5,
        },
    )
    .unwrap()
}
