//! Pairwise-interaction (PI) labels and the pair similarity loss.
//!
//! A [`PiLabelSet`] assigns every unordered node pair `i < j` a binary label:
//! positive pairs should have similar embeddings, negative pairs dissimilar
//! ones. Negatives are either the full complement of the positive set
//! (scored densely through `H Hᵀ`) or a seeded sample of it.

mod loss;
mod propagation;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use loss::{confidence_mask, pi_loss, pi_loss_and_mask, sigmoid, PiLoss, PiReduction};
pub use propagation::{label_propagation, LP_MAX_ITER, LP_TOL};

/// Largest node count for which the dense all-pairs complement is used by
/// default, and allowed at all for label-comparison labels.
pub const MAX_DENSE_NODES: usize = 4000;

/// Negatives sampled per positive when the complement is too large.
pub const DEFAULT_NEGATIVES_PER_POSITIVE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiSource {
    /// Connected pairs are positive.
    Adjacency,
    /// Pairs with equal (propagated, noisy) class labels are positive.
    LabelComparison,
    /// Pairs are positive independently with a fixed probability.
    Random,
}

impl fmt::Display for PiSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PiSource::Adjacency => "adjacency",
            PiSource::LabelComparison => "label_comparison",
            PiSource::Random => "random",
        })
    }
}

impl FromStr for PiSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacency" | "adj" => Ok(PiSource::Adjacency),
            "label" | "label_comparison" | "labels" => Ok(PiSource::LabelComparison),
            "random" => Ok(PiSource::Random),
            other => Err(Error::invalid(format!("unknown PI label source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    /// Every non-positive pair is a negative.
    AllComplement,
    /// `per_positive` distinct negatives per positive, drawn uniformly from
    /// the complement. Their loss terms are rescaled to stand in for the
    /// whole complement.
    Sampled { per_positive: usize, seed: u64 },
}

impl NegativePolicy {
    pub fn auto(num_nodes: usize, seed: u64) -> NegativePolicy {
        if num_nodes <= MAX_DENSE_NODES {
            NegativePolicy::AllComplement
        } else {
            NegativePolicy::Sampled {
                per_positive: DEFAULT_NEGATIVES_PER_POSITIVE,
                seed,
            }
        }
    }
}

/// Binary labels over unordered node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PiLabelSet {
    num_nodes: usize,
    source: PiSource,
    policy: NegativePolicy,
    positives: Vec<(u32, u32)>,
    /// Sorted sampled negatives; empty under `AllComplement`.
    negatives: Vec<(u32, u32)>,
    /// Per-node sorted positive partners (both directions).
    pos_indptr: Vec<usize>,
    pos_indices: Vec<u32>,
}

pub(crate) fn num_pairs(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

impl PiLabelSet {
    /// Assemble a label set from sorted-or-not pair lists. Pairs are
    /// normalized to `i < j`, sorted and deduplicated. Sampled negatives must
    /// be disjoint from the positives.
    pub fn from_parts(
        num_nodes: usize,
        source: PiSource,
        policy: NegativePolicy,
        positives: Vec<(u32, u32)>,
        negatives: Vec<(u32, u32)>,
    ) -> Result<PiLabelSet> {
        let normalize = |mut pairs: Vec<(u32, u32)>| -> Result<Vec<(u32, u32)>> {
            for p in pairs.iter_mut() {
                if p.0 == p.1 {
                    return Err(Error::invalid(format!("self-pair ({}, {})", p.0, p.1)));
                }
                if p.0.max(p.1) as usize >= num_nodes {
                    return Err(Error::invalid(format!(
                        "pair ({}, {}) out of range",
                        p.0, p.1
                    )));
                }
                if p.0 > p.1 {
                    *p = (p.1, p.0);
                }
            }
            pairs.sort_unstable();
            pairs.dedup();
            Ok(pairs)
        };
        let positives = normalize(positives)?;
        let negatives = normalize(negatives)?;
        if matches!(policy, NegativePolicy::AllComplement) && !negatives.is_empty() {
            return Err(Error::invalid(
                "explicit negatives given under the all-complement policy",
            ));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for &(i, j) in &positives {
            rows[i as usize].push(j);
            rows[j as usize].push(i);
        }
        let mut pos_indptr = vec![0];
        let mut pos_indices = Vec::with_capacity(positives.len() * 2);
        for mut r in rows {
            r.sort_unstable();
            pos_indices.extend(r);
            pos_indptr.push(pos_indices.len());
        }
        let set = PiLabelSet {
            num_nodes,
            source,
            policy,
            positives,
            negatives,
            pos_indptr,
            pos_indices,
        };
        if let Some(&(i, j)) = set
            .negatives
            .iter()
            .find(|&&(i, j)| set.is_positive(i as usize, j as usize))
        {
            return Err(Error::invalid(format!(
                "negative pair ({i}, {j}) is also positive"
            )));
        }
        Ok(set)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn source(&self) -> PiSource {
        self.source
    }

    pub fn policy(&self) -> NegativePolicy {
        self.policy
    }

    pub fn positives(&self) -> &[(u32, u32)] {
        &self.positives
    }

    pub fn sampled_negatives(&self) -> &[(u32, u32)] {
        &self.negatives
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.policy, NegativePolicy::AllComplement)
    }

    /// Sorted positive partners of node `i`.
    pub fn positive_partners(&self, i: usize) -> &[u32] {
        &self.pos_indices[self.pos_indptr[i]..self.pos_indptr[i + 1]]
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positive_partners(i).binary_search(&(j as u32)).is_ok()
    }

    /// Size of the full complement of the positive set.
    pub fn total_negatives(&self) -> u64 {
        num_pairs(self.num_nodes) - self.positives.len() as u64
    }

    /// Number of negatives that are actually scored.
    pub fn scored_negatives(&self) -> u64 {
        if self.is_dense() {
            self.total_negatives()
        } else {
            self.negatives.len() as u64
        }
    }

    /// Number of pairs in the scored enumeration (see [`Self::for_each_pair`]).
    pub fn num_scored_pairs(&self) -> usize {
        if self.is_dense() {
            num_pairs(self.num_nodes) as usize
        } else {
            self.positives.len() + self.negatives.len()
        }
    }

    /// Multiplier applied to each scored negative term so that sampled
    /// negatives stand in for the whole complement.
    pub fn negative_scale(&self) -> f64 {
        if self.is_dense() || self.negatives.is_empty() {
            1.0
        } else {
            self.total_negatives() as f64 / self.negatives.len() as f64
        }
    }

    /// Visit every scored pair as `(index, i, j, positive)`.
    ///
    /// Dense sets enumerate all `i < j` in row-major order (index is the
    /// upper-triangular offset); sampled sets enumerate positives followed by
    /// sampled negatives.
    pub fn for_each_pair(&self, mut f: impl FnMut(usize, usize, usize, bool)) {
        if self.is_dense() {
            let n = self.num_nodes;
            let mut k = 0;
            for i in 0..n {
                let partners = self.positive_partners(i);
                let mut p = partners.partition_point(|&j| (j as usize) <= i);
                for j in i + 1..n {
                    let y = p < partners.len() && partners[p] as usize == j;
                    if y {
                        p += 1;
                    }
                    f(k, i, j, y);
                    k += 1;
                }
            }
        } else {
            let mut k = 0;
            for &(i, j) in &self.positives {
                f(k, i as usize, j as usize, true);
                k += 1;
            }
            for &(i, j) in &self.negatives {
                f(k, i as usize, j as usize, false);
                k += 1;
            }
        }
    }

    fn with_sampled_negatives(
        num_nodes: usize,
        source: PiSource,
        positives: Vec<(u32, u32)>,
        policy: NegativePolicy,
        accept: impl Fn(usize, usize) -> bool,
    ) -> Result<PiLabelSet> {
        let NegativePolicy::Sampled { per_positive, seed } = policy else {
            return PiLabelSet::from_parts(num_nodes, source, policy, positives, Vec::new());
        };
        let base = PiLabelSet::from_parts(
            num_nodes,
            source,
            NegativePolicy::AllComplement,
            positives,
            Vec::new(),
        )?;
        let available = base.total_negatives();
        let target = (per_positive as u64 * base.positives.len() as u64).min(available);
        let mut negatives = Vec::with_capacity(target as usize);
        if target * 2 > available {
            // dense enough that enumerating beats rejection sampling
            base.for_each_pair(|_, i, j, y| {
                if !y && accept(i, j) {
                    negatives.push((i as u32, j as u32));
                }
            });
            if (negatives.len() as u64) > target {
                let mut rng = crate::rng::seeded(seed);
                for k in (1..negatives.len()).rev() {
                    negatives.swap(k, rng.random_range(0..=k));
                }
                negatives.truncate(target as usize);
            }
        } else {
            let mut rng = crate::rng::seeded(seed);
            let mut chosen = HashSet::with_capacity(target as usize);
            while (chosen.len() as u64) < target {
                let i = rng.random_range(0..num_nodes);
                let j = rng.random_range(0..num_nodes);
                if i == j {
                    continue;
                }
                let (i, j) = (i.min(j), i.max(j));
                if base.is_positive(i, j) || !accept(i, j) {
                    continue;
                }
                if chosen.insert((i as u32, j as u32)) {
                    negatives.push((i as u32, j as u32));
                }
            }
        }
        PiLabelSet::from_parts(num_nodes, source, policy, base.positives, negatives)
    }
}

/// Positives are the undirected edges of `g`.
pub fn pi_labels_from_adjacency(g: &Graph, policy: NegativePolicy) -> Result<PiLabelSet> {
    let positives = g.edges().map(|(i, j)| (i as u32, j as u32)).collect();
    PiLabelSet::with_sampled_negatives(
        g.num_nodes(),
        PiSource::Adjacency,
        positives,
        policy,
        |_, _| true,
    )
}

/// Positives are pairs sharing a class label. Dense complements are refused
/// above [`MAX_DENSE_NODES`] nodes.
pub fn pi_labels_from_label_comparison(
    labels: &[usize],
    policy: NegativePolicy,
) -> Result<PiLabelSet> {
    let n = labels.len();
    if matches!(policy, NegativePolicy::AllComplement) && n > MAX_DENSE_NODES {
        return Err(Error::invalid(format!(
            "{} label-comparison pairs exceed the dense cap ({} nodes); use a sampled negative policy",
            num_pairs(n),
            MAX_DENSE_NODES
        )));
    }
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (v, &y) in labels.iter().enumerate() {
        by_class[y].push(v as u32);
    }
    let mut positives = Vec::new();
    for members in &by_class {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                positives.push((i, j));
            }
        }
    }
    PiLabelSet::with_sampled_negatives(n, PiSource::LabelComparison, positives, policy, |i, j| {
        labels[i] != labels[j]
    })
}

/// Every unordered pair is positive independently with probability `density`.
pub fn pi_labels_random(
    num_nodes: usize,
    density: f64,
    seed: u64,
    policy: NegativePolicy,
) -> Result<PiLabelSet> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0, 1]")));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut positives = Vec::new();
    for i in 0..num_nodes {
        for j in i + 1..num_nodes {
            if rng.random::<f64>() < density {
                positives.push((i as u32, j as u32));
            }
        }
    }
    PiLabelSet::with_sampled_negatives(num_nodes, PiSource::Random, positives, policy, |_, _| true)
}

/// Per-pair weights in `[0, 1]`, aligned with the scored-pair enumeration of
/// the label set they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    values: Vec<f64>,
}

impl PairWeights {
    pub fn ones(len: usize) -> PairWeights {
        PairWeights {
            values: vec![1.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<PairWeights> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pair weight {v} outside [0, 1]")));
        }
        Ok(PairWeights { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::Array2;

    fn graph(edges: &[(usize, usize)], n: usize) -> Graph {
        build_graph(edges, n, Array2::zeros((n, 1))).unwrap()
    }

    #[test]
    fn triangle_has_no_negatives() {
        let g = graph(&[(0, 1), (1, 2), (0, 2)], 3);
        let s = pi_labels_from_adjacency(&g, NegativePolicy::AllComplement).unwrap();
        assert_eq!(s.positives(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(s.total_negatives(), 0);
    }

    #[test]
    fn two_isolated_nodes() {
        let s = pi_labels_from_adjacency(&graph(&[], 2), NegativePolicy::AllComplement).unwrap();
        assert!(s.positives().is_empty());
        assert_eq!(s.total_negatives(), 1);
        let mut seen = Vec::new();
        s.for_each_pair(|k, i, j, y| seen.push((k, i, j, y)));
        assert_eq!(seen, vec![(0, 0, 1, false)]);
    }

    #[test]
    fn label_comparison_small() {
        let s = pi_labels_from_label_comparison(&[0, 0, 1], NegativePolicy::AllComplement).unwrap();
        assert_eq!(s.positives(), &[(0, 1)]);
        let mut neg = Vec::new();
        s.for_each_pair(|_, i, j, y| {
            if !y {
                neg.push((i, j))
            }
        });
        assert_eq!(neg, vec![(0, 2), (1, 2)]);
        let same =
            pi_labels_from_label_comparison(&[2, 2, 2, 2], NegativePolicy::AllComplement).unwrap();
        assert_eq!(same.positives().len(), 6);
        assert_eq!(same.total_negatives(), 0);
    }

    #[test]
    fn label_comparison_cap() {
        let labels = vec![0; MAX_DENSE_NODES + 1];
        assert!(pi_labels_from_label_comparison(&labels, NegativePolicy::AllComplement).is_err());
    }

    #[test]
    fn random_density_extremes() {
        assert!(pi_labels_random(30, 0.0, 1, NegativePolicy::AllComplement)
            .unwrap()
            .positives()
            .is_empty());
        let full = pi_labels_random(30, 1.0, 1, NegativePolicy::AllComplement).unwrap();
        assert_eq!(full.positives().len(), 435);
        assert!(pi_labels_random(3, 1.5, 1, NegativePolicy::AllComplement).is_err());
    }

    #[test]
    fn sampled_negatives_are_disjoint_and_scaled() {
        let edges: Vec<(usize, usize)> = (0..99).map(|i| (i, i + 1)).collect();
        let g = graph(&edges, 100);
        let policy = NegativePolicy::Sampled {
            per_positive: 5,
            seed: 3,
        };
        let s = pi_labels_from_adjacency(&g, policy).unwrap();
        assert_eq!(s.sampled_negatives().len(), 5 * 99);
        for &(i, j) in s.sampled_negatives() {
            assert!(i < j);
            assert!(!g.has_edge(i as usize, j as usize));
        }
        let want = (4950.0 - 99.0) / 495.0;
        assert!((s.negative_scale() - want).abs() < 1e-12);
        assert_eq!(s.num_scored_pairs(), 99 + 495);
        assert_eq!(s, pi_labels_from_adjacency(&g, policy).unwrap());
    }

    #[test]
    fn sampling_falls_back_to_enumeration_when_dense() {
        let g = graph(&[(0, 1), (1, 2)], 4);
        let s = pi_labels_from_adjacency(
            &g,
            NegativePolicy::Sampled {
                per_positive: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(s.sampled_negatives().len(), 4);
    }

    #[test]
    fn sampled_label_negatives_differ_in_label() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let s = pi_labels_from_label_comparison(
            &labels,
            NegativePolicy::Sampled {
                per_positive: 1,
                seed: 9,
            },
        )
        .unwrap();
        for &(i, j) in s.sampled_negatives() {
            assert_ne!(labels[i as usize], labels[j as usize]);
        }
    }

    #[test]
    fn from_parts_validation() {
        assert!(PiLabelSet::from_parts(
            3,
            PiSource::Random,
            NegativePolicy::AllComplement,
            vec![(1, 1)],
            vec![]
        )
        .is_err());
        assert!(PiLabelSet::from_parts(
            3,
            PiSource::Random,
            NegativePolicy::AllComplement,
            vec![(0, 3)],
            vec![]
        )
        .is_err());
        let sampled = NegativePolicy::Sampled {
            per_positive: 1,
            seed: 0,
        };
        assert!(
            PiLabelSet::from_parts(3, PiSource::Random, sampled, vec![(0, 1)], vec![(1, 0)])
                .is_err()
        );
        let s = PiLabelSet::from_parts(
            3,
            PiSource::Random,
            NegativePolicy::AllComplement,
            vec![(2, 0)],
            vec![],
        )
        .unwrap();
        assert_eq!(s.positives(), &[(0, 2)]);
    }

    #[test]
    fn dense_enumeration_matches_triangular_index() {
        let n = 7;
        let g = graph(&[(0, 3), (2, 6), (5, 6)], n);
        let s = pi_labels_from_adjacency(&g, NegativePolicy::AllComplement).unwrap();
        let mut count = 0;
        s.for_each_pair(|k, i, j, y| {
            assert_eq!(k, i * n - i * (i + 1) / 2 + (j - i - 1));
            assert_eq!(y, g.has_edge(i, j));
            count += 1;
        });
        assert_eq!(count, s.num_scored_pairs());
    }

    #[test]
    fn weights_validate_range() {
        assert!(PairWeights::from_values(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(PairWeights::from_values(vec![1.1]).is_err());
        assert_eq!(PairWeights::ones(4).mean(), 1.0);
    }
}
