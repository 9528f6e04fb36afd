use serde::{Deserialize, Serialize};

use super::{train_with_fixed_weights, RunSeeds, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, backward, forward, forward_with_dropout, init_model, EmbeddingSource, ModelState,
};
use crate::pi::{confidence_mask, pi_loss, PairWeights, PiLabelSet};

pub const HISTOGRAM_BINS: usize = 64;

/// Bin of a value in `[0, 1]` among [`HISTOGRAM_BINS`] equal bins; 1.0
/// lands in the last bin.
pub fn histogram_bin(v: f64) -> usize {
    ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn mask_histogram(weights: &PairWeights) -> Vec<u64> {
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &v in weights.values() {
        counts[histogram_bin(v)] += 1;
    }
    counts
}

/// Confidence mask of a trained mask generator.
pub fn mask_from_model(
    model: &ModelState,
    ds: &Dataset,
    labels: &PiLabelSet,
    embed: EmbeddingSource,
) -> Result<PairWeights> {
    let trace = forward(model, &ds.graph, embed)?;
    confidence_mask(trace.embeddings(), labels)
}

/// Train a mask generator on its own for `cfg.epochs` epochs. With the same
/// configuration it follows exactly the trajectory it has inside a joint run.
pub fn train_mask_generator(
    ds: &Dataset,
    labels: &PiLabelSet,
    cfg: &TrainConfig,
) -> Result<ModelState> {
    cfg.validate()?;
    let seeds = RunSeeds::new(cfg.seed);
    let dims = cfg.dims(ds, cfg.arch_mask, cfg.hidden_mask);
    let mut model = init_model(cfg.arch_mask, &dims, seeds.mask_init)?;
    let opt = cfg.optimizer(cfg.arch_mask);
    let mut rng = crate::rng::seeded(seeds.mask_dropout);
    let zero = ndarray::Array2::<f64>::zeros((ds.num_nodes(), dims[2]));
    for epoch in 1..=cfg.epochs {
        let trace = forward_with_dropout(&model, &ds.graph, cfg.embedding, cfg.dropout, &mut rng)
            .map_err(super::diverged(epoch, "mask generator"))?;
        let l = pi_loss(trace.embeddings(), labels, None, cfg.reduction)?;
        super::finite(epoch, "mask generator PI loss", l.loss)?;
        let grads = backward(&model, &ds.graph, &trace, &zero, Some(&l.grad))?;
        adam_step(&mut model, &grads, &opt).map_err(super::diverged(epoch, "mask generator"))?;
    }
    Ok(model)
}

/// Split scored pairs into the more confident and the less confident half
/// as 0/1 weights `(top, bottom)`. Positive and negative pairs are ranked
/// separately by `(confidence, index)` so both halves keep the same label
/// mix; with an odd count the extra pair goes to the top half.
pub fn split_by_confidence(
    mask: &PairWeights,
    labels: &PiLabelSet,
) -> Result<(PairWeights, PairWeights)> {
    let values = mask.values();
    let mut positive = vec![false; values.len()];
    let mut seen = 0;
    labels.for_each_pair(|k, _, _, y| {
        if k < positive.len() {
            positive[k] = y;
        }
        seen += 1;
    });
    if seen != values.len() {
        return Err(Error::Shape(format!(
            "mask has {} values for {seen} scored pairs",
            values.len()
        )));
    }
    let mut top = vec![1.0; values.len()];
    let mut bottom = vec![0.0; values.len()];
    for class in [true, false] {
        let mut order: Vec<usize> = (0..values.len())
            .filter(|&k| positive[k] == class)
            .collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        for &k in &order[..order.len() / 2] {
            top[k] = 0.0;
            bottom[k] = 1.0;
        }
    }
    Ok((
        PairWeights::from_values(top).expect("0/1 weights"),
        PairWeights::from_values(bottom).expect("0/1 weights"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceComparison {
    /// Final clean test accuracy when only the confident half is used.
    pub top_acc: f64,
    pub bottom_acc: f64,
    pub difference: f64,
}

/// Train two task executors that see the pair loss only on the confident
/// half or only on the unconfident half of `mask`.
pub fn compare_confidence_halves(
    ds: &Dataset,
    observed: &[usize],
    cfg: &TrainConfig,
    labels: &PiLabelSet,
    mask: &PairWeights,
) -> Result<ConfidenceComparison> {
    let (top, bottom) = split_by_confidence(mask, labels)?;
    let (_, top_run) = train_with_fixed_weights(ds, observed, cfg, labels, &top)?;
    let (_, bottom_run) = train_with_fixed_weights(ds, observed, cfg, labels, &bottom)?;
    let top_acc = top_run.metrics.final_test_acc;
    let bottom_acc = bottom_run.metrics.final_test_acc;
    Ok(ConfidenceComparison {
        top_acc,
        bottom_acc,
        difference: top_acc - bottom_acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi::{NegativePolicy, PiSource};

    #[test]
    fn bins() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(0.5), 32);
        assert_eq!(histogram_bin(1.0), 63);
        assert_eq!(histogram_bin(1.0 / 64.0), 1);
        assert_eq!(histogram_bin(0.999), 63);
    }

    #[test]
    fn histogram_conserves_count() {
        let w = PairWeights::from_values(vec![0.0, 0.5, 0.5, 0.99, 0.2]).unwrap();
        let h = mask_histogram(&w);
        assert_eq!(h.iter().sum::<u64>(), 5);
        assert_eq!(h[32], 2);
    }

    #[test]
    fn halves_are_stratified() {
        // 4 nodes, positives (0,1) and (2,3); pair order (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
        let labels = PiLabelSet::from_parts(
            4,
            PiSource::Adjacency,
            NegativePolicy::AllComplement,
            vec![(0, 1), (2, 3)],
            vec![],
        )
        .unwrap();
        let w = PairWeights::from_values(vec![0.6, 0.9, 0.1, 0.5, 0.5, 0.7]).unwrap();
        let (top, bottom) = split_by_confidence(&w, &labels).unwrap();
        assert_eq!(top.values(), &[0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(bottom.values(), &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let short = PairWeights::from_values(vec![0.5; 5]).unwrap();
        assert!(split_by_confidence(&short, &labels).is_err());
    }
}
