use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{num_pairs, PairWeights, PiLabelSet};
use crate::error::{Error, Result};

/// How the per-pair terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiReduction {
    /// Plain sum over pairs; pair with the sparsity-aware loss weight.
    #[default]
    Sum,
    /// Sum divided by the number of unordered node pairs.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiLoss {
    pub loss: f64,
    /// Gradient w.r.t. the embedding matrix.
    pub grad: Array2<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-pair quantities at logit `z = hᵢ·hⱼ`.
struct PairTerm {
    /// Binary cross-entropy against the pair label.
    loss: f64,
    /// `σ(z) − y`, the derivative of `loss` w.r.t. `z`.
    coef: f64,
    /// Probability the prediction assigns to the pair label.
    confidence: f64,
}

impl PairTerm {
    #[inline]
    fn new(z: f64, positive: bool) -> PairTerm {
        // With e = exp(-|z|): σ(|z|) = 1/(1+e) and σ(-|z|) = e/(1+e).
        let e = (-z.abs()).exp();
        let d = 1.0 + e;
        let hi = 1.0 / d;
        let lo = e * hi;
        let (sig, one_minus_sig) = if z >= 0.0 { (hi, lo) } else { (lo, hi) };
        let y = if positive { 1.0 } else { 0.0 };
        PairTerm {
            loss: z.max(0.0) - z * y + d.ln(),
            coef: if positive { -one_minus_sig } else { sig },
            confidence: if positive { sig } else { one_minus_sig },
        }
    }
}

fn check(h: &Array2<f64>, labels: &PiLabelSet, weights: Option<&PairWeights>) -> Result<()> {
    if h.nrows() != labels.num_nodes() {
        return Err(Error::Shape(format!(
            "{} embedding rows for a {}-node label set",
            h.nrows(),
            labels.num_nodes()
        )));
    }
    if let Some(w) = weights {
        if w.len() != labels.num_scored_pairs() {
            return Err(Error::Shape(format!(
                "{} pair weights for {} scored pairs",
                w.len(),
                labels.num_scored_pairs()
            )));
        }
    }
    Ok(())
}

/// Weighted pair loss
/// `Σ₊ −w log σ(hᵢ·hⱼ) + Σ₋ −w log(1 − σ(hᵢ·hⱼ))` and its gradient.
///
/// `weights = None` means unit weights. Sampled negatives are scaled by
/// [`PiLabelSet::negative_scale`].
pub fn pi_loss(
    h: &Array2<f64>,
    labels: &PiLabelSet,
    weights: Option<&PairWeights>,
    reduction: PiReduction,
) -> Result<PiLoss> {
    check(h, labels, weights)?;
    Ok(evaluate(h, labels, weights, reduction, None))
}

/// Unweighted [`pi_loss`] together with [`confidence_mask`] of the same
/// embeddings, sharing one pass over the pairs.
pub fn pi_loss_and_mask(
    h: &Array2<f64>,
    labels: &PiLabelSet,
    reduction: PiReduction,
) -> Result<(PiLoss, PairWeights)> {
    check(h, labels, None)?;
    let mut mask = Vec::with_capacity(labels.num_scored_pairs());
    let loss = evaluate(h, labels, None, reduction, Some(&mut mask));
    Ok((loss, PairWeights::from_values(mask)?))
}

fn evaluate(
    h: &Array2<f64>,
    labels: &PiLabelSet,
    weights: Option<&PairWeights>,
    reduction: PiReduction,
    mut mask: Option<&mut Vec<f64>>,
) -> PiLoss {
    let n = h.nrows();
    let wv = weights.map(|w| w.values());
    let mut loss = 0.0;
    let mut grad;
    if labels.is_dense() {
        // Score all pairs through S = H Hᵀ and overwrite S in place with the
        // strict upper triangle U of the coefficient matrix; the gradient is
        // then (U + Uᵀ) H. S is symmetric, so memory order does not matter.
        let mut s = h.dot(&h.t());
        let ones = if wv.is_none() {
            vec![1.0; n]
        } else {
            Vec::new()
        };
        if let Some(m) = mask.as_deref_mut() {
            m.resize(labels.num_scored_pairs(), 0.0);
        }
        {
            let g = s.as_slice_memory_order_mut().expect("contiguous product");
            let mut k = 0;
            for i in 0..n {
                let row = &mut g[i * n..(i + 1) * n];
                row[..=i].fill(0.0);
                let len = n - i - 1;
                let w = match wv {
                    Some(w) => &w[k..k + len],
                    None => &ones[..len],
                };
                let mut conf = mask.as_deref_mut().map(|m| &mut m[k..k + len]);
                let partners = labels.positive_partners(i);
                let above = &partners[partners.partition_point(|&j| (j as usize) <= i)..];
                // Runs of negatives between consecutive positives.
                let mut start = 0;
                for q in above.iter().map(|&j| j as usize - i - 1).chain([len]) {
                    let z = &mut row[i + 1 + start..i + 1 + q];
                    let ws = &w[start..q];
                    match conf.as_deref_mut() {
                        Some(c) => {
                            for ((z, &w), c) in z.iter_mut().zip(ws).zip(&mut c[start..q]) {
                                let t = PairTerm::new(*z, false);
                                loss += w * t.loss;
                                *z = w * t.coef;
                                *c = t.confidence;
                            }
                        }
                        None => {
                            for (z, &w) in z.iter_mut().zip(ws) {
                                let t = PairTerm::new(*z, false);
                                loss += w * t.loss;
                                *z = w * t.coef;
                            }
                        }
                    }
                    if q < len {
                        let z = &mut row[i + 1 + q];
                        let t = PairTerm::new(*z, true);
                        loss += w[q] * t.loss;
                        *z = w[q] * t.coef;
                        if let Some(c) = conf.as_deref_mut() {
                            c[q] = t.confidence;
                        }
                    }
                    start = q + 1;
                }
                k += len;
            }
        }
        grad = s.dot(h) + s.t().dot(h);
    } else {
        grad = Array2::zeros(h.raw_dim());
        let scale = labels.negative_scale();
        labels.for_each_pair(|k, i, j, y| {
            let t = PairTerm::new(h.row(i).dot(&h.row(j)), y);
            if let Some(m) = mask.as_deref_mut() {
                m.push(t.confidence);
            }
            let w = wv.map_or(1.0, |w| w[k]) * if y { 1.0 } else { scale };
            loss += w * t.loss;
            let coef = w * t.coef;
            let (hi, hj) = (h.row(i).to_owned(), h.row(j).to_owned());
            grad.row_mut(i).scaled_add(coef, &hj);
            grad.row_mut(j).scaled_add(coef, &hi);
        });
    }
    if reduction == PiReduction::Mean {
        let pairs = num_pairs(n).max(1) as f64;
        loss /= pairs;
        grad /= pairs;
    }
    PiLoss { loss, grad }
}

/// Agreement of each scored pair's prediction with its label:
/// `σ(hᵢ·hⱼ)` for positives and `1 − σ(hᵢ·hⱼ)` for negatives.
pub fn confidence_mask(h: &Array2<f64>, labels: &PiLabelSet) -> Result<PairWeights> {
    check(h, labels, None)?;
    let mut values = Vec::with_capacity(labels.num_scored_pairs());
    if labels.is_dense() {
        let n = h.nrows();
        let s = h.dot(&h.t());
        let s = s.as_slice_memory_order().expect("contiguous product");
        labels.for_each_pair(|_, i, j, y| values.push(PairTerm::new(s[i * n + j], y).confidence));
    } else {
        labels.for_each_pair(|_, i, j, y| {
            values.push(PairTerm::new(h.row(i).dot(&h.row(j)), y).confidence)
        });
    }
    PairWeights::from_values(values)
}
