use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean softmax cross-entropy over `nodes` and its gradient w.r.t. the
/// logits (zero outside `nodes`).
pub fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    nodes: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if nodes.is_empty() {
        return Err(Error::invalid("cross-entropy over an empty node set"));
    }
    if labels.len() != logits.nrows() {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.nrows()
        )));
    }
    let count = nodes.len() as f64;
    let mut grad = Array2::<f64>::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for &v in nodes {
        let row = logits.row(v);
        let y = labels[v];
        if y >= row.len() {
            return Err(Error::invalid(format!(
                "label {y} of node {v} out of range"
            )));
        }
        let lse = log_sum_exp(row);
        loss += lse - row[y];
        let mut g = grad.row_mut(v);
        for (c, (gc, &z)) in g.iter_mut().zip(row.iter()).enumerate() {
            let p = (z - lse).exp();
            *gc = (p - if c == y { 1.0 } else { 0.0 }) / count;
        }
    }
    Ok((loss / count, grad))
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose argmax prediction equals `labels`.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::invalid("accuracy over an empty node set"));
    }
    let pred = argmax_rows(logits);
    let hits = nodes.iter().filter(|&&v| pred[v] == labels[v]).count();
    Ok(hits as f64 / nodes.len() as f64)
}
