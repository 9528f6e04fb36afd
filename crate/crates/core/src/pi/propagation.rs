use crate::graph::Graph;

pub const LP_MAX_ITER: usize = 100;
pub const LP_TOL: f64 = 1e-6;

/// Iterative label propagation with clamping.
///
/// Labeled rows of the class-distribution matrix are fixed one-hot; every
/// other row starts uniform and is repeatedly replaced by the mean of its
/// neighbors' rows. Stops after [`LP_MAX_ITER`] sweeps or when no entry moves
/// by [`LP_TOL`] or more. Returns the argmax per node, ties to the lowest
/// class. Isolated unlabeled nodes and unlabeled components stay uniform and
/// therefore resolve to class 0.
pub fn label_propagation(
    g: &Graph,
    labels: &[usize],
    labeled: &[usize],
    num_classes: usize,
) -> Vec<usize> {
    let n = g.num_nodes();
    let c = num_classes;
    let mut clamped = vec![false; n];
    let mut f = vec![1.0 / c as f64; n * c];
    for &v in labeled {
        clamped[v] = true;
        f[v * c..(v + 1) * c].iter_mut().for_each(|x| *x = 0.0);
        f[v * c + labels[v]] = 1.0;
    }
    let mut next = f.clone();
    for _ in 0..LP_MAX_ITER {
        let mut change = 0.0f64;
        for v in 0..n {
            let nbrs = g.neighbors(v);
            if clamped[v] || nbrs.is_empty() {
                continue;
            }
            let inv = 1.0 / nbrs.len() as f64;
            let row = &mut next[v * c..(v + 1) * c];
            row.iter_mut().for_each(|x| *x = 0.0);
            for &u in nbrs {
                for (x, &y) in row.iter_mut().zip(&f[u * c..(u + 1) * c]) {
                    *x += y;
                }
            }
            for (k, x) in row.iter_mut().enumerate() {
                *x *= inv;
                change = change.max((*x - f[v * c + k]).abs());
            }
        }
        std::mem::swap(&mut f, &mut next);
        next.copy_from_slice(&f);
        if change < LP_TOL {
            break;
        }
    }
    (0..n)
        .map(|v| {
            let row = &f[v * c..(v + 1) * c];
            let mut best = 0;
            for k in 1..c {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
