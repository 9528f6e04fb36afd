//! Sparse undirected graphs, adjacency normalization and node splits.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Sparse-dense product `self * x`. Each output row is accumulated in
    /// column-index order, so the result is bit-reproducible.
    pub fn spmm(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, x.nrows(), "spmm inner dimension");
        let mut out = Array2::<f64>::zeros((self.rows, x.ncols()));
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let mut acc = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                acc.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for k in 0..self.cols {
            counts[k + 1] += counts[k];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = next[j];
                indices[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        Csr {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[[i, j]] += v;
            }
        }
        out
    }
}

/// Immutable undirected, unweighted graph with dense node features.
///
/// Adjacency is stored symmetrically in CSR form with sorted, deduplicated
/// column indices and no self-loops. Derived operators (the renormalized
/// GCN adjacency and the neighbor-mean operator) are built on first use.
#[derive(Debug)]
pub struct Graph {
    num_nodes: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Array2<f64>,
    norm_adj: OnceLock<Csr>,
    mean_adj: OnceLock<(Csr, Csr)>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            num_nodes: self.num_nodes,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            features: self.features.clone(),
            norm_adj: OnceLock::new(),
            mean_adj: OnceLock::new(),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.indptr == other.indptr
            && self.indices == other.indices
            && self.features == other.features
    }
}

/// Build a graph from an edge list. Edges are symmetrized and deduplicated;
/// self-loops are dropped (normalization adds them back).
pub fn build_graph(
    edges: &[(usize, usize)],
    num_nodes: usize,
    features: Array2<f64>,
) -> Result<Graph> {
    if features.nrows() != num_nodes {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows but graph has {} nodes",
            features.nrows(),
            num_nodes
        )));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    for &(i, j) in edges {
        if i >= num_nodes || j >= num_nodes {
            return Err(Error::invalid(format!(
                "edge ({i}, {j}) out of range for {num_nodes} nodes"
            )));
        }
        if i == j {
            continue;
        }
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut indptr = Vec::with_capacity(num_nodes + 1);
    let mut indices = Vec::new();
    indptr.push(0);
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
        indices.extend_from_slice(row);
        indptr.push(indices.len());
    }
    Ok(Graph {
        num_nodes,
        indptr,
        indices,
        features,
        norm_adj: OnceLock::new(),
        mean_adj: OnceLock::new(),
    })
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    /// Undirected edges as `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// The 0/1 adjacency pattern as a CSR matrix.
    pub fn adjacency(&self) -> Csr {
        Csr {
            rows: self.num_nodes,
            cols: self.num_nodes,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: vec![1.0; self.indices.len()],
        }
    }

    /// Cached `D̃^{-1/2}(A+I)D̃^{-1/2}`.
    pub fn norm_adj(&self) -> &Csr {
        self.norm_adj.get_or_init(|| normalize_adjacency(self))
    }

    /// Cached neighbor-mean operator `D^{-1}A` and its transpose. Rows of
    /// isolated nodes are empty.
    pub fn mean_adj(&self) -> (&Csr, &Csr) {
        let (p, pt) = self.mean_adj.get_or_init(|| {
            let p = mean_adjacency(self);
            let pt = p.transpose();
            (p, pt)
        });
        (p, pt)
    }
}

/// Symmetric renormalization `D̃^{-1/2}(A+I)D̃^{-1/2}` with `D̃` the degree
/// matrix of `A+I`. An isolated node keeps a single self entry of 1.
pub fn normalize_adjacency(g: &Graph) -> Csr {
    let n = g.num_nodes;
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.indices.len() + n);
    let mut values = Vec::with_capacity(g.indices.len() + n);
    indptr.push(0);
    for i in 0..n {
        let nbrs = g.neighbors(i);
        let split = nbrs.partition_point(|&j| j < i);
        let mut push = |j: usize| {
            indices.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        };
        nbrs[..split].iter().for_each(|&j| push(j));
        push(i);
        nbrs[split..].iter().for_each(|&j| push(j));
        indptr.push(indices.len());
    }
    Csr {
        rows: n,
        cols: n,
        indptr,
        indices,
        values,
    }
}

/// Row-normalized adjacency `D^{-1}A` (no self-loops).
pub fn mean_adjacency(g: &Graph) -> Csr {
    let mut adj = g.adjacency();
    for i in 0..adj.rows {
        let (a, b) = (adj.indptr[i], adj.indptr[i + 1]);
        if b > a {
            let w = 1.0 / (b - a) as f64;
            adj.values[a..b].iter_mut().for_each(|v| *v = w);
        }
    }
    adj
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
    Unused,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Train => 0,
            Role::Val => 1,
            Role::Test => 2,
            Role::Unused => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Role> {
        Some(match code {
            0 => Role::Train,
            1 => Role::Val,
            2 => Role::Test,
            3 => Role::Unused,
            _ => return None,
        })
    }
}

/// Per-node role assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    roles: Vec<Role>,
}

impl Split {
    pub fn from_roles(roles: Vec<Role>) -> Result<Split> {
        if !roles.contains(&Role::Train) {
            return Err(Error::invalid("split has no training nodes"));
        }
        Ok(Split { roles })
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn role(&self, node: usize) -> Role {
        self.roles[node]
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn nodes(&self, role: Role) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

/// Explicit node lists, typically read from a JSON split file
/// `{"train": [...], "val": [...], "test": [...]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExplicitSplit {
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
}

impl ExplicitSplit {
    pub fn from_json_file(path: &Path) -> Result<ExplicitSplit> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub enum SplitPolicy {
    /// The first `train_k` nodes of every class (in node order) train, the
    /// next `val_k` validate, everything else is test.
    PerClass {
        train_k: usize,
        val_k: usize,
    },
    Explicit(ExplicitSplit),
}

pub fn make_split(labels: &[usize], num_classes: usize, policy: &SplitPolicy) -> Result<Split> {
    match policy {
        SplitPolicy::PerClass { train_k, val_k } => {
            let mut sizes = vec![0usize; num_classes];
            for &y in labels {
                if y >= num_classes {
                    return Err(Error::invalid(format!("label {y} out of range")));
                }
                sizes[y] += 1;
            }
            if let Some((c, &size)) = sizes.iter().enumerate().find(|(_, &s)| s < train_k + val_k) {
                return Err(Error::invalid(format!(
                    "class {c} has {size} nodes, fewer than train_k + val_k = {}",
                    train_k + val_k
                )));
            }
            let mut seen = vec![0usize; num_classes];
            let roles = labels
                .iter()
                .map(|&y| {
                    let k = seen[y];
                    seen[y] += 1;
                    if k < *train_k {
                        Role::Train
                    } else if k < train_k + val_k {
                        Role::Val
                    } else {
                        Role::Test
                    }
                })
                .collect();
            Split::from_roles(roles)
        }
        SplitPolicy::Explicit(ex) => {
            let n = labels.len();
            let mut roles = vec![Role::Unused; n];
            let mut seen = HashSet::new();
            for (list, role) in [
                (&ex.train, Role::Train),
                (&ex.val, Role::Val),
                (&ex.test, Role::Test),
            ] {
                for &i in list {
                    if i >= n {
                        return Err(Error::invalid(format!("split node {i} out of range")));
                    }
                    if !seen.insert(i) {
                        return Err(Error::invalid(format!(
                            "node {i} appears in more than one split set"
                        )));
                    }
                    roles[i] = role;
                }
            }
            Split::from_roles(roles)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn empty_features(n: usize) -> Array2<f64> {
        Array2::zeros((n, 1))
    }

    #[test]
    fn single_edge_is_symmetrized() {
        let g = build_graph(&[(0, 1)], 2, empty_features(2)).unwrap();
        assert_eq!(g.indices, vec![1, 0]);
        assert_eq!(g.indptr, vec![0, 1, 2]);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn duplicates_collapse() {
        let a = build_graph(&[(0, 1)], 2, empty_features(2)).unwrap();
        let b = build_graph(&[(0, 1), (1, 0), (0, 1)], 2, empty_features(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_loops_dropped() {
        let g = build_graph(&[(0, 0), (0, 1)], 2, empty_features(2)).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(!g.has_edge(0, 0));
    }

    #[test]
    fn build_errors() {
        assert!(build_graph(&[(0, 2)], 2, empty_features(2)).is_err());
        assert!(matches!(
            build_graph(&[], 3, empty_features(2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn two_node_path_normalizes_to_half() {
        let g = build_graph(&[(0, 1)], 2, empty_features(2)).unwrap();
        let dense = g.norm_adj().to_dense();
        for v in dense.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_keeps_self_loop() {
        let g = build_graph(&[(0, 1)], 3, empty_features(3)).unwrap();
        let (cols, vals) = g.norm_adj().row(2);
        assert_eq!(cols, &[2]);
        assert_eq!(vals, &[1.0]);
        assert!(g.mean_adj().0.row(2).0.is_empty());
    }

    #[test]
    fn transpose_roundtrip() {
        let g = build_graph(&[(0, 1), (1, 2), (0, 3)], 4, empty_features(4)).unwrap();
        let (p, pt) = g.mean_adj();
        assert_eq!(p.to_dense().t().to_owned(), pt.to_dense());
        assert_eq!(&pt.transpose(), p);
    }

    #[test]
    fn per_class_counts() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let s = make_split(
            &labels,
            3,
            &SplitPolicy::PerClass {
                train_k: 20,
                val_k: 20,
            },
        )
        .unwrap();
        assert_eq!(
            (
                s.count(Role::Train),
                s.count(Role::Val),
                s.count(Role::Test)
            ),
            (60, 60, 180)
        );
    }

    #[test]
    fn per_class_too_small() {
        let labels = vec![0, 0, 1];
        assert!(make_split(
            &labels,
            2,
            &SplitPolicy::PerClass {
                train_k: 1,
                val_k: 1
            }
        )
        .is_err());
    }

    #[test]
    fn explicit_overlap_rejected() {
        let ex = ExplicitSplit {
            train: vec![0, 1],
            val: vec![],
            test: vec![1, 2],
        };
        assert!(make_split(&[0, 0, 0], 1, &SplitPolicy::Explicit(ex)).is_err());
    }

    #[test]
    fn explicit_leaves_unlisted_unused() {
        let ex = ExplicitSplit {
            train: vec![0],
            val: vec![1],
            test: vec![3],
        };
        let s = make_split(&[0, 1, 0, 1], 2, &SplitPolicy::Explicit(ex)).unwrap();
        assert_eq!(
            s.roles(),
            &[Role::Train, Role::Val, Role::Unused, Role::Test]
        );
    }
}
