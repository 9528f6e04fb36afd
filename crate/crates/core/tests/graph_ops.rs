mod common;

use ndarray::Array2;
use pignn::data::{generate_sbm, SbmSpec};
use pignn::graph::{make_split, normalize_adjacency, Csr};
use pignn::nn::{cross_entropy, forward, init_model, Arch, EmbeddingSource};
use pignn::{Role, SplitPolicy};
use proptest::prelude::*;
use rand::Rng;

fn dense_adjacency(g: &pignn::Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::zeros((n, n));
    for (i, j) in g.edges() {
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    a
}

/// `D^-1/2 (A + I) D^-1/2` computed densely.
fn dense_normalized(g: &pignn::Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let a = dense_adjacency(g) + Array2::<f64>::eye(n);
    let d: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt())
}

fn dense_mean(g: &pignn::Graph) -> Array2<f64> {
    let mut a = dense_adjacency(g);
    for mut row in a.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    a
}

#[test]
fn normalization_matches_dense_oracle() {
    for seed in 0..10 {
        let mut rng = common::rng(seed);
        let g = common::random_graph(&mut rng, 5, 0.5, 2);
        let got = normalize_adjacency(&g).to_dense();
        let want = dense_normalized(&g);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn forward_matches_dense_reimplementation() {
    for seed in 0..6 {
        let mut rng = common::rng(seed);
        let g = common::random_graph(&mut rng, 5, 0.5, 3);
        let x = g.features().clone();
        for arch in [Arch::Gcn, Arch::SageMean] {
            let model = init_model(arch, &[3, 4, 2], seed).unwrap();
            let mut bump = model.clone();
            // non-zero biases so they are exercised
            for p in bump.params.iter_mut().filter(|p| p.name.starts_with('b')) {
                p.value.mapv_inplace(|_| rng.random::<f64>() - 0.5);
            }
            let got = forward(&bump, &g, EmbeddingSource::Penultimate).unwrap();
            let v = |k: usize| &bump.params[k].value;
            let relu = |m: Array2<f64>| m.mapv(|z| z.max(0.0));
            let logits = match arch {
                Arch::Gcn => {
                    let a = dense_normalized(&g);
                    let h = relu(a.dot(&x).dot(v(0)) + v(1));
                    a.dot(&h).dot(v(2)) + v(3)
                }
                Arch::SageMean => {
                    let p = dense_mean(&g);
                    let h = relu(x.dot(v(0)) + p.dot(&x).dot(v(1)) + v(2));
                    h.dot(v(3)) + p.dot(&h).dot(v(4)) + v(5)
                }
            };
            for (a, b) in got.logits().iter().zip(logits.iter()) {
                assert!((a - b).abs() <= 1e-12, "{arch:?} seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut rng = common::rng(5);
    let logits = Array2::from_shape_simple_fn((6, 4), || rng.random::<f64>() * 4.0 - 2.0);
    let labels = vec![0, 3, 1, 2, 2, 0];
    let nodes = vec![0, 1, 3, 4];
    let (_, grad) = cross_entropy(&logits, &labels, &nodes).unwrap();
    let h = 1e-6;
    for (idx, &a) in grad.indexed_iter() {
        let mut plus = logits.clone();
        plus[idx] += h;
        let mut minus = logits.clone();
        minus[idx] -= h;
        let numeric = (cross_entropy(&plus, &labels, &nodes).unwrap().0
            - cross_entropy(&minus, &labels, &nodes).unwrap().0)
            / (2.0 * h);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        assert!(
            err < 1e-6 || (a - numeric).abs() < 1e-10,
            "{idx:?}: {a} vs {numeric}"
        );
    }
}

#[test]
fn split_counts() {
    let labels: Vec<usize> = (0..300).map(|v| v % 3).collect();
    let split = make_split(
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
            split.count(Role::Train),
            split.count(Role::Val),
            split.count(Role::Test)
        ),
        (60, 60, 180)
    );
    let ds = generate_sbm(
        &SbmSpec::default(),
        &SplitPolicy::PerClass {
            train_k: 20,
            val_k: 20,
        },
    )
    .unwrap();
    assert_eq!(
        (
            ds.split.count(Role::Train),
            ds.split.count(Role::Val),
            ds.split.count(Role::Test)
        ),
        (80, 80, 840)
    );
}

#[test]
fn sbm_within_block_edges_follow_binomial() {
    let spec = SbmSpec::default();
    let pairs_in = 4.0 * (250.0 * 249.0 / 2.0);
    let expected = pairs_in * spec.p_in;
    let sd = (pairs_in * spec.p_in * (1.0 - spec.p_in)).sqrt();
    let runs = 100;
    let mut total = 0.0;
    for seed in 0..runs {
        let ds = generate_sbm(
            &SbmSpec {
                rng_seed: seed,
                ..spec.clone()
            },
            &SplitPolicy::PerClass {
                train_k: 1,
                val_k: 1,
            },
        )
        .unwrap();
        let within = ds
            .graph
            .edges()
            .filter(|&(i, j)| ds.clean_labels[i] == ds.clean_labels[j])
            .count();
        total += within as f64;
    }
    let mean = total / runs as f64;
    let tol = 3.0 * sd / (runs as f64).sqrt();
    assert!(
        (mean - expected).abs() < tol,
        "{mean} vs {expected} +- {tol}"
    );
    assert!((expected - 2490.0).abs() < 1.0);
}

#[test]
fn zero_signal_features_are_class_blind() {
    let ds = generate_sbm(
        &SbmSpec {
            feature_signal: 0.0,
            ..SbmSpec::default()
        },
        &SplitPolicy::PerClass {
            train_k: 1,
            val_k: 1,
        },
    )
    .unwrap();
    let x = ds.graph.features();
    // mean of the owned coordinates is indistinguishable from the others
    let mut owned = (0.0, 0);
    for (v, row) in x.rows().into_iter().enumerate() {
        for (c, &f) in row.iter().enumerate() {
            if c % 4 == ds.clean_labels[v] {
                owned.0 += f;
                owned.1 += 1;
            }
        }
    }
    let mean = owned.0 / owned.1 as f64;
    assert!(mean.abs() < 3.0 / (owned.1 as f64).sqrt(), "{mean}");
}

fn csr_strategy() -> impl Strategy<Value = (Csr, Array2<f64>)> {
    (1usize..8, 1usize..8, 1usize..4, any::<u64>()).prop_map(|(rows, cols, k, seed)| {
        let mut rng = common::rng(seed);
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for _ in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() < 0.4 {
                    indices.push(c);
                    values.push(rng.random::<f64>() * 2.0 - 1.0);
                }
            }
            indptr.push(indices.len());
        }
        let x = Array2::from_shape_simple_fn((cols, k), || rng.random::<f64>() * 2.0 - 1.0);
        (
            Csr {
                rows,
                cols,
                indptr,
                indices,
                values,
            },
            x,
        )
    })
}

proptest! {
    #[test]
    fn spmm_matches_dense((m, x) in csr_strategy()) {
        let got = m.spmm(&x);
        let want = m.to_dense().dot(&x);
        for (a, b) in got.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let t = m.transpose();
        prop_assert_eq!(t.to_dense(), m.to_dense().t().to_owned());
    }

    #[test]
    fn normalized_adjacency_is_symmetric(seed in any::<u64>(), n in 1usize..15) {
        let mut rng = common::rng(seed);
        let g = common::random_graph(&mut rng, n, 0.3, 1);
        let a = normalize_adjacency(&g).to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((a[[i, j]] - a[[j, i]]).abs() <= 1e-15);
            }
        }
    }
}
