//! Two-or-more layer GCN and GraphSAGE-mean networks with hand-written
//! reverse-mode gradients.
//!
//! Every layer computes `Z = AGG(H W) + b` (GCN, `AGG = Â`) or
//! `Z = H W_self + P (H W_nb) + b` (SAGE-mean, `P = D⁻¹A`). Hidden layers
//! apply ReLU; the last layer is linear and yields logits. Multiplying by the
//! weight before propagating keeps wide inputs cheap and means the backward
//! pass only needs the layer inputs and pre-activations.

mod adam;
mod loss;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use adam::{adam_step, AdamConfig};
pub use loss::{accuracy, argmax_rows, cross_entropy, softmax_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Gcn,
    SageMean,
}

impl Arch {
    /// Hidden width used by default for this architecture.
    pub fn default_hidden(self) -> usize {
        match self {
            Arch::Gcn => 16,
            Arch::SageMean => 64,
        }
    }

    pub fn default_lr(self) -> f64 {
        0.01
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::SageMean => "sage_mean",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Arch::Gcn),
            "sage" | "sage_mean" | "graphsage" => Ok(Arch::SageMean),
            other => Err(Error::invalid(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Which activation the pair loss reads as node embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Output of the last hidden layer (post-ReLU).
    #[default]
    Penultimate,
    Logits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
}

/// Adam moment buffers, aligned with [`ModelState::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: u64,
}

/// Weights and optimizer state of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub arch: Arch,
    /// Layer widths, input first: `[d, hidden.., out]`.
    pub dims: Vec<usize>,
    pub params: Vec<Param>,
    pub adam: AdamState,
    pub seed: u64,
}

/// Parameter gradients, aligned with [`ModelState::params`].
pub type Grads = Vec<Array2<f64>>;

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite glorot bound");
    Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng))
}

/// Glorot-uniform weights, zero biases and zero Adam moments.
pub fn init_model(arch: Arch, dims: &[usize], seed: u64) -> Result<ModelState> {
    if dims.len() < 3 {
        return Err(Error::invalid("a model needs at least one hidden layer"));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::invalid(format!("layer width {pos} is zero")));
    }
    let mut rng = crate::rng::seeded(seed);
    let mut params = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        match arch {
            Arch::Gcn => {
                params.push(Param {
                    name: format!("w{l}"),
                    value: glorot(&mut rng, fan_in, fan_out),
                });
            }
            Arch::SageMean => {
                params.push(Param {
                    name: format!("w_self{l}"),
                    value: glorot(&mut rng, fan_in, fan_out),
                });
                params.push(Param {
                    name: format!("w_nb{l}"),
                    value: glorot(&mut rng, fan_in, fan_out),
                });
            }
        }
        params.push(Param {
            name: format!("b{l}"),
            value: Array2::zeros((1, fan_out)),
        });
    }
    let zeros: Vec<Array2<f64>> = params
        .iter()
        .map(|p| Array2::zeros(p.value.raw_dim()))
        .collect();
    Ok(ModelState {
        arch,
        dims: dims.to_vec(),
        params,
        adam: AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        },
        seed,
    })
}

impl ModelState {
    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn params_per_layer(&self) -> usize {
        match self.arch {
            Arch::Gcn => 2,
            Arch::SageMean => 3,
        }
    }

    fn layer(&self, l: usize) -> &[Param] {
        let k = self.params_per_layer();
        &self.params[l * k..(l + 1) * k]
    }

    pub fn zero_grads(&self) -> Grads {
        self.params
            .iter()
            .map(|p| Array2::zeros(p.value.raw_dim()))
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    embed: EmbeddingSource,
    /// Layer inputs after dropout; `None` means the undropped input.
    dropped: Vec<Option<Array2<f64>>>,
    /// Scaled keep-masks matching `dropped`.
    masks: Vec<Option<Array2<f64>>>,
    /// Pre-activations of every layer; the last one is the logits.
    pre: Vec<Array2<f64>>,
    /// ReLU outputs of the hidden layers.
    hidden: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        match self.embed {
            EmbeddingSource::Penultimate => self.hidden.last().expect("at least one hidden layer"),
            EmbeddingSource::Logits => self.logits(),
        }
    }

    pub fn embedding_source(&self) -> EmbeddingSource {
        self.embed
    }

    fn input<'a>(&'a self, graph: &'a Graph, l: usize) -> &'a Array2<f64> {
        match &self.dropped[l] {
            Some(x) => x,
            None if l == 0 => graph.features(),
            None => &self.hidden[l - 1],
        }
    }
}

/// Inference-mode forward pass.
pub fn forward(model: &ModelState, graph: &Graph, embed: EmbeddingSource) -> Result<ForwardTrace> {
    forward_with_dropout(model, graph, embed, 0.0, &mut crate::rng::seeded(0))
}

/// Forward pass with inverted dropout of rate `p` on every layer input.
/// No random numbers are drawn when `p == 0`.
pub fn forward_with_dropout(
    model: &ModelState,
    graph: &Graph,
    embed: EmbeddingSource,
    p: f64,
    rng: &mut impl Rng,
) -> Result<ForwardTrace> {
    if graph.feature_dim() != model.dims[0] {
        return Err(Error::Shape(format!(
            "graph features have width {} but the model expects {}",
            graph.feature_dim(),
            model.dims[0]
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout rate {p} outside [0, 1)")));
    }
    let layers = model.num_layers();
    let mut trace = ForwardTrace {
        embed,
        dropped: Vec::with_capacity(layers),
        masks: Vec::with_capacity(layers),
        pre: Vec::with_capacity(layers),
        hidden: Vec::with_capacity(layers - 1),
    };
    for l in 0..layers {
        if p > 0.0 {
            let x = if l == 0 {
                graph.features()
            } else {
                &trace.hidden[l - 1]
            };
            let scale = 1.0 / (1.0 - p);
            let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
                if rng.random::<f64>() < p {
                    0.0
                } else {
                    scale
                }
            });
            trace.dropped.push(Some(x * &mask));
            trace.masks.push(Some(mask));
        } else {
            trace.dropped.push(None);
            trace.masks.push(None);
        }
        let x = trace.input(graph, l);
        let params = model.layer(l);
        let z = match model.arch {
            Arch::Gcn => {
                let xw = x.dot(&params[0].value);
                graph.norm_adj().spmm(&xw) + &params[1].value
            }
            Arch::SageMean => {
                let (p_mean, _) = graph.mean_adj();
                let nb = p_mean.spmm(&x.dot(&params[1].value));
                x.dot(&params[0].value) + nb + &params[2].value
            }
        };
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("activations of layer {l}")));
        }
        if l + 1 < layers {
            trace.hidden.push(z.mapv(|v| v.max(0.0)));
        }
        trace.pre.push(z);
    }
    Ok(trace)
}

/// Exact gradients of a scalar loss given its gradient w.r.t. the logits
/// and, optionally, w.r.t. the embeddings selected in the trace.
pub fn backward(
    model: &ModelState,
    graph: &Graph,
    trace: &ForwardTrace,
    grad_logits: &Array2<f64>,
    grad_embeddings: Option<&Array2<f64>>,
) -> Result<Grads> {
    let layers = model.num_layers();
    if trace.pre.len() != layers {
        return Err(Error::Shape("trace does not match model depth".into()));
    }
    if grad_logits.raw_dim() != trace.logits().raw_dim() {
        return Err(Error::Shape(format!(
            "grad_logits {:?} vs logits {:?}",
            grad_logits.shape(),
            trace.logits().shape()
        )));
    }
    if let Some(ge) = grad_embeddings {
        if ge.raw_dim() != trace.embeddings().raw_dim() {
            return Err(Error::Shape(format!(
                "grad_embeddings {:?} vs embeddings {:?}",
                ge.shape(),
                trace.embeddings().shape()
            )));
        }
    }
    let k = model.params_per_layer();
    let mut grads = model.zero_grads();
    let mut d_z = grad_logits.clone();
    if let (Some(ge), EmbeddingSource::Logits) = (grad_embeddings, trace.embed) {
        d_z += ge;
    }
    for l in (0..layers).rev() {
        let x = trace.input(graph, l);
        let params = model.layer(l);
        let base = l * k;
        let d_x = match model.arch {
            Arch::Gcn => {
                // Â is symmetric, so it is its own transpose.
                let t = graph.norm_adj().spmm(&d_z);
                grads[base] = x.t().dot(&t);
                grads[base + 1] = d_z.sum_axis(Axis(0)).insert_axis(Axis(0));
                (l > 0).then(|| t.dot(&params[0].value.t()))
            }
            Arch::SageMean => {
                let (_, p_t) = graph.mean_adj();
                let t = p_t.spmm(&d_z);
                grads[base] = x.t().dot(&d_z);
                grads[base + 1] = x.t().dot(&t);
                grads[base + 2] = d_z.sum_axis(Axis(0)).insert_axis(Axis(0));
                (l > 0).then(|| d_z.dot(&params[0].value.t()) + t.dot(&params[1].value.t()))
            }
        };
        let Some(mut d_h) = d_x else { break };
        if let Some(mask) = &trace.masks[l] {
            d_h *= mask;
        }
        if let (Some(ge), EmbeddingSource::Penultimate) = (grad_embeddings, trace.embed) {
            if l == layers - 1 {
                d_h += ge;
            }
        }
        let pre = &trace.pre[l - 1];
        d_h.zip_mut_with(pre, |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        d_z = d_h;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::array;

    #[test]
    fn gcn_shapes() {
        let m = init_model(Arch::Gcn, &[8, 16, 3], 1).unwrap();
        assert_eq!(m.params[0].value.shape(), &[8, 16]);
        assert_eq!(m.params[1].value.shape(), &[1, 16]);
        assert_eq!(m.params[2].value.shape(), &[16, 3]);
        assert_eq!(m.params[3].value.shape(), &[1, 3]);
        assert_eq!(m.adam.step, 0);
    }

    #[test]
    fn sage_shapes() {
        let m = init_model(Arch::SageMean, &[5, 64, 4], 1).unwrap();
        let names: Vec<_> = m.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["w_self0", "w_nb0", "b0", "w_self1", "w_nb1", "b1"]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_model(Arch::Gcn, &[8, 16, 3], 42).unwrap();
        let b = init_model(Arch::Gcn, &[8, 16, 3], 42).unwrap();
        assert_eq!(a, b);
        let c = init_model(Arch::Gcn, &[8, 16, 3], 43).unwrap();
        assert_ne!(a.params[0].value, c.params[0].value);
        // sqrt(6 / (8 + 16)) = 0.5
        assert!(a.params[0].value.iter().all(|w| w.abs() <= 0.5));
        assert!(a.params[1].value.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_errors() {
        assert!(init_model(Arch::Gcn, &[8, 0, 3], 1).is_err());
        assert!(init_model(Arch::Gcn, &[8, 3], 1).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let g = build_graph(&[(0, 1), (1, 2)], 3, Array2::from_elem((3, 4), 0.3)).unwrap();
        let mut m = init_model(Arch::Gcn, &[4, 6, 5], 1).unwrap();
        m.params.iter_mut().for_each(|p| p.value.fill(0.0));
        let tr = forward(&m, &g, EmbeddingSource::Penultimate).unwrap();
        assert!(tr.logits().iter().all(|&v| v == 0.0));
        let sm = softmax_rows(tr.logits());
        assert!(sm.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn single_node_gcn_is_plain_mlp() {
        let x = array![[0.5, -1.0, 2.0]];
        let g = build_graph(&[], 1, x.clone()).unwrap();
        let m = init_model(Arch::Gcn, &[3, 4, 2], 5).unwrap();
        let tr = forward(&m, &g, EmbeddingSource::Penultimate).unwrap();
        let h = x.dot(&m.params[0].value).mapv(|v: f64| v.max(0.0));
        let want = h.dot(&m.params[2].value);
        for (a, b) in tr.logits().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let g = build_graph(&[(0, 1), (1, 2)], 3, Array2::from_elem((3, 2), 1.0)).unwrap();
        let m = init_model(Arch::SageMean, &[2, 3, 2], 5).unwrap();
        let tr = forward(&m, &g, EmbeddingSource::Penultimate).unwrap();
        let grads = backward(&m, &g, &tr, &Array2::zeros((3, 2)), None).unwrap();
        assert!(grads.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn embedding_only_grad_leaves_head_untouched() {
        let g = build_graph(
            &[(0, 1), (1, 2)],
            3,
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        )
        .unwrap();
        let m = init_model(Arch::Gcn, &[2, 4, 3], 9).unwrap();
        let tr = forward(&m, &g, EmbeddingSource::Penultimate).unwrap();
        let ge = Array2::from_elem((3, 4), 0.7);
        let grads = backward(&m, &g, &tr, &Array2::zeros((3, 3)), Some(&ge)).unwrap();
        assert!(grads[2].iter().all(|&v| v == 0.0));
        assert!(grads[3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_bad_shapes() {
        let g = build_graph(&[(0, 1)], 2, Array2::from_elem((2, 2), 1.0)).unwrap();
        let m = init_model(Arch::Gcn, &[2, 4, 3], 9).unwrap();
        let tr = forward(&m, &g, EmbeddingSource::Penultimate).unwrap();
        assert!(backward(&m, &g, &tr, &Array2::zeros((2, 2)), None).is_err());
        assert!(backward(
            &m,
            &g,
            &tr,
            &Array2::zeros((2, 3)),
            Some(&Array2::zeros((2, 3)))
        )
        .is_err());
    }

    #[test]
    fn nan_features_are_reported_with_layer() {
        let g = build_graph(&[], 2, array![[f64::NAN], [1.0]]).unwrap();
        let m = init_model(Arch::Gcn, &[1, 2, 2], 1).unwrap();
        let err = forward(&m, &g, EmbeddingSource::Penultimate).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn dropout_zero_draws_nothing() {
        let g = build_graph(&[(0, 1)], 2, Array2::from_elem((2, 3), 1.0)).unwrap();
        let m = init_model(Arch::Gcn, &[3, 4, 2], 1).unwrap();
        let mut rng = crate::rng::seeded(4);
        let before: u64 = rng.clone().random();
        forward_with_dropout(&m, &g, EmbeddingSource::Penultimate, 0.0, &mut rng).unwrap();
        assert_eq!(before, rng.random::<u64>());
    }
}
