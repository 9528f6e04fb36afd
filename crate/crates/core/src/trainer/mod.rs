//! Joint training of the mask generator and the task executor.
//!
//! The mask generator `f_m` learns only the pair objective. Once its warm-up
//! of `pretrain_epochs` is over, its pair confidences reweight the pair loss
//! of the task executor `f_t`, which is trained on noisy class labels plus
//! `β ·` (weighted pair loss). Only `f_t` is used for prediction.

mod analysis;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::Role;
use crate::nn::{
    accuracy, adam_step, backward, cross_entropy, forward, forward_with_dropout, init_model,
    AdamConfig, Arch, EmbeddingSource, ModelState,
};
use crate::pi::{
    confidence_mask, label_propagation, pi_labels_from_adjacency, pi_labels_from_label_comparison,
    pi_labels_random, pi_loss, pi_loss_and_mask, NegativePolicy, PairWeights, PiLabelSet,
    PiReduction, PiSource,
};
use crate::rng::{derive_seed, stream};

pub use analysis::{
    compare_confidence_halves, histogram_bin, mask_from_model, mask_histogram, split_by_confidence,
    train_mask_generator, ConfidenceComparison, HISTOGRAM_BINS,
};

/// `|V|² / (|V|² − M)²`, the default pair-loss weight.
pub fn beta_prime(num_nodes: usize, num_edges: usize) -> Result<f64> {
    let v2 = (num_nodes as f64) * (num_nodes as f64);
    let denom = v2 - num_edges as f64;
    if denom <= 0.0 {
        return Err(Error::invalid(format!(
            "beta' undefined: {num_edges} edges on {num_nodes} nodes leaves |V|^2 - M <= 0"
        )));
    }
    Ok(v2 / (denom * denom))
}

/// Pair-loss weight: derived from the graph or given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Beta {
    #[default]
    Auto,
    Fixed(f64),
}

impl Beta {
    pub fn resolve(self, num_nodes: usize, num_edges: usize) -> Result<f64> {
        match self {
            Beta::Auto => beta_prime(num_nodes, num_edges),
            Beta::Fixed(b) => Ok(b),
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Auto => f.write_str("auto"),
            Beta::Fixed(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Beta::Auto);
        }
        s.parse()
            .map(Beta::Fixed)
            .map_err(|_| Error::invalid(format!("beta must be `auto` or a number, got `{s}`")))
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Auto => s.serialize_str("auto"),
            Beta::Fixed(b) => s.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(b) => Ok(Beta::Fixed(b)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Where the pair-loss weights of the task executor come from after warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// A separate network trained on the pair objective only.
    #[default]
    Generator,
    /// The task executor's own embeddings.
    TaskSelf,
    /// Unit weights throughout.
    None,
}

/// Negative pairs for the pair loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Whole complement up to [`crate::pi::MAX_DENSE_NODES`] nodes, sampled
    /// beyond.
    #[default]
    Auto,
    All,
    Sampled {
        per_positive: usize,
    },
}

/// The four compared training schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classification loss only.
    Vanilla,
    /// Pair loss with unit weights.
    PiNoUe,
    /// Pair loss weighted by the mask generator.
    PiGnn,
    /// Pair loss weighted by the task executor's own confidences.
    PiTaskSelf,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Vanilla,
        Method::PiNoUe,
        Method::PiGnn,
        Method::PiTaskSelf,
    ];

    /// Apply this method's settings on top of `cfg`.
    pub fn configure(self, mut cfg: TrainConfig) -> TrainConfig {
        match self {
            Method::Vanilla => {
                cfg.beta = Beta::Fixed(0.0);
                cfg.mask_mode = MaskMode::None;
            }
            Method::PiNoUe => cfg.mask_mode = MaskMode::None,
            Method::PiGnn => cfg.mask_mode = MaskMode::Generator,
            Method::PiTaskSelf => cfg.mask_mode = MaskMode::TaskSelf,
        }
        cfg
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Vanilla => "vanilla",
            Method::PiNoUe => "pi_no_ue",
            Method::PiGnn => "pi_gnn",
            Method::PiTaskSelf => "pi_task_self",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "pi_no_ue" | "pi_wo_ue" => Ok(Method::PiNoUe),
            "pi_gnn" => Ok(Method::PiGnn),
            "pi_task_self" => Ok(Method::PiTaskSelf),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected vanilla, pi_no_ue, pi_gnn or pi_task_self)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Total epochs `N`; one full-batch step per model per epoch.
    pub epochs: usize,
    /// Epochs `K` during which the mask is all ones.
    pub pretrain_epochs: usize,
    pub beta: Beta,
    /// Adam learning rate; `None` picks the architecture default.
    pub lr: Option<f64>,
    pub weight_decay: f64,
    pub arch_task: Arch,
    pub arch_mask: Arch,
    /// Hidden width; `None` picks the architecture default.
    pub hidden_task: Option<usize>,
    pub hidden_mask: Option<usize>,
    pub pi_source: PiSource,
    /// Positive rate for random pair labels; `None` matches the edge density.
    pub random_pi_density: Option<f64>,
    pub negatives: NegativeMode,
    pub mask_mode: MaskMode,
    pub embedding: EmbeddingSource,
    pub reduction: PiReduction,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            pretrain_epochs: 50,
            beta: Beta::Auto,
            lr: None,
            weight_decay: 5e-4,
            arch_task: Arch::Gcn,
            arch_mask: Arch::Gcn,
            hidden_task: None,
            hidden_mask: None,
            pi_source: PiSource::Adjacency,
            random_pi_density: None,
            negatives: NegativeMode::Auto,
            mask_mode: MaskMode::Generator,
            embedding: EmbeddingSource::Penultimate,
            reduction: PiReduction::Sum,
            dropout: 0.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_epochs > self.epochs {
            return Err(Error::invalid(format!(
                "pretrain epochs K={} exceed total epochs N={}",
                self.pretrain_epochs, self.epochs
            )));
        }
        if let Beta::Fixed(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("beta {b} must be finite and >= 0")));
            }
        }
        if let Some(lr) = self.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::invalid(format!(
                    "learning rate {lr} must be positive"
                )));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "weight decay {} must be >= 0",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.hidden_task == Some(0) || self.hidden_mask == Some(0) {
            return Err(Error::invalid("hidden width must be positive"));
        }
        if let Some(p) = self.random_pi_density {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "random PI density {p} outside [0, 1]"
                )));
            }
        }
        if self.negatives == (NegativeMode::Sampled { per_positive: 0 }) {
            return Err(Error::invalid("sampled negatives need per_positive >= 1"));
        }
        Ok(())
    }

    fn optimizer(&self, arch: Arch) -> AdamConfig {
        AdamConfig::new(self.lr.unwrap_or(arch.default_lr()), self.weight_decay)
    }

    fn dims(&self, ds: &Dataset, arch: Arch, hidden: Option<usize>) -> [usize; 3] {
        [
            ds.graph.feature_dim(),
            hidden.unwrap_or(arch.default_hidden()),
            ds.num_classes,
        ]
    }

    fn negative_policy(&self, num_nodes: usize) -> NegativePolicy {
        let seed = derive_seed(self.seed, stream::PAIRS);
        match self.negatives {
            NegativeMode::Auto => NegativePolicy::auto(num_nodes, seed),
            NegativeMode::All => NegativePolicy::AllComplement,
            NegativeMode::Sampled { per_positive } => {
                NegativePolicy::Sampled { per_positive, seed }
            }
        }
    }
}

/// Seeds of every random stream of a run, all derived from the base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub base: u64,
    pub task_init: u64,
    pub mask_init: u64,
    pub pairs: u64,
    pub task_dropout: u64,
    pub mask_dropout: u64,
}

impl RunSeeds {
    pub fn new(base: u64) -> RunSeeds {
        RunSeeds {
            base,
            task_init: derive_seed(base, stream::TASK_INIT),
            mask_init: derive_seed(base, stream::MASK_INIT),
            pairs: derive_seed(base, stream::PAIRS),
            task_dropout: derive_seed(base, stream::TASK_DROPOUT),
            mask_dropout: derive_seed(base, stream::MASK_DROPOUT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub cls_loss: f64,
    /// Weighted pair loss of the task executor (before the β factor).
    pub pi_loss: Option<f64>,
    /// Unweighted pair loss of the mask generator.
    pub mask_pi_loss: Option<f64>,
    /// Accuracy against the observed (possibly corrupted) labels.
    pub train_acc: f64,
    pub val_acc: f64,
    /// Accuracy against the clean labels.
    pub test_acc: f64,
    /// Mean pair weight applied to the task executor's pair loss.
    pub mean_mask: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
    /// First epoch reaching the highest validation accuracy.
    pub best_val_epoch: usize,
    pub best_val_acc: f64,
    pub best_val_test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: TrainConfig,
    pub beta: f64,
    pub seeds: RunSeeds,
    pub num_pi_positives: Option<usize>,
    pub num_scored_pairs: Option<usize>,
    pub epochs: Vec<EpochLog>,
    pub metrics: FinalMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

/// Everything a run produces; `train` keeps only the task executor.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub task: ModelState,
    pub mask: Option<ModelState>,
    pub pi_labels: Option<PiLabelSet>,
    pub result: RunResult,
}

/// Build the pair labels selected by `cfg.pi_source`.
///
/// Label comparison uses label propagation from the observed training labels
/// so that every node carries a (noisy) class.
pub fn build_pi_labels(ds: &Dataset, observed: &[usize], cfg: &TrainConfig) -> Result<PiLabelSet> {
    let n = ds.num_nodes();
    let policy = cfg.negative_policy(n);
    match cfg.pi_source {
        PiSource::Adjacency => pi_labels_from_adjacency(&ds.graph, policy),
        PiSource::LabelComparison => {
            let propagated = label_propagation(
                &ds.graph,
                observed,
                &ds.split.nodes(Role::Train),
                ds.num_classes,
            );
            pi_labels_from_label_comparison(&propagated, policy)
        }
        PiSource::Random => {
            let density = cfg.random_pi_density.unwrap_or_else(|| {
                let pairs = crate::pi::num_pairs(n).max(1) as f64;
                ds.graph.num_edges() as f64 / pairs
            });
            pi_labels_random(n, density, derive_seed(cfg.seed, stream::PAIRS), policy)
        }
    }
}

pub fn evaluate(
    model: &ModelState,
    ds: &Dataset,
    role: Role,
    embed: EmbeddingSource,
) -> Result<f64> {
    let nodes = ds.split.nodes(role);
    if nodes.is_empty() {
        return Err(Error::invalid(format!("no {role:?} nodes to evaluate")));
    }
    let trace = forward(model, &ds.graph, embed)?;
    accuracy(trace.logits(), &ds.clean_labels, &nodes)
}

fn check_observed(ds: &Dataset, observed: &[usize]) -> Result<()> {
    if observed.len() != ds.num_nodes() {
        return Err(Error::Shape(format!(
            "{} observed labels for {} nodes",
            observed.len(),
            ds.num_nodes()
        )));
    }
    if let Some((v, y)) = observed
        .iter()
        .enumerate()
        .find(|(_, &y)| y >= ds.num_classes)
    {
        return Err(Error::invalid(format!(
            "observed label {y} of node {v} out of range"
        )));
    }
    Ok(())
}

fn diverged(epoch: usize, what: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::NonFinite(detail) => Error::Divergence {
            epoch,
            what: format!("{what}: {detail}"),
        },
        other => other,
    }
}

fn finite(epoch: usize, what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence {
            epoch,
            what: format!("{what} is {v}"),
        })
    }
}

/// Train the task executor on `observed` labels (training and validation
/// roles are read from it; test accuracy uses the clean labels).
pub fn train(
    ds: &Dataset,
    observed: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModelState, RunResult)> {
    let out = train_full(ds, observed, cfg)?;
    Ok((out.task, out.result))
}

pub fn train_full(ds: &Dataset, observed: &[usize], cfg: &TrainConfig) -> Result<TrainOutput> {
    run(ds, observed, cfg, None, None)
}

/// Train the task executor with constant pair weights on every epoch,
/// ignoring `cfg.mask_mode` and `cfg.pretrain_epochs`.
pub fn train_with_fixed_weights(
    ds: &Dataset,
    observed: &[usize],
    cfg: &TrainConfig,
    labels: &PiLabelSet,
    weights: &PairWeights,
) -> Result<(ModelState, RunResult)> {
    let out = run(ds, observed, cfg, Some(labels.clone()), Some(weights))?;
    Ok((out.task, out.result))
}

fn run(
    ds: &Dataset,
    observed: &[usize],
    cfg: &TrainConfig,
    given_labels: Option<PiLabelSet>,
    fixed: Option<&PairWeights>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    check_observed(ds, observed)?;
    let graph = &ds.graph;
    let train_nodes = ds.split.nodes(Role::Train);
    let val_nodes = ds.split.nodes(Role::Val);
    let test_nodes = ds.split.nodes(Role::Test);
    if val_nodes.is_empty() || test_nodes.is_empty() {
        return Err(Error::invalid(
            "training needs non-empty validation and test roles",
        ));
    }

    let beta = cfg.beta.resolve(ds.num_nodes(), graph.num_edges())?;
    let mask_mode = if fixed.is_some() {
        MaskMode::None
    } else {
        cfg.mask_mode
    };
    let needs_pairs = beta > 0.0 || mask_mode == MaskMode::Generator;
    let labels = match given_labels {
        Some(l) => Some(l),
        None if needs_pairs => Some(build_pi_labels(ds, observed, cfg)?),
        None => None,
    };
    if let (Some(w), Some(l)) = (fixed, &labels) {
        if w.len() != l.num_scored_pairs() {
            return Err(Error::Shape(format!(
                "{} fixed weights for {} scored pairs",
                w.len(),
                l.num_scored_pairs()
            )));
        }
    }

    let seeds = RunSeeds::new(cfg.seed);
    let mut task = init_model(
        cfg.arch_task,
        &cfg.dims(ds, cfg.arch_task, cfg.hidden_task),
        seeds.task_init,
    )?;
    let mut mask = match (&labels, mask_mode) {
        (Some(_), MaskMode::Generator) => Some(init_model(
            cfg.arch_mask,
            &cfg.dims(ds, cfg.arch_mask, cfg.hidden_mask),
            seeds.mask_init,
        )?),
        _ => None,
    };
    let opt_task = cfg.optimizer(cfg.arch_task);
    let opt_mask = cfg.optimizer(cfg.arch_mask);
    let mut rng_task = crate::rng::seeded(seeds.task_dropout);
    let mut rng_mask = crate::rng::seeded(seeds.mask_dropout);
    let zero_logit_grad = mask
        .as_ref()
        .map(|m| Array2::<f64>::zeros((ds.num_nodes(), *m.dims.last().expect("dims"))));

    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64)> = None;
    for epoch in 1..=cfg.epochs {
        let masking = epoch > cfg.pretrain_epochs;

        // Mask generator: loss and gradient at its pre-update weights.
        let mut mask_pi_loss = None;
        let mut mask_grads = None;
        let mut weights: Option<PairWeights> = None;
        if let (Some(m), Some(lab)) = (&mask, &labels) {
            let trace = forward_with_dropout(m, graph, cfg.embedding, cfg.dropout, &mut rng_mask)
                .map_err(diverged(epoch, "mask generator"))?;
            let l = if masking && cfg.dropout == 0.0 {
                let (l, w) = pi_loss_and_mask(trace.embeddings(), lab, cfg.reduction)?;
                weights = Some(w);
                l
            } else {
                if masking {
                    weights = Some(confidence_mask(
                        forward(m, graph, cfg.embedding)?.embeddings(),
                        lab,
                    )?);
                }
                pi_loss(trace.embeddings(), lab, None, cfg.reduction)?
            };
            mask_pi_loss = Some(finite(epoch, "mask generator PI loss", l.loss)?);
            let zero = zero_logit_grad
                .as_ref()
                .expect("allocated with the generator");
            mask_grads = Some(backward(m, graph, &trace, zero, Some(&l.grad))?);
        }

        // Task executor.
        let trace = forward_with_dropout(&task, graph, cfg.embedding, cfg.dropout, &mut rng_task)
            .map_err(diverged(epoch, "task executor"))?;
        if let (MaskMode::TaskSelf, true, Some(lab)) = (mask_mode, masking, &labels) {
            weights = Some(if cfg.dropout > 0.0 {
                confidence_mask(forward(&task, graph, cfg.embedding)?.embeddings(), lab)?
            } else {
                confidence_mask(trace.embeddings(), lab)?
            });
        }
        let applied = fixed.or(weights.as_ref());
        let (cls, grad_logits) = cross_entropy(trace.logits(), observed, &train_nodes)?;
        finite(epoch, "classification loss", cls)?;
        let mut task_pi_loss = None;
        let grads = match (&labels, beta > 0.0) {
            (Some(lab), true) => {
                let l = pi_loss(trace.embeddings(), lab, applied, cfg.reduction)?;
                task_pi_loss = Some(finite(epoch, "task PI loss", l.loss)?);
                let grad_emb = l.grad * beta;
                backward(&task, graph, &trace, &grad_logits, Some(&grad_emb))?
            }
            _ => backward(&task, graph, &trace, &grad_logits, None)?,
        };
        adam_step(&mut task, &grads, &opt_task).map_err(diverged(epoch, "task executor"))?;
        if let (Some(m), Some(g)) = (mask.as_mut(), mask_grads) {
            adam_step(m, &g, &opt_mask).map_err(diverged(epoch, "mask generator"))?;
        }

        let eval =
            forward(&task, graph, cfg.embedding).map_err(diverged(epoch, "task executor"))?;
        let logits = eval.logits();
        let log = EpochLog {
            epoch,
            cls_loss: cls,
            pi_loss: task_pi_loss,
            mask_pi_loss,
            train_acc: accuracy(logits, observed, &train_nodes)?,
            val_acc: accuracy(logits, observed, &val_nodes)?,
            test_acc: accuracy(logits, &ds.clean_labels, &test_nodes)?,
            mean_mask: labels.as_ref().map(|_| applied.map_or(1.0, |w| w.mean())),
        };
        if best.is_none_or(|(_, v, _)| log.val_acc > v) {
            best = Some((epoch, log.val_acc, log.test_acc));
        }
        log::debug!(
            "epoch {epoch}: cls {:.4} pi {:?} train {:.3} val {:.3} test {:.3}",
            log.cls_loss,
            log.pi_loss,
            log.train_acc,
            log.val_acc,
            log.test_acc
        );
        logs.push(log);
    }

    let eval = forward(&task, graph, cfg.embedding)?;
    let logits = eval.logits();
    let final_train_acc = accuracy(logits, observed, &train_nodes)?;
    let final_val_acc = accuracy(logits, observed, &val_nodes)?;
    let final_test_acc = accuracy(logits, &ds.clean_labels, &test_nodes)?;
    let (best_val_epoch, best_val_acc, best_val_test_acc) =
        best.unwrap_or((0, final_val_acc, final_test_acc));
    let result = RunResult {
        config: cfg.clone(),
        beta,
        seeds,
        num_pi_positives: labels.as_ref().map(|l| l.positives().len()),
        num_scored_pairs: labels.as_ref().map(|l| l.num_scored_pairs()),
        epochs: logs,
        metrics: FinalMetrics {
            final_train_acc,
            final_val_acc,
            final_test_acc,
            best_val_epoch,
            best_val_acc,
            best_val_test_acc,
        },
        wall_clock_secs: None,
    };
    Ok(TrainOutput {
        task,
        mask,
        pi_labels: labels,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_prime_values() {
        let b = beta_prime(2485, 5069).unwrap();
        let want = 6_175_225.0 / (6_170_156.0f64 * 6_170_156.0);
        assert!(((b - want) / want).abs() < 1e-12);
        assert!((b - 1.622e-7).abs() < 1e-10);
        assert_eq!(beta_prime(10, 0).unwrap(), 0.01);
        assert!((beta_prime(2, 1).unwrap() - 4.0 / 9.0).abs() < 1e-16);
        assert!(beta_prime(1, 1).is_err());
    }

    #[test]
    fn beta_parsing_and_serde() {
        assert_eq!("auto".parse::<Beta>().unwrap(), Beta::Auto);
        assert_eq!("0.5".parse::<Beta>().unwrap(), Beta::Fixed(0.5));
        assert!("x".parse::<Beta>().is_err());
        assert_eq!(serde_json::to_string(&Beta::Auto).unwrap(), "\"auto\"");
        let b: Beta = serde_json::from_str("2.5").unwrap();
        assert_eq!(b, Beta::Fixed(2.5));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("gat".parse::<Method>().is_err());
        let v = Method::Vanilla.configure(TrainConfig::default());
        assert_eq!((v.beta, v.mask_mode), (Beta::Fixed(0.0), MaskMode::None));
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig {
            epochs: 10,
            pretrain_epochs: 11,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            beta: Beta::Fixed(-1.0),
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 7, "beta": 0.25}"#).unwrap();
        assert_eq!(
            (parsed.epochs, parsed.beta, parsed.pretrain_epochs),
            (7, Beta::Fixed(0.25), 50)
        );
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 7}"#).is_err());
    }
}
