//! Training regimes: supervised, unsupervised, and either one preceded by
//! contrastive pre-training of the backbone.

pub mod augment;
pub mod loss;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use augment::{augment, AugmentConfig, AugmentedPair};
pub use loss::{contrastive_loss, supervised_loss, unsupervised_loss, ContrastiveOutput};

use crate::channel::{ChannelRealization, SystemParams};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::gnn::{
    adam_step, gnn_backward, gnn_forward, init_model, AdamConfig, ForwardTrace, GnnModel,
    GradientSet, OptimizerState, UpdateScope, Upstream, DEFAULT_LEAKY_SLOPE,
};
use crate::graph::{build_graph, InterferenceGraph};
use crate::rate::Label;
use crate::seed::{self, tag};

/// A channel with its graph and, when labeled, its optimal schedule.
#[derive(Clone, Debug)]
pub struct Example {
    pub channel: ChannelRealization,
    pub graph: InterferenceGraph,
    pub label: Option<Label>,
}

impl Example {
    pub fn new(channel: ChannelRealization, label: Option<Label>, sys: &SystemParams) -> Result<Self> {
        let graph = build_graph(&channel, sys)?;
        Ok(Example {
            channel,
            graph,
            label,
        })
    }

    pub fn k(&self) -> usize {
        self.channel.k()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Supervised,
    Unsupervised,
    SslThenSupervised,
    SslThenUnsupervised,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::Supervised,
        RegimeKind::Unsupervised,
        RegimeKind::SslThenSupervised,
        RegimeKind::SslThenUnsupervised,
    ];

    pub fn needs_labels(self) -> bool {
        matches!(self, RegimeKind::Supervised | RegimeKind::SslThenSupervised)
    }

    pub fn has_ssl(self) -> bool {
        matches!(self, RegimeKind::SslThenSupervised | RegimeKind::SslThenUnsupervised)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Supervised => "supervised",
            RegimeKind::Unsupervised => "unsupervised",
            RegimeKind::SslThenSupervised => "ssl_then_supervised",
            RegimeKind::SslThenUnsupervised => "ssl_then_unsupervised",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRegime {
    pub kind: RegimeKind,
    pub epochs: usize,
    pub ssl_epochs: usize,
    pub tau: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub augment: AugmentConfig,
    pub dims: Vec<usize>,
    pub leaky_slope: f64,
}

impl TrainingRegime {
    pub fn new(kind: RegimeKind) -> Self {
        TrainingRegime {
            kind,
            epochs: 500,
            ssl_epochs: 100,
            tau: 0.1,
            batch_size: 32,
            adam: AdamConfig::default(),
            augment: AugmentConfig::default(),
            dims: vec![1, 64, 64, 64],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.augment.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_metric: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub initial_model: GnnModel,
    pub final_model: GnnModel,
    /// Model at the epoch with the highest test metric (the initial model
    /// when no main-phase epoch ran).
    pub best_model: GnnModel,
    pub best_epoch: Option<usize>,
    pub best_metric: f64,
    pub log: Vec<EpochLog>,
    pub ssl_losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn metrics(&self) -> Vec<f64> {
        self.log.iter().map(|e| e.test_metric).collect()
    }
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,test_norm_sum_rate\n");
    for e in log {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.test_metric));
    }
    out
}

fn forward_batch(model: &GnnModel, graphs: &[&InterferenceGraph]) -> Result<Vec<ForwardTrace>> {
    graphs.iter().map(|g| gnn_forward(g, model)).collect()
}

/// Loss and summed parameter gradients of the main objective on one batch.
pub fn main_loss_and_grad(
    model: &GnnModel,
    batch: &[&Example],
    kind: RegimeKind,
    sys: &SystemParams,
) -> Result<(f64, GradientSet)> {
    let graphs: Vec<&InterferenceGraph> = batch.iter().map(|e| &e.graph).collect();
    let traces = forward_batch(model, &graphs)?;
    let psi: Vec<Vec<f64>> = traces.iter().map(|t| t.psi.clone()).collect();
    let (loss, d_psi) = if kind.needs_labels() {
        let labels = batch
            .iter()
            .map(|e| {
                e.label
                    .as_ref()
                    .map(|l| l.schedule.as_slice())
                    .ok_or_else(|| Error::State("supervised training needs labeled samples".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        supervised_loss(&labels, &psi)?
    } else {
        let channels: Vec<&ChannelRealization> = batch.iter().map(|e| &e.channel).collect();
        unsupervised_loss(&channels, &psi, sys.noise_over_pmax())?
    };
    let mut grads = GradientSet::zeros_like(model);
    for ((trace, graph), d) in traces.iter().zip(&graphs).zip(&d_psi) {
        let (g, _) = gnn_backward(trace, graph, model, Upstream::Psi(d))?;
        grads.accumulate(&g);
    }
    Ok((loss, grads))
}

/// Contrastive loss and backbone gradients for a batch of view pairs.
pub fn contrastive_loss_and_grad(
    model: &GnnModel,
    pairs: &[AugmentedPair],
    tau: f64,
) -> Result<(f64, GradientSet)> {
    let mut traces_a = Vec::with_capacity(pairs.len());
    let mut traces_b = Vec::with_capacity(pairs.len());
    for p in pairs {
        traces_a.push(gnn_forward(&p.view_a, model)?);
        traces_b.push(gnn_forward(&p.view_b, model)?);
    }
    let emb_a: Vec<Array2<f64>> = traces_a.iter().map(|t| t.embeddings.clone()).collect();
    let emb_b: Vec<Array2<f64>> = traces_b.iter().map(|t| t.embeddings.clone()).collect();
    let out = contrastive_loss(&emb_a, &emb_b, tau)?;
    let mut grads = GradientSet::zeros_like(model);
    for (i, p) in pairs.iter().enumerate() {
        let (g, _) = gnn_backward(&traces_a[i], &p.view_a, model, Upstream::Embeddings(&out.grad_a[i]))?;
        grads.accumulate(&g);
        let (g, _) = gnn_backward(&traces_b[i], &p.view_b, model, Upstream::Embeddings(&out.grad_b[i]))?;
        grads.accumulate(&g);
    }
    Ok((out.loss, grads))
}

fn check_finite(loss: f64, grads: &GradientSet, phase: &str, epoch: usize, batch: usize) -> Result<()> {
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::Numeric(format!(
            "{phase} epoch {epoch}, batch {batch}: loss {loss}, finite gradients: {}",
            grads.is_finite()
        )));
    }
    Ok(())
}

fn shuffled(n: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Contrastive pre-training of the backbone. The head never changes.
pub fn pretrain_backbone(
    model: &mut GnnModel,
    train_set: &[Example],
    regime: &TrainingRegime,
    sys: &SystemParams,
    run_seed: u64,
) -> Result<Vec<f64>> {
    let mut opt = OptimizerState::new(model, regime.adam);
    let mut losses = Vec::with_capacity(regime.ssl_epochs);
    for epoch in 1..=regime.ssl_epochs {
        let order = shuffled(train_set.len(), &mut seed::rng_at(run_seed, &[tag::SSL_SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut n_batches = 0;
        for (bi, chunk) in order.chunks(regime.batch_size).enumerate() {
            let pairs = chunk
                .iter()
                .map(|&i| {
                    let mut rng = seed::rng_at(run_seed, &[tag::AUGMENT, epoch as u64, i as u64]);
                    augment(&train_set[i].channel, &regime.augment, sys, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = contrastive_loss_and_grad(model, &pairs, regime.tau)?;
            check_finite(loss, &grads, "contrastive", epoch, bi + 1)?;
            adam_step(model, &grads, &mut opt, UpdateScope::BackboneOnly)?;
            epoch_loss += loss;
            n_batches += 1;
        }
        losses.push(epoch_loss / n_batches.max(1) as f64);
    }
    Ok(losses)
}

/// Runs one training regime. `run_seed` fixes initialisation, shuffling
/// and augmentation; the result is a pure function of the inputs.
pub fn train(
    train_set: &[Example],
    test_set: &[Example],
    regime: &TrainingRegime,
    sys: &SystemParams,
    run_seed: u64,
) -> Result<TrainOutcome> {
    regime.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if regime.kind.needs_labels() {
        if let Some(i) = train_set.iter().position(|e| e.label.is_none()) {
            return Err(Error::State(format!(
                "regime {} needs labels but training sample {i} is unlabeled",
                regime.kind
            )));
        }
    }

    let mut model = init_model(&regime.dims, regime.leaky_slope, &mut seed::rng_at(run_seed, &[tag::INIT]))?;
    let ssl_losses = if regime.kind.has_ssl() {
        pretrain_backbone(&mut model, train_set, regime, sys, run_seed)?
    } else {
        Vec::new()
    };
    let initial_model = model.clone();

    let mut opt = OptimizerState::new(&model, regime.adam);
    let mut log = Vec::with_capacity(regime.epochs);
    let mut best: Option<(usize, f64, GnnModel)> = None;
    for epoch in 1..=regime.epochs {
        let order = shuffled(train_set.len(), &mut seed::rng_at(run_seed, &[tag::SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut n_batches = 0;
        for (bi, chunk) in order.chunks(regime.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = main_loss_and_grad(&model, &batch, regime.kind, sys)?;
            check_finite(loss, &grads, "main", epoch, bi + 1)?;
            adam_step(&mut model, &grads, &mut opt, UpdateScope::All)?;
            epoch_loss += loss;
            n_batches += 1;
        }
        let metric = evaluate(&model, test_set, sys)?.ratio_of_sums;
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / n_batches as f64,
            test_metric: metric,
        });
        if best.as_ref().is_none_or(|(_, m, _)| metric > *m) {
            best = Some((epoch, metric, model.clone()));
        }
    }

    let (best_epoch, best_metric, best_model) = match best {
        Some((e, m, b)) => (Some(e), m, b),
        None => {
            let m = if test_set.is_empty() {
                f64::NAN
            } else {
                evaluate(&initial_model, test_set, sys)?.ratio_of_sums
            };
            (None, m, initial_model.clone())
        }
    };
    Ok(TrainOutcome {
        initial_model,
        final_model: model,
        best_model,
        best_epoch,
        best_metric,
        log,
        ssl_losses,
    })
}
