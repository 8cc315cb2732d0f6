//! Losses, the optimiser, learning-rate schedules and the training loop.

mod losses;
mod optim;
mod schedule;

use serde::{Deserialize, Serialize};

pub use losses::{cross_entropy_loss, l1_loss, LossKind};
pub use optim::AdamW;
pub use schedule::{cosine_anneal_lr, Constant, CosineAnnealing, Schedule, ScheduleFactory, ScheduleRegistry};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::GigSample;
use crate::gsg::GsgConfig;
use crate::network::{GigNetwork, NetworkConfig, PreparedSample, Readout};
use crate::rng::GigRng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// GIG vertices per GIG sample, i.e. the batch size.
    pub samples_per_gig: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub schedule: String,
    /// Defaults to L1 for regression heads and cross-entropy otherwise.
    pub loss: Option<LossKind>,
    pub seed: u64,
    pub network: NetworkConfig,
    pub gsg: GsgConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            samples_per_gig: 32,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            schedule: "cosine_annealing".into(),
            loss: None,
            seed: 0,
            network: NetworkConfig::default(),
            gsg: GsgConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_gig == 0 {
            return Err(Error::Config("samples_per_gig must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.network.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        self.gsg.validate()?;
        self.loss_kind().map(|_| ())
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        let natural = if self.network.readout.is_regression() {
            LossKind::L1
        } else {
            LossKind::CrossEntropy
        };
        match self.loss {
            None => Ok(natural),
            Some(k) if k == natural => Ok(k),
            Some(k) => Err(Error::Config(format!(
                "loss {k} does not fit the {} readout",
                self.network.readout
            ))),
        }
    }
}

/// Supervision for one GIG sample, one row per prediction row.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    /// `[rows × outputs]`
    Values(Tensor),
}

impl Targets {
    pub fn rows(&self) -> usize {
        match self {
            Self::Classes(c) => c.len(),
            Self::Values(t) => t.rows(),
        }
    }
}

/// A generated GIG sample, its batched form, and its targets.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub sample: GigSample,
    pub prep: PreparedSample,
    pub targets: Targets,
}

impl TrainSample {
    pub fn new(sample: GigSample, targets: Targets) -> Result<Self> {
        let prep = PreparedSample::new(&sample)?;
        Ok(Self { sample, prep, targets })
    }

    /// Number of prediction rows `readout` produces for this sample.
    pub fn output_rows(&self, readout: Readout) -> usize {
        let lay = &self.prep.layout;
        match readout {
            Readout::GraphClass | Readout::GraphReg => lay.num_gig,
            Readout::VertexClass => lay.total_vertices(),
            Readout::EdgeClass => lay.total_edges(),
            Readout::ClipClass => 1,
        }
    }
}

fn sample_loss(tape: &mut Tape, out: Var, targets: &Targets, kind: LossKind) -> Result<Var> {
    match (kind, targets) {
        (LossKind::CrossEntropy, Targets::Classes(c)) => cross_entropy_loss(tape, out, c),
        (LossKind::L1, Targets::Values(t)) => l1_loss(tape, out, t),
        (k, _) => Err(Error::Config(format!("targets do not match the {k} loss"))),
    }
}

/// Correct rows (classes) or summed absolute error (values).
fn metric_total(out: &Tensor, targets: &Targets) -> f64 {
    match targets {
        Targets::Classes(c) => c
            .iter()
            .enumerate()
            .filter(|&(r, &t)| argmax(out.row_slice(r)) == t)
            .count() as f64,
        Targets::Values(t) => out.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs()).sum(),
    }
}

fn metric_count(targets: &Targets) -> usize {
    match targets {
        Targets::Classes(c) => c.len(),
        Targets::Values(t) => t.len(),
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

#[derive(Default)]
struct Tally {
    loss: f64,
    samples: usize,
    metric: f64,
    rows: usize,
}

impl Tally {
    fn add(&mut self, loss: f64, out: &Tensor, targets: &Targets) {
        self.loss += loss;
        self.samples += 1;
        self.metric += metric_total(out, targets);
        self.rows += metric_count(targets);
    }

    fn finish(&self) -> (f64, f64) {
        let loss = self.loss / self.samples.max(1) as f64;
        let metric = self.metric / self.rows.max(1) as f64;
        (loss, metric)
    }
}

/// Mean per-sample loss and the task metric: accuracy for classification,
/// mean absolute error for regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
    pub metric_name: &'static str,
    pub samples: usize,
}

fn metric_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::CrossEntropy => "accuracy",
        LossKind::L1 => "mae",
    }
}

pub fn evaluate(network: &GigNetwork, params: &ParamStore, samples: &[TrainSample], kind: LossKind) -> Result<Evaluation> {
    let mut tally = Tally::default();
    for s in samples {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let out = network.forward(&mut tape, &bound, &s.prep)?;
        let loss = sample_loss(&mut tape, out, &s.targets, kind)?;
        tally.add(tape.value(loss)?[0], &tape.tensor(out)?, &s.targets);
    }
    let (loss, metric) = tally.finish();
    Ok(Evaluation {
        loss,
        metric,
        metric_name: metric_name(kind),
        samples: samples.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Running mean over the epoch's optimiser steps.
    pub train_loss: f64,
    pub train_metric: f64,
    pub val_loss: Option<f64>,
    pub val_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct History {
    pub metric_name: &'static str,
    pub epochs: Vec<EpochRecord>,
}

const SHUFFLE_STREAM: u64 = 1;

/// Trains `params` in place: one AdamW step per GIG sample, samples visited
/// in a seeded shuffled order each epoch, learning rate set per epoch.
pub fn fit(
    network: &GigNetwork,
    params: &mut ParamStore,
    train: &[TrainSample],
    val: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<History> {
    fit_with(network, params, train, val, cfg, &ScheduleRegistry::default())
}

pub fn fit_with(
    network: &GigNetwork,
    params: &mut ParamStore,
    train: &[TrainSample],
    val: &[TrainSample],
    cfg: &TrainConfig,
    schedules: &ScheduleRegistry,
) -> Result<History> {
    cfg.validate()?;
    network.check_params(params)?;
    let kind = cfg.loss_kind()?;
    let schedule = schedules.create(&cfg.schedule)?;
    let mut history = History {
        metric_name: metric_name(kind),
        epochs: Vec::new(),
    };
    if cfg.epochs == 0 {
        return Ok(history);
    }
    if train.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    let mut opt = AdamW::new(cfg.weight_decay);
    let mut rng = GigRng::new(cfg.seed).stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = schedule.lr(cfg.learning_rate, epoch, cfg.epochs);
        rng.shuffle(&mut order);
        let mut tally = Tally::default();
        for &i in &order {
            let s = &train[i];
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let out = network.forward(&mut tape, &bound, &s.prep)?;
            let loss = sample_loss(&mut tape, out, &s.targets, kind)?;
            tally.add(tape.value(loss)?[0], &tape.tensor(out)?, &s.targets);
            let grads = tape.backward(loss)?;
            params.store_gradients(&bound, &grads)?;
            opt.step(params, lr);
        }
        params.clear_gradients();
        let (train_loss, train_metric) = tally.finish();
        let v = if val.is_empty() {
            None
        } else {
            Some(evaluate(network, params, val, kind)?)
        };
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            train_metric,
            val_loss: v.map(|e| e.loss),
            val_metric: v.map(|e| e.metric),
        });
    }
    Ok(history)
}
