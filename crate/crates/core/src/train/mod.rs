//! Batched training, evaluation and experiment protocols.
//!
//! Samples of a batch run concurrently, each with its own network state and
//! traces. Per-sample gradients are reduced in sample order, so a parallel
//! run produces exactly the same parameters as a single-stream run.

pub mod ablation;
pub mod checkpoint;
pub mod presets;
pub mod settings;
pub mod stats;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, NetworkConfig};
use crate::data::{DataError, DenseSample};
use crate::dynamics::effective_delay;
use crate::learn::{
    apply_updates, group_values, is_live, Gradients, Group, LearnError, Learnable, LearnerOptions, OnlineLearner,
    Optimizer, OptimizerKind, SampleOutcome,
};
use crate::params::NetworkParams;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use stats::{confidence_interval, mean};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{0}")]
    Input(String),
}

impl TrainError {
    /// Whether the failure is numeric rather than a problem with inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Self::NonFiniteLoss { .. } | Self::Learn(LearnError::NonFinite { .. }))
    }
}

/// How a class is read off the readout trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// Argmax of the softmax outputs summed over time.
    #[default]
    SummedSoftmax,
    /// Argmax of the readout at the last step.
    Final,
    /// Argmax of each class's largest readout value.
    MaxOverTime,
}

impl PredictionRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "summed_softmax" => Some(Self::SummedSoftmax),
            "final" => Some(Self::Final),
            "max_over_time" => Some(Self::MaxOverTime),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SummedSoftmax => "summed_softmax",
            Self::Final => "final",
            Self::MaxOverTime => "max_over_time",
        }
    }

    /// Predicted class; ties go to the lowest index.
    pub fn predict(self, outcome: &SampleOutcome) -> usize {
        let scores = match self {
            Self::SummedSoftmax => &outcome.prob_sum,
            Self::Final => &outcome.final_y,
            Self::MaxOverTime => &outcome.max_y,
        };
        let mut best = 0;
        for (k, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: NetworkConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learn: Learnable,
    /// Independent seeds per condition when estimating intervals.
    pub repeats: usize,
    pub experiment: String,
    pub optimizer: OptimizerKind,
    pub prediction: PredictionRule,
    /// Process batch samples one after another on the calling thread.
    pub single_stream: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            net: NetworkConfig::default(),
            epochs: 60,
            batch_size: 16,
            learn: Learnable::ALL,
            repeats: 5,
            experiment: "run".into(),
            optimizer: OptimizerKind::Sgd,
            prediction: PredictionRule::SummedSoftmax,
            single_stream: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.net.validate()?;
        if self.batch_size == 0 {
            return Err(TrainError::Input("batch_size must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(TrainError::Input("repeats must be positive".into()));
        }
        Ok(())
    }

    fn learner_options(&self) -> LearnerOptions {
        LearnerOptions { learn: self.learn, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean over samples of the time-summed cross-entropy.
    pub train_loss: f64,
    /// Accuracy of the predictions made while learning.
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub seconds: f64,
}

impl EpochMetrics {
    fn same_values(&self, other: &Self) -> bool {
        (self.epoch, self.train_loss, self.train_accuracy, self.test_loss, self.test_accuracy)
            == (other.epoch, other.train_loss, other.train_accuracy, other.test_loss, other.test_accuracy)
    }
}

/// Counts of live delays per effective integer delay `0..d_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayHistogram {
    pub group: Group,
    pub counts: Vec<usize>,
}

impl DelayHistogram {
    pub fn of(params: &NetworkParams, cfg: &NetworkConfig) -> Vec<DelayHistogram> {
        [Group::DIn, Group::DRec]
            .into_iter()
            .filter(|g| !group_values(params, *g).is_empty())
            .map(|group| {
                let mut counts = vec![0; cfg.d_max];
                for (i, d) in group_values(params, group).iter().enumerate() {
                    if is_live(params, group, i) {
                        let k = effective_delay(*d, cfg.d_max).unwrap_or(0).min(cfg.d_max - 1);
                        counts[k] += 1;
                    }
                }
                DelayHistogram { group, counts }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub epochs: Vec<EpochMetrics>,
    pub wall_seconds: f64,
    pub delay_histograms: Vec<DelayHistogram>,
}

impl RunMetrics {
    /// Equality ignoring wall-clock fields.
    pub fn same_curve(&self, other: &Self) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| a.same_values(b))
            && self.delay_histograms == other.delay_histograms
    }

    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.test_accuracy)
    }

    /// Columns `epoch,split,loss,accuracy,seconds`, one row per split.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,split,loss,accuracy,seconds\n");
        for e in &self.epochs {
            out += &format!("{},train,{},{},{}\n", e.epoch, e.train_loss, e.train_accuracy, e.seconds);
            if let (Some(l), Some(a)) = (e.test_loss, e.test_accuracy) {
                out += &format!("{},test,{},{},{}\n", e.epoch, l, a, e.seconds);
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::File::create(path)?.write_all(self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    /// Mean time-summed cross-entropy.
    pub loss: f64,
}

impl Evaluation {
    /// Top-1 accuracy; zero for an empty set.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn run_samples<T: Send>(
    samples: &[&DenseSample],
    params: &NetworkParams,
    cfg: &NetworkConfig,
    opts: LearnerOptions,
    learn: bool,
    single_stream: bool,
    finish: impl Fn(&mut OnlineLearner, SampleOutcome) -> T + Sync,
) -> Result<Vec<T>, LearnError> {
    let one = |learner: &mut OnlineLearner, s: &&DenseSample| {
        let outcome = learner.run(s, params, cfg, learn)?;
        Ok(finish(learner, outcome))
    };
    if single_stream {
        let mut learner = OnlineLearner::new(params, cfg, opts);
        samples.iter().map(|s| one(&mut learner, s)).collect()
    } else {
        samples.par_iter().map_init(|| OnlineLearner::new(params, cfg, opts), one).collect()
    }
}

/// Top-1 accuracy and mean loss of `params` on `samples`.
pub fn evaluate(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    samples: &[DenseSample],
    rule: PredictionRule,
) -> Result<Evaluation, LearnError> {
    let refs: Vec<&DenseSample> = samples.iter().collect();
    let opts = LearnerOptions {
        learn: Learnable { weights: false, readout: false, delays_in: false, delays_rec: false },
        ..Default::default()
    };
    let results = run_samples(&refs, params, cfg, opts, false, false, |_, o| (rule.predict(&o), o.loss))?;
    let mut eval = Evaluation { correct: 0, total: samples.len(), loss: 0.0 };
    for ((pred, loss), s) in results.into_iter().zip(samples) {
        eval.correct += usize::from(pred == s.label);
        eval.loss += loss;
    }
    if eval.total > 0 {
        eval.loss /= eval.total as f64;
    }
    Ok(eval)
}

/// Sample order for an epoch, a pure function of the seed and epoch index.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Training state that can be advanced one epoch at a time and
/// checkpointed between epochs.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    pub run: RunConfig,
    pub params: NetworkParams,
    pub optimizer: Optimizer,
    pub metrics: RunMetrics,
    train: &'a [DenseSample],
    test: &'a [DenseSample],
}

impl<'a> Trainer<'a> {
    pub fn new(run: RunConfig, train: &'a [DenseSample], test: &'a [DenseSample]) -> Result<Self, TrainError> {
        run.validate()?;
        check_samples(&run.net, train)?;
        check_samples(&run.net, test)?;
        let params = NetworkParams::init(&run.net)?;
        let optimizer = Optimizer::new(run.optimizer);
        let metrics = RunMetrics { delay_histograms: DelayHistogram::of(&params, &run.net), ..Default::default() };
        Ok(Self { run, params, optimizer, metrics, train, test })
    }

    /// Continue from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(
        run: RunConfig,
        ckpt: Checkpoint,
        train: &'a [DenseSample],
        test: &'a [DenseSample],
    ) -> Result<Self, TrainError> {
        let mut t = Self::new(run, train, test)?;
        ckpt.check_compatible(&t.run.net)?;
        t.metrics.delay_histograms = DelayHistogram::of(&ckpt.params, &t.run.net);
        t.params = ckpt.params;
        t.optimizer = ckpt.optimizer;
        t.metrics.epochs = ckpt.epochs;
        Ok(t)
    }

    pub fn epochs_done(&self) -> usize {
        self.metrics.epochs.len()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.run.net.clone(),
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            epochs: self.metrics.epochs.clone(),
        }
    }

    /// One pass over the training set followed by a test evaluation. On a
    /// numeric failure the parameters revert to the start of the epoch.
    pub fn step_epoch(&mut self) -> Result<EpochMetrics, TrainError> {
        let start = Instant::now();
        let epoch = self.epochs_done();
        let saved = (self.params.clone(), self.optimizer.clone());
        let result = self.train_epoch(epoch);
        let (train_loss, train_accuracy) = match result {
            Ok(v) => v,
            Err(e) => {
                (self.params, self.optimizer) = saved;
                return Err(e);
            }
        };
        let (test_loss, test_accuracy) = if self.test.is_empty() {
            (None, None)
        } else {
            let ev = evaluate(&self.params, &self.run.net, self.test, self.run.prediction)?;
            (Some(ev.loss), Some(ev.accuracy()))
        };
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.metrics.epochs.push(m);
        self.metrics.wall_seconds += m.seconds;
        self.metrics.delay_histograms = DelayHistogram::of(&self.params, &self.run.net);
        Ok(m)
    }

    fn train_epoch(&mut self, epoch: usize) -> Result<(f64, f64), TrainError> {
        let cfg = &self.run.net;
        let order = epoch_order(self.train.len(), cfg.seed, epoch);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        let rule = self.run.prediction;
        for (b, chunk) in order.chunks(self.run.batch_size).enumerate() {
            let batch: Vec<&DenseSample> = chunk.iter().map(|&i| &self.train[i]).collect();
            let params = &self.params;
            let results =
                run_samples(&batch, params, cfg, self.run.learner_options(), true, self.run.single_stream, |l, o| {
                    (l.take_gradients(params), o)
                })?;
            let mut total = Gradients::zeros_like(&self.params);
            let mut batch_loss = 0.0;
            for ((g, o), s) in results.iter().zip(&batch) {
                total.add_assign(g);
                batch_loss += o.loss;
                correct += usize::from(rule.predict(o) == s.label);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: epoch + 1, batch: b });
            }
            loss_sum += batch_loss;
            total.scale(1.0 / batch.len() as f64);
            apply_updates(&mut self.params, &mut total, cfg, &self.run.learn, &mut self.optimizer)?;
        }
        let n = self.train.len().max(1) as f64;
        Ok((loss_sum / n, correct as f64 / n))
    }

    /// Run the remaining epochs, calling `after_epoch` after each one.
    pub fn run_to_end(
        &mut self,
        mut after_epoch: impl FnMut(&Self, &EpochMetrics) -> Result<(), TrainError>,
    ) -> Result<(), TrainError> {
        while self.epochs_done() < self.run.epochs {
            let m = self.step_epoch()?;
            after_epoch(self, &m)?;
        }
        Ok(())
    }
}

fn check_samples(cfg: &NetworkConfig, samples: &[DenseSample]) -> Result<(), TrainError> {
    for (k, s) in samples.iter().enumerate() {
        if s.n_channels() != cfg.n_in {
            return Err(TrainError::Input(format!(
                "sample {k} has {} channels, network expects {}",
                s.n_channels(),
                cfg.n_in
            )));
        }
        if s.label >= cfg.n_out {
            return Err(LearnError::Label { label: s.label, classes: cfg.n_out }.into());
        }
    }
    Ok(())
}

/// Train from a fresh initialization.
pub fn train(
    run: &RunConfig,
    train: &[DenseSample],
    test: &[DenseSample],
) -> Result<(NetworkParams, RunMetrics), TrainError> {
    let mut t = Trainer::new(run.clone(), train, test)?;
    t.run_to_end(|_, _| Ok(()))?;
    Ok((t.params, t.metrics))
}
