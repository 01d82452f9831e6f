//! Flat `key=value` run configuration.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Every key of [`Settings::KEYS`] is optional and unknown keys are errors.
//! [`Settings::render`] writes every key, and parsing the rendered text
//! gives back the same settings.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::{PredictionRule, RunConfig};
use crate::config::{DelayInit, DelayMode, Feedback};
use crate::data::Preprocess;
use crate::learn::OptimizerKind;

#[derive(Debug, Error, PartialEq)]
pub enum SettingsError {
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("bad value `{value}` for `{key}`: expected {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSettings {
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub preprocess: Preprocess,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub run: RunConfig,
    pub data: DataSettings,
    explicit: BTreeSet<String>,
}

fn parse<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, SettingsError> {
    value.parse().map_err(|_| SettingsError::BadValue { key: key.into(), value: value.into(), expected })
}

fn named<T>(key: &str, value: &str, expected: &'static str, f: impl Fn(&str) -> Option<T>) -> Result<T, SettingsError> {
    f(value).ok_or_else(|| SettingsError::BadValue { key: key.into(), value: value.into(), expected })
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show(v: impl Display) -> String {
    v.to_string()
}

impl Settings {
    pub const KEYS: &'static [&'static str] = &[
        "n_in",
        "n_hidden",
        "n_out",
        "recurrent",
        "delay_in",
        "delay_rec",
        "delay_init",
        "dt",
        "tau_m",
        "tau_out",
        "v_th",
        "v_reset",
        "gamma_pd",
        "sigma",
        "d_max",
        "lr_w",
        "lr_d",
        "sparsity",
        "feedback",
        "seed",
        "epochs",
        "batch_size",
        "learn_weights",
        "learn_readout",
        "learn_delays_in",
        "learn_delays_rec",
        "repeats",
        "experiment",
        "optimizer",
        "prediction",
        "single_stream",
        "train_manifest",
        "test_manifest",
        "bin_factor",
        "frame_ms",
        "source_channels",
    ];

    /// Settings whose defaults come from `run` rather than [`RunConfig::default`].
    pub fn from_run(run: RunConfig) -> Self {
        Self { run, ..Self::default() }
    }

    /// Whether `key` was set from a file or override rather than defaulted.
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SettingsError> {
        const INT: &str = "a non-negative integer";
        const NUM: &str = "a number";
        const BOOL: &str = "true or false";
        const DELAY: &str = "none, axonal or synaptic";
        let value = value.trim();
        let net = &mut self.run.net;
        let learn = &mut self.run.learn;
        let pre = &mut self.data.preprocess;
        match key {
            "n_in" => net.n_in = parse(key, value, INT)?,
            "n_hidden" => net.n_hidden = parse(key, value, INT)?,
            "n_out" => net.n_out = parse(key, value, INT)?,
            "recurrent" => net.recurrent = parse(key, value, BOOL)?,
            "delay_in" => net.delay_in = named(key, value, DELAY, DelayMode::parse)?,
            "delay_rec" => net.delay_rec = named(key, value, DELAY, DelayMode::parse)?,
            "delay_init" => {
                net.delay_init = named(key, value, "uniform or zero", |v| match v {
                    "uniform" => Some(DelayInit::Uniform),
                    "zero" => Some(DelayInit::Zero),
                    _ => None,
                })?
            }
            "dt" => net.dt = parse(key, value, NUM)?,
            "tau_m" => net.tau_m = parse(key, value, NUM)?,
            "tau_out" => net.tau_out = parse(key, value, NUM)?,
            "v_th" => net.v_th = parse(key, value, NUM)?,
            "v_reset" => net.v_reset = parse(key, value, NUM)?,
            "gamma_pd" => net.gamma_pd = parse(key, value, NUM)?,
            "sigma" => net.sigma = parse(key, value, NUM)?,
            "d_max" => net.d_max = parse(key, value, INT)?,
            "lr_w" => net.lr_w = parse(key, value, NUM)?,
            "lr_d" => net.lr_d = parse(key, value, NUM)?,
            "sparsity" => net.sparsity = parse(key, value, NUM)?,
            "feedback" => {
                net.feedback = named(key, value, "symmetric or random", |v| match v {
                    "symmetric" => Some(Feedback::Symmetric),
                    "random" => Some(Feedback::Random),
                    _ => None,
                })?
            }
            "seed" => net.seed = parse(key, value, INT)?,
            "epochs" => self.run.epochs = parse(key, value, INT)?,
            "batch_size" => self.run.batch_size = parse(key, value, INT)?,
            "learn_weights" => learn.weights = parse(key, value, BOOL)?,
            "learn_readout" => learn.readout = parse(key, value, BOOL)?,
            "learn_delays_in" => learn.delays_in = parse(key, value, BOOL)?,
            "learn_delays_rec" => learn.delays_rec = parse(key, value, BOOL)?,
            "repeats" => self.run.repeats = parse(key, value, INT)?,
            "experiment" => self.run.experiment = value.into(),
            "optimizer" => {
                self.run.optimizer = named(key, value, "sgd or adam", |v| match v {
                    "sgd" => Some(OptimizerKind::Sgd),
                    "adam" => Some(OptimizerKind::Adam),
                    _ => None,
                })?
            }
            "prediction" => {
                self.run.prediction =
                    named(key, value, "summed_softmax, final or max_over_time", PredictionRule::parse)?
            }
            "single_stream" => self.run.single_stream = parse(key, value, BOOL)?,
            "train_manifest" => self.data.train_manifest = path(value),
            "test_manifest" => self.data.test_manifest = path(value),
            "bin_factor" => pre.bin_factor = parse(key, value, INT)?,
            "frame_ms" => pre.frame_ms = parse(key, value, NUM)?,
            "source_channels" => pre.source_channels = parse(key, value, INT)?,
            _ => return Err(SettingsError::UnknownKey { key: key.into() }),
        }
        self.explicit.insert(key.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let net = &self.run.net;
        let learn = &self.run.learn;
        let pre = &self.data.preprocess;
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "n_in" => show(net.n_in),
            "n_hidden" => show(net.n_hidden),
            "n_out" => show(net.n_out),
            "recurrent" => show(net.recurrent),
            "delay_in" => net.delay_in.name().into(),
            "delay_rec" => net.delay_rec.name().into(),
            "delay_init" => match net.delay_init {
                DelayInit::Uniform => "uniform".into(),
                DelayInit::Zero => "zero".into(),
            },
            "dt" => show(net.dt),
            "tau_m" => show(net.tau_m),
            "tau_out" => show(net.tau_out),
            "v_th" => show(net.v_th),
            "v_reset" => show(net.v_reset),
            "gamma_pd" => show(net.gamma_pd),
            "sigma" => show(net.sigma),
            "d_max" => show(net.d_max),
            "lr_w" => show(net.lr_w),
            "lr_d" => show(net.lr_d),
            "sparsity" => show(net.sparsity),
            "feedback" => match net.feedback {
                Feedback::Symmetric => "symmetric".into(),
                Feedback::Random => "random".into(),
            },
            "seed" => show(net.seed),
            "epochs" => show(self.run.epochs),
            "batch_size" => show(self.run.batch_size),
            "learn_weights" => show(learn.weights),
            "learn_readout" => show(learn.readout),
            "learn_delays_in" => show(learn.delays_in),
            "learn_delays_rec" => show(learn.delays_rec),
            "repeats" => show(self.run.repeats),
            "experiment" => self.run.experiment.clone(),
            "optimizer" => match self.run.optimizer {
                OptimizerKind::Sgd => "sgd".into(),
                OptimizerKind::Adam => "adam".into(),
            },
            "prediction" => self.run.prediction.name().into(),
            "single_stream" => show(self.run.single_stream),
            "train_manifest" => opt_path(&self.data.train_manifest),
            "test_manifest" => opt_path(&self.data.test_manifest),
            "bin_factor" => show(pre.bin_factor),
            "frame_ms" => show(pre.frame_ms),
            "source_channels" => show(pre.source_channels),
            _ => return None,
        })
    }

    /// Apply `key=value` lines on top of the current values.
    pub fn apply_str(&mut self, text: &str) -> Result<(), SettingsError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SettingsError::Syntax { line: n + 1, text: raw.into() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, SettingsError> {
        let mut s = Self::default();
        s.apply_str(text)?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SettingsError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| SettingsError::Io { path: path.into(), message: e.to_string() })?;
        Self::parse_str(&text)
    }

    /// Apply command-line overrides of the form `key=value`.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), SettingsError> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| SettingsError::Syntax { line: 0, text: o.into() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Every key, one per line, in [`Settings::KEYS`] order.
    pub fn render(&self) -> String {
        Self::KEYS.iter().map(|k| format!("{k}={}\n", self.get(k).expect("listed key"))).collect()
    }
}
