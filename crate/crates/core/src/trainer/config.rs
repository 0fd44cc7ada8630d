use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::OptimizerKind;
use crate::error::{Error, Result};
use crate::topology::{EvolutionSchedule, GrowthRule, PruneRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelPreset {
    /// Single-spike 784-H-10 network with exact spike-time gradients.
    TemporalMlp,
    /// LIF 784-H-10 network with a non-firing readout.
    LifMlp,
    /// LIF `16C3-AP2-32C3-AP2-FC` network.
    TinyConv,
}

impl ModelPreset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TemporalMlp => "temporal-mlp",
            Self::LifMlp => "lif-mlp",
            Self::TinyConv => "tiny-conv",
        }
    }

    pub fn is_lif(&self) -> bool {
        !matches!(self, Self::TemporalMlp)
    }
}

impl FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal-mlp" => Ok(Self::TemporalMlp),
            "lif-mlp" => Ok(Self::LifMlp),
            "tiny-conv" => Ok(Self::TinyConv),
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    SyntheticEvents,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::SyntheticEvents => "synthetic-events",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Self::Mnist),
            "synthetic-events" => Ok(Self::SyntheticEvents),
            other => Err(Error::invalid(format!("unknown dataset `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    /// Per-epoch geometric interpolation: `start · (end/start)^(e/epochs)`.
    Exponential {
        start: f64,
        end: f64,
    },
    Constant(f64),
}

impl LrSchedule {
    pub fn at_epoch(&self, epoch: usize, epochs: usize) -> f64 {
        match *self {
            Self::Exponential { start, end } => {
                start * (end / start).powf(epoch as f64 / epochs.max(1) as f64)
            }
            Self::Constant(lr) => lr,
        }
    }
}

/// Connection-density setting of one maskable layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerDensity {
    Dense,
    /// Erdős–Rényi sparsity factor.
    Epsilon(f64),
}

/// How LIF inputs are derived from static images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateEncoding {
    Analog,
    Bernoulli,
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub model: ModelPreset,
    pub hidden: usize,
    pub dataset: DatasetKind,
    /// Dataset root; falls back to `ESLSNN_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr_schedule: LrSchedule,
    pub alpha: f64,
    pub t_iter: u64,
    /// Last iteration that may rewire; `None` means 3/4 of the run.
    pub t_end: Option<u64>,
    pub prune: PruneRule,
    pub growth: GrowthRule,
    /// Density per maskable layer in order; unlisted layers are dense.
    pub epsilon: Vec<LayerDensity>,
    /// Whether the readout layer follows `epsilon` (it is dense otherwise).
    pub mask_readout: bool,
    /// Re-apply `W := M ⊙ W` after every step instead of only at rewires.
    pub mask_every_step: bool,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Per-layer gradient norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Weight initialisation scale; `None` uses the preset default.
    pub init_scale: Option<f64>,
    pub spike_threshold: f64,
    /// Spike time of sub-threshold pixels; `None` keeps them silent.
    pub late_spike_time: Option<f64>,
    pub weight_sum_reg: f64,
    pub time_steps: usize,
    pub rate_encoding: RateEncoding,
    pub lif_tau: f64,
    pub lif_v_th: f64,
    pub surrogate_width: f64,
    pub synthetic_per_class: usize,
    pub synthetic_test_per_class: usize,
    pub synthetic_classes: usize,
    pub synthetic_size: usize,
    pub synthetic_noise: f64,
    /// Iterations between periodic metrics records; epoch ends always log.
    pub log_every: u64,
    /// Record elapsed seconds; when off the column is 0 and runs are byte-reproducible.
    pub wall_clock: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            model: ModelPreset::TemporalMlp,
            hidden: 800,
            dataset: DatasetKind::Mnist,
            data_dir: None,
            train_limit: None,
            test_limit: None,
            epochs: 30,
            batch_size: 100,
            optimizer: OptimizerKind::default(),
            lr_schedule: LrSchedule::Exponential {
                start: 0.01,
                end: 0.0001,
            },
            alpha: 0.3,
            t_iter: 1000,
            t_end: None,
            prune: PruneRule::SetSigned,
            growth: GrowthRule::Momentum,
            epsilon: vec![LayerDensity::Epsilon(60.0)],
            mask_readout: false,
            mask_every_step: true,
            seed: 0,
            validation_fraction: 0.1,
            grad_clip: Some(1.0),
            init_scale: None,
            spike_threshold: 0.5,
            late_spike_time: Some(1.0),
            weight_sum_reg: 1e-2,
            time_steps: 2,
            rate_encoding: RateEncoding::Analog,
            lif_tau: 0.5,
            lif_v_th: 1.0,
            surrogate_width: 1.0,
            synthetic_per_class: 200,
            synthetic_test_per_class: 50,
            synthetic_classes: 4,
            synthetic_size: 8,
            synthetic_noise: 0.02,
            log_every: 100,
            wall_clock: true,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.epochs == 0
            || self.hidden == 0
            || self.time_steps == 0
            || self.log_every == 0
        {
            return Err(Error::invalid(
                "batch_size, epochs, hidden, time_steps and log_every must be at least 1",
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        match self.lr_schedule {
            LrSchedule::Exponential { start, end } => {
                positive("lr start", start)?;
                positive("lr end", end)?;
            }
            LrSchedule::Constant(lr) => positive("lr", lr)?,
        }
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
                    return Err(Error::invalid("Adam betas must lie in [0, 1)"));
                }
                positive("adam_eps", eps)?;
            }
            OptimizerKind::SgdMomentum { momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::invalid("momentum must lie in [0, 1)"));
                }
            }
        }
        for d in &self.epsilon {
            if let LayerDensity::Epsilon(e) = d {
                positive("epsilon", *e)?;
            }
        }
        if let Some(c) = self.grad_clip {
            positive("grad_clip", c)?;
        }
        if let Some(s) = self.init_scale {
            positive("init_scale", s)?;
        }
        if let Some(t) = self.late_spike_time {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid("late_spike_time must be a finite time >= 0"));
            }
        }
        if !(self.weight_sum_reg >= 0.0 && self.weight_sum_reg.is_finite()) {
            return Err(Error::invalid("weight_sum_reg must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.synthetic_noise) {
            return Err(Error::invalid("synthetic_noise must lie in [0, 1]"));
        }
        if self.synthetic_per_class == 0
            || self.synthetic_test_per_class == 0
            || self.synthetic_classes == 0
            || self.synthetic_size < 4
        {
            return Err(Error::invalid(
                "synthetic dataset sizes must be positive (frame size >= 4)",
            ));
        }
        if self.dataset == DatasetKind::SyntheticEvents && !self.model.is_lif() {
            return Err(Error::invalid("event data needs a LIF model"));
        }
        if self.t_iter == 0 {
            return Err(Error::invalid("t_iter must be at least 1"));
        }
        crate::lif::LifConfig::new(self.lif_tau, self.lif_v_th, self.surrogate_width)?;
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn iterations_per_epoch(&self, n_train: usize) -> u64 {
        n_train.div_ceil(self.batch_size) as u64
    }

    /// The rewiring schedule for a run over `n_train` training samples.
    pub fn schedule(&self, n_train: usize) -> Result<EvolutionSchedule> {
        let total = self.iterations_per_epoch(n_train) * self.epochs as u64;
        let t_end = self.t_end.unwrap_or(total * 3 / 4).max(self.t_iter);
        EvolutionSchedule::new(self.alpha, self.t_iter, t_end, self.prune, self.growth)
    }

    /// Canonical text form; every field is written, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let opt_usize = |v: Option<usize>| v.map_or("none".to_string(), |n| n.to_string());
        let opt_f64 = |v: Option<f64>| v.map_or("none".to_string(), |n| n.to_string());
        put("model", self.model.name().into());
        put("hidden", self.hidden.to_string());
        put("dataset", self.dataset.name().into());
        put(
            "data_dir",
            self.data_dir
                .as_ref()
                .map_or("none".to_string(), |p| p.display().to_string()),
        );
        put("train_limit", opt_usize(self.train_limit));
        put("test_limit", opt_usize(self.test_limit));
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                put("optimizer", "adam".into());
                put("beta1", beta1.to_string());
                put("beta2", beta2.to_string());
                put("adam_eps", eps.to_string());
            }
            OptimizerKind::SgdMomentum { momentum } => {
                put("optimizer", "sgd".into());
                put("momentum", momentum.to_string());
            }
        }
        match self.lr_schedule {
            LrSchedule::Exponential { start, end } => {
                put("lr_schedule", "exponential".into());
                put("lr_start", start.to_string());
                put("lr_end", end.to_string());
            }
            LrSchedule::Constant(lr) => {
                put("lr_schedule", "constant".into());
                put("lr", lr.to_string());
            }
        }
        put("alpha", self.alpha.to_string());
        put("t_iter", self.t_iter.to_string());
        put(
            "t_end",
            self.t_end.map_or("auto".to_string(), |t| t.to_string()),
        );
        put("prune", self.prune.name().into());
        put("growth", self.growth.name().into());
        let eps: Vec<String> = self
            .epsilon
            .iter()
            .map(|d| match d {
                LayerDensity::Dense => "dense".to_string(),
                LayerDensity::Epsilon(e) => e.to_string(),
            })
            .collect();
        put(
            "epsilon",
            if eps.is_empty() {
                "none".into()
            } else {
                eps.join(",")
            },
        );
        put("mask_readout", self.mask_readout.to_string());
        put("mask_every_step", self.mask_every_step.to_string());
        put("seed", self.seed.to_string());
        put("validation_fraction", self.validation_fraction.to_string());
        put("grad_clip", opt_f64(self.grad_clip));
        put(
            "init_scale",
            self.init_scale
                .map_or("auto".to_string(), |s| s.to_string()),
        );
        put("spike_threshold", self.spike_threshold.to_string());
        put("late_spike_time", opt_f64(self.late_spike_time));
        put("weight_sum_reg", self.weight_sum_reg.to_string());
        put("time_steps", self.time_steps.to_string());
        put(
            "rate_encoding",
            match self.rate_encoding {
                RateEncoding::Analog => "analog",
                RateEncoding::Bernoulli => "bernoulli",
            }
            .into(),
        );
        put("lif_tau", self.lif_tau.to_string());
        put("lif_v_th", self.lif_v_th.to_string());
        put("surrogate_width", self.surrogate_width.to_string());
        put("synthetic_per_class", self.synthetic_per_class.to_string());
        put(
            "synthetic_test_per_class",
            self.synthetic_test_per_class.to_string(),
        );
        put("synthetic_classes", self.synthetic_classes.to_string());
        put("synthetic_size", self.synthetic_size.to_string());
        put("synthetic_noise", self.synthetic_noise.to_string());
        put("log_every", self.log_every.to_string());
        put("wall_clock", self.wall_clock.to_string());
        out
    }

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown or repeated keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        let mut adam = (0.9, 0.999, 1e-8);
        let mut momentum = 0.9;
        let mut optimizer = "adam".to_string();
        let mut lr = (0.01, 0.0001, 0.001);
        let mut schedule = "exponential".to_string();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("`{key}` given twice")));
            }
            let parse_err = |e: String| err(format!("{key}: {e}"));
            macro_rules! num {
                () => {
                    value.parse().map_err(|e| parse_err(format!("{e}")))?
                };
            }
            let opt = |none: &str| -> Option<&str> { (value != none).then_some(value) };
            match key {
                "model" => {
                    cfg.model = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
                }
                "hidden" => cfg.hidden = num!(),
                "dataset" => {
                    cfg.dataset = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
                }
                "data_dir" => cfg.data_dir = opt("none").map(PathBuf::from),
                "train_limit" => {
                    cfg.train_limit = opt("none")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "test_limit" => {
                    cfg.test_limit = opt("none")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "epochs" => cfg.epochs = num!(),
                "batch_size" => cfg.batch_size = num!(),
                "optimizer" => optimizer = value.to_string(),
                "beta1" => adam.0 = num!(),
                "beta2" => adam.1 = num!(),
                "adam_eps" => adam.2 = num!(),
                "momentum" => momentum = num!(),
                "lr_schedule" => schedule = value.to_string(),
                "lr_start" => lr.0 = num!(),
                "lr_end" => lr.1 = num!(),
                "lr" => lr.2 = num!(),
                "alpha" => cfg.alpha = num!(),
                "t_iter" => cfg.t_iter = num!(),
                "t_end" => {
                    cfg.t_end = opt("auto")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "prune" => {
                    cfg.prune = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
                }
                "growth" => {
                    cfg.growth = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
                }
                "epsilon" => {
                    cfg.epsilon = parse_densities(value).map_err(|e| parse_err(e.to_string()))?
                }
                "mask_readout" => cfg.mask_readout = num!(),
                "mask_every_step" => cfg.mask_every_step = num!(),
                "seed" => cfg.seed = num!(),
                "validation_fraction" => cfg.validation_fraction = num!(),
                "grad_clip" => {
                    cfg.grad_clip = opt("none")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "init_scale" => {
                    cfg.init_scale = opt("auto")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "spike_threshold" => cfg.spike_threshold = num!(),
                "late_spike_time" => {
                    cfg.late_spike_time = opt("none")
                        .map(str::parse)
                        .transpose()
                        .map_err(|e| parse_err(format!("{e}")))?
                }
                "weight_sum_reg" => cfg.weight_sum_reg = num!(),
                "time_steps" => cfg.time_steps = num!(),
                "rate_encoding" => {
                    cfg.rate_encoding = match value {
                        "analog" => RateEncoding::Analog,
                        "bernoulli" => RateEncoding::Bernoulli,
                        other => return Err(parse_err(format!("unknown encoding `{other}`"))),
                    }
                }
                "lif_tau" => cfg.lif_tau = num!(),
                "lif_v_th" => cfg.lif_v_th = num!(),
                "surrogate_width" => cfg.surrogate_width = num!(),
                "synthetic_per_class" => cfg.synthetic_per_class = num!(),
                "synthetic_test_per_class" => cfg.synthetic_test_per_class = num!(),
                "synthetic_classes" => cfg.synthetic_classes = num!(),
                "synthetic_size" => cfg.synthetic_size = num!(),
                "synthetic_noise" => cfg.synthetic_noise = num!(),
                "log_every" => cfg.log_every = num!(),
                "wall_clock" => cfg.wall_clock = num!(),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.optimizer = match optimizer.as_str() {
            "adam" => OptimizerKind::Adam {
                beta1: adam.0,
                beta2: adam.1,
                eps: adam.2,
            },
            "sgd" => OptimizerKind::SgdMomentum { momentum },
            other => return Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        };
        cfg.lr_schedule = match schedule.as_str() {
            "exponential" => LrSchedule::Exponential {
                start: lr.0,
                end: lr.1,
            },
            "constant" => LrSchedule::Constant(lr.2),
            other => return Err(Error::invalid(format!("unknown lr_schedule `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of [`TrainingConfig::to_text`].
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}

/// Parses a comma list of sparsity factors and `dense` entries.
pub fn parse_densities(value: &str) -> Result<Vec<LayerDensity>> {
    if value == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| match s.trim() {
            "dense" => Ok(LayerDensity::Dense),
            num => num
                .parse::<f64>()
                .map(LayerDensity::Epsilon)
                .map_err(|e| Error::invalid(format!("bad epsilon `{num}`: {e}"))),
        })
        .collect()
}
