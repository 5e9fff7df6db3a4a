//! Experiment configuration files.
//!
//! A config is a TOML document with `[data]`, `[model]`, `[train]` and
//! `[eval]` tables. Absent tables and keys take their defaults, except
//! `data.generator`, which must be named whenever a `[data]` table is given.
//! Unknown keys are rejected.

use std::path::Path;

use divnet_core::data::{Generator, Mode, Quadrant};
use divnet_core::optim::OptimizerKind;
use divnet_core::train::ControlMode;
use divnet_core::{Activation, ControlKind, Method, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "DataConfig::multimodal")]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::multimodal(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Multimodal,
    Occluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub generator: GeneratorKind,
    #[serde(default = "d::n_train")]
    pub n_train: usize,
    #[serde(default = "d::n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Mode functions as `sine(amplitude,frequency,phase)` or `const(value)`.
    #[serde(default = "d::modes")]
    pub modes: Vec<String>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "d::grid_side")]
    pub grid_side: usize,
    #[serde(default = "d::n_shapes")]
    pub n_shapes: usize,
    #[serde(default = "d::visible")]
    pub visible: String,
    #[serde(default = "d::k_neighbors")]
    pub k_neighbors: usize,
}

impl DataConfig {
    pub fn multimodal() -> Self {
        Self {
            generator: GeneratorKind::Multimodal,
            n_train: d::n_train(),
            n_test: d::n_test(),
            seed: 0,
            modes: d::modes(),
            noise_sd: 0.0,
            grid_side: d::grid_side(),
            n_shapes: d::n_shapes(),
            visible: d::visible(),
            k_neighbors: d::k_neighbors(),
        }
    }

    pub fn generator(&self) -> Result<Generator, CliError> {
        Ok(match self.generator {
            GeneratorKind::Multimodal => Generator::Multimodal {
                modes: self.modes.iter().map(|m| parse_mode(m)).collect::<Result<_, _>>()?,
                noise_sd: self.noise_sd,
            },
            GeneratorKind::Occluded => Generator::Occluded {
                grid_side: self.grid_side,
                n_shapes: self.n_shapes,
                visible: Quadrant::from_name(&self.visible)
                    .ok_or_else(|| CliError::config(format!("data.visible: unknown quadrant `{}`", self.visible)))?,
                k_neighbors: self.k_neighbors,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    /// Dense-layer indices receiving `c`; empty means the bottleneck.
    pub injection_points: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            encoder_widths: vec![16, 16],
            decoder_widths: vec![16, 16],
            hidden_activation: "tanh".into(),
            output_activation: "identity".into(),
            injection_points: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub method: String,
    pub n_controls: usize,
    /// `discrete` or `continuous`.
    pub control_mode: String,
    pub control_low: f64,
    pub control_high: f64,
    pub control_samples: usize,
    pub control_dim: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    /// `adam` or `sgd`.
    pub optimizer: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            method: t.method.name().into(),
            n_controls: t.n_controls,
            control_mode: "discrete".into(),
            control_low: -1.0,
            control_high: 1.0,
            control_samples: 8,
            control_dim: 1,
            beta: t.beta,
            epsilon: t.epsilon,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            pretrain_epochs: t.pretrain_epochs,
            optimizer: "adam".into(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Largest `k` on the oracle curve; 0 means every slot.
    pub k_max: usize,
    pub n_resamples: usize,
    pub seed: u64,
    /// Degeneracy threshold; 0 selects the default.
    pub tau: f64,
    /// Exact subset enumeration instead of Monte-Carlo draws.
    pub exhaustive: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            k_max: 0,
            n_resamples: divnet_core::eval::DEFAULT_RESAMPLES,
            seed: 0,
            tau: 0.0,
            exhaustive: false,
        }
    }
}

mod d {
    pub fn n_train() -> usize {
        512
    }
    pub fn n_test() -> usize {
        256
    }
    pub fn modes() -> Vec<String> {
        vec!["sine(1,1,0)".into(), "sine(-1,1,0)".into(), "const(0.5)".into()]
    }
    pub fn grid_side() -> usize {
        8
    }
    pub fn n_shapes() -> usize {
        1
    }
    pub fn visible() -> String {
        "top-left".into()
    }
    pub fn k_neighbors() -> usize {
        8
    }
}

/// Parses `sine(a,f,p)` or `const(v)`.
pub fn parse_mode(s: &str) -> Result<Mode, CliError> {
    let bad = || CliError::config(format!("data.modes: cannot parse `{s}`"));
    let s = s.trim();
    let (head, rest) = s.split_once('(').ok_or_else(bad)?;
    let args = rest.strip_suffix(')').ok_or_else(bad)?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match (head.trim(), nums.as_slice()) {
        ("sine", &[amplitude, frequency, phase]) => Ok(Mode::Sine {
            amplitude,
            frequency,
            phase,
        }),
        ("const", &[v]) => Ok(Mode::Constant(v)),
        _ => Err(bad()),
    }
}

pub fn format_mode(m: &Mode) -> String {
    match m {
        Mode::Sine {
            amplitude,
            frequency,
            phase,
        } => format!("sine({amplitude},{frequency},{phase})"),
        Mode::Constant(v) => format!("const({v})"),
    }
}

fn activation(field: &str, name: &str) -> Result<Activation, CliError> {
    Activation::from_name(name).ok_or_else(|| CliError::config(format!("{field}: unknown activation `{name}`")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    /// The config with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Overrides the model, train and eval seeds; the data seed is left alone.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
        self
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        let method = Method::from_name(&t.method)
            .ok_or_else(|| CliError::config(format!("train.method: unknown method `{}`", t.method)))?;
        let control_mode = match t.control_mode.as_str() {
            "discrete" => ControlMode::Discrete,
            "continuous" => ControlMode::Continuous {
                low: t.control_low,
                high: t.control_high,
                samples: t.control_samples,
                dim: t.control_dim,
            },
            other => return Err(CliError::config(format!("train.control_mode: unknown mode `{other}`"))),
        };
        let optimizer = match t.optimizer.as_str() {
            "adam" => OptimizerKind::Adam {
                beta1: t.adam_beta1,
                beta2: t.adam_beta2,
                eps: t.adam_eps,
            },
            "sgd" => OptimizerKind::Sgd,
            other => return Err(CliError::config(format!("train.optimizer: unknown optimizer `{other}`"))),
        };
        let cfg = TrainConfig {
            method,
            n_controls: t.n_controls,
            control_mode,
            beta: t.beta,
            epsilon: t.epsilon,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            pretrain_epochs: t.pretrain_epochs,
            optimizer,
            seed: t.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Model config for data of the given dimensions.
    pub fn model_config(&self, input_dim: usize, output_dim: usize) -> Result<ModelConfig, CliError> {
        let m = &self.model;
        let tc = self.train_config()?;
        let mut mc = ModelConfig::new(input_dim, output_dim, &m.encoder_widths, &m.decoder_widths, tc.control_dim());
        mc.hidden_activation = activation("model.hidden_activation", &m.hidden_activation)?;
        mc.output_activation = activation("model.output_activation", &m.output_activation)?;
        if !m.injection_points.is_empty() {
            mc.injection_points = m.injection_points.clone();
        }
        mc.control_kind = tc.control_kind();
        mc.seed = m.seed;
        if tc.control_kind() == ControlKind::Continuous && tc.method == Method::Bagged {
            return Err(CliError::config("bagged ensembles take discrete controls only"));
        }
        mc.validate()?;
        Ok(mc)
    }

    /// Checks every section without generating data.
    pub fn validate(&self) -> Result<(), CliError> {
        let g = self.data.generator()?;
        if self.data.n_train == 0 {
            return Err(CliError::config("data.n_train must be at least 1"));
        }
        if let Generator::Occluded { grid_side, .. } = g {
            self.model_config(grid_side * grid_side, grid_side * grid_side)?;
        } else {
            self.model_config(1, 1)?;
        }
        Ok(())
    }
}
