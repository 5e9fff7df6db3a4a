//! Encoder–bottleneck–decoder dense network `f(c, x)`.
//!
//! The network is a stack of dense layers: the encoder widths, then the
//! decoder widths, then an output layer of width `output_dim`. An injection
//! point `p` concatenates the encoded control value onto the input of dense
//! layer `p`; point `0` is the raw input and point `encoder_widths.len()` is
//! the bottleneck activation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{Activation, Graph, NodeId};
use crate::error::{config_err, dim_err, usage_err, Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Whether a model consumes one-hot indices or raw real vectors as `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Discrete,
    Continuous,
}

/// One control value `c`.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlValue {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl ControlValue {
    /// One-hot for discrete values, the raw vector for continuous ones.
    pub fn encode(&self, control_dim: usize) -> Result<Vec<f64>> {
        match self {
            ControlValue::Discrete(i) => {
                if *i >= control_dim {
                    return Err(config_err!(
                        "control index {} out of range for control_dim {}",
                        i,
                        control_dim
                    ));
                }
                let mut v = vec![0.0; control_dim];
                v[*i] = 1.0;
                Ok(v)
            }
            ControlValue::Continuous(v) => {
                if v.len() != control_dim {
                    return Err(config_err!(
                        "continuous control has {} components, control_dim is {}",
                        v.len(),
                        control_dim
                    ));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn kind(&self) -> ControlKind {
        match self {
            ControlValue::Discrete(_) => ControlKind::Discrete,
            ControlValue::Continuous(_) => ControlKind::Continuous,
        }
    }
}

/// The control set `𝒞`: all indices `0..n` or an explicit list of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    Discrete(usize),
    Continuous(Vec<Vec<f64>>),
}

impl ControlSet {
    pub fn len(&self) -> usize {
        match self {
            ControlSet::Discrete(n) => *n,
            ControlSet::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ControlKind {
        match self {
            ControlSet::Discrete(_) => ControlKind::Discrete,
            ControlSet::Continuous(_) => ControlKind::Continuous,
        }
    }

    pub fn values(&self) -> Vec<ControlValue> {
        match self {
            ControlSet::Discrete(n) => (0..*n).map(ControlValue::Discrete).collect(),
            ControlSet::Continuous(v) => v.iter().cloned().map(ControlValue::Continuous).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Dense-layer indices whose input gets `c` concatenated.
    pub injection_points: Vec<usize>,
    /// `|𝒞|` for one-hot controls, the dimensionality of `c` otherwise.
    pub control_dim: usize,
    pub control_kind: ControlKind,
    pub seed: u64,
}

impl ModelConfig {
    /// A discrete-control model injecting `c` at the bottleneck only, with
    /// tanh hidden units and a linear output.
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        encoder_widths: &[usize],
        decoder_widths: &[usize],
        control_dim: usize,
    ) -> Self {
        Self {
            input_dim,
            output_dim,
            encoder_widths: encoder_widths.to_vec(),
            decoder_widths: decoder_widths.to_vec(),
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
            injection_points: vec![encoder_widths.len()],
            control_dim,
            control_kind: ControlKind::Discrete,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn bottleneck_point(&self) -> usize {
        self.encoder_widths.len()
    }

    /// Number of dense layers including the output layer.
    pub fn n_layers(&self) -> usize {
        self.encoder_widths.len() + self.decoder_widths.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(config_err!("input_dim and output_dim must be positive"));
        }
        if let Some(i) = self
            .encoder_widths
            .iter()
            .chain(&self.decoder_widths)
            .position(|&w| w == 0)
        {
            return Err(config_err!("layer {} has zero width", i));
        }
        if self.control_dim == 0 {
            return Err(config_err!("control_dim must be at least 1"));
        }
        if self.injection_points.is_empty() {
            return Err(config_err!("at least one injection point is required"));
        }
        if let Some(&p) = self.injection_points.iter().find(|&&p| p >= self.n_layers()) {
            return Err(config_err!(
                "injection point {} out of range (model has {} dense layers)",
                p,
                self.n_layers()
            ));
        }
        Ok(())
    }

    fn injects_at(&self, layer: usize) -> bool {
        self.injection_points.contains(&layer)
    }

    /// Output widths of every dense layer.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self
            .encoder_widths
            .iter()
            .chain(&self.decoder_widths)
            .copied()
            .collect();
        w.push(self.output_dim);
        w
    }

    /// `(fan_in, fan_out)` of every dense layer, control columns included.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut prev = self.input_dim;
        self.widths()
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let fan_in = prev + if self.injects_at(i) { self.control_dim } else { 0 };
                prev = w;
                (fan_in, w)
            })
            .collect()
    }

    pub fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Names and shapes of all parameters, in storage order.
    pub fn parameter_manifest(&self) -> Vec<(String, Vec<usize>)> {
        layer_manifest("", &self.layer_shapes(), 0)
    }
}

pub(crate) fn layer_manifest(
    prefix: &str,
    shapes: &[(usize, usize)],
    first_index: usize,
) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::with_capacity(shapes.len() * 2);
    for (k, &(fan_in, fan_out)) in shapes.iter().enumerate() {
        let i = first_index + k;
        out.push((format!("{prefix}layer{i}.weight"), vec![fan_in, fan_out]));
        out.push((format!("{prefix}layer{i}.bias"), vec![fan_out]));
    }
    out
}

/// Glorot-uniform weights and zero biases for the given layer shapes.
pub(crate) fn init_layers(shapes: &[(usize, usize)], rng: &mut rng::Rng) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(shapes.len() * 2);
    for &(fan_in, fan_out) in shapes {
        let s = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random::<f64>() * 2.0 * s - s)
            .collect();
        out.push(Tensor::new(&[fan_in, fan_out], w).expect("shape"));
        out.push(Tensor::zeros(&[fan_out]));
    }
    out
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
}

/// Applies dense layers `(weight, bias)` to `input`. `inject(k)` returns a
/// control node to concatenate onto the input of layer `k`, and
/// `activation(k)` that layer's nonlinearity.
pub(crate) fn apply_layers(
    g: &mut Graph,
    layers: &[NodeId],
    input: NodeId,
    inject: impl Fn(usize) -> Option<NodeId>,
    activation: impl Fn(usize) -> Activation,
) -> Result<NodeId> {
    let mut h = input;
    for (k, wb) in layers.chunks(2).enumerate() {
        if let Some(c) = inject(k) {
            h = g.concat_features(h, c)?;
        }
        let z = g.matmul(h, wb[0])?;
        let z = g.add_bias(z, wb[1])?;
        h = g.activation(z, activation(k));
    }
    Ok(h)
}

/// A dense network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Vec<Parameter>,
}

impl Model {
    /// Initializes parameters deterministically from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.seed, "model-init", 0);
        let values = init_layers(&config.layer_shapes(), &mut r);
        let params = config
            .parameter_manifest()
            .into_iter()
            .zip(values)
            .map(|((name, _), value)| Parameter { name, value })
            .collect();
        Ok(Self { config, params })
    }

    /// Rebuilds a model from stored parameters, checking every shape against
    /// the config.
    pub fn from_parameters(config: ModelConfig, params: Vec<Parameter>) -> Result<Self> {
        config.validate()?;
        check_manifest(&config.parameter_manifest(), &params)?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.params.iter_mut().map(|p| &mut p.value)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Inserts all parameters into `g`, as trainable leaves or constants.
    pub fn insert_params(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    g.param(p.value.clone())
                } else {
                    g.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Builds the forward pass for a batch whose row `r` uses the encoded
    /// control in row `r` of `controls`.
    pub fn build_forward(
        &self,
        g: &mut Graph,
        params: &[NodeId],
        x: NodeId,
        controls: &Tensor,
    ) -> Result<NodeId> {
        let xs = g.value(x).shape();
        if xs.len() != 2 || xs[1] != self.config.input_dim {
            return Err(dim_err!(
                "input shape {:?} does not match input_dim {}",
                xs,
                self.config.input_dim
            ));
        }
        let rows = xs[0];
        if controls.rank() != 2 || controls.cols() != self.config.control_dim {
            return Err(config_err!(
                "control block {:?} does not match control_dim {}",
                controls.shape(),
                self.config.control_dim
            ));
        }
        if controls.rows() != rows {
            return Err(dim_err!(
                "control block has {} rows for a batch of {}",
                controls.rows(),
                rows
            ));
        }
        let c = g.constant(controls.clone());
        let cfg = &self.config;
        apply_layers(
            g,
            params,
            x,
            |k| cfg.injects_at(k).then_some(c),
            |k| cfg.activation_of(k),
        )
    }

    fn check_kind(&self, kind: ControlKind) -> Result<()> {
        if kind != self.config.control_kind {
            return Err(usage_err!(
                "{:?} control given to a model configured for {:?} controls",
                kind,
                self.config.control_kind
            ));
        }
        Ok(())
    }

    /// Forward pass with one encoded control row per input row.
    pub fn forward_rows(&self, x: &Tensor, controls: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let ps = self.insert_params(&mut g, false);
        let xn = g.constant(x.clone());
        let out = self.build_forward(&mut g, &ps, xn, controls)?;
        let value = g.value(out).clone();
        if !value.is_finite() {
            return Err(Error::Numerical(String::from("non-finite model output")));
        }
        Ok(value)
    }

    /// `f(c, x)` for a batch `x` of shape `batch × input_dim`.
    pub fn forward(&self, c: &ControlValue, x: &Tensor) -> Result<Tensor> {
        self.check_kind(c.kind())?;
        let enc = c.encode(self.config.control_dim)?;
        let rows = x.rows();
        let mut block = Vec::with_capacity(rows * enc.len());
        for _ in 0..rows {
            block.extend_from_slice(&enc);
        }
        self.forward_rows(x, &Tensor::matrix(rows, enc.len(), block)?)
    }

    /// Stacks `forward(c_i, x)` for every `c_i` in order:
    /// shape `|𝒞| × batch × output_dim`.
    pub fn forward_all_controls(&self, controls: &ControlSet, x: &Tensor) -> Result<Tensor> {
        if controls.is_empty() {
            return Err(crate::error::arg_err!("empty control set"));
        }
        self.check_kind(controls.kind())?;
        if x.rank() != 2 {
            return Err(dim_err!("input must be a matrix, got {:?}", x.shape()));
        }
        let b = x.rows();
        let m = controls.len();
        let cd = self.config.control_dim;
        let mut xs = Vec::with_capacity(m * x.len());
        let mut cs = Vec::with_capacity(m * b * cd);
        for c in controls.values() {
            let enc = c.encode(cd)?;
            xs.extend_from_slice(x.data());
            for _ in 0..b {
                cs.extend_from_slice(&enc);
            }
        }
        let out = self.forward_rows(
            &Tensor::matrix(m * b, x.cols(), xs)?,
            &Tensor::matrix(m * b, cd, cs)?,
        )?;
        out.reshape(&[m, b, self.config.output_dim])
    }
}

pub(crate) fn check_manifest(manifest: &[(String, Vec<usize>)], params: &[Parameter]) -> Result<()> {
    if manifest.len() != params.len() {
        return Err(dim_err!(
            "expected {} parameter tensors, got {}",
            manifest.len(),
            params.len()
        ));
    }
    for ((name, shape), p) in manifest.iter().zip(params) {
        if &p.name != name {
            return Err(dim_err!("expected tensor `{}`, found `{}`", name, p.name));
        }
        if p.value.shape() != shape.as_slice() {
            return Err(dim_err!(
                "tensor `{}` has shape {:?}, config requires {:?}",
                name,
                p.value.shape(),
                shape
            ));
        }
    }
    Ok(())
}
