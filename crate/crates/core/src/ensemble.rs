//! Ensemble baselines: the shared-encoder "treenet" trained winner-take-all,
//! and a bagged ensemble of independent networks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;

use crate::autodiff::{Graph, NodeId};
use crate::error::{config_err, dim_err, Error, Result};
use crate::losses::{loss_div_l2, loss_matrix, PairLoss};
use crate::model::{apply_layers, check_manifest, init_layers, layer_manifest, Model, ModelConfig, Parameter};
use crate::rng;
use crate::tensor::Tensor;

/// Shared encoder followed by `N` private heads.
///
/// The shared part is every encoder layer except the last; each head owns
/// the bottleneck layer, the decoder and the output layer. Heads take no
/// control input, so the config's control fields are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TreenetModel {
    config: ModelConfig,
    shared: Vec<Parameter>,
    members: Vec<Vec<Parameter>>,
}

fn plain_shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
    let mut prev = config.input_dim;
    config
        .widths()
        .into_iter()
        .map(|w| {
            let s = (prev, w);
            prev = w;
            s
        })
        .collect()
}

fn shared_layer_count(config: &ModelConfig) -> usize {
    config.encoder_widths.len().saturating_sub(1)
}

impl TreenetModel {
    pub fn init(config: ModelConfig, n_members: usize) -> Result<Self> {
        config.validate()?;
        if n_members == 0 {
            return Err(config_err!("a treenet needs at least one member"));
        }
        let shapes = plain_shapes(&config);
        let split = shared_layer_count(&config);
        let mut r = rng::stream(config.seed, "treenet-shared", 0);
        let shared = name(
            layer_manifest("shared.", &shapes[..split], 0),
            init_layers(&shapes[..split], &mut r),
        );
        let members = (0..n_members)
            .map(|j| {
                let mut r = rng::stream(config.seed, "treenet-member", j as u64);
                name(
                    layer_manifest(&format!("member{j}."), &shapes[split..], split),
                    init_layers(&shapes[split..], &mut r),
                )
            })
            .collect();
        Ok(Self {
            config,
            shared,
            members,
        })
    }

    pub fn manifest(config: &ModelConfig, n_members: usize) -> (Vec<(String, Vec<usize>)>, Vec<Vec<(String, Vec<usize>)>>) {
        let shapes = plain_shapes(config);
        let split = shared_layer_count(config);
        let shared = layer_manifest("shared.", &shapes[..split], 0);
        let members = (0..n_members)
            .map(|j| layer_manifest(&format!("member{j}."), &shapes[split..], split))
            .collect();
        (shared, members)
    }

    pub fn from_parameters(config: ModelConfig, shared: Vec<Parameter>, members: Vec<Vec<Parameter>>) -> Result<Self> {
        config.validate()?;
        if members.is_empty() {
            return Err(config_err!("a treenet needs at least one member"));
        }
        let (ms, mm) = Self::manifest(&config, members.len());
        check_manifest(&ms, &shared)?;
        for (m, p) in mm.iter().zip(&members) {
            check_manifest(m, p)?;
        }
        Ok(Self {
            config,
            shared,
            members,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn shared(&self) -> &[Parameter] {
        &self.shared
    }

    pub fn members(&self) -> &[Vec<Parameter>] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Vec<Parameter>] {
        &mut self.members
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|p| p.value.len()).sum()
    }

    /// Shared parameters first, then each member's in order.
    pub fn parameters(&self) -> impl Iterator<Item = &Parameter> {
        self.shared.iter().chain(self.members.iter().flatten())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.shared
            .iter_mut()
            .chain(self.members.iter_mut().flatten())
            .map(|p| &mut p.value)
    }

    /// Inserts parameters in [`TreenetModel::parameters`] order.
    pub fn insert_params(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.parameters()
            .map(|p| {
                if trainable {
                    g.param(p.value.clone())
                } else {
                    g.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Member-major stacked predictions, `(N · batch) × output_dim`; the
    /// encoder runs once.
    pub fn build_forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        let xs = g.value(x).shape();
        if xs.len() != 2 || xs[1] != self.config.input_dim {
            return Err(dim_err!(
                "input shape {:?} does not match input_dim {}",
                xs,
                self.config.input_dim
            ));
        }
        let cfg = &self.config;
        let n_shared = self.shared.len();
        let encoded = apply_layers(g, &params[..n_shared], x, |_| None, |k| cfg.activation_of(k))?;
        let split = n_shared / 2;
        let per_member = self.members.first().map_or(0, |m| m.len());
        let mut heads = Vec::with_capacity(self.members.len());
        for j in 0..self.members.len() {
            let start = n_shared + j * per_member;
            let head = apply_layers(
                g,
                &params[start..start + per_member],
                encoded,
                |_| None,
                |k| cfg.activation_of(split + k),
            )?;
            heads.push(head);
        }
        g.concat_rows(&heads)
    }

    /// One prediction slab per member: `N × batch × output_dim`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let ps = self.insert_params(&mut g, false);
        let xn = g.constant(x.clone());
        let out = self.build_forward(&mut g, &ps, xn)?;
        let v = g.value(out).clone();
        if !v.is_finite() {
            return Err(Error::Numerical(String::from("non-finite treenet output")));
        }
        v.reshape(&[self.members.len(), x.rows(), self.config.output_dim])
    }
}

fn name(manifest: Vec<(String, Vec<usize>)>, values: Vec<Tensor>) -> Vec<Parameter> {
    manifest
        .into_iter()
        .zip(values)
        .map(|((name, _), value)| Parameter { name, value })
        .collect()
}

/// Winner-take-all loss over member predictions (`N × d`) for one item:
/// `Σ_y min_member l + epsilon · mean of all pair losses`.
pub fn treenet_loss(g: &mut Graph, preds: NodeId, labels: &Tensor, epsilon: f64) -> Result<NodeId> {
    let m = loss_matrix(g, preds, labels, PairLoss::SquaredError)?;
    loss_div_l2(g, &m, epsilon)
}

/// Independent networks, each trained on its own subset of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct BaggedEnsemble {
    pub members: Vec<Model>,
    /// Training-set positions used by each member.
    pub subsets: Vec<Vec<usize>>,
}

/// Size of each bagged subset: `round(2/3 · n_train)`.
pub fn bagged_subset_size(n_train: usize) -> usize {
    (2 * n_train + 1) / 3
}

/// Draws one sorted subset per member without replacement.
pub fn bagged_subsets(n_train: usize, n_members: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_train < 3 {
        return Err(config_err!("bagging needs at least 3 training items, got {}", n_train));
    }
    if n_members == 0 {
        return Err(config_err!("a bagged ensemble needs at least one member"));
    }
    let size = bagged_subset_size(n_train);
    Ok((0..n_members)
        .map(|j| {
            let mut r = rng::stream(seed, "bagged-subset", j as u64);
            let mut s = index::sample(&mut r, n_train, size).into_vec();
            s.sort_unstable();
            s
        })
        .collect())
}

/// Config of one bagged member: a single constant control.
pub fn bagged_member_config(config: &ModelConfig, member: usize, seed: u64) -> ModelConfig {
    let mut c = config.clone();
    c.control_dim = 1;
    c.control_kind = crate::model::ControlKind::Discrete;
    c.seed = rng::derive_seed(seed, "bagged-member", member as u64);
    c
}
