//! Training loops for the diverse network and the baselines.
//!
//! Each batch forwards every item under all `M` control values (or through
//! all `M` ensemble members) in one stacked pass, builds a loss matrix per
//! item, averages the per-item objectives over the batch and takes one
//! optimizer step.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{Graph, NodeId};
use crate::data::{batch_iter, Dataset};
use crate::ensemble::{bagged_member_config, bagged_subsets, BaggedEnsemble, TreenetModel};
use crate::error::{arg_err, config_err, dim_err, usage_err, Error, Result};
use crate::eval::PredictionSet;
use crate::losses::{
    assignment_trace, loss_catchup, loss_combined, loss_div_l2, loss_matrix, loss_standard_set, LossConfig, LossMatrix,
    PairLoss,
};
use crate::model::{ControlKind, ControlSet, Model, ModelConfig};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng;
use crate::tensor::Tensor;

/// Training scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Diverse loss plus `beta` · catchup over the control set.
    DiverseNet,
    /// Set loss on every control slot; the single-prediction baseline.
    Standard,
    /// Shared-encoder ensemble trained winner-take-all (`epsilon` forced to 0).
    Treenet,
    /// Treenet plus `epsilon` times the mean pair loss.
    TreenetEps,
    /// Independent members on random 2/3 subsets, each with the set loss.
    Bagged,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DiverseNet => "diversenet",
            Method::Standard => "standard",
            Method::Treenet => "treenet",
            Method::TreenetEps => "treenet_eps",
            Method::Bagged => "bagged",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "diversenet" => Some(Method::DiverseNet),
            "standard" => Some(Method::Standard),
            "treenet" => Some(Method::Treenet),
            "treenet_eps" => Some(Method::TreenetEps),
            "bagged" => Some(Method::Bagged),
            _ => None,
        }
    }

    pub fn is_treenet(self) -> bool {
        matches!(self, Method::Treenet | Method::TreenetEps)
    }
}

/// How control values are chosen during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlMode {
    /// Enumerate all `n_controls` one-hot values.
    Discrete,
    /// Draw `samples` fresh vectors per item per batch, each component
    /// uniform on `[low, high]` (a point mass when `low == high`).
    Continuous {
        low: f64,
        high: f64,
        samples: usize,
        dim: usize,
    },
}

impl ControlMode {
    /// Continuous controls on `[-1, 1]`, 8 samples, one dimension.
    pub fn continuous_default() -> Self {
        ControlMode::Continuous {
            low: -1.0,
            high: 1.0,
            samples: 8,
            dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    /// `|𝒞|` for discrete controls, and the member count `N` of ensembles.
    pub n_controls: usize,
    pub control_mode: ControlMode,
    pub beta: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::DiverseNet,
            n_controls: 4,
            control_mode: ControlMode::Discrete,
            beta: 1.0,
            epsilon: 1e-4,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            pretrain_epochs: 0,
            optimizer: OptimizerKind::adam(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_controls == 0 {
            return Err(config_err!("n_controls must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(config_err!("learning_rate must be positive"));
        }
        if !(self.beta >= 0.0) {
            return Err(config_err!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.epsilon >= 0.0) {
            return Err(config_err!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }
        if self.pretrain_epochs > 0 && self.pretrain_epochs >= self.epochs {
            return Err(config_err!(
                "pretrain_epochs ({}) must be smaller than epochs ({})",
                self.pretrain_epochs,
                self.epochs
            ));
        }
        if let ControlMode::Continuous { low, high, samples, dim } = self.control_mode {
            if samples == 0 || dim == 0 || !(low <= high) {
                return Err(config_err!("continuous controls need samples ≥ 1, dim ≥ 1 and low ≤ high"));
            }
        }
        Ok(())
    }

    /// Number of predictions per item during training.
    pub fn training_slots(&self) -> usize {
        match (self.method, self.control_mode) {
            (Method::Bagged, _) => 1,
            (m, ControlMode::Continuous { samples, .. }) if !m.is_treenet() => samples,
            _ => self.n_controls,
        }
    }

    /// Control dimensionality the model must be built with.
    pub fn control_dim(&self) -> usize {
        match (self.method, self.control_mode) {
            (Method::Bagged, _) => 1,
            (_, ControlMode::Continuous { dim, .. }) => dim,
            _ => self.n_controls,
        }
    }

    pub fn control_kind(&self) -> ControlKind {
        match (self.method, self.control_mode) {
            (Method::DiverseNet | Method::Standard, ControlMode::Continuous { .. }) => ControlKind::Continuous,
            _ => ControlKind::Discrete,
        }
    }

    /// Control values used to draw `n_controls` predictions at test time.
    /// Continuous models use evenly spaced values from `low` to `high`.
    pub fn eval_controls(&self) -> ControlSet {
        match (self.control_kind(), self.control_mode) {
            (ControlKind::Continuous, ControlMode::Continuous { low, high, dim, .. }) => {
                let n = self.n_controls;
                ControlSet::Continuous(
                    (0..n)
                        .map(|i| {
                            let t = if n == 1 { low } else { low + (high - low) * i as f64 / (n - 1) as f64 };
                            vec![t; dim]
                        })
                        .collect(),
                )
            }
            _ => ControlSet::Discrete(self.n_controls),
        }
    }

    fn epsilon_for_method(&self) -> f64 {
        match self.method {
            Method::TreenetEps => self.epsilon,
            _ => 0.0,
        }
    }
}

/// Aggregates of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean optimized objective over items.
    pub loss: f64,
    /// Mean diverse loss over items (diagnostic).
    pub loss_div: f64,
    /// Mean catchup loss over items (diagnostic).
    pub loss_catchup: f64,
    /// How many labels were matched to each slot over the epoch.
    pub assignments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub slots: usize,
    /// Filled in by callers that can read a clock.
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Slots that received no label during the last epoch.
    pub fn never_selected(&self) -> usize {
        self.epochs
            .last()
            .map_or(0, |e| e.assignments.iter().filter(|&&c| c == 0).count())
    }
}

/// The result of training under any method.
#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Single(Model),
    Treenet(TreenetModel),
    Bagged(BaggedEnsemble),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Objective {
    Diverse { beta: f64 },
    Standard,
    FirstSlotOnly,
    Treenet { epsilon: f64, beta: f64 },
}

impl Objective {
    fn build(self, g: &mut Graph, m: &LossMatrix) -> Result<NodeId> {
        match self {
            Objective::Diverse { beta } => loss_combined(g, m, &LossConfig::with_beta(beta)),
            Objective::Standard => {
                let s = g.sum(m.node);
                Ok(g.scale(s, 1.0 / m.rows as f64))
            }
            Objective::FirstSlotOnly => {
                let row = m.select_rows(g, &[0])?;
                loss_standard_set(g, &row)
            }
            Objective::Treenet { epsilon, beta } => {
                let base = loss_div_l2(g, m, epsilon)?;
                if beta == 0.0 {
                    return Ok(base);
                }
                let c = loss_catchup(g, m)?;
                let c = g.scale(c, beta);
                g.add(base, c)
            }
        }
    }
}

/// What the generic loop needs from a network.
trait Net {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
    fn insert(&self, g: &mut Graph) -> Vec<NodeId>;
    /// Slot-major `(M · B) × d` predictions for the batch inputs `x`.
    fn forward_batch(&self, g: &mut Graph, params: &[NodeId], x: &Tensor, controls: &Tensor) -> Result<NodeId>;
    fn tiles_input(&self) -> bool;
}

impl Net for Model {
    fn params(&self) -> Vec<&Tensor> {
        self.parameters().iter().map(|p| &p.value).collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut().collect()
    }
    fn insert(&self, g: &mut Graph) -> Vec<NodeId> {
        self.insert_params(g, true)
    }
    fn forward_batch(&self, g: &mut Graph, params: &[NodeId], x: &Tensor, controls: &Tensor) -> Result<NodeId> {
        let xn = g.constant(x.clone());
        self.build_forward(g, params, xn, controls)
    }
    fn tiles_input(&self) -> bool {
        true
    }
}

impl Net for TreenetModel {
    fn params(&self) -> Vec<&Tensor> {
        self.parameters().map(|p| &p.value).collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut().collect()
    }
    fn insert(&self, g: &mut Graph) -> Vec<NodeId> {
        self.insert_params(g, true)
    }
    fn forward_batch(&self, g: &mut Graph, params: &[NodeId], x: &Tensor, _controls: &Tensor) -> Result<NodeId> {
        let xn = g.constant(x.clone());
        self.build_forward(g, params, xn)
    }
    fn tiles_input(&self) -> bool {
        false
    }
}

/// Encoded controls for one batch, slot-major.
struct ControlSource {
    mode: ControlMode,
    slots: usize,
    rng: rng::Rng,
}

impl ControlSource {
    fn block(&mut self, batch: usize) -> Tensor {
        match self.mode {
            ControlMode::Discrete => {
                let m = self.slots;
                let mut data = vec![0.0; m * batch * m];
                for s in 0..m {
                    for i in 0..batch {
                        data[(s * batch + i) * m + s] = 1.0;
                    }
                }
                Tensor::matrix(m * batch, m, data).expect("shape")
            }
            ControlMode::Continuous { low, high, samples, dim } => {
                let mut data = Vec::with_capacity(samples * batch * dim);
                for _ in 0..samples * batch * dim {
                    let v = if low == high {
                        low
                    } else {
                        low + (high - low) * self.rng.random::<f64>()
                    };
                    data.push(v);
                }
                Tensor::matrix(samples * batch, dim, data).expect("shape")
            }
        }
    }
}

fn tile_rows(x: &Tensor, times: usize) -> Tensor {
    let mut data = Vec::with_capacity(x.len() * times);
    for _ in 0..times {
        data.extend_from_slice(x.data());
    }
    Tensor::matrix(x.rows() * times, x.cols(), data).expect("shape")
}

fn check_dims(input_dim: usize, output_dim: usize, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(arg_err!("training set is empty"));
    }
    if ds.input_dim() != input_dim || ds.output_dim() != output_dim {
        return Err(dim_err!(
            "model maps {} -> {}, dataset has {} -> {}",
            input_dim,
            output_dim,
            ds.input_dim(),
            ds.output_dim()
        ));
    }
    Ok(())
}

fn fit<N: Net>(
    net: &mut N,
    ds: &Dataset,
    cfg: &TrainConfig,
    slots: usize,
    mode: ControlMode,
    objective_at: impl Fn(usize) -> Objective,
) -> Result<TrainReport> {
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.params());
    let mut controls = ControlSource {
        mode,
        slots,
        rng: rng::stream(cfg.seed, "controls", 0),
    };
    let labels: Vec<Tensor> = ds.items.iter().map(|it| it.label_matrix()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        slots,
        wall_time_secs: 0.0,
    };
    for epoch in 0..cfg.epochs {
        let objective = objective_at(epoch);
        let order = batch_iter(ds.len(), cfg.batch_size, Some(rng::derive_seed(cfg.seed, "epoch", epoch as u64)))?;
        let mut stats = EpochStats {
            epoch,
            loss: 0.0,
            loss_div: 0.0,
            loss_catchup: 0.0,
            assignments: vec![0; slots],
        };
        for (bi, batch) in order.iter().enumerate() {
            let b = batch.len();
            let x = ds.inputs(batch);
            let x = if net.tiles_input() { tile_rows(&x, slots) } else { x };
            let block = controls.block(b);
            let mut g = Graph::new();
            let pids = net.insert(&mut g);
            let preds = net.forward_batch(&mut g, &pids, &x, &block)?;
            let mut item_losses = Vec::with_capacity(b);
            for (pos, &item) in batch.iter().enumerate() {
                let rows: Vec<usize> = (0..slots).map(|s| s * b + pos).collect();
                let p = g.gather_rows(preds, &rows)?;
                let m = loss_matrix(&mut g, p, &labels[item], PairLoss::SquaredError)?;
                let trace = assignment_trace(m.values(&g))?;
                for &c in &trace.column_matches {
                    stats.assignments[c] += 1;
                }
                let col_min_sum: f64 = (0..m.cols)
                    .map(|y| (0..m.rows).map(|c| m.entry(&g, c, y)).fold(f64::INFINITY, f64::min))
                    .sum();
                stats.loss_div += col_min_sum;
                stats.loss_catchup += trace.row_minima[trace.catchup_row] / m.rows as f64;
                item_losses.push(objective.build(&mut g, &m)?);
            }
            let total = g.add_n(&item_losses)?;
            let loss = g.scale(total, 1.0 / b as f64);
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: lv,
                });
            }
            stats.loss += g.value(total).item();
            g.backward(loss)?;
            let grads: Vec<Tensor> = pids
                .iter()
                .map(|&p| g.grad(p).cloned().unwrap_or_else(|| Tensor::zeros(g.value(p).shape())))
                .collect();
            if grads.iter().any(|t| !t.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: f64::NAN,
                });
            }
            opt.step(&mut net.params_mut(), &grads)?;
        }
        let n = ds.len() as f64;
        stats.loss /= n;
        stats.loss_div /= n;
        stats.loss_catchup /= n;
        report.epochs.push(stats);
    }
    Ok(report)
}

/// Trains a control-input model with the diverse (or standard) objective.
///
/// During the first `pretrain_epochs` the set loss is applied to the
/// prediction of control 0 only.
pub fn train(model: Model, ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    let mc = model.config().clone();
    check_dims(mc.input_dim, mc.output_dim, ds)?;
    if !matches!(cfg.method, Method::DiverseNet | Method::Standard) {
        return Err(usage_err!("train() handles diversenet and standard, got {}", cfg.method.name()));
    }
    if mc.control_kind != cfg.control_kind() {
        return Err(usage_err!(
            "model expects {:?} controls, training config provides {:?}",
            mc.control_kind,
            cfg.control_kind()
        ));
    }
    if mc.control_dim != cfg.control_dim() {
        return Err(config_err!(
            "model control_dim {} does not match the training control set ({})",
            mc.control_dim,
            cfg.control_dim()
        ));
    }
    let mut model = model;
    let method = cfg.method;
    let beta = cfg.beta;
    let pre = cfg.pretrain_epochs;
    let report = fit(&mut model, ds, cfg, cfg.training_slots(), cfg.control_mode, |epoch| {
        match method {
            _ if epoch < pre => Objective::FirstSlotOnly,
            Method::Standard => Objective::Standard,
            _ => Objective::Diverse { beta },
        }
    })?;
    Ok((model, report))
}

/// Trains a treenet winner-take-all. `beta` adds the catchup term over
/// members; pretraining applies the set loss to every member.
pub fn train_treenet(model: TreenetModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(TreenetModel, TrainReport)> {
    cfg.validate()?;
    let mc = model.config().clone();
    check_dims(mc.input_dim, mc.output_dim, ds)?;
    let mut model = model;
    let epsilon = cfg.epsilon_for_method();
    let beta = cfg.beta;
    let pre = cfg.pretrain_epochs;
    let n = model.n_members();
    let report = fit(&mut model, ds, cfg, n, ControlMode::Discrete, |epoch| {
        if epoch < pre {
            Objective::Standard
        } else {
            Objective::Treenet { epsilon, beta }
        }
    })?;
    Ok((model, report))
}

/// Trains `n_members` independent networks, each on its own 2/3 subset with
/// the set loss. Returns one report per member.
pub fn train_bagged(
    model_config: &ModelConfig,
    ds: &Dataset,
    n_members: usize,
    cfg: &TrainConfig,
) -> Result<(BaggedEnsemble, Vec<TrainReport>)> {
    cfg.validate()?;
    let subsets = bagged_subsets(ds.len(), n_members, cfg.seed)?;
    let member_cfg = TrainConfig {
        method: Method::Standard,
        n_controls: 1,
        control_mode: ControlMode::Discrete,
        ..cfg.clone()
    };
    let mut members = Vec::with_capacity(n_members);
    let mut reports = Vec::with_capacity(n_members);
    for (j, subset) in subsets.iter().enumerate() {
        let mc = bagged_member_config(model_config, j, cfg.seed);
        let model = Model::init(mc)?;
        let sub = ds.subset(subset);
        let member_train = TrainConfig {
            seed: rng::derive_seed(cfg.seed, "bagged-train", j as u64),
            ..member_cfg.clone()
        };
        let (m, r) = train(model, &sub, &member_train)?;
        members.push(m);
        reports.push(r);
    }
    Ok((BaggedEnsemble { members, subsets }, reports))
}

/// Builds the untrained network for a method.
pub fn init_for_method(model_config: &ModelConfig, cfg: &TrainConfig) -> Result<Trained> {
    let mut mc = model_config.clone();
    mc.control_dim = cfg.control_dim();
    mc.control_kind = cfg.control_kind();
    match cfg.method {
        Method::DiverseNet | Method::Standard => Ok(Trained::Single(Model::init(mc)?)),
        Method::Treenet | Method::TreenetEps => Ok(Trained::Treenet(TreenetModel::init(mc, cfg.n_controls)?)),
        Method::Bagged => Ok(Trained::Bagged(BaggedEnsemble {
            members: Vec::new(),
            subsets: Vec::new(),
        })),
    }
}

/// Initializes and trains under `cfg.method`. For bagged ensembles the
/// report averages member losses per epoch and slot `j` of the assignment
/// histogram counts member `j`'s labels.
pub fn run(model_config: &ModelConfig, ds: &Dataset, cfg: &TrainConfig) -> Result<(Trained, TrainReport)> {
    cfg.validate()?;
    match init_for_method(model_config, cfg)? {
        Trained::Single(m) => {
            let (m, r) = train(m, ds, cfg)?;
            Ok((Trained::Single(m), r))
        }
        Trained::Treenet(t) => {
            let (t, r) = train_treenet(t, ds, cfg)?;
            Ok((Trained::Treenet(t), r))
        }
        Trained::Bagged(_) => {
            let mut mc = model_config.clone();
            mc.control_kind = ControlKind::Discrete;
            let (e, reports) = train_bagged(&mc, ds, cfg.n_controls, cfg)?;
            Ok((Trained::Bagged(e), merge_reports(&reports)))
        }
    }
}

fn merge_reports(reports: &[TrainReport]) -> TrainReport {
    let n = reports.len().max(1) as f64;
    let epochs = reports.first().map_or(0, |r| r.epochs.len());
    let merged = (0..epochs)
        .map(|e| {
            let mut s = EpochStats {
                epoch: e,
                loss: 0.0,
                loss_div: 0.0,
                loss_catchup: 0.0,
                assignments: vec![0; reports.len()],
            };
            for (j, r) in reports.iter().enumerate() {
                let es = &r.epochs[e];
                s.loss += es.loss / n;
                s.loss_div += es.loss_div / n;
                s.loss_catchup += es.loss_catchup / n;
                s.assignments[j] = es.assignments.iter().sum();
            }
            s
        })
        .collect();
    TrainReport {
        epochs: merged,
        slots: reports.len(),
        wall_time_secs: reports.iter().map(|r| r.wall_time_secs).sum(),
    }
}

/// Predictions for every item of `ds`, one slot per control value (single
/// models) or member (ensembles). Ensembles take `ControlSet::Discrete(N)`
/// with `N` at most the member count.
pub fn predict_all(trained: &Trained, controls: &ControlSet, ds: &Dataset) -> Result<PredictionSet> {
    if ds.is_empty() {
        return Err(arg_err!("cannot predict on an empty dataset"));
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    let x = ds.inputs(&all);
    let member_count = |n: usize| -> Result<usize> {
        match controls {
            ControlSet::Discrete(k) if *k >= 1 && *k <= n => Ok(*k),
            _ => Err(usage_err!(
                "ensembles of {} members take a discrete slot count between 1 and {}",
                n,
                n
            )),
        }
    };
    match trained {
        Trained::Single(m) => PredictionSet::from_slabs(&m.forward_all_controls(controls, &x)?),
        Trained::Treenet(t) => {
            let k = member_count(t.n_members())?;
            let slabs = t.forward(&x)?;
            let per = x.rows() * t.config().output_dim;
            let slabs = Tensor::new(&[k, x.rows(), t.config().output_dim], slabs.data()[..k * per].to_vec())?;
            PredictionSet::from_slabs(&slabs)
        }
        Trained::Bagged(e) => {
            let k = member_count(e.members.len())?;
            let mut data = Vec::new();
            for m in &e.members[..k] {
                data.extend_from_slice(m.forward_all_controls(&ControlSet::Discrete(1), &x)?.data());
            }
            let d = ds.output_dim();
            PredictionSet::from_slabs(&Tensor::new(&[k, x.rows(), d], data)?)
        }
    }
}

/// The objective of one batch as used by [`train`] after pretraining, for a
/// discrete-control model whose parameters are already in `g`. Used for
/// gradient checks and probe-batch tests.
pub fn batch_loss(
    g: &mut Graph,
    model: &Model,
    params: &[NodeId],
    ds: &Dataset,
    batch: &[usize],
    cfg: &TrainConfig,
) -> Result<NodeId> {
    if model.config().control_kind != ControlKind::Discrete {
        return Err(usage_err!("batch_loss takes discrete-control models"));
    }
    if batch.is_empty() {
        return Err(arg_err!("empty batch"));
    }
    let m = model.config().control_dim;
    let b = batch.len();
    let mut source = ControlSource {
        mode: ControlMode::Discrete,
        slots: m,
        rng: rng::stream(0, "controls", 0),
    };
    let x = tile_rows(&ds.inputs(batch), m);
    let xn = g.constant(x);
    let preds = model.build_forward(g, params, xn, &source.block(b))?;
    let objective = match cfg.method {
        Method::Standard => Objective::Standard,
        _ => Objective::Diverse { beta: cfg.beta },
    };
    let mut losses = Vec::with_capacity(b);
    for (pos, &item) in batch.iter().enumerate() {
        let rows: Vec<usize> = (0..m).map(|s| s * b + pos).collect();
        let p = g.gather_rows(preds, &rows)?;
        let lm = loss_matrix(g, p, &ds.items[item].label_matrix(), PairLoss::SquaredError)?;
        losses.push(objective.build(g, &lm)?);
    }
    let total = g.add_n(&losses)?;
    Ok(g.scale(total, 1.0 / b as f64))
}

/// Label sets of a dataset in the layout the eval functions take.
pub fn label_sets(ds: &Dataset) -> Vec<Vec<Vec<f64>>> {
    ds.items.iter().map(|it| it.labels.clone()).collect()
}

/// Short description used in reports.
pub fn describe(cfg: &TrainConfig) -> String {
    alloc::format!(
        "{} |C|={} beta={} pretrain={}",
        cfg.method.name(),
        cfg.n_controls,
        cfg.beta,
        cfg.pretrain_epochs
    )
}
