//! k-best oracle evaluation and diversity diagnostics.
//!
//! For each test input, `k` of the `M` available predictions are drawn
//! uniformly without replacement and each ground-truth label is scored
//! against its closest drawn prediction. Monte-Carlo estimates use a
//! per-item random stream derived from `(seed, item index)` and report the
//! standard error over resamples; `k = M` needs no sampling.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{arg_err, dim_err, usage_err, Result};
use crate::losses::PairLoss;
use crate::model::{ControlKind, ControlValue, Model};
use crate::rng;
use crate::tensor::Tensor;

/// `M` predictions per test item, stored item-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    n_items: usize,
    slots: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PredictionSet {
    pub fn new(n_items: usize, slots: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_items * slots * dim {
            return Err(dim_err!(
                "{} values for {} items × {} slots × {} dims",
                data.len(),
                n_items,
                slots,
                dim
            ));
        }
        Ok(Self {
            n_items,
            slots,
            dim,
            data,
        })
    }

    /// From nested `[item][slot][dim]` vectors.
    pub fn from_nested(items: &[Vec<Vec<f64>>]) -> Result<Self> {
        let slots = items.first().map_or(0, |i| i.len());
        let dim = items.first().and_then(|i| i.first()).map_or(0, |p| p.len());
        let mut data = Vec::with_capacity(items.len() * slots * dim);
        for (i, item) in items.iter().enumerate() {
            if item.len() != slots || item.iter().any(|p| p.len() != dim) {
                return Err(dim_err!("item {} breaks the uniform slot/dimension layout", i));
            }
            data.extend(item.iter().flatten());
        }
        Self::new(items.len(), slots, dim, data)
    }

    /// From a slot-major `M × items × dim` tensor such as
    /// [`Model::forward_all_controls`] returns.
    pub fn from_slabs(slabs: &Tensor) -> Result<Self> {
        let s = slabs.shape();
        if s.len() != 3 {
            return Err(dim_err!("expected a rank-3 slab tensor, got {:?}", s));
        }
        let (m, n, d) = (s[0], s[1], s[2]);
        let mut data = Vec::with_capacity(slabs.len());
        for i in 0..n {
            for slot in 0..m {
                let start = (slot * n + i) * d;
                data.extend_from_slice(&slabs.data()[start..start + d]);
            }
        }
        Self::new(n, m, d, data)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, item: usize, slot: usize) -> &[f64] {
        let start = (item * self.slots + slot) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Same predictions with slots reordered by `perm`.
    pub fn permute_slots(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n_items {
            for &s in perm {
                data.extend_from_slice(self.get(i, s));
            }
        }
        Self { data, ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// A Monte-Carlo oracle estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub mean: f64,
    /// Standard error over resamples; zero when no sampling was needed.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub k: usize,
    pub mean_error: f64,
    pub stderr: f64,
}

/// Mean oracle error as a function of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurve {
    pub points: Vec<OraclePoint>,
    pub n_items: usize,
    pub seed: u64,
    pub n_resamples: usize,
    /// Free-form label of the evaluated method.
    pub method: String,
}

impl OracleCurve {
    pub fn at(&self, k: usize) -> Option<&OraclePoint> {
        self.points.iter().find(|p| p.k == k)
    }

    /// Whether consecutive points never increase by more than `n_se`
    /// combined standard errors.
    pub fn is_non_increasing_within(&self, n_se: f64) -> bool {
        self.points.windows(2).all(|w| {
            let slack = n_se * libm::sqrt(w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr);
            w[1].mean_error <= w[0].mean_error + slack
        })
    }
}

pub const DEFAULT_RESAMPLES: usize = 64;

fn check_k(preds: &PredictionSet, k: usize) -> Result<()> {
    if k == 0 || k > preds.slots() {
        return Err(arg_err!("k must lie in [1, {}], got {}", preds.slots(), k));
    }
    Ok(())
}

fn check_labels(preds: &PredictionSet, gts: &[Vec<Vec<f64>>]) -> Result<()> {
    if gts.len() != preds.n_items() {
        return Err(dim_err!(
            "{} label sets for {} prediction items",
            gts.len(),
            preds.n_items()
        ));
    }
    for (i, ys) in gts.iter().enumerate() {
        if ys.is_empty() {
            return Err(arg_err!("item {} has an empty label set", i));
        }
        if ys.iter().any(|y| y.len() != preds.dim()) {
            return Err(dim_err!("item {} labels do not match prediction width {}", i, preds.dim()));
        }
    }
    Ok(())
}

/// Sum over labels of the best pair loss among `slots`.
fn item_score(preds: &PredictionSet, item: usize, labels: &[Vec<f64>], slots: &[usize]) -> f64 {
    labels
        .iter()
        .map(|y| {
            slots
                .iter()
                .map(|&s| PairLoss::SquaredError.eval(preds.get(item, s), y))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Multi-label k-best oracle error.
pub fn oracle_error_multi(
    preds: &PredictionSet,
    gts: &[Vec<Vec<f64>>],
    k: usize,
    seed: u64,
    n_resamples: usize,
) -> Result<OracleEstimate> {
    check_k(preds, k)?;
    check_labels(preds, gts)?;
    let total_labels: usize = gts.iter().map(|y| y.len()).sum();
    let m = preds.slots();
    if k == m || n_resamples == 0 {
        let all: Vec<usize> = (0..m).collect();
        let s: f64 = (0..preds.n_items())
            .map(|i| item_score(preds, i, &gts[i], &all))
            .sum();
        return Ok(OracleEstimate {
            mean: s / total_labels as f64,
            stderr: 0.0,
        });
    }
    let mut per_resample = vec![0.0; n_resamples];
    for (i, ys) in gts.iter().enumerate() {
        let mut r = rng::stream(seed, "oracle-draw", i as u64);
        for acc in per_resample.iter_mut() {
            let drawn = index::sample(&mut r, m, k).into_vec();
            *acc += item_score(preds, i, ys, &drawn);
        }
    }
    for v in per_resample.iter_mut() {
        *v /= total_labels as f64;
    }
    Ok(mean_and_stderr(&per_resample))
}

fn mean_and_stderr(xs: &[f64]) -> OracleEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let stderr = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        libm::sqrt(var / n)
    } else {
        0.0
    };
    OracleEstimate { mean, stderr }
}

/// Single-label k-best oracle error.
pub fn oracle_error_single(
    preds: &PredictionSet,
    gt: &[Vec<f64>],
    k: usize,
    seed: u64,
    n_resamples: usize,
) -> Result<OracleEstimate> {
    let gts: Vec<Vec<Vec<f64>>> = gt.iter().map(|y| vec![y.clone()]).collect();
    oracle_error_multi(preds, &gts, k, seed, n_resamples)
}

/// Exact expectation of the multi-label oracle error over all size-`k`
/// subsets of the slots.
pub fn oracle_error_exhaustive(preds: &PredictionSet, gts: &[Vec<Vec<f64>>], k: usize) -> Result<f64> {
    check_k(preds, k)?;
    check_labels(preds, gts)?;
    let m = preds.slots();
    if m > 20 {
        return Err(arg_err!("exhaustive enumeration is limited to 20 slots, got {}", m));
    }
    let subsets: Vec<Vec<usize>> = (0u32..(1 << m))
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..m).filter(|&s| mask & (1 << s) != 0).collect())
        .collect();
    let total_labels: usize = gts.iter().map(|y| y.len()).sum();
    let mut acc = 0.0;
    for (i, ys) in gts.iter().enumerate() {
        let s: f64 = subsets.iter().map(|sub| item_score(preds, i, ys, sub)).sum();
        acc += s / subsets.len() as f64;
    }
    Ok(acc / total_labels as f64)
}

/// Monte-Carlo curve for `k = 1..=k_max`.
pub fn oracle_curve(
    preds: &PredictionSet,
    gts: &[Vec<Vec<f64>>],
    k_max: usize,
    seed: u64,
    n_resamples: usize,
    method: &str,
) -> Result<OracleCurve> {
    check_k(preds, k_max)?;
    let points = (1..=k_max)
        .map(|k| {
            oracle_error_multi(preds, gts, k, seed, n_resamples).map(|e| OraclePoint {
                k,
                mean_error: e.mean,
                stderr: e.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleCurve {
        points,
        n_items: preds.n_items(),
        seed,
        n_resamples,
        method: String::from(method),
    })
}

/// Exact curve for `k = 1..=k_max` by subset enumeration.
pub fn oracle_curve_exhaustive(preds: &PredictionSet, gts: &[Vec<Vec<f64>>], k_max: usize, method: &str) -> Result<OracleCurve> {
    let points = (1..=k_max)
        .map(|k| {
            oracle_error_exhaustive(preds, gts, k).map(|e| OraclePoint {
                k,
                mean_error: e,
                stderr: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleCurve {
        points,
        n_items: preds.n_items(),
        seed: 0,
        n_resamples: 0,
        method: String::from(method),
    })
}

/// Population variance across slots, averaged over dimensions then items.
pub fn prediction_variance(preds: &PredictionSet) -> Result<f64> {
    let m = preds.slots();
    if m < 2 {
        return Err(arg_err!("variance needs at least 2 predictions per item, got {}", m));
    }
    if preds.n_items() == 0 || preds.dim() == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..preds.n_items() {
        let mut item = 0.0;
        for d in 0..preds.dim() {
            let mean = (0..m).map(|s| preds.get(i, s)[d]).sum::<f64>() / m as f64;
            let var = (0..m)
                .map(|s| {
                    let e = preds.get(i, s)[d] - mean;
                    e * e
                })
                .sum::<f64>()
                / m as f64;
            item += var;
        }
        total += item / preds.dim() as f64;
    }
    Ok(total / preds.n_items() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub flags: Vec<bool>,
    pub count: usize,
    pub tau: f64,
    /// Mean over items of each slot's loss to its nearest label.
    pub slot_mean_distance: Vec<f64>,
}

fn nearest_label_loss(p: &[f64], ys: &[Vec<f64>]) -> f64 {
    ys.iter()
        .map(|y| PairLoss::SquaredError.eval(p, y))
        .fold(f64::INFINITY, f64::min)
}

/// Flags slots whose prediction is farther than `tau` (pair loss) from every
/// label on every item. Without `tau`, uses three times the best slot's
/// mean nearest-label loss.
pub fn degeneracy_report(preds: &PredictionSet, gts: &[Vec<Vec<f64>>], tau: Option<f64>) -> Result<DegeneracyReport> {
    check_labels(preds, gts)?;
    let m = preds.slots();
    let n = preds.n_items().max(1) as f64;
    let slot_mean_distance: Vec<f64> = (0..m)
        .map(|s| {
            (0..preds.n_items())
                .map(|i| nearest_label_loss(preds.get(i, s), &gts[i]))
                .sum::<f64>()
                / n
        })
        .collect();
    let tau = match tau {
        Some(t) => t,
        None => 3.0 * slot_mean_distance.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    if !(tau >= 0.0) {
        return Err(arg_err!("degeneracy threshold must be non-negative, got {}", tau));
    }
    let flags: Vec<bool> = (0..m)
        .map(|s| (0..preds.n_items()).all(|i| nearest_label_loss(preds.get(i, s), &gts[i]) > tau))
        .collect();
    let count = flags.iter().filter(|&&f| f).count();
    Ok(DegeneracyReport {
        flags,
        count,
        tau,
        slot_mean_distance,
    })
}

/// Predictions for one input at `steps` equally spaced control values from
/// `lo` to `hi` (every component of `c` set to the same value).
pub fn sweep_continuous(model: &Model, x: &[f64], lo: f64, hi: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    if model.config().control_kind != ControlKind::Continuous {
        return Err(usage_err!("continuous sweep needs a continuous-control model"));
    }
    if steps < 2 {
        return Err(arg_err!("a sweep needs at least 2 steps, got {}", steps));
    }
    let xt = Tensor::from_rows(&[x])?;
    let cd = model.config().control_dim;
    (0..steps)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            let c = ControlValue::Continuous(vec![t; cd]);
            model.forward(&c, &xt).map(|o| o.into_data())
        })
        .collect()
}
