//! Training objectives built on the prediction × label loss matrix.
//!
//! For one input `x` with label set `𝒴` and control set `𝒞`, entry `[c][y]`
//! of the loss matrix is `l(f(c, x), y)`. Every objective is a reduction of
//! that matrix:
//!
//! * set loss: sum of the single row,
//! * diverse loss: sum over columns of the column minimum,
//! * catchup loss: `1/|𝒞|` times the largest row minimum,
//! * combined: diverse + `beta` · catchup.
//!
//! Minima and maxima are hard selections with lowest-index tie-breaking, so
//! gradients flow only into the matched entries.

use alloc::vec::Vec;

use crate::autodiff::{Axis, Graph, NodeId};
use crate::error::{arg_err, config_err, usage_err, Result};
use crate::tensor::Tensor;

/// Comparator between one prediction and one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairLoss {
    /// Mean over components of the squared difference.
    #[default]
    SquaredError,
}

impl PairLoss {
    /// Differentiable `rows(preds) × rows(labels)` matrix of pair losses.
    pub fn matrix(self, g: &mut Graph, preds: NodeId, labels: &Tensor) -> Result<NodeId> {
        match self {
            PairLoss::SquaredError => g.pairwise_sq_error(preds, labels),
        }
    }

    /// Plain evaluation on two vectors of equal length.
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            PairLoss::SquaredError => {
                if a.is_empty() {
                    return 0.0;
                }
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                s / a.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub beta: f64,
    pub pair_loss: PairLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            pair_loss: PairLoss::SquaredError,
        }
    }
}

impl LossConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }
}

/// Handle to a `|𝒞| × |𝒴|` matrix node of pair losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossMatrix {
    pub node: NodeId,
    pub rows: usize,
    pub cols: usize,
}

impl LossMatrix {
    pub fn values<'g>(&self, g: &'g Graph) -> &'g Tensor {
        g.value(self.node)
    }

    pub fn entry(&self, g: &Graph, c: usize, y: usize) -> f64 {
        g.value(self.node).get2(c, y)
    }

    /// The sub-matrix of the given prediction rows, still differentiable.
    pub fn select_rows(&self, g: &mut Graph, rows: &[usize]) -> Result<LossMatrix> {
        let node = g.gather_rows(self.node, rows)?;
        Ok(LossMatrix {
            node,
            rows: rows.len(),
            cols: self.cols,
        })
    }
}

/// Pairwise losses between prediction rows `preds` (`|𝒞| × d`) and label
/// rows `labels` (`|𝒴| × d`).
pub fn loss_matrix(
    g: &mut Graph,
    preds: NodeId,
    labels: &Tensor,
    pair: PairLoss,
) -> Result<LossMatrix> {
    let rows = g.value(preds).rows();
    if g.value(preds).rank() != 2 || rows == 0 {
        return Err(arg_err!("loss matrix needs at least one prediction row"));
    }
    if labels.rank() != 2 || labels.rows() == 0 {
        return Err(arg_err!("loss matrix needs a non-empty label set"));
    }
    let node = pair.matrix(g, preds, labels)?;
    Ok(LossMatrix {
        node,
        rows,
        cols: labels.rows(),
    })
}

/// Sum of the pair losses of a single prediction against every label.
pub fn loss_standard_set(g: &mut Graph, m: &LossMatrix) -> Result<NodeId> {
    if m.rows != 1 {
        return Err(usage_err!(
            "set loss needs exactly one prediction row, got {}",
            m.rows
        ));
    }
    Ok(g.sum(m.node))
}

/// `Σ_y min_c l(f(c, x), y)`.
pub fn loss_div(g: &mut Graph, m: &LossMatrix) -> Result<NodeId> {
    if m.cols == 0 || m.rows == 0 {
        return Err(arg_err!("diverse loss over an empty matrix"));
    }
    let col_min = g.min_axis(m.node, Axis::Rows)?;
    Ok(g.sum(col_min))
}

/// `(1/|𝒞|) · max_c min_y l(f(c, x), y)`.
pub fn loss_catchup(g: &mut Graph, m: &LossMatrix) -> Result<NodeId> {
    if m.cols == 0 || m.rows == 0 {
        return Err(arg_err!("catchup loss over an empty matrix"));
    }
    let row_min = g.min_axis(m.node, Axis::Cols)?;
    let worst = g.max_axis(row_min, Axis::Rows)?;
    let worst = g.sum(worst);
    Ok(g.scale(worst, 1.0 / m.rows as f64))
}

/// `loss_div + beta · loss_catchup`.
pub fn loss_combined(g: &mut Graph, m: &LossMatrix, config: &LossConfig) -> Result<NodeId> {
    if !(config.beta >= 0.0) {
        return Err(config_err!("beta must be non-negative, got {}", config.beta));
    }
    let div = loss_div(g, m)?;
    let catchup = loss_catchup(g, m)?;
    let weighted = g.scale(catchup, config.beta);
    g.add(div, weighted)
}

/// Single-label form: `min_c l(f(c, x), y)`.
pub fn loss_div_single(g: &mut Graph, m: &LossMatrix) -> Result<NodeId> {
    if m.cols != 1 {
        return Err(usage_err!(
            "single-label diverse loss needs exactly one label, got {}",
            m.cols
        ));
    }
    loss_div(g, m)
}

/// Diverse loss plus `epsilon` times the mean of all pair losses
/// (the winner-take-all stabilizer).
pub fn loss_div_l2(g: &mut Graph, m: &LossMatrix, epsilon: f64) -> Result<NodeId> {
    if !(epsilon >= 0.0) {
        return Err(config_err!("epsilon must be non-negative, got {}", epsilon));
    }
    let div = loss_div(g, m)?;
    let mean = g.mean(m.node);
    let weighted = g.scale(mean, epsilon);
    g.add(div, weighted)
}

/// Which prediction each label was matched to, and which prediction the
/// catchup term selects.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTrace {
    /// `column_matches[y]` is the argmin row of column `y`.
    pub column_matches: Vec<usize>,
    /// Minimum loss of each prediction row against any label.
    pub row_minima: Vec<f64>,
    /// Argmax of `row_minima`.
    pub catchup_row: usize,
}

impl AssignmentTrace {
    /// How many labels were matched to each of `rows` predictions.
    pub fn histogram(&self, rows: usize) -> Vec<usize> {
        let mut h = alloc::vec![0; rows];
        for &c in &self.column_matches {
            h[c] += 1;
        }
        h
    }
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in it.enumerate() {
        if i == 0 || v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Reads the assignment off a plain matrix of loss values.
pub fn assignment_trace(matrix: &Tensor) -> Result<AssignmentTrace> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    if matrix.rank() != 2 || rows == 0 || cols == 0 {
        return Err(arg_err!("assignment trace of an empty matrix"));
    }
    let column_matches = (0..cols)
        .map(|j| argmin((0..rows).map(|i| matrix.get2(i, j))).0)
        .collect();
    let row_minima: Vec<f64> = (0..rows).map(|i| argmin(matrix.row(i).iter().copied()).1).collect();
    let mut catchup_row = 0;
    for (i, &v) in row_minima.iter().enumerate() {
        if v > row_minima[catchup_row] {
            catchup_row = i;
        }
    }
    Ok(AssignmentTrace {
        column_matches,
        row_minima,
        catchup_row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example() -> (Graph, NodeId, LossMatrix) {
        // predictions {[0],[2]}, labels {[0],[1],[3]}
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[0.0], [2.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        (g, p, m)
    }

    #[test]
    fn loss_matrix_example() {
        let (g, _, m) = example();
        assert_eq!(m.values(&g).data(), &[0.0, 1.0, 9.0, 4.0, 1.0, 1.0]);
        assert_eq!((m.rows, m.cols), (2, 3));
    }

    #[test]
    fn loss_matrix_degenerate_cases() {
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[0.3, -0.2]]).unwrap());
        let m = loss_matrix(&mut g, p, &Tensor::from_rows(&[[0.3, -0.2]]).unwrap(), PairLoss::SquaredError)
            .unwrap();
        assert_eq!(m.values(&g).data(), &[0.0]);

        let p = g.param(Tensor::zeros(&[3, 2]));
        let m = loss_matrix(&mut g, p, &Tensor::zeros(&[4, 2]), PairLoss::SquaredError).unwrap();
        assert!(m.values(&g).data().iter().all(|&v| v == 0.0));

        let bad = Tensor::zeros(&[2, 3]);
        assert!(loss_matrix(&mut g, p, &bad, PairLoss::SquaredError).is_err());
        assert!(loss_matrix(&mut g, p, &Tensor::zeros(&[0, 2]), PairLoss::SquaredError).is_err());
    }

    #[test]
    fn standard_set_loss() {
        let (mut g, _, m) = example();
        let row0 = m.select_rows(&mut g, &[0]).unwrap();
        let l = loss_standard_set(&mut g, &row0).unwrap();
        assert_eq!(g.value(l).item(), 10.0);
        assert!(matches!(loss_standard_set(&mut g, &m), Err(crate::Error::Usage(_))));

        // duplicated label counts twice
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[1.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0], [0.0], [1.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        let l = loss_standard_set(&mut g, &m).unwrap();
        assert_eq!(g.value(l).item(), 2.0);
    }

    #[test]
    fn div_catchup_combined_examples() {
        let (mut g, _, m) = example();
        let d = loss_div(&mut g, &m).unwrap();
        assert_eq!(g.value(d).item(), 2.0);
        let c = loss_catchup(&mut g, &m).unwrap();
        assert_eq!(g.value(c).item(), 0.5);
        let l1 = loss_combined(&mut g, &m, &LossConfig::with_beta(1.0)).unwrap();
        assert_eq!(g.value(l1).item(), 2.5);
        let l2 = loss_combined(&mut g, &m, &LossConfig::with_beta(2.0)).unwrap();
        assert_eq!(g.value(l2).item(), 3.0);
        let l0 = loss_combined(&mut g, &m, &LossConfig::with_beta(0.0)).unwrap();
        assert_eq!(g.value(l0).item(), g.value(d).item());
        assert!(matches!(
            loss_combined(&mut g, &m, &LossConfig::with_beta(-1.0)),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn div_with_single_row_equals_set_loss() {
        let (mut g, _, m) = example();
        let row = m.select_rows(&mut g, &[1]).unwrap();
        let d = loss_div(&mut g, &row).unwrap();
        let s = loss_standard_set(&mut g, &row).unwrap();
        assert_eq!(g.value(d).item(), g.value(s).item());
    }

    #[test]
    fn zero_in_every_column_gives_zero_div() {
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[0.0], [5.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0], [5.0], [0.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        let d = loss_div(&mut g, &m).unwrap();
        assert_eq!(g.value(d).item(), 0.0);
        let c = loss_catchup(&mut g, &m).unwrap();
        assert_eq!(g.value(c).item(), 0.0);
    }

    #[test]
    fn catchup_degenerate_is_pair_loss() {
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[1.0, 2.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0, 0.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        let c = loss_catchup(&mut g, &m).unwrap();
        assert_eq!(g.value(c).item(), 2.5);
    }

    #[test]
    fn single_label_form() {
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[2.0], [-1.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        let l = loss_div_single(&mut g, &m).unwrap();
        assert_eq!(g.value(l).item(), 1.0);

        let (mut g, _, m3) = example();
        assert!(matches!(loss_div_single(&mut g, &m3), Err(crate::Error::Usage(_))));

        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[2.0], [0.5]]).unwrap());
        let m = loss_matrix(&mut g, p, &Tensor::from_rows(&[[0.5]]).unwrap(), PairLoss::SquaredError)
            .unwrap();
        let l = loss_div_single(&mut g, &m).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn div_l2_example() {
        // matrix [[0,1],[4,1]]: predictions {[0],[2]}, labels {[0],[1]}
        let mut g = Graph::new();
        let p = g.param(Tensor::from_rows(&[[0.0], [2.0]]).unwrap());
        let labels = Tensor::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = loss_matrix(&mut g, p, &labels, PairLoss::SquaredError).unwrap();
        let l0 = loss_div_l2(&mut g, &m, 0.0).unwrap();
        assert_eq!(g.value(l0).item(), 1.0);
        let l1 = loss_div_l2(&mut g, &m, 1.0).unwrap();
        assert_eq!(g.value(l1).item(), 2.5);
    }

    #[test]
    fn assignment_trace_examples() {
        let t = Tensor::from_rows(&[[0.0, 1.0, 9.0], [4.0, 1.0, 1.0]]).unwrap();
        let tr = assignment_trace(&t).unwrap();
        assert_eq!(tr.column_matches, vec![0, 0, 1]);
        assert_eq!(tr.row_minima, vec![0.0, 1.0]);
        assert_eq!(tr.catchup_row, 1);
        assert_eq!(tr.histogram(2), vec![2, 1]);

        let flat = Tensor::full(&[3, 4], 2.0);
        let tr = assignment_trace(&flat).unwrap();
        assert_eq!(tr.column_matches, vec![0; 4]);
        assert_eq!(tr.catchup_row, 0);

        let diag = Tensor::from_rows(&[[0.1, 5.0, 6.0], [4.0, 0.2, 7.0], [8.0, 9.0, 0.3]]).unwrap();
        assert_eq!(assignment_trace(&diag).unwrap().column_matches, vec![0, 1, 2]);

        assert!(assignment_trace(&Tensor::zeros(&[0, 2])).is_err());
    }

    #[test]
    fn gradient_routing_through_div_and_catchup() {
        let (mut g, p, m) = example();
        let d = loss_div(&mut g, &m).unwrap();
        g.backward(d).unwrap();
        // columns matched to rows [0, 0, 1]; row 0 pulled towards 0 and 1, row 1 towards 3
        // d/dp0 = 2(0-0) + 2(0-1) = -2, d/dp1 = 2(2-3) = -2
        assert_eq!(g.grad(p).unwrap().data(), &[-2.0, -2.0]);

        let c = loss_catchup(&mut g, &m).unwrap();
        g.backward(c).unwrap();
        // row 1 is worst (min 1, at column 1): (1/2) · 2(2-1) = 1
        assert_eq!(g.grad(p).unwrap().data(), &[0.0, 1.0]);
    }
}
