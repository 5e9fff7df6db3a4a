//! Synthetic datasets whose items carry a set of acceptable labels.
//!
//! Two generators are provided:
//!
//! * [`gen_multimodal_regression`]: scalar `x ∈ [0, 1]`, one label per mode
//!   function `m(x) + noise`.
//! * [`gen_occluded_completion`]: random shape patterns on a square grid.
//!   The input keeps only one visible quadrant; the label set holds the full
//!   patterns of the items whose visible quadrants are closest (squared
//!   distance), the item's own pattern first.
//!
//! Items are generated per construction index from independent random
//! streams, so a train/test split by index is disjoint and reproducible.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, config_err, Result};
use crate::rng;
use crate::tensor::Tensor;

/// One training pair `(x, 𝒴)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataItem {
    pub x: Vec<f64>,
    /// Ordered label list; never empty.
    pub labels: Vec<Vec<f64>>,
}

impl DataItem {
    /// Labels as a `|𝒴| × d` matrix.
    pub fn label_matrix(&self) -> Tensor {
        Tensor::from_rows(&self.labels).expect("labels share one dimensionality")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    /// Generated without a split.
    All,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            "all" => Some(Split::All),
            _ => None,
        }
    }
}

/// A mode function over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// `amplitude · sin(2π · frequency · x + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    Constant(f64),
}

impl Mode {
    pub fn sine(amplitude: f64) -> Self {
        Mode::Sine {
            amplitude,
            frequency: 1.0,
            phase: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Mode::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * libm::sin(2.0 * PI * frequency * x + phase),
            Mode::Constant(c) => c,
        }
    }

    /// `{sin(2πx), −sin(2πx), 0.5}`.
    pub fn default_family() -> Vec<Mode> {
        vec![Mode::sine(1.0), Mode::sine(-1.0), Mode::Constant(0.5)]
    }
}

/// Grid quadrant left visible in the occluded input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrant {
    #[default]
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Quadrant {
    pub fn name(self) -> &'static str {
        match self {
            Quadrant::TopLeft => "top-left",
            Quadrant::TopRight => "top-right",
            Quadrant::BottomLeft => "bottom-left",
            Quadrant::BottomRight => "bottom-right",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "top-left" => Some(Quadrant::TopLeft),
            "top-right" => Some(Quadrant::TopRight),
            "bottom-left" => Some(Quadrant::BottomLeft),
            "bottom-right" => Some(Quadrant::BottomRight),
            _ => None,
        }
    }

    /// Flat indices of the quadrant's cells on a `side × side` grid.
    pub fn cells(self, side: usize) -> Vec<usize> {
        let h = side / 2;
        let (r0, c0) = match self {
            Quadrant::TopLeft => (0, 0),
            Quadrant::TopRight => (0, h),
            Quadrant::BottomLeft => (h, 0),
            Quadrant::BottomRight => (h, h),
        };
        let mut out = Vec::with_capacity(h * h);
        for r in r0..r0 + h {
            for c in c0..c0 + h {
                out.push(r * side + c);
            }
        }
        out
    }
}

/// Generator settings; stored with a dataset so it can be regenerated.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Multimodal {
        modes: Vec<Mode>,
        noise_sd: f64,
    },
    Occluded {
        grid_side: usize,
        n_shapes: usize,
        visible: Quadrant,
        k_neighbors: usize,
    },
}

impl Generator {
    /// One-line description written into dataset headers.
    pub fn describe(&self) -> String {
        match self {
            Generator::Multimodal { modes, noise_sd } => {
                let ms: Vec<String> = modes
                    .iter()
                    .map(|m| match m {
                        Mode::Sine {
                            amplitude,
                            frequency,
                            phase,
                        } => format!("sine({amplitude},{frequency},{phase})"),
                        Mode::Constant(c) => format!("const({c})"),
                    })
                    .collect();
                format!("multimodal modes={} noise_sd={}", ms.join(";"), noise_sd)
            }
            Generator::Occluded {
                grid_side,
                n_shapes,
                visible,
                k_neighbors,
            } => format!(
                "occluded grid_side={} n_shapes={} visible={} k_neighbors={}",
                grid_side,
                n_shapes,
                visible.name(),
                k_neighbors
            ),
        }
    }

    fn validate(&self, n_items: usize) -> Result<()> {
        match self {
            Generator::Multimodal { modes, noise_sd } => {
                if modes.is_empty() {
                    return Err(config_err!("at least one mode is required"));
                }
                if !(*noise_sd >= 0.0) {
                    return Err(config_err!("noise_sd must be non-negative"));
                }
            }
            Generator::Occluded {
                grid_side,
                n_shapes,
                k_neighbors,
                ..
            } => {
                if *grid_side < 2 || grid_side % 2 != 0 {
                    return Err(config_err!("grid_side must be even and at least 2, got {}", grid_side));
                }
                if *n_shapes == 0 {
                    return Err(config_err!("n_shapes must be at least 1"));
                }
                if *k_neighbors == 0 || *k_neighbors + 1 > n_items {
                    return Err(config_err!(
                        "k_neighbors must lie in [1, {}], got {}",
                        n_items.saturating_sub(1),
                        k_neighbors
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub generator: Generator,
    pub seed: u64,
    pub split: Split,
    /// Construction index of the first item.
    pub index_offset: usize,
    pub items: Vec<DataItem>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.items.first().map_or(0, |i| i.x.len())
    }

    pub fn output_dim(&self) -> usize {
        self.items
            .first()
            .and_then(|i| i.labels.first())
            .map_or(0, |l| l.len())
    }

    /// Construction indices covered by this dataset.
    pub fn indices(&self) -> core::ops::Range<usize> {
        self.index_offset..self.index_offset + self.items.len()
    }

    /// Inputs of the given items as a `batch × input_dim` matrix.
    pub fn inputs(&self, idx: &[usize]) -> Tensor {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&self.items[i].x);
        }
        Tensor::matrix(idx.len(), d, data).expect("uniform input width")
    }

    /// A dataset restricted to the given item positions (same metadata).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Checks the per-item invariants: non-empty label sets, uniform widths,
    /// finite values.
    pub fn validate(&self) -> Result<()> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        for (i, item) in self.items.iter().enumerate() {
            if item.labels.is_empty() {
                return Err(arg_err!("item {} has an empty label set", i));
            }
            if item.x.len() != din || item.labels.iter().any(|l| l.len() != dout) {
                return Err(crate::error::dim_err!("item {} has inconsistent dimensions", i));
            }
            if item.x.iter().chain(item.labels.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(crate::Error::Numerical(format!("item {i} has a non-finite value")));
            }
        }
        Ok(())
    }
}

fn multimodal_item(index: usize, modes: &[Mode], noise_sd: f64, seed: u64) -> DataItem {
    let mut r = rng::stream(seed, "multimodal-item", index as u64);
    let x: f64 = r.random();
    let normal = Normal::new(0.0, noise_sd).expect("noise_sd validated");
    let labels = modes
        .iter()
        .map(|m| {
            let eta = if noise_sd > 0.0 { normal.sample(&mut r) } else { 0.0 };
            vec![m.eval(x) + eta]
        })
        .collect();
    DataItem { x: vec![x], labels }
}

/// Labels for a given scalar input without noise, for inspection and tests.
pub fn multimodal_labels(x: f64, modes: &[Mode]) -> Vec<Vec<f64>> {
    modes.iter().map(|m| vec![m.eval(x)]).collect()
}

pub fn gen_multimodal_regression(
    n_items: usize,
    modes: &[Mode],
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    let generator = Generator::Multimodal {
        modes: modes.to_vec(),
        noise_sd,
    };
    generate_range(&generator, 0..n_items, Split::All, seed)
}

/// Rasterizes one random pattern: the cellwise maximum of `n_shapes`
/// shapes drawn from {horizontal bar, vertical bar, cross, corner arc}.
pub fn random_pattern(side: usize, n_shapes: usize, r: &mut rng::Rng) -> Vec<f64> {
    let mut grid = vec![0.0f64; side * side];
    let s = side as i64;
    let put = |row: i64, col: i64, v: f64, grid: &mut Vec<f64>| {
        if (0..s).contains(&row) && (0..s).contains(&col) {
            let cell = &mut grid[(row * s + col) as usize];
            *cell = cell.max(v);
        }
    };
    for _ in 0..n_shapes {
        let intensity = 0.6 + 0.4 * r.random::<f64>();
        match r.random_range(0..4u32) {
            0 => {
                let row = r.random_range(0..s);
                let c0 = r.random_range(0..s / 2);
                let c1 = r.random_range(s / 2..s);
                for col in c0..=c1 {
                    put(row, col, intensity, &mut grid);
                }
            }
            1 => {
                let col = r.random_range(0..s);
                let r0 = r.random_range(0..s / 2);
                let r1 = r.random_range(s / 2..s);
                for row in r0..=r1 {
                    put(row, col, intensity, &mut grid);
                }
            }
            2 => {
                let cr = r.random_range(0..s);
                let cc = r.random_range(0..s);
                let arm = r.random_range(1..=(s / 2).max(1));
                for d in -arm..=arm {
                    put(cr + d, cc, intensity, &mut grid);
                    put(cr, cc + d, intensity, &mut grid);
                }
            }
            _ => {
                let (cr, cc) = match r.random_range(0..4u32) {
                    0 => (0, 0),
                    1 => (0, s - 1),
                    2 => (s - 1, 0),
                    _ => (s - 1, s - 1),
                };
                let radius = (s as f64) * (0.3 + 0.5 * r.random::<f64>());
                for row in 0..s {
                    for col in 0..s {
                        let dr = (row - cr) as f64;
                        let dc = (col - cc) as f64;
                        let dist = libm::sqrt(dr * dr + dc * dc);
                        if (dist - radius).abs() < 0.75 {
                            put(row, col, intensity, &mut grid);
                        }
                    }
                }
            }
        }
    }
    grid
}

fn occluded_pattern(index: usize, side: usize, n_shapes: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "occluded-pattern", index as u64);
    random_pattern(side, n_shapes, &mut r)
}

/// Squared distance between two patterns restricted to `cells`.
pub fn masked_sq_distance(a: &[f64], b: &[f64], cells: &[usize]) -> f64 {
    cells.iter().map(|&c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

/// Positions (into `patterns`) of the `k` patterns whose visible cells are
/// nearest to pattern `i`, `i` itself first, the rest ordered by
/// (distance, position).
pub fn nearest_visible(patterns: &[Vec<f64>], i: usize, cells: &[usize], k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = patterns
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (masked_sq_distance(&patterns[i], p, cells), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(k);
    out.push(i);
    out.extend(others.into_iter().take(k.saturating_sub(1)).map(|(_, j)| j));
    out
}

/// Builds occluded-completion items from full patterns.
pub fn occluded_items(patterns: &[Vec<f64>], side: usize, visible: Quadrant, k: usize) -> Vec<DataItem> {
    let cells = visible.cells(side);
    patterns
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut x = vec![0.0; p.len()];
            for &c in &cells {
                x[c] = p[c];
            }
            let labels = nearest_visible(patterns, i, &cells, k)
                .into_iter()
                .map(|j| patterns[j].clone())
                .collect();
            DataItem { x, labels }
        })
        .collect()
}

pub fn gen_occluded_completion(
    n_items: usize,
    grid_side: usize,
    n_shapes: usize,
    visible: Quadrant,
    k_neighbors: usize,
    seed: u64,
) -> Result<Dataset> {
    let generator = Generator::Occluded {
        grid_side,
        n_shapes,
        visible,
        k_neighbors,
    };
    generate_range(&generator, 0..n_items, Split::All, seed)
}

fn generate_range(
    generator: &Generator,
    range: core::ops::Range<usize>,
    split: Split,
    seed: u64,
) -> Result<Dataset> {
    generator.validate(range.len())?;
    let index_offset = range.start;
    let items = match generator {
        Generator::Multimodal { modes, noise_sd } => range
            .map(|i| multimodal_item(i, modes, *noise_sd, seed))
            .collect(),
        Generator::Occluded {
            grid_side,
            n_shapes,
            visible,
            k_neighbors,
        } => {
            let patterns: Vec<Vec<f64>> = range
                .map(|i| occluded_pattern(i, *grid_side, *n_shapes, seed))
                .collect();
            occluded_items(&patterns, *grid_side, *visible, *k_neighbors)
        }
    };
    Ok(Dataset {
        generator: generator.clone(),
        seed,
        split,
        index_offset,
        items,
    })
}

/// Generates construction indices `0..n_train` as the training split and
/// `n_train..n_train + n_test` as the test split. Nearest-neighbor label
/// sets are looked up within each split.
pub fn generate_split(
    generator: &Generator,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let train = generate_range(generator, 0..n_train, Split::Train, seed)?;
    let test = generate_range(generator, n_train..n_train + n_test, Split::Test, seed)?;
    Ok((train, test))
}

/// Regenerates a dataset from its stored metadata.
pub fn regenerate(ds: &Dataset) -> Result<Dataset> {
    generate_range(&ds.generator, ds.indices(), ds.split, ds.seed)
}

/// Item positions grouped into batches; every item appears exactly once.
/// With a shuffle seed the order is a seeded permutation, otherwise it is
/// sequential.
pub fn batch_iter(n_items: usize, batch_size: usize, shuffle_seed: Option<u64>) -> Result<Vec<Vec<usize>>> {
    if n_items == 0 {
        return Err(arg_err!("cannot batch an empty dataset"));
    }
    if batch_size == 0 {
        return Err(arg_err!("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    if let Some(seed) = shuffle_seed {
        let mut r = rng::stream(seed, "shuffle", 0);
        order.shuffle(&mut r);
    }
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}
