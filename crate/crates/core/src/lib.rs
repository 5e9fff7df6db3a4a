#![cfg_attr(not(any(feature = "std", test)), no_std)]

//! Diverse structured prediction from a single network.
//!
//! A model `f(c, x)` receives an input `x` together with a control value `c`
//! (one-hot for a discrete control set, raw for a continuous one). Training
//! matches every acceptable label to its best-reconstructing control value
//! (the diverse loss) and additionally pulls the worst control value towards
//! its nearest label (the catchup loss), so that no control value is left
//! without a training signal. Predictions are scored with the k-best oracle.
//!
//! The crate is `no_std` + `alloc`. File formats, configuration and the
//! experiment CLI live in the `divnet` crate.

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod ensemble;
mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use crate::autodiff::{Activation, Graph, NodeId};
pub use crate::data::{DataItem, Dataset, Split};
pub use crate::ensemble::{BaggedEnsemble, TreenetModel};
pub use crate::error::{Error, Result};
pub use crate::eval::{OracleCurve, PredictionSet};
pub use crate::losses::{LossConfig, LossMatrix, PairLoss};
pub use crate::model::{ControlKind, ControlSet, ControlValue, Model, ModelConfig};
pub use crate::tensor::Tensor;
pub use crate::train::{Method, TrainConfig, TrainReport, Trained};
