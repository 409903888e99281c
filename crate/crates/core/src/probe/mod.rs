// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear token probes: one softmax classifier per (layer, offset) pair.

mod checkpoint;
mod model;
mod train;

use std::collections::BTreeMap;

pub use checkpoint::{probe_file_name, read_probe, write_probe, ProbeCheckpoint};
pub use model::{forward_probs, init_probe, softmax, softmax_in_place, ProbeModel};
pub use train::{
    count_correct, evaluate_accuracy, loss_and_gradient, mean_cross_entropy, train_probe, EpochLoss,
    Gradient, PositionFilter, TrainConfig, TrainHistory,
};

use crate::error::{Error, Result};
use crate::store::LayerId;

/// Probes indexed by `(layer, offset)`.
pub type ProbeGrid = BTreeMap<(LayerId, i32), ProbeModel>;

pub fn grid_get(grid: &ProbeGrid, layer: LayerId, offset: i32) -> Result<&ProbeModel> {
    grid.get(&(layer, offset))
        .ok_or(Error::MissingProbe { layer, offset })
}
