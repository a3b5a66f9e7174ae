//! Stacking different movement strategies on separate altitude levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Strategy, TransferError};
use crate::zone_grid::GridSpec;

/// One operating area and the strategy its drones follow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridLevel {
    pub area: usize,
    pub layer: usize,
    pub strategy: Strategy,
}

impl HybridLevel {
    /// Layers this level needs for itself: its own, plus the transfer layer
    /// directly above for layered swaps.
    pub fn claimed_layers(&self) -> Vec<usize> {
        match (self.strategy, self.layer.checked_sub(1)) {
            (Strategy::MultiLayer, Some(t)) => vec![t, self.layer],
            _ => vec![self.layer],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridPlan {
    pub levels: Vec<HybridLevel>,
}

impl HybridPlan {
    pub fn strategy_on(&self, layer: usize) -> Option<Strategy> {
        self.levels.iter().find(|l| l.layer == layer).map(|l| l.strategy)
    }

    /// Transfer layers reserved by layered levels.
    pub fn transfer_layers(&self) -> Vec<usize> {
        self.levels
            .iter()
            .filter(|l| l.strategy == Strategy::MultiLayer)
            .filter_map(|l| l.layer.checked_sub(1))
            .collect()
    }
}

/// Accepts the levels if every layered level has its own free transfer layer
/// above it and no layer is claimed twice.
pub fn hybrid_plan(levels: &[HybridLevel], g: &GridSpec) -> Result<HybridPlan, TransferError> {
    let mut claimed: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, level) in levels.iter().enumerate() {
        if level.strategy == Strategy::Hybrid {
            return Err(TransferError::NestedHybrid);
        }
        // a one-layer grid has no room for a transfer layer wherever the
        // operation layer is put
        if level.strategy == Strategy::MultiLayer && (level.layer == 0 || g.layers < 2) {
            return Err(TransferError::MissingTransferLayer(level.layer));
        }
        if level.layer >= g.layers {
            return Err(TransferError::LayerOutOfRange { layer: level.layer, layers: g.layers });
        }
        for layer in level.claimed_layers() {
            if claimed.insert(layer, i).is_some() {
                return Err(TransferError::LayerOverlap(layer));
            }
        }
    }
    Ok(HybridPlan { levels: levels.to_vec() })
}

/// Assigns layers bottom-up from the top of the stack, giving each layered
/// strategy the transfer layer it needs. Returns the levels and the number
/// of layers used.
pub fn stack_levels(strategies: &[Strategy]) -> (Vec<HybridLevel>, usize) {
    let mut layer = 0;
    let mut out = Vec::with_capacity(strategies.len());
    for (area, &strategy) in strategies.iter().enumerate() {
        if strategy == Strategy::MultiLayer {
            layer += 1;
        }
        out.push(HybridLevel { area: area + 1, layer, strategy });
        layer += 1;
    }
    (out, layer)
}
