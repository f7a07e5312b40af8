//! Exact-zero unit detection and function-preserving network compaction.
//!
//! A hidden unit whose incoming weights and bias are all exactly `0.0`
//! outputs 0 for every input (ReLU fixes 0), so deleting it and its
//! outgoing weights cannot change the network function. Detection is by
//! equality, never tolerance: the proximal operators emit literal zeros,
//! and a tolerance here would only hide bugs. Removing a first-layer unit
//! deletes a column of the second layer, which can leave second-layer
//! rows all-zero in turn, so layer 2 is re-examined after layer 1 is cut.

use std::fmt;

use ndarray::Axis;

use crate::network::{HiddenLayer, ModelParams};

/// What a compaction removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneReport {
    pub layer1_removed: Vec<usize>,
    pub layer2_removed: Vec<usize>,
    pub sizes_before: (usize, usize),
    pub sizes_after: (usize, usize),
}

impl PruneReport {
    pub fn is_empty(&self) -> bool {
        self.layer1_removed.is_empty() && self.layer2_removed.is_empty()
    }
}

impl fmt::Display for PruneReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, before, after, removed) in [
            ("layer 1", self.sizes_before.0, self.sizes_after.0, &self.layer1_removed),
            ("layer 2", self.sizes_before.1, self.sizes_after.1, &self.layer2_removed),
        ] {
            write!(f, "{name}: {before} -> {after} units (removed {}", removed.len())?;
            if removed.is_empty() {
                writeln!(f, ")")?;
            } else {
                write!(f, ":")?;
                for i in removed {
                    write!(f, " {i}")?;
                }
                writeln!(f, ")")?;
            }
        }
        Ok(())
    }
}

/// Indices of hidden units whose whole incoming group (weights and bias)
/// is exactly zero, in increasing order.
pub fn zero_units(params: &ModelParams, layer: HiddenLayer) -> Vec<usize> {
    let mut group = Vec::new();
    (0..params.layer_units(layer))
        .filter(|&unit| {
            params.gather_group(layer, unit, &mut group);
            group.iter().all(|&x| x == 0.0)
        })
        .collect()
}

fn complement(removed: &[usize], len: usize) -> Vec<usize> {
    let mut keep = Vec::with_capacity(len - removed.len());
    let mut it = removed.iter().peekable();
    for i in 0..len {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            keep.push(i);
        }
    }
    keep
}

/// Removes zero-group units from both hidden layers, shrinking every
/// affected matrix. The returned model computes the same distribution as
/// the input for every context (zero units contribute nothing). Layer-2
/// zero groups are detected after the layer-1 columns are gone, so a row
/// that fed only on removed units is removed too.
pub fn compact(params: &ModelParams) -> (ModelParams, PruneReport) {
    let sizes_before = (params.h1(), params.h2());

    let layer1_removed = zero_units(params, HiddenLayer::First);
    let keep1 = complement(&layer1_removed, params.h1());
    let narrowed = ModelParams {
        n: params.n,
        embed: params.embed.clone(),
        hidden1: params
            .hidden1
            .iter()
            .map(|block| block.select(Axis(0), &keep1))
            .collect(),
        bias1: params.bias1.select(Axis(0), &keep1),
        // Column selection yields a permuted-stride array; copy back to
        // row-major so downstream row walks stay cache-friendly.
        hidden2: params.hidden2.select(Axis(1), &keep1).as_standard_layout().to_owned(),
        bias2: params.bias2.clone(),
        output: params.output.clone(),
        output_bias: params.output_bias.clone(),
    };

    let layer2_removed = zero_units(&narrowed, HiddenLayer::Second);
    let keep2 = complement(&layer2_removed, narrowed.h2());
    let compacted = ModelParams {
        hidden2: narrowed.hidden2.select(Axis(0), &keep2),
        bias2: narrowed.bias2.select(Axis(0), &keep2),
        output: narrowed.output.select(Axis(1), &keep2).as_standard_layout().to_owned(),
        ..narrowed
    };

    let sizes_after = (compacted.h1(), compacted.h2());
    let report = PruneReport {
        layer1_removed,
        layer2_removed,
        sizes_before,
        sizes_after,
    };
    (compacted, report)
}
