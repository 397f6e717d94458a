//! Shared fixtures for the benchmarks.

use ptqtp_core::{decompose, synth, DecomposeConfig, QuantizedLayer, WeightMatrix};

/// Shapes exercised by both benchmark groups.
pub const SHAPES: [(usize, usize); 3] = [(64, 512), (256, 1024), (512, 4096)];

pub fn weights(n: usize, d: usize) -> WeightMatrix {
    synth::gaussian(n, d, 0xbe7c)
}

pub fn input(d: usize) -> Vec<f64> {
    synth::gaussian_vec(d, 0x1a9b7)
}

/// A decomposed layer of the given shape with the default configuration.
pub fn layer(n: usize, d: usize) -> QuantizedLayer {
    decompose(&weights(n, d), &DecomposeConfig::default())
        .expect("fixture decomposes")
        .0
}
