//! Fixtures shared by the benchmarks.

use fairsin_core::graph::{stratified_split, DEFAULT_SPLIT_RATIOS};
use fairsin_core::synth::{generate, SynthConfig};
use fairsin_core::{DenseMatrix, Graph, Split};

/// Default synthetic graph with the split of seed 0.
pub fn synthetic(n_nodes: usize) -> (Graph, Split) {
    let g = generate(&SynthConfig {
        n_nodes,
        ..SynthConfig::default()
    })
    .expect("default generator config is valid");
    let split = stratified_split(&g, DEFAULT_SPLIT_RATIOS, 0).expect("synthetic graph splits");
    (g, split)
}

/// Deterministic dense matrix with entries in [-1, 1].
pub fn dense(rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |r, c| ((r * 31 + c * 17) as f64 * 0.37).sin())
}
