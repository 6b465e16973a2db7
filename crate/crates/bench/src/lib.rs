//! Fixtures shared by the benchmarks.

use codclust_core::{preset, sample_matrix_normal_dataset, DataSet, Design};

/// A main-design data set (100 x 100) with `n` samples.
pub fn main_design(n: usize, seed: u64) -> DataSet {
    let Design::Matrix(cfg) = preset("main-random", n, seed).expect("preset exists") else {
        unreachable!("main-random is a matrix design")
    };
    sample_matrix_normal_dataset(&cfg).expect("valid design").data
}
