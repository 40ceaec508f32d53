//! The small metabolic network used as the running example.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::{Matrix, Vector};
use crate::polytope::CanonicalModel;

pub const EXAMPLE_VARIABLES: [&str; 13] =
    ["c_out", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "d_out", "f_out", "biomass", "h_out", "a_in"];

/// Species rows A, B, C, D, E, F, H, cof.
#[rustfmt::skip]
pub const EXAMPLE_STOICHIOMETRY: [[f64; 13]; 8] = [
    [ 0.0, -1.0,  0.0,  0.0, 0.0,  0.0,  0.0,  0.0,  0.0,  0.0,  0.0,  0.0, 1.0],
    [ 0.0,  1.0, -1.0, -1.0, 0.0,  0.0,  0.0,  0.0,  0.0,  0.0, -0.6,  0.0, 0.0],
    [ 0.0,  0.0,  0.0,  1.0, 0.0, -1.0,  0.0,  0.0,  0.0,  0.0, -0.1,  0.0, 0.0],
    [ 0.0,  0.0,  0.0,  1.0, 1.0,  0.0, -1.0,  0.0, -1.0,  0.0,  0.0,  0.0, 0.0],
    [ 0.0,  1.0, -1.0, -1.0, 1.0, -1.0, -1.0,  0.0,  0.0,  0.0, -0.5,  0.0, 0.0],
    [ 0.0,  0.0,  0.0,  1.0, 1.0,  0.0,  1.0, -2.0,  0.0, -1.0,  0.0,  0.0, 0.0],
    [ 0.0,  0.0,  0.0,  0.0, 0.0,  0.0,  0.0,  1.0,  0.0,  0.0, -0.3, -1.0, 0.0],
    [-1.0,  0.0,  0.0,  1.0, 0.0,  0.0,  0.0,  0.0,  0.0,  0.0,  0.0,  0.0, 0.0],
];

pub const EXAMPLE_SPECIES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "H", "cof"];

/// Per-variable bounds: biomass in [0.05, 1.5], a_in fixed at 10, others in
/// [0, 100].
pub fn example_bounds() -> Vec<(f64, f64)> {
    EXAMPLE_VARIABLES
        .iter()
        .map(|&n| match n {
            "biomass" => (0.05, 1.5),
            "a_in" => (10.0, 10.0),
            _ => (0.0, 100.0),
        })
        .collect()
}

pub fn build_example_model() -> CanonicalModel {
    let s = Matrix::from_fn(8, 13, |i, j| EXAMPLE_STOICHIOMETRY[i][j]);
    let names: Vec<String> = EXAMPLE_VARIABLES.iter().map(|&s| String::from(s)).collect();
    CanonicalModel::with_bounds(s, Vector::zeros(8), None, &example_bounds(), names).expect("example model is consistent")
}
