//! Dense linear algebra, activations, seeded randomness and gradient checking.
//!
//! Everything is double precision.

mod activation;
mod gradcheck;
mod matrix;
mod params;
mod rng;

pub use activation::{
    sigmoid, sigmoid_in_place, sigmoid_scalar, tanh_act, tanh_in_place, tanh_scalar, Activation,
    CLAMP,
};
pub use gradcheck::{finite_diff_check, finite_diff_check_terms, relative_error, GradCheckReport, TensorCheck, DEFAULT_STEP};
pub use matrix::{dot, gemv, sparse_nonzeros, Matrix};
pub use params::{ParamTensors, TensorRef};
pub use rng::{Rng, RNG_ALGORITHM};

/// Glorot-uniform matrix: entries on `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(-s, s))
}

/// `a ⊙ b`
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `dst += src`
pub fn add_into(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
