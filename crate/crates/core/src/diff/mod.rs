//! Reverse-mode differentiation over dense 64-bit arrays.
//!
//! [`Tape`] records operations as they run and replays them backward.
//! Model-specific operations plug in through [`CustomOp`]; the spike
//! surrogate and branch maxout live here because every spiking layer uses them.

pub mod kernels;
mod maxout;
mod surrogate;
mod tape;
mod tensor;

pub use maxout::maxout_reduce;
pub use surrogate::{spike_step, SurrogateConfig};
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::Tensor;

/// Central finite-difference gradient of a scalar function, for tests and checks.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest elementwise relative error, with an absolute floor on the denominator.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}
