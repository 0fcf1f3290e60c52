use crate::diff::{CustomOp, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Lateral interaction on a ring: neuron `j` reads the previous-step spikes of
/// `j-r, …, j-1, j+1, …, j+r` (indices mod `n`), weight column `k` in that order.
#[derive(Clone, Debug)]
pub struct LateralConnection {
    n: usize,
    radius: usize,
    /// `[n × 2r]`
    pub weights: Tensor,
}

impl LateralConnection {
    pub fn zeros(n: usize, radius: usize) -> Result<Self> {
        LateralConnection::new(Tensor::zeros(&[n, 2 * radius]), radius)
    }

    pub fn new(weights: Tensor, radius: usize) -> Result<Self> {
        let n = weights.rows();
        if radius == 0 {
            return Err(Error::config("lateral radius must be at least 1"));
        }
        if weights.shape().len() != 2 || weights.cols() != 2 * radius {
            return Err(Error::config(format!(
                "lateral weights must be [n × {}]",
                2 * radius
            )));
        }
        if n < 2 * radius + 1 {
            return Err(Error::config(format!(
                "layer of width {n} is too narrow for lateral radius {radius}"
            )));
        }
        Ok(LateralConnection { n, radius, weights })
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
}

/// Index of the `k`-th neighbour of `j`.
#[inline]
pub fn neighbour(j: usize, k: usize, radius: usize, n: usize) -> usize {
    if k < radius {
        (j + n - (radius - k)) % n
    } else {
        (j + k - radius + 1) % n
    }
}

/// `out_j = Σ_k w'_jk · spikes[neighbour(j, k)]`.
pub fn intra_lateral(spikes_prev: &[f64], lat: &LateralConnection) -> Vec<f64> {
    lateral_rows(spikes_prev, lat.weights.data(), lat.radius, lat.n)
}

fn lateral_rows(spikes: &[f64], w: &[f64], radius: usize, n: usize) -> Vec<f64> {
    let fan = 2 * radius;
    let mut out = vec![0.0; spikes.len()];
    for (row_in, row_out) in spikes.chunks(n).zip(out.chunks_mut(n)) {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..fan {
                acc += w[j * fan + k] * row_in[neighbour(j, k, radius, n)];
            }
            row_out[j] = acc;
        }
    }
    out
}

struct Lateral {
    radius: usize,
}

impl CustomOp for Lateral {
    fn name(&self) -> &'static str {
        "lateral"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (o, w) = (inputs[0], inputs[1]);
        let n = o.cols();
        Tensor::from_parts(
            o.shape().to_vec(),
            lateral_rows(o.data(), w.data(), self.radius, n),
        )
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let (o, w) = (inputs[0], inputs[1]);
        let n = o.cols();
        let fan = 2 * self.radius;
        let mut d_o = vec![0.0; o.len()];
        let mut dw = vec![0.0; w.len()];
        for b in 0..o.rows() {
            let row = &o.data()[b * n..(b + 1) * n];
            for j in 0..n {
                let g = grad[b * n + j];
                if g == 0.0 {
                    continue;
                }
                for k in 0..fan {
                    let nb = neighbour(j, k, self.radius, n);
                    d_o[b * n + nb] += g * w.data()[j * fan + k];
                    dw[j * fan + k] += g * row[nb];
                }
            }
        }
        vec![Some(d_o), Some(dw)]
    }
}

/// Differentiable lateral term for a `[B × n]` batch of previous-step spikes.
pub fn lateral_var(tape: &mut Tape, spikes_prev: Var, weights: Var, radius: usize) -> Var {
    tape.custom(Box::new(Lateral { radius }), &[spikes_prev, weights])
}
