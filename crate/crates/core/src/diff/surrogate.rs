//! Heaviside spike with a rectangular surrogate derivative.

use super::tape::{CustomOp, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Firing threshold and the half-width of the window in which the surrogate
/// derivative is 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateConfig {
    pub v_th: f64,
    pub window: f64,
}

impl SurrogateConfig {
    pub fn new(v_th: f64, window: f64) -> Result<Self> {
        if !v_th.is_finite() {
            return Err(Error::config(format!(
                "firing threshold must be finite, got {v_th}"
            )));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::config(format!(
                "surrogate window must be > 0, got {window}"
            )));
        }
        Ok(SurrogateConfig { v_th, window })
    }

    /// Forward spike: strictly above threshold.
    #[inline]
    pub fn fires(&self, v: f64) -> bool {
        v > self.v_th
    }

    /// Rectangular pseudo-derivative `z(v)`.
    #[inline]
    pub fn pseudo_grad(&self, v: f64) -> f64 {
        if (v - self.v_th).abs() < self.window {
            1.0
        } else {
            0.0
        }
    }
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            v_th: 0.5,
            window: 0.5,
        }
    }
}

struct SpikeStep(SurrogateConfig);

impl CustomOp for SpikeStep {
    fn name(&self) -> &'static str {
        "spike_step"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let v = inputs[0];
        let data = v
            .data()
            .iter()
            .map(|&x| if self.0.fires(x) { 1.0 } else { 0.0 })
            .collect();
        Tensor::from_parts(v.shape().to_vec(), data)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let d = grad
            .iter()
            .zip(inputs[0].data())
            .map(|(&g, &v)| g * self.0.pseudo_grad(v))
            .collect();
        vec![Some(d)]
    }
}

/// Emits binary spikes from potentials `v`; backward multiplies by `z(v)`.
pub fn spike_step(tape: &mut Tape, v: Var, cfg: SurrogateConfig) -> Var {
    tape.custom(Box::new(SpikeStep(cfg)), &[v])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local(v: f64) -> (f64, f64) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(v));
        let o = spike_step(&mut tape, x, SurrogateConfig::default());
        let out = tape.value(o).item();
        let g = tape.backward(o).unwrap();
        (out, g.get_or_zeros(x, 1)[0])
    }

    #[test]
    fn inside_window_above_threshold() {
        assert_eq!(local(0.6), (1.0, 1.0));
    }

    #[test]
    fn outside_window() {
        assert_eq!(local(1.2), (1.0, 0.0));
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(local(0.5), (0.0, 1.0));
    }

    #[test]
    fn rejects_bad_window() {
        assert!(SurrogateConfig::new(0.5, 0.0).is_err());
        assert!(SurrogateConfig::new(f64::NAN, 0.5).is_err());
    }
}
