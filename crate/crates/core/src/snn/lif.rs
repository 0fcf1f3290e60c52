use crate::diff::{CustomOp, SurrogateConfig, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Current-based LIF constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifConfig {
    /// Current decay factor.
    pub d_c: f64,
    /// Potential decay factor.
    pub d_v: f64,
    pub v_th: f64,
    /// Potential a neuron returns to after firing.
    pub rest: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        LifConfig {
            d_c: 0.5,
            d_v: 0.75,
            v_th: 0.5,
            rest: 0.0,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.d_c) {
            return Err(Error::config(format!(
                "d_c must lie in [0, 1], got {}",
                self.d_c
            )));
        }
        if !(0.0..=1.0).contains(&self.d_v) {
            return Err(Error::config(format!(
                "d_v must lie in [0, 1], got {}",
                self.d_v
            )));
        }
        if !self.v_th.is_finite() || !self.rest.is_finite() {
            return Err(Error::config(
                "threshold and resting potential must be finite",
            ));
        }
        Ok(())
    }

    pub fn surrogate(&self, window: f64) -> Result<SurrogateConfig> {
        SurrogateConfig::new(self.v_th, window)
    }
}

/// Per-neuron current, potential and spike of one layer at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct LifLayerState {
    pub current: Vec<f64>,
    pub potential: Vec<f64>,
    pub spike: Vec<f64>,
}

impl LifLayerState {
    pub fn zeros(n: usize) -> Self {
        LifLayerState {
            current: vec![0.0; n],
            potential: vec![0.0; n],
            spike: vec![0.0; n],
        }
    }
}

/// Advances one layer by one timestep.
///
/// `c = d_c·c' + inter`, `v = d_v·v'·(1 − o') + rest·o' + c + intra`, `o = [v > v_th]`,
/// where primes denote the previous step.
pub fn lif_step(
    state: &LifLayerState,
    inter: &[f64],
    intra: &[f64],
    cfg: &LifConfig,
) -> LifLayerState {
    let n = state.current.len();
    assert_eq!(inter.len(), n);
    assert_eq!(intra.len(), n);
    let mut next = LifLayerState::zeros(n);
    for j in 0..n {
        let c = cfg.d_c * state.current[j] + inter[j];
        let v = membrane(state.potential[j], state.spike[j], c, intra[j], cfg);
        next.current[j] = c;
        next.potential[j] = v;
        next.spike[j] = if v > cfg.v_th { 1.0 } else { 0.0 };
    }
    next
}

#[inline]
fn membrane(v_prev: f64, o_prev: f64, c: f64, intra: f64, cfg: &LifConfig) -> f64 {
    let mut v = cfg.d_v * v_prev * (1.0 - o_prev) + c;
    if cfg.rest != 0.0 {
        v += cfg.rest * o_prev;
    }
    v + intra
}

/// `decay·prev + input`
struct Leak(f64);

impl CustomOp for Leak {
    fn name(&self) -> &'static str {
        "lif_current"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (prev, input) = (inputs[0], inputs[1]);
        let data = prev
            .data()
            .iter()
            .zip(input.data())
            .map(|(p, x)| self.0 * p + x)
            .collect();
        Tensor::from_parts(input.shape().to_vec(), data)
    }

    fn backward(
        &self,
        _inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        vec![
            Some(grad.iter().map(|g| g * self.0).collect()),
            Some(grad.to_vec()),
        ]
    }
}

/// Membrane update with hard reset; inputs `[v_prev, o_prev, c]` or `[v_prev, o_prev, c, intra]`.
struct Membrane(LifConfig);

impl CustomOp for Membrane {
    fn name(&self) -> &'static str {
        "lif_potential"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (v, o, c) = (inputs[0].data(), inputs[1].data(), inputs[2].data());
        let data = match inputs.get(3) {
            Some(intra) => (0..c.len())
                .map(|j| membrane(v[j], o[j], c[j], intra.data()[j], &self.0))
                .collect(),
            None => (0..c.len())
                .map(|j| {
                    let mut x = self.0.d_v * v[j] * (1.0 - o[j]) + c[j];
                    if self.0.rest != 0.0 {
                        x += self.0.rest * o[j];
                    }
                    x
                })
                .collect(),
        };
        Tensor::from_parts(inputs[2].shape().to_vec(), data)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let (v, o) = (inputs[0].data(), inputs[1].data());
        let d_v = self.0.d_v;
        let dv = grad
            .iter()
            .zip(o)
            .map(|(g, o)| g * d_v * (1.0 - o))
            .collect();
        let d_o = grad
            .iter()
            .zip(v)
            .map(|(g, v)| g * (self.0.rest - d_v * v))
            .collect();
        let mut out = vec![Some(dv), Some(d_o), Some(grad.to_vec())];
        if inputs.len() == 4 {
            out.push(Some(grad.to_vec()));
        }
        out
    }
}

/// Tape handles for one layer's state.
#[derive(Clone, Copy, Debug)]
pub struct LifVars {
    pub current: Var,
    pub potential: Var,
    pub spike: Var,
}

impl LifVars {
    pub fn zeros(tape: &mut Tape, rows: usize, n: usize) -> Self {
        let z = tape.constant(Tensor::zeros(&[rows, n]));
        LifVars {
            current: z,
            potential: z,
            spike: z,
        }
    }
}

/// Differentiable [`lif_step`]; the spike uses the rectangular surrogate.
pub fn lif_step_var(
    tape: &mut Tape,
    prev: LifVars,
    inter: Var,
    intra: Option<Var>,
    cfg: &LifConfig,
    surrogate: SurrogateConfig,
) -> LifVars {
    let current = tape.custom(Box::new(Leak(cfg.d_c)), &[prev.current, inter]);
    let mut inputs = vec![prev.potential, prev.spike, current];
    if let Some(intra) = intra {
        inputs.push(intra);
    }
    let potential = tape.custom(Box::new(Membrane(*cfg)), &inputs);
    let spike = crate::diff::spike_step(tape, potential, surrogate);
    LifVars {
        current,
        potential,
        spike,
    }
}
