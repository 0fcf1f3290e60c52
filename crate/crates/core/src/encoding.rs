//! State encoding into spike trains and rate decoding of output spikes.
//!
//! A state vector is first mapped through Gaussian receptive fields
//! (population coding), giving one stimulation strength in `(0, 1]` per
//! encoding neuron. Spikes are then drawn either stochastically (one
//! Bernoulli trial per neuron and timestep) or deterministically with a
//! pseudo membrane potential that integrates the strength and fires above 1.

use rand::Rng;

use crate::diff::{CustomOp, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// How stimulation strengths become spikes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpikeCoding {
    Poisson,
    Deterministic,
}

impl SpikeCoding {
    pub fn as_str(self) -> &'static str {
        match self {
            SpikeCoding::Poisson => "poisson",
            SpikeCoding::Deterministic => "deterministic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "poisson" => Some(SpikeCoding::Poisson),
            "deterministic" => Some(SpikeCoding::Deterministic),
            _ => None,
        }
    }
}

/// Gaussian receptive fields, `J` per state dimension.
#[derive(Clone, Debug)]
pub struct PopulationEncoder {
    n_state: usize,
    j_per_pop: usize,
    /// `[N × J]`, state units.
    pub means: Tensor,
    /// `[N × J]`, state units, strictly positive.
    pub stds: Tensor,
    pub trainable: bool,
}

/// Smallest standard deviation kept after a parameter update.
pub const MIN_STD: f64 = 1e-3;

impl PopulationEncoder {
    /// Means evenly spaced over `[low_i, high_i]`; every std equals the spacing.
    pub fn new(low: &[f64], high: &[f64], j_per_pop: usize, trainable: bool) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(Error::config(
                "encoder range bounds must be non-empty and of equal length",
            ));
        }
        if j_per_pop == 0 {
            return Err(Error::config("population size must be at least 1"));
        }
        let n_state = low.len();
        let mut means = Vec::with_capacity(n_state * j_per_pop);
        let mut stds = Vec::with_capacity(n_state * j_per_pop);
        for (&lo, &hi) in low.iter().zip(high) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::config(format!("invalid encoder range [{lo}, {hi}]")));
            }
            let width = hi - lo;
            if j_per_pop == 1 {
                means.push(lo + width / 2.0);
                stds.push(width);
            } else {
                let spacing = width / (j_per_pop - 1) as f64;
                for j in 0..j_per_pop {
                    means.push(lo + spacing * j as f64);
                    stds.push(spacing);
                }
            }
        }
        Ok(PopulationEncoder {
            n_state,
            j_per_pop,
            means: Tensor::from_parts(vec![n_state, j_per_pop], means),
            stds: Tensor::from_parts(vec![n_state, j_per_pop], stds),
            trainable,
        })
    }

    /// Builds an encoder from explicit parameters.
    pub fn from_params(means: Tensor, stds: Tensor, trainable: bool) -> Result<Self> {
        if means.shape().len() != 2 || means.shape() != stds.shape() {
            return Err(Error::config("means and stds must both be [N × J]"));
        }
        if stds.data().iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("receptive field stds must be > 0"));
        }
        Ok(PopulationEncoder {
            n_state: means.rows(),
            j_per_pop: means.cols(),
            means,
            stds,
            trainable,
        })
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn j_per_pop(&self) -> usize {
        self.j_per_pop
    }

    pub fn width(&self) -> usize {
        self.n_state * self.j_per_pop
    }

    /// Stimulation strengths `A = exp(-(s - μ)² / 2σ²)`, length `N·J`.
    pub fn encode(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.n_state {
            return Err(Error::config(format!(
                "state has {} entries, encoder expects {}",
                state.len(),
                self.n_state
            )));
        }
        if state.iter().any(|s| !s.is_finite()) {
            return Err(Error::input("state contains a non-finite value"));
        }
        let mut out = Vec::with_capacity(self.width());
        for (i, &s) in state.iter().enumerate() {
            for j in 0..self.j_per_pop {
                let k = i * self.j_per_pop + j;
                out.push(gaussian(s, self.means.data()[k], self.stds.data()[k]));
            }
        }
        Ok(out)
    }

    /// Keeps every std at or above [`MIN_STD`] after an optimizer step.
    pub fn project(&mut self) {
        for s in self.stds.data_mut() {
            if !(*s >= MIN_STD) {
                *s = MIN_STD;
            }
        }
    }
}

#[inline]
fn gaussian(s: f64, mu: f64, sigma: f64) -> f64 {
    let z = s - mu;
    (-(z * z) / (2.0 * sigma * sigma)).exp()
}

/// Batched receptive fields: `states [B × N]`, `means, stds [N × J]` → `[B × N·J]`.
struct GaussianField;

impl CustomOp for GaussianField {
    fn name(&self) -> &'static str {
        "population_encode"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (states, means, stds) = (inputs[0], inputs[1], inputs[2]);
        let (rows, n) = (states.rows(), states.cols());
        let j = means.cols();
        let mut out = Vec::with_capacity(rows * n * j);
        for b in 0..rows {
            for (i, &s) in states.row(b).iter().enumerate() {
                for k in i * j..(i + 1) * j {
                    out.push(gaussian(s, means.data()[k], stds.data()[k]));
                }
            }
        }
        Tensor::from_parts(vec![rows, n * j], out)
    }

    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (states, means, stds) = (inputs[0], inputs[1], inputs[2]);
        let (rows, n) = (states.rows(), states.cols());
        let j = means.cols();
        let mut ds = vec![0.0; states.len()];
        let mut dmu = vec![0.0; means.len()];
        let mut dsigma = vec![0.0; stds.len()];
        for b in 0..rows {
            for i in 0..n {
                let s = states.data()[b * n + i];
                for k in i * j..(i + 1) * j {
                    let idx = b * n * j + k;
                    let a = output.data()[idx];
                    let g = grad[idx];
                    let sigma = stds.data()[k];
                    let z = s - means.data()[k];
                    let common = g * a * z / (sigma * sigma);
                    ds[b * n + i] -= common;
                    dmu[k] += common;
                    dsigma[k] += common * z / sigma;
                }
            }
        }
        vec![Some(ds), Some(dmu), Some(dsigma)]
    }
}

/// Differentiable population coding on a tape.
pub fn population_encode_var(tape: &mut Tape, states: Var, means: Var, stds: Var) -> Var {
    tape.custom(Box::new(GaussianField), &[states, means, stds])
}

/// Binary spikes over a time window, `bits[τ · width + k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    steps: usize,
    width: usize,
    bits: Vec<u8>,
}

impl SpikeTrain {
    pub fn zeros(steps: usize, width: usize) -> Self {
        SpikeTrain {
            steps,
            width,
            bits: vec![0; steps * width],
        }
    }

    pub fn from_bits(steps: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != steps * width {
            return Err(Error::config(format!(
                "spike train [{steps} × {width}] needs {} bits, got {}",
                steps * width,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::input("spike bits must be 0 or 1"));
        }
        Ok(SpikeTrain { steps, width, bits })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, step: usize, neuron: usize) -> u8 {
        self.bits[step * self.width + neuron]
    }

    pub fn set(&mut self, step: usize, neuron: usize, fired: bool) {
        self.bits[step * self.width + neuron] = fired as u8;
    }

    pub fn step(&self, step: usize) -> &[u8] {
        &self.bits[step * self.width..(step + 1) * self.width]
    }

    /// Spikes emitted by `neuron` over the whole window.
    pub fn count(&self, neuron: usize) -> usize {
        (0..self.steps).map(|t| self.get(t, neuron) as usize).sum()
    }

    /// Average firing rate per neuron.
    pub fn rates(&self) -> Vec<f64> {
        (0..self.width)
            .map(|k| self.count(k) as f64 / self.steps as f64)
            .collect()
    }
}

/// One timestep of Bernoulli spike generation; strengths are clipped to `[0, 1]`.
pub fn poisson_step<R: Rng + ?Sized>(strength: &[f64], rng: &mut R, out: &mut [f64]) {
    for (o, &a) in out.iter_mut().zip(strength) {
        let p = a.clamp(0.0, 1.0);
        // Draw unconditionally so the stream position does not depend on the strengths.
        let u: f64 = rng.random();
        *o = if u < p { 1.0 } else { 0.0 };
    }
}

/// Independent Bernoulli(A_k) spikes at every timestep.
pub fn poisson_encode<R: Rng + ?Sized>(strength: &[f64], steps: usize, rng: &mut R) -> SpikeTrain {
    let width = strength.len();
    let mut train = SpikeTrain::zeros(steps, width);
    let mut row = vec![0.0; width];
    for t in 0..steps {
        poisson_step(strength, rng, &mut row);
        for (k, &b) in row.iter().enumerate() {
            train.set(t, k, b > 0.0);
        }
    }
    train
}

/// Pseudo membrane potentials of the deterministic encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicEncoderState {
    pub pseudo_potential: Vec<f64>,
}

impl DeterministicEncoderState {
    pub fn new(width: usize) -> Self {
        DeterministicEncoderState {
            pseudo_potential: vec![0.0; width],
        }
    }

    /// Integrates one step of stimulation; fires above 1 and subtracts 1.
    pub fn step(&mut self, strength: &[f64], out: &mut [f64]) {
        for ((v, &a), o) in self
            .pseudo_potential
            .iter_mut()
            .zip(strength)
            .zip(out.iter_mut())
        {
            *v += a;
            if *v > 1.0 {
                *o = 1.0;
                *v -= 1.0;
            } else {
                *o = 0.0;
            }
        }
    }
}

pub fn deterministic_encode(strength: &[f64], steps: usize) -> SpikeTrain {
    let width = strength.len();
    let mut state = DeterministicEncoderState::new(width);
    let mut train = SpikeTrain::zeros(steps, width);
    let mut row = vec![0.0; width];
    for t in 0..steps {
        state.step(strength, &mut row);
        for (k, &b) in row.iter().enumerate() {
            train.set(t, k, b > 0.0);
        }
    }
    train
}

/// Places generated spikes on the tape with a straight-through gradient to
/// the stimulation strengths, so receptive fields stay trainable.
struct StraightThrough {
    bits: Tensor,
}

impl CustomOp for StraightThrough {
    fn name(&self) -> &'static str {
        "spike_source"
    }

    fn forward(&self, _inputs: &[&Tensor]) -> Tensor {
        self.bits.clone()
    }

    fn backward(
        &self,
        _inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        vec![Some(grad.to_vec())]
    }
}

pub fn spike_source(tape: &mut Tape, strength: Var, bits: Tensor) -> Var {
    assert_eq!(
        tape.value(strength).shape(),
        bits.shape(),
        "spike_source: shape mismatch"
    );
    if tape.requires_grad(strength) {
        tape.custom(Box::new(StraightThrough { bits }), &[strength])
    } else {
        tape.constant(bits)
    }
}

/// Rate decoder: per action dimension, a weighted sum of its population's
/// firing rates, squashed into the action bounds with `tanh`.
#[derive(Clone, Debug)]
pub struct ActionDecoder {
    n_action: usize,
    j_per_pop: usize,
    /// `[M × J]`
    pub weights: Tensor,
    /// `[M]`
    pub biases: Tensor,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
}

impl ActionDecoder {
    pub fn new(
        weights: Tensor,
        biases: Tensor,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
    ) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::config("decoder weights must be [M × J]"));
        }
        let (m, j) = (weights.rows(), weights.cols());
        if biases.len() != m || action_low.len() != m || action_high.len() != m {
            return Err(Error::config(
                "decoder biases and bounds must have one entry per action",
            ));
        }
        for (lo, hi) in action_low.iter().zip(&action_high) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::config(format!("invalid action range [{lo}, {hi}]")));
            }
        }
        Ok(ActionDecoder {
            n_action: m,
            j_per_pop: j,
            weights,
            biases,
            action_low,
            action_high,
        })
    }

    pub fn n_action(&self) -> usize {
        self.n_action
    }

    pub fn j_per_pop(&self) -> usize {
        self.j_per_pop
    }

    pub fn action_low(&self) -> &[f64] {
        &self.action_low
    }

    pub fn action_high(&self) -> &[f64] {
        &self.action_high
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn half_ranges(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(l, h)| 0.5 * (h - l))
            .collect()
    }

    /// Pre-squash decoder output for a vector of firing rates `[M·J]`.
    pub fn raw(&self, rates: &[f64]) -> Vec<f64> {
        let j = self.j_per_pop;
        (0..self.n_action)
            .map(|m| {
                let w = &self.weights.data()[m * j..(m + 1) * j];
                let fr = &rates[m * j..(m + 1) * j];
                w.iter().zip(fr).map(|(w, r)| w * r).sum::<f64>() + self.biases.data()[m]
            })
            .collect()
    }

    /// Maps raw values into the action box.
    pub fn squash(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(m, &r)| {
                let (lo, hi) = (self.action_low[m], self.action_high[m]);
                let a = 0.5 * (lo + hi) + 0.5 * (hi - lo) * r.tanh();
                a.clamp(lo, hi)
            })
            .collect()
    }

    pub fn decode(&self, output: &SpikeTrain) -> Result<Vec<f64>> {
        if output.width() != self.n_action * self.j_per_pop {
            return Err(Error::config(format!(
                "output layer has {} neurons, decoder expects {}",
                output.width(),
                self.n_action * self.j_per_pop
            )));
        }
        Ok(self.squash(&self.raw(&output.rates())))
    }
}

/// Grouped weighted sum: `rates [B × M·J]`, `weights [M × J]`, `biases [M]` → `[B × M]`.
struct GroupLinear;

impl CustomOp for GroupLinear {
    fn name(&self) -> &'static str {
        "decode_rates"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (rates, w, bias) = (inputs[0], inputs[1], inputs[2]);
        let (m, j) = (w.rows(), w.cols());
        let rows = rates.rows();
        let mut out = Vec::with_capacity(rows * m);
        for b in 0..rows {
            let r = rates.row(b);
            for a in 0..m {
                let dot: f64 = (0..j).map(|k| w.data()[a * j + k] * r[a * j + k]).sum();
                out.push(dot + bias.data()[a]);
            }
        }
        Tensor::from_parts(vec![rows, m], out)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let (rates, w) = (inputs[0], inputs[1]);
        let (m, j) = (w.rows(), w.cols());
        let rows = rates.rows();
        let mut dr = vec![0.0; rates.len()];
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; m];
        for b in 0..rows {
            for a in 0..m {
                let g = grad[b * m + a];
                db[a] += g;
                for k in 0..j {
                    let idx = b * m * j + a * j + k;
                    dr[idx] = g * w.data()[a * j + k];
                    dw[a * j + k] += g * rates.data()[idx];
                }
            }
        }
        vec![Some(dr), Some(dw), Some(db)]
    }
}

/// Differentiable decoder pre-activation.
pub fn decode_raw_var(tape: &mut Tape, rates: Var, weights: Var, biases: Var) -> Var {
    tape.custom(Box::new(GroupLinear), &[rates, weights, biases])
}
