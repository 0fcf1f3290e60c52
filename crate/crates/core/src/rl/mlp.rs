use crate::diff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{uniform_tensor, StreamRng};

/// Fully connected ReLU network with a linear output layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    /// `[w0, b0, w1, b1, ...]`, `w_l: [out × in]`.
    params: Vec<Tensor>,
}

impl Mlp {
    /// Uniform fan-in initialisation, `±1/sqrt(fan_in)`, for weights and biases.
    pub fn new(sizes: &[usize], rng: &mut StreamRng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for pair in sizes.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            params.push(uniform_tensor(rng, &[pair[1], pair[0]], bound));
            params.push(uniform_tensor(rng, &[pair[1]], bound));
        }
        Ok(Mlp { params })
    }

    pub fn from_params(params: Vec<Tensor>) -> Result<Self> {
        if params.is_empty() || params.len() % 2 != 0 {
            return Err(Error::config("an MLP needs weight/bias pairs"));
        }
        Ok(Mlp { params })
    }

    pub fn input_dim(&self) -> usize {
        self.params[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.params[self.params.len() - 2].rows()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.params.iter().collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().collect()
    }

    pub fn forward_var(&self, tape: &mut Tape, pv: &[Var], x: Var) -> Var {
        let layers = pv.len() / 2;
        let mut h = x;
        for l in 0..layers {
            h = tape.linear(h, pv[2 * l], pv[2 * l + 1]);
            if l + 1 < layers {
                h = tape.relu(h);
            }
        }
        h
    }

    /// Plain evaluation of a `[B × in]` batch.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut tape = Tape::new();
        let pv: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let xv = tape.constant(x.clone());
        let y = self.forward_var(&mut tape, &pv, xv);
        tape.value(y).clone()
    }
}

/// Action-value network `Q(s, a)` over the concatenated input.
#[derive(Clone, Debug)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Critic {
            net: Mlp::new(&sizes, rng)?,
        })
    }

    /// `[B × 1]` action values.
    pub fn q_var(&self, tape: &mut Tape, pv: &[Var], states: Var, actions: Var) -> Var {
        let x = tape.concat_cols(states, actions);
        self.net.forward_var(tape, pv, x)
    }

    pub fn q(&self, states: &Tensor, actions: &Tensor) -> Vec<f64> {
        let mut tape = Tape::new();
        let pv: Vec<Var> = self
            .net
            .params()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let s = tape.constant(states.clone());
        let a = tape.constant(actions.clone());
        let q = self.q_var(&mut tape, &pv, s, a);
        tape.value(q).data().to_vec()
    }
}
