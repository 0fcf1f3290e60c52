use super::mlp::Mlp;
use crate::diff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::snn::{ActorVariant, SnnConfig, SpikingActor};

/// Policy network: spiking or artificial. Both produce a pre-squash output
/// `[B × M]` that is mapped into the action box with `tanh`.
#[derive(Clone, Debug)]
pub enum Actor {
    Spiking(SpikingActor),
    Artificial(ArtificialActor),
}

/// ReLU network of the same depth and width as the spiking actor.
#[derive(Clone, Debug)]
pub struct ArtificialActor {
    pub net: Mlp,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
}

impl Actor {
    /// Builds the actor for `variant`. Weights come from `init`; dendritic mask
    /// seeds from `mask_seed`.
    pub fn build(
        variant: ActorVariant,
        snn: &SnnConfig,
        state_dim: usize,
        action_low: &[f64],
        action_high: &[f64],
        init: &mut StreamRng,
        mask_seed: impl FnMut() -> u64,
    ) -> Result<Actor> {
        if variant.is_spiking() {
            if snn.state_low.len() != state_dim {
                return Err(Error::config(format!(
                    "encoder range covers {} state dimensions, environment has {state_dim}",
                    snn.state_low.len()
                )));
            }
            return Ok(Actor::Spiking(SpikingActor::new(
                snn,
                variant,
                action_low,
                action_high,
                init,
                mask_seed,
            )?));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(&snn.hidden);
        sizes.push(action_low.len());
        Ok(Actor::Artificial(ArtificialActor {
            net: Mlp::new(&sizes, init)?,
            action_low: action_low.to_vec(),
            action_high: action_high.to_vec(),
        }))
    }

    pub fn variant(&self) -> ActorVariant {
        match self {
            Actor::Spiking(s) => s.variant(),
            Actor::Artificial(_) => ActorVariant::Aan,
        }
    }

    pub fn action_low(&self) -> &[f64] {
        match self {
            Actor::Spiking(s) => s.decoder.action_low(),
            Actor::Artificial(a) => &a.action_low,
        }
    }

    pub fn action_high(&self) -> &[f64] {
        match self {
            Actor::Spiking(s) => s.decoder.action_high(),
            Actor::Artificial(a) => &a.action_high,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_low().len()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Actor::Spiking(s) => s.params(),
            Actor::Artificial(a) => a.net.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Actor::Spiking(s) => s.params_mut(),
            Actor::Artificial(a) => a.net.params_mut(),
        }
    }

    pub fn trainable(&self) -> Vec<bool> {
        match self {
            Actor::Spiking(s) => s.trainable(),
            Actor::Artificial(a) => vec![true; a.net.params().len()],
        }
    }

    pub fn mask_seeds(&self) -> Vec<u64> {
        match self {
            Actor::Spiking(s) => s.mask_seeds(),
            Actor::Artificial(_) => Vec::new(),
        }
    }

    pub fn project(&mut self) {
        if let Actor::Spiking(s) = self {
            s.project();
        }
    }

    /// Places parameters on the tape: tracked when `track` and trainable, constant otherwise.
    pub fn register(&self, tape: &mut Tape, track: bool) -> Vec<Var> {
        register(tape, &self.params(), &self.trainable(), track)
    }

    /// Pre-squash output for a `[B × N]` batch. `rng` feeds stochastic spike coding.
    pub fn raw_var(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        states: &Tensor,
        rng: &mut StreamRng,
    ) -> Result<Var> {
        match self {
            Actor::Spiking(s) => Ok(s.forward_var(tape, pv, states, rng, false)?.raw),
            Actor::Artificial(a) => {
                let x = tape.constant(states.clone());
                Ok(a.net.forward_var(tape, pv, x))
            }
        }
    }

    /// `mid + half · tanh(raw)`, per action dimension.
    pub fn squash_var(&self, tape: &mut Tape, raw: Var) -> Var {
        let rows = tape.value(raw).rows();
        let (mid, half) = self.box_rows(rows);
        let t = tape.tanh(raw);
        let half = tape.constant(half);
        let scaled = tape.mul(t, half);
        let mid = tape.constant(mid);
        tape.add(scaled, mid)
    }

    /// Midpoints and half ranges tiled to `rows` rows.
    pub fn box_rows(&self, rows: usize) -> (Tensor, Tensor) {
        let (lo, hi) = (self.action_low(), self.action_high());
        let m = lo.len();
        let mut mid = Vec::with_capacity(rows * m);
        let mut half = Vec::with_capacity(rows * m);
        for _ in 0..rows {
            for k in 0..m {
                mid.push(0.5 * (lo[k] + hi[k]));
                half.push(0.5 * (hi[k] - lo[k]));
            }
        }
        (
            Tensor::from_parts(vec![rows, m], mid),
            Tensor::from_parts(vec![rows, m], half),
        )
    }

    /// Deterministic action for one state.
    pub fn act(&self, state: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        let raw = self.raw(state, rng)?;
        Ok(self.squash(&raw))
    }

    pub fn raw(&self, state: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("state contains a non-finite value"));
        }
        let mut tape = Tape::new();
        let pv = self.register(&mut tape, false);
        let states = Tensor::new(vec![1, state.len()], state.to_vec())?;
        let raw = self.raw_var(&mut tape, &pv, &states, rng)?;
        Ok(tape.value(raw).data().to_vec())
    }

    pub fn squash(&self, raw: &[f64]) -> Vec<f64> {
        let (lo, hi) = (self.action_low(), self.action_high());
        raw.iter()
            .enumerate()
            .map(|(k, r)| {
                (0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * r.tanh()).clamp(lo[k], hi[k])
            })
            .collect()
    }
}

pub(crate) fn register(
    tape: &mut Tape,
    params: &[&Tensor],
    trainable: &[bool],
    track: bool,
) -> Vec<Var> {
    params
        .iter()
        .zip(trainable)
        .map(|(p, &t)| {
            if track && t {
                tape.input((*p).clone())
            } else {
                tape.constant((*p).clone())
            }
        })
        .collect()
}

pub(crate) fn register_all(tape: &mut Tape, params: &[&Tensor], track: bool) -> Vec<Var> {
    params
        .iter()
        .map(|p| {
            if track {
                tape.input((*p).clone())
            } else {
                tape.constant((*p).clone())
            }
        })
        .collect()
}

pub(crate) fn collect_grads(
    grads: &crate::diff::Gradients,
    vars: &[Var],
    params: &[&Tensor],
) -> Vec<Vec<f64>> {
    vars.iter()
        .zip(params)
        .map(|(v, p)| grads.get_or_zeros(*v, p.len()))
        .collect()
}
