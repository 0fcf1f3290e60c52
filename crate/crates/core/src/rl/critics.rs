use super::actor::{collect_grads, register_all};
use super::mlp::Critic;
use super::optim::{polyak_update, Adam};
use super::state::{StateMap, StateWriter};
use crate::diff::{Tape, Tensor};
use crate::error::Result;
use crate::rng::StreamRng;

/// `y = r + γ·(1 − done)·next_value`, elementwise.
pub fn bellman_target(rewards: &[f64], dones: &[f64], gamma: f64, next_values: &[f64]) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(next_values)
        .map(|((r, d), q)| r + gamma * (1.0 - d) * q)
        .collect()
}

/// Two online critics, their targets, and one optimizer over both.
#[derive(Clone, Debug)]
pub struct TwinCritics {
    pub online: [Critic; 2],
    pub target: [Critic; 2],
    opt: Adam,
}

impl TwinCritics {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let q1 = Critic::new(state_dim, action_dim, hidden, rng)?;
        let q2 = Critic::new(state_dim, action_dim, hidden, rng)?;
        let mut params = q1.net.params();
        params.extend(q2.net.params());
        let opt = Adam::for_params(lr, &params);
        Ok(TwinCritics {
            target: [q1.clone(), q2.clone()],
            online: [q1, q2],
            opt,
        })
    }

    /// `min(Q'1, Q'2)` from the target critics.
    pub fn target_min(&self, states: &Tensor, actions: &Tensor) -> Vec<f64> {
        let a = self.target[0].q(states, actions);
        let b = self.target[1].q(states, actions);
        a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect()
    }

    /// One gradient step of both critics toward `y`; returns the summed MSE.
    pub fn regress(&mut self, states: &Tensor, actions: &Tensor, y: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let p1 = self.online[0].net.params();
        let p2 = self.online[1].net.params();
        let v1 = register_all(&mut tape, &p1, true);
        let v2 = register_all(&mut tape, &p2, true);
        let s = tape.constant(states.clone());
        let a = tape.constant(actions.clone());
        let target = tape.constant(Tensor::new(vec![y.len(), 1], y.to_vec())?);
        let q1 = self.online[0].q_var(&mut tape, &v1, s, a);
        let q2 = self.online[1].q_var(&mut tape, &v2, s, a);
        let d1 = tape.sub(q1, target);
        let d2 = tape.sub(q2, target);
        let s1 = tape.square(d1);
        let s2 = tape.square(d2);
        let l1 = tape.mean(s1);
        let l2 = tape.mean(s2);
        let loss = tape.add(l1, l2);
        let grads = tape.backward(loss)?;
        let mut g = collect_grads(&grads, &v1, &p1);
        g.extend(collect_grads(&grads, &v2, &p2));
        let value = tape.value(loss).item();
        drop(tape);

        let [c1, c2] = &mut self.online;
        let mut params = c1.net.params_mut();
        params.extend(c2.net.params_mut());
        let trainable = vec![true; params.len()];
        self.opt.step(params, &g, &trainable);
        Ok(value)
    }

    pub fn soft_update(&mut self, rate: f64) {
        for k in 0..2 {
            polyak_update(
                self.target[k].net.params_mut(),
                self.online[k].net.params(),
                rate,
            );
        }
    }

    pub fn export(&self, prefix: &str, out: &mut StateWriter) {
        for k in 0..2 {
            out.tensors(&format!("{prefix}.q{k}"), &self.online[k].net.params());
            out.tensors(
                &format!("{prefix}.q{k}_target"),
                &self.target[k].net.params(),
            );
        }
        out.arrays(&format!("{prefix}.opt"), self.opt.export());
    }

    pub fn import(&mut self, prefix: &str, map: &mut StateMap) -> Result<()> {
        for k in 0..2 {
            map.tensors(&format!("{prefix}.q{k}"), self.online[k].net.params_mut())?;
            map.tensors(
                &format!("{prefix}.q{k}_target"),
                self.target[k].net.params_mut(),
            )?;
        }
        let n = 2 * (self.online[0].net.params().len() + self.online[1].net.params().len()) + 1;
        self.opt.import(map.arrays(&format!("{prefix}.opt"), n)?)
    }
}
