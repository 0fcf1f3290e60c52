use rand_distr::{Distribution, StandardNormal};

use super::actor::{collect_grads, register_all, Actor};
use super::critics::{bellman_target, TwinCritics};
use super::optim::{polyak_update, Adam};
use super::state::{StateMap, StateWriter};
use super::{TrainConfig, UpdateStats};
use crate::diff::{Tape, Tensor};
use crate::error::Result;
use crate::rl::buffer::Batch;
use crate::rng::StreamRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Td3Config {
    pub policy_delay: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub exploration_noise: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            exploration_noise: 0.1,
        }
    }
}

/// Twin delayed deterministic policy gradient. Noise scales are fractions of
/// each action dimension's half range.
#[derive(Clone, Debug)]
pub struct Td3 {
    pub train: TrainConfig,
    pub cfg: Td3Config,
    pub actor: Actor,
    pub actor_target: Actor,
    pub critics: TwinCritics,
    actor_opt: Adam,
    updates: u64,
}

impl Td3 {
    pub fn new(train: TrainConfig, cfg: Td3Config, actor: Actor, critics: TwinCritics) -> Self {
        let actor_opt = Adam::for_params(train.actor_lr, &actor.params());
        Td3 {
            train,
            cfg,
            actor_target: actor.clone(),
            actor,
            critics,
            actor_opt,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn half_ranges(&self) -> Vec<f64> {
        let (lo, hi) = (self.actor.action_low(), self.actor.action_high());
        lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    /// Policy action plus Gaussian exploration noise, clamped to the box.
    pub fn explore(
        &self,
        state: &[f64],
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        let mut a = self.actor.act(state, enc)?;
        let half = self.half_ranges();
        let (lo, hi) = (self.actor.action_low(), self.actor.action_high());
        for k in 0..a.len() {
            let e: f64 = StandardNormal.sample(noise);
            a[k] = (a[k] + self.cfg.exploration_noise * half[k] * e).clamp(lo[k], hi[k]);
        }
        Ok(a)
    }

    /// Smoothed target action `clip(μ'(s') + clip(ε, −c, c), low, high)`.
    pub fn target_actions(
        &self,
        next_states: &Tensor,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pv = self.actor_target.register(&mut tape, false);
        let raw = self
            .actor_target
            .raw_var(&mut tape, &pv, next_states, enc)?;
        let a = self.actor_target.squash_var(&mut tape, raw);
        let mut out = tape.value(a).clone();
        let half = self.half_ranges();
        let (lo, hi) = (self.actor.action_low(), self.actor.action_high());
        let m = half.len();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let k = i % m;
            let e: f64 = StandardNormal.sample(noise);
            let clip = self.cfg.noise_clip * half[k];
            let eps = (self.cfg.target_noise * half[k] * e).clamp(-clip, clip);
            *v = (*v + eps).clamp(lo[k], hi[k]);
        }
        Ok(out)
    }

    /// Critic regression targets `r + γ(1 − done)·min(Q'1, Q'2)(s', ã')`.
    pub fn targets(
        &self,
        batch: &Batch,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        let next_a = self.target_actions(&batch.next_states, noise, enc)?;
        let next_q = self.critics.target_min(&batch.next_states, &next_a);
        Ok(bellman_target(
            &batch.rewards,
            &batch.dones,
            self.train.gamma,
            &next_q,
        ))
    }

    pub fn update(
        &mut self,
        batch: &Batch,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<UpdateStats> {
        let y = self.targets(batch, noise, enc)?;
        let critic_loss = self.critics.regress(&batch.states, &batch.actions, &y)?;
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % self.cfg.policy_delay.max(1) as u64 == 0 {
            actor_loss = Some(self.actor_step(&batch.states, enc)?);
            polyak_update(
                self.actor_target.params_mut(),
                self.actor.params(),
                self.train.polyak,
            );
            self.critics.soft_update(self.train.polyak);
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
        })
    }

    /// Ascends `Q1(s, μ(s))` with the critic held fixed.
    fn actor_step(&mut self, states: &Tensor, enc: &mut StreamRng) -> Result<f64> {
        let mut tape = Tape::new();
        let pv = self.actor.register(&mut tape, true);
        let qp = self.critics.online[0].net.params();
        let qv = register_all(&mut tape, &qp, false);
        let raw = self.actor.raw_var(&mut tape, &pv, states, enc)?;
        let a = self.actor.squash_var(&mut tape, raw);
        let s = tape.constant(states.clone());
        let q = self.critics.online[0].q_var(&mut tape, &qv, s, a);
        let mean_q = tape.mean(q);
        let loss = tape.neg(mean_q);
        let grads = tape.backward(loss)?;
        let g = collect_grads(&grads, &pv, &self.actor.params());
        let value = tape.value(loss).item();
        drop(tape);
        let trainable = self.actor.trainable();
        self.actor_opt.step(self.actor.params_mut(), &g, &trainable);
        self.actor.project();
        Ok(value)
    }

    pub fn export(&self, out: &mut StateWriter) {
        out.tensors("actor", &self.actor.params());
        out.tensors("actor_target", &self.actor_target.params());
        out.arrays("actor_opt", self.actor_opt.export());
        self.critics.export("critic", out);
        out.array("updates", vec![self.updates as f64]);
    }

    pub fn import(&mut self, map: &mut StateMap) -> Result<()> {
        map.tensors("actor", self.actor.params_mut())?;
        map.tensors("actor_target", self.actor_target.params_mut())?;
        let n = 2 * self.actor.params().len() + 1;
        self.actor_opt.import(map.arrays("actor_opt", n)?)?;
        self.critics.import("critic", map)?;
        self.updates = map.take_len("updates", 1)?[0] as u64;
        Ok(())
    }
}
