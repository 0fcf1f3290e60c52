use std::f64::consts::{LN_2, PI};

use rand_distr::{Distribution, StandardNormal};

use super::actor::{collect_grads, register_all, Actor};
use super::critics::{bellman_target, TwinCritics};
use super::optim::Adam;
use super::state::{StateMap, StateWriter};
use super::{TrainConfig, UpdateStats};
use crate::diff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::rl::buffer::Batch;
use crate::rng::StreamRng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SacConfig {
    pub alpha: f64,
    pub auto_alpha: bool,
    pub alpha_lr: f64,
    pub log_std_init: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            alpha: 0.2,
            auto_alpha: false,
            alpha_lr: 3e-4,
            log_std_init: -0.5,
        }
    }
}

/// Log density of `a = tanh(u)` where `u ~ N(mean, exp(log_std)²)`, summed over
/// dimensions. The action-box affine map is a constant shift and is omitted.
pub fn squashed_gaussian_log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..u.len() {
        let ls = log_std[k].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let e = (u[k] - mean[k]) / ls.exp();
        total += -0.5 * e * e - ls - 0.5 * (2.0 * PI).ln();
        total -= 2.0 * (LN_2 - u[k] - softplus(-2.0 * u[k]));
    }
    total
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Soft actor-critic. The actor output is the Gaussian mean; the log standard
/// deviation is a state-independent trainable vector.
#[derive(Clone, Debug)]
pub struct Sac {
    pub train: TrainConfig,
    pub cfg: SacConfig,
    pub actor: Actor,
    pub log_std: Tensor,
    pub critics: TwinCritics,
    pub log_alpha: f64,
    actor_opt: Adam,
    alpha_opt: Adam,
    updates: u64,
}

struct Sampled {
    action: Var,
    log_prob: Var,
}

impl Sac {
    pub fn new(train: TrainConfig, cfg: SacConfig, actor: Actor, critics: TwinCritics) -> Self {
        let m = actor.action_dim();
        let log_std = Tensor::full(&[m], cfg.log_std_init);
        let mut sizes: Vec<usize> = actor.params().iter().map(|p| p.len()).collect();
        sizes.push(m);
        let actor_opt = Adam::new(train.actor_lr, &sizes);
        let alpha_opt = Adam::new(cfg.alpha_lr, &[1]);
        Sac {
            log_alpha: cfg.alpha.ln(),
            train,
            cfg,
            actor,
            log_std,
            critics,
            actor_opt,
            alpha_opt,
            updates: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Samples `a = mid + half·tanh(raw + σ·ε)` for a batch and its log density.
    fn sample_var(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        log_std: Var,
        states: &Tensor,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Sampled> {
        let raw = self.actor.raw_var(tape, pv, states, enc)?;
        let rows = states.rows();
        let m = self.actor.action_dim();
        let eps: Vec<f64> = (0..rows * m)
            .map(|_| StandardNormal.sample(noise))
            .collect();
        let ls_rows = tape.broadcast_rows(log_std, rows);
        let ls = tape.clamp(ls_rows, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(ls);
        let gauss_const: Vec<f64> = eps
            .iter()
            .map(|e| -0.5 * e * e - 0.5 * (2.0 * PI).ln())
            .collect();
        let eps = tape.constant(Tensor::new(vec![rows, m], eps)?);
        let spread = tape.mul(std, eps);
        let u = tape.add(raw, spread);
        let action = self.actor.squash_var(tape, u);

        let gc = tape.constant(Tensor::new(vec![rows, m], gauss_const)?);
        let gauss = tape.sub(gc, ls);
        let neg2u = tape.scale(u, -2.0);
        let sp = tape.softplus(neg2u);
        let u_sp = tape.add(u, sp);
        let neg = tape.neg(u_sp);
        let inner = tape.add_scalar(neg, LN_2);
        let corr = tape.scale(inner, 2.0);
        let per_dim = tape.sub(gauss, corr);
        let log_prob = tape.sum_cols(per_dim);
        Ok(Sampled { action, log_prob })
    }

    /// Stochastic action for one state.
    pub fn explore(
        &self,
        state: &[f64],
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        let raw = self.actor.raw(state, enc)?;
        let u: Vec<f64> = raw
            .iter()
            .zip(self.log_std.data())
            .map(|(r, ls)| {
                let e: f64 = StandardNormal.sample(noise);
                r + ls.clamp(LOG_STD_MIN, LOG_STD_MAX).exp() * e
            })
            .collect();
        Ok(self.actor.squash(&u))
    }

    /// Soft targets `r + γ(1 − done)·(min(Q'1, Q'2)(s', a') − α·log π(a'|s'))`.
    pub fn targets(
        &self,
        batch: &Batch,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        let alpha = self.alpha();
        let (next_a, next_logp) = {
            let mut tape = Tape::new();
            let pv = self.actor.register(&mut tape, false);
            let ls = tape.constant(self.log_std.clone());
            let s = self.sample_var(&mut tape, &pv, ls, &batch.next_states, noise, enc)?;
            (
                tape.value(s.action).clone(),
                tape.value(s.log_prob).data().to_vec(),
            )
        };
        let next_q = self.critics.target_min(&batch.next_states, &next_a);
        let soft: Vec<f64> = next_q
            .iter()
            .zip(&next_logp)
            .map(|(q, lp)| q - alpha * lp)
            .collect();
        Ok(bellman_target(
            &batch.rewards,
            &batch.dones,
            self.train.gamma,
            &soft,
        ))
    }

    pub fn update(
        &mut self,
        batch: &Batch,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<UpdateStats> {
        let alpha = self.alpha();
        let y = self.targets(batch, noise, enc)?;
        let critic_loss = self.critics.regress(&batch.states, &batch.actions, &y)?;

        let (actor_loss, mean_logp) = self.actor_step(&batch.states, noise, enc, alpha)?;
        if self.cfg.auto_alpha {
            let target_entropy = -(self.actor.action_dim() as f64);
            let g = -(mean_logp + target_entropy);
            let mut la = Tensor::scalar(self.log_alpha);
            self.alpha_opt.step(vec![&mut la], &[vec![g]], &[true]);
            self.log_alpha = la.item();
        }
        self.critics.soft_update(self.train.polyak);
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            actor_loss: Some(actor_loss),
        })
    }

    /// Minimises `E[α·log π(a|s) − min(Q1, Q2)(s, a)]`.
    fn actor_step(
        &mut self,
        states: &Tensor,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
        alpha: f64,
    ) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let pv = self.actor.register(&mut tape, true);
        let ls = tape.input(self.log_std.clone());
        let p1 = self.critics.online[0].net.params();
        let p2 = self.critics.online[1].net.params();
        let q1v = register_all(&mut tape, &p1, false);
        let q2v = register_all(&mut tape, &p2, false);
        let sampled = self.sample_var(&mut tape, &pv, ls, states, noise, enc)?;
        let s = tape.constant(states.clone());
        let q1 = self.critics.online[0].q_var(&mut tape, &q1v, s, sampled.action);
        let q2 = self.critics.online[1].q_var(&mut tape, &q2v, s, sampled.action);
        let q = tape.min(q1, q2);
        let scaled = tape.scale(sampled.log_prob, alpha);
        let diff = tape.sub(scaled, q);
        let loss = tape.mean(diff);
        let grads = tape.backward(loss)?;

        let params = self.actor.params();
        let mut g = collect_grads(&grads, &pv, &params);
        g.push(grads.get_or_zeros(ls, self.log_std.len()));
        let value = tape.value(loss).item();
        let lp = tape.value(sampled.log_prob).data();
        let mean_logp = lp.iter().sum::<f64>() / lp.len() as f64;
        drop(params);
        drop(tape);

        let mut trainable = self.actor.trainable();
        trainable.push(true);
        let mut targets = self.actor.params_mut();
        targets.push(&mut self.log_std);
        self.actor_opt.step(targets, &g, &trainable);
        self.actor.project();
        Ok((value, mean_logp))
    }

    pub fn export(&self, out: &mut StateWriter) {
        out.tensors("actor", &self.actor.params());
        out.array("log_std", self.log_std.data().to_vec());
        out.arrays("actor_opt", self.actor_opt.export());
        self.critics.export("critic", out);
        out.array("log_alpha", vec![self.log_alpha]);
        out.arrays("alpha_opt", self.alpha_opt.export());
        out.array("updates", vec![self.updates as f64]);
    }

    pub fn import(&mut self, map: &mut StateMap) -> Result<()> {
        map.tensors("actor", self.actor.params_mut())?;
        let ls = map.take_len("log_std", self.log_std.len())?;
        self.log_std.data_mut().copy_from_slice(&ls);
        let n = 2 * (self.actor.params().len() + 1) + 1;
        self.actor_opt.import(map.arrays("actor_opt", n)?)?;
        self.critics.import("critic", map)?;
        self.log_alpha = map.take_len("log_alpha", 1)?[0];
        self.alpha_opt.import(map.arrays("alpha_opt", 3)?)?;
        self.updates = map.take_len("updates", 1)?[0] as u64;
        Ok(())
    }
}
