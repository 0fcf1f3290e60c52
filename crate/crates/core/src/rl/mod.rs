//! Off-policy actor-critic training: replay, optimizers, TD3 and SAC.

mod actor;
mod buffer;
mod critics;
mod mlp;
mod optim;
mod sac;
mod state;
mod td3;

use std::fmt;
use std::str::FromStr;

pub use actor::{Actor, ArtificialActor};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use critics::{bellman_target, TwinCritics};
pub use mlp::{Critic, Mlp};
pub use optim::{polyak_update, Adam};
pub use sac::{squashed_gaussian_log_prob, Sac, SacConfig, LOG_STD_MAX, LOG_STD_MIN};
pub use state::{StateMap, StateWriter};
pub use td3::{Td3, Td3Config};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Settings shared by both algorithms.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub polyak: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub warmup: usize,
    pub buffer_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            polyak: 0.005,
            batch_size: 256,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            warmup: 1000,
            buffer_capacity: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// `None` on steps where the policy was not updated.
    pub actor_loss: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Td3,
    Sac,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Td3, Algorithm::Sac];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "td3" => Ok(Algorithm::Td3),
            "sac" => Ok(Algorithm::Sac),
            other => Err(format!("unknown algorithm `{other}` (expected td3 or sac)")),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Agent {
    Td3(Td3),
    Sac(Sac),
}

impl Agent {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Td3(_) => Algorithm::Td3,
            Agent::Sac(_) => Algorithm::Sac,
        }
    }

    pub fn actor(&self) -> &Actor {
        match self {
            Agent::Td3(a) => &a.actor,
            Agent::Sac(a) => &a.actor,
        }
    }

    pub fn actor_mut(&mut self) -> &mut Actor {
        match self {
            Agent::Td3(a) => &mut a.actor,
            Agent::Sac(a) => &mut a.actor,
        }
    }

    pub fn critics(&self) -> &TwinCritics {
        match self {
            Agent::Td3(a) => &a.critics,
            Agent::Sac(a) => &a.critics,
        }
    }

    pub fn train_config(&self) -> &TrainConfig {
        match self {
            Agent::Td3(a) => &a.train,
            Agent::Sac(a) => &a.train,
        }
    }

    /// Exploratory action used while collecting experience.
    pub fn explore(
        &self,
        state: &[f64],
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        match self {
            Agent::Td3(a) => a.explore(state, noise, enc),
            Agent::Sac(a) => a.explore(state, noise, enc),
        }
    }

    /// Deterministic action used for evaluation.
    pub fn greedy(&self, state: &[f64], enc: &mut StreamRng) -> Result<Vec<f64>> {
        self.actor().act(state, enc)
    }

    pub fn update(
        &mut self,
        batch: &Batch,
        noise: &mut StreamRng,
        enc: &mut StreamRng,
    ) -> Result<UpdateStats> {
        match self {
            Agent::Td3(a) => a.update(batch, noise, enc),
            Agent::Sac(a) => a.update(batch, noise, enc),
        }
    }

    pub fn export(&self, out: &mut StateWriter) {
        match self {
            Agent::Td3(a) => a.export(out),
            Agent::Sac(a) => a.export(out),
        }
    }

    pub fn import(&mut self, map: &mut StateMap) -> Result<()> {
        match self {
            Agent::Td3(a) => a.import(map),
            Agent::Sac(a) => a.import(map),
        }
    }
}

/// Runs `episodes` full episodes with `policy` and returns each undiscounted return.
pub fn run_episodes(
    env: &mut dyn Environment,
    episodes: usize,
    mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Contract("at least one episode is required".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let action = policy(&obs)?;
            let step = env.step(&action)?;
            total += step.reward;
            obs = step.observation;
            if step.done {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
