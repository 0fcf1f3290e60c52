//! Built-in continuous-control tasks with a common reset/step contract.

mod pendulum;
mod reacher;

use std::fmt;
use std::str::FromStr;

pub use pendulum::{pendulum_step, wrap_angle, Pendulum, PendulumState};
pub use reacher::{point_reacher_step, PointReacher, ReacherState};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
    /// Integration step, seconds.
    pub dt: f64,
    /// Typical observation range per dimension, used to place receptive fields.
    pub obs_low: Vec<f64>,
    pub obs_high: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The task reached a terminal state; bootstrapping stops here.
    pub terminal: bool,
    /// The episode is over, either terminally or by the step limit.
    pub done: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Replaces the environment's random stream.
    fn seed(&mut self, seed: u64);

    /// Starts a new episode, drawing the initial state from the environment's stream.
    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<Step>;

    fn observation(&self) -> Vec<f64>;

    /// Physical state and step counter, for checkpoints.
    fn snapshot(&self) -> Vec<f64>;

    fn restore(&mut self, snapshot: &[f64]) -> Result<()>;

    fn rng(&self) -> &StreamRng;

    fn set_rng(&mut self, rng: StreamRng);

    /// Reseeds, then resets.
    fn reset_with_seed(&mut self, seed: u64) -> Vec<f64> {
        self.seed(seed);
        self.reset()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Pendulum,
    Reacher,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Reacher => "reacher",
        }
    }

    pub fn make(self, seed: u64) -> Box<dyn Environment> {
        match self {
            EnvKind::Pendulum => Box::new(Pendulum::new(seed)),
            EnvKind::Reacher => Box::new(PointReacher::new(seed)),
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::Pendulum => pendulum::spec(),
            EnvKind::Reacher => reacher::spec(),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "reacher" => Ok(EnvKind::Reacher),
            other => Err(format!(
                "unknown environment `{other}` (expected pendulum or reacher)"
            )),
        }
    }
}

/// Rejects non-finite actions and clamps the rest into the box.
pub(crate) fn clamp_action(action: &[f64], spec: &EnvSpec) -> Result<Vec<f64>> {
    if action.len() != spec.action_dim {
        return Err(Error::config(format!(
            "action has {} entries, environment expects {}",
            action.len(),
            spec.action_dim
        )));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::input("action contains a non-finite value"));
    }
    Ok(action
        .iter()
        .enumerate()
        .map(|(i, a)| a.clamp(spec.action_low[i], spec.action_high[i]))
        .collect())
}

pub(crate) fn check_snapshot(snapshot: &[f64], len: usize, name: &str) -> Result<()> {
    if snapshot.len() != len || snapshot.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "{name} snapshot must hold {len} finite values"
        )));
    }
    Ok(())
}
