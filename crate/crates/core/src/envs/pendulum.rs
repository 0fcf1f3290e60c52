use std::f64::consts::PI;

use rand::Rng;

use super::{check_snapshot, clamp_action, EnvSpec, Environment, Step};
use crate::error::Result;
use crate::rng::{substream, Stream, StreamRng};

const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const MAX_STEPS: usize = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        state_dim: 3,
        action_dim: 1,
        action_low: vec![-MAX_TORQUE],
        action_high: vec![MAX_TORQUE],
        max_episode_steps: MAX_STEPS,
        dt: DT,
        obs_low: vec![-1.0, -1.0, -MAX_SPEED],
        obs_high: vec![1.0, 1.0, MAX_SPEED],
    }
}

/// Angle from upright (radians) and angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut x = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// One integration step under torque `u` (already clamped). The reward is
/// charged on the state the action was taken in.
pub fn pendulum_step(state: PendulumState, u: f64) -> (PendulumState, f64) {
    let th = wrap_angle(state.theta);
    let cost = th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u;
    let accel = 3.0 * G / (2.0 * LENGTH) * state.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let theta_dot = (state.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let theta = state.theta + theta_dot * DT;
    (PendulumState { theta, theta_dot }, -cost)
}

/// Swing-up pendulum: observation `(cos θ, sin θ, θ̇)`, torque in `[-2, 2]`.
pub struct Pendulum {
    spec: EnvSpec,
    state: PendulumState,
    steps: usize,
    rng: StreamRng,
}

impl Pendulum {
    pub fn new(seed: u64) -> Self {
        Pendulum {
            spec: spec(),
            state: PendulumState {
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
            rng: substream(seed, Stream::Env as u64),
        }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) {
        self.rng = substream(seed, Stream::Env as u64);
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = PendulumState {
            theta: self.rng.random_range(-PI..PI),
            theta_dot: self.rng.random_range(-1.0..1.0),
        };
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let u = clamp_action(action, &self.spec)?[0];
        let (next, reward) = pendulum_step(self.state, u);
        self.state = next;
        self.steps += 1;
        Ok(Step {
            observation: self.observation(),
            reward,
            terminal: false,
            done: self.steps >= MAX_STEPS,
        })
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.state.theta.cos(),
            self.state.theta.sin(),
            self.state.theta_dot,
        ]
    }

    fn snapshot(&self) -> Vec<f64> {
        vec![self.state.theta, self.state.theta_dot, self.steps as f64]
    }

    fn restore(&mut self, snapshot: &[f64]) -> Result<()> {
        check_snapshot(snapshot, 3, "pendulum")?;
        self.state = PendulumState {
            theta: snapshot[0],
            theta_dot: snapshot[1],
        };
        self.steps = snapshot[2] as usize;
        Ok(())
    }

    fn rng(&self) -> &StreamRng {
        &self.rng
    }

    fn set_rng(&mut self, rng: StreamRng) {
        self.rng = rng;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_is_a_fixed_point() {
        let s = PendulumState {
            theta: 0.0,
            theta_dot: 0.0,
        };
        let (next, r) = pendulum_step(s, 0.0);
        assert_eq!(r, 0.0);
        assert_eq!(next, s);
    }

    #[test]
    fn hanging_down_costs_pi_squared() {
        let (_, r) = pendulum_step(
            PendulumState {
                theta: PI,
                theta_dot: 0.0,
            },
            0.0,
        );
        assert_eq!(r, -PI * PI);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(0.25 - 4.0 * PI) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn episode_ends_at_step_limit() {
        let mut env = Pendulum::new(0);
        env.reset();
        for i in 1..=MAX_STEPS {
            let step = env.step(&[0.5]).unwrap();
            assert_eq!(step.done, i == MAX_STEPS);
            assert!(!step.terminal);
        }
    }

    #[test]
    fn non_finite_torque_rejected() {
        let mut env = Pendulum::new(0);
        env.reset();
        assert!(env.step(&[f64::NAN]).is_err());
    }

    #[test]
    fn velocity_is_clamped() {
        let mut env = Pendulum::new(3);
        env.reset();
        for _ in 0..MAX_STEPS {
            let s = env.step(&[100.0]).unwrap();
            assert!(s.observation[2].abs() <= MAX_SPEED);
        }
    }
}
