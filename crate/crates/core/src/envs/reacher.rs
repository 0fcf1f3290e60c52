use rand::Rng;

use super::{check_snapshot, clamp_action, EnvSpec, Environment, Step};
use crate::error::Result;
use crate::rng::{substream, Stream, StreamRng};

const DT: f64 = 0.05;
const DAMPING: f64 = 0.9;
const FORCE_GAIN: f64 = 10.0;
const GOAL_RADIUS: f64 = 0.05;
const MAX_STEPS: usize = 150;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        state_dim: 6,
        action_dim: 2,
        action_low: vec![-1.0; 2],
        action_high: vec![1.0; 2],
        max_episode_steps: MAX_STEPS,
        dt: DT,
        obs_low: vec![-1.5, -1.5, -3.0, -3.0, -1.0, -1.0],
        obs_high: vec![1.5, 1.5, 3.0, 3.0, 1.0, 1.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReacherState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub goal: [f64; 2],
}

impl ReacherState {
    pub fn distance(&self) -> f64 {
        (self.position[0] - self.goal[0]).hypot(self.position[1] - self.goal[1])
    }
}

/// Damped double integrator. Returns the next state, reward and whether the goal was reached.
pub fn point_reacher_step(state: ReacherState, force: [f64; 2]) -> (ReacherState, f64, bool) {
    let mut next = state;
    for k in 0..2 {
        next.velocity[k] = DAMPING * state.velocity[k] + DT * force[k] * FORCE_GAIN;
        next.position[k] = state.position[k] + DT * next.velocity[k];
    }
    let dist = next.distance();
    let effort = force[0] * force[0] + force[1] * force[1];
    (next, -dist - 0.01 * effort, dist < GOAL_RADIUS)
}

/// Drive a point mass to a goal sampled in `[-1, 1]²`.
pub struct PointReacher {
    spec: EnvSpec,
    state: ReacherState,
    steps: usize,
    rng: StreamRng,
}

impl PointReacher {
    pub fn new(seed: u64) -> Self {
        PointReacher {
            spec: spec(),
            state: ReacherState {
                position: [0.0; 2],
                velocity: [0.0; 2],
                goal: [0.0; 2],
            },
            steps: 0,
            rng: substream(seed, Stream::Env as u64),
        }
    }

    pub fn state(&self) -> ReacherState {
        self.state
    }

    pub fn set_state(&mut self, state: ReacherState) {
        self.state = state;
    }
}

impl Environment for PointReacher {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) {
        self.rng = substream(seed, Stream::Env as u64);
    }

    fn reset(&mut self) -> Vec<f64> {
        let gx = self.rng.random_range(-1.0..1.0);
        let gy = self.rng.random_range(-1.0..1.0);
        self.state = ReacherState {
            position: [0.0; 2],
            velocity: [0.0; 2],
            goal: [gx, gy],
        };
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let a = clamp_action(action, &self.spec)?;
        let (next, reward, reached) = point_reacher_step(self.state, [a[0], a[1]]);
        self.state = next;
        self.steps += 1;
        Ok(Step {
            observation: self.observation(),
            reward,
            terminal: reached,
            done: reached || self.steps >= MAX_STEPS,
        })
    }

    fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![
            s.position[0],
            s.position[1],
            s.velocity[0],
            s.velocity[1],
            s.goal[0],
            s.goal[1],
        ]
    }

    fn snapshot(&self) -> Vec<f64> {
        let mut out = self.observation();
        out.push(self.steps as f64);
        out
    }

    fn restore(&mut self, snapshot: &[f64]) -> Result<()> {
        check_snapshot(snapshot, 7, "reacher")?;
        self.state = ReacherState {
            position: [snapshot[0], snapshot[1]],
            velocity: [snapshot[2], snapshot[3]],
            goal: [snapshot[4], snapshot[5]],
        };
        self.steps = snapshot[6] as usize;
        Ok(())
    }

    fn rng(&self) -> &StreamRng {
        &self.rng
    }

    fn set_rng(&mut self, rng: StreamRng) {
        self.rng = rng;
    }
}
