use rand::Rng;

use crate::diff::Tensor;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// One environment interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal flag; time-limit truncation is not terminal.
    pub done: bool,
}

/// A sampled minibatch in matrix form.
#[derive(Clone, Debug)]
pub struct Batch {
    /// `[B × N]`
    pub states: Tensor,
    /// `[B × M]`
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[Transition]) -> Result<Batch> {
        let first = items
            .first()
            .ok_or_else(|| Error::Contract("empty batch".into()))?;
        let (n, m) = (first.state.len(), first.action.len());
        let b = items.len();
        let mut states = Vec::with_capacity(b * n);
        let mut actions = Vec::with_capacity(b * m);
        let mut next_states = Vec::with_capacity(b * n);
        for t in items {
            states.extend_from_slice(&t.state);
            actions.extend_from_slice(&t.action);
            next_states.extend_from_slice(&t.next_state);
        }
        Ok(Batch {
            states: Tensor::new(vec![b, n], states)?,
            actions: Tensor::new(vec![b, m], actions)?,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: Tensor::new(vec![b, n], next_states)?,
            dones: items.iter().map(|t| f64::from(u8::from(t.done))).collect(),
        })
    }
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<f64>,
    cursor: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.state_dim
            || t.next_state.len() != self.state_dim
            || t.action.len() != self.action_dim
        {
            return Err(Error::config(
                "transition dimensions do not match the buffer",
            ));
        }
        if !t.reward.is_finite() {
            return Err(Error::input("transition reward is not finite"));
        }
        let (n, m, i) = (self.state_dim, self.action_dim, self.cursor);
        let done = f64::from(u8::from(t.done));
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(done);
            self.len += 1;
        } else {
            self.states[i * n..(i + 1) * n].copy_from_slice(&t.state);
            self.actions[i * m..(i + 1) * m].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * n..(i + 1) * n].copy_from_slice(&t.next_state);
            self.dones[i] = done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let (n, m) = (self.state_dim, self.action_dim);
        Some(Transition {
            state: self.states[i * n..(i + 1) * n].to_vec(),
            action: self.actions[i * m..(i + 1) * m].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * n..(i + 1) * n].to_vec(),
            done: self.dones[i] != 0.0,
        })
    }

    /// Uniform sample with replacement over occupied slots.
    pub fn sample(&self, batch_size: usize, rng: &mut StreamRng) -> Result<Batch> {
        if self.len == 0 || batch_size == 0 {
            return Err(Error::Contract(
                "cannot sample from an empty replay buffer".into(),
            ));
        }
        if self.len < batch_size {
            return Err(Error::Contract(format!(
                "replay buffer holds {} transitions, batch needs {batch_size}",
                self.len
            )));
        }
        let (n, m) = (self.state_dim, self.action_dim);
        let mut states = Vec::with_capacity(batch_size * n);
        let mut actions = Vec::with_capacity(batch_size * m);
        let mut next_states = Vec::with_capacity(batch_size * n);
        let mut rewards = Vec::with_capacity(batch_size);
        let mut dones = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let i = rng.random_range(0..self.len);
            states.extend_from_slice(&self.states[i * n..(i + 1) * n]);
            actions.extend_from_slice(&self.actions[i * m..(i + 1) * m]);
            next_states.extend_from_slice(&self.next_states[i * n..(i + 1) * n]);
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Ok(Batch {
            states: Tensor::new(vec![batch_size, n], states)?,
            actions: Tensor::new(vec![batch_size, m], actions)?,
            rewards,
            next_states: Tensor::new(vec![batch_size, n], next_states)?,
            dones,
        })
    }

    /// Contents as flat arrays, for checkpoints: states, actions, rewards, next states, dones, `[cursor, len]`.
    pub fn export(&self) -> [Vec<f64>; 6] {
        [
            self.states.clone(),
            self.actions.clone(),
            self.rewards.clone(),
            self.next_states.clone(),
            self.dones.clone(),
            vec![self.cursor as f64, self.len as f64],
        ]
    }

    pub fn import(&mut self, parts: [Vec<f64>; 6]) -> Result<()> {
        let [states, actions, rewards, next_states, dones, meta] = parts;
        if meta.len() != 2 {
            return Err(Error::input("replay metadata must hold cursor and length"));
        }
        let (cursor, len) = (meta[0] as usize, meta[1] as usize);
        let (n, m) = (self.state_dim, self.action_dim);
        if len > self.capacity
            || cursor >= self.capacity
            || states.len() != len * n
            || next_states.len() != len * n
            || actions.len() != len * m
            || rewards.len() != len
            || dones.len() != len
        {
            return Err(Error::input(
                "replay arrays are inconsistent with the buffer shape",
            ));
        }
        self.states = states;
        self.actions = actions;
        self.rewards = rewards;
        self.next_states = next_states;
        self.dones = dones;
        self.cursor = cursor;
        self.len = len;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn t(k: usize) -> Transition {
        Transition {
            state: vec![k as f64],
            action: vec![0.0],
            reward: k as f64,
            next_state: vec![k as f64 + 1.0],
            done: false,
        }
    }

    #[test]
    fn keeps_most_recent_after_wrap() {
        let mut buf = ReplayBuffer::new(4, 1, 1).unwrap();
        for k in 0..7 {
            buf.push(t(k)).unwrap();
        }
        assert_eq!(buf.len(), 4);
        let mut rewards: Vec<f64> = (0..4).map(|i| buf.get(i).unwrap().reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn sampling_touches_only_occupied_slots() {
        let mut buf = ReplayBuffer::new(100, 1, 1).unwrap();
        for k in 0..5 {
            buf.push(t(k)).unwrap();
        }
        let mut rng = stream(1, Stream::Replay);
        let b = buf.sample(5, &mut rng).unwrap();
        assert!(b.rewards.iter().all(|&r| (0.0..5.0).contains(&r)));
    }

    #[test]
    fn empty_buffer_is_a_precondition_error() {
        let buf = ReplayBuffer::new(10, 1, 1).unwrap();
        let mut rng = stream(1, Stream::Replay);
        assert!(matches!(buf.sample(1, &mut rng), Err(Error::Contract(_))));
    }
}
