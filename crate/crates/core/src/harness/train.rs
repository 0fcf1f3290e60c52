use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::metrics::MetricRecord;
use crate::envs::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::rl::{
    mean, run_episodes, Actor, Agent, Algorithm, ReplayBuffer, Sac, StateMap, StateWriter, Td3,
    Transition, TwinCritics,
};
use crate::rng::{restore_state, save_state, stream, Stream, StreamRng};

/// A training run: agent, environment, replay and every random stream.
pub struct Trainer {
    cfg: RunConfig,
    agent: Agent,
    env: Box<dyn Environment>,
    buffer: ReplayBuffer,
    explore_rng: StreamRng,
    encoder_rng: StreamRng,
    replay_rng: StreamRng,
    step: u64,
    obs: Vec<f64>,
    episode_return: f64,
    losses: LossTotals,
    started: Instant,
}

#[derive(Clone, Copy, Debug, Default)]
struct LossTotals {
    actor_sum: f64,
    actor_n: u64,
    critic_sum: f64,
    critic_n: u64,
}

impl LossTotals {
    fn means(&self) -> (f64, f64) {
        let m = |s: f64, n: u64| if n == 0 { f64::NAN } else { s / n as f64 };
        (
            m(self.actor_sum, self.actor_n),
            m(self.critic_sum, self.critic_n),
        )
    }
}

/// Builds the actor, critics and agent for `cfg`. Dendritic masks take their
/// seeds from `mask_seeds` when given, otherwise from the mask stream.
pub fn build_agent(cfg: &RunConfig, mask_seeds: Option<&[u64]>) -> Result<Agent> {
    let spec = cfg.env_spec();
    let mut init = stream(cfg.seed, Stream::Init);
    let mut mask_rng = stream(cfg.seed, Stream::Mask);
    let mut given = mask_seeds.map(|s| s.iter().copied());
    let mut short = false;
    let actor = Actor::build(
        cfg.actor_variant,
        &cfg.snn_config(),
        spec.state_dim,
        &spec.action_low,
        &spec.action_high,
        &mut init,
        || match given.as_mut() {
            Some(it) => it.next().unwrap_or_else(|| {
                short = true;
                0
            }),
            None => mask_rng.next_u64(),
        },
    )?;
    if short || given.is_some_and(|mut it| it.next().is_some()) {
        return Err(Error::input(
            "stored mask seeds do not match the network's dendritic layers",
        ));
    }
    let critics = TwinCritics::new(
        spec.state_dim,
        spec.action_dim,
        &cfg.critic_hidden,
        cfg.train.critic_lr,
        &mut init,
    )?;
    Ok(match cfg.algorithm {
        Algorithm::Td3 => Agent::Td3(Td3::new(cfg.train.clone(), cfg.td3.clone(), actor, critics)),
        Algorithm::Sac => Agent::Sac(Sac::new(cfg.train.clone(), cfg.sac.clone(), actor, critics)),
    })
}

/// Mean return of the greedy policy over `episodes` episodes. The environment
/// and any encoder randomness come from the evaluation stream, so the result
/// depends only on the weights and the seed.
pub fn evaluate_agent(agent: &Agent, env: EnvKind, seed: u64, episodes: usize) -> Result<f64> {
    let mut rng = stream(seed, Stream::Eval);
    let mut env = env.make(rng.next_u64());
    let returns = run_episodes(env.as_mut(), episodes, |obs| agent.greedy(obs, &mut rng))?;
    Ok(mean(&returns))
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Trainer> {
        cfg.validate()?;
        let agent = build_agent(&cfg, None)?;
        Trainer::assemble(cfg, agent)
    }

    fn assemble(cfg: RunConfig, agent: Agent) -> Result<Trainer> {
        let spec = cfg.env_spec();
        let mut env = cfg.env.make(cfg.seed);
        let obs = env.reset();
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.train.buffer_capacity, spec.state_dim, spec.action_dim)?,
            explore_rng: stream(cfg.seed, Stream::Exploration),
            encoder_rng: stream(cfg.seed, Stream::Encoder),
            replay_rng: stream(cfg.seed, Stream::Replay),
            agent,
            env,
            step: 0,
            obs,
            episode_return: 0.0,
            losses: LossTotals::default(),
            started: Instant::now(),
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// One environment step and, past warmup, one gradient update.
    pub fn step_once(&mut self) -> Result<()> {
        let spec = self.env.spec().clone();
        let action: Vec<f64> = if (self.step as usize) < self.cfg.train.warmup {
            (0..spec.action_dim)
                .map(|k| {
                    self.explore_rng
                        .random_range(spec.action_low[k]..=spec.action_high[k])
                })
                .collect()
        } else {
            self.agent
                .explore(&self.obs, &mut self.explore_rng, &mut self.encoder_rng)?
        };
        let out = self.env.step(&action)?;
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.obs),
            action,
            reward: out.reward,
            next_state: out.observation.clone(),
            done: out.terminal,
        })?;
        self.episode_return += out.reward;
        if out.done {
            self.obs = self.env.reset();
            self.episode_return = 0.0;
        } else {
            self.obs = out.observation;
        }
        self.step += 1;

        let batch_size = self.cfg.train.batch_size;
        if self.step as usize >= self.cfg.train.warmup && self.buffer.len() >= batch_size {
            let batch = self.buffer.sample(batch_size, &mut self.replay_rng)?;
            let stats = self
                .agent
                .update(&batch, &mut self.explore_rng, &mut self.encoder_rng)?;
            self.losses.critic_sum += stats.critic_loss;
            self.losses.critic_n += 1;
            if let Some(a) = stats.actor_loss {
                self.losses.actor_sum += a;
                self.losses.actor_n += 1;
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, episodes: usize) -> Result<f64> {
        evaluate_agent(&self.agent, self.cfg.env, self.cfg.seed, episodes)
    }

    /// Steps until `total_steps`, handing a record to `sink` at every evaluation interval.
    pub fn run(&mut self, mut sink: impl FnMut(&MetricRecord) -> Result<()>) -> Result<()> {
        let total = self.cfg.total_steps as u64;
        let interval = self.cfg.eval_interval as u64;
        while self.step < total {
            self.step_once()?;
            if self.step % interval == 0 {
                let record = self.record()?;
                sink(&record)?;
            }
        }
        Ok(())
    }

    /// Evaluates now and resets the interval loss totals.
    pub fn record(&mut self) -> Result<MetricRecord> {
        let mean_eval_return = self.evaluate(self.cfg.eval_episodes)?;
        let (actor_loss, critic_loss) = self.losses.means();
        self.losses = LossTotals::default();
        Ok(MetricRecord {
            step: self.step,
            mean_eval_return,
            actor_loss,
            critic_loss,
            wall_ms: if self.cfg.record_wall_ms {
                self.started.elapsed().as_millis() as u64
            } else {
                0
            },
            seed: self.cfg.seed,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint {
            config: self.cfg.serialize(),
            arrays: Vec::new(),
        };
        ckpt.push_u64("mask_seeds", self.agent.actor().mask_seeds());
        let mut w = StateWriter::default();
        self.agent.export(&mut w);
        for (i, part) in self.buffer.export().into_iter().enumerate() {
            w.array(&format!("replay.{i}"), part);
        }
        w.array("env.snapshot", self.env.snapshot());
        w.array("obs", self.obs.clone());
        w.array(
            "progress",
            vec![
                self.episode_return,
                self.losses.actor_sum,
                self.losses.critic_sum,
            ],
        );
        for (name, data) in w.entries {
            ckpt.push_f64(name, data);
        }
        ckpt.push_u64(
            "counters",
            vec![self.step, self.losses.actor_n, self.losses.critic_n],
        );
        for (name, rng) in [
            ("rng.env", self.env.rng()),
            ("rng.explore", &self.explore_rng),
            ("rng.encoder", &self.encoder_rng),
            ("rng.replay", &self.replay_rng),
        ] {
            ckpt.push_u64(name, save_state(rng).to_vec());
        }
        ckpt
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    /// Rebuilds a run from a checkpoint. Fails without side effects if any
    /// part is missing or malformed.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Trainer> {
        let cfg = RunConfig::parse(&ckpt.config, "checkpoint config")?;
        let agent = build_agent(&cfg, Some(ckpt.u64("mask_seeds")?))?;
        let mut t = Trainer::assemble(cfg, agent)?;

        let mut map = StateMap::new(ckpt.arrays.iter().filter_map(|(n, d)| match d {
            super::checkpoint::ArrayData::F64(v) => Some((n.clone(), v.clone())),
            _ => None,
        }));
        t.agent.import(&mut map)?;
        let replay: Vec<Vec<f64>> = (0..6)
            .map(|i| map.take(&format!("replay.{i}")))
            .collect::<Result<_>>()?;
        t.buffer.import(replay.try_into().expect("six parts"))?;
        t.env.restore(&map.take("env.snapshot")?)?;
        t.obs = map.take_len("obs", t.cfg.env_spec().state_dim)?;
        let progress = map.take_len("progress", 3)?;
        t.episode_return = progress[0];
        t.losses.actor_sum = progress[1];
        t.losses.critic_sum = progress[2];
        if let Some(extra) = map.remaining().next() {
            return Err(Error::input(format!(
                "checkpoint has unexpected array `{extra}`"
            )));
        }
        let counters = ckpt.u64("counters")?;
        if counters.len() != 3 {
            return Err(Error::input("checkpoint counters must hold three values"));
        }
        t.step = counters[0];
        t.losses.actor_n = counters[1];
        t.losses.critic_n = counters[2];
        let rng = |name: &str| -> Result<StreamRng> {
            restore_state(ckpt.u64(name)?)
                .ok_or_else(|| Error::input(format!("malformed random state `{name}`")))
        };
        t.env.set_rng(rng("rng.env")?);
        t.explore_rng = rng("rng.explore")?;
        t.encoder_rng = rng("rng.encoder")?;
        t.replay_rng = rng("rng.replay")?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Trainer> {
        Trainer::from_checkpoint(&Checkpoint::load(path)?)
    }
}
