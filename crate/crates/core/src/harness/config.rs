//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::encoding::SpikeCoding;
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::rl::{Algorithm, SacConfig, Td3Config, TrainConfig};
use crate::snn::{ActorVariant, LifConfig, SnnConfig};

/// Spike generator choice; `Auto` picks per environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    Auto,
    Fixed(SpikeCoding),
}

impl EncoderKind {
    pub fn resolve(self, env: EnvKind) -> SpikeCoding {
        match self {
            EncoderKind::Fixed(c) => c,
            EncoderKind::Auto => match env {
                EnvKind::Pendulum => SpikeCoding::Deterministic,
                EnvKind::Reacher => SpikeCoding::Poisson,
            },
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Auto => "auto",
            EncoderKind::Fixed(c) => c.as_str(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub actor_variant: ActorVariant,
    pub seed: u64,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub record_wall_ms: bool,

    /// Hidden widths of the actor, spiking or not.
    pub hidden: Vec<usize>,
    pub branches: usize,
    pub lateral_radius: usize,
    pub time_window: usize,
    pub lif: LifConfig,
    pub window: f64,
    pub output_topology: bool,

    pub encoder: EncoderKind,
    pub pop_size: usize,
    pub trainable_encoder: bool,
    /// Encoder ranges; `None` uses the environment's observation bounds.
    pub state_low: Option<Vec<f64>>,
    pub state_high: Option<Vec<f64>>,

    pub critic_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub td3: Td3Config,
    pub sac: SacConfig,

    pub ablate_variants: Vec<ActorVariant>,
    pub ablate_algorithms: Vec<Algorithm>,
    pub ablate_seeds: Vec<u64>,
    pub ablate_workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvKind::Pendulum,
            algorithm: Algorithm::Td3,
            actor_variant: ActorVariant::BptSan,
            seed: 0,
            total_steps: 30_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            record_wall_ms: false,
            hidden: vec![256, 256],
            branches: 2,
            lateral_radius: 2,
            time_window: 5,
            lif: LifConfig::default(),
            window: 0.5,
            output_topology: true,
            encoder: EncoderKind::Auto,
            pop_size: 10,
            trainable_encoder: true,
            state_low: None,
            state_high: None,
            critic_hidden: vec![256, 256],
            train: TrainConfig::default(),
            td3: Td3Config::default(),
            sac: SacConfig::default(),
            ablate_variants: ActorVariant::ALL.to_vec(),
            ablate_algorithms: vec![Algorithm::Td3],
            ablate_seeds: vec![1, 2, 3],
            ablate_workers: 1,
        }
    }
}

/// Every accepted key, in serialization order.
pub const KEYS: &[&str] = &[
    "env",
    "algorithm",
    "actor_variant",
    "seed",
    "total_steps",
    "eval_interval",
    "eval_episodes",
    "record_wall_ms",
    "snn.hidden",
    "snn.d",
    "snn.lateral_radius",
    "snn.time_window",
    "snn.d_c",
    "snn.d_v",
    "snn.v_th",
    "snn.rest",
    "snn.window",
    "snn.output_topology",
    "encoder.kind",
    "encoder.pop_size",
    "encoder.trainable",
    "encoder.state_low",
    "encoder.state_high",
    "critic.hidden",
    "rl.gamma",
    "rl.polyak",
    "rl.batch_size",
    "rl.actor_lr",
    "rl.critic_lr",
    "rl.warmup",
    "rl.buffer_capacity",
    "td3.policy_delay",
    "td3.target_noise",
    "td3.noise_clip",
    "td3.exploration_noise",
    "sac.alpha",
    "sac.auto_alpha",
    "sac.alpha_lr",
    "sac.log_std_init",
    "ablate.variants",
    "ablate.algorithms",
    "ablate.seeds",
    "ablate.workers",
];

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{v}` is not a valid number"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean (use true or false)")),
    }
}

fn parse_list<T>(
    v: &str,
    item: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "env" => self.env = v.parse()?,
            "algorithm" => self.algorithm = v.parse()?,
            "actor_variant" => self.actor_variant = v.parse()?,
            "seed" => self.seed = parse_num(v)?,
            "total_steps" => self.total_steps = parse_num(v)?,
            "eval_interval" => self.eval_interval = parse_num(v)?,
            "eval_episodes" => self.eval_episodes = parse_num(v)?,
            "record_wall_ms" => self.record_wall_ms = parse_bool(v)?,
            "snn.hidden" => self.hidden = parse_list(v, parse_num)?,
            "snn.d" => self.branches = parse_num(v)?,
            "snn.lateral_radius" => self.lateral_radius = parse_num(v)?,
            "snn.time_window" => self.time_window = parse_num(v)?,
            "snn.d_c" => self.lif.d_c = parse_num(v)?,
            "snn.d_v" => self.lif.d_v = parse_num(v)?,
            "snn.v_th" => self.lif.v_th = parse_num(v)?,
            "snn.rest" => self.lif.rest = parse_num(v)?,
            "snn.window" => self.window = parse_num(v)?,
            "snn.output_topology" => self.output_topology = parse_bool(v)?,
            "encoder.kind" => {
                self.encoder = if v == "auto" {
                    EncoderKind::Auto
                } else {
                    EncoderKind::Fixed(SpikeCoding::parse(v).ok_or_else(|| {
                        format!("unknown encoder `{v}` (expected auto, poisson or deterministic)")
                    })?)
                }
            }
            "encoder.pop_size" => self.pop_size = parse_num(v)?,
            "encoder.trainable" => self.trainable_encoder = parse_bool(v)?,
            "encoder.state_low" => self.state_low = parse_range(v)?,
            "encoder.state_high" => self.state_high = parse_range(v)?,
            "critic.hidden" => self.critic_hidden = parse_list(v, parse_num)?,
            "rl.gamma" => self.train.gamma = parse_num(v)?,
            "rl.polyak" => self.train.polyak = parse_num(v)?,
            "rl.batch_size" => self.train.batch_size = parse_num(v)?,
            "rl.actor_lr" => self.train.actor_lr = parse_num(v)?,
            "rl.critic_lr" => self.train.critic_lr = parse_num(v)?,
            "rl.warmup" => self.train.warmup = parse_num(v)?,
            "rl.buffer_capacity" => self.train.buffer_capacity = parse_num(v)?,
            "td3.policy_delay" => self.td3.policy_delay = parse_num(v)?,
            "td3.target_noise" => self.td3.target_noise = parse_num(v)?,
            "td3.noise_clip" => self.td3.noise_clip = parse_num(v)?,
            "td3.exploration_noise" => self.td3.exploration_noise = parse_num(v)?,
            "sac.alpha" => self.sac.alpha = parse_num(v)?,
            "sac.auto_alpha" => self.sac.auto_alpha = parse_bool(v)?,
            "sac.alpha_lr" => self.sac.alpha_lr = parse_num(v)?,
            "sac.log_std_init" => self.sac.log_std_init = parse_num(v)?,
            "ablate.variants" => self.ablate_variants = parse_list(v, str::parse)?,
            "ablate.algorithms" => self.ablate_algorithms = parse_list(v, str::parse)?,
            "ablate.seeds" => self.ablate_seeds = parse_list(v, parse_num)?,
            "ablate.workers" => self.ablate_workers = parse_num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Current value of `key` in its text form.
    pub fn get(&self, key: &str) -> Option<String> {
        let range =
            |r: &Option<Vec<f64>>| r.as_ref().map_or_else(|| "auto".to_string(), |v| join(v));
        Some(match key {
            "env" => self.env.to_string(),
            "algorithm" => self.algorithm.to_string(),
            "actor_variant" => self.actor_variant.to_string(),
            "seed" => self.seed.to_string(),
            "total_steps" => self.total_steps.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "record_wall_ms" => self.record_wall_ms.to_string(),
            "snn.hidden" => join(&self.hidden),
            "snn.d" => self.branches.to_string(),
            "snn.lateral_radius" => self.lateral_radius.to_string(),
            "snn.time_window" => self.time_window.to_string(),
            "snn.d_c" => self.lif.d_c.to_string(),
            "snn.d_v" => self.lif.d_v.to_string(),
            "snn.v_th" => self.lif.v_th.to_string(),
            "snn.rest" => self.lif.rest.to_string(),
            "snn.window" => self.window.to_string(),
            "snn.output_topology" => self.output_topology.to_string(),
            "encoder.kind" => self.encoder.as_str().to_string(),
            "encoder.pop_size" => self.pop_size.to_string(),
            "encoder.trainable" => self.trainable_encoder.to_string(),
            "encoder.state_low" => range(&self.state_low),
            "encoder.state_high" => range(&self.state_high),
            "critic.hidden" => join(&self.critic_hidden),
            "rl.gamma" => self.train.gamma.to_string(),
            "rl.polyak" => self.train.polyak.to_string(),
            "rl.batch_size" => self.train.batch_size.to_string(),
            "rl.actor_lr" => self.train.actor_lr.to_string(),
            "rl.critic_lr" => self.train.critic_lr.to_string(),
            "rl.warmup" => self.train.warmup.to_string(),
            "rl.buffer_capacity" => self.train.buffer_capacity.to_string(),
            "td3.policy_delay" => self.td3.policy_delay.to_string(),
            "td3.target_noise" => self.td3.target_noise.to_string(),
            "td3.noise_clip" => self.td3.noise_clip.to_string(),
            "td3.exploration_noise" => self.td3.exploration_noise.to_string(),
            "sac.alpha" => self.sac.alpha.to_string(),
            "sac.auto_alpha" => self.sac.auto_alpha.to_string(),
            "sac.alpha_lr" => self.sac.alpha_lr.to_string(),
            "sac.log_std_init" => self.sac.log_std_init.to_string(),
            "ablate.variants" => join(&self.ablate_variants),
            "ablate.algorithms" => join(&self.ablate_algorithms),
            "ablate.seeds" => join(&self.ablate_seeds),
            "ablate.workers" => self.ablate_workers.to_string(),
            _ => return None,
        })
    }

    /// Parses config text. Later assignments of a key override earlier ones.
    pub fn parse(text: &str, source_name: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut lines = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::ConfigParse {
                source_name: source_name.to_string(),
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            cfg.set(key, value).map_err(|m| {
                if m.starts_with("unknown key") {
                    err(m)
                } else {
                    err(format!("`{key}`: {m}"))
                }
            })?;
            lines.insert(key.to_string(), line_no);
        }
        if let Err((key, message)) = cfg.check() {
            return Err(Error::ConfigParse {
                source_name: source_name.to_string(),
                line: lines.get(key).copied().unwrap_or(0),
                message: format!("`{key}`: {message}"),
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides; errors report line 0 of source `override`.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let err = |message: String| Error::ConfigParse {
                source_name: "override".to_string(),
                line: 0,
                message,
            };
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key=value`, found `{o}`")))?;
            let key = key.trim();
            self.set(key, value).map_err(|m| {
                if m.starts_with("unknown key") {
                    err(m)
                } else {
                    err(format!("`{key}`: {m}"))
                }
            })?;
        }
        self.validate_as("override")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_as("config")
    }

    fn validate_as(&self, source_name: &str) -> Result<()> {
        self.check().map_err(|(key, message)| Error::ConfigParse {
            source_name: source_name.to_string(),
            line: 0,
            message: format!("`{key}`: {message}"),
        })
    }

    /// First violated constraint as `(key, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        fn need(
            ok: bool,
            key: &'static str,
            msg: &str,
        ) -> std::result::Result<(), (&'static str, String)> {
            if ok {
                Ok(())
            } else {
                Err((key, msg.to_string()))
            }
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        need(
            self.eval_interval >= 1,
            "eval_interval",
            "must be at least 1",
        )?;
        need(
            self.eval_episodes >= 1,
            "eval_episodes",
            "must be at least 1",
        )?;
        need(
            !self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0),
            "snn.hidden",
            "needs at least one positive width",
        )?;
        need(self.branches >= 1, "snn.d", "must be at least 1")?;
        need(
            self.time_window >= 1,
            "snn.time_window",
            "must be at least 1",
        )?;
        need(unit(self.lif.d_c), "snn.d_c", "must lie in [0, 1]")?;
        need(unit(self.lif.d_v), "snn.d_v", "must lie in [0, 1]")?;
        need(self.lif.v_th.is_finite(), "snn.v_th", "must be finite")?;
        need(self.lif.rest.is_finite(), "snn.rest", "must be finite")?;
        need(
            self.window > 0.0 && self.window.is_finite(),
            "snn.window",
            "must be positive",
        )?;
        need(self.pop_size >= 1, "encoder.pop_size", "must be at least 1")?;
        let n = self.env.spec().state_dim;
        for (key, r) in [
            ("encoder.state_low", &self.state_low),
            ("encoder.state_high", &self.state_high),
        ] {
            if let Some(r) = r {
                need(
                    r.len() == n,
                    key,
                    &format!("needs {n} values for env {}", self.env),
                )?;
                need(
                    r.iter().all(|x| x.is_finite()),
                    key,
                    "values must be finite",
                )?;
            }
        }
        let (lo, hi) = self.encoder_range();
        need(
            lo.iter().zip(&hi).all(|(l, h)| l < h),
            "encoder.state_high",
            "must exceed encoder.state_low",
        )?;
        need(
            !self.critic_hidden.is_empty() && self.critic_hidden.iter().all(|&h| h > 0),
            "critic.hidden",
            "needs at least one positive width",
        )?;
        need(
            self.train.gamma > 0.0 && self.train.gamma < 1.0,
            "rl.gamma",
            "must lie in (0, 1)",
        )?;
        need(
            self.train.polyak > 0.0 && self.train.polyak <= 1.0,
            "rl.polyak",
            "must lie in (0, 1]",
        )?;
        need(
            self.train.batch_size >= 1,
            "rl.batch_size",
            "must be at least 1",
        )?;
        need(self.train.actor_lr > 0.0, "rl.actor_lr", "must be positive")?;
        need(
            self.train.critic_lr > 0.0,
            "rl.critic_lr",
            "must be positive",
        )?;
        need(
            self.train.buffer_capacity >= 1,
            "rl.buffer_capacity",
            "must be at least 1",
        )?;
        need(
            self.td3.policy_delay >= 1,
            "td3.policy_delay",
            "must be at least 1",
        )?;
        need(
            self.td3.target_noise >= 0.0,
            "td3.target_noise",
            "must be non-negative",
        )?;
        need(
            self.td3.noise_clip >= 0.0,
            "td3.noise_clip",
            "must be non-negative",
        )?;
        need(
            self.td3.exploration_noise >= 0.0,
            "td3.exploration_noise",
            "must be non-negative",
        )?;
        need(
            self.sac.alpha > 0.0 && self.sac.alpha.is_finite(),
            "sac.alpha",
            "must be positive",
        )?;
        need(self.sac.alpha_lr > 0.0, "sac.alpha_lr", "must be positive")?;
        need(
            self.sac.log_std_init.is_finite(),
            "sac.log_std_init",
            "must be finite",
        )?;
        need(
            !self.ablate_variants.is_empty(),
            "ablate.variants",
            "needs at least one variant",
        )?;
        need(
            !self.ablate_algorithms.is_empty(),
            "ablate.algorithms",
            "needs at least one algorithm",
        )?;
        need(
            !self.ablate_seeds.is_empty(),
            "ablate.seeds",
            "needs at least one seed",
        )?;
        need(
            self.ablate_workers >= 1,
            "ablate.workers",
            "must be at least 1",
        )?;

        let spec = self.env.spec();
        let mut widths = vec![spec.state_dim * self.pop_size];
        widths.extend_from_slice(&self.hidden);
        widths.push(spec.action_dim * self.pop_size);
        let layers = widths.len() - 1;
        let variant = self.actor_variant;
        for l in 1..widths.len() {
            if l == layers && !self.output_topology {
                continue;
            }
            if variant.dendritic() && self.branches > widths[l - 1] {
                return Err((
                    "snn.d",
                    format!(
                        "{} branches exceed the {} inputs of layer {l}",
                        self.branches,
                        widths[l - 1]
                    ),
                ));
            }
            if variant.lateral() && widths[l] < 2 * self.lateral_radius + 1 {
                return Err((
                    "snn.lateral_radius",
                    format!(
                        "radius {} needs layers of at least {} neurons",
                        self.lateral_radius,
                        2 * self.lateral_radius + 1
                    ),
                ));
            }
        }
        Ok(())
    }

    /// One `key = value` line per key; parsing the result gives back `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn env_spec(&self) -> EnvSpec {
        self.env.spec()
    }

    pub fn encoder_range(&self) -> (Vec<f64>, Vec<f64>) {
        let spec = self.env.spec();
        (
            self.state_low.clone().unwrap_or(spec.obs_low),
            self.state_high.clone().unwrap_or(spec.obs_high),
        )
    }

    pub fn snn_config(&self) -> SnnConfig {
        let (state_low, state_high) = self.encoder_range();
        SnnConfig {
            hidden: self.hidden.clone(),
            branches: self.branches,
            lateral_radius: self.lateral_radius,
            time_window: self.time_window,
            lif: self.lif,
            window: self.window,
            coding: self.encoder.resolve(self.env),
            pop_size: self.pop_size,
            state_low,
            state_high,
            trainable_encoder: self.trainable_encoder,
            output_topology: self.output_topology,
        }
    }
}

fn parse_range(v: &str) -> std::result::Result<Option<Vec<f64>>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_list(v, parse_num).map(Some)
    }
}
