use std::fmt;
use std::str::FromStr;

use super::dendritic::{dendritic_var, DendriticLayer};
use super::lateral::{lateral_var, LateralConnection};
use super::lif::{lif_step_var, LifConfig, LifVars};
use crate::diff::{SurrogateConfig, Tape, Tensor, Var};
use crate::encoding::{
    decode_raw_var, poisson_step, population_encode_var, spike_source, ActionDecoder,
    DeterministicEncoderState, PopulationEncoder, SpikeCoding, SpikeTrain,
};
use crate::error::{Error, Result};
use crate::rng::{uniform_tensor, StreamRng};

/// Actor architectures compared by the ablation runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActorVariant {
    /// Artificial ReLU actor.
    Aan,
    /// Spiking actor with dense inter-layer sums and no lateral term.
    San,
    /// Dendritic branches and lateral interaction.
    BptSan,
    /// Dense inter-layer sums with lateral interaction.
    BptSanNoNdt,
    /// Dendritic branches without lateral interaction.
    BptSanNoLi,
}

impl ActorVariant {
    pub const ALL: [ActorVariant; 5] = [
        ActorVariant::Aan,
        ActorVariant::San,
        ActorVariant::BptSan,
        ActorVariant::BptSanNoNdt,
        ActorVariant::BptSanNoLi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActorVariant::Aan => "aan",
            ActorVariant::San => "san",
            ActorVariant::BptSan => "bpt-san",
            ActorVariant::BptSanNoNdt => "bpt-san-no-ndt",
            ActorVariant::BptSanNoLi => "bpt-san-no-li",
        }
    }

    pub fn is_spiking(self) -> bool {
        self != ActorVariant::Aan
    }

    pub fn dendritic(self) -> bool {
        matches!(self, ActorVariant::BptSan | ActorVariant::BptSanNoLi)
    }

    pub fn lateral(self) -> bool {
        matches!(self, ActorVariant::BptSan | ActorVariant::BptSanNoNdt)
    }
}

impl fmt::Display for ActorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActorVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ActorVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!("unknown actor variant `{s}` (expected aan, san, bpt-san, bpt-san-no-ndt or bpt-san-no-li)")
            })
    }
}

/// Hyperparameters of a spiking actor.
#[derive(Clone, Debug, PartialEq)]
pub struct SnnConfig {
    pub hidden: Vec<usize>,
    pub branches: usize,
    pub lateral_radius: usize,
    pub time_window: usize,
    pub lif: LifConfig,
    /// Half-width of the surrogate gradient window.
    pub window: f64,
    pub coding: SpikeCoding,
    pub pop_size: usize,
    pub state_low: Vec<f64>,
    pub state_high: Vec<f64>,
    pub trainable_encoder: bool,
    /// Whether the output layer also gets dendritic branches and lateral interaction.
    pub output_topology: bool,
}

/// How a layer combines the previous layer's spikes.
#[derive(Clone, Debug)]
pub enum Inter {
    Dense(Tensor),
    Dendritic(DendriticLayer),
}

impl Inter {
    pub fn weights(&self) -> &Tensor {
        match self {
            Inter::Dense(w) => w,
            Inter::Dendritic(d) => &d.weights,
        }
    }

    fn weights_mut(&mut self) -> &mut Tensor {
        match self {
            Inter::Dense(w) => w,
            Inter::Dendritic(d) => &mut d.weights,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpikingLayer {
    pub inter: Inter,
    pub lateral: Option<LateralConnection>,
}

impl SpikingLayer {
    pub fn width(&self) -> usize {
        self.inter.weights().rows()
    }
}

/// Spiking actor: population encoder, LIF layers, rate decoder.
#[derive(Clone, Debug)]
pub struct SpikingActor {
    variant: ActorVariant,
    pub encoder: PopulationEncoder,
    coding: SpikeCoding,
    pub layers: Vec<SpikingLayer>,
    pub decoder: ActionDecoder,
    time_window: usize,
    lif: LifConfig,
    surrogate: SurrogateConfig,
}

/// Tape handles produced by one batched forward pass.
pub struct SpikingTrace {
    /// Pre-squash decoder output `[B × M]`.
    pub raw: Var,
    /// `spikes[l][t]`: layer `l` (0 = encoder output) at timestep `t`. Empty unless recorded.
    pub spikes: Vec<Vec<Var>>,
}

impl SpikingActor {
    /// Weights are drawn from `init` in layer order; dendritic layers take their
    /// mask seed from `mask_seed`. Lateral weights start at zero.
    pub fn new(
        cfg: &SnnConfig,
        variant: ActorVariant,
        action_low: &[f64],
        action_high: &[f64],
        init: &mut StreamRng,
        mut mask_seed: impl FnMut() -> u64,
    ) -> Result<Self> {
        if !variant.is_spiking() {
            return Err(Error::config(
                "the artificial actor is not a spiking network",
            ));
        }
        if cfg.time_window == 0 {
            return Err(Error::config("time window must be at least 1 step"));
        }
        cfg.lif.validate()?;
        let surrogate = cfg.lif.surrogate(cfg.window)?;
        let encoder = PopulationEncoder::new(
            &cfg.state_low,
            &cfg.state_high,
            cfg.pop_size,
            cfg.trainable_encoder,
        )?;
        let n_action = action_low.len();

        let mut widths = vec![encoder.width()];
        widths.extend_from_slice(&cfg.hidden);
        widths.push(n_action * cfg.pop_size);
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::config("layer widths must be positive"));
        }

        let mut layers = Vec::with_capacity(widths.len() - 1);
        for l in 1..widths.len() {
            let (n_in, n_out) = (widths[l - 1], widths[l]);
            let is_output = l == widths.len() - 1;
            let topology = !is_output || cfg.output_topology;
            let weights = uniform_tensor(init, &[n_out, n_in], 1.0 / (n_in as f64).sqrt());
            let inter = if variant.dendritic() && topology {
                Inter::Dendritic(DendriticLayer::new(weights, mask_seed(), cfg.branches)?)
            } else {
                Inter::Dense(weights)
            };
            let lateral = if variant.lateral() && topology {
                Some(LateralConnection::zeros(n_out, cfg.lateral_radius)?)
            } else {
                None
            };
            layers.push(SpikingLayer { inter, lateral });
        }

        let j = cfg.pop_size;
        let dec_w = uniform_tensor(init, &[n_action, j], 1.0 / (j as f64).sqrt());
        let decoder = ActionDecoder::new(
            dec_w,
            Tensor::zeros(&[n_action]),
            action_low.to_vec(),
            action_high.to_vec(),
        )?;

        Ok(SpikingActor {
            variant,
            encoder,
            coding: cfg.coding,
            layers,
            decoder,
            time_window: cfg.time_window,
            lif: cfg.lif,
            surrogate,
        })
    }

    pub fn variant(&self) -> ActorVariant {
        self.variant
    }

    pub fn coding(&self) -> SpikeCoding {
        self.coding
    }

    pub fn time_window(&self) -> usize {
        self.time_window
    }

    pub fn n_state(&self) -> usize {
        self.encoder.n_state()
    }

    pub fn n_action(&self) -> usize {
        self.decoder.n_action()
    }

    /// Seeds of every dendritic layer, in layer order.
    pub fn mask_seeds(&self) -> Vec<u64> {
        self.layers
            .iter()
            .filter_map(|l| match &l.inter {
                Inter::Dendritic(d) => Some(d.mask().seed()),
                Inter::Dense(_) => None,
            })
            .collect()
    }

    /// Parameters in a fixed order: encoder means, stds, then per layer the
    /// inter weights and lateral weights, then decoder weights and biases.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.encoder.means, &self.encoder.stds];
        for layer in &self.layers {
            out.push(layer.inter.weights());
            if let Some(lat) = &layer.lateral {
                out.push(&lat.weights);
            }
        }
        out.push(&self.decoder.weights);
        out.push(&self.decoder.biases);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.encoder.means, &mut self.encoder.stds];
        for layer in &mut self.layers {
            out.push(layer.inter.weights_mut());
            if let Some(lat) = &mut layer.lateral {
                out.push(&mut lat.weights);
            }
        }
        out.push(&mut self.decoder.weights);
        out.push(&mut self.decoder.biases);
        out
    }

    pub fn trainable(&self) -> Vec<bool> {
        let mut out = vec![self.encoder.trainable; 2];
        out.resize(self.params().len(), true);
        out
    }

    /// Restores invariants after a parameter update.
    pub fn project(&mut self) {
        self.encoder.project();
    }

    /// Batched forward pass over a full time window. `pv` holds one tape
    /// handle per entry of [`SpikingActor::params`].
    pub fn forward_var(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        states: &Tensor,
        rng: &mut StreamRng,
        record: bool,
    ) -> Result<SpikingTrace> {
        if pv.len() != self.params().len() {
            return Err(Error::Contract("parameter handle count mismatch".into()));
        }
        if states.cols() != self.n_state() {
            return Err(Error::config(format!(
                "state has {} entries, actor expects {}",
                states.cols(),
                self.n_state()
            )));
        }
        let rows = states.rows();
        let s = tape.constant(Tensor::from_parts(
            vec![rows, states.cols()],
            states.data().to_vec(),
        ));
        let strength = population_encode_var(tape, s, pv[0], pv[1]);
        let strength_vals = tape.value(strength).data().to_vec();
        let width_in = self.encoder.width();

        let mut det = match self.coding {
            SpikeCoding::Deterministic => Some(DeterministicEncoderState::new(rows * width_in)),
            SpikeCoding::Poisson => None,
        };
        let mut state: Vec<LifVars> = self
            .layers
            .iter()
            .map(|l| LifVars::zeros(tape, rows, l.width()))
            .collect();
        let mut spikes: Vec<Vec<Var>> = if record {
            vec![Vec::with_capacity(self.time_window); self.layers.len() + 1]
        } else {
            Vec::new()
        };
        let mut rate_sum: Option<Var> = None;
        let mut bits = vec![0.0; rows * width_in];

        for t in 0..self.time_window {
            match &mut det {
                Some(det) => det.step(&strength_vals, &mut bits),
                None => poisson_step(&strength_vals, rng, &mut bits),
            }
            let mut x = spike_source(
                tape,
                strength,
                Tensor::from_parts(vec![rows, width_in], bits.clone()),
            );
            if record {
                spikes[0].push(x);
            }
            let mut p = 2;
            for (l, layer) in self.layers.iter().enumerate() {
                let inter = match &layer.inter {
                    Inter::Dense(_) => tape.matmul_wt(x, pv[p]),
                    Inter::Dendritic(d) => dendritic_var(tape, x, pv[p], d.mask()),
                };
                p += 1;
                let intra = match &layer.lateral {
                    Some(lat) => {
                        let w = pv[p];
                        p += 1;
                        // Previous spikes are all zero at the first step.
                        (t > 0).then(|| lateral_var(tape, state[l].spike, w, lat.radius()))
                    }
                    None => None,
                };
                state[l] = lif_step_var(tape, state[l], inter, intra, &self.lif, self.surrogate);
                x = state[l].spike;
                if record {
                    spikes[l + 1].push(x);
                }
            }
            rate_sum = Some(match rate_sum {
                Some(acc) => tape.add(acc, x),
                None => x,
            });
        }

        let n = pv.len();
        let rates = tape.scale(
            rate_sum.expect("time window is non-empty"),
            1.0 / self.time_window as f64,
        );
        let raw = decode_raw_var(tape, rates, pv[n - 2], pv[n - 1]);
        Ok(SpikingTrace { raw, spikes })
    }

    /// Single-state inference: the squashed action and every layer's spike train
    /// (layer 0 is the encoder output).
    pub fn act(&self, state: &[f64], rng: &mut StreamRng) -> Result<(Vec<f64>, Vec<SpikeTrain>)> {
        let mut tape = Tape::new();
        let pv: Vec<Var> = self
            .params()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let states = Tensor::new(vec![1, state.len()], state.to_vec())?;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("state contains a non-finite value"));
        }
        let trace = self.forward_var(&mut tape, &pv, &states, rng, true)?;
        let raw = tape.value(trace.raw).data().to_vec();
        let trains = trace
            .spikes
            .iter()
            .map(|steps| {
                let width = tape.value(steps[0]).len();
                let bits = steps
                    .iter()
                    .flat_map(|v| tape.value(*v).data().iter().map(|&b| (b > 0.0) as u8))
                    .collect();
                SpikeTrain::from_bits(self.time_window, width, bits)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((self.decoder.squash(&raw), trains))
    }
}
