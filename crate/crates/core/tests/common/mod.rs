#![allow(dead_code)]

use bptsan::diff::{finite_difference, max_relative_error, Tape, Tensor, Var};
use bptsan::harness::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Reduces `y` to a scalar with fixed pseudo-random weights so every output
/// element contributes a distinct upstream gradient.
pub fn weighted_sum(tape: &mut Tape, y: Var, seed: u64) -> Var {
    let shape = tape.value(y).shape().to_vec();
    let c = random_tensor(&mut rng(seed), &shape, -1.0, 1.0);
    let c = tape.constant(c);
    let prod = tape.mul(y, c);
    let m = tape.mean(prod);
    tape.scale(m, shape.iter().product::<usize>() as f64)
}

/// Worst relative error between tape gradients and central differences
/// (step 1e-5) over every input of `build`.
pub fn gradient_error(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], t.len());
        let f = |x: &[f64]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if i == k {
                        tape.input(Tensor::new(t.shape().to_vec(), x.to_vec()).unwrap())
                    } else {
                        tape.input(t.clone())
                    }
                })
                .collect();
            let o = build(&mut tape, &vars);
            tape.value(o).item()
        };
        let numeric = finite_difference(f, t.data(), 1e-5);
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    worst
}

/// Small pendulum configuration sized for a single CPU core.
pub fn desk_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_overrides(&[
        "snn.hidden=64,64",
        "critic.hidden=64,64",
        "rl.batch_size=64",
        "eval_interval=1000",
    ])
    .unwrap();
    cfg
}

/// Tiny configuration for fast plumbing tests.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_overrides(&[
        "snn.hidden=12,12",
        "critic.hidden=16,16",
        "rl.batch_size=8",
        "rl.warmup=20",
        "total_steps=120",
        "eval_interval=40",
        "eval_episodes=1",
    ])
    .unwrap();
    cfg
}
