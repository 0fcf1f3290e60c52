//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Learning runs use a desk-scale network (two 64-unit hidden layers, batch 64)
//! so the suite fits on one CPU core.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use bptsan::diff::{spike_step, SurrogateConfig, Tape, Tensor};
use bptsan::encoding::{decode_raw_var, deterministic_encode, poisson_encode};
use bptsan::envs::EnvKind;
use bptsan::harness::{build_agent, read_metrics, Checkpoint, RunConfig, Trainer};
use bptsan::rl::{mean, run_episodes, Agent, Batch, Critic};
use bptsan::rng::{stream, substream, Stream};
use bptsan::snn::{build_mask, dendritic_var, lif_step, DendriticLayer, LifConfig, LifLayerState};
use common::{gradient_error, random_tensor, rng, weighted_sum};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const BIN: &str = env!("CARGO_BIN_EXE_bptsan");

/// Pendulum learning configuration shared by the long runs.
const DESK: &str = "env = pendulum
snn.hidden = 64,64
critic.hidden = 64,64
rl.batch_size = 64
total_steps = 30000
eval_interval = 1000
eval_episodes = 10
";

fn c1_degenerate_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (coding, env) in [("deterministic", "pendulum"), ("poisson", "reacher")] {
        for (left, right, d) in [("bpt-san", "san", 1), ("bpt-san", "bpt-san-no-li", 2)] {
            let make = |variant: &str| {
                let mut cfg = RunConfig::default();
                cfg.apply_overrides(&[
                    format!("actor_variant={variant}"),
                    format!("snn.d={d}"),
                    format!("encoder.kind={coding}"),
                    format!("env={env}"),
                ])
                .unwrap();
                build_agent(&cfg, None).unwrap()
            };
            let (a, b) = (make(left), make(right));
            let (wa, wb) = (a.actor().params(), b.actor().params());
            // Same synaptic weights; the left actor additionally carries zero lateral weights.
            let wa: Vec<&Tensor> = wa
                .into_iter()
                .filter(|t| t.data().iter().any(|&v| v != 0.0))
                .collect();
            let wb: Vec<&Tensor> = wb
                .into_iter()
                .filter(|t| t.data().iter().any(|&v| v != 0.0))
                .collect();
            ensure(wa == wb, format!("{left}/{right}: weights differ"))?;
            let n = env.parse::<EnvKind>().unwrap().spec().state_dim;
            let mut r = rng(100 + d as u64);
            for i in 0..1000 {
                let s: Vec<f64> = (0..n).map(|_| r.random_range(-1.5..1.5)).collect();
                let (mut ea, mut eb) = (substream(i, 3), substream(i, 3));
                let xa = a.actor().act(&s, &mut ea).unwrap();
                let xb = b.actor().act(&s, &mut eb).unwrap();
                ensure(
                    xa.iter().zip(&xb).all(|(p, q)| p.to_bits() == q.to_bits()),
                    format!("{left} vs {right} ({coding}) differ at state {i}: {xa:?} vs {xb:?}"),
                )?;
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1} s"))?;
    Ok(format!("{checked} states bit-identical in {secs:.2} s"))
}

fn c2_mask_invariants() -> Outcome {
    let mut r = rng(2);
    for _ in 0..100 {
        let seed: u64 = r.random();
        let n_in = r.random_range(4..=512);
        let d = r.random_range(1..=8);
        let n_out = r.random_range(1..=32);
        let layer = DendriticLayer::new(Tensor::zeros(&[n_out, n_in]), seed, d)
            .map_err(|e| e.to_string())?;
        ensure(layer.parameter_count() == n_in * n_out, "parameter count")?;
        let mask = layer.mask();
        for j in 0..n_out {
            let sets = mask.branch_sets(j);
            let mut seen = vec![0u32; n_in];
            for set in &sets {
                for &i in set {
                    seen[i] += 1;
                }
            }
            ensure(
                seen.iter().all(|&c| c == 1),
                format!("not a partition (n_in {n_in}, d {d})"),
            )?;
            let lo = sets.iter().map(Vec::len).min().unwrap();
            let hi = sets.iter().map(Vec::len).max().unwrap();
            ensure(hi - lo <= 1 && sets.len() == d, "unbalanced branches")?;
        }
        let again = build_mask(seed, n_in, n_out, d).map_err(|e| e.to_string())?;
        ensure(
            again.assignment() == mask.assignment(),
            "regeneration differs",
        )?;
    }
    Ok("100 random masks: exact balanced partitions, n_in×n_out parameters, reproducible".into())
}

fn c3_encoder_statistics() -> Outcome {
    let mut r = rng(3);
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a: f64 = r.random_range(0.0..1.0);
        let mut spikes = stream(r.random(), Stream::Encoder);
        let train = poisson_encode(&[a], draws, &mut spikes);
        let rate = train.count(0) as f64 / draws as f64;
        let sigma = (a * (1.0 - a) / draws as f64).sqrt();
        let z = (rate - a).abs() / sigma.max(f64::MIN_POSITIVE);
        worst = worst.max(z);
        ensure(
            z <= 3.0,
            format!("strength {a}: rate {rate} is {z:.2} sigma away"),
        )?;
    }
    for _ in 0..1000 {
        let a: f64 = r.random_range(0.0..1.0);
        for steps in 1..=20 {
            let train = deterministic_encode(&[a], steps);
            let mut v = 0.0;
            for t in 0..steps {
                v += a;
                let fire = v > 1.0;
                if fire {
                    v -= 1.0;
                }
                ensure(
                    train.get(t, 0) == u8::from(fire),
                    format!("strength {a}, T {steps}, step {t}"),
                )?;
            }
        }
    }
    Ok(format!(
        "Poisson worst deviation {worst:.3} sigma; 20 000 deterministic traces exact"
    ))
}

fn c4_lif_trace() -> Outcome {
    let cfg = LifConfig::default();
    let s1 = lif_step(&LifLayerState::zeros(1), &[0.6], &[0.0], &cfg);
    ensure(
        s1.current == [0.6] && s1.potential == [0.6] && s1.spike == [1.0],
        format!("step 1: {s1:?}"),
    )?;
    let s2 = lif_step(&s1, &[0.0], &[0.0], &cfg);
    ensure(
        s2.current == [0.3] && s2.potential == [0.3] && s2.spike == [0.0],
        format!("step 2: {s2:?}"),
    )?;
    let fired = LifLayerState {
        current: vec![0.0],
        potential: vec![0.9],
        spike: vec![1.0],
    };
    let after = lif_step(&fired, &[0.2], &[0.1], &cfg);
    ensure(after.potential == [0.2 + 0.1], format!("reset: {after:?}"))?;
    Ok(
        "c=0.6 v=0.6 o=1, then c=0.3 v=0.3 o=0; potential after a spike carries nothing over"
            .into(),
    )
}

fn c5_gradients() -> Outcome {
    let cfg = SurrogateConfig::new(0.5, 0.5).unwrap();
    let mut r = rng(5);
    let v = random_tensor(&mut r, &[8, 16], -1.0, 2.0);
    let up = random_tensor(&mut r, &[8, 16], -1.0, 1.0);
    let mut tape = Tape::new();
    let vv = tape.input(v.clone());
    let o = spike_step(&mut tape, vv, cfg);
    let c = tape.constant(up.clone());
    let p = tape.mul(o, c);
    let m = tape.mean(p);
    let loss = tape.scale(m, 128.0);
    let g = tape.backward(loss).unwrap();
    let got = g.get(vv).unwrap();
    for i in 0..v.len() {
        let z = if (v.data()[i] - 0.5).abs() < 0.5 {
            1.0
        } else {
            0.0
        };
        ensure(
            got[i] == up.data()[i] * z,
            format!("surrogate mismatch at {i}"),
        )?;
    }

    let mut errors = Vec::new();
    let dense = [
        random_tensor(&mut r, &[4, 6], 0.0, 1.0),
        random_tensor(&mut r, &[5, 6], -1.0, 1.0),
        random_tensor(&mut r, &[5], -1.0, 1.0),
    ];
    errors.push((
        "dense",
        gradient_error(&dense, |t, v| {
            let y = t.linear(v[0], v[1], v[2]);
            weighted_sum(t, y, 51)
        }),
    ));

    let mask = Arc::new(build_mask(52, 10, 4, 2).unwrap());
    let x = random_tensor(&mut r, &[3, 10], -1.0, 1.0);
    let w = random_tensor(&mut r, &[4, 10], -1.0, 1.0);
    for b in 0..3 {
        for j in 0..4 {
            let s: Vec<f64> = mask
                .branch_sets(j)
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|&i| w.data()[j * 10 + i] * x.data()[b * 10 + i])
                        .sum()
                })
                .collect();
            ensure(
                (s[0] - s[1]).abs() > 1e-3,
                "dendritic probe point is near a tie",
            )?;
        }
    }
    errors.push((
        "dendritic",
        gradient_error(&[x, w], |t, v| {
            let y = dendritic_var(t, v[0], v[1], &mask);
            weighted_sum(t, y, 53)
        }),
    ));

    let critic = Critic::new(3, 1, &[16, 16], &mut stream(54, Stream::Init)).unwrap();
    let mut inputs = vec![
        random_tensor(&mut r, &[5, 3], -1.0, 1.0),
        random_tensor(&mut r, &[5, 1], -2.0, 2.0),
    ];
    inputs.extend(critic.net.params().into_iter().cloned());
    errors.push((
        "critic",
        gradient_error(&inputs, |t, v| {
            let q = critic.q_var(t, &v[2..], v[0], v[1]);
            weighted_sum(t, q, 55)
        }),
    ));

    let dec = [
        random_tensor(&mut r, &[4, 20], 0.0, 1.0),
        random_tensor(&mut r, &[2, 10], -0.3, 0.3),
        random_tensor(&mut r, &[2], -0.3, 0.3),
    ];
    errors.push((
        "decoder",
        gradient_error(&dec, |t, v| {
            let raw = decode_raw_var(t, v[0], v[1], v[2]);
            let a = t.tanh(raw);
            weighted_sum(t, a, 56)
        }),
    ));

    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail: Vec<String> = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    ensure(
        worst < 1e-4,
        format!("relative errors: {}", detail.join(", ")),
    )?;
    Ok(format!(
        "surrogate exact; relative errors {}",
        detail.join(", ")
    ))
}

fn c6_bellman() -> Outcome {
    for alg in ["td3", "sac"] {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&[
            format!("algorithm={alg}"),
            "snn.hidden=32,32".into(),
            "critic.hidden=32,32".into(),
        ])
        .unwrap();
        let mut agent = build_agent(&cfg, None).unwrap();
        for seed in 0..10 {
            let mut r = rng(600 + seed);
            let b = 32;
            let batch = Batch {
                states: random_tensor(&mut r, &[b, 3], -1.0, 1.0),
                actions: random_tensor(&mut r, &[b, 1], -2.0, 2.0),
                rewards: (0..b).map(|_| r.random_range(-17.0..0.0)).collect(),
                next_states: random_tensor(&mut r, &[b, 3], -1.0, 1.0),
                dones: vec![1.0; b],
            };
            let (mut noise, mut enc) = (substream(seed, 2), substream(seed, 3));
            let y = match &agent {
                Agent::Td3(a) => a.targets(&batch, &mut noise, &mut enc),
                Agent::Sac(a) => a.targets(&batch, &mut noise, &mut enc),
            }
            .unwrap();
            ensure(
                y == batch.rewards,
                format!("{alg}: terminal targets differ from rewards"),
            )?;
        }
        let critics = match &mut agent {
            Agent::Td3(a) => &mut a.critics,
            Agent::Sac(a) => &mut a.critics,
        };
        for p in critics.online[1].net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = v.sin() * 3.0);
        }
        critics.soft_update(1.0);
        for k in 0..2 {
            ensure(
                critics.online[k].net.params() == critics.target[k].net.params(),
                format!("{alg}: polyak rate 1 did not copy critic {k}"),
            )?;
        }
    }
    Ok("terminal targets equal r for TD3 and SAC over 10 random batches each; rate-1 Polyak copies exactly".into())
}

/// Mean return of uniformly random actions on pendulum over 100 episodes.
fn random_baseline() -> f64 {
    let mut env = EnvKind::Pendulum.make(9_999);
    let mut r = rng(9_998);
    let returns =
        run_episodes(env.as_mut(), 100, |_| Ok(vec![r.random_range(-2.0..=2.0)])).unwrap();
    mean(&returns)
}

fn cli_train(cfg: &Path, out: &Path, seed: u64, extra: &[&str]) -> Result<f64, String> {
    let start = Instant::now();
    let mut cmd = Command::new(BIN);
    cmd.args(["train", "--config"])
        .arg(cfg)
        .args(["--seed", &seed.to_string(), "--out-dir"])
        .arg(out);
    for o in extra {
        cmd.args(["--override", o]);
    }
    let o = cmd.output().map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "train failed: {}",
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok(start.elapsed().as_secs_f64())
}

struct LongRuns {
    baseline: f64,
    td3: (f64, f64, f64),
    sac: (f64, f64, f64),
    determinism: Result<String, String>,
}

/// Runs TD3 twice (criterion 7 compares the two) and SAC once; returns
/// (final return, best return, seconds) per algorithm.
fn long_runs(dir: &Path) -> Result<LongRuns, String> {
    let cfg = dir.join("desk.cfg");
    std::fs::write(&cfg, DESK).map_err(|e| e.to_string())?;
    let baseline = random_baseline();
    let summary = |out: &Path, secs: f64| -> Result<(f64, f64, f64), String> {
        let rows = read_metrics(&out.join("metrics.csv")).map_err(|e| e.to_string())?;
        let last = rows.last().ok_or("no metrics")?;
        ensure(
            last.step == 30_000,
            format!("last record at step {}", last.step),
        )?;
        let best = rows
            .iter()
            .map(|r| r.mean_eval_return)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((last.mean_eval_return, best, secs))
    };
    let (a, b, s) = (dir.join("td3_a"), dir.join("td3_b"), dir.join("sac"));
    let ta = cli_train(&cfg, &a, 1, &["algorithm=td3", "actor_variant=bpt-san"])?;
    let tb = cli_train(&cfg, &b, 1, &["algorithm=td3", "actor_variant=bpt-san"])?;
    let ts = cli_train(&cfg, &s, 1, &["algorithm=sac", "actor_variant=bpt-san"])?;

    let determinism = (|| {
        for f in ["metrics.csv", "checkpoint.bpts"] {
            let x = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(f)).map_err(|e| e.to_string())?;
            ensure(x == y, format!("{f} differs between identical runs"))?;
        }
        let total = ta + tb;
        ensure(total <= 600.0, format!("two runs took {total:.0} s"))?;
        Ok(format!(
            "metrics.csv and checkpoint.bpts byte-identical over two 30k-step runs ({ta:.0} s + {tb:.0} s)"
        ))
    })();
    Ok(LongRuns {
        baseline,
        td3: summary(&a, ta)?,
        sac: summary(&s, ts)?,
        determinism,
    })
}

fn c8_learning(runs: &LongRuns) -> Outcome {
    let need = runs.baseline + 600.0;
    let mut lines = vec![format!(
        "random baseline {:.1}, threshold {need:.1}",
        runs.baseline
    )];
    let mut ok = true;
    for (name, (last, best, secs)) in [("TD3", runs.td3), ("SAC", runs.sac)] {
        lines.push(format!(
            "{name} final {last:.1} (best {best:.1}, {secs:.0} s)"
        ));
        ok &= last >= need && secs <= 900.0;
    }
    ensure(ok, lines.join("; "))?;
    Ok(lines.join("; "))
}

fn c9_ablation(dir: &Path) -> Outcome {
    let out = dir.join("ablation");
    let cfg = dir.join("ablate.cfg");
    std::fs::write(
        &cfg,
        "snn.hidden = 64,64\ncritic.hidden = 64,64\nrl.batch_size = 64\nrl.warmup = 500\n\
         total_steps = 2000\neval_interval = 1000\n\
         ablate.variants = aan,san,bpt-san,bpt-san-no-ndt,bpt-san-no-li\nablate.algorithms = td3\n",
    )
    .map_err(|e| e.to_string())?;
    let o = Command::new(BIN)
        .args(["ablate", "--config"])
        .arg(&cfg)
        .args(["--seeds", "1,2,3", "--out-dir"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        o.status.success(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )?;
    let table = std::fs::read_to_string(out.join("ablation.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<&str> = table.lines().skip(1).collect();
    ensure(rows.len() == 15, format!("{} rows", rows.len()))?;
    for row in &rows {
        let f: Vec<&str> = row.split(',').collect();
        ensure(f[6] == "ok", format!("failed cell: {row}"))?;
        for v in &f[3..6] {
            ensure(
                v.parse::<f64>().map(f64::is_finite).unwrap_or(false),
                format!("non-finite return: {row}"),
            )?;
        }
    }
    let summary =
        std::fs::read_to_string(out.join("ablation_summary.csv")).map_err(|e| e.to_string())?;
    ensure(summary.lines().count() == 6, "summary should have 5 cells")?;
    for line in summary.lines() {
        println!("    {line}");
    }
    Ok(
        "15 cells finished with finite returns; ablation.csv and ablation_summary.csv written"
            .into(),
    )
}

fn c10_checkpoint_round_trip() -> Outcome {
    let mut detail = Vec::new();
    for alg in ["td3", "sac"] {
        let mut cfg: RunConfig = RunConfig::parse(DESK, "desk").unwrap();
        cfg.apply_overrides(&[format!("algorithm={alg}"), "total_steps=2500".into()])
            .unwrap();
        cfg.seed = 10;
        let mut straight = Trainer::new(cfg.clone()).map_err(|e| e.to_string())?;
        for _ in 0..2500 {
            straight.step_once().map_err(|e| e.to_string())?;
        }
        let mut first = Trainer::new(cfg).map_err(|e| e.to_string())?;
        for _ in 0..1500 {
            first.step_once().map_err(|e| e.to_string())?;
        }
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("mid.bpts");
        first.save(&path).map_err(|e| e.to_string())?;
        drop(first);
        let mut resumed = Trainer::load(&path).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            resumed.step_once().map_err(|e| e.to_string())?;
        }
        let (x, y) = (
            straight.to_checkpoint().to_bytes(),
            resumed.to_checkpoint().to_bytes(),
        );
        ensure(
            x == y,
            format!("{alg}: resumed state differs from uninterrupted run"),
        )?;
        let (ex, ey) = (
            straight.evaluate(10).unwrap(),
            resumed.evaluate(10).unwrap(),
        );
        ensure(
            ex.to_bits() == ey.to_bits(),
            format!("{alg}: evaluations differ"),
        )?;
        let _ = Checkpoint::from_bytes(&x, &path).map_err(|e| e.to_string())?;
        detail.push(format!("{alg} {} bytes", x.len()));
    }
    Ok(format!(
        "state after save, load and 1000 more steps is bit-identical ({})",
        detail.join(", ")
    ))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, r: Outcome| {
        match &r {
            Ok(d) => println!("criterion {n:>2} {name}: PASS ({d})"),
            Err(e) => println!("criterion {n:>2} {name}: FAIL ({e})"),
        }
        results.push((n, name, r));
    };
    report(
        1,
        "degenerate equivalence",
        guarded(c1_degenerate_equivalence),
    );
    report(2, "mask invariants", guarded(c2_mask_invariants));
    report(3, "encoder statistics", guarded(c3_encoder_statistics));
    report(4, "LIF trace", guarded(c4_lif_trace));
    report(5, "surrogate and finite differences", guarded(c5_gradients));
    report(6, "Bellman and Polyak contracts", guarded(c6_bellman));
    let runs = catch_unwind(AssertUnwindSafe(|| long_runs(dir.path())));
    match runs {
        Ok(Ok(runs)) => {
            report(7, "determinism", runs.determinism.clone());
            report(8, "learning on pendulum", c8_learning(&runs));
        }
        Ok(Err(e)) => {
            report(7, "determinism", Err(e.clone()));
            report(8, "learning on pendulum", Err(e));
        }
        Err(_) => {
            report(7, "determinism", Err("panicked".into()));
            report(8, "learning on pendulum", Err("panicked".into()));
        }
    }
    report(9, "ablation matrix", guarded(|| c9_ablation(dir.path())));
    report(
        10,
        "checkpoint round trip",
        guarded(c10_checkpoint_round_trip),
    );

    let failed: Vec<u32> = results
        .iter()
        .filter(|r| r.2.is_err())
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
