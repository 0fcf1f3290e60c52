mod common;

use bptsan::diff::{maxout_reduce, Tape, Tensor};
use bptsan::encoding::{deterministic_encode, ActionDecoder, PopulationEncoder};
use bptsan::envs::EnvKind;
use bptsan::harness::RunConfig;
use bptsan::rl::{bellman_target, polyak_update, Algorithm, ReplayBuffer, Transition};
use bptsan::snn::{build_mask, intra_lateral, neighbour, ActorVariant, LateralConnection};
use proptest::prelude::*;

fn transition(i: usize) -> Transition {
    let x = i as f64;
    Transition {
        state: vec![x, -x],
        action: vec![0.5 * x],
        reward: -x,
        next_state: vec![x + 1.0, -x - 1.0],
        done: i % 3 == 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_is_a_balanced_partition(seed: u64, n_in in 4usize..512, n_out in 1usize..6, d in 1usize..=8) {
        let mask = build_mask(seed, n_in, n_out, d).unwrap();
        for j in 0..n_out {
            let sets = mask.branch_sets(j);
            prop_assert_eq!(sets.len(), d);
            let mut all: Vec<usize> = sets.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_in).collect::<Vec<_>>());
            let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(mask.assignment().len(), n_in * n_out);
        let again = build_mask(seed, n_in, n_out, d).unwrap();
        prop_assert_eq!(again.assignment(), mask.assignment());
    }

    #[test]
    fn maxout_picks_the_max_and_routes_to_the_first_winner(
        vals in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 0.5, 2.0]), 12),
    ) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(vec![1, 3, 4], vals.clone()).unwrap());
        let y = maxout_reduce(&mut tape, x);
        let m = tape.mean(y);
        let s = tape.scale(m, 4.0);
        let g = tape.backward(s).unwrap();
        let grad = g.get(x).unwrap();
        let out = tape.value(y).data();
        for n in 0..4 {
            let col: Vec<f64> = (0..3).map(|b| vals[b * 4 + n]).collect();
            let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(out[n], best);
            let winner = col.iter().position(|&v| v == best).unwrap();
            for (b, _) in col.iter().enumerate() {
                prop_assert_eq!(grad[b * 4 + n], if b == winner { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn replay_keeps_the_most_recent(capacity in 1usize..40, extra in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity, 2, 1).unwrap();
        let total = capacity + extra;
        for i in 0..total {
            buf.push(transition(i)).unwrap();
        }
        prop_assert_eq!(buf.len(), capacity);
        let mut rewards: Vec<i64> = (0..capacity).map(|i| -buf.get(i).unwrap().reward as i64).collect();
        rewards.sort_unstable();
        prop_assert_eq!(rewards, ((total - capacity) as i64..total as i64).collect::<Vec<_>>());
    }

    #[test]
    fn terminal_bellman_target_is_reward(
        rewards in prop::collection::vec(-100.0f64..100.0, 1..32),
        gamma in 0.01f64..0.999,
        next in -1e3f64..1e3,
    ) {
        let dones = vec![1.0; rewards.len()];
        let next = vec![next; rewards.len()];
        prop_assert_eq!(bellman_target(&rewards, &dones, gamma, &next), rewards);
    }

    #[test]
    fn polyak_extremes(vals in prop::collection::vec(-10.0f64..10.0, 1..20), offset in -5.0f64..5.0) {
        let online = Tensor::vector(vals.clone());
        let mut target = Tensor::vector(vals.iter().map(|v| v + offset).collect());
        let orig = target.clone();
        polyak_update(vec![&mut target], vec![&online], 0.0);
        prop_assert_eq!(&target, &orig);
        polyak_update(vec![&mut target], vec![&online], 1.0);
        prop_assert_eq!(&target, &online);
    }

    #[test]
    fn deterministic_counts_match_brute_force(a in 0.0f64..1.0, steps in 1usize..=20) {
        let train = deterministic_encode(&[a], steps);
        let mut v = 0.0;
        let mut count = 0;
        for _ in 0..steps {
            v += a;
            if v > 1.0 {
                count += 1;
                v -= 1.0;
            }
        }
        prop_assert_eq!(train.count(0), count);
    }

    #[test]
    fn decoded_actions_stay_in_bounds(
        rates in prop::collection::vec(0.0f64..=1.0, 10),
        w in prop::collection::vec(-50.0f64..50.0, 10),
        b in -50.0f64..50.0,
    ) {
        let dec = ActionDecoder::new(
            Tensor::new(vec![1, 10], w).unwrap(),
            Tensor::vector(vec![b]),
            vec![-2.0],
            vec![2.0],
        )
        .unwrap();
        let a = dec.squash(&dec.raw(&rates));
        prop_assert!((-2.0..=2.0).contains(&a[0]));
    }

    #[test]
    fn population_strengths_lie_in_unit_interval(s in -10.0f64..10.0) {
        let enc = PopulationEncoder::new(&[-1.0], &[1.0], 10, false).unwrap();
        for v in enc.encode(&[s]).unwrap() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn ring_neighbourhood_excludes_self(n in 5usize..40, r in 1usize..=2) {
        for j in 0..n {
            let mut nb: Vec<usize> = (0..2 * r).map(|k| neighbour(j, k, r, n)).collect();
            prop_assert!(!nb.contains(&j));
            nb.sort_unstable();
            nb.dedup();
            prop_assert_eq!(nb.len(), 2 * r);
        }
        let mut lat = LateralConnection::zeros(n, r).unwrap();
        lat.weights.data_mut().fill(1.0);
        prop_assert_eq!(intra_lateral(&vec![1.0; n], &lat), vec![2.0 * r as f64; n]);
    }

    #[test]
    fn environments_stay_finite_and_bounded(
        seed: u64,
        actions in prop::collection::vec(-1e6f64..1e6, 400),
        reacher: bool,
    ) {
        let kind = if reacher { EnvKind::Reacher } else { EnvKind::Pendulum };
        let mut env = kind.make(seed);
        let m = env.spec().action_dim;
        let limit = env.spec().max_episode_steps;
        let mut obs = env.reset();
        let mut len = 0;
        for chunk in actions.chunks(m) {
            if chunk.len() < m {
                break;
            }
            let step = env.step(chunk).unwrap();
            len += 1;
            prop_assert!(step.observation.iter().all(|v| v.is_finite()));
            prop_assert!(step.reward.is_finite());
            prop_assert!(len <= limit);
            obs = step.observation;
            if step.done {
                obs = env.reset();
                len = 0;
            }
        }
        prop_assert!(obs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn same_seed_same_start(seed: u64) {
        for kind in [EnvKind::Pendulum, EnvKind::Reacher] {
            prop_assert_eq!(kind.make(seed).reset(), kind.make(seed).reset());
        }
    }

    #[test]
    fn config_round_trips(
        seed: u64,
        hidden in prop::collection::vec(1usize..300, 1..4),
        d in 1usize..4,
        gamma in 0.01f64..0.999,
        lr in 1e-6f64..1e-1,
        d_v in 0.0f64..=1.0,
        variant in prop::sample::select(ActorVariant::ALL.to_vec()),
        alg in prop::sample::select(Algorithm::ALL.to_vec()),
        coding in prop::sample::select(vec!["auto", "poisson", "deterministic"]),
        low in prop::option::of(prop::collection::vec(-5.0f64..-0.1, 3)),
    ) {
        let mut cfg = RunConfig {
            seed,
            hidden: hidden.iter().map(|h| h + 10).collect(),
            branches: d,
            actor_variant: variant,
            algorithm: alg,
            state_low: low,
            ..RunConfig::default()
        };
        cfg.train.gamma = gamma;
        cfg.train.actor_lr = lr;
        cfg.lif.d_v = d_v;
        cfg.set("encoder.kind", coding).unwrap();
        let text = cfg.serialize();
        let back = RunConfig::parse(&text, "t").unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }
}
