use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bptsan");

const TINY: &[&str] = &[
    "snn.hidden=12,12",
    "critic.hidden=16,16",
    "rl.batch_size=8",
    "rl.warmup=20",
    "total_steps=100",
    "eval_interval=50",
    "eval_episodes=1",
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn train(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train".to_string(),
        "--out-dir".into(),
        out.display().to_string(),
    ];
    for o in TINY.iter().chain(extra) {
        args.push("--override".into());
        args.push(o.to_string());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn identical_seeds_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# tiny run\nactor_variant = bpt-san\n").unwrap();
    for out in [&a, &b] {
        let o = Command::new(BIN)
            .args([
                "train",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "7",
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .args(TINY.iter().flat_map(|o| ["--override", o]))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["metrics.csv", "checkpoint.bpts"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",7")));
}

#[test]
fn zero_steps_writes_header_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), &["total_steps=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(
        csv,
        "step,mean_eval_return,actor_loss,critic_loss,wall_ms,seed\n"
    );
    let ckpt = dir.path().join("checkpoint.bpts");
    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--episodes",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bad_variant_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), &["actor_variant=spiky"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("actor_variant"), "{}", stderr(&o));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\n\nrl.gamma = 2\n").unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("bad.cfg:3: `rl.gamma`"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn damaged_checkpoints_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), &["total_steps=0"]).status.success());
    let ckpt = dir.path().join("checkpoint.bpts");
    let mut bytes = std::fs::read(&ckpt).unwrap();

    let corrupt = dir.path().join("corrupt.bpts");
    let mut c = bytes.clone();
    let mid = c.len() / 2;
    c[mid] ^= 0xff;
    std::fs::write(&corrupt, &c).unwrap();
    let o = run(&["eval", "--checkpoint", corrupt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));

    let future = dir.path().join("future.bpts");
    bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
    let n = bytes.len() - 4;
    let crc = crc32fast::hash(&bytes[..n]);
    bytes[n..].copy_from_slice(&crc.to_le_bytes());
    std::fs::write(&future, &bytes).unwrap();
    let o = run(&["eval", "--checkpoint", future.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("version 9"), "{}", stderr(&o));
}

#[test]
fn eval_prints_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), &[]).status.success());
    let ckpt = dir.path().join("checkpoint.bpts");
    for _ in 0..2 {
        let o = run(&[
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--episodes",
            "2",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("mean_eval_return "));
    }
    let csv = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn resume_continues_the_same_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    assert!(train(&full, &[]).status.success());
    assert!(train(&part, &["total_steps=50"]).status.success());
    let o = run(&[
        "train",
        "--resume",
        part.join("checkpoint.bpts").to_str().unwrap(),
        "--until",
        "100",
        "--out-dir",
        part.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(full.join("metrics.csv")).unwrap(),
        std::fs::read(part.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(full.join("checkpoint.bpts")).unwrap(),
        std::fs::read(part.join("checkpoint.bpts")).unwrap()
    );
}

#[test]
fn ablate_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = [
        "ablate",
        "--seeds",
        "1,2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for o in TINY.iter().chain(&[
        "ablate.variants=aan,bpt-san",
        "total_steps=40",
        "eval_interval=40",
    ]) {
        args.push("--override".into());
        args.push(o.to_string());
    }
    let o = Command::new(BIN).args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    let summary = std::fs::read_to_string(dir.path().join("ablation_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
