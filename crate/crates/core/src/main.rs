use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bptsan::harness::{run_ablation, Checkpoint, MetricsWriter, RunConfig, Trainer};
use bptsan::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bptsan",
    version,
    about = "Spiking actor networks trained with TD3 and SAC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run, logging metrics.csv and writing checkpoint.bpts.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// `key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long, conflicts_with_all = ["config", "seed", "overrides"])]
        resume: Option<PathBuf>,
        /// Train until this step when resuming.
        #[arg(long, requires = "resume")]
        until: Option<usize>,
    },
    /// Evaluate a checkpoint's greedy policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the variant × algorithm × seed comparison matrix.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated seeds; overrides `ablate.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, Error> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

fn train(mut trainer: Trainer, out_dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(out_dir)?;
    let metrics = out_dir.join("metrics.csv");
    if trainer.step_count() == 0 && metrics.exists() {
        fs::remove_file(&metrics)?;
    }
    let mut writer = MetricsWriter::open(&metrics)?;
    trainer.run(|r| {
        println!("step {} mean_eval_return {:.3}", r.step, r.mean_eval_return);
        writer.write(r)
    })?;
    trainer.save(&out_dir.join("checkpoint.bpts"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out_dir,
            overrides,
            resume,
            until,
        } => {
            let trainer = match resume {
                Some(path) => {
                    let mut ckpt = Checkpoint::load(&path)?;
                    if let Some(u) = until {
                        let mut cfg = RunConfig::parse(&ckpt.config, "checkpoint config")?;
                        cfg.total_steps = u;
                        ckpt.config = cfg.serialize();
                    }
                    Trainer::from_checkpoint(&ckpt)?
                }
                None => {
                    let mut cfg = load_config(config.as_deref(), &overrides)?;
                    if let Some(s) = seed {
                        cfg.seed = s;
                    }
                    Trainer::new(cfg)?
                }
            };
            train(trainer, &out_dir)
        }
        Command::Eval {
            checkpoint,
            episodes,
            out_dir,
        } => {
            if episodes == 0 {
                return Err(Error::ConfigParse {
                    source_name: "arguments".into(),
                    line: 0,
                    message: "`--episodes` must be at least 1".into(),
                });
            }
            let trainer = Trainer::load(&checkpoint)?;
            let mean = trainer.evaluate(episodes)?;
            println!("mean_eval_return {mean}");
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join("eval.csv");
            let fresh = !path.exists();
            let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
            if fresh {
                writeln!(f, "checkpoint,step,episodes,mean_eval_return,seed")?;
            }
            writeln!(
                f,
                "{},{},{episodes},{mean},{}",
                checkpoint.display(),
                trainer.step_count(),
                trainer.config().seed
            )?;
            f.flush()?;
            Ok(())
        }
        Command::Ablate {
            config,
            seeds,
            out_dir,
            overrides,
        } => {
            let mut cfg = load_config(config.as_deref(), &overrides)?;
            if !seeds.is_empty() {
                cfg.ablate_seeds = seeds;
            }
            let rows = run_ablation(&cfg, &out_dir)?;
            for r in &rows {
                match &r.error {
                    None => println!(
                        "{} {} seed {}: max {:.3} final {:.3}",
                        r.cell.algorithm, r.cell.variant, r.cell.seed, r.max, r.last
                    ),
                    Some(e) => println!(
                        "{} {} seed {}: failed: {e}",
                        r.cell.algorithm, r.cell.variant, r.cell.seed
                    ),
                }
            }
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigParse { .. } | Error::Config(_) => 2,
        Error::Checkpoint { .. } | Error::Checksum { .. } | Error::Version { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
