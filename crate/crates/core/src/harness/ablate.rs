use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::RunConfig;
use super::metrics::MetricsWriter;
use super::train::Trainer;
use crate::error::Result;
use crate::rl::Algorithm;
use crate::snn::ActorVariant;

pub const ABLATION_HEADER: &str =
    "algorithm,variant,seed,initial_mean_eval_return,max_mean_eval_return,final_mean_eval_return,status,error";
pub const SUMMARY_HEADER: &str =
    "algorithm,variant,seeds_ok,seeds_failed,mean_max_return,std_max_return,mean_final_return,std_final_return";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationCell {
    pub algorithm: Algorithm,
    pub variant: ActorVariant,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub cell: AblationCell,
    /// Greedy return before any training.
    pub initial: f64,
    pub max: f64,
    pub last: f64,
    pub error: Option<String>,
}

impl AblationRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn csv(&self) -> String {
        let (status, err) = match &self.error {
            None => ("ok", String::new()),
            Some(e) => ("failed", e.replace([',', '\n', '"'], " ")),
        };
        format!(
            "{},{},{},{},{},{},{status},{err}",
            self.cell.algorithm,
            self.cell.variant,
            self.cell.seed,
            self.initial,
            self.max,
            self.last
        )
    }
}

fn run_cell(base: &RunConfig, cell: AblationCell, out_dir: &Path) -> Result<(f64, f64, f64)> {
    let mut cfg = base.clone();
    cfg.algorithm = cell.algorithm;
    cfg.actor_variant = cell.variant;
    cfg.seed = cell.seed;
    let mut trainer = Trainer::new(cfg)?;
    let initial = trainer.evaluate(trainer.config().eval_episodes)?;
    let path = out_dir.join(format!(
        "{}_{}_seed{}.csv",
        cell.algorithm, cell.variant, cell.seed
    ));
    if path.exists() {
        fs::remove_file(&path)?;
    }
    let mut writer = MetricsWriter::open(&path)?;
    let mut returns = Vec::new();
    trainer.run(|r| {
        returns.push(r.mean_eval_return);
        writer.write(r)
    })?;
    if returns.is_empty() {
        returns.push(trainer.evaluate(trainer.config().eval_episodes)?);
    }
    let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((initial, max, *returns.last().expect("non-empty")))
}

/// Runs every (algorithm, variant, seed) cell of the configured matrix and
/// writes `ablation.csv`, `ablation_summary.csv` and per-cell metric logs
/// under `out_dir`. A failing cell is recorded and the others continue.
pub fn run_ablation(base: &RunConfig, out_dir: &Path) -> Result<Vec<AblationRow>> {
    let cells_dir = out_dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    let mut cells = Vec::new();
    for &algorithm in &base.ablate_algorithms {
        for &variant in &base.ablate_variants {
            for &seed in &base.ablate_seeds {
                cells.push(AblationCell {
                    algorithm,
                    variant,
                    seed,
                });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<AblationRow>>> = Mutex::new(vec![None; cells.len()]);
    let workers = base.ablate_workers.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&cell) = cells.get(i) else { break };
                let row = match run_cell(base, cell, &cells_dir) {
                    Ok((initial, max, last)) => AblationRow {
                        cell,
                        initial,
                        max,
                        last,
                        error: None,
                    },
                    Err(e) => AblationRow {
                        cell,
                        initial: f64::NAN,
                        max: f64::NAN,
                        last: f64::NAN,
                        error: Some(e.to_string()),
                    },
                };
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    let rows: Vec<AblationRow> = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();

    let mut table = format!("{ABLATION_HEADER}\n");
    for row in &rows {
        let _ = writeln!(table, "{}", row.csv());
    }
    fs::write(out_dir.join("ablation.csv"), table)?;
    fs::write(out_dir.join("ablation_summary.csv"), summary(base, &rows))?;
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn summary(base: &RunConfig, rows: &[AblationRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for &algorithm in &base.ablate_algorithms {
        for &variant in &base.ablate_variants {
            let cell_rows: Vec<&AblationRow> = rows
                .iter()
                .filter(|r| r.cell.algorithm == algorithm && r.cell.variant == variant)
                .collect();
            let ok: Vec<&&AblationRow> = cell_rows.iter().filter(|r| r.ok()).collect();
            let maxes: Vec<f64> = ok.iter().map(|r| r.max).collect();
            let lasts: Vec<f64> = ok.iter().map(|r| r.last).collect();
            let (mm, sm) = mean_std(&maxes);
            let (mf, sf) = mean_std(&lasts);
            let _ = writeln!(
                out,
                "{algorithm},{variant},{},{},{mm},{sm},{mf},{sf}",
                ok.len(),
                cell_rows.len() - ok.len()
            );
        }
    }
    out
}
