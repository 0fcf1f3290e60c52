use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "step,mean_eval_return,actor_loss,critic_loss,wall_ms,seed";

/// One evaluation point. Losses are interval means, NaN when no update ran.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub step: u64,
    pub mean_eval_return: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub wall_ms: u64,
    pub seed: u64,
}

impl MetricRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step,
            self.mean_eval_return,
            self.actor_loss,
            self.critic_loss,
            self.wall_ms,
            self.seed
        )
    }

    pub fn parse_row(line: &str) -> Result<MetricRecord> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return Err(Error::input(format!(
                "metrics row needs 6 fields: `{line}`"
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::input(format!("bad number `{s}`")))
        };
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::input(format!("bad integer `{s}`")))
        };
        Ok(MetricRecord {
            step: int(f[0])?,
            mean_eval_return: num(f[1])?,
            actor_loss: num(f[2])?,
            critic_loss: num(f[3])?,
            wall_ms: int(f[4])?,
            seed: int(f[5])?,
        })
    }
}

/// Append-only CSV sink; every record is flushed as it is written.
pub struct MetricsWriter {
    file: File,
}

impl MetricsWriter {
    /// Opens for append, writing the header only into an empty file.
    pub fn open(path: &Path) -> Result<MetricsWriter> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "{METRICS_HEADER}")?;
            file.flush()?;
        }
        Ok(MetricsWriter { file })
    }

    pub fn write(&mut self, record: &MetricRecord) -> Result<()> {
        writeln!(self.file, "{}", record.csv_row())?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != METRICS_HEADER {
                return Err(Error::input(format!(
                    "{} is not a metrics file",
                    path.display()
                )));
            }
            continue;
        }
        if !line.trim().is_empty() {
            out.push(MetricRecord::parse_row(&line)?);
        }
    }
    Ok(out)
}
