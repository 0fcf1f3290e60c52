//! Run configuration, training driver, checkpoints, metric logs and the ablation runner.

mod ablate;
mod checkpoint;
mod config;
mod metrics;
mod train;

pub use ablate::{run_ablation, AblationCell, AblationRow, ABLATION_HEADER, SUMMARY_HEADER};
pub use checkpoint::{ArrayData, Checkpoint, MAGIC, VERSION};
pub use config::{EncoderKind, RunConfig, KEYS};
pub use metrics::{read_metrics, MetricRecord, MetricsWriter, METRICS_HEADER};
pub use train::{build_agent, evaluate_agent, Trainer};
