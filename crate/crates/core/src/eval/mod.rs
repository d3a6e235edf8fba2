//! Dataset handling, held-out evaluation and reports.

pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod split;

pub use manifest::{read_manifest, write_manifest, DatasetManifest, FeatureRow, ManifestRow};
pub use metrics::{read_metrics_csv, write_report, ConfusionMatrix, Metrics};
pub use split::{split_dataset, stratified_split_indices};
pub use harness::{evaluate, sweep_hidden_widths, write_sweep_report, SweepEntry};
