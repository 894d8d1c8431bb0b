//! ROC/AUC scoring, threshold × noise sweeps and their CSV reports.

mod report;
mod roc;
mod sweep;

pub use report::{emit_csv, emit_roc_points, read_csv, roc_file_name, CSV_HEADER};
pub use roc::{roc_auc, Roc};
pub use sweep::{attributable_savings_pct, sweep, EvalReport, EvalRow, NetworkKind, Scorer, SweepConfig, SweepMode};
