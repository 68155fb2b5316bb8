//! Experiment runner behind the `cmdg` binary: JSON configs with `key=value`
//! overrides, per-seed training and evaluation, report files, cross-seed
//! summaries, and summary comparison tables.
//!
//! Output directory layout after `run`:
//!
//! | file | contents |
//! |------|----------|
//! | `report_<seed>.json` | [`SeedReport`]: configs, metrics, per-epoch records, final parameters |
//! | `trace_<seed>.csv` | `run,epoch,loss,penalty,train_acc,val_acc` |
//! | `matches_<seed>[_<run>].csv` + `.json` | final match matrix and its sidecar |
//! | `meta_<seed>.json` | wall-clock seconds per run |
//! | `summary.json` | [`Summary`]: mean and std per run across seeds |

mod config;
mod presets;
mod runner;
mod summary;

pub use config::{
    apply_override, DatasetSpec, EvalConfig, ExperimentConfig, ResolvedRun, RunSpec, SplitConfig,
};
pub use presets::{preset, PRESETS};
pub use runner::{
    evaluate, execute_run, exit_code, prepare_split, report_path, run_experiment, run_seed,
    threads_from_env, write_seed_outputs, RunResult, SeedReport, SplitInfo, REPORT_FORMAT,
    THREADS_ENV,
};
pub use summary::{compare, RunSummary, Stat, Summary, SUMMARY_FORMAT};
