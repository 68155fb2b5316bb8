//! Training modes: ERM, random/perfect-match regularised ERM, the two MatchDG
//! phases, the hybrid of inferred and oracle matches, and the
//! fraction-of-perfect-matches ablation.

mod batches;
mod config;
mod modes;
mod report;

pub use config::{EarlyStopMetric, Mode, TrainConfig};
pub use modes::{
    fraction_match_experiment, perfect_penalty, run_mode, train_erm, train_matchdg_phase1,
    train_matchdg_phase2, train_matched, train_mdghybrid, ModeOutput, Phase1Output,
};
pub(crate) use report::fmt_opt;
pub use report::{EpochRecord, TrainReport};
