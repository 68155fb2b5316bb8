use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::matchstore::MatchMatrix;
use crate::net::DenseNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's batches.
    pub loss: f64,
    /// Perfect-match penalty of the current representation over the training
    /// set when object ids are known, otherwise `objective_penalty`.
    pub penalty: f64,
    /// Mean match penalty of the objective itself (0 for ERM).
    pub objective_penalty: f64,
    /// Accuracy over the full training set at the end of the epoch.
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    /// Validation top-10 overlap (phase 1 early stopping).
    pub val_top10: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: Mode,
    pub epochs: Vec<EpochRecord>,
    /// Perfect-match penalty of the freshly initialised network.
    pub initial_penalty: Option<f64>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub network: DenseNet,
    pub final_matches: Option<MatchMatrix>,
    /// Excluded from serialization so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainReport {
    /// `epoch,loss,penalty,train_acc,val_acc`; absent values are empty cells.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,loss,penalty,train_acc,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch,
                e.loss,
                e.penalty,
                fmt_opt(e.train_acc),
                fmt_opt(e.val_acc)
            );
        }
        out
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
