//! Match-quality metrics against ground-truth perfect matches, accuracy, and
//! plot-ready traces.
//!
//! All three match metrics enumerate the perfect pairs `(j, k)`: `j` is a
//! base-domain anchor and `k` its true counterpart in another domain `d`.
//! Ranking metrics order the same-class candidates of domain `d` by squared
//! Euclidean distance to `Φ(x_j)`, ties broken by lower index; ranks are
//! 0-based, so "top 10" means rank < 10.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::MultiDomainDataset;
use crate::linalg::{squared_distance, Matrix};
use crate::losses::argmax;
use crate::matchstore::{MatchMatrix, ReprTable};
use crate::net::DenseNet;
use crate::trainer::TrainReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overlap_pct: Option<f64>,
    pub top10_overlap_pct: Option<f64>,
    pub mean_rank: Option<f64>,
    pub per_domain_accuracy: BTreeMap<String, f64>,
    pub ood_accuracy: Option<f64>,
}

fn check_aligned(a: &MatchMatrix, b: &MatchMatrix) -> Result<()> {
    if a.num_domains != b.num_domains || a.base_domains != b.base_domains {
        return Err(Error::Mismatch(
            "match matrices use different domains or base-domain mappings".into(),
        ));
    }
    Ok(())
}

/// Percentage of perfect pairs reproduced by `learned`.
pub fn overlap(learned: &MatchMatrix, perfect: &MatchMatrix) -> Result<f64> {
    check_aligned(learned, perfect)?;
    let by_anchor: HashMap<(usize, usize), &[usize]> = learned
        .rows
        .iter()
        .map(|r| ((r.class, learned.anchor(r)), r.entries.as_slice()))
        .collect();
    let mut hits = 0usize;
    let mut total = 0usize;
    for row in &perfect.rows {
        let b = perfect.base_of(row);
        let learned_row = by_anchor.get(&(row.class, row.entries[b]));
        for (d, &k) in row.entries.iter().enumerate() {
            if d == b {
                continue;
            }
            total += 1;
            if learned_row.is_some_and(|l| l[d] == k) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptySplit(
            "perfect match matrix has no pairs".into(),
        ));
    }
    Ok(100.0 * hits as f64 / total as f64)
}

/// Top-10 overlap and mean rank, computed in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub top10_overlap_pct: f64,
    pub mean_rank: f64,
    pub pairs: usize,
    pub skipped: usize,
}

pub fn rank_metrics(
    repr: &ReprTable,
    ds: &MultiDomainDataset,
    perfect: &MatchMatrix,
) -> Result<RankMetrics> {
    if repr.domains.len() != ds.num_domains() || perfect.num_domains != ds.num_domains() {
        return Err(Error::Mismatch(
            "representation / dataset / matrix domains".into(),
        ));
    }
    let pools: Vec<Vec<Vec<usize>>> = (0..ds.num_classes)
        .map(|c| ds.domains.iter().map(|d| d.indices_of_class(c)).collect())
        .collect();
    let mut in_top10 = 0usize;
    let mut rank_sum = 0usize;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    for row in &perfect.rows {
        let b = perfect.base_of(row);
        let anchor = repr.row(b, row.entries[b]);
        for (d, &k) in row.entries.iter().enumerate() {
            if d == b {
                continue;
            }
            let cands = &pools[row.class][d];
            if cands.binary_search(&k).is_err() {
                log::warn!(
                    "perfect pair (class {}, domain {d}, index {k}) has no same-class candidate; skipped",
                    row.class
                );
                skipped += 1;
                continue;
            }
            let target = squared_distance(anchor, repr.row(d, k));
            let rank = cands
                .iter()
                .filter(|&&c| {
                    let dist = squared_distance(anchor, repr.row(d, c));
                    dist < target || (dist == target && c < k)
                })
                .count();
            rank_sum += rank;
            if rank < 10 {
                in_top10 += 1;
            }
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::EmptySplit("no rankable perfect pairs".into()));
    }
    Ok(RankMetrics {
        top10_overlap_pct: 100.0 * in_top10 as f64 / pairs as f64,
        mean_rank: rank_sum as f64 / pairs as f64,
        pairs,
        skipped,
    })
}

pub fn top10_overlap(
    repr: &ReprTable,
    ds: &MultiDomainDataset,
    perfect: &MatchMatrix,
) -> Result<f64> {
    Ok(rank_metrics(repr, ds, perfect)?.top10_overlap_pct)
}

pub fn mean_rank(repr: &ReprTable, ds: &MultiDomainDataset, perfect: &MatchMatrix) -> Result<f64> {
    Ok(rank_metrics(repr, ds, perfect)?.mean_rank)
}

pub fn argmax_accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = (0..logits.rows())
        .filter(|&r| argmax(logits.row(r)) == labels[r])
        .count();
    correct as f64 / labels.len() as f64
}

/// Argmax accuracy of `net` on each domain of `ds`.
pub fn accuracy(net: &DenseNet, ds: &MultiDomainDataset) -> Result<BTreeMap<String, f64>> {
    if ds.is_empty() {
        return Err(Error::EmptySplit("accuracy on an empty split".into()));
    }
    ds.domains
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| {
            Ok((
                d.name.clone(),
                argmax_accuracy(&net.logits(&d.x)?, &d.labels),
            ))
        })
        .collect()
}

/// Pooled accuracy over every sample of `ds`.
pub fn pooled_accuracy(net: &DenseNet, ds: &MultiDomainDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptySplit("accuracy on an empty split".into()));
    }
    let mut correct = 0.0;
    for d in ds.domains.iter().filter(|d| !d.is_empty()) {
        correct += argmax_accuracy(&net.logits(&d.x)?, &d.labels) * d.len() as f64;
    }
    Ok(correct / ds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTraceRow {
    pub epoch: usize,
    pub penalty: f64,
    /// Absent for epochs that never classified (contrastive training).
    pub train_error: Option<f64>,
}

/// Per-epoch `(epoch, penalty, train_error)` rows for plotting.
pub fn penalty_trace(report: &TrainReport) -> Vec<PenaltyTraceRow> {
    report
        .epochs
        .iter()
        .map(|e| PenaltyTraceRow {
            epoch: e.epoch,
            penalty: e.penalty,
            train_error: e.train_acc.map(|a| 1.0 - a),
        })
        .collect()
}

pub fn penalty_trace_csv(rows: &[PenaltyTraceRow]) -> String {
    let mut out = String::from("epoch,penalty,train_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.epoch,
            r.penalty,
            crate::trainer::fmt_opt(r.train_error)
        ));
    }
    out
}
