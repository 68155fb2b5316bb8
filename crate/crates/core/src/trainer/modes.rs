use std::time::Instant;

use super::batches::{balanced_batches, row_batches, uniform_samples};
use super::{EarlyStopMetric, EpochRecord, Mode, TrainConfig, TrainReport};
use crate::data::MultiDomainDataset;
use crate::losses::{
    contrastive_loss, hybrid_loss, match_penalty_table, matched_erm_loss, LossBreakdown,
    MatchPenaltyConfig, MatchedBatch,
};
use crate::matchstore::{
    infer_matches, mixed_matches, perfect_matches, random_matches, refresh, MatchMatrix, ReprTable,
    Strategy,
};
use crate::metrics::{overlap, pooled_accuracy, top10_overlap};
use crate::net::{DenseNet, Sgd, Upstream};
use crate::rng::{stream, stream_rng};
use crate::{Error, Result};

/// Keeps the best parameters seen so far under a "higher is better" metric.
/// Ties go to the later epoch, so a saturated metric (e.g. 100% top-10 on a
/// small validation split) keeps the most trained network.
struct BestTracker {
    best: Option<(f64, usize, DenseNet)>,
    patience: Option<usize>,
}

impl BestTracker {
    fn new(patience: Option<usize>) -> Self {
        Self {
            best: None,
            patience,
        }
    }

    /// Records `value` for `epoch`; returns true when training should stop.
    fn observe(&mut self, value: f64, epoch: usize, net: &DenseNet) -> bool {
        let improved = self.best.as_ref().is_none_or(|(b, _, _)| value >= *b);
        if improved {
            self.best = Some((value, epoch, net.clone()));
        }
        match (self.patience, &self.best) {
            (Some(p), Some((_, best_epoch, _))) => epoch - best_epoch >= p,
            _ => false,
        }
    }
}

fn perfect_diagnostic(ds: &MultiDomainDataset) -> Option<MatchMatrix> {
    if ds.has_object_ids() {
        perfect_matches(ds).ok()
    } else {
        None
    }
}

fn diag_penalty(
    net: &DenseNet,
    ds: &MultiDomainDataset,
    pm: Option<&MatchMatrix>,
) -> Result<Option<f64>> {
    pm.map(|m| Ok(match_penalty_table(&ReprTable::from_net(net, ds)?, m)))
        .transpose()
}

fn new_network(ds: &MultiDomainDataset, cfg: &TrainConfig) -> Result<DenseNet> {
    DenseNet::mlp_with_repr(
        ds.input_dim(),
        &cfg.hidden,
        ds.num_classes,
        cfg.repr_activation,
        cfg.seed,
    )
}

/// Shared classifier loop: SGD over the batches produced for each epoch,
/// per-epoch diagnostics, and validation-accuracy checkpointing.
fn fit_classifier<B, O>(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    cfg: &TrainConfig,
    mode: Mode,
    mut make_batches: B,
    objective: O,
) -> Result<TrainReport>
where
    B: FnMut(usize) -> Vec<MatchedBatch>,
    O: Fn(&DenseNet, &MatchedBatch) -> Result<LossBreakdown>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySplit("training split".into()));
    }
    let started = Instant::now();
    let mut net = new_network(train, cfg)?;
    let mut opt = Sgd::new(cfg.optimizer)?;
    let diag = perfect_diagnostic(train);
    let initial_penalty = diag_penalty(&net, train, diag.as_ref())?;
    let use_val = !val.is_empty() && cfg.classifier_early_stop() == EarlyStopMetric::ValAccuracy;
    let mut tracker = BestTracker::new(cfg.patience);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let batches = make_batches(epoch);
        let (mut loss_sum, mut pen_sum) = (0.0, 0.0);
        for batch in &batches {
            let out = objective(&net, batch)?;
            loss_sum += out.total;
            pen_sum += out.penalty();
            opt.step(&mut net, &out.grads)?;
        }
        let n = batches.len().max(1) as f64;
        let objective_penalty = pen_sum / n;
        let val_acc = if val.is_empty() {
            None
        } else {
            Some(pooled_accuracy(&net, val)?)
        };
        let perfect = diag_penalty(&net, train, diag.as_ref())?;
        epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / n,
            penalty: perfect.unwrap_or(objective_penalty),
            objective_penalty,
            train_acc: Some(pooled_accuracy(&net, train)?),
            val_acc,
            val_top10: None,
        });
        if use_val && tracker.observe(val_acc.unwrap_or(0.0), epoch, &net) {
            stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    let (network, best_epoch) = match tracker.best {
        Some((_, e, best)) if use_val => (best, Some(e)),
        _ => (net, epochs.last().map(|e| e.epoch)),
    };
    Ok(TrainReport {
        mode,
        epochs,
        initial_penalty,
        best_epoch,
        stopped_early,
        network,
        final_matches: None,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Minibatch SGD on cross-entropy with domain-balanced batches.
pub fn train_erm(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut rng = stream_rng(cfg.seed, stream::BATCHES);
    let none = MatchPenaltyConfig { lambda: 0.0 };
    fit_classifier(
        train,
        val,
        cfg,
        Mode::Erm,
        |_| {
            balanced_batches(train, cfg.batch_rows, &mut rng)
                .into_iter()
                .map(|samples| {
                    let mut b = MatchedBatch::empty(train.input_dim());
                    b.push_samples(train, &samples);
                    b.close_part();
                    b
                })
                .collect()
        },
        |net, b| matched_erm_loss(net, b, &none),
    )
}

fn check_strategy(mode: Mode, strategy: Strategy) -> Result<()> {
    let ok = match mode {
        Mode::Perfmatch => strategy == Strategy::Perfect,
        Mode::Randmatch => matches!(
            strategy,
            Strategy::Random | Strategy::Mixed | Strategy::Perfect
        ),
        Mode::MatchdgPhase2 | Mode::Mdghybrid => true,
        Mode::Erm | Mode::MatchdgPhase1 => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "mode {} cannot train on {} matches",
            mode.as_str(),
            strategy.as_str()
        )))
    }
}

/// Cross-entropy plus `λ ·` match penalty over batches of match rows.
///
/// Inferred matches can be many-to-one and leave samples out of every row, so
/// each inferred batch carries a second part of `batch_rows` uniformly drawn
/// samples that only receive cross-entropy.
pub fn train_matched(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    matches: &MatchMatrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    check_strategy(cfg.mode, matches.strategy)?;
    matches.validate(train)?;
    let mut rng = stream_rng(cfg.seed, stream::BATCHES);
    let mut extra_rng = stream_rng(cfg.seed, stream::EXTRA_PART);
    let two_part = matches.strategy == Strategy::Inferred;
    let penalty = cfg.penalty();
    let mut report = fit_classifier(
        train,
        val,
        cfg,
        cfg.mode,
        |_| {
            row_batches(matches.len(), cfg.batch_rows, &mut rng)
                .into_iter()
                .map(|rows| {
                    let mut b = MatchedBatch::from_rows(train, matches, &rows);
                    if two_part {
                        let extra = uniform_samples(train, cfg.batch_rows, &mut extra_rng);
                        b.push_samples(train, &extra);
                        b.close_part();
                    }
                    b
                })
                .collect()
        },
        |net, b| matched_erm_loss(net, b, &penalty),
    )?;
    report.final_matches = Some(matches.clone());
    Ok(report)
}

/// Result of contrastive match learning.
#[derive(Debug, Clone)]
pub struct Phase1Output {
    pub network: DenseNet,
    /// Matches inferred from the final representation.
    pub matches: MatchMatrix,
    pub report: TrainReport,
}

/// Contrastive representation learning with periodically refreshed matches.
///
/// Starts from random class-based matches, minimises the contrastive loss over
/// batches of match rows, and every `refresh_period` epochs replaces the
/// matches with nearest neighbours in the current representation. When the
/// validation split carries object ids, the representation with the best
/// validation top-10 overlap is kept.
pub fn train_matchdg_phase1(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    cfg: &TrainConfig,
) -> Result<Phase1Output> {
    cfg.validate()?;
    if train.num_domains() < 2 || train.num_classes < 2 {
        return Err(Error::Config(
            "contrastive matching needs ≥ 2 domains and ≥ 2 classes".into(),
        ));
    }
    let started = Instant::now();
    let mut net = new_network(train, cfg)?;
    let mut opt = Sgd::new(cfg.phase1_optimizer())?;
    let mut rng = stream_rng(cfg.seed, stream::BATCHES);
    let mut matches = random_matches(train, cfg.seed)?;
    let contrastive = cfg.contrastive();
    let diag = perfect_diagnostic(train);
    let initial_penalty = diag_penalty(&net, train, diag.as_ref())?;
    let val_perfect = match cfg.phase1_early_stop() {
        EarlyStopMetric::Top10Overlap if !val.is_empty() => perfect_diagnostic(val),
        _ => None,
    };
    let mut tracker = BestTracker::new(cfg.patience);
    let mut epochs = Vec::with_capacity(cfg.phase1_epochs);
    let mut stopped_early = false;

    for epoch in 1..=cfg.phase1_epochs {
        let (mut loss_sum, mut used) = (0.0, 0usize);
        for rows in row_batches(matches.len(), cfg.batch_rows, &mut rng) {
            let batch = MatchedBatch::from_rows(train, &matches, &rows);
            let fwd = net.forward(&batch.inputs)?;
            let out = match contrastive_loss(
                fwd.repr(),
                &batch.labels,
                &batch.domains,
                &batch.groups,
                &contrastive,
            ) {
                Ok(out) => out,
                // e.g. a single-class batch has no negatives
                Err(Error::NoPositivePairs { .. }) => continue,
                Err(e) => return Err(e),
            };
            if !out.loss.is_finite() {
                return Err(Error::NonFinite("contrastive loss".into()));
            }
            let grads = net.backward(
                &fwd,
                &Upstream {
                    repr: Some(out.grad),
                    logits: None,
                },
            )?;
            opt.step(&mut net, &grads)?;
            loss_sum += out.loss;
            used += 1;
        }
        if used == 0 {
            return Err(Error::NoPositivePairs { skipped: 0 });
        }
        if let Some(updated) = refresh(train, &net, cfg.refresh_period, epoch)? {
            if let Some(pm) = &diag {
                log::debug!(
                    "epoch {epoch}: refreshed matches overlap {:.2}%",
                    overlap(&updated, pm)?
                );
            }
            matches = updated;
        }
        let val_top10 = match &val_perfect {
            Some(pm) => Some(top10_overlap(&ReprTable::from_net(&net, val)?, val, pm)?),
            None => None,
        };
        let perfect = diag_penalty(&net, train, diag.as_ref())?;
        epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / used as f64,
            penalty: perfect.unwrap_or(0.0),
            objective_penalty: 0.0,
            train_acc: None,
            val_acc: None,
            val_top10,
        });
        if let Some(t) = val_top10 {
            if tracker.observe(t, epoch, &net) {
                stopped_early = epoch < cfg.phase1_epochs;
                break;
            }
        }
    }
    let (network, best_epoch) = match tracker.best {
        Some((_, e, best)) => (best, Some(e)),
        None => (net, epochs.last().map(|e| e.epoch)),
    };
    let final_matches = infer_matches(train, &ReprTable::from_net(&network, train)?)?;
    let report = TrainReport {
        mode: Mode::MatchdgPhase1,
        epochs,
        initial_penalty,
        best_epoch,
        stopped_early,
        network: network.clone(),
        final_matches: Some(final_matches.clone()),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(Phase1Output {
        network,
        matches: final_matches,
        report,
    })
}

/// Trains a fresh classifier on the phase-1 matches.
pub fn train_matchdg_phase2(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    phase1: &Phase1Output,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let cfg = TrainConfig {
        mode: Mode::MatchdgPhase2,
        ..cfg.clone()
    };
    train_matched(train, val, &phase1.matches, &cfg)
}

/// Cross-entropy + `λ ·` penalty on inferred matches + `oracle_λ ·` penalty
/// on oracle matches. A zero weight drops that match source entirely, so the
/// objective reduces to phase 2 (`oracle_λ = 0`) or to perfect-match training
/// (`λ = 0`).
pub fn train_mdghybrid(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    phase1: &Phase1Output,
    oracle: &MatchMatrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let cfg = TrainConfig {
        mode: Mode::Mdghybrid,
        ..cfg.clone()
    };
    if cfg.oracle_lambda == 0.0 {
        return train_matched(train, val, &phase1.matches, &cfg);
    }
    if cfg.lambda == 0.0 {
        let single = TrainConfig {
            lambda: cfg.oracle_lambda,
            ..cfg.clone()
        };
        return train_matched(train, val, oracle, &single);
    }
    phase1.matches.validate(train)?;
    oracle.validate(train)?;
    let mut rng = stream_rng(cfg.seed, stream::BATCHES);
    let mut extra_rng = stream_rng(cfg.seed, stream::EXTRA_PART);
    let mut oracle_rng = stream_rng(cfg.seed, stream::ORACLE_BATCHES);
    let inferred = &phase1.matches;
    let two_part = inferred.strategy == Strategy::Inferred;
    let (lam1, lam2) = (cfg.penalty(), cfg.oracle_penalty());
    let mut report = fit_classifier(
        train,
        val,
        &cfg,
        Mode::Mdghybrid,
        |_| {
            let primary = row_batches(inferred.len(), cfg.batch_rows, &mut rng);
            let oracle_rows = row_batches(oracle.len(), cfg.batch_rows, &mut oracle_rng);
            primary
                .into_iter()
                .enumerate()
                .map(|(step, rows)| {
                    let mut b = MatchedBatch::empty(train.input_dim());
                    b.groups = b.push_rows(train, inferred, &rows);
                    b.close_part();
                    if two_part {
                        let extra = uniform_samples(train, cfg.batch_rows, &mut extra_rng);
                        b.push_samples(train, &extra);
                        b.close_part();
                    }
                    let orows = &oracle_rows[step % oracle_rows.len()];
                    b.oracle_groups = b.push_rows(train, oracle, orows);
                    b.close_part();
                    b
                })
                .collect()
        },
        |net, b| hybrid_loss(net, b, &lam1, &lam2),
    )?;
    report.final_matches = Some(inferred.clone());
    Ok(report)
}

/// Matched training on a matrix whose rows are perfect with probability `p`
/// and random otherwise.
pub fn fraction_match_experiment(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    fraction: f64,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let matches = mixed_matches(train, fraction, cfg.seed)?;
    let mode = if matches.strategy == Strategy::Perfect {
        Mode::Perfmatch
    } else {
        Mode::Randmatch
    };
    train_matched(
        train,
        val,
        &matches,
        &TrainConfig {
            mode,
            ..cfg.clone()
        },
    )
}

/// Everything a mode produced.
#[derive(Debug, Clone)]
pub struct ModeOutput {
    pub report: TrainReport,
    pub phase1: Option<Phase1Output>,
}

/// Runs `cfg.mode` end to end; MatchDG modes include phase 1.
pub fn run_mode(
    train: &MultiDomainDataset,
    val: &MultiDomainDataset,
    cfg: &TrainConfig,
) -> Result<ModeOutput> {
    cfg.validate()?;
    let plain = |report| ModeOutput {
        report,
        phase1: None,
    };
    match cfg.mode {
        Mode::Erm => train_erm(train, val, cfg).map(plain),
        Mode::Randmatch => match cfg.match_fraction {
            Some(p) => fraction_match_experiment(train, val, p, cfg).map(plain),
            None => train_matched(train, val, &random_matches(train, cfg.seed)?, cfg).map(plain),
        },
        Mode::Perfmatch => train_matched(train, val, &perfect_matches(train)?, cfg).map(plain),
        Mode::MatchdgPhase1 => {
            let p1 = train_matchdg_phase1(train, val, cfg)?;
            Ok(ModeOutput {
                report: p1.report.clone(),
                phase1: Some(p1),
            })
        }
        Mode::MatchdgPhase2 => {
            let p1 = train_matchdg_phase1(train, val, cfg)?;
            let report = train_matchdg_phase2(train, val, &p1, cfg)?;
            Ok(ModeOutput {
                report,
                phase1: Some(p1),
            })
        }
        Mode::Mdghybrid => {
            let p1 = train_matchdg_phase1(train, val, cfg)?;
            let oracle = perfect_matches(train)?;
            let report = train_mdghybrid(train, val, &p1, &oracle, cfg)?;
            Ok(ModeOutput {
                report,
                phase1: Some(p1),
            })
        }
    }
}

/// Perfect-match penalty of an arbitrary representation table; convenience
/// for diagnostics outside training.
pub fn perfect_penalty(repr: &ReprTable, ds: &MultiDomainDataset) -> Result<f64> {
    Ok(match_penalty_table(repr, &perfect_matches(ds)?))
}
