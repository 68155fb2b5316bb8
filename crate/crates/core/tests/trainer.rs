//! Objective and training-mode equivalences: each special case of a richer
//! objective must reproduce the simpler one exactly.

mod common;

use cmdg::data::{generate_scm, split, MultiDomainDataset, ScmConfig, Split};
use cmdg::losses::{
    cross_entropy, hybrid_loss, matched_erm_loss, MatchPenaltyConfig, MatchedBatch,
};
use cmdg::matchstore::{mixed_matches, perfect_matches, random_matches, Strategy};
use cmdg::net::{Activation, OptimizerState, Upstream};
use cmdg::trainer::{
    run_mode, train_matchdg_phase1, train_matchdg_phase2, train_matched, train_mdghybrid,
    EarlyStopMetric, Mode, Phase1Output, TrainConfig, TrainReport,
};
use common::random_net;

fn data() -> Split {
    let ds = generate_scm(&ScmConfig {
        num_domains: 3,
        objects_per_class: 12,
        test_domains: vec![],
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let names = ds.domain_names();
    split(&ds, &names, &[], 0.25, 0).unwrap()
}

fn cfg(mode: Mode) -> TrainConfig {
    TrainConfig {
        mode,
        epochs: 4,
        phase1_epochs: 3,
        refresh_period: 1,
        batch_rows: 8,
        hidden: vec![8],
        repr_activation: Activation::Identity,
        ..Default::default()
    }
}

fn assert_same_training(a: &TrainReport, b: &TrainReport) {
    assert_eq!(a.network.parameters(), b.network.parameters());
    let losses = |r: &TrainReport| r.epochs.iter().map(|e| e.loss).collect::<Vec<_>>();
    assert_eq!(losses(a), losses(b));
}

fn phase1_with(train: &MultiDomainDataset, val: &MultiDomainDataset) -> Phase1Output {
    train_matchdg_phase1(train, val, &cfg(Mode::MatchdgPhase1)).unwrap()
}

#[test]
fn zero_lambda_matched_loss_is_cross_entropy() {
    let d = data();
    let m = random_matches(&d.train, 1).unwrap();
    let batch = MatchedBatch::from_rows(&d.train, &m, &[0, 1, 2, 3, 4]);
    let net = random_net(d.train.input_dim(), 3);
    let out = matched_erm_loss(&net, &batch, &MatchPenaltyConfig { lambda: 0.0 }).unwrap();

    let fwd = net.forward(&batch.inputs).unwrap();
    let (ce, g) = cross_entropy(fwd.logits(), &batch.labels).unwrap();
    let grads = net
        .backward(
            &fwd,
            &Upstream {
                repr: None,
                logits: Some(g),
            },
        )
        .unwrap();
    assert_eq!(out.total, ce);
    assert_eq!(out.cross_entropy, ce);
    assert_eq!(out.grads.flatten(), grads.flatten());
}

#[test]
fn hybrid_loss_with_zero_oracle_weight_is_the_matched_loss() {
    let d = data();
    let random = random_matches(&d.train, 1).unwrap();
    let perfect = perfect_matches(&d.train).unwrap();
    let mut batch = MatchedBatch::from_rows(&d.train, &random, &[0, 2, 4]);
    batch.oracle_groups = MatchedBatch::from_rows(&d.train, &perfect, &[0, 2, 4]).groups;
    let net = random_net(d.train.input_dim(), 4);
    let lam = MatchPenaltyConfig { lambda: 0.8 };
    let hybrid = hybrid_loss(&net, &batch, &lam, &MatchPenaltyConfig { lambda: 0.0 }).unwrap();
    let matched = matched_erm_loss(&net, &batch, &lam).unwrap();
    assert_eq!(hybrid.total, matched.total);
    assert_eq!(hybrid.grads.flatten(), matched.grads.flatten());
}

#[test]
fn phase2_on_perfect_matches_is_perfmatch() {
    let d = data();
    let mut p1 = phase1_with(&d.train, &d.val);
    p1.matches = perfect_matches(&d.train).unwrap();
    let phase2 = train_matchdg_phase2(&d.train, &d.val, &p1, &cfg(Mode::MatchdgPhase2)).unwrap();
    let perf = run_mode(&d.train, &d.val, &cfg(Mode::Perfmatch))
        .unwrap()
        .report;
    assert_same_training(&phase2, &perf);
}

#[test]
fn hybrid_reduces_to_phase2_and_to_perfmatch() {
    let d = data();
    let p1 = phase1_with(&d.train, &d.val);
    let oracle = perfect_matches(&d.train).unwrap();

    let no_oracle = TrainConfig {
        oracle_lambda: 0.0,
        ..cfg(Mode::Mdghybrid)
    };
    let hybrid = train_mdghybrid(&d.train, &d.val, &p1, &oracle, &no_oracle).unwrap();
    let phase2 = train_matchdg_phase2(&d.train, &d.val, &p1, &cfg(Mode::MatchdgPhase2)).unwrap();
    assert_same_training(&hybrid, &phase2);

    let oracle_only = TrainConfig {
        lambda: 0.0,
        oracle_lambda: 2.5,
        ..cfg(Mode::Mdghybrid)
    };
    let hybrid = train_mdghybrid(&d.train, &d.val, &p1, &oracle, &oracle_only).unwrap();
    let perf = run_mode(
        &d.train,
        &d.val,
        &TrainConfig {
            lambda: 2.5,
            ..cfg(Mode::Perfmatch)
        },
    )
    .unwrap()
    .report;
    assert_same_training(&hybrid, &perf);
}

#[test]
fn match_fraction_endpoints_are_random_and_perfect_training() {
    let d = data();
    for (p, mode) in [(0.0, Mode::Randmatch), (1.0, Mode::Perfmatch)] {
        let frac = run_mode(
            &d.train,
            &d.val,
            &TrainConfig {
                match_fraction: Some(p),
                ..cfg(Mode::Randmatch)
            },
        )
        .unwrap()
        .report;
        let plain = run_mode(&d.train, &d.val, &cfg(mode)).unwrap().report;
        assert_same_training(&frac, &plain);
    }
    assert_eq!(
        mixed_matches(&d.train, 1.0, 9).unwrap(),
        perfect_matches(&d.train).unwrap()
    );
    assert_eq!(
        mixed_matches(&d.train, 0.0, 9).unwrap(),
        random_matches(&d.train, 9).unwrap()
    );
}

#[test]
fn phase1_returns_inferred_matches_and_is_deterministic() {
    let d = data();
    let a = phase1_with(&d.train, &d.val);
    let b = phase1_with(&d.train, &d.val);
    assert_eq!(a.matches.strategy, Strategy::Inferred);
    assert_eq!(a.matches, b.matches);
    assert_eq!(a.network.parameters(), b.network.parameters());
    assert_eq!(a.report.epochs.len(), 3);
    assert!(a.report.epochs.iter().all(|e| e.val_top10.is_some()));
}

#[test]
fn perfect_training_shrinks_the_perfect_penalty_below_erm() {
    let d = data();
    let train = |mode| {
        run_mode(
            &d.train,
            &d.val,
            &TrainConfig {
                epochs: 30,
                lambda: 1.0,
                optimizer: OptimizerState {
                    learning_rate: 0.002,
                    ..Default::default()
                },
                early_stop_metric: Some(EarlyStopMetric::None),
                ..cfg(mode)
            },
        )
        .unwrap()
        .report
    };
    let (erm, perf) = (train(Mode::Erm), train(Mode::Perfmatch));
    let last = |r: &TrainReport| r.epochs.last().unwrap().penalty;
    assert!(
        last(&perf) < last(&erm),
        "{} vs {}",
        last(&perf),
        last(&erm)
    );
}

#[test]
fn matched_modes_reject_mismatched_matrices() {
    let d = data();
    let random = random_matches(&d.train, 0).unwrap();
    assert!(train_matched(&d.train, &d.val, &random, &cfg(Mode::Perfmatch)).is_err());
    assert!(train_matched(&d.train, &d.val, &random, &cfg(Mode::Erm)).is_err());
}
