//! Learning matches without object labels: contrastive training on rotated
//! glyphs with periodic nearest-neighbour refresh, scored against the hidden
//! ground-truth matches.
//!
//! `cargo run --release --example contrastive_matching`

use cmdg::data::{generate_glyphs, split, GlyphConfig};
use cmdg::matchstore::{perfect_matches, random_matches, ReprTable};
use cmdg::metrics::{overlap, rank_metrics};
use cmdg::net::OptimizerState;
use cmdg::trainer::{train_matchdg_phase1, Mode, TrainConfig};

fn main() -> cmdg::Result<()> {
    let ds = generate_glyphs(&GlyphConfig {
        angles: vec![0.0, 15.0, 30.0, 45.0, 60.0],
        samples_per_domain: 200,
        ..Default::default()
    })?;
    let names = ds.domain_names();
    let data = split(&ds, &names, &[], 0.2, 0)?;
    let cfg = TrainConfig {
        mode: Mode::MatchdgPhase1,
        hidden: vec![128, 64],
        repr_activation: cmdg::net::Activation::Identity,
        phase1_epochs: 12,
        refresh_period: 2,
        phase1_optimizer: Some(OptimizerState {
            learning_rate: 0.05,
            ..Default::default()
        }),
        ..Default::default()
    };
    let out = train_matchdg_phase1(&data.train, &data.val, &cfg)?;
    for e in &out.report.epochs {
        println!(
            "epoch {:>2}  contrastive loss {:.4}  val top-10 {}",
            e.epoch,
            e.loss,
            e.val_top10.map_or("-".into(), |v| format!("{v:.1}%"))
        );
    }

    let perfect = perfect_matches(&data.train)?;
    let random = random_matches(&data.train, 0)?;
    let ranks = rank_metrics(
        &ReprTable::from_net(&out.network, &data.train)?,
        &data.train,
        &perfect,
    )?;
    println!(
        "random matches   overlap {:5.1}%",
        overlap(&random, &perfect)?
    );
    println!(
        "learned matches  overlap {:5.1}%",
        overlap(&out.matches, &perfect)?
    );
    println!(
        "learned representation: top-10 overlap {:.1}%, mean rank {:.1}",
        ranks.top10_overlap_pct, ranks.mean_rank
    );
    Ok(())
}
