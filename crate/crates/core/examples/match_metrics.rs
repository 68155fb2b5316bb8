//! Scoring a representation by how well it recovers the hidden object
//! matches: overlap of its nearest-neighbour matches, top-10 overlap and
//! mean rank of the true counterpart, for the ground-truth causal features,
//! the raw inputs and an untrained network.
//!
//! `cargo run --release --example match_metrics`

use cmdg::data::{generate_scm, ScmConfig};
use cmdg::matchstore::{infer_matches, perfect_matches, ReprTable};
use cmdg::metrics::{overlap, rank_metrics};
use cmdg::net::DenseNet;

fn main() -> cmdg::Result<()> {
    let ds = generate_scm(&ScmConfig {
        test_domains: vec![],
        ..Default::default()
    })?;
    let perfect = perfect_matches(&ds)?;
    let untrained = DenseNet::mlp(ds.input_dim(), &[32], ds.num_classes, 0)?;
    let tables = [
        ("causal x_c", ReprTable::from_causal(&ds)?),
        (
            "raw input x",
            ReprTable {
                domains: ds.domains.iter().map(|d| d.x.clone()).collect(),
            },
        ),
        ("untrained net", ReprTable::from_net(&untrained, &ds)?),
    ];
    println!(
        "{:<14} {:>9} {:>9} {:>10}",
        "representation", "overlap", "top-10", "mean rank"
    );
    for (name, repr) in &tables {
        let learned = infer_matches(&ds, repr)?;
        let ranks = rank_metrics(repr, &ds, &perfect)?;
        println!(
            "{name:<14} {:>8.1}% {:>8.1}% {:>10.2}",
            overlap(&learned, &perfect)?,
            ranks.top10_overlap_pct,
            ranks.mean_rank
        );
    }
    println!(
        "({} perfect pairs, {} candidates per class and domain)",
        perfect.len() * (ds.num_domains() - 1),
        ds.domains[0].indices_of_class(0).len()
    );
    Ok(())
}
