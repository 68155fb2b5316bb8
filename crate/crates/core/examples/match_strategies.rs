//! Building match matrices: random same-class, ground-truth perfect, nearest
//! neighbour in a representation, and a perfect/random mixture. Each is
//! scored by its overlap with the perfect matches and saved as CSV.
//!
//! `cargo run --release --example match_strategies`

use cmdg::data::{generate_scm, ScmConfig};
use cmdg::matchstore::{infer_matches, mixed_matches, perfect_matches, random_matches, ReprTable};
use cmdg::metrics::overlap;

fn main() -> cmdg::Result<()> {
    let ds = generate_scm(&ScmConfig {
        num_domains: 3,
        objects_per_class: 40,
        test_domains: vec![],
        ..Default::default()
    })?;
    let perfect = perfect_matches(&ds)?;
    println!(
        "{} anchors, base domain per class {:?}",
        perfect.len(),
        perfect.base_domains
    );

    let random = random_matches(&ds, 7)?;
    let causal = infer_matches(&ds, &ReprTable::from_causal(&ds)?)?;
    let raw = infer_matches(
        &ds,
        &ReprTable {
            domains: ds.domains.iter().map(|d| d.x.clone()).collect(),
        },
    )?;
    println!(
        "random        overlap {:6.2}%  (expected ≈ {:.2}%)",
        overlap(&random, &perfect)?,
        100.0 / 40.0
    );
    println!("inferred x_c  overlap {:6.2}%", overlap(&causal, &perfect)?);
    println!("inferred x    overlap {:6.2}%", overlap(&raw, &perfect)?);
    for p in [0.25, 0.5, 0.75] {
        let mixed = mixed_matches(&ds, p, 7)?;
        println!(
            "mixed p={p:<4}  overlap {:6.2}%",
            overlap(&mixed, &perfect)?
        );
    }

    let csv = causal.to_csv();
    println!("\nfirst rows of the inferred matrix:");
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
