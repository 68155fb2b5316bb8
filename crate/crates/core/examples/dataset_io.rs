//! Persisting datasets and match matrices: a generated dataset is written to
//! a directory (manifest plus binary `f32` matrices) and read back, and a
//! match matrix survives its CSV + JSON sidecar round trip exactly.
//!
//! `cargo run --release --example dataset_io`

use cmdg::data::io::{read_dataset, write_dataset};
use cmdg::data::{generate_scm, ScmConfig};
use cmdg::matchstore::{perfect_matches, MatchMatrix};

fn main() -> cmdg::Result<()> {
    let ds = generate_scm(&ScmConfig {
        objects_per_class: 20,
        ..Default::default()
    })?;
    let dir = tempfile::tempdir()?;
    write_dataset(&ds, dir.path())?;
    let mut files: Vec<String> = std::fs::read_dir(dir.path())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("wrote {} files: {}", files.len(), files.join(", "));
    let back = read_dataset(dir.path())?;
    let same_meta = back
        .domains
        .iter()
        .zip(&ds.domains)
        .all(|(a, b)| a.name == b.name && a.labels == b.labels && a.object_ids == b.object_ids);
    let max_err = back
        .domains
        .iter()
        .zip(&ds.domains)
        .flat_map(|(a, b)| {
            a.x.as_slice()
                .iter()
                .zip(b.x.as_slice())
                .map(|(u, v)| (u - v).abs())
        })
        .fold(0.0f64, f64::max);
    println!("read back: names, labels and object ids identical: {same_meta}");
    println!("           max |x - x'| = {max_err:.1e} (f32 storage)");

    let matches = perfect_matches(&ds)?;
    let csv = matches.to_csv();
    let sidecar = matches.sidecar(&ds.domain_names());
    let restored = MatchMatrix::from_csv(&csv, &sidecar)?;
    println!(
        "match matrix: {} rows, {} CSV bytes, round trip identical: {}",
        matches.len(),
        csv.len(),
        restored == matches
    );
    println!("sidecar: {}", serde_json::to_string(&sidecar)?);
    Ok(())
}
