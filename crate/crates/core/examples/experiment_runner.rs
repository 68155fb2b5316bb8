//! Running a bundled experiment preset programmatically, with overrides, and
//! tabulating the resulting summaries — the same path the `cmdg run` and
//! `cmdg compare` commands take.
//!
//! `cargo run --release --example experiment_runner`

use cmdg::experiment::{compare, preset, run_experiment, ExperimentConfig, PRESETS};

fn main() -> cmdg::Result<()> {
    println!(
        "bundled presets: {:?}",
        PRESETS.iter().map(|(name, _)| *name).collect::<Vec<_>>()
    );
    let out = tempfile::tempdir()?;
    let mut summaries = Vec::new();
    for lambda in ["0.1", "1.0"] {
        let dir = out.path().join(format!("lambda_{lambda}"));
        let cfg = ExperimentConfig::from_json(
            preset("scm_spurious").expect("bundled preset"),
            &[
                format!("output_dir={}", dir.display()),
                format!("train.lambda={lambda}"),
                "seeds=[0,1]".into(),
                "train.epochs=100".into(),
            ],
        )?;
        let (reports, summary) = run_experiment(&cfg, 1)?;
        println!(
            "lambda {lambda}: {} seed reports, files: {:?}",
            reports.len(),
            std::fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
                .filter(|n| n.starts_with("report") || n == "summary.json")
                .collect::<Vec<_>>()
        );
        summaries.push((format!("lambda={lambda}"), summary));
    }
    print!("\n{}", compare(&summaries, false)?);
    Ok(())
}
