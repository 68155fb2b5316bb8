//! The match penalty as a training diagnostic: plain ERM lowers the training
//! error without shrinking the distance between representations of the same
//! object, while training on perfect matches removes most of it.
//!
//! `cargo run --release --example penalty_trace`

use cmdg::data::{generate_glyphs, split, GlyphConfig};
use cmdg::metrics::{penalty_trace, penalty_trace_csv};
use cmdg::net::{Activation, OptimizerState};
use cmdg::trainer::{run_mode, EarlyStopMetric, Mode, TrainConfig};

fn main() -> cmdg::Result<()> {
    let ds = generate_glyphs(&GlyphConfig {
        angles: vec![0.0, 30.0, 60.0],
        samples_per_domain: 150,
        ..Default::default()
    })?;
    let names = ds.domain_names();
    let data = split(&ds, &names, &[], 0.0, 0)?;
    let base = TrainConfig {
        epochs: 60,
        hidden: vec![64],
        repr_activation: Activation::Identity,
        optimizer: OptimizerState {
            learning_rate: 0.01,
            ..Default::default()
        },
        early_stop_metric: Some(EarlyStopMetric::None),
        ..Default::default()
    };
    let erm = run_mode(
        &data.train,
        &data.val,
        &TrainConfig {
            mode: Mode::Erm,
            ..base.clone()
        },
    )?
    .report;
    let perf = run_mode(
        &data.train,
        &data.val,
        &TrainConfig {
            mode: Mode::Perfmatch,
            lambda: 5.0,
            ..base
        },
    )?
    .report;

    println!("epoch  ERM penalty/initial  train err | PerfMatch penalty/initial  train err");
    let (e0, p0) = (
        erm.initial_penalty.unwrap_or(1.0),
        perf.initial_penalty.unwrap_or(1.0),
    );
    for (a, b) in penalty_trace(&erm)
        .iter()
        .zip(penalty_trace(&perf))
        .filter(|(a, _)| a.epoch % 10 == 0)
    {
        println!(
            "{:>5}  {:>19.3}  {:>9.3} | {:>25.4}  {:>9.3}",
            a.epoch,
            a.penalty / e0,
            a.train_error.unwrap_or(f64::NAN),
            b.penalty / p0,
            b.train_error.unwrap_or(f64::NAN)
        );
    }
    let csv = penalty_trace_csv(&penalty_trace(&erm));
    println!("\nERM trace as CSV (first rows):");
    for line in csv.lines().take(3) {
        println!("  {line}");
    }
    Ok(())
}
