use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedRun};
use super::summary::Summary;
use crate::data::{io::write_atomic, split, Split};
use crate::matchstore::{infer_matches, perfect_matches, ReprTable};
use crate::metrics::{accuracy, overlap, pooled_accuracy, rank_metrics, MetricsReport};
use crate::trainer::{fmt_opt, run_mode, Mode, ModeOutput, TrainConfig, TrainReport};
use crate::{Error, Result};

/// Environment variable capping the number of seeds trained in parallel.
pub const THREADS_ENV: &str = "CMDG_THREADS";

pub const REPORT_FORMAT: &str = "cmdg-report";

/// Sizes of the split a seed trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_domains: Vec<String>,
    pub test_domains: Vec<String>,
    pub train_samples: usize,
    pub val_samples: usize,
    pub test_samples: usize,
}

/// One trained run of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub config: TrainConfig,
    pub metrics: MetricsReport,
    /// Best validation accuracy reached, when a validation split exists.
    pub val_accuracy: Option<f64>,
    pub report: TrainReport,
    /// Contrastive phase of MatchDG modes.
    pub phase1: Option<TrainReport>,
}

/// Contents of `report_<seed>.json`. Contains no timing information, so
/// reruns are byte-identical; timings go to `meta_<seed>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub split: SplitInfo,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, Serialize)]
struct SeedMeta<'a> {
    seed: u64,
    wall_clock_secs: BTreeMap<&'a str, f64>,
}

/// Number of seeds to train concurrently: `CMDG_THREADS` when set to a
/// positive integer, otherwise the available parallelism.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Exit status for a failed command: 2 when training itself aborted, 1 for
/// everything else (configuration, data, I/O).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_) | Error::NoPositivePairs { .. } => 2,
        _ => 1,
    }
}

/// Builds the split for one seed.
pub fn prepare_split(cfg: &ExperimentConfig, seed: u64) -> Result<Split> {
    let ds = cfg.dataset.build(seed)?;
    let test = cfg.test_domains()?;
    let train = match &cfg.split.train_domains {
        Some(t) => t.clone(),
        None => ds
            .domain_names()
            .into_iter()
            .filter(|n| !test.contains(n))
            .collect(),
    };
    split(&ds, &train, &test, cfg.split.val_fraction, seed)
}

/// Accuracy and match-quality metrics of a finished run.
pub fn evaluate(out: &ModeOutput, data: &Split, match_metrics: bool) -> Result<MetricsReport> {
    let net = &out.report.network;
    let mut per_domain = accuracy(net, &data.train)?;
    let ood_accuracy = if data.test.is_empty() {
        None
    } else {
        per_domain.extend(accuracy(net, &data.test)?);
        Some(pooled_accuracy(net, &data.test)?)
    };
    let mut report = MetricsReport {
        per_domain_accuracy: per_domain,
        ood_accuracy,
        ..Default::default()
    };
    if match_metrics && data.train.has_object_ids() && data.train.num_domains() > 1 {
        // MatchDG's matches come from its contrastive representation
        let (repr_net, learned) = match &out.phase1 {
            Some(p1) => (&p1.network, Some(p1.matches.clone())),
            None => (net, None),
        };
        let repr = ReprTable::from_net(repr_net, &data.train)?;
        let learned = match learned {
            Some(m) => m,
            None => infer_matches(&data.train, &repr)?,
        };
        let perfect = perfect_matches(&data.train)?;
        let ranks = rank_metrics(&repr, &data.train, &perfect)?;
        report.overlap_pct = Some(overlap(&learned, &perfect)?);
        report.top10_overlap_pct = Some(ranks.top10_overlap_pct);
        report.mean_rank = Some(ranks.mean_rank);
    }
    Ok(report)
}

/// Trains and evaluates one resolved run on a prepared split.
pub fn execute_run(
    run: &ResolvedRun,
    data: &Split,
    seed: u64,
    match_metrics: bool,
) -> Result<RunResult> {
    let config = TrainConfig {
        seed,
        ..run.train.clone()
    };
    let out = run_mode(&data.train, &data.val, &config)?;
    let metrics = evaluate(&out, data, match_metrics)?;
    let val_accuracy = out
        .report
        .epochs
        .iter()
        .filter_map(|e| e.val_acc)
        .fold(None, |best: Option<f64>, v| {
            Some(best.map_or(v, |b| b.max(v)))
        });
    Ok(RunResult {
        label: run.label.clone(),
        config,
        metrics,
        val_accuracy,
        report: out.report,
        // phase-1 mode's own report already is the phase-1 report
        phase1: out
            .phase1
            .filter(|_| run.train.mode != Mode::MatchdgPhase1)
            .map(|p| p.report),
    })
}

/// Trains every run for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let data = prepare_split(cfg, seed)?;
    let runs = cfg
        .resolved_runs()?
        .iter()
        .map(|run| {
            log::info!("seed {seed}: training `{}`", run.label);
            execute_run(run, &data, seed, cfg.eval.match_metrics)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedReport {
        format: REPORT_FORMAT.into(),
        version: 1,
        seed,
        split: split_info(&data),
        runs,
    })
}

fn split_info(data: &Split) -> SplitInfo {
    SplitInfo {
        train_domains: data.train.domain_names(),
        test_domains: data.test.domain_names(),
        train_samples: data.train.len(),
        val_samples: data.val.len(),
        test_samples: data.test.len(),
    }
}

fn trace_csv(report: &SeedReport) -> String {
    let mut out = String::from("run,epoch,loss,penalty,train_acc,val_acc\n");
    let mut push = |label: &str, r: &TrainReport| {
        for e in &r.epochs {
            out.push_str(&format!(
                "{label},{},{},{},{},{}\n",
                e.epoch,
                e.loss,
                e.penalty,
                fmt_opt(e.train_acc),
                fmt_opt(e.val_acc)
            ));
        }
    };
    for run in &report.runs {
        if let Some(p1) = &run.phase1 {
            push(&format!("{}:phase1", run.label), p1);
        }
        push(&run.label, &run.report);
    }
    out
}

/// Writes one seed's report, trace, match matrices and timing metadata.
pub fn write_seed_outputs(dir: &Path, report: &SeedReport) -> Result<()> {
    let seed = report.seed;
    let json = serde_json::to_string_pretty(report)?;
    write_atomic(&report_path(dir, seed), json.as_bytes())?;
    let domain_names = &report.split.train_domains;
    write_atomic(
        &dir.join(format!("trace_{seed}.csv")),
        trace_csv(report).as_bytes(),
    )?;
    let single = report.runs.len() == 1;
    for run in &report.runs {
        if let Some(m) = &run.report.final_matches {
            let stem = if single {
                format!("matches_{seed}")
            } else {
                format!("matches_{seed}_{}", run.label)
            };
            write_atomic(&dir.join(format!("{stem}.csv")), m.to_csv().as_bytes())?;
            let sidecar = serde_json::to_string_pretty(&m.sidecar(domain_names))?;
            write_atomic(&dir.join(format!("{stem}.json")), sidecar.as_bytes())?;
        }
    }
    let wall_clock_secs = report
        .runs
        .iter()
        .map(|r| {
            let phase1 = r.phase1.as_ref().map_or(0.0, |p| p.wall_clock_secs);
            (r.label.as_str(), r.report.wall_clock_secs + phase1)
        })
        .collect();
    let meta = serde_json::to_string_pretty(&SeedMeta {
        seed,
        wall_clock_secs,
    })?;
    write_atomic(&dir.join(format!("meta_{seed}.json")), meta.as_bytes())
}

/// Runs the whole experiment: every seed (up to `threads` at once), then the
/// summary. Returns the per-seed reports in seed order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(Vec<SeedReport>, Summary)> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        Error::Config(format!(
            "output directory {}: {e}",
            cfg.output_dir.display()
        ))
    })?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SeedReport>>>> =
        Mutex::new((0..cfg.seeds.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&seed) = cfg.seeds.get(i) else { break };
        let outcome = run_and_write(cfg, seed);
        let failed = outcome.is_err();
        results.lock().expect("result slot lock")[i] = Some(outcome);
        if failed {
            // let other workers drain without starting new seeds
            next.fetch_add(cfg.seeds.len(), Ordering::SeqCst);
        }
    };
    std::thread::scope(|s| {
        for _ in 1..threads.clamp(1, cfg.seeds.len()) {
            s.spawn(worker);
        }
        worker();
    });
    let reports = results
        .into_inner()
        .expect("result slot lock")
        .into_iter()
        .flatten()
        .collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_reports(&reports);
    let json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&cfg.output_dir.join("summary.json"), json.as_bytes())?;
    Ok((reports, summary))
}

fn run_and_write(cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let report = run_seed(cfg, seed)?;
    write_seed_outputs(&cfg.output_dir, &report)?;
    Ok(report)
}

/// Path of the report file for `seed`.
pub fn report_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("report_{seed}.json"))
}
