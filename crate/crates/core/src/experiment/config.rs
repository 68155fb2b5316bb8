use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{generate_glyphs, generate_scm, io, GlyphConfig, MultiDomainDataset, ScmConfig};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// Where each seed's dataset comes from. Generated datasets use the
/// configured generator seed plus the run seed, so every seed sees fresh data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Scm(ScmConfig),
    Glyphs(GlyphConfig),
    /// A directory written by `gen-data`; identical for every seed.
    Load {
        path: PathBuf,
    },
}

impl DatasetSpec {
    pub fn build(&self, seed: u64) -> Result<MultiDomainDataset> {
        match self {
            DatasetSpec::Scm(c) => generate_scm(&ScmConfig {
                seed: c.seed.wrapping_add(seed),
                ..c.clone()
            }),
            DatasetSpec::Glyphs(c) => generate_glyphs(&GlyphConfig {
                seed: c.seed.wrapping_add(seed),
                ..c.clone()
            }),
            DatasetSpec::Load { path } => io::read_dataset(path),
        }
    }

    /// Test domains implied by the generator, used when the split leaves them
    /// unspecified.
    fn default_test_domains(&self) -> Option<Vec<String>> {
        match self {
            DatasetSpec::Scm(c) => Some(
                c.test_domains
                    .iter()
                    .map(|&d| ScmConfig::domain_name(d))
                    .collect(),
            ),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::Scm(c) => c.validate(),
            DatasetSpec::Glyphs(c) => c.validate(),
            DatasetSpec::Load { path } => {
                if path.join(io::MANIFEST).is_file() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "no dataset manifest in {}",
                        path.display()
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Source domains; defaults to every domain that is not a test domain.
    pub train_domains: Option<Vec<String>>,
    /// Held-out domains; the SCM generator supplies a default.
    pub test_domains: Option<Vec<String>>,
    /// Share of each source domain held out for validation.
    pub val_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_domains: None,
            test_domains: None,
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Overlap, top-10 overlap and mean rank on the training domains
    /// (requires object ids).
    pub match_metrics: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_metrics: true,
        }
    }
}

/// One trained configuration within an experiment. `train` holds overrides
/// merged over the experiment-wide train section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    #[serde(default)]
    pub train: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Runs to train per seed; empty means a single run of `train`.
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub eval: EvalConfig,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
}

/// A run with its fully merged training configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub label: String,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Reads a JSON config and applies `key=value` overrides (see
    /// [`apply_override`]). Relative `output_dir` and `load` paths resolve
    /// against the config file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let DatasetSpec::Load { path } = &mut cfg.dataset {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config from JSON text with overrides; paths stay as written.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.dataset.validate()?;
        if !(0.0..1.0).contains(&self.split.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        if self.test_domains().is_err() {
            return Err(Error::Config(
                "split.test_domains is required for this dataset".into(),
            ));
        }
        let runs = self.resolved_runs()?;
        for (i, r) in runs.iter().enumerate() {
            let safe = |c: char| c.is_ascii_alphanumeric() || "_-.".contains(c);
            if r.label.is_empty() || !r.label.chars().all(safe) {
                return Err(Error::Config(format!(
                    "run label `{}` must be non-empty and use only [A-Za-z0-9_.-]",
                    r.label
                )));
            }
            if runs[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::Config(format!("duplicate run label `{}`", r.label)));
            }
            r.train
                .validate()
                .map_err(|e| Error::Config(format!("run `{}`: {e}", r.label)))?;
        }
        Ok(())
    }

    pub fn test_domains(&self) -> Result<Vec<String>> {
        self.split
            .test_domains
            .clone()
            .or_else(|| self.dataset.default_test_domains())
            .ok_or_else(|| Error::Config("no test domains".into()))
    }

    /// Merges each run's overrides over the shared train section.
    pub fn resolved_runs(&self) -> Result<Vec<ResolvedRun>> {
        if self.runs.is_empty() {
            return Ok(vec![ResolvedRun {
                label: self.train.mode.as_str().to_string(),
                train: self.train.clone(),
            }]);
        }
        let base = serde_json::to_value(&self.train)?;
        self.runs
            .iter()
            .map(|run| {
                let mut merged = base.clone();
                if let Value::Object(m) = &mut merged {
                    for (k, v) in &run.train {
                        m.insert(k.clone(), v.clone());
                    }
                }
                let train: TrainConfig = serde_json::from_value(merged)
                    .map_err(|e| Error::Config(format!("run `{}`: {e}", run.label)))?;
                Ok(ResolvedRun {
                    label: run.label.clone(),
                    train,
                })
            })
            .collect()
    }

    /// Human-readable resolved configuration for `--dry-run`.
    pub fn describe(&self) -> Result<String> {
        let runs = self.resolved_runs()?;
        let value = serde_json::json!({
            "dataset": self.dataset,
            "split": {
                "train_domains": self.split.train_domains,
                "test_domains": self.test_domains()?,
                "val_fraction": self.split.val_fraction,
            },
            "eval": self.eval,
            "output_dir": self.output_dir,
            "seeds": self.seeds,
            "runs": runs,
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

/// Applies `a.b.0.c=value` to a JSON tree. The value is parsed as JSON when
/// possible (numbers, booleans, arrays, quoted strings) and taken as a bare
/// string otherwise. Numeric segments index arrays; missing object keys are
/// created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    if path.is_empty() {
        return Err(Error::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize =
                    seg.parse()
                        .ok()
                        .filter(|&i| i < items.len())
                        .ok_or_else(|| {
                            Error::Config(format!("override `{path}`: bad index `{seg}`"))
                        })?;
                if last {
                    items[idx] = value;
                    return Ok(());
                }
                &mut items[idx]
            }
            _ => {
                return Err(Error::Config(format!(
                    "override `{path}`: `{seg}` is not inside an object or array"
                )))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}
