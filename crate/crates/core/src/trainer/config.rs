use serde::{Deserialize, Serialize};

use crate::losses::{ContrastiveConfig, MatchPenaltyConfig};
use crate::net::{Activation, OptimizerState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Erm,
    Randmatch,
    Perfmatch,
    MatchdgPhase1,
    MatchdgPhase2,
    Mdghybrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Erm => "erm",
            Mode::Randmatch => "randmatch",
            Mode::Perfmatch => "perfmatch",
            Mode::MatchdgPhase1 => "matchdg_phase1",
            Mode::MatchdgPhase2 => "matchdg_phase2",
            Mode::Mdghybrid => "mdghybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopMetric {
    ValAccuracy,
    Top10Overlap,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Epoch budget of the classification phase.
    pub epochs: usize,
    /// Match rows per batch (ERM: samples per domain per batch).
    pub batch_rows: usize,
    /// Weight of the match penalty (inferred matches for the hybrid).
    pub lambda: f64,
    /// Weight of the oracle-match penalty in the hybrid objective.
    pub oracle_lambda: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Phase-1 match refresh period in epochs.
    pub refresh_period: usize,
    pub phase1_epochs: usize,
    /// Optimizer for phase 1; defaults to `optimizer`.
    pub phase1_optimizer: Option<OptimizerState>,
    /// Fraction of perfect rows for the match-fraction ablation.
    pub match_fraction: Option<f64>,
    pub seed: u64,
    /// Defaults to validation accuracy for classifiers and top-10 overlap for
    /// phase 1.
    pub early_stop_metric: Option<EarlyStopMetric>,
    /// Stop after this many epochs without improvement.
    pub patience: Option<usize>,
    pub optimizer: OptimizerState,
    pub hidden: Vec<usize>,
    /// Activation of the representation (last hidden) layer.
    pub repr_activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Erm,
            epochs: 30,
            batch_rows: 32,
            lambda: 1.0,
            oracle_lambda: 1.0,
            tau: 0.05,
            refresh_period: 5,
            phase1_epochs: 30,
            phase1_optimizer: None,
            match_fraction: None,
            seed: 0,
            early_stop_metric: None,
            patience: None,
            optimizer: OptimizerState::default(),
            hidden: vec![64, 64],
            repr_activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.phase1_epochs < 1 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.batch_rows < 1 {
            return Err(Error::Config("batch_rows must be ≥ 1".into()));
        }
        if self.refresh_period < 1 {
            return Err(Error::Config("refresh_period must be ≥ 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden widths must be non-empty and ≥ 1".into(),
            ));
        }
        if let Some(p) = self.match_fraction {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("match_fraction {p} outside [0, 1]")));
            }
        }
        self.penalty().validate()?;
        MatchPenaltyConfig {
            lambda: self.oracle_lambda,
        }
        .validate()?;
        self.contrastive().validate()?;
        self.optimizer.validate()?;
        if let Some(o) = &self.phase1_optimizer {
            o.validate()?;
        }
        Ok(())
    }

    pub fn penalty(&self) -> MatchPenaltyConfig {
        MatchPenaltyConfig {
            lambda: self.lambda,
        }
    }

    pub fn oracle_penalty(&self) -> MatchPenaltyConfig {
        MatchPenaltyConfig {
            lambda: self.oracle_lambda,
        }
    }

    pub fn contrastive(&self) -> ContrastiveConfig {
        ContrastiveConfig { tau: self.tau }
    }

    pub fn phase1_optimizer(&self) -> OptimizerState {
        self.phase1_optimizer.unwrap_or(self.optimizer)
    }

    pub fn classifier_early_stop(&self) -> EarlyStopMetric {
        match self.early_stop_metric {
            Some(EarlyStopMetric::Top10Overlap) | None => EarlyStopMetric::ValAccuracy,
            Some(m) => m,
        }
    }

    pub fn phase1_early_stop(&self) -> EarlyStopMetric {
        match self.early_stop_metric {
            Some(EarlyStopMetric::ValAccuracy) | None => EarlyStopMetric::Top10Overlap,
            Some(m) => m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_zero_refresh_period_and_epochs() {
        for cfg in [
            TrainConfig {
                refresh_period: 0,
                ..Default::default()
            },
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                tau: 0.0,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            Mode::Erm,
            Mode::Randmatch,
            Mode::Perfmatch,
            Mode::MatchdgPhase1,
            Mode::MatchdgPhase2,
            Mode::Mdghybrid,
        ] {
            let s = serde_json::to_string(&m).unwrap();
            assert_eq!(s, format!("\"{}\"", m.as_str()));
        }
    }
}
