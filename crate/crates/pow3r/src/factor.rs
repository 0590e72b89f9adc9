//! The policy-aware factor state machine.
//!
//! Each (task, criterion) pair carries a bounded factor alpha that starts at 1
//! and is updated once per judged rollout group: per-criterion pass rate and
//! variance over valid verdicts, square-root smoothing, a weight-weighted
//! category mean, a blend-clip toward the variance ratio, and an EMA step,
//! with both the blend target and the EMA output clipped to
//! [alpha_min, alpha_max]. Criteria with too few valid verdicts retain their
//! previous factor; categories whose valid signals all vanish pull their
//! members back toward 1.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::{Task, VerdictMatrix};

pub const FACTORS_SCHEMA: &str = "pow3r.factors.v1";

/// Tuning parameters for the factor update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pow3rConfig {
    /// Lower clip for alpha; in (0, 1].
    pub alpha_min: f64,
    /// Upper clip for alpha; >= 1.
    pub alpha_max: f64,
    /// Variance smoothing floor; > 0.
    pub epsilon: f64,
    /// Blend weight between 1 and the variance ratio; in [0, 1].
    pub lambda: f64,
    /// EMA step toward the blend target; in (0, 1].
    pub beta_ema: f64,
    /// A criterion needs at least ceil(fraction * G) valid verdicts to update.
    pub min_valid_fraction: f64,
}

impl Default for Pow3rConfig {
    fn default() -> Self {
        Pow3rConfig {
            alpha_min: 0.67,
            alpha_max: 1.5,
            epsilon: 1e-4,
            lambda: 0.5,
            beta_ema: 0.2,
            min_valid_fraction: 0.75,
        }
    }
}

impl Pow3rConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_min.is_nan() || self.alpha_min <= 0.0 || self.alpha_min > 1.0 {
            return Err(Error::Config(format!(
                "alpha_min must be in (0, 1], got {}",
                self.alpha_min
            )));
        }
        if self.alpha_max < 1.0 {
            return Err(Error::Config(format!(
                "alpha_max must be >= 1, got {}",
                self.alpha_max
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.beta_ema.is_nan() || self.beta_ema <= 0.0 || self.beta_ema > 1.0 {
            return Err(Error::Config(format!(
                "beta_ema must be in (0, 1], got {}",
                self.beta_ema
            )));
        }
        if self.min_valid_fraction.is_nan()
            || self.min_valid_fraction <= 0.0
            || self.min_valid_fraction > 1.0
        {
            return Err(Error::Config(format!(
                "min_valid_fraction must be in (0, 1], got {}",
                self.min_valid_fraction
            )));
        }
        Ok(())
    }

    fn clip(&self, alpha: f64) -> f64 {
        alpha.clamp(self.alpha_min, self.alpha_max)
    }
}

/// Signal state of a criterion over one rollout group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalState {
    /// No valid rollout passes it (p = 0).
    Dead,
    /// Every valid rollout passes it (p = 1).
    Saturated,
    /// Verdicts differ across the group.
    Mixed,
    /// Fewer than ceil(min_valid_fraction * G) valid verdicts.
    Insufficient,
}

/// Per-criterion pass-rate statistics over the valid verdicts of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionStats {
    pub pass_rate: f64,
    pub variance: f64,
    pub n_valid: usize,
    pub state: SignalState,
}

impl CriterionStats {
    pub fn is_sufficient(&self) -> bool {
        self.state != SignalState::Insufficient
    }
}

/// Number of valid verdicts required for a factor update.
pub fn valid_threshold(group_size: usize, min_valid_fraction: f64) -> usize {
    (min_valid_fraction * group_size as f64).ceil() as usize
}

/// Pass rate and variance per criterion, over valid verdicts only.
pub fn criterion_stats(matrix: &VerdictMatrix, min_valid_fraction: f64) -> Vec<CriterionStats> {
    let threshold = valid_threshold(matrix.group_size, min_valid_fraction);
    (0..matrix.criteria_count())
        .map(|j| {
            let scores: Vec<f64> = matrix.column_scores(j).into_iter().flatten().collect();
            let n_valid = scores.len();
            let (pass_rate, variance) = if n_valid == 0 {
                (0.0, 0.0)
            } else {
                let p = scores.iter().sum::<f64>() / n_valid as f64;
                let v = scores.iter().map(|s| (s - p).powi(2)).sum::<f64>() / n_valid as f64;
                (p, v)
            };
            let state = if n_valid < threshold {
                SignalState::Insufficient
            } else if pass_rate == 0.0 {
                SignalState::Dead
            } else if pass_rate == 1.0 {
                SignalState::Saturated
            } else {
                SignalState::Mixed
            };
            CriterionStats {
                pass_rate,
                variance,
                n_valid,
                state,
            }
        })
        .collect()
}

/// Smoothed contrastiveness signal: sqrt(v + epsilon).
pub fn smoothed_signal(variance: f64, epsilon: f64) -> f64 {
    debug_assert!(variance >= 0.0);
    (variance + epsilon).sqrt()
}

/// Weight-weighted mean signal over the criteria of one category, restricted
/// to those with sufficient validity. `None` marks a signal-void category.
pub fn category_signal_mean(signals: &[f64], weights: &[f64], sufficient: &[bool]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((g, w), ok) in signals.iter().zip(weights).zip(sufficient) {
        if *ok {
            num += w * g;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Blend-clip target: clip((1 - lambda) + lambda * g / g_bar).
pub fn target_factor(signal: f64, category_mean: f64, config: &Pow3rConfig) -> f64 {
    debug_assert!(category_mean > 0.0);
    let ratio = signal / category_mean;
    config.clip((1.0 - config.lambda) + config.lambda * ratio)
}

/// Snapshot of the statistics behind a factor's most recent update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub pass_rate: f64,
    pub variance: f64,
    pub n_valid: usize,
    pub state: SignalState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEntry {
    pub alpha: f64,
    pub epoch: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_stats: Option<StatsSnapshot>,
}

impl Default for FactorEntry {
    fn default() -> Self {
        FactorEntry {
            alpha: 1.0,
            epoch: 0,
            last_stats: None,
        }
    }
}

/// Dynamic factors keyed by (task id, criterion id). Fresh pairs read as 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorState {
    entries: BTreeMap<(String, String), FactorEntry>,
}

impl FactorState {
    pub fn new() -> Self {
        FactorState::default()
    }

    /// Current factor, defaulting to 1 for unseen pairs.
    pub fn alpha(&self, task_id: &str, criterion_id: &str) -> f64 {
        self.entries
            .get(&(task_id.to_string(), criterion_id.to_string()))
            .map_or(1.0, |e| e.alpha)
    }

    pub fn entry(&self, task_id: &str, criterion_id: &str) -> Option<&FactorEntry> {
        self.entries
            .get(&(task_id.to_string(), criterion_id.to_string()))
    }

    pub fn set_alpha(&mut self, task_id: &str, criterion_id: &str, alpha: f64) {
        self.entries
            .entry((task_id.to_string(), criterion_id.to_string()))
            .or_default()
            .alpha = alpha;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &FactorEntry)> {
        self.entries.iter()
    }

    /// Applies one factor epoch for `task` from its judged group.
    ///
    /// Criteria with insufficient valid verdicts retain their previous
    /// alpha; sufficient members of a signal-void category blend toward a
    /// target of 1. The epoch counter advances and the group statistics are
    /// recorded either way.
    pub fn epoch_update(
        &mut self,
        matrix: &VerdictMatrix,
        task: &Task,
        config: &Pow3rConfig,
    ) -> Result<()> {
        config.validate()?;
        matrix.check_against(task)?;
        let stats = criterion_stats(matrix, config.min_valid_fraction);
        for (_, members) in task.criteria_by_category() {
            let signals: Vec<f64> = members
                .iter()
                .map(|&j| smoothed_signal(stats[j].variance, config.epsilon))
                .collect();
            let weights: Vec<f64> = members
                .iter()
                .map(|&j| f64::from(task.criteria[j].weight))
                .collect();
            let sufficient: Vec<bool> = members.iter().map(|&j| stats[j].is_sufficient()).collect();
            let g_bar = category_signal_mean(&signals, &weights, &sufficient);
            for (pos, &j) in members.iter().enumerate() {
                let key = (task.id.clone(), task.criteria[j].id.clone());
                let entry = self.entries.entry(key).or_default();
                if sufficient[pos] {
                    let alpha_hat = match g_bar {
                        Some(gb) => target_factor(signals[pos], gb, config),
                        // signal-void category: pull back toward 1
                        None => 1.0,
                    };
                    entry.alpha = config.clip(
                        (1.0 - config.beta_ema) * entry.alpha + config.beta_ema * alpha_hat,
                    );
                }
                entry.epoch += 1;
                entry.last_stats = Some(StatsSnapshot {
                    pass_rate: stats[j].pass_rate,
                    variance: stats[j].variance,
                    n_valid: stats[j].n_valid,
                    state: stats[j].state,
                });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: FactorDoc = serde_json::from_str(&content).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        if doc.schema != FACTORS_SCHEMA {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("schema is {} but expected {FACTORS_SCHEMA}", doc.schema),
            });
        }
        let mut entries = BTreeMap::new();
        for rec in doc.entries {
            let key = (rec.task_id, rec.criterion_id);
            if entries
                .insert(
                    key.clone(),
                    FactorEntry {
                        alpha: rec.alpha,
                        epoch: rec.epoch,
                        last_stats: rec.last_stats,
                    },
                )
                .is_some()
            {
                return Err(Error::Validation(format!(
                    "factor store: duplicate entry for ({}, {})",
                    key.0, key.1
                )));
            }
        }
        Ok(FactorState { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = FactorDoc {
            schema: FACTORS_SCHEMA.to_string(),
            entries: self
                .entries
                .iter()
                .map(|((task_id, criterion_id), e)| FactorRecord {
                    task_id: task_id.clone(),
                    criterion_id: criterion_id.clone(),
                    alpha: e.alpha,
                    epoch: e.epoch,
                    last_stats: e.last_stats,
                })
                .collect(),
        };
        let mut body =
            serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct FactorDoc {
    schema: String,
    entries: Vec<FactorRecord>,
}

#[derive(Serialize, Deserialize)]
struct FactorRecord {
    task_id: String,
    criterion_id: String,
    alpha: f64,
    epoch: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    last_stats: Option<StatsSnapshot>,
}
