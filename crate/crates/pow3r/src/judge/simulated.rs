//! Deterministic simulated judge for desk-scale experiments.
//!
//! Verdicts are drawn from a latent per-criterion pass probability plus an
//! invalid probability, with every cell's draw derived by hashing
//! (seed, task id, rollout index, criterion id). The output is a pure
//! function of the seed and table: identical across runs, platforms, and
//! iteration orders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::digest::KeyedDraw;
use crate::error::{Error, Result};
use crate::rubric::{Criterion, Verdict, VerdictValue};

/// Latent probabilities for one criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbability {
    pub pass: f64,
    #[serde(default)]
    pub invalid: f64,
}

/// Simulated judge table: a seed, default probabilities, and per-criterion
/// overrides keyed by criterion id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedJudgeConfig {
    pub seed: u64,
    pub default_pass: f64,
    #[serde(default)]
    pub default_invalid: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, CellProbability>,
}

impl Default for SimulatedJudgeConfig {
    fn default() -> Self {
        SimulatedJudgeConfig {
            seed: 0,
            default_pass: 0.5,
            default_invalid: 0.0,
            overrides: BTreeMap::new(),
        }
    }
}

impl SimulatedJudgeConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |pass: f64, invalid: f64, what: &str| {
            if !(0.0..=1.0).contains(&pass) {
                return Err(Error::Config(format!(
                    "{what}: pass probability {pass} out of [0, 1]"
                )));
            }
            if !(0.0..1.0).contains(&invalid) {
                return Err(Error::Config(format!(
                    "{what}: invalid probability {invalid} out of [0, 1)"
                )));
            }
            Ok(())
        };
        check(self.default_pass, self.default_invalid, "defaults")?;
        for (id, cell) in &self.overrides {
            check(cell.pass, cell.invalid, &format!("criterion {id}"))?;
        }
        Ok(())
    }

    fn probabilities(&self, criterion_id: &str) -> CellProbability {
        self.overrides
            .get(criterion_id)
            .copied()
            .unwrap_or(CellProbability {
                pass: self.default_pass,
                invalid: self.default_invalid,
            })
    }

    /// Raw verdict for one (task, rollout index, criterion) cell, before any
    /// avoidance flip.
    pub fn draw(&self, task_id: &str, rollout_index: usize, criterion: &Criterion) -> Verdict {
        let cell = self.probabilities(&criterion.id);
        let key = |label: &str| {
            KeyedDraw::new(label)
                .num(self.seed)
                .text(task_id)
                .num(rollout_index as u64)
                .text(&criterion.id)
                .unit()
        };
        if key("simjudge.invalid") < cell.invalid {
            return Verdict::invalid();
        }
        let u_pass = key("simjudge.pass");
        Verdict {
            value: if u_pass < cell.pass {
                VerdictValue::Pass
            } else {
                VerdictValue::Fail
            },
            rationale: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rubric::{Explicitness, Objectivity};

    fn crit(id: &str) -> Criterion {
        Criterion {
            id: id.into(),
            text: "text".into(),
            weight: 1,
            category: "k".into(),
            required: false,
            explicitness: Explicitness::Explicit,
            objectivity: Objectivity::Objective,
            judge_flip: false,
        }
    }

    #[test]
    fn degenerate_tables() {
        let mut cfg = SimulatedJudgeConfig {
            default_pass: 1.0,
            ..Default::default()
        };
        for i in 0..20 {
            assert_eq!(cfg.draw("t", i, &crit("c")).value, VerdictValue::Pass);
        }
        cfg.default_pass = 0.0;
        for i in 0..20 {
            assert_eq!(cfg.draw("t", i, &crit("c")).value, VerdictValue::Fail);
        }
    }

    #[test]
    fn fixed_seed_reproduces_exactly() {
        let cfg = SimulatedJudgeConfig {
            seed: 42,
            default_pass: 0.5,
            default_invalid: 0.2,
            ..Default::default()
        };
        let a: Vec<VerdictValue> = (0..50).map(|i| cfg.draw("t", i, &crit("c")).value).collect();
        let b: Vec<VerdictValue> = (0..50).map(|i| cfg.draw("t", i, &crit("c")).value).collect();
        assert_eq!(a, b);
        let other_seed = SimulatedJudgeConfig {
            seed: 43,
            default_pass: 0.5,
            default_invalid: 0.2,
            ..Default::default()
        };
        let c: Vec<VerdictValue> = (0..50)
            .map(|i| other_seed.draw("t", i, &crit("c")).value)
            .collect();
        assert_ne!(a, c);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = SimulatedJudgeConfig {
            default_pass: 0.0,
            ..Default::default()
        };
        cfg.overrides.insert(
            "special".into(),
            CellProbability {
                pass: 1.0,
                invalid: 0.0,
            },
        );
        assert_eq!(cfg.draw("t", 0, &crit("special")).value, VerdictValue::Pass);
        assert_eq!(cfg.draw("t", 0, &crit("plain")).value, VerdictValue::Fail);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let cfg = SimulatedJudgeConfig {
            default_pass: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimulatedJudgeConfig {
            default_invalid: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
