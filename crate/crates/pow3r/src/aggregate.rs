//! Scalar reward constructions over a judged rollout group, group-relative
//! advantages, and the k3 KL estimator.
//!
//! Four constructions share the same verdict grid and differ only in how the
//! per-criterion verdicts are folded into one scalar per rollout:
//!
//! - `binary`: 1 iff every required criterion passes
//! - `scalar`: plain weighted sum of passes
//! - `cat`: mean over populated categories of the weight-normalized pass mass
//! - `dyn`: the category form with per-criterion dynamic weights w * alpha
//!
//! Invalid verdicts score 0 inside reward sums and never count as a pass for
//! required criteria.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::factor::FactorState;
use crate::rubric::{Task, VerdictMatrix};

/// Which reward construction to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    Binary,
    StaticScalar,
    CategoryBalanced,
    Pow3rDynamic,
}

impl ConstructionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstructionKind::Binary => "binary",
            ConstructionKind::StaticScalar => "scalar",
            ConstructionKind::CategoryBalanced => "cat",
            ConstructionKind::Pow3rDynamic => "dyn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ConstructionKind::Binary),
            "scalar" => Ok(ConstructionKind::StaticScalar),
            "cat" => Ok(ConstructionKind::CategoryBalanced),
            "dyn" => Ok(ConstructionKind::Pow3rDynamic),
            other => Err(Error::Config(format!(
                "unknown construction {other}; expected binary|scalar|cat|dyn"
            ))),
        }
    }
}

/// A construction paired with the factor state the dynamic form requires.
#[derive(Debug, Clone, Copy)]
pub enum RewardConstruction<'a> {
    Binary,
    StaticScalar,
    CategoryBalanced,
    Pow3rDynamic(&'a FactorState),
}

impl RewardConstruction<'_> {
    pub fn kind(&self) -> ConstructionKind {
        match self {
            RewardConstruction::Binary => ConstructionKind::Binary,
            RewardConstruction::StaticScalar => ConstructionKind::StaticScalar,
            RewardConstruction::CategoryBalanced => ConstructionKind::CategoryBalanced,
            RewardConstruction::Pow3rDynamic(_) => ConstructionKind::Pow3rDynamic,
        }
    }

    pub fn rewards(&self, matrix: &VerdictMatrix, task: &Task) -> Result<Vec<f64>> {
        match self {
            RewardConstruction::Binary => reward_binary(matrix, task),
            RewardConstruction::StaticScalar => Ok(reward_scalar(matrix, task)),
            RewardConstruction::CategoryBalanced => Ok(reward_cat(matrix, task)),
            RewardConstruction::Pow3rDynamic(factors) => Ok(reward_dyn(matrix, task, factors)),
        }
    }
}

fn cell_score(matrix: &VerdictMatrix, i: usize, j: usize) -> f64 {
    // invalid verdicts score 0 inside reward sums
    matrix.cell(i, j).score().unwrap_or(0.0)
}

/// All-or-nothing reward: 1 iff every required criterion passes. A rubric
/// without required criteria would make this constant 1 and is rejected.
pub fn reward_binary(matrix: &VerdictMatrix, task: &Task) -> Result<Vec<f64>> {
    let required = task.required_indices();
    if required.is_empty() {
        return Err(Error::Config(format!(
            "task {}: binary reward needs at least one required criterion",
            task.id
        )));
    }
    Ok(strict_completion(matrix, task)
        .into_iter()
        .map(|ok| if ok { 1.0 } else { 0.0 })
        .collect())
}

/// Static weighted sum of passed criteria.
pub fn reward_scalar(matrix: &VerdictMatrix, task: &Task) -> Vec<f64> {
    (0..matrix.group_size)
        .map(|i| {
            task.criteria
                .iter()
                .enumerate()
                .map(|(j, c)| f64::from(c.weight) * cell_score(matrix, i, j))
                .sum()
        })
        .collect()
}

/// Static scalar normalized to a 0-100 percentage of the total rubric weight.
pub fn rubric_reward_percent(matrix: &VerdictMatrix, task: &Task) -> Vec<f64> {
    let total = task.total_weight();
    reward_scalar(matrix, task)
        .into_iter()
        .map(|r| 100.0 * r / total)
        .collect()
}

fn category_scores_with<'a>(
    matrix: &VerdictMatrix,
    task: &'a Task,
    weight_of: impl Fn(usize) -> f64,
) -> Vec<(&'a str, Vec<f64>)> {
    task.criteria_by_category()
        .into_iter()
        .map(|(cat, members)| {
            let weights: Vec<f64> = members.iter().map(|&j| weight_of(j)).collect();
            let denom: f64 = weights.iter().sum();
            let scores = (0..matrix.group_size)
                .map(|i| {
                    let mass: f64 = members
                        .iter()
                        .zip(&weights)
                        .map(|(&j, w)| w * cell_score(matrix, i, j))
                        .sum();
                    mass / denom
                })
                .collect();
            (cat, scores)
        })
        .collect()
}

fn mean_over_categories(per_category: &[(&str, Vec<f64>)], group_size: usize) -> Vec<f64> {
    let k = per_category.len() as f64;
    (0..group_size)
        .map(|i| per_category.iter().map(|(_, s)| s[i]).sum::<f64>() / k)
        .collect()
}

/// Category-normalized reward: mean over populated categories of the
/// within-category weight-normalized pass mass. Range [0, 1].
pub fn reward_cat(matrix: &VerdictMatrix, task: &Task) -> Vec<f64> {
    let per_cat = category_scores_with(matrix, task, |j| f64::from(task.criteria[j].weight));
    mean_over_categories(&per_cat, matrix.group_size)
}

/// Dynamic reward: the category form with weights w_j * alpha_j and the
/// renormalizer recomputed from the dynamic weights. Unseen criteria read a
/// factor of 1, so a fresh factor state reproduces `reward_cat`.
pub fn reward_dyn(matrix: &VerdictMatrix, task: &Task, factors: &FactorState) -> Vec<f64> {
    let per_cat = category_scores_with(matrix, task, |j| {
        f64::from(task.criteria[j].weight) * factors.alpha(&task.id, &task.criteria[j].id)
    });
    mean_over_categories(&per_cat, matrix.group_size)
}

/// Per-category weight-normalized scores as a G x K grid, with the category
/// order of `task.categories`.
pub fn category_score_grid<'a>(
    matrix: &VerdictMatrix,
    task: &'a Task,
    factors: Option<&FactorState>,
) -> Vec<(&'a str, Vec<f64>)> {
    match factors {
        None => category_scores_with(matrix, task, |j| f64::from(task.criteria[j].weight)),
        Some(f) => category_scores_with(matrix, task, |j| {
            f64::from(task.criteria[j].weight) * f.alpha(&task.id, &task.criteria[j].id)
        }),
    }
}

/// True iff every required criterion passes; invalid verdicts do not pass.
pub fn strict_completion(matrix: &VerdictMatrix, task: &Task) -> Vec<bool> {
    let required = task.required_indices();
    (0..matrix.group_size)
        .map(|i| {
            required
                .iter()
                .all(|&j| matrix.cell(i, j).score() == Some(1.0))
        })
        .collect()
}

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Threshold under which a group's reward std counts as exactly zero.
const TIE_EPSILON: f64 = 1e-12;

/// Group-relative advantages: (R - mean) / std with the population std, and
/// all zeros for a tied group (std = 0). No epsilon is added to the
/// denominator.
pub fn advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::Validation(format!(
            "advantages need a group of at least 2 rollouts, got {}",
            rewards.len()
        )));
    }
    let (mean, std) = population_mean_std(rewards);
    if std < TIE_EPSILON {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Population standard deviation of the group's rewards before
/// standardization; zero spread means the group yields no gradient.
pub fn reward_spread(rewards: &[f64]) -> Result<f64> {
    if rewards.len() < 2 {
        return Err(Error::Validation(format!(
            "reward spread needs a group of at least 2 rollouts, got {}",
            rewards.len()
        )));
    }
    Ok(population_mean_std(rewards).1)
}

/// Schulman k3 estimator of KL from a reference-to-policy probability ratio:
/// u - ln(u) - 1. Nonnegative, zero only at u = 1.
pub fn kl_k3(ratio: f64) -> Result<f64> {
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(Error::Validation(format!(
            "k3 estimator needs a positive ratio, got {ratio}"
        )));
    }
    Ok(ratio - ratio.ln() - 1.0)
}

/// Rewards, advantages, and spread for one rollout group under one
/// construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupRewardReport {
    pub task_id: String,
    pub construction: ConstructionKind,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub strict_completion: Vec<bool>,
    /// Per-category scores per rollout, keyed by category label.
    pub category_scores: BTreeMap<String, Vec<f64>>,
    /// Population std of the rewards before standardization.
    pub spread: f64,
    /// Share of verdict cells that were invalid.
    pub invalid_rate: f64,
}

pub fn group_report(
    matrix: &VerdictMatrix,
    task: &Task,
    construction: RewardConstruction<'_>,
) -> Result<GroupRewardReport> {
    matrix.check_against(task)?;
    let rewards = construction.rewards(matrix, task)?;
    let advantages = advantages(&rewards)?;
    let spread = reward_spread(&rewards)?;
    let factors = match construction {
        RewardConstruction::Pow3rDynamic(f) => Some(f),
        _ => None,
    };
    let category_scores = category_score_grid(matrix, task, factors)
        .into_iter()
        .map(|(cat, scores)| (cat.to_string(), scores))
        .collect();
    let cells = matrix.group_size * matrix.criteria_count();
    let invalid = matrix
        .verdicts
        .iter()
        .flatten()
        .filter(|v| v.score().is_none())
        .count();
    Ok(GroupRewardReport {
        task_id: task.id.clone(),
        construction: construction.kind(),
        rewards,
        advantages,
        strict_completion: strict_completion(matrix, task),
        category_scores,
        spread,
        invalid_rate: invalid as f64 / cells as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rubric::{Criterion, Explicitness, Objectivity, Verdict};

    fn crit(id: &str, weight: u32, category: &str, required: bool) -> Criterion {
        Criterion {
            id: id.into(),
            text: format!("criterion {id}"),
            weight,
            category: category.into(),
            required,
            explicitness: Explicitness::Explicit,
            objectivity: Objectivity::Objective,
            judge_flip: false,
        }
    }

    fn task(criteria: Vec<Criterion>) -> Task {
        Task::new("t".into(), "p".into(), None, criteria).unwrap()
    }

    fn matrix(rows: &[&[i8]]) -> VerdictMatrix {
        let grid = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| match v {
                        1 => Verdict::pass(),
                        0 => Verdict::fail(),
                        _ => Verdict::invalid(),
                    })
                    .collect()
            })
            .collect();
        VerdictMatrix::new("t".into(), grid).unwrap()
    }

    #[test]
    fn binary_reward_on_required_criteria() {
        let t = task(vec![
            crit("a", 5, "k", true),
            crit("b", 3, "k", true),
            crit("c", 1, "k", false),
        ]);
        // rollout 0: all required pass (optional fails); 1: one required fails;
        // 2: required invalid
        let m = matrix(&[&[1, 1, 0], &[1, 0, 1], &[1, -1, 1]]);
        assert_eq!(reward_binary(&m, &t).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(strict_completion(&m, &t), vec![true, false, false]);
    }

    #[test]
    fn binary_rejects_rubric_without_required() {
        let t = task(vec![crit("a", 1, "k", false)]);
        let m = matrix(&[&[1], &[0]]);
        assert!(matches!(
            reward_binary(&m, &t).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn scalar_reward_weighted_sum() {
        let t = task(vec![
            crit("a", 5, "k", true),
            crit("b", 3, "k", false),
            crit("c", 2, "k", false),
        ]);
        let m = matrix(&[&[1, 0, 1], &[0, 0, 0], &[1, 1, 1]]);
        assert_eq!(reward_scalar(&m, &t), vec![7.0, 0.0, 10.0]);
        let pct = rubric_reward_percent(&m, &t);
        assert!((pct[0] - 70.0).abs() < 1e-12);
        assert!((pct[2] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn cat_reward_hand_fixture() {
        // cat A: w=[2,3], s=[1,0]; cat B: w=[1], s=[1] -> (0.4 + 1)/2 = 0.7
        let t = task(vec![
            crit("a1", 2, "A", false),
            crit("a2", 3, "A", true),
            crit("b1", 1, "B", false),
        ]);
        let m = matrix(&[&[1, 0, 1], &[1, 1, 1]]);
        let r = reward_cat(&m, &t);
        assert!((r[0] - 0.7).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12, "all pass saturates at 1");
    }

    #[test]
    fn cat_reward_single_category_is_weighted_mean() {
        let t = task(vec![crit("a", 2, "k", false), crit("b", 6, "k", true)]);
        let m = matrix(&[&[1, 0], &[0, 1]]);
        let r = reward_cat(&m, &t);
        assert!((r[0] - 0.25).abs() < 1e-12);
        assert!((r[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dyn_reward_hand_fixture() {
        // one category, w=[2,2], alpha=[1.5, 0.67], s=[0,1] -> 1.34/4.34
        let t = task(vec![crit("a", 2, "k", false), crit("b", 2, "k", true)]);
        let m = matrix(&[&[0, 1], &[1, 1]]);
        let mut f = FactorState::new();
        f.set_alpha("t", "a", 1.5);
        f.set_alpha("t", "b", 0.67);
        let r = reward_dyn(&m, &t, &f);
        assert!((r[0] - 0.308_755_760_368_663).abs() < 1e-9);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dyn_with_fresh_factors_equals_cat() {
        let t = task(vec![
            crit("a", 2, "A", false),
            crit("b", 5, "A", true),
            crit("c", 1, "B", false),
        ]);
        let m = matrix(&[&[1, 0, 1], &[0, 1, -1], &[1, 1, 0]]);
        let fresh = FactorState::new();
        let dyn_r = reward_dyn(&m, &t, &fresh);
        let cat_r = reward_cat(&m, &t);
        for (d, c) in dyn_r.iter().zip(&cat_r) {
            assert!((d - c).abs() < 1e-15);
        }
        // equal (non-unit) factors in each category also reduce to cat
        let mut f = FactorState::new();
        for c in &t.criteria {
            f.set_alpha("t", &c.id, 1.3);
        }
        let dyn_r = reward_dyn(&m, &t, &f);
        for (d, c) in dyn_r.iter().zip(&cat_r) {
            assert!((d - c).abs() < 1e-12);
        }
    }

    #[test]
    fn advantages_hand_fixture() {
        // deviations [0.4, 0, 0, -0.4], population std sqrt(0.08):
        // 0.4 / sqrt(0.08) is exactly sqrt(2)
        let a = advantages(&[0.9, 0.5, 0.5, 0.1]).unwrap();
        assert!((a[0] - std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!(a[1].abs() < 1e-12);
        assert!(a[2].abs() < 1e-12);
        assert!((a[3] + std::f64::consts::SQRT_2).abs() < 1e-9);

        assert_eq!(advantages(&[0.4, 0.4, 0.4]).unwrap(), vec![0.0, 0.0, 0.0]);
        let two = advantages(&[1.0, 0.0]).unwrap();
        assert!((two[0] - 1.0).abs() < 1e-12);
        assert!((two[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn advantages_reject_single_rollout() {
        assert!(advantages(&[1.0]).is_err());
    }

    #[test]
    fn spread_hand_fixtures() {
        assert!((reward_spread(&[0.9, 0.5, 0.5, 0.1]).unwrap() - 0.282_842_712_474_619).abs() < 1e-9);
        assert_eq!(reward_spread(&[0.3, 0.3]).unwrap(), 0.0);
        assert!((reward_spread(&[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k3_hand_fixtures() {
        assert_eq!(kl_k3(1.0).unwrap(), 0.0);
        assert!((kl_k3(2.0).unwrap() - 0.306_852_819_440_055).abs() < 1e-9);
        assert!((kl_k3(0.5).unwrap() - 0.193_147_180_559_945).abs() < 1e-9);
        assert!(kl_k3(0.0).is_err());
        assert!(kl_k3(-1.0).is_err());
        assert!(kl_k3(f64::NAN).is_err());
    }

    #[test]
    fn k3_nonnegative_over_wide_range() {
        let mut u = 1e-3;
        while u <= 1e3 {
            let v = kl_k3(u).unwrap();
            assert!(v >= 0.0, "k3({u}) = {v}");
            if (u - 1.0).abs() > 1e-9 {
                assert!(v > 0.0);
            }
            u *= 1.07;
        }
    }

    #[test]
    fn strict_completion_matches_binary() {
        let t = task(vec![crit("a", 5, "k", true), crit("b", 1, "k", false)]);
        let m = matrix(&[&[1, 0], &[0, 1], &[1, 1]]);
        let strict = strict_completion(&m, &t);
        let binary = reward_binary(&m, &t).unwrap();
        for (s, b) in strict.iter().zip(&binary) {
            assert_eq!(*s, *b == 1.0);
        }
    }

    #[test]
    fn group_report_carries_invalid_rate() {
        let t = task(vec![crit("a", 2, "k", true), crit("b", 2, "k", false)]);
        let m = matrix(&[&[1, -1], &[0, 1]]);
        let rep = group_report(&m, &t, RewardConstruction::CategoryBalanced).unwrap();
        assert!((rep.invalid_rate - 0.25).abs() < 1e-12);
        assert_eq!(rep.rewards.len(), 2);
        assert_eq!(rep.category_scores.len(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn reward_vec() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..1.0f64, 2..17)
        }

        proptest! {
            /// advantages(a * R + b) == advantages(R) for a > 0
            #[test]
            fn advantage_affine_invariance(
                rewards in reward_vec(),
                scale in 0.05..20.0f64,
                shift in -5.0..5.0f64,
            ) {
                let base = advantages(&rewards).unwrap();
                let mapped: Vec<f64> =
                    rewards.iter().map(|r| scale * r + shift).collect();
                let shifted = advantages(&mapped).unwrap();
                for (x, y) in base.iter().zip(&shifted) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }

            /// appending a constant-verdict criterion (as its own category,
            /// so the map from the old reward stays affine) leaves
            /// advantages unchanged
            #[test]
            fn zero_signal_cancellation(
                verdict_bits in proptest::collection::vec(
                    proptest::collection::vec(proptest::bool::ANY, 3), 4..9),
                constant_pass in proptest::bool::ANY,
            ) {
                let base_task = task(vec![
                    crit("a", 2, "A", true),
                    crit("b", 3, "A", false),
                    crit("c", 1, "B", false),
                ]);
                let wide_task = task(vec![
                    crit("a", 2, "A", true),
                    crit("b", 3, "A", false),
                    crit("c", 1, "B", false),
                    crit("d", 4, "C", false),
                ]);
                let base_rows: Vec<Vec<Verdict>> = verdict_bits
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { Verdict::pass() } else { Verdict::fail() }).collect())
                    .collect();
                let wide_rows: Vec<Vec<Verdict>> = base_rows
                    .iter()
                    .map(|row| {
                        let mut row = row.clone();
                        row.push(if constant_pass { Verdict::pass() } else { Verdict::fail() });
                        row
                    })
                    .collect();
                let base_m = VerdictMatrix::new("t".into(), base_rows).unwrap();
                let wide_m = VerdictMatrix::new("t".into(), wide_rows).unwrap();
                for construction in [RewardConstruction::StaticScalar, RewardConstruction::CategoryBalanced] {
                    let before = advantages(&construction.rewards(&base_m, &base_task).unwrap()).unwrap();
                    let after = advantages(&construction.rewards(&wide_m, &wide_task).unwrap()).unwrap();
                    for (x, y) in before.iter().zip(&after) {
                        prop_assert!((x - y).abs() < 1e-9);
                    }
                }
            }

            /// untied groups standardize to mean 0 and population std 1;
            /// tied groups produce all zeros
            #[test]
            fn advantages_are_standardized(rewards in reward_vec()) {
                let adv = advantages(&rewards).unwrap();
                let spread = reward_spread(&rewards).unwrap();
                if spread < 1e-12 {
                    for a in &adv {
                        prop_assert_eq!(*a, 0.0);
                    }
                } else {
                    let n = adv.len() as f64;
                    let mean = adv.iter().sum::<f64>() / n;
                    let std =
                        (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
                    prop_assert!(mean.abs() < 1e-9);
                    prop_assert!((std - 1.0).abs() < 1e-9);
                }
            }

            /// cat and dyn rewards stay in [0, 1]; binary in {0, 1}
            #[test]
            fn reward_ranges(
                verdict_bits in proptest::collection::vec(
                    proptest::collection::vec(proptest::bool::ANY, 3), 2..9),
            ) {
                let t = task(vec![
                    crit("a", 2, "A", true),
                    crit("b", 3, "A", false),
                    crit("c", 1, "B", false),
                ]);
                let rows: Vec<Vec<Verdict>> = verdict_bits
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { Verdict::pass() } else { Verdict::fail() }).collect())
                    .collect();
                let m = VerdictMatrix::new("t".into(), rows).unwrap();
                for r in reward_cat(&m, &t) {
                    prop_assert!((0.0..=1.0).contains(&r));
                }
                let mut f = FactorState::new();
                f.set_alpha("t", "a", 1.5);
                f.set_alpha("t", "b", 0.67);
                for r in reward_dyn(&m, &t, &f) {
                    prop_assert!((0.0..=1.0).contains(&r));
                }
                for r in reward_binary(&m, &t).unwrap() {
                    prop_assert!(r == 0.0 || r == 1.0);
                }
            }

            /// single category: cat == scalar / total weight
            #[test]
            fn cat_reduces_to_normalized_scalar(
                verdict_bits in proptest::collection::vec(
                    proptest::collection::vec(proptest::bool::ANY, 2), 2..9),
            ) {
                let t = task(vec![crit("a", 2, "k", true), crit("b", 5, "k", false)]);
                let rows: Vec<Vec<Verdict>> = verdict_bits
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { Verdict::pass() } else { Verdict::fail() }).collect())
                    .collect();
                let m = VerdictMatrix::new("t".into(), rows).unwrap();
                let cat = reward_cat(&m, &t);
                let scalar = reward_scalar(&m, &t);
                for (c, s) in cat.iter().zip(&scalar) {
                    prop_assert!((c - s / 7.0).abs() < 1e-12);
                }
            }
        }
    }

    /// Lowering the dynamic weight of a constant-verdict criterion never
    /// shrinks the spread of its category's score (single varying criterion).
    #[test]
    fn per_category_spread_monotonicity() {
        let t = task(vec![crit("m", 2, "k", false), crit("s", 2, "k", false)]);
        let m = matrix(&[&[1, 1], &[0, 1], &[1, 1], &[0, 1]]);
        let mut previous = -1.0;
        for step in 0..=10 {
            let alpha_s = 1.5 - step as f64 * (1.5 - 0.67) / 10.0;
            let mut f = FactorState::new();
            f.set_alpha("t", "s", alpha_s);
            let spread = reward_spread(&reward_dyn(&m, &t, &f)).unwrap();
            assert!(
                spread >= previous - 1e-15,
                "alpha_s {alpha_s}: {spread} < {previous}"
            );
            previous = spread;
        }
    }
}
