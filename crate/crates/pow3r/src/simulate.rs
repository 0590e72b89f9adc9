//! Surrogate-policy training harness.
//!
//! A synthetic policy holds one logit per (task, criterion); rollout verdicts
//! are independent Bernoulli draws at the current pass probability, and the
//! per-step update credits each criterion with the empirical covariance
//! between its verdicts and the group-relative advantages of the chosen
//! reward construction. Zero-variance criteria therefore receive exactly
//! zero update, and credit scales with how strongly a criterion separates
//! the rollout group.
//!
//! Comparisons across constructions use common random numbers: every verdict
//! draw is keyed by (seed, purpose, step, task, rollout, criterion) and never
//! by the construction, so two runs diverge only through the rewards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregate::{
    advantages, reward_binary, reward_cat, reward_dyn, reward_scalar, strict_completion,
    ConstructionKind,
};
use crate::digest::KeyedDraw;
use crate::error::{Error, Result};
use crate::factor::{FactorState, Pow3rConfig};
use crate::rubric::{Task, Verdict, VerdictMatrix};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Keyed verdict draws for one purpose ("train" or "eval") at one step.
#[derive(Debug, Clone, Copy)]
pub struct SeedStream<'a> {
    pub seed: u64,
    pub purpose: &'a str,
    pub step: u64,
}

impl SeedStream<'_> {
    fn draw(&self, task_id: &str, rollout: usize, criterion_id: &str) -> f64 {
        KeyedDraw::new("surrogate")
            .num(self.seed)
            .text(self.purpose)
            .num(self.step)
            .text(task_id)
            .num(rollout as u64)
            .text(criterion_id)
            .unit()
    }
}

/// Per-criterion pass probabilities via a logistic over stored logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePolicy {
    logits: BTreeMap<(String, String), f64>,
    pub learning_rate: f64,
    pub seed: u64,
    pub logit_clamp: f64,
}

impl SurrogatePolicy {
    /// Builds a policy over the tasks' criteria; unlisted pairs start at the
    /// default pass probability of 0.5 (logit 0).
    pub fn new(
        tasks: &[Task],
        initial_pass: &BTreeMap<(String, String), f64>,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if learning_rate.is_nan() || learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let clamp = 6.0;
        let mut logits = BTreeMap::new();
        for task in tasks {
            for c in &task.criteria {
                let key = (task.id.clone(), c.id.clone());
                let p = initial_pass.get(&key).copied().unwrap_or(0.5);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!(
                        "initial pass probability {p} for ({}, {}) out of [0, 1]",
                        key.0, key.1
                    )));
                }
                logits.insert(key, logit(p).clamp(-clamp, clamp));
            }
        }
        Ok(SurrogatePolicy {
            logits,
            learning_rate,
            seed,
            logit_clamp: clamp,
        })
    }

    pub fn pass_probability(&self, task_id: &str, criterion_id: &str) -> f64 {
        self.logits
            .get(&(task_id.to_string(), criterion_id.to_string()))
            .map_or(0.5, |l| sigmoid(*l))
    }

    /// Samples one rollout group: each verdict drawn independently at the
    /// criterion's current pass probability. The surrogate never produces
    /// invalid verdicts.
    pub fn sample_group(
        &self,
        task: &Task,
        group_size: usize,
        stream: &SeedStream<'_>,
    ) -> VerdictMatrix {
        let probabilities: Vec<f64> = task
            .criteria
            .iter()
            .map(|c| self.pass_probability(&task.id, &c.id))
            .collect();
        let rows = (0..group_size)
            .map(|i| {
                task.criteria
                    .iter()
                    .zip(&probabilities)
                    .map(|(c, &p)| {
                        if stream.draw(&task.id, i, &c.id) < p {
                            Verdict::pass()
                        } else {
                            Verdict::fail()
                        }
                    })
                    .collect()
            })
            .collect();
        VerdictMatrix::new(task.id.clone(), rows).expect("group_size >= 1")
    }

    /// REINFORCE-style credit: delta logit_j = eta * (1/G) * sum_i A_i *
    /// (s_ij - mean_j). Criteria with constant verdicts move by exactly zero.
    pub fn policy_step(&mut self, task: &Task, matrix: &VerdictMatrix, advantage: &[f64]) {
        let group = matrix.group_size as f64;
        for (j, criterion) in task.criteria.iter().enumerate() {
            let scores: Vec<f64> = (0..matrix.group_size)
                .map(|i| matrix.cell(i, j).score().unwrap_or(0.0))
                .collect();
            let mean = scores.iter().sum::<f64>() / group;
            let delta: f64 = scores
                .iter()
                .zip(advantage)
                .map(|(s, a)| a * (s - mean))
                .sum::<f64>()
                / group;
            let key = (task.id.clone(), criterion.id.clone());
            if let Some(l) = self.logits.get_mut(&key) {
                *l = (*l + self.learning_rate * delta).clamp(-self.logit_clamp, self.logit_clamp);
            }
        }
    }
}

/// Run settings for one matched-compute comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: u64,
    pub group_size: usize,
    pub eval_interval: u64,
    /// Rollouts per task in each checkpoint evaluation.
    pub eval_group_size: usize,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub learning_rate: f64,
    pub pow3r: Pow3rConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            steps: 664,
            group_size: 16,
            eval_interval: 83,
            eval_group_size: 128,
            thresholds: Vec::new(),
            seed: 0,
            learning_rate: 0.5,
            pow3r: Pow3rConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config(format!(
                "group size must be >= 2, got {}",
                self.group_size
            )));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval interval must be positive".into()));
        }
        if self.eval_group_size == 0 {
            return Err(Error::Config("eval group size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.pow3r.validate()
    }
}

/// Metrics at one checkpoint; the evaluation reward is the static
/// category-balanced reward regardless of the training construction, so the
/// target stays fixed across comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: u64,
    pub mean_reward: f64,
    pub strict_rate: f64,
    pub per_category: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCrossing {
    pub threshold: f64,
    /// First checkpoint step at or above the threshold; `None` = not reached.
    pub step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub construction: ConstructionKind,
    pub checkpoints: Vec<Checkpoint>,
    pub steps_to_threshold: Vec<ThresholdCrossing>,
}

fn evaluate(policy: &SurrogatePolicy, tasks: &[Task], config: &RunConfig, step: u64) -> Checkpoint {
    let stream = SeedStream {
        seed: config.seed,
        purpose: "eval",
        step,
    };
    let mut reward_sum = 0.0;
    let mut reward_count = 0usize;
    let mut strict_sum = 0usize;
    let mut category_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for task in tasks {
        let matrix = policy.sample_group(task, config.eval_group_size, &stream);
        for r in reward_cat(&matrix, task) {
            reward_sum += r;
            reward_count += 1;
        }
        strict_sum += strict_completion(&matrix, task)
            .into_iter()
            .filter(|&ok| ok)
            .count();
        for (category, scores) in crate::aggregate::category_score_grid(&matrix, task, None) {
            let slot = category_sums.entry(category.to_string()).or_insert((0.0, 0));
            slot.0 += scores.iter().sum::<f64>();
            slot.1 += scores.len();
        }
    }
    Checkpoint {
        step,
        mean_reward: reward_sum / reward_count as f64,
        strict_rate: strict_sum as f64 / reward_count as f64,
        per_category: category_sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect(),
    }
}

fn rewards_for(
    kind: ConstructionKind,
    matrix: &VerdictMatrix,
    task: &Task,
    factors: &FactorState,
) -> Result<Vec<f64>> {
    match kind {
        ConstructionKind::Binary => reward_binary(matrix, task),
        ConstructionKind::StaticScalar => Ok(reward_scalar(matrix, task)),
        ConstructionKind::CategoryBalanced => Ok(reward_cat(matrix, task)),
        ConstructionKind::Pow3rDynamic => Ok(reward_dyn(matrix, task, factors)),
    }
}

/// Trains one construction from a fresh policy and factor state, recording
/// checkpoints at step 0 and every eval interval.
pub fn run_one(
    tasks: &[Task],
    kind: ConstructionKind,
    config: &RunConfig,
    initial_pass: &BTreeMap<(String, String), f64>,
) -> Result<(Trajectory, FactorState)> {
    config.validate()?;
    let mut policy = SurrogatePolicy::new(tasks, initial_pass, config.learning_rate, config.seed)?;
    let mut factors = FactorState::new();
    let mut checkpoints = vec![evaluate(&policy, tasks, config, 0)];
    for step in 1..=config.steps {
        let stream = SeedStream {
            seed: config.seed,
            purpose: "train",
            step,
        };
        for task in tasks {
            let matrix = policy.sample_group(task, config.group_size, &stream);
            let rewards = rewards_for(kind, &matrix, task, &factors)?;
            let advantage = advantages(&rewards)?;
            policy.policy_step(task, &matrix, &advantage);
            if kind == ConstructionKind::Pow3rDynamic {
                // factors used for this group's reward update only afterward
                factors.epoch_update(&matrix, task, &config.pow3r)?;
            }
        }
        if step % config.eval_interval == 0 {
            checkpoints.push(evaluate(&policy, tasks, config, step));
        }
    }
    let steps_to_threshold = config
        .thresholds
        .iter()
        .map(|&threshold| ThresholdCrossing {
            threshold,
            step: checkpoints
                .iter()
                .find(|c| c.mean_reward >= threshold)
                .map(|c| c.step),
        })
        .collect();
    Ok((
        Trajectory {
            construction: kind,
            checkpoints,
            steps_to_threshold,
        },
        factors,
    ))
}

/// Matched-compute comparison: every construction runs from the same seed,
/// tasks, and step budget, drawing the same random numbers at every step.
pub fn run_comparison(
    tasks: &[Task],
    kinds: &[ConstructionKind],
    config: &RunConfig,
    initial_pass: &BTreeMap<(String, String), f64>,
) -> Result<Vec<Trajectory>> {
    if kinds.is_empty() {
        return Err(Error::Config("at least one construction required".into()));
    }
    kinds
        .iter()
        .map(|&kind| run_one(tasks, kind, config, initial_pass).map(|(t, _)| t))
        .collect()
}

/// Per-category factor dispersion: mean rollout variance across the
/// category's criteria (from the factors' recorded stats) and the population
/// std of the factors themselves. Categories with no criteria are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorDispersion {
    pub mean_variance: f64,
    pub alpha_std: f64,
    pub criteria: usize,
}

pub fn factor_dispersion(
    factors: &FactorState,
    tasks: &[Task],
) -> BTreeMap<String, FactorDispersion> {
    let mut per_category: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for task in tasks {
        for c in &task.criteria {
            let slot = per_category.entry(c.category.clone()).or_default();
            slot.0.push(factors.alpha(&task.id, &c.id));
            if let Some(stats) = factors
                .entry(&task.id, &c.id)
                .and_then(|e| e.last_stats.as_ref())
            {
                slot.1.push(stats.variance);
            }
        }
    }
    per_category
        .into_iter()
        .map(|(category, (alphas, variances))| {
            let n = alphas.len() as f64;
            let mean_alpha = alphas.iter().sum::<f64>() / n;
            let alpha_std =
                (alphas.iter().map(|a| (a - mean_alpha).powi(2)).sum::<f64>() / n).sqrt();
            let mean_variance = if variances.is_empty() {
                0.0
            } else {
                variances.iter().sum::<f64>() / variances.len() as f64
            };
            (
                category,
                FactorDispersion {
                    mean_variance,
                    alpha_std,
                    criteria: alphas.len(),
                },
            )
        })
        .collect()
}

pub const INIT_PROBS_SCHEMA: &str = "pow3r.init_probs.v1";

#[derive(Serialize, Deserialize)]
struct InitProbsDoc {
    schema: String,
    entries: Vec<InitProbRecord>,
}

#[derive(Serialize, Deserialize)]
struct InitProbRecord {
    task_id: String,
    criterion_id: String,
    p: f64,
}

/// Loads an initial pass-probability table for the surrogate policy.
pub fn load_initial_pass(
    path: impl AsRef<std::path::Path>,
) -> Result<BTreeMap<(String, String), f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: InitProbsDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if doc.schema != INIT_PROBS_SCHEMA {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("schema is {} but expected {INIT_PROBS_SCHEMA}", doc.schema),
        });
    }
    Ok(doc
        .entries
        .into_iter()
        .map(|r| ((r.task_id, r.criterion_id), r.p))
        .collect())
}

pub fn save_initial_pass(
    path: impl AsRef<std::path::Path>,
    table: &BTreeMap<(String, String), f64>,
) -> Result<()> {
    let path = path.as_ref();
    let doc = InitProbsDoc {
        schema: INIT_PROBS_SCHEMA.to_string(),
        entries: table
            .iter()
            .map(|((task_id, criterion_id), p)| InitProbRecord {
                task_id: task_id.clone(),
                criterion_id: criterion_id.clone(),
                p: *p,
            })
            .collect(),
    };
    let mut body =
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Shipped synthetic suite
// ---------------------------------------------------------------------------

/// The steps-to-threshold suite: every task carries an anchor category whose
/// weight mass sits on saturated high-weight criteria next to one low-weight
/// mixed criterion, plus a pressure category of high-weight dead criteria
/// whose occasional flickers keep the advantage denominator alive. Static
/// category weights crush the mixed criterion's share of the learning signal;
/// the dynamic factors restore it, so the dynamic construction reaches the
/// mid evaluation threshold first.
#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub tasks: Vec<Task>,
    pub initial_pass: BTreeMap<(String, String), f64>,
    pub config: RunConfig,
    /// Index into `config.thresholds` of the mid-band threshold.
    pub mid_threshold_index: usize,
}

pub const SUITE_SATURATED_PER_TASK: usize = 6;
pub const SUITE_DEAD_PER_TASK: usize = 8;
pub const SUITE_PROBE_INITIAL_PASS: f64 = 0.20;
pub const SUITE_DEAD_INITIAL_PASS: f64 = 0.04;

/// Builds the shipped suite for a given seed. Thresholds: a low band crossed
/// almost immediately, the mid band that separates the constructions, and a
/// high band near the late plateau.
pub fn threshold_suite(n_tasks: usize, seed: u64) -> SyntheticSuite {
    use crate::rubric::{Criterion, Explicitness, Objectivity};
    let crit = |id: &str, weight: u32, category: &str, required: bool| Criterion {
        id: id.into(),
        text: format!("synthetic criterion {id}"),
        weight,
        category: category.into(),
        required,
        explicitness: Explicitness::Explicit,
        objectivity: Objectivity::Objective,
        judge_flip: false,
    };
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut initial_pass = BTreeMap::new();
    for t in 0..n_tasks {
        let task_id = format!("synthetic-{t:03}");
        let mut criteria = Vec::new();
        for k in 0..SUITE_SATURATED_PER_TASK {
            let id = format!("sat-{k}");
            initial_pass.insert((task_id.clone(), id.clone()), 1.0);
            criteria.push(crit(&id, 5, "anchor", true));
        }
        let probe = "probe".to_string();
        initial_pass.insert((task_id.clone(), probe.clone()), SUITE_PROBE_INITIAL_PASS);
        criteria.push(crit(&probe, 2, "anchor", false));
        for k in 0..SUITE_DEAD_PER_TASK {
            let id = format!("dead-{k}");
            initial_pass.insert((task_id.clone(), id.clone()), SUITE_DEAD_INITIAL_PASS);
            criteria.push(crit(&id, 5, "pressure", false));
        }
        tasks.push(Task::new(task_id, format!("synthetic prompt {t}"), None, criteria).unwrap());
    }
    let config = RunConfig {
        steps: 40,
        group_size: 16,
        eval_interval: 20,
        eval_group_size: 256,
        thresholds: vec![SUITE_LOW_THRESHOLD, SUITE_MID_THRESHOLD, SUITE_HIGH_THRESHOLD],
        seed,
        learning_rate: 0.5,
        pow3r: Pow3rConfig::default(),
    };
    SyntheticSuite {
        tasks,
        initial_pass,
        config,
        mid_threshold_index: 1,
    }
}

/// Crossed by both constructions at the first checkpoint.
pub const SUITE_LOW_THRESHOLD: f64 = 0.51;
/// The separating band: the dynamic construction reaches it one checkpoint
/// before the static category-balanced construction.
pub const SUITE_MID_THRESHOLD: f64 = 0.5252;
/// Above the late plateau of the shipped step budget.
pub const SUITE_HIGH_THRESHOLD: f64 = 0.60;
