//! Rubric-pressure diagnostic.
//!
//! Tracks where training pressure sits: per-criterion within-category weight
//! shares (static or dynamic), signal-state shares grouped by absolute weight
//! tier, the pressure share falling on zero-variance criteria, and per-prompt
//! reward spread before and after reweighting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{reward_cat, reward_dyn, reward_spread};
use crate::error::{Error, Result};
use crate::factor::{criterion_stats, CriterionStats, FactorState, SignalState};
use crate::rubric::{Task, VerdictMatrix};

/// Absolute static weight tier: low {1,2,3}, mid {4}, high {5+}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightTier {
    Low,
    Mid,
    High,
}

impl WeightTier {
    pub fn of(weight: u32) -> Self {
        match weight {
            0..=3 => WeightTier::Low,
            4 => WeightTier::Mid,
            _ => WeightTier::High,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeightTier::Low => "low",
            WeightTier::Mid => "mid",
            WeightTier::High => "high",
        }
    }
}

/// Within-category reward-weight share per criterion: w_j / W_k statically,
/// or (w_j a_j) / sum(w a) with the task's dynamic factors.
pub fn training_pressure(task: &Task, factors: Option<&FactorState>) -> Vec<f64> {
    let weight_of = |j: usize| {
        let w = f64::from(task.criteria[j].weight);
        match factors {
            Some(f) => w * f.alpha(&task.id, &task.criteria[j].id),
            None => w,
        }
    };
    let mut shares = vec![0.0; task.criteria.len()];
    for (_, members) in task.criteria_by_category() {
        let total: f64 = members.iter().map(|&j| weight_of(j)).sum();
        for &j in &members {
            shares[j] = weight_of(j) / total;
        }
    }
    shares
}

/// Fractions of criteria in each signal state, one row per populated tier.
/// The four columns sum to 1 within a tier; insufficient-validity criteria
/// are a separate column rather than being folded into dead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierStateShares {
    pub tier: WeightTier,
    pub criteria: usize,
    pub dead: f64,
    pub saturated: f64,
    pub mixed: f64,
    pub insufficient: f64,
}

fn pair_matrices<'a>(
    matrices: &'a [VerdictMatrix],
    tasks: &'a [Task],
) -> Result<Vec<(&'a VerdictMatrix, &'a Task)>> {
    let by_id: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    matrices
        .iter()
        .map(|m| {
            let task = by_id.get(m.task_id.as_str()).ok_or_else(|| {
                Error::Validation(format!("verdict matrix references unknown task {}", m.task_id))
            })?;
            m.check_against(task)?;
            Ok((m, *task))
        })
        .collect()
}

pub fn signal_state_shares(
    matrices: &[VerdictMatrix],
    tasks: &[Task],
    min_valid_fraction: f64,
) -> Result<Vec<TierStateShares>> {
    let mut counts: BTreeMap<WeightTier, [usize; 4]> = BTreeMap::new();
    for (matrix, task) in pair_matrices(matrices, tasks)? {
        let stats = criterion_stats(matrix, min_valid_fraction);
        for (j, criterion) in task.criteria.iter().enumerate() {
            let slot = match stats[j].state {
                SignalState::Dead => 0,
                SignalState::Saturated => 1,
                SignalState::Mixed => 2,
                SignalState::Insufficient => 3,
            };
            counts.entry(WeightTier::of(criterion.weight)).or_default()[slot] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(tier, c)| {
            let total = (c[0] + c[1] + c[2] + c[3]) as f64;
            TierStateShares {
                tier,
                criteria: c.iter().sum(),
                dead: c[0] as f64 / total,
                saturated: c[1] as f64 / total,
                mixed: c[2] as f64 / total,
                insufficient: c[3] as f64 / total,
            }
        })
        .collect())
}

fn zero_signal(stats: &CriterionStats) -> bool {
    // zero-variance with sufficient validity: dead or saturated
    matches!(stats.state, SignalState::Dead | SignalState::Saturated)
}

/// Pressure-weighted share falling on zero-signal criteria, averaged over
/// populated categories within each prompt and then over prompts.
pub fn zero_signal_pressure(
    matrices: &[VerdictMatrix],
    tasks: &[Task],
    factors: Option<&FactorState>,
    min_valid_fraction: f64,
) -> Result<f64> {
    let pairs = pair_matrices(matrices, tasks)?;
    if pairs.is_empty() {
        return Err(Error::Validation("no verdict matrices given".into()));
    }
    let mut prompt_means = Vec::with_capacity(pairs.len());
    for (matrix, task) in pairs {
        let stats = criterion_stats(matrix, min_valid_fraction);
        let pressure = training_pressure(task, factors);
        let mut category_shares = Vec::new();
        for (_, members) in task.criteria_by_category() {
            let share: f64 = members
                .iter()
                .filter(|&&j| zero_signal(&stats[j]))
                .map(|&j| pressure[j])
                .sum();
            category_shares.push(share);
        }
        prompt_means
            .push(category_shares.iter().sum::<f64>() / category_shares.len() as f64);
    }
    Ok(prompt_means.iter().sum::<f64>() / prompt_means.len() as f64)
}

/// Per-prompt reward spread under the static category reward vs the dynamic
/// one, for the same verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadPair {
    pub task_id: String,
    pub static_spread: f64,
    pub dynamic_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadComparison {
    pub pairs: Vec<SpreadPair>,
    /// Mean of dynamic/static - 1 over prompts with nonzero static spread.
    pub mean_relative_widening: Option<f64>,
}

pub fn spread_comparison(
    matrices: &[VerdictMatrix],
    tasks: &[Task],
    factors: &FactorState,
) -> Result<SpreadComparison> {
    let mut pairs = Vec::new();
    for (matrix, task) in pair_matrices(matrices, tasks)? {
        let static_spread = reward_spread(&reward_cat(matrix, task))?;
        let dynamic_spread = reward_spread(&reward_dyn(matrix, task, factors))?;
        pairs.push(SpreadPair {
            task_id: task.id.clone(),
            static_spread,
            dynamic_spread,
        });
    }
    let widenings: Vec<f64> = pairs
        .iter()
        .filter(|p| p.static_spread > 0.0)
        .map(|p| p.dynamic_spread / p.static_spread - 1.0)
        .collect();
    let mean_relative_widening = if widenings.is_empty() {
        None
    } else {
        Some(widenings.iter().sum::<f64>() / widenings.len() as f64)
    };
    Ok(SpreadComparison {
        pairs,
        mean_relative_widening,
    })
}

/// One criterion's pressure bookkeeping inside its category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionPressureRow {
    pub task_id: String,
    pub category: String,
    pub criterion_id: String,
    pub weight: u32,
    pub tier: WeightTier,
    pub state: SignalState,
    pub variance: f64,
    pub static_share: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamic_share: Option<f64>,
}

/// The full diagnostic: tier-by-state shares, zero-signal pressure before and
/// after reweighting, spread pairs, and the per-criterion pressure table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub tier_state_shares: Vec<TierStateShares>,
    pub zero_signal_pressure_static: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_signal_pressure_dynamic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread: Option<SpreadComparison>,
    pub per_criterion: Vec<CriterionPressureRow>,
}

pub fn build_pressure_report(
    matrices: &[VerdictMatrix],
    tasks: &[Task],
    factors: Option<&FactorState>,
    min_valid_fraction: f64,
) -> Result<PressureReport> {
    let tier_state_shares = signal_state_shares(matrices, tasks, min_valid_fraction)?;
    let zero_static = zero_signal_pressure(matrices, tasks, None, min_valid_fraction)?;
    let zero_dynamic = factors
        .map(|f| zero_signal_pressure(matrices, tasks, Some(f), min_valid_fraction))
        .transpose()?;
    let spread = factors
        .map(|f| spread_comparison(matrices, tasks, f))
        .transpose()?;

    let mut per_criterion = Vec::new();
    for (matrix, task) in pair_matrices(matrices, tasks)? {
        let stats = criterion_stats(matrix, min_valid_fraction);
        let static_shares = training_pressure(task, None);
        let dynamic_shares = factors.map(|f| training_pressure(task, Some(f)));
        for (j, criterion) in task.criteria.iter().enumerate() {
            per_criterion.push(CriterionPressureRow {
                task_id: task.id.clone(),
                category: criterion.category.clone(),
                criterion_id: criterion.id.clone(),
                weight: criterion.weight,
                tier: WeightTier::of(criterion.weight),
                state: stats[j].state,
                variance: stats[j].variance,
                static_share: static_shares[j],
                dynamic_share: dynamic_shares.as_ref().map(|d| d[j]),
            });
        }
    }
    Ok(PressureReport {
        tier_state_shares,
        zero_signal_pressure_static: zero_static,
        zero_signal_pressure_dynamic: zero_dynamic,
        spread,
        per_criterion,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.9}")
}

fn write_file(dir: &Path, name: &str, contents: String) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the machine-readable tables and plot-ready series. Returns every
/// file written, in a deterministic order with byte-stable contents.
pub fn emit_report(report: &PressureReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Internal(e.to_string()))?;
    json.push('\n');
    written.push(write_file(dir, "report.json", json)?);

    let mut tiers = String::from("tier,criteria,dead,saturated,mixed,insufficient\n");
    for row in &report.tier_state_shares {
        tiers.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.tier.label(),
            row.criteria,
            fmt(row.dead),
            fmt(row.saturated),
            fmt(row.mixed),
            fmt(row.insufficient)
        ));
    }
    written.push(write_file(dir, "tier_state_shares.csv", tiers)?);

    let mut pressure = String::from(
        "task_id,category,criterion_id,weight,tier,state,variance,static_share,dynamic_share\n",
    );
    for row in &report.per_criterion {
        pressure.push_str(&format!(
            "{},{},{},{},{},{:?},{},{},{}\n",
            row.task_id,
            row.category,
            row.criterion_id,
            row.weight,
            row.tier.label(),
            row.state,
            fmt(row.variance),
            fmt(row.static_share),
            row.dynamic_share.map(fmt).unwrap_or_default()
        ));
    }
    written.push(write_file(dir, "pressure_per_criterion.csv", pressure)?);

    let mut zero = String::from("pressure,value\n");
    zero.push_str(&format!(
        "static,{}\n",
        fmt(report.zero_signal_pressure_static)
    ));
    if let Some(d) = report.zero_signal_pressure_dynamic {
        zero.push_str(&format!("dynamic,{}\n", fmt(d)));
    }
    written.push(write_file(dir, "zero_signal_pressure.csv", zero)?);

    if let Some(spread) = &report.spread {
        let mut pairs = String::from("task_id,static_spread,dynamic_spread\n");
        for p in &spread.pairs {
            pairs.push_str(&format!(
                "{},{},{}\n",
                p.task_id,
                fmt(p.static_spread),
                fmt(p.dynamic_spread)
            ));
        }
        if let Some(w) = spread.mean_relative_widening {
            pairs.push_str(&format!("mean_relative_widening,,{}\n", fmt(w)));
        }
        written.push(write_file(dir, "spread_pairs.csv", pairs)?);
    }

    // plot-ready (x, y, label) series mirroring the tier bars, the
    // before/after pressure bars, and the spread scatter
    let mut bars = String::from("x,y,label\n");
    for (i, row) in report.tier_state_shares.iter().enumerate() {
        for (share, state) in [
            (row.dead, "dead"),
            (row.saturated, "saturated"),
            (row.mixed, "mixed"),
            (row.insufficient, "insufficient"),
        ] {
            bars.push_str(&format!("{},{},{}:{}\n", i, fmt(share), row.tier.label(), state));
        }
    }
    written.push(write_file(dir, "plot_tier_bars.csv", bars)?);

    let mut pbars = String::from("x,y,label\n");
    pbars.push_str(&format!(
        "0,{},static\n",
        fmt(report.zero_signal_pressure_static)
    ));
    if let Some(d) = report.zero_signal_pressure_dynamic {
        pbars.push_str(&format!("1,{},dynamic\n", fmt(d)));
    }
    written.push(write_file(dir, "plot_pressure_bars.csv", pbars)?);

    if let Some(spread) = &report.spread {
        let mut scatter = String::from("x,y,label\n");
        for p in &spread.pairs {
            scatter.push_str(&format!(
                "{},{},{}\n",
                fmt(p.static_spread),
                fmt(p.dynamic_spread),
                p.task_id
            ));
        }
        written.push(write_file(dir, "plot_spread_scatter.csv", scatter)?);
    }
    Ok(written)
}
