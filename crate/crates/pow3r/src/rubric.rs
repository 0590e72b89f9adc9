//! Domain types for tasks, rubrics, rollouts, and verdicts, plus ingestion
//! and validation of the line-delimited dataset formats.
//!
//! A task carries a prompt-specific rubric: a list of criteria, each with an
//! integer human weight and a category label. Verdicts for one rollout group
//! are stored as an explicit G x N grid; a judge failure is an explicit
//! `invalid` cell, never a missing one.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TASKS_SCHEMA: &str = "pow3r.tasks.v1";
pub const SIGNED_TASKS_SCHEMA: &str = "pow3r.tasks.signed.v1";
pub const VERDICTS_SCHEMA: &str = "pow3r.verdicts.v1";
pub const RESPONSES_SCHEMA: &str = "pow3r.responses.v1";

/// Whether a criterion is stated by the prompt or inferred from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Explicitness {
    #[default]
    Explicit,
    Implicit,
}

/// Whether a criterion is checkable against fact or requires a quality judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objectivity {
    #[default]
    Objective,
    Subjective,
}

/// One rubric item with a positive human weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub text: String,
    /// Static human weight, >= 1 after ingestion.
    pub weight: u32,
    /// Category label; must be one of the task's categories.
    pub category: String,
    /// Participates in strict completion.
    pub required: bool,
    #[serde(default)]
    pub explicitness: Explicitness,
    #[serde(default)]
    pub objectivity: Objectivity,
    /// Set by the good-behavior conversion: the judge scores avoidance and the
    /// parsed verdict is inverted at judging time.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_flip: bool,
}

/// A rubric item as authored, with a signed nonzero point value.
/// Negative weights penalize a behavior; `convert_signed` rewrites them into
/// positively weighted avoidance criteria.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedCriterion {
    pub id: String,
    pub text: String,
    /// Nonzero signed weight.
    pub weight: i64,
    pub category: String,
    #[serde(default)]
    pub required: Option<bool>,
    #[serde(default)]
    pub explicitness: Explicitness,
    #[serde(default)]
    pub objectivity: Objectivity,
}

/// A prompt with its rubric. `categories` is derived from the criteria, so
/// every member is populated by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Task {
    pub id: String,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub criteria: Vec<Criterion>,
    pub categories: BTreeSet<String>,
}

impl Task {
    pub fn new(
        id: String,
        prompt: String,
        image_ref: Option<String>,
        criteria: Vec<Criterion>,
    ) -> Result<Self> {
        if criteria.is_empty() {
            return Err(Error::Validation(format!(
                "task {id}: rubric must contain at least one criterion"
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &criteria {
            if c.weight < 1 {
                return Err(Error::Validation(format!(
                    "task {id}: criterion {} has weight {}; weights must be >= 1 \
                     (signed rubrics must pass through conversion first)",
                    c.id, c.weight
                )));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Validation(format!(
                    "task {id}: duplicate criterion id {}",
                    c.id
                )));
            }
        }
        let categories = criteria.iter().map(|c| c.category.clone()).collect();
        Ok(Task {
            id,
            prompt,
            image_ref,
            criteria,
            categories,
        })
    }

    /// Total static weight over all criteria.
    pub fn total_weight(&self) -> f64 {
        self.criteria.iter().map(|c| f64::from(c.weight)).sum()
    }

    /// Criterion indices grouped by category, in category order.
    pub fn criteria_by_category(&self) -> Vec<(&str, Vec<usize>)> {
        self.categories
            .iter()
            .map(|cat| {
                let idx = self
                    .criteria
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.category == *cat)
                    .map(|(j, _)| j)
                    .collect();
                (cat.as_str(), idx)
            })
            .collect()
    }

    pub fn required_indices(&self) -> Vec<usize> {
        self.criteria
            .iter()
            .enumerate()
            .filter(|(_, c)| c.required)
            .map(|(j, _)| j)
            .collect()
    }
}

/// A task with a signed rubric, prior to good-behavior conversion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignedTask {
    pub id: String,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub criteria: Vec<SignedCriterion>,
}

/// A single judged outcome. `Invalid` carries no pass/fail meaning and is
/// excluded from valid-verdict statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Pass,
    Fail,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            value: VerdictValue::Pass,
            rationale: None,
        }
    }
    pub fn fail() -> Self {
        Verdict {
            value: VerdictValue::Fail,
            rationale: None,
        }
    }
    pub fn invalid() -> Self {
        Verdict {
            value: VerdictValue::Invalid,
            rationale: None,
        }
    }

    /// Binary score for valid verdicts, `None` for invalid ones.
    pub fn score(&self) -> Option<f64> {
        match self.value {
            VerdictValue::Pass => Some(1.0),
            VerdictValue::Fail => Some(0.0),
            VerdictValue::Invalid => None,
        }
    }
}

/// Judged verdicts for one prompt's rollout group: a G x N grid indexed
/// (rollout i, criterion j). Every cell is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictMatrix {
    pub task_id: String,
    pub group_size: usize,
    pub verdicts: Vec<Vec<Verdict>>,
}

impl VerdictMatrix {
    pub fn new(task_id: String, verdicts: Vec<Vec<Verdict>>) -> Result<Self> {
        let group_size = verdicts.len();
        if group_size == 0 {
            return Err(Error::Validation(format!(
                "verdict matrix for task {task_id}: empty rollout group"
            )));
        }
        let width = verdicts[0].len();
        if width == 0 {
            return Err(Error::Validation(format!(
                "verdict matrix for task {task_id}: zero criteria"
            )));
        }
        if verdicts.iter().any(|row| row.len() != width) {
            return Err(Error::Validation(format!(
                "verdict matrix for task {task_id}: ragged rows; every (rollout, criterion) \
                 cell must be present"
            )));
        }
        Ok(VerdictMatrix {
            task_id,
            group_size,
            verdicts,
        })
    }

    pub fn criteria_count(&self) -> usize {
        self.verdicts[0].len()
    }

    pub fn cell(&self, rollout: usize, criterion: usize) -> &Verdict {
        &self.verdicts[rollout][criterion]
    }

    /// Scores down criterion `j`: `None` entries are invalid verdicts.
    pub fn column_scores(&self, j: usize) -> Vec<Option<f64>> {
        self.verdicts.iter().map(|row| row[j].score()).collect()
    }

    /// Checks the matrix shape against a task's rubric.
    pub fn check_against(&self, task: &Task) -> Result<()> {
        if self.task_id != task.id {
            return Err(Error::Validation(format!(
                "verdict matrix is for task {} but was paired with task {}",
                self.task_id, task.id
            )));
        }
        if self.criteria_count() != task.criteria.len() {
            return Err(Error::Validation(format!(
                "task {}: matrix has {} criteria columns but rubric has {}",
                task.id,
                self.criteria_count(),
                task.criteria.len()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Wire records
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SchemaTag {
    schema: String,
}

#[derive(Debug, Deserialize)]
struct CriterionRecord {
    id: String,
    text: String,
    weight: i64,
    category: String,
    #[serde(default)]
    required: Option<bool>,
    #[serde(default)]
    explicitness: Option<Explicitness>,
    #[serde(default)]
    objectivity: Option<Objectivity>,
    #[serde(default)]
    judge_flip: Option<bool>,
}

#[derive(Debug, Deserialize)]
struct TaskRecord {
    id: String,
    prompt: String,
    #[serde(default)]
    image_ref: Option<String>,
    criteria: Vec<CriterionRecord>,
}

/// Resolves the `required` flag: data-driven when present, otherwise a
/// criterion is required iff its weight reaches the task's maximum weight.
fn resolve_required(records: &[CriterionRecord]) -> Vec<bool> {
    let max_weight = records.iter().map(|c| c.weight.abs()).max().unwrap_or(1);
    records
        .iter()
        .map(|c| c.required.unwrap_or(c.weight.abs() >= max_weight))
        .collect()
}

fn task_from_record(rec: TaskRecord) -> Result<Task> {
    let required = resolve_required(&rec.criteria);
    let mut criteria = Vec::with_capacity(rec.criteria.len());
    for (c, req) in rec.criteria.into_iter().zip(required) {
        if c.weight < 1 {
            return Err(Error::Validation(format!(
                "task {}: criterion {} has weight {}; weights must be >= 1 \
                 (signed rubrics must pass through conversion first)",
                rec.id, c.id, c.weight
            )));
        }
        criteria.push(Criterion {
            id: c.id,
            text: c.text,
            weight: c.weight as u32,
            category: c.category,
            required: req,
            explicitness: c.explicitness.unwrap_or_default(),
            objectivity: c.objectivity.unwrap_or_default(),
            judge_flip: c.judge_flip.unwrap_or(false),
        });
    }
    Task::new(rec.id, rec.prompt, rec.image_ref, criteria)
}

fn signed_task_from_record(rec: TaskRecord) -> Result<SignedTask> {
    let required = resolve_required(&rec.criteria);
    let mut criteria = Vec::with_capacity(rec.criteria.len());
    for (c, req) in rec.criteria.into_iter().zip(required) {
        if c.weight == 0 {
            return Err(Error::Validation(format!(
                "task {}: criterion {} has weight 0; signed weights must be nonzero",
                rec.id, c.id
            )));
        }
        criteria.push(SignedCriterion {
            id: c.id,
            text: c.text,
            weight: c.weight,
            category: c.category,
            required: Some(req),
            explicitness: c.explicitness.unwrap_or_default(),
            objectivity: c.objectivity.unwrap_or_default(),
        });
    }
    Ok(SignedTask {
        id: rec.id,
        prompt: rec.prompt,
        image_ref: rec.image_ref,
        criteria,
    })
}

fn read_tagged_lines(path: &Path, expected_schema: &str) -> Result<Vec<(usize, String)>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file; expected schema tag line".into(),
    })?;
    let tag: SchemaTag = serde_json::from_str(&header).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: format!("bad schema tag: {e}"),
    })?;
    if tag.schema != expected_schema {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("schema is {} but expected {expected_schema}", tag.schema),
        });
    }
    Ok(lines.collect())
}

fn parse_lines<T, F, O>(path: &Path, schema: &str, convert: F) -> Result<Vec<O>>
where
    T: for<'de> Deserialize<'de>,
    F: Fn(T) -> Result<O>,
{
    let mut out = Vec::new();
    for (line_no, line) in read_tagged_lines(path, schema)? {
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(convert(rec)?);
    }
    Ok(out)
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

/// Loads and validates a task file. Malformed records are rejected with the
/// offending line number, never silently dropped.
pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>> {
    let tasks = parse_lines(path.as_ref(), TASKS_SCHEMA, task_from_record)?;
    check_unique_ids(tasks.iter().map(|t| t.id.as_str()), "task")?;
    Ok(tasks)
}

/// Loads a signed-rubric task file (weights may be negative, never zero).
pub fn load_signed_tasks(path: impl AsRef<Path>) -> Result<Vec<SignedTask>> {
    let tasks = parse_lines(path.as_ref(), SIGNED_TASKS_SCHEMA, signed_task_from_record)?;
    check_unique_ids(tasks.iter().map(|t| t.id.as_str()), "task")?;
    Ok(tasks)
}

/// Loads a verdict file: one rollout-group matrix per line.
pub fn load_verdicts(path: impl AsRef<Path>) -> Result<Vec<VerdictMatrix>> {
    #[derive(Deserialize)]
    struct MatrixRecord {
        task_id: String,
        group_size: usize,
        verdicts: Vec<Vec<Verdict>>,
    }
    parse_lines(path.as_ref(), VERDICTS_SCHEMA, |rec: MatrixRecord| {
        let m = VerdictMatrix::new(rec.task_id, rec.verdicts)?;
        if m.group_size != rec.group_size {
            return Err(Error::Validation(format!(
                "verdict matrix for task {}: declared group_size {} but {} rollout rows",
                m.task_id, rec.group_size, m.group_size
            )));
        }
        Ok(m)
    })
}

/// Sampled rollout texts for one task, ready for judging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseGroup {
    pub task_id: String,
    pub rollouts: Vec<String>,
}

/// Loads a responses file: one rollout group per line.
pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseGroup>> {
    parse_lines(path.as_ref(), RESPONSES_SCHEMA, |rec: ResponseGroup| {
        if rec.rollouts.is_empty() {
            return Err(Error::Validation(format!(
                "task {}: empty rollout group",
                rec.task_id
            )));
        }
        Ok(rec)
    })
}

pub fn save_responses(path: impl AsRef<Path>, groups: &[ResponseGroup]) -> Result<()> {
    write_jsonl(path.as_ref(), RESPONSES_SCHEMA, groups)
}

/// Schema-tagged JSONL writer for other record types (reports etc.).
pub fn write_jsonl_file<T: Serialize>(
    path: impl AsRef<Path>,
    schema: &str,
    items: &[T],
) -> Result<()> {
    write_jsonl(path.as_ref(), schema, items)
}

fn write_jsonl<T: Serialize>(path: &Path, schema: &str, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    let tag = serde_json::to_string(&SchemaTag {
        schema: schema.to_string(),
    })
    .expect("schema tag serializes");
    writeln!(buf, "{tag}").expect("vec write");
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(buf, "{line}").expect("vec write");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn save_tasks(path: impl AsRef<Path>, tasks: &[Task]) -> Result<()> {
    write_jsonl(path.as_ref(), TASKS_SCHEMA, tasks)
}

pub fn save_signed_tasks(path: impl AsRef<Path>, tasks: &[SignedTask]) -> Result<()> {
    write_jsonl(path.as_ref(), SIGNED_TASKS_SCHEMA, tasks)
}

pub fn save_verdicts(path: impl AsRef<Path>, matrices: &[VerdictMatrix]) -> Result<()> {
    write_jsonl(path.as_ref(), VERDICTS_SCHEMA, matrices)
}

// ---------------------------------------------------------------------------
// Good-behavior conversion
// ---------------------------------------------------------------------------

const AVOIDANCE_PREFIX: &str = "The response avoids: ";

/// Rewrites negatively weighted criteria into positively weighted avoidance
/// criteria: the weight becomes its absolute value, the text is rephrased to
/// the avoidance form, and the criterion is flagged so the judge's verdict is
/// flipped after parsing. Positive criteria pass through unchanged.
pub fn convert_signed(rubric: &[SignedCriterion]) -> Result<Vec<Criterion>> {
    rubric
        .iter()
        .map(|c| {
            if c.weight == 0 {
                return Err(Error::Validation(format!(
                    "criterion {}: weight 0 is not a signed weight",
                    c.id
                )));
            }
            let negative = c.weight < 0;
            Ok(Criterion {
                id: c.id.clone(),
                text: if negative {
                    format!("{AVOIDANCE_PREFIX}{}", c.text)
                } else {
                    c.text.clone()
                },
                weight: c.weight.unsigned_abs() as u32,
                category: c.category.clone(),
                required: c.required.unwrap_or(false),
                explicitness: c.explicitness,
                objectivity: c.objectivity,
                judge_flip: negative,
            })
        })
        .collect()
}

/// Task-level good-behavior conversion.
pub fn convert_signed_task(task: &SignedTask) -> Result<Task> {
    let criteria = convert_signed(&task.criteria)?;
    Task::new(
        task.id.clone(),
        task.prompt.clone(),
        task.image_ref.clone(),
        criteria,
    )
}
