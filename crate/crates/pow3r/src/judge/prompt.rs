//! Judge prompt templates.
//!
//! Three variants: the per-criterion reasoning-then-verdict prompt used for
//! reward judging, a verdict-only per-criterion form, and a per-category
//! batched form that returns one weight-normalized score. The latter two
//! exist for calibration comparisons only. Placeholders are substituted
//! verbatim; an empty substitution value is an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::{Criterion, Explicitness, Objectivity, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    PerCriterion,
    VerdictOnly,
    PerCategory,
}

impl PromptVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "per_criterion" => Ok(PromptVariant::PerCriterion),
            "verdict_only" => Ok(PromptVariant::VerdictOnly),
            "per_category" => Ok(PromptVariant::PerCategory),
            other => Err(Error::Config(format!(
                "unknown prompt variant {other}; expected per_criterion|verdict_only|per_category"
            ))),
        }
    }
}

fn explicitness_label(e: Explicitness) -> &'static str {
    match e {
        Explicitness::Explicit => "Explicit",
        Explicitness::Implicit => "Implicit",
    }
}

fn objectivity_label(o: Objectivity) -> &'static str {
    match o {
        Objectivity::Objective => "Objective",
        Objectivity::Subjective => "Subjective",
    }
}

fn require_nonempty(name: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        Err(Error::Validation(format!(
            "prompt placeholder {name} has no value"
        )))
    } else {
        Ok(())
    }
}

const PER_CRITERION_HEAD: &str = r#"Does the response satisfy this rubric criterion? Evaluate ONLY this criterion.

Rules:
- "Explicit" criteria must be directly addressed. "Implicit" may be inferred.
- "Objective" = factual pass/fail. "Subjective" = quality judgment.
- Weight is context only — does not affect your pass/fail decision.
- Minor phrasing/formatting differences are OK if substance is correct.
- OCR/text recognition criteria require exact text — "EXIST" ≠ "EXIT".

Examples:
- Rubric: "Identify chair material as wood" / Response: "a wooden chair" → {"reasoning": "Explicitly identifies wood.", "criteria_met": true}
- Rubric: "Graph shows decreasing trend after 2020" / Response: "steady growth" → {"reasoning": "Claims growth, not decrease.", "criteria_met": false}
- Rubric: "List ≥3 differences" / Response: "one difference" → {"reasoning": "Only 1 of 3 required.", "criteria_met": false}
- Rubric: "Read sign as 'EMERGENCY EXIT'" / Response: "'EMERGENCY EXIST'" → {"reasoning": "EXIST ≠ EXIT, OCR must be exact.", "criteria_met": false}
"#;

const PER_CRITERION_TAIL: &str = r#"Return ONLY valid JSON. "reasoning" BEFORE "criteria_met".
{"reasoning": "<one sentence>", "criteria_met": true/false}"#;

fn render_per_criterion(response: &str, criterion: &Criterion) -> String {
    format!(
        "{PER_CRITERION_HEAD}\nRubric:\n- Title: {title}\n- Category: {category}\n- {ei} | {os} | Weight: {weight}\n- Criteria: {rationale}\n\nResponse:\n{response}\n\n{PER_CRITERION_TAIL}",
        title = criterion.id,
        category = criterion.category,
        ei = explicitness_label(criterion.explicitness),
        os = objectivity_label(criterion.objectivity),
        weight = criterion.weight,
        rationale = criterion.text,
    )
}

fn render_verdict_only(response: &str, criterion: &Criterion) -> String {
    format!(
        r#"Does the response satisfy this criterion? Evaluate ONLY this criterion.
"Explicit" = directly addressed. "Implicit" = may be inferred.
OCR/text recognition = exact match required.

Rubric:
- Title: {title} | Category: {category}
- {ei} | {os} | Weight: {weight}
- Criteria: {rationale}

Response:
{response}

Return ONLY valid JSON: {{"criteria_met": true}} or {{"criteria_met": false}}"#,
        title = criterion.id,
        category = criterion.category,
        ei = explicitness_label(criterion.explicitness),
        os = objectivity_label(criterion.objectivity),
        weight = criterion.weight,
        rationale = criterion.text,
    )
}

fn render_per_category(response: &str, criteria: &[&Criterion], total_weight: u64) -> String {
    let rubrics_text = criteria
        .iter()
        .map(|c| {
            format!(
                "- {id} [{weight} | {ei} | {os}]: {text}",
                id = c.id,
                weight = c.weight,
                ei = explicitness_label(c.explicitness),
                os = objectivity_label(c.objectivity),
                text = c.text,
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        r#"Score the response against all rubrics below. Evaluate each independently as pass/fail.

Rules:
- "Explicit" = directly addressed. "Implicit" = may be inferred.
- "Objective" = factual. "Subjective" = quality judgment.
- OCR/text recognition criteria require exact text match.
- score = sum(weight of PASSED rubrics) / {total_weight}, between 0.0 and 1.0.

Rubrics:
{rubrics_text}

Total weight: {total_weight}

Response:
{response}

Return ONLY valid JSON. "reasoning" BEFORE "score".
{{"reasoning": "<which rubrics passed/failed>", "score": <0.0–1.0>}}"#
    )
}

/// Renders the judge prompt for one (task, response, criterion) triple.
///
/// The per-category variant batches every criterion sharing the given
/// criterion's category and substitutes that category's total weight.
pub fn render_prompt(
    task: &Task,
    response: &str,
    criterion: &Criterion,
    variant: PromptVariant,
) -> Result<String> {
    require_nonempty("response", response)?;
    require_nonempty("rubric_title", &criterion.id)?;
    require_nonempty("rubric_rationale", &criterion.text)?;
    require_nonempty("rubric_category", &criterion.category)?;
    match variant {
        PromptVariant::PerCriterion => Ok(render_per_criterion(response, criterion)),
        PromptVariant::VerdictOnly => Ok(render_verdict_only(response, criterion)),
        PromptVariant::PerCategory => {
            let members: Vec<&Criterion> = task
                .criteria
                .iter()
                .filter(|c| c.category == criterion.category)
                .collect();
            for c in &members {
                require_nonempty("rubric_rationale", &c.text)?;
            }
            let total_weight = members.iter().map(|c| u64::from(c.weight)).sum();
            Ok(render_per_category(response, &members, total_weight))
        }
    }
}
