//! Total parser for judge replies.
//!
//! Judges are asked for bare JSON but reply with whatever they like; the
//! parser tolerates surrounding prose, whitespace, and code fences, and maps
//! every failure to `invalid` rather than raising. Its range is exactly
//! {pass, fail, invalid} for the binary variants, and an optional score in
//! [0, 1] for the per-category variant.

use serde_json::Value;

use crate::judge::prompt::PromptVariant;
use crate::rubric::{Verdict, VerdictValue};

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedJudgment {
    Binary(Verdict),
    CategoryScore(Option<f64>),
}

/// Every balanced top-level JSON object in the text, string-aware.
fn candidate_objects(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    spans
}

fn first_json_object(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Some(v);
    }
    // strip code fences, then scan for balanced objects
    let defenced = trimmed.replace("```json", "\n").replace("```", "\n");
    candidate_objects(&defenced)
        .into_iter()
        .find_map(|span| serde_json::from_str::<Value>(span).ok())
}

fn rationale_of(obj: &Value) -> Option<String> {
    obj.get("reasoning")
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn parse_binary(raw: &str) -> Verdict {
    let Some(obj) = first_json_object(raw) else {
        return Verdict::invalid();
    };
    match obj.get("criteria_met") {
        Some(Value::Bool(true)) => Verdict {
            value: VerdictValue::Pass,
            rationale: rationale_of(&obj),
        },
        Some(Value::Bool(false)) => Verdict {
            value: VerdictValue::Fail,
            rationale: rationale_of(&obj),
        },
        // missing key or non-boolean value
        _ => Verdict::invalid(),
    }
}

fn parse_score(raw: &str) -> Option<f64> {
    let obj = first_json_object(raw)?;
    let score = obj.get("score")?.as_f64()?;
    (score.is_finite() && (0.0..=1.0).contains(&score)).then_some(score)
}

/// Never fails: unparseable input becomes an invalid verdict (or a missing
/// score for the per-category variant).
pub fn parse_verdict(raw: &str, variant: PromptVariant) -> ParsedJudgment {
    match variant {
        PromptVariant::PerCriterion | PromptVariant::VerdictOnly => {
            ParsedJudgment::Binary(parse_binary(raw))
        }
        PromptVariant::PerCategory => ParsedJudgment::CategoryScore(parse_score(raw)),
    }
}
