//! Verdict production: a deterministic simulated judge, a remote
//! per-criterion LLM judge with caching and retries, and the judge-agreement
//! utility.

pub mod cache;
pub mod parse;
pub mod prompt;
pub mod remote;
pub mod simulated;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::{Task, Verdict, VerdictMatrix, VerdictValue};
use cache::{VerdictCache, VerdictCacheKey};
use parse::{parse_verdict, ParsedJudgment};
use prompt::{render_prompt, PromptVariant};
use remote::{call_with_retries, ChatRequest, RemoteJudgeConfig, Transport};
use simulated::SimulatedJudgeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeBackend {
    Simulated(SimulatedJudgeConfig),
    Remote(RemoteJudgeConfig),
}

/// A judged matrix plus bookkeeping for cache reuse and transport health.
#[derive(Debug)]
pub struct JudgeOutcome {
    pub matrix: VerdictMatrix,
    pub remote_calls: usize,
    pub cache_hits: usize,
    /// One warning per cell that fell back to invalid after retries.
    pub transport_warnings: Vec<String>,
}

impl JudgeOutcome {
    pub fn invalid_rate(&self) -> f64 {
        let cells = self.matrix.group_size * self.matrix.criteria_count();
        let invalid = self
            .matrix
            .verdicts
            .iter()
            .flatten()
            .filter(|v| v.value == VerdictValue::Invalid)
            .count();
        invalid as f64 / cells as f64
    }
}

fn apply_flip(mut verdict: Verdict, flip: bool) -> Verdict {
    if flip {
        verdict.value = match verdict.value {
            VerdictValue::Pass => VerdictValue::Fail,
            VerdictValue::Fail => VerdictValue::Pass,
            VerdictValue::Invalid => VerdictValue::Invalid,
        };
    }
    verdict
}

fn judge_group_simulated(
    task: &Task,
    rollouts: &[String],
    config: &SimulatedJudgeConfig,
) -> Result<JudgeOutcome> {
    config.validate()?;
    let verdicts = (0..rollouts.len())
        .map(|i| {
            task.criteria
                .iter()
                .map(|c| apply_flip(config.draw(&task.id, i, c), c.judge_flip))
                .collect()
        })
        .collect();
    Ok(JudgeOutcome {
        matrix: VerdictMatrix::new(task.id.clone(), verdicts)?,
        remote_calls: 0,
        cache_hits: 0,
        transport_warnings: Vec::new(),
    })
}

struct Cell {
    rollout: usize,
    criterion: usize,
    key: VerdictCacheKey,
}

fn judge_group_remote(
    task: &Task,
    rollouts: &[String],
    config: &RemoteJudgeConfig,
    transport: &dyn Transport,
    cache: &mut VerdictCache,
) -> Result<JudgeOutcome> {
    if config.variant == PromptVariant::PerCategory {
        return Err(Error::Config(
            "per_category judging yields category scores, not per-criterion verdicts; \
             reward judging keeps the per-criterion formulation"
                .into(),
        ));
    }
    let config_digest = config.digest();
    let cells: Vec<Cell> = (0..rollouts.len())
        .flat_map(|i| {
            (0..task.criteria.len()).map(move |j| (i, j))
        })
        .map(|(i, j)| Cell {
            rollout: i,
            criterion: j,
            key: VerdictCacheKey::new(
                &task.id,
                &rollouts[i],
                &task.criteria[j].id,
                &config_digest,
            ),
        })
        .collect();

    let results: Mutex<Vec<Option<Verdict>>> = Mutex::new(vec![None; cells.len()]);
    let warnings: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let remote_calls = AtomicUsize::new(0);
    let cache_hits = AtomicUsize::new(0);
    let cache = Mutex::new(cache);
    let next = AtomicUsize::new(0);
    let worker_count = config.parallelism.max(1).min(cells.len().max(1));

    let run_cell = |cell_index: usize| -> Result<()> {
        let cell = &cells[cell_index];
        let criterion = &task.criteria[cell.criterion];
        let cached = cache
            .lock()
            .expect("cache lock")
            .get(&cell.key)
            .cloned();
        let raw_verdict = match cached {
            Some(v) => {
                cache_hits.fetch_add(1, Ordering::SeqCst);
                v
            }
            None => {
                let rendered =
                    render_prompt(task, &rollouts[cell.rollout], criterion, config.variant)?;
                let request = ChatRequest {
                    model: config.model.clone(),
                    system: rendered,
                    user: rollouts[cell.rollout].clone(),
                    temperature: config.temperature,
                    max_tokens: config.max_tokens,
                    reasoning_effort: config.reasoning_effort.clone(),
                };
                remote_calls.fetch_add(1, Ordering::SeqCst);
                match call_with_retries(config, transport, &request) {
                    Ok(body) => {
                        let verdict = match parse_verdict(&body, config.variant) {
                            ParsedJudgment::Binary(v) => v,
                            ParsedJudgment::CategoryScore(_) => Verdict::invalid(),
                        };
                        cache
                            .lock()
                            .expect("cache lock")
                            .put(cell.key.clone(), verdict.clone())?;
                        verdict
                    }
                    Err(e) => {
                        warnings.lock().expect("warnings lock").push(format!(
                            "task {} rollout {} criterion {}: {e}",
                            task.id, cell.rollout, criterion.id
                        ));
                        // transport failures are not cached; a rerun retries them
                        Verdict::invalid()
                    }
                }
            }
        };
        let final_verdict = apply_flip(raw_verdict, criterion.judge_flip);
        results.lock().expect("results lock")[cell_index] = Some(final_verdict);
        Ok(())
    };

    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= cells.len() {
                    break;
                }
                if let Err(e) = run_cell(index) {
                    first_error.lock().expect("error lock").get_or_insert(e);
                    break;
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }

    let flat = results.into_inner().expect("results lock");
    let mut grid = vec![vec![Verdict::invalid(); task.criteria.len()]; rollouts.len()];
    for (cell, verdict) in cells.iter().zip(flat) {
        grid[cell.rollout][cell.criterion] =
            verdict.ok_or_else(|| Error::Internal("cell never judged".into()))?;
    }
    Ok(JudgeOutcome {
        matrix: VerdictMatrix::new(task.id.clone(), grid)?,
        remote_calls: remote_calls.into_inner(),
        cache_hits: cache_hits.into_inner(),
        transport_warnings: warnings.into_inner().expect("warnings lock"),
    })
}

/// Judges every (rollout, criterion) cell of one task's rollout group.
///
/// Flip-flagged criteria have pass/fail inverted after parsing. Remote
/// judging consults the cache first, retries transport failures, and maps
/// still-failing calls to invalid verdicts with a surfaced warning.
pub fn judge_group(
    task: &Task,
    rollouts: &[String],
    backend: &JudgeBackend,
    transport: Option<&dyn Transport>,
    cache: Option<&mut VerdictCache>,
) -> Result<JudgeOutcome> {
    if rollouts.is_empty() {
        return Err(Error::Validation(format!(
            "task {}: cannot judge an empty rollout group",
            task.id
        )));
    }
    match backend {
        JudgeBackend::Simulated(config) => judge_group_simulated(task, rollouts, config),
        JudgeBackend::Remote(config) => {
            let transport = transport.ok_or_else(|| {
                Error::Config("remote judging requires a transport".into())
            })?;
            let mut fallback;
            let cache = match cache {
                Some(c) => c,
                None => {
                    fallback = VerdictCache::in_memory();
                    &mut fallback
                }
            };
            judge_group_remote(task, rollouts, config, transport, cache)
        }
    }
}

/// Pairwise verdict agreement: 100 x matching valid pairs / valid pairs.
/// Pairs where either side is invalid are excluded; zero valid pairs is an
/// error rather than a number.
pub fn agreement(a: &[VerdictValue], b: &[VerdictValue]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "agreement needs equal-length verdict vectors, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut valid = 0usize;
    let mut matching = 0usize;
    for (x, y) in a.iter().zip(b) {
        if *x == VerdictValue::Invalid || *y == VerdictValue::Invalid {
            continue;
        }
        valid += 1;
        if x == y {
            matching += 1;
        }
    }
    if valid == 0 {
        return Err(Error::UndefinedAgreement);
    }
    Ok(100.0 * matching as f64 / valid as f64)
}
