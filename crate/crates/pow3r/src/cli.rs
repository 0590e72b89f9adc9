//! Command-line entry points.
//!
//! Configuration precedence is defaults < config file < command-line flags.
//! Every command writes its outputs plus one manifest into `--out`. Exit
//! codes: 0 success, 2 input validation, 3 transport, 4 internal invariant
//! violation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::aggregate::{group_report, ConstructionKind, RewardConstruction};
use crate::diagnostic::{build_pressure_report, emit_report};
use crate::error::{Error, Result};
use crate::factor::{FactorState, Pow3rConfig};
use crate::judge::cache::VerdictCache;
use crate::judge::remote::{HttpTransport, RemoteJudgeConfig, Transport};
use crate::judge::simulated::SimulatedJudgeConfig;
use crate::judge::{judge_group, JudgeBackend};
use crate::manifest::ManifestBuilder;
use crate::rubric::{
    self, convert_signed_task, load_responses, load_signed_tasks, load_tasks, load_verdicts,
    save_tasks, save_verdicts, Task, VerdictMatrix,
};
use crate::simulate::{factor_dispersion, load_initial_pass, run_one, RunConfig, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "pow3r", version, about = "Rubric reward aggregation toolkit")]
struct Cli {
    /// JSON config file mirroring the flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Flag-level overrides shared across subcommands. Anything unset falls back
/// to the config file, then to the built-in defaults.
#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta_ema: Option<f64>,
    #[arg(long)]
    min_valid_fraction: Option<f64>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    eval_group_size: Option<usize>,
    /// Comma-separated reward thresholds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker ceiling for parallel judging.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the remote bearer token.
    #[arg(long)]
    auth_env: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Simulated judge latent pass probability.
    #[arg(long)]
    sim_pass: Option<f64>,
    /// Simulated judge invalid probability.
    #[arg(long)]
    sim_invalid: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rubric-pressure diagnostic: tier/state shares, zero-signal pressure,
    /// spread pairs.
    Diagnose {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Per-task rewards, advantages, strict completion, and spread under one
    /// construction.
    Reward {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        /// binary | scalar | cat | dyn
        #[arg(long)]
        construction: String,
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Apply one factor epoch per judged group and save the updated store.
    UpdateFactors {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        /// Existing factor store to update; fresh store when omitted.
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Matched-seed surrogate training comparison across constructions.
    Simulate {
        #[arg(long)]
        tasks: PathBuf,
        /// Comma-separated constructions, e.g. cat,dyn.
        #[arg(long, value_delimiter = ',')]
        constructions: Vec<String>,
        /// Initial per-criterion pass probabilities (JSON; default 0.5).
        #[arg(long)]
        init_probs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Judge rollout responses into a verdicts file.
    Judge {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// sim | remote
        #[arg(long)]
        backend: String,
        /// Verdict cache file (remote backend).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Good-behavior conversion of a signed-rubric task file.
    Convert {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Config file mirroring the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    epsilon: Option<f64>,
    lambda: Option<f64>,
    beta_ema: Option<f64>,
    min_valid_fraction: Option<f64>,
    group_size: Option<usize>,
    steps: Option<u64>,
    eval_interval: Option<u64>,
    eval_group_size: Option<usize>,
    thresholds: Option<Vec<f64>>,
    seed: Option<u64>,
    jobs: Option<usize>,
    endpoint: Option<String>,
    model: Option<String>,
    auth_env: Option<String>,
    learning_rate: Option<f64>,
    sim_pass: Option<f64>,
    sim_invalid: Option<f64>,
    sim_overrides: Option<BTreeMap<String, crate::judge::simulated::CellProbability>>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::Config(format!("config file {}: {e}", p.display()))
                })
            }
        }
    }
}

struct Effective {
    pow3r: Pow3rConfig,
    run: RunConfig,
    seed: u64,
    jobs: Option<usize>,
    endpoint: Option<String>,
    model: Option<String>,
    auth_env: Option<String>,
    sim: SimulatedJudgeConfig,
}

fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Effective> {
    let defaults = Pow3rConfig::default();
    let pow3r = Pow3rConfig {
        alpha_min: flags
            .alpha_min
            .or(file.alpha_min)
            .unwrap_or(defaults.alpha_min),
        alpha_max: flags
            .alpha_max
            .or(file.alpha_max)
            .unwrap_or(defaults.alpha_max),
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        lambda: flags.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        beta_ema: flags
            .beta_ema
            .or(file.beta_ema)
            .unwrap_or(defaults.beta_ema),
        min_valid_fraction: flags
            .min_valid_fraction
            .or(file.min_valid_fraction)
            .unwrap_or(defaults.min_valid_fraction),
    };
    pow3r.validate()?;
    let run_defaults = RunConfig::default();
    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let run = RunConfig {
        steps: flags.steps.or(file.steps).unwrap_or(run_defaults.steps),
        group_size: flags
            .group_size
            .or(file.group_size)
            .unwrap_or(run_defaults.group_size),
        eval_interval: flags
            .eval_interval
            .or(file.eval_interval)
            .unwrap_or(run_defaults.eval_interval),
        eval_group_size: flags
            .eval_group_size
            .or(file.eval_group_size)
            .unwrap_or(run_defaults.eval_group_size),
        thresholds: flags
            .thresholds
            .clone()
            .or_else(|| file.thresholds.clone())
            .unwrap_or_default(),
        seed,
        learning_rate: flags
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(run_defaults.learning_rate),
        pow3r: pow3r.clone(),
    };
    let sim = SimulatedJudgeConfig {
        seed,
        default_pass: flags.sim_pass.or(file.sim_pass).unwrap_or(0.5),
        default_invalid: flags.sim_invalid.or(file.sim_invalid).unwrap_or(0.0),
        overrides: file.sim_overrides.clone().unwrap_or_default(),
    };
    Ok(Effective {
        pow3r,
        run,
        seed,
        jobs: flags.jobs.or(file.jobs),
        endpoint: flags.endpoint.clone().or_else(|| file.endpoint.clone()),
        model: flags.model.clone().or_else(|| file.model.clone()),
        auth_env: flags.auth_env.clone().or_else(|| file.auth_env.clone()),
        sim,
    })
}

fn effective_digest_json(command: &str, cfg: &Effective) -> String {
    json!({
        "command": command,
        "pow3r": cfg.pow3r,
        "run": cfg.run,
        "seed": cfg.seed,
        "jobs": cfg.jobs,
        "endpoint": cfg.endpoint,
        "model": cfg.model,
        "auth_env": cfg.auth_env,
        "sim": cfg.sim,
    })
    .to_string()
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn pair_by_task<'a>(
    tasks: &'a [Task],
    matrices: &'a [VerdictMatrix],
) -> Result<Vec<(&'a Task, &'a VerdictMatrix)>> {
    let by_id: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    matrices
        .iter()
        .map(|m| {
            let task = by_id.get(m.task_id.as_str()).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "verdicts reference task {} not present in the task file",
                    m.task_id
                ))
            })?;
            m.check_against(task)?;
            Ok((task, m))
        })
        .collect()
}

fn cmd_diagnose(
    tasks_path: &Path,
    verdicts_path: &Path,
    factors_path: Option<&Path>,
    out: &Path,
    cfg: &Effective,
) -> Result<()> {
    ensure_out_dir(out)?;
    let mut manifest = ManifestBuilder::new(
        "diagnose",
        &effective_digest_json("diagnose", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    manifest.record_input(verdicts_path)?;
    let tasks = load_tasks(tasks_path)?;
    let matrices = load_verdicts(verdicts_path)?;
    if matrices.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no verdict matrices",
            verdicts_path.display()
        )));
    }
    let factors = match factors_path {
        Some(p) => {
            manifest.record_input(p)?;
            Some(FactorState::load(p)?)
        }
        None => None,
    };
    let report = build_pressure_report(
        &matrices,
        &tasks,
        factors.as_ref(),
        cfg.pow3r.min_valid_fraction,
    )?;
    for file in emit_report(&report, out)? {
        manifest.record_output(file)?;
    }
    manifest.write(out)?;
    println!(
        "diagnose: {} matrices, zero-signal pressure static {:.4}{}",
        matrices.len(),
        report.zero_signal_pressure_static,
        report
            .zero_signal_pressure_dynamic
            .map(|d| format!(", dynamic {d:.4}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_reward(
    tasks_path: &Path,
    verdicts_path: &Path,
    construction: &str,
    factors_path: Option<&Path>,
    out: &Path,
    cfg: &Effective,
) -> Result<()> {
    ensure_out_dir(out)?;
    let kind = ConstructionKind::parse(construction)?;
    let mut manifest = ManifestBuilder::new(
        "reward",
        &effective_digest_json("reward", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    manifest.record_input(verdicts_path)?;
    let tasks = load_tasks(tasks_path)?;
    let matrices = load_verdicts(verdicts_path)?;
    let factors = match factors_path {
        Some(p) => {
            manifest.record_input(p)?;
            Some(FactorState::load(p)?)
        }
        None => None,
    };
    if kind == ConstructionKind::Pow3rDynamic && factors.is_none() {
        return Err(Error::Config(
            "construction dyn requires --factors".into(),
        ));
    }
    let mut reports = Vec::new();
    for (task, matrix) in pair_by_task(&tasks, &matrices)? {
        let construction = match kind {
            ConstructionKind::Binary => RewardConstruction::Binary,
            ConstructionKind::StaticScalar => RewardConstruction::StaticScalar,
            ConstructionKind::CategoryBalanced => RewardConstruction::CategoryBalanced,
            ConstructionKind::Pow3rDynamic => {
                RewardConstruction::Pow3rDynamic(factors.as_ref().expect("checked above"))
            }
        };
        reports.push(group_report(matrix, task, construction)?);
    }
    let rewards_path = out.join("rewards.jsonl");
    rubric::write_jsonl_file(&rewards_path, "pow3r.rewards.v1", &reports)?;
    manifest.record_output(&rewards_path)?;
    manifest.write(out)?;
    println!(
        "reward: {} groups under {}, mean spread {:.6}",
        reports.len(),
        kind.as_str(),
        reports.iter().map(|r| r.spread).sum::<f64>() / reports.len().max(1) as f64
    );
    Ok(())
}

fn cmd_update_factors(
    tasks_path: &Path,
    verdicts_path: &Path,
    factors_path: Option<&Path>,
    out: &Path,
    cfg: &Effective,
) -> Result<()> {
    ensure_out_dir(out)?;
    let mut manifest = ManifestBuilder::new(
        "update-factors",
        &effective_digest_json("update-factors", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    manifest.record_input(verdicts_path)?;
    let tasks = load_tasks(tasks_path)?;
    let matrices = load_verdicts(verdicts_path)?;
    let mut factors = match factors_path {
        Some(p) => {
            manifest.record_input(p)?;
            FactorState::load(p)?
        }
        None => FactorState::new(),
    };
    let mut updated = 0usize;
    for (task, matrix) in pair_by_task(&tasks, &matrices)? {
        factors.epoch_update(matrix, task, &cfg.pow3r)?;
        updated += 1;
    }
    let store_path = out.join("factors.json");
    factors.save(&store_path)?;
    manifest.record_output(&store_path)?;
    manifest.write(out)?;
    println!("update-factors: applied one epoch for {updated} groups -> {}", store_path.display());
    Ok(())
}

fn fmt_crossing(step: Option<u64>) -> String {
    step.map(|s| s.to_string()).unwrap_or_else(|| "--".into())
}

fn write_threshold_table(
    out: &Path,
    trajectories: &[Trajectory],
) -> Result<PathBuf> {
    let mut csv = String::from("threshold");
    for t in trajectories {
        csv.push_str(&format!(",{}", t.construction.as_str()));
    }
    let dyn_present = trajectories
        .iter()
        .any(|t| t.construction == ConstructionKind::Pow3rDynamic);
    let with_speedup = dyn_present && trajectories.len() > 1;
    if with_speedup {
        csv.push_str(",speedup");
    }
    csv.push('\n');
    let n_thresholds = trajectories
        .first()
        .map(|t| t.steps_to_threshold.len())
        .unwrap_or(0);
    for i in 0..n_thresholds {
        let threshold = trajectories[0].steps_to_threshold[i].threshold;
        csv.push_str(&format!("{threshold}"));
        for t in trajectories {
            csv.push_str(&format!(",{}", fmt_crossing(t.steps_to_threshold[i].step)));
        }
        if with_speedup {
            let dyn_step = trajectories
                .iter()
                .find(|t| t.construction == ConstructionKind::Pow3rDynamic)
                .and_then(|t| t.steps_to_threshold[i].step);
            let best_other = trajectories
                .iter()
                .filter(|t| t.construction != ConstructionKind::Pow3rDynamic)
                .filter_map(|t| t.steps_to_threshold[i].step)
                .min();
            let speedup = match (dyn_step, best_other) {
                (Some(d), Some(o)) if d > 0 => format!("{:.1}x", o as f64 / d as f64),
                (Some(0), Some(_)) => "--".into(),
                _ => "--".into(),
            };
            csv.push_str(&format!(",{speedup}"));
        }
        csv.push('\n');
    }
    let path = out.join("steps_to_threshold.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_trajectory_csv(out: &Path, trajectory: &Trajectory) -> Result<PathBuf> {
    let categories: Vec<&String> = trajectory
        .checkpoints
        .first()
        .map(|c| c.per_category.keys().collect())
        .unwrap_or_default();
    let mut csv = String::from("step,mean_reward,strict_rate");
    for cat in &categories {
        csv.push_str(&format!(",{cat}"));
    }
    csv.push('\n');
    for cp in &trajectory.checkpoints {
        csv.push_str(&format!(
            "{},{:.9},{:.9}",
            cp.step, cp.mean_reward, cp.strict_rate
        ));
        for cat in &categories {
            csv.push_str(&format!(",{:.9}", cp.per_category[*cat]));
        }
        csv.push('\n');
    }
    let path = out.join(format!(
        "trajectory_{}.csv",
        trajectory.construction.as_str()
    ));
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn cmd_simulate(
    tasks_path: &Path,
    constructions: &[String],
    init_probs: Option<&Path>,
    out: &Path,
    cfg: &Effective,
) -> Result<()> {
    ensure_out_dir(out)?;
    if constructions.is_empty() {
        return Err(Error::Config("at least one construction required".into()));
    }
    let kinds: Vec<ConstructionKind> = constructions
        .iter()
        .map(|s| ConstructionKind::parse(s))
        .collect::<Result<_>>()?;
    let mut manifest = ManifestBuilder::new(
        "simulate",
        &effective_digest_json("simulate", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    let tasks = load_tasks(tasks_path)?;
    let initial_pass = match init_probs {
        Some(p) => {
            manifest.record_input(p)?;
            load_initial_pass(p)?
        }
        None => BTreeMap::new(),
    };
    let mut trajectories = Vec::new();
    for &kind in &kinds {
        let (trajectory, factors) = run_one(&tasks, kind, &cfg.run, &initial_pass)?;
        let path = write_trajectory_csv(out, &trajectory)?;
        manifest.record_output(&path)?;
        if kind == ConstructionKind::Pow3rDynamic {
            let dispersion = factor_dispersion(&factors, &tasks);
            let mut csv = String::from("category,mean_variance,alpha_std,criteria\n");
            for (category, d) in &dispersion {
                csv.push_str(&format!(
                    "{category},{:.9},{:.9},{}\n",
                    d.mean_variance, d.alpha_std, d.criteria
                ));
            }
            let path = out.join("factor_dispersion.csv");
            fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            manifest.record_output(&path)?;
        }
        trajectories.push(trajectory);
    }
    let json_path = out.join("trajectories.json");
    let mut body = serde_json::to_string_pretty(&trajectories)
        .map_err(|e| Error::Internal(e.to_string()))?;
    body.push('\n');
    fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))?;
    manifest.record_output(&json_path)?;
    if !cfg.run.thresholds.is_empty() {
        let table = write_threshold_table(out, &trajectories)?;
        manifest.record_output(&table)?;
    }
    manifest.write(out)?;
    for t in &trajectories {
        let last = t.checkpoints.last().expect("at least checkpoint 0");
        println!(
            "simulate[{}]: {} checkpoints, final reward {:.4}, strict {:.4}",
            t.construction.as_str(),
            t.checkpoints.len(),
            last.mean_reward,
            last.strict_rate
        );
    }
    Ok(())
}

fn cmd_judge(
    tasks_path: &Path,
    responses_path: &Path,
    backend_name: &str,
    cache_path: Option<&Path>,
    out: &Path,
    cfg: &Effective,
) -> Result<()> {
    ensure_out_dir(out)?;
    let mut manifest = ManifestBuilder::new(
        "judge",
        &effective_digest_json("judge", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    manifest.record_input(responses_path)?;
    let tasks = load_tasks(tasks_path)?;
    let groups = load_responses(responses_path)?;
    let by_id: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();

    let backend = match backend_name {
        "sim" => {
            cfg.sim.validate()?;
            JudgeBackend::Simulated(cfg.sim.clone())
        }
        "remote" => {
            let endpoint = cfg.endpoint.clone().ok_or_else(|| {
                Error::Config("remote backend requires --endpoint".into())
            })?;
            let model = cfg
                .model
                .clone()
                .ok_or_else(|| Error::Config("remote backend requires --model".into()))?;
            JudgeBackend::Remote(RemoteJudgeConfig {
                endpoint,
                model,
                parallelism: cfg.jobs.unwrap_or(4),
                auth_env: cfg.auth_env.clone(),
                ..Default::default()
            })
        }
        other => {
            return Err(Error::Config(format!(
                "unknown backend {other}; expected sim|remote"
            )))
        }
    };

    let transport: Option<Box<dyn Transport>> = match &backend {
        JudgeBackend::Remote(config) => Some(Box::new(
            HttpTransport::from_config(config).map_err(Error::Transport)?,
        )),
        JudgeBackend::Simulated(_) => None,
    };
    let mut cache = match cache_path {
        Some(p) => Some(VerdictCache::open(p)?),
        None => None,
    };

    let mut matrices = Vec::new();
    let mut summaries = Vec::new();
    let mut total_warnings = 0usize;
    for group in &groups {
        let task = by_id.get(group.task_id.as_str()).copied().ok_or_else(|| {
            Error::Validation(format!(
                "responses reference task {} not present in the task file",
                group.task_id
            ))
        })?;
        if task.image_ref.is_some() && matches!(backend, JudgeBackend::Remote(_)) {
            eprintln!(
                "warning: task {}: image_ref is not transmitted to the remote judge",
                task.id
            );
        }
        let outcome = judge_group(
            task,
            &group.rollouts,
            &backend,
            transport.as_deref(),
            cache.as_mut(),
        )?;
        for warning in &outcome.transport_warnings {
            eprintln!("warning: {warning}");
        }
        total_warnings += outcome.transport_warnings.len();
        summaries.push(json!({
            "task_id": task.id,
            "invalid_rate": outcome.invalid_rate(),
            "remote_calls": outcome.remote_calls,
            "cache_hits": outcome.cache_hits,
            "transport_failures": outcome.transport_warnings.len(),
        }));
        matrices.push(outcome.matrix);
    }
    let verdicts_path = out.join("verdicts.jsonl");
    save_verdicts(&verdicts_path, &matrices)?;
    manifest.record_output(&verdicts_path)?;
    let summary_path = out.join("judge_summary.json");
    let mut body = serde_json::to_string_pretty(&json!({ "groups": summaries }))
        .map_err(|e| Error::Internal(e.to_string()))?;
    body.push('\n');
    fs::write(&summary_path, body).map_err(|e| Error::io(&summary_path, e))?;
    manifest.record_output(&summary_path)?;
    if let Some(p) = cache_path {
        manifest.record_output(p)?;
    }
    manifest.write(out)?;
    println!(
        "judge: {} groups -> {} ({} transport warnings)",
        matrices.len(),
        verdicts_path.display(),
        total_warnings
    );
    Ok(())
}

fn cmd_convert(tasks_path: &Path, out: &Path, cfg: &Effective) -> Result<()> {
    ensure_out_dir(out)?;
    let mut manifest = ManifestBuilder::new(
        "convert",
        &effective_digest_json("convert", cfg),
        Some(cfg.seed),
    );
    manifest.record_input(tasks_path)?;
    let signed = load_signed_tasks(tasks_path)?;
    let converted: Vec<Task> = signed
        .iter()
        .map(convert_signed_task)
        .collect::<Result<_>>()?;
    let out_path = out.join("tasks.jsonl");
    save_tasks(&out_path, &converted)?;
    manifest.record_output(&out_path)?;
    manifest.write(out)?;
    let flipped: usize = converted
        .iter()
        .flat_map(|t| &t.criteria)
        .filter(|c| c.judge_flip)
        .count();
    println!(
        "convert: {} tasks, {flipped} criteria rewritten to avoidance form -> {}",
        converted.len(),
        out_path.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Diagnose {
            tasks,
            verdicts,
            factors,
            out,
            overrides,
        } => {
            let cfg = resolve(&file, overrides)?;
            cmd_diagnose(tasks, verdicts, factors.as_deref(), out, &cfg)
        }
        Command::Reward {
            tasks,
            verdicts,
            construction,
            factors,
            out,
            overrides,
        } => {
            let cfg = resolve(&file, overrides)?;
            cmd_reward(tasks, verdicts, construction, factors.as_deref(), out, &cfg)
        }
        Command::UpdateFactors {
            tasks,
            verdicts,
            factors,
            out,
            overrides,
        } => {
            let cfg = resolve(&file, overrides)?;
            cmd_update_factors(tasks, verdicts, factors.as_deref(), out, &cfg)
        }
        Command::Simulate {
            tasks,
            constructions,
            init_probs,
            out,
            overrides,
        } => {
            let cfg = resolve(&file, overrides)?;
            cmd_simulate(tasks, constructions, init_probs.as_deref(), out, &cfg)
        }
        Command::Judge {
            tasks,
            responses,
            backend,
            cache,
            out,
            overrides,
        } => {
            let cfg = resolve(&file, overrides)?;
            cmd_judge(tasks, responses, backend, cache.as_deref(), out, &cfg)
        }
        Command::Convert { tasks, out, overrides } => {
            let cfg = resolve(&file, overrides)?;
            cmd_convert(tasks, out, &cfg)
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
