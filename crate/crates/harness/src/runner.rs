//! Batch Monte Carlo execution: deterministic per-trial seeding, optional
//! worker threads, exact aggregation, and stable CSV/JSONL emission.
//!
//! Per-trial seeds derive from `(master_seed, trial_index)` only, so every
//! algorithm and budget sees the same environment randomness for a given
//! trial index (paired seeds), results never depend on `--jobs`, and any
//! record can be regenerated from the config plus its coordinates.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cpe_core::explore::{
    causal_successive_reject, ccpe_bglm, ccpe_general, lil_ucb_heuristic, lucb, AlgoConfig,
    ScmEnvironment, StopReason, TrialRecord, ROUND_CAP_DEFAULT,
};
use cpe_core::rng::derive_seed;
use cpe_core::scm::{GapReport, ScmModel};

use crate::instances::generate_instance;
use crate::model_json::{load_instance, Instance};
use crate::HarnessError;

fn cfg(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub const CSV_HEADER: &str =
    "algorithm,mode,param,trials,error_prob,mean_rounds,median_rounds,std_rounds,flags";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InstanceSource {
    File {
        file: String,
    },
    Spec {
        kind: String,
        #[serde(default)]
        params: Value,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlgorithmSpec {
    pub name: String,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_i: Option<f64>,
    #[serde(default)]
    pub theory_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_refresh_period: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeSpec {
    FixedConfidence,
    BudgetCensored { budgets: Vec<u64> },
    FixedBudget { budgets: Vec<u64> },
}

impl ModeSpec {
    fn name(&self) -> &'static str {
        match self {
            ModeSpec::FixedConfidence => "fixed_confidence",
            ModeSpec::BudgetCensored { .. } => "budget_censored",
            ModeSpec::FixedBudget { .. } => "fixed_budget",
        }
    }

    /// One parameter cell per run: `None` for fixed confidence, else the
    /// budget values.
    fn params(&self) -> Vec<Option<u64>> {
        match self {
            ModeSpec::FixedConfidence => vec![None],
            ModeSpec::BudgetCensored { budgets } | ModeSpec::FixedBudget { budgets } => {
                budgets.iter().map(|&t| Some(t)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub alpha_o: Vec<f64>,
    pub alpha_i: Vec<f64>,
    #[serde(default = "default_pilot_trials")]
    pub pilot_trials: u64,
}

fn default_pilot_trials() -> u64 {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: u64,
    pub master_seed: u64,
    pub mode: ModeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl ExperimentConfig {
    pub fn from_file(path: &str) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read '{path}': {e}")))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| cfg(format!("cannot parse '{path}': {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(cfg("trials must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(cfg("at least one algorithm required"));
        }
        match &self.mode {
            ModeSpec::BudgetCensored { budgets } | ModeSpec::FixedBudget { budgets } => {
                if budgets.is_empty() {
                    return Err(cfg("budget list cannot be empty"));
                }
                if budgets.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(cfg("budgets must be strictly ascending"));
                }
            }
            ModeSpec::FixedConfidence => {}
        }
        for spec in &self.algorithms {
            let known = matches!(
                spec.name.as_str(),
                "ccpe_bglm"
                    | "ccpe_general"
                    | "lucb"
                    | "lil_ucb_heuristic"
                    | "causal_successive_reject"
            );
            if !known {
                return Err(cfg(format!("unknown algorithm '{}'", spec.name)));
            }
            let fixed_budget_algo = spec.name == "causal_successive_reject";
            match &self.mode {
                ModeSpec::FixedBudget { .. } if !fixed_budget_algo => {
                    return Err(cfg(format!(
                        "'{}' is fixed-confidence; use mode budget_censored for it",
                        spec.name
                    )));
                }
                ModeSpec::FixedConfidence | ModeSpec::BudgetCensored { .. }
                    if fixed_budget_algo =>
                {
                    return Err(cfg(
                        "causal_successive_reject requires mode fixed_budget".to_string()
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn load_instance(&self) -> Result<Instance, HarnessError> {
        match &self.instance {
            InstanceSource::File { file } => load_instance(file),
            InstanceSource::Spec { kind, params, seed } => generate_instance(kind, params, *seed),
        }
    }
}

/// One per-trial record as persisted to JSONL.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialRow {
    pub algorithm: String,
    pub mode: String,
    pub param: String,
    pub trial: u64,
    pub seed: u64,
    pub chosen: Option<usize>,
    pub rounds: u64,
    pub observations: u64,
    pub pulls: Vec<u64>,
    pub stop_reason: String,
    pub empty_merges: u64,
    pub err: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: String,
    pub mode: String,
    pub param: String,
    pub trials: u64,
    pub error_prob: f64,
    pub mean_rounds: f64,
    pub median_rounds: f64,
    pub std_rounds: f64,
    pub flags: String,
}

impl AggregateRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.3},{:.1},{:.3},{}",
            self.algorithm,
            self.mode,
            self.param,
            self.trials,
            self.error_prob,
            self.mean_rounds,
            self.median_rounds,
            self.std_rounds,
            self.flags
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<AggregateRow>,
    pub trials: Vec<TrialRow>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    pub fn jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t).expect("trial row serializes"));
            out.push('\n');
        }
        out
    }
}

fn param_label(spec: &AlgorithmSpec, param: Option<u64>) -> String {
    match param {
        Some(t) => format!("{t}"),
        None => format!("eps={};delta={}", spec.epsilon, spec.delta),
    }
}

fn algo_config(
    spec: &AlgorithmSpec,
    param: Option<u64>,
    mode: &ModeSpec,
    round_cap: Option<u64>,
    instance: &Instance,
) -> Result<AlgoConfig, HarnessError> {
    let mut config = AlgoConfig::new(spec.epsilon, spec.delta)
        .map_err(|e| cfg(format!("algorithm '{}': {e}", spec.name)))?;
    config.alpha_o = spec.alpha_o;
    config.alpha_i = spec.alpha_i;
    config.theory_mode = spec.theory_mode;
    if let Some(c) = spec.theory_c {
        config.theory_c = c;
    }
    if let Some(p) = spec.obs_refresh_period {
        config.obs_refresh_period = p;
    }
    config.round_cap = round_cap.unwrap_or(ROUND_CAP_DEFAULT);
    match mode {
        ModeSpec::BudgetCensored { .. } => config.censor_at = param,
        ModeSpec::FixedBudget { .. } => config.budget = param,
        ModeSpec::FixedConfidence => {}
    }
    if let ScmModel::Bglm(b) = &instance.model {
        config.constants = Some(*b.constants());
    }
    config
        .validate()
        .map_err(|e| cfg(format!("algorithm '{}': {e}", spec.name)))?;
    Ok(config)
}

fn run_one_trial(
    instance: &Instance,
    spec: &AlgorithmSpec,
    config: &AlgoConfig,
    seed: u64,
) -> Result<TrialRecord, String> {
    let model = &instance.model;
    let graph = model.graph();
    let mut env = ScmEnvironment::new(model, seed);
    let result = match spec.name.as_str() {
        "ccpe_bglm" => {
            let links = match model {
                ScmModel::Bglm(b) => b.links().to_vec(),
                ScmModel::Tabular(_) => {
                    return Err("ccpe_bglm requires a BGLM instance".to_string())
                }
            };
            ccpe_bglm(&mut env, graph, &links, &instance.actions, config)
        }
        "ccpe_general" => ccpe_general(
            &mut env,
            graph,
            &instance.actions,
            &instance.sequences,
            config,
        ),
        "lucb" => lucb(&mut env, &instance.actions, config),
        "lil_ucb_heuristic" => lil_ucb_heuristic(&mut env, &instance.actions, config),
        "causal_successive_reject" => causal_successive_reject(
            &mut env,
            graph,
            &instance.actions,
            &instance.sequences,
            config,
        ),
        other => return Err(format!("unknown algorithm '{other}'")),
    };
    result.map_err(|e| format!("{e}"))
}

/// Replay a single trial exactly as `run_experiment` would execute it.
pub fn replay_trial(
    config: &ExperimentConfig,
    instance: &Instance,
    gaps: &GapReport,
    algo_index: usize,
    param: Option<u64>,
    trial: u64,
) -> Result<TrialRow, HarnessError> {
    let spec = config
        .algorithms
        .get(algo_index)
        .ok_or_else(|| cfg(format!("no algorithm at index {algo_index}")))?;
    let algo_cfg = algo_config(spec, param, &config.mode, config.round_cap, instance)?;
    let seed = derive_seed(config.master_seed, trial);
    let row = match run_one_trial(instance, spec, &algo_cfg, seed) {
        Ok(record) => trial_row(config, spec, gaps, param, trial, seed, Ok(record)),
        Err(failure) => trial_row(config, spec, gaps, param, trial, seed, Err(failure)),
    };
    Ok(row)
}

fn trial_row(
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
    gaps: &GapReport,
    param: Option<u64>,
    trial: u64,
    seed: u64,
    outcome: Result<TrialRecord, String>,
) -> TrialRow {
    let mode = config.mode.name().to_string();
    let label = param_label(spec, param);
    match outcome {
        Ok(record) => {
            let err = gaps.mu[gaps.best] - gaps.mu[record.chosen] > spec.epsilon + 1e-12;
            TrialRow {
                algorithm: spec.name.clone(),
                mode,
                param: label,
                trial,
                seed,
                chosen: Some(record.chosen),
                rounds: record.rounds,
                observations: record.observations,
                pulls: record.pulls,
                stop_reason: match record.stop_reason {
                    StopReason::Confidence => "confidence",
                    StopReason::Budget => "budget",
                    StopReason::RoundCap => "round_cap",
                }
                .to_string(),
                empty_merges: record.empty_merge_events,
                err,
                failure: None,
            }
        }
        Err(failure) => TrialRow {
            algorithm: spec.name.clone(),
            mode,
            param: label,
            trial,
            seed,
            chosen: None,
            rounds: 0,
            observations: 0,
            pulls: Vec::new(),
            stop_reason: "failure".to_string(),
            empty_merges: 0,
            err: true,
            failure: Some(failure),
        },
    }
}

/// Execute every (algorithm, parameter, trial) cell of the config.
///
/// `jobs` worker threads split trials; output ordering and bytes are
/// independent of the level of parallelism.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let instance = config.load_instance()?;
    let gaps = instance
        .model
        .gaps(&instance.actions, 0.0)
        .map_err(|e| HarnessError::runtime(format!("exact means: {e}")))?;

    // Work units: (algo index, param, trial).
    let mut cells: Vec<(usize, Option<u64>)> = Vec::new();
    for (ai, _) in config.algorithms.iter().enumerate() {
        for param in config.mode.params() {
            cells.push((ai, param));
        }
    }
    let mut units: Vec<(usize, Option<u64>, u64)> = Vec::new();
    for &(ai, param) in &cells {
        for trial in 0..config.trials {
            units.push((ai, param, trial));
        }
    }

    // Per-unit configs precomputed (validation up front).
    let mut configs = Vec::with_capacity(cells.len());
    for &(ai, param) in &cells {
        configs.push(algo_config(
            &config.algorithms[ai],
            param,
            &config.mode,
            config.round_cap,
            &instance,
        )?);
    }
    let config_of = |ai: usize, param: Option<u64>| -> &AlgoConfig {
        let idx = cells
            .iter()
            .position(|&(a, p)| a == ai && p == param)
            .unwrap();
        &configs[idx]
    };

    let results: Mutex<Vec<Option<TrialRow>>> = Mutex::new(vec![None; units.len()]);
    let cursor = AtomicUsize::new(0);
    let workers = jobs.max(1).min(units.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= units.len() {
                    break;
                }
                let (ai, param, trial) = units[i];
                let spec = &config.algorithms[ai];
                let algo_cfg = config_of(ai, param);
                let seed = derive_seed(config.master_seed, trial);
                let outcome = run_one_trial(&instance, spec, algo_cfg, seed);
                let row = trial_row(config, spec, &gaps, param, trial, seed, outcome);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let trials: Vec<TrialRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled"))
        .collect();

    // Aggregate per cell, preserving cell order.
    let mut rows = Vec::with_capacity(cells.len());
    for (ci, &(ai, param)) in cells.iter().enumerate() {
        let spec = &config.algorithms[ai];
        let slice = &trials[ci * config.trials as usize..(ci + 1) * config.trials as usize];
        let n = slice.len() as f64;
        let err_count = slice.iter().filter(|t| t.err).count();
        let mut rounds: Vec<f64> = slice.iter().map(|t| t.rounds as f64).collect();
        rounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = rounds.iter().sum::<f64>() / n;
        let median = if rounds.is_empty() {
            0.0
        } else if rounds.len() % 2 == 1 {
            rounds[rounds.len() / 2]
        } else {
            0.5 * (rounds[rounds.len() / 2 - 1] + rounds[rounds.len() / 2])
        };
        let var = rounds.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let caps = slice
            .iter()
            .filter(|t| t.stop_reason == "round_cap")
            .count();
        let merges: u64 = slice.iter().map(|t| t.empty_merges).sum();
        let failures = slice.iter().filter(|t| t.failure.is_some()).count();
        rows.push(AggregateRow {
            algorithm: spec.name.clone(),
            mode: config.mode.name().to_string(),
            param: param_label(spec, param),
            trials: config.trials,
            error_prob: err_count as f64 / n,
            mean_rounds: mean,
            median_rounds: median,
            std_rounds: var.sqrt(),
            flags: format!("cap={caps};empty_merge={merges};fail={failures}"),
        });
    }
    Ok(RunOutput { rows, trials })
}

/// Write `aggregate.csv` and `trials.jsonl` under `out_dir`.
pub fn write_outputs(output: &RunOutput, out_dir: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| HarnessError::runtime(format!("mkdir '{out_dir}': {e}")))?;
    let csv_path = format!("{out_dir}/aggregate.csv");
    std::fs::write(&csv_path, output.csv())
        .map_err(|e| HarnessError::runtime(format!("write '{csv_path}': {e}")))?;
    let jsonl_path = format!("{out_dir}/trials.jsonl");
    std::fs::write(&jsonl_path, output.jsonl())
        .map_err(|e| HarnessError::runtime(format!("write '{jsonl_path}': {e}")))?;
    Ok(())
}
