//! `cpe` — causal pure-exploration workbench.
//!
//! Subcommands: `gen` (instance to JSON), `predict` (analytics report),
//! `run` (Monte Carlo batch to CSV/JSONL), `tune` (grid search), and
//! `replay` (regenerate one trial). Exit codes: 0 success, 2 configuration
//! error, 3 runtime error.

use clap::{Args, Parser, Subcommand};

use cpe_harness::instances::generate_instance;
use cpe_harness::model_json::{load_instance, save_instance, Instance};
use cpe_harness::predict::predict;
use cpe_harness::runner::{
    replay_trial, run_experiment, write_outputs, ExperimentConfig, ModeSpec,
};
use cpe_harness::tune::{grid_search, tune_table_csv};
use cpe_harness::HarnessError;

#[derive(Parser)]
#[command(
    name = "cpe",
    about = "Causal pure exploration: instances, predictions, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Load a previously generated instance file.
    #[arg(long, conflicts_with_all = ["kind", "params"])]
    instance: Option<String>,
    /// Instance family (parallel, experiment1..3, two_layer, collaborative,
    /// causal_tree, lower_bound_xi).
    #[arg(long)]
    kind: Option<String>,
    /// Family parameters as a JSON object.
    #[arg(long, default_value = "{}")]
    params: String,
    /// Structure seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance, HarnessError> {
        match (&self.instance, &self.kind) {
            (Some(path), _) => load_instance(path),
            (None, Some(kind)) => {
                let params: serde_json::Value = serde_json::from_str(&self.params)
                    .map_err(|e| HarnessError::config(format!("bad --params: {e}")))?;
                generate_instance(kind, &params, self.seed)
            }
            (None, None) => Err(HarnessError::config("need --instance or --kind")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as JSON.
    Gen {
        #[command(flatten)]
        source: InstanceArgs,
        /// Output file.
        #[arg(long)]
        out: String,
    },
    /// Analytics report: thresholds, hardness sums, predictors.
    Predict {
        #[command(flatten)]
        source: InstanceArgs,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a batch experiment from a config file.
    Run {
        #[arg(long)]
        config: String,
        /// Output directory for aggregate.csv and trials.jsonl.
        #[arg(long)]
        out: String,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the mode (fixed_confidence, budget_censored,
        /// fixed_budget); budgets come from --budgets.
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated budget list for the overridden mode.
        #[arg(long)]
        budgets: Option<String>,
    },
    /// Grid-search exploration scales for the first configured algorithm.
    Tune {
        #[arg(long)]
        config: String,
        /// Output directory for tune.csv and best.json.
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Regenerate one trial record from a config.
    Replay {
        #[arg(long)]
        config: String,
        /// Algorithm index within the config (default 0).
        #[arg(long, default_value_t = 0)]
        algo: usize,
        /// Budget parameter for budget modes.
        #[arg(long)]
        param: Option<u64>,
        #[arg(long)]
        trial: u64,
    },
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    trials: Option<u64>,
    seed: Option<u64>,
    mode: Option<String>,
    budgets: Option<String>,
) -> Result<(), HarnessError> {
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(s) = seed {
        config.master_seed = s;
    }
    if let Some(m) = mode {
        let budgets: Vec<u64> = match &budgets {
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| HarnessError::config(format!("bad --budgets entry: {e}")))
                })
                .collect::<Result<_, _>>()?,
            None => match &config.mode {
                ModeSpec::BudgetCensored { budgets } | ModeSpec::FixedBudget { budgets } => {
                    budgets.clone()
                }
                ModeSpec::FixedConfidence => Vec::new(),
            },
        };
        config.mode = match m.as_str() {
            "fixed_confidence" => ModeSpec::FixedConfidence,
            "budget_censored" => ModeSpec::BudgetCensored { budgets },
            "fixed_budget" => ModeSpec::FixedBudget { budgets },
            other => return Err(HarnessError::config(format!("unknown mode '{other}'"))),
        };
    }
    config.validate()
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Gen { source, out } => {
            let instance = source.load()?;
            save_instance(&instance, &out)?;
            eprintln!(
                "wrote {} ({} actions, {} nodes)",
                out,
                instance.actions.len(),
                instance.model.graph().n()
            );
            Ok(())
        }
        Command::Predict {
            source,
            epsilon,
            delta,
            out,
        } => {
            let instance = source.load()?;
            let report = predict(&instance, epsilon, delta)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| HarnessError::runtime(format!("serialize: {e}")))?;
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| HarnessError::runtime(format!("write '{path}': {e}")))?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Run {
            config,
            out,
            jobs,
            trials,
            seed,
            mode,
            budgets,
        } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            apply_overrides(&mut config, trials, seed, mode, budgets)?;
            let output = run_experiment(&config, jobs)?;
            write_outputs(&output, &out)?;
            for row in &output.rows {
                println!("{}", row.to_csv_line());
            }
            Ok(())
        }
        Command::Tune { config, out, jobs } => {
            let config = ExperimentConfig::from_file(&config)?;
            let output = grid_search(&config, jobs)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| HarnessError::runtime(format!("mkdir '{out}': {e}")))?;
            let table_path = format!("{out}/tune.csv");
            std::fs::write(&table_path, tune_table_csv(&output))
                .map_err(|e| HarnessError::runtime(format!("write '{table_path}': {e}")))?;
            let best_path = format!("{out}/best.json");
            let best = serde_json::to_string_pretty(&output.best)
                .map_err(|e| HarnessError::runtime(format!("serialize: {e}")))?;
            std::fs::write(&best_path, &best)
                .map_err(|e| HarnessError::runtime(format!("write '{best_path}': {e}")))?;
            println!("{best}");
            Ok(())
        }
        Command::Replay {
            config,
            algo,
            param,
            trial,
        } => {
            let config = ExperimentConfig::from_file(&config)?;
            let instance = config.load_instance()?;
            let gaps = instance
                .model
                .gaps(&instance.actions, 0.0)
                .map_err(|e| HarnessError::runtime(format!("exact means: {e}")))?;
            let param = match (&config.mode, param) {
                (ModeSpec::FixedConfidence, _) => None,
                (_, Some(t)) => Some(t),
                (ModeSpec::BudgetCensored { budgets }, None)
                | (ModeSpec::FixedBudget { budgets }, None) => Some(budgets[0]),
            };
            let row = replay_trial(&config, &instance, &gaps, algo, param, trial)?;
            let text = serde_json::to_string(&row)
                .map_err(|e| HarnessError::runtime(format!("serialize: {e}")))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
