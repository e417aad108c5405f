//! Grid search over the exploration scales `alpha_o x alpha_i` for the
//! first configured algorithm, at a pilot trial count. Ties resolve to the
//! smaller `alpha_o`, then the smaller `alpha_i`.

use crate::runner::{run_experiment, AlgorithmSpec, ExperimentConfig, GridSpec};
use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct TuneCell {
    pub alpha_o: f64,
    pub alpha_i: f64,
    pub error_prob: f64,
    pub mean_rounds: f64,
}

#[derive(Debug, Clone)]
pub struct TuneOutput {
    pub best: AlgorithmSpec,
    pub table: Vec<TuneCell>,
}

/// The default tuning grid `{0.05, 0.1, ..., 1.0}`.
pub fn default_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

pub fn grid_search(config: &ExperimentConfig, jobs: usize) -> Result<TuneOutput, HarnessError> {
    config.validate()?;
    let grid = config.grid.clone().unwrap_or(GridSpec {
        alpha_o: default_grid(),
        alpha_i: default_grid(),
        pilot_trials: 20,
    });
    if grid.alpha_o.is_empty() || grid.alpha_i.is_empty() {
        return Err(HarnessError::config("tuning grid cannot be empty"));
    }
    let spec = config.algorithms[0].clone();
    // Baselines ignore alpha_o; collapse that axis so cells stay meaningful.
    let uses_alpha_o = matches!(
        spec.name.as_str(),
        "ccpe_bglm" | "ccpe_general" | "causal_successive_reject"
    );
    let alpha_o_grid: Vec<f64> = if uses_alpha_o {
        grid.alpha_o.clone()
    } else {
        vec![spec.alpha_o.unwrap_or(1.0)]
    };

    let mut table = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None; // (error, alpha_o, alpha_i)
    for &ao in &alpha_o_grid {
        for &ai in &grid.alpha_i {
            let mut pilot = config.clone();
            pilot.trials = grid.pilot_trials;
            pilot.algorithms = vec![AlgorithmSpec {
                alpha_o: Some(ao),
                alpha_i: Some(ai),
                ..spec.clone()
            }];
            pilot.grid = None;
            let output = run_experiment(&pilot, jobs)?;
            // Average error across the mode's parameter cells.
            let error_prob =
                output.rows.iter().map(|r| r.error_prob).sum::<f64>() / output.rows.len() as f64;
            let mean_rounds =
                output.rows.iter().map(|r| r.mean_rounds).sum::<f64>() / output.rows.len() as f64;
            table.push(TuneCell {
                alpha_o: ao,
                alpha_i: ai,
                error_prob,
                mean_rounds,
            });
            let better = match best {
                None => true,
                Some((e, bo, bi)) => {
                    error_prob < e || (error_prob == e && (ao < bo || (ao == bo && ai < bi)))
                }
            };
            if better {
                best = Some((error_prob, ao, ai));
            }
        }
    }
    let (_, ao, ai) = best.expect("non-empty grid");
    let best_spec = AlgorithmSpec {
        alpha_o: Some(ao),
        alpha_i: Some(ai),
        ..spec
    };
    Ok(TuneOutput {
        best: best_spec,
        table,
    })
}

pub fn tune_table_csv(output: &TuneOutput) -> String {
    let mut out = String::from("alpha_o,alpha_i,error_prob,mean_rounds\n");
    for cell in &output.table {
        out.push_str(&format!(
            "{},{},{:.6},{:.3}\n",
            cell.alpha_o, cell.alpha_i, cell.error_prob, cell.mean_rounds
        ));
    }
    out
}
