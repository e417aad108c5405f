//! Analytics report for an instance: exact means and gaps, observability
//! profile, observation thresholds, hardness sums, sample-complexity
//! predictors for the observation-assisted algorithms versus a naive
//! LUCB-style `H`, fixed-budget constants, and (for parallel atomic
//! instances) the lower-bound value.

use serde::{Deserialize, Serialize};

use cpe_core::complexity::{
    fixed_budget_constants, gap_threshold, h_r, lower_bound_value, observation_threshold,
    predict_sample_complexity, HardnessProfile,
};
use cpe_core::math::ln;
use cpe_core::scm::{q_bglm, q_general_from_joint, ScmModel};

use crate::instances::reward_band;
use crate::model_json::Instance;
use crate::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictReport {
    pub kind: String,
    pub n_actions: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// "bglm" (structural q) or "general" (observational q).
    pub q_flavor: String,
    pub mu: Vec<f64>,
    pub delta_gaps: Vec<f64>,
    pub best: usize,
    pub q: Vec<f64>,
    pub observation_threshold: usize,
    pub gap_threshold: usize,
    pub h_at_gap_threshold: f64,
    pub h_full: f64,
    pub predictor_ccpe: f64,
    pub predictor_naive: f64,
    pub fixed_budget_h3: f64,
    pub fixed_budget_alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
}

/// Whether the instance is in the parallel atomic class: every edge points
/// straight into the reward and every non-null action is atomic.
fn is_parallel_atomic(instance: &Instance) -> bool {
    let graph = instance.model.graph();
    if graph.has_hidden() {
        return false;
    }
    let y = graph.reward();
    if !graph.edges().iter().all(|&(_, c)| c == y) {
        return false;
    }
    instance.actions.iter().all(|a| a.k() <= 1)
}

pub fn predict(
    instance: &Instance,
    epsilon: f64,
    delta: f64,
) -> Result<PredictReport, HarnessError> {
    let model = &instance.model;
    let gaps = model
        .gaps(&instance.actions, epsilon)
        .map_err(|e| HarnessError::runtime(format!("exact means: {e}")))?;
    let (q, q_flavor) = match model {
        ScmModel::Bglm(b) => {
            let d = b.constants().d_max;
            let q: Vec<f64> = instance
                .actions
                .iter()
                .map(|a| q_bglm(model.graph(), a, d))
                .collect::<Result<_, _>>()
                .map_err(|e| HarnessError::runtime(format!("{e}")))?;
            (q, "bglm")
        }
        ScmModel::Tabular(_) => {
            let joint = model
                .exact_joint()
                .map_err(|e| HarnessError::runtime(format!("joint: {e}")))?;
            let q: Vec<f64> = instance
                .actions
                .iter()
                .zip(instance.sequences.iter())
                .map(|(a, s)| q_general_from_joint(&joint, a, s.as_ref()))
                .collect();
            (q, "general")
        }
    };
    let profile = HardnessProfile::new(q.clone(), gaps.delta.clone(), epsilon)
        .map_err(|e| HarnessError::runtime(format!("profile: {e}")))?;
    let m = observation_threshold(&q).map_err(|e| HarnessError::runtime(format!("{e}")))?;
    let m_gap = gap_threshold(&profile);
    let h_gap = h_r(&profile, m_gap).map_err(|e| HarnessError::runtime(format!("{e}")))?;
    let h_full = h_r(&profile, profile.len()).map_err(|e| HarnessError::runtime(format!("{e}")))?;
    let n_actions = instance.actions.len();
    let predictor_ccpe = predict_sample_complexity(&profile, n_actions, delta);
    let predictor_naive = h_full * ln((n_actions as f64 * h_full / delta).max(1.0 + 1e-9));
    let fb =
        fixed_budget_constants(&profile, m).map_err(|e| HarnessError::runtime(format!("{e}")))?;
    let lower_bound = if is_parallel_atomic(instance) {
        let do_index = instance.actions.iter().position(|a| a.is_null());
        match (do_index, reward_band(instance)) {
            (Some(di), Some((p_min, p_max))) => {
                lower_bound_value(&profile, di, p_min, p_max, delta).ok()
            }
            _ => None,
        }
    } else {
        None
    };
    Ok(PredictReport {
        kind: instance.meta.kind.clone(),
        n_actions,
        epsilon,
        delta,
        q_flavor: q_flavor.to_string(),
        mu: gaps.mu,
        delta_gaps: gaps.delta,
        best: gaps.best,
        q,
        observation_threshold: m,
        gap_threshold: m_gap,
        h_at_gap_threshold: h_gap,
        h_full,
        predictor_ccpe,
        predictor_naive,
        fixed_budget_h3: fb.h3,
        fixed_budget_alpha: fb.alpha,
        lower_bound,
    })
}
