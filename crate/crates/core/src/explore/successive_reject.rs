//! Fixed-budget elimination: half the budget goes to passive observation,
//! the rest tops up whichever surviving arm has the least combined
//! observational and interventional evidence, eliminating the empirical
//! worst arm once per phase.

use alloc::vec;
use alloc::vec::Vec;

use crate::complexity::log_bar;
use crate::estimation::{
    general_obs_interval, merge_intervals, ObsCounters, ALPHA_I_DEFAULT, ALPHA_O_GENERAL_DEFAULT,
};
use crate::graph::{
    verify_admissible_sequence, Action, AdmissibleSequence, CausalGraph, SequenceVerdict,
};

use super::{AlgoConfig, Arms, Environment, ExploreError, StopReason, TrialRecord};

/// Successive reject with an observational half-budget. Requires
/// `budget >= 4 |A|`; total environment plays never exceed the budget.
pub fn causal_successive_reject<E: Environment>(
    env: &mut E,
    graph: &CausalGraph,
    actions: &[Action],
    sequences: &[Option<AdmissibleSequence>],
    config: &AlgoConfig,
) -> Result<TrialRecord, ExploreError> {
    config.validate()?;
    if actions.is_empty() {
        return Err(ExploreError::Config("empty action set".into()));
    }
    if sequences.len() != actions.len() {
        return Err(ExploreError::Config(
            "one sequence slot per action required".into(),
        ));
    }
    let n_arms = actions.len();
    let budget_total = config
        .budget
        .ok_or_else(|| ExploreError::Config("fixed-budget run requires a budget".into()))?;
    if budget_total < 4 * n_arms as u64 {
        return Err(ExploreError::Budget {
            needed: 4 * n_arms as u64,
            given: budget_total,
        });
    }
    for (i, (action, seq)) in actions.iter().zip(sequences.iter()).enumerate() {
        if let Some(seq) = seq {
            if action.is_null() {
                continue;
            }
            match verify_admissible_sequence(graph, action, seq) {
                Ok(SequenceVerdict::Valid) => {}
                _ => return Err(ExploreError::Sequence { action: i }),
            }
        }
    }
    let alpha_o = config.alpha_o.unwrap_or(ALPHA_O_GENERAL_DEFAULT);
    let alpha_i = config.alpha_i.unwrap_or(ALPHA_I_DEFAULT);

    let mut counters = ObsCounters::new(actions, sequences)?;
    let mut arms = Arms::new(actions, config.count_obs_rounds_for_do);
    let mut plays = 0u64;
    let null = Action::null();

    // Observation phase: floor(T/2) null interventions.
    let obs_rounds = budget_total / 2;
    for _ in 0..obs_rounds {
        let obs = env.play(&null);
        plays += 1;
        arms.record_observation(obs.y);
        counters.update(&obs);
    }

    // Phase schedule n_k = (T/2 - N) / (log_bar(N) (N + 1 - k)).
    let lb = log_bar(n_arms);
    let half_minus = budget_total as f64 / 2.0 - n_arms as f64;
    let n_k = |k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            half_minus / (lb * (n_arms + 1 - k) as f64)
        }
    };

    let mut alive: Vec<bool> = vec![true; n_arms];
    let mut alive_count = n_arms;

    let merged_mean = |arms: &Arms, counters: &ObsCounters, arm: usize| -> f64 {
        let obs_int = if actions[arm].is_null() || !counters.has_sequence(arm) {
            crate::estimation::IntervalEstimate::unbounded()
        } else {
            let t_a = counters.t_min(arm).unwrap_or(0);
            let estimate = counters.plugin_estimate(arm).unwrap_or(0.0);
            general_obs_interval(
                estimate,
                t_a,
                actions[arm].k(),
                counters.union_size(arm).unwrap_or(0),
                n_arms,
                config.delta,
                alpha_o,
            )
        };
        let intv = arms.interventional(arm, n_arms, config.delta, alpha_i);
        merge_intervals(&obs_int, &intv).0.mean
    };

    for phase in 1..n_arms {
        let pulls_this_phase =
            libm::ceil((n_arms + 1 - phase) as f64 * (n_k(phase) - n_k(phase - 1))).max(0.0) as u64;
        for _ in 0..pulls_this_phase {
            if plays >= budget_total {
                break;
            }
            // Top up the surviving arm with the least evidence.
            let mut pick = usize::MAX;
            let mut pick_score = u64::MAX;
            for a in 0..n_arms {
                if !alive[a] {
                    continue;
                }
                let t_a = counters.t_min(a).unwrap_or(0);
                let score = t_a + arms.pulls[a];
                if score < pick_score {
                    pick = a;
                    pick_score = score;
                }
            }
            let o = env.play(&actions[pick]);
            plays += 1;
            arms.record_pull(pick, o.y);
        }
        // Eliminate the empirical worst survivor (free of plays).
        let mut worst = usize::MAX;
        let mut worst_mean = f64::INFINITY;
        for a in 0..n_arms {
            if !alive[a] {
                continue;
            }
            let mean = merged_mean(&arms, &counters, a);
            if mean < worst_mean {
                worst = a;
                worst_mean = mean;
            }
        }
        alive[worst] = false;
        alive_count -= 1;
        if alive_count == 1 {
            break;
        }
    }

    let chosen = alive.iter().position(|&a| a).expect("one survivor");
    Ok(TrialRecord {
        chosen,
        rounds: plays,
        pulls: arms.pulls.clone(),
        observations: arms.obs_count,
        stop_reason: StopReason::Budget,
        empty_merge_events: arms.empty_merges,
    })
}
