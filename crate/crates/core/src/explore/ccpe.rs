//! Observation-assisted fixed-confidence algorithms.
//!
//! Both run the same three-plays-per-iteration loop: one scheduled null
//! intervention feeding the observational estimators, then pulls of the two
//! LUCB candidates. They differ only in how observational intervals are
//! produced — GLM maximum likelihood versus admissible-sequence plug-in.

use alloc::vec::Vec;

use crate::estimation::{
    bglm_obs_interval, general_obs_interval, MleAccumulator, ALPHA_I_DEFAULT, ALPHA_O_BGLM_DEFAULT,
    ALPHA_O_GENERAL_DEFAULT,
};
use crate::graph::{
    verify_admissible_sequence, Action, AdmissibleSequence, CausalGraph, SequenceVerdict,
};
use crate::math::ln_clamped;
use crate::scm::{bglm_sigma, q_bglm, Link};

use super::{AlgoConfig, Arms, Environment, ExploreError, PlayBudget, StopReason, TrialRecord};

fn finish(arms: &Arms, budget: &PlayBudget, chosen: usize, reason: StopReason) -> TrialRecord {
    TrialRecord {
        chosen,
        rounds: budget.plays,
        pulls: arms.pulls.clone(),
        observations: arms.obs_count,
        stop_reason: reason,
        empty_merge_events: arms.empty_merges,
    }
}

/// Extra sample-size clause of the BGLM stopping rule.
fn theory_gate(t: u64, n_obs: usize, config: &AlgoConfig) -> bool {
    let k = config.constants.as_ref().expect("validated");
    let tf = t as f64;
    let n = n_obs as f64;
    let d = k.d_max as f64;
    let first = config.theory_c * d / (k.eta * k.eta) * ln_clamped(n * tf * tf / config.delta);
    let kappa4 = k.kappa * k.kappa * k.kappa * k.kappa;
    let second = 1024.0 * k.m2 * k.m2 * (4.0 * d * d - 3.0) * d / (kappa4 * k.eta)
        * (d * d + ln_clamped(3.0 * n * tf * tf / config.delta));
    tf >= first.max(second)
}

/// Fixed-confidence best-intervention search on a BGLM causal model.
///
/// Per iteration: select the empirical-best and challenger arms, test the
/// stopping rule, observe once (feeding the MLE), refresh the observational
/// intervals on the configured period, pull both candidates, and merge the
/// two interval families.
pub fn ccpe_bglm<E: Environment>(
    env: &mut E,
    graph: &CausalGraph,
    links: &[Link],
    actions: &[Action],
    config: &AlgoConfig,
) -> Result<TrialRecord, ExploreError> {
    config.validate()?;
    if actions.is_empty() {
        return Err(ExploreError::Config("empty action set".into()));
    }
    if graph.has_hidden() {
        return Err(ExploreError::Config(
            "BGLM model cannot have hidden nodes".into(),
        ));
    }
    if graph.global_node().is_none() {
        return Err(ExploreError::Config(
            "BGLM model requires a global node".into(),
        ));
    }
    let constants = config
        .constants
        .as_ref()
        .ok_or_else(|| ExploreError::Config("BGLM run requires assumption constants".into()))?;
    let alpha_o = config.alpha_o.unwrap_or(ALPHA_O_BGLM_DEFAULT);
    let alpha_i = config.alpha_i.unwrap_or(ALPHA_I_DEFAULT);
    let n_actions = actions.len();
    let n_obs = graph.n_observed();

    let q_l: Vec<f64> = actions
        .iter()
        .map(|a| q_bglm(graph, a, constants.d_max))
        .collect::<Result<_, _>>()
        .map_err(|_| ExploreError::Config("action incompatible with graph".into()))?;

    let mut arms = Arms::new(actions, config.count_obs_rounds_for_do);
    let mut budget = PlayBudget::new(config);
    let mut acc = MleAccumulator::new(graph);
    let null = Action::null();

    if n_actions == 1 {
        return Ok(finish(&arms, &budget, 0, StopReason::Confidence));
    }

    for iter in 1u64.. {
        let a_h = arms.best_mean();
        let a_l = arms.best_upper_excluding(a_h);
        let stop = arms.merged[a_l].upper <= arms.merged[a_h].lower + config.epsilon
            && (!config.theory_mode || theory_gate(iter - 1, n_obs, config));
        if stop {
            return Ok(finish(&arms, &budget, a_h, StopReason::Confidence));
        }

        // Step 1: passive observation and observational estimates.
        if !budget.can_play() {
            return Ok(finish(
                &arms,
                &budget,
                arms.best_mean(),
                budget.stop_reason(),
            ));
        }
        let obs = env.play(&null);
        budget.note_play();
        arms.record_observation(obs.y);
        acc.push(&obs);
        if (iter - 1) % config.obs_refresh_period == 0 {
            let theta = acc.fit(links)?;
            for (i, action) in actions.iter().enumerate() {
                let mu = bglm_sigma(graph, links, &theta, action);
                arms.obs_int[i] = bglm_obs_interval(
                    mu,
                    arms.obs_count,
                    q_l[i],
                    constants,
                    n_obs,
                    config.delta,
                    alpha_o,
                );
            }
        }

        // Step 2: pull the challenger and the leader.
        for &arm in &[a_l, a_h] {
            if !budget.can_play() {
                arms.remerge(n_actions, config.delta, alpha_i);
                return Ok(finish(
                    &arms,
                    &budget,
                    arms.best_mean(),
                    budget.stop_reason(),
                ));
            }
            let o = env.play(&actions[arm]);
            budget.note_play();
            arms.record_pull(arm, o.y);
        }

        // Step 3: merge observational and interventional intervals.
        arms.remerge(n_actions, config.delta, alpha_i);
    }
    unreachable!()
}

/// Fixed-confidence best-intervention search on a general causal model with
/// admissible sequences (hidden confounders allowed). Arms without a
/// sequence carry an infinite observational radius and behave as in plain
/// LUCB.
pub fn ccpe_general<E: Environment>(
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
    let n_actions = actions.len();

    let mut counters = crate::estimation::ObsCounters::new(actions, sequences)?;
    // The null arm's observational view is its interventional sample mean;
    // only proper interventions carry plug-in intervals here.
    let estimable: Vec<usize> = (0..n_actions)
        .filter(|&i| !actions[i].is_null() && counters.has_sequence(i))
        .collect();
    let k_of: Vec<usize> = actions.iter().map(Action::k).collect();
    let z_of: Vec<usize> = (0..n_actions)
        .map(|i| counters.union_size(i).unwrap_or(0))
        .collect();

    let mut arms = Arms::new(actions, config.count_obs_rounds_for_do);
    let mut budget = PlayBudget::new(config);
    let null = Action::null();

    if n_actions == 1 {
        return Ok(finish(&arms, &budget, 0, StopReason::Confidence));
    }

    for iter in 1u64.. {
        let a_h = arms.best_mean();
        let a_l = arms.best_upper_excluding(a_h);
        if arms.merged[a_l].upper <= arms.merged[a_h].lower + config.epsilon {
            return Ok(finish(&arms, &budget, a_h, StopReason::Confidence));
        }

        // Step 1: passive observation and plug-in estimates at T_a.
        if !budget.can_play() {
            return Ok(finish(
                &arms,
                &budget,
                arms.best_mean(),
                budget.stop_reason(),
            ));
        }
        let obs = env.play(&null);
        budget.note_play();
        arms.record_observation(obs.y);
        counters.update(&obs);
        if (iter - 1) % config.obs_refresh_period == 0 {
            for &i in &estimable {
                let t_a = counters.t_min(i).unwrap_or(0);
                let estimate = counters.plugin_estimate(i)?;
                arms.obs_int[i] = general_obs_interval(
                    estimate,
                    t_a,
                    k_of[i],
                    z_of[i],
                    n_actions,
                    config.delta,
                    alpha_o,
                );
            }
        }

        // Step 2: pull the challenger and the leader.
        for &arm in &[a_l, a_h] {
            if !budget.can_play() {
                arms.remerge(n_actions, config.delta, alpha_i);
                return Ok(finish(
                    &arms,
                    &budget,
                    arms.best_mean(),
                    budget.stop_reason(),
                ));
            }
            let o = env.play(&actions[arm]);
            budget.note_play();
            arms.record_pull(arm, o.y);
        }

        // Step 3: merge.
        arms.remerge(n_actions, config.delta, alpha_i);
    }
    unreachable!()
}
