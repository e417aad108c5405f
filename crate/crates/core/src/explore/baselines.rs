//! Classical adaptive pure-exploration baselines, run against the same
//! environment contract as the causal algorithms.

use crate::estimation::{beta_interventional, ALPHA_I_DEFAULT};
use crate::graph::Action;

use super::{AlgoConfig, Arms, Environment, ExploreError, PlayBudget, StopReason, TrialRecord};

fn finish(arms: &Arms, budget: &PlayBudget, chosen: usize, reason: StopReason) -> TrialRecord {
    TrialRecord {
        chosen,
        rounds: budget.plays,
        pulls: arms.pulls.clone(),
        observations: 0,
        stop_reason: reason,
        empty_merge_events: 0,
    }
}

/// LUCB: pull the empirical leader and the highest-UCB challenger each
/// round; stop when the challenger's upper bound drops to the leader's lower
/// bound plus epsilon.
///
/// Initialization is implicit: unpulled arms carry infinite upper bounds, so
/// every arm is pulled before the stopping rule can fire, and the selection
/// dynamics coincide with the observation-assisted loop when no arm has an
/// observational interval.
pub fn lucb<E: Environment>(
    env: &mut E,
    actions: &[Action],
    config: &AlgoConfig,
) -> Result<TrialRecord, ExploreError> {
    config.validate()?;
    if actions.is_empty() {
        return Err(ExploreError::Config("empty action set".into()));
    }
    let alpha_i = config.alpha_i.unwrap_or(ALPHA_I_DEFAULT);
    let n_actions = actions.len();
    // Observation rounds never happen here; keep the null arm's pulls pure.
    let mut arms = Arms::new(actions, false);
    let mut budget = PlayBudget::new(config);

    if n_actions == 1 {
        if budget.can_play() {
            let o = env.play(&actions[0]);
            budget.note_play();
            arms.record_pull(0, o.y);
        }
        return Ok(finish(&arms, &budget, 0, StopReason::Confidence));
    }

    loop {
        let a_h = arms.best_mean();
        let a_l = arms.best_upper_excluding(a_h);
        if arms.merged[a_l].upper <= arms.merged[a_h].lower + config.epsilon {
            return Ok(finish(&arms, &budget, a_h, StopReason::Confidence));
        }
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
        arms.remerge(n_actions, config.delta, alpha_i);
    }
}

/// Heuristic lil'UCB: after one pull of every arm, repeatedly pull the arm
/// with the highest index `mean + radius`; stop once some arm holds more
/// than `1 + lambda` times the pulls of all others combined, with
/// `lambda = 1 + 10/|A|`.
pub fn lil_ucb_heuristic<E: Environment>(
    env: &mut E,
    actions: &[Action],
    config: &AlgoConfig,
) -> Result<TrialRecord, ExploreError> {
    config.validate()?;
    if actions.is_empty() {
        return Err(ExploreError::Config("empty action set".into()));
    }
    let alpha_i = config.alpha_i.unwrap_or(ALPHA_I_DEFAULT);
    let n_actions = actions.len();
    let lambda = 1.0 + 10.0 / n_actions as f64;
    let mut arms = Arms::new(actions, false);
    let mut budget = PlayBudget::new(config);

    let most_pulled = |arms: &Arms| -> usize {
        let mut best = 0usize;
        for i in 1..n_actions {
            if arms.pulls[i] > arms.pulls[best] {
                best = i;
            }
        }
        best
    };

    for arm in 0..n_actions {
        if !budget.can_play() {
            return Ok(finish(
                &arms,
                &budget,
                most_pulled(&arms),
                budget.stop_reason(),
            ));
        }
        let o = env.play(&actions[arm]);
        budget.note_play();
        arms.record_pull(arm, o.y);
    }

    loop {
        let total: u64 = arms.pulls.iter().sum();
        if let Some(winner) = (0..n_actions)
            .find(|&a| arms.pulls[a] as f64 >= 1.0 + lambda * (total - arms.pulls[a]) as f64)
        {
            return Ok(finish(&arms, &budget, winner, StopReason::Confidence));
        }
        let mut pick = 0usize;
        let mut pick_score = f64::NEG_INFINITY;
        for a in 0..n_actions {
            let n = arms.pulls[a];
            let mean = if n == 0 { 0.0 } else { arms.merged[a].mean };
            let score = mean + beta_interventional(n, n_actions, config.delta, alpha_i);
            if score > pick_score {
                pick = a;
                pick_score = score;
            }
        }
        if !budget.can_play() {
            return Ok(finish(
                &arms,
                &budget,
                most_pulled(&arms),
                budget.stop_reason(),
            ));
        }
        let o = env.play(&actions[pick]);
        budget.note_play();
        arms.record_pull(pick, o.y);
        arms.remerge(n_actions, config.delta, alpha_i);
    }
}
