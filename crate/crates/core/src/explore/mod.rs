//! Bandit algorithms over a common environment contract: the
//! observation-assisted fixed-confidence algorithms, classical baselines,
//! and a fixed-budget successive-reject variant.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::estimation::{beta_interventional, merge_intervals, EstimationError, IntervalEstimate};
use crate::graph::Action;
use crate::rng::Stream;
use crate::scm::{AssumptionConstants, Observation, ScmModel};

mod baselines;
mod ccpe;
mod successive_reject;

pub use baselines::{lil_ucb_heuristic, lucb};
pub use ccpe::{ccpe_bglm, ccpe_general};
pub use successive_reject::causal_successive_reject;

/// Default hard limit on environment plays per trial.
pub const ROUND_CAP_DEFAULT: u64 = 1_000_000;

/// Behavioral contract between an algorithm and the causal system: play an
/// intervention, observe every observed variable plus the reward.
pub trait Environment {
    fn play(&mut self, action: &Action) -> Observation;
}

/// Environment backed by a structural causal model.
///
/// Each play draws from a substream keyed by `(trial seed, action identity,
/// occurrence index)`, so the k-th play of a given action yields the same
/// observation in any algorithm sharing the seed. Draws stay i.i.d. per
/// action, and paired-seed comparisons across algorithms line up exactly.
pub struct ScmEnvironment<'a> {
    model: &'a ScmModel,
    seed: u64,
    occurrence: BTreeMap<u64, u64>,
}

impl<'a> ScmEnvironment<'a> {
    pub fn new(model: &'a ScmModel, seed: u64) -> Self {
        ScmEnvironment {
            model,
            seed,
            occurrence: BTreeMap::new(),
        }
    }
}

impl Environment for ScmEnvironment<'_> {
    fn play(&mut self, action: &Action) -> Observation {
        let key = action.key();
        let occ = self.occurrence.entry(key).or_insert(0);
        let mut rng = Stream::derive2(self.seed, key, *occ);
        *occ += 1;
        self.model
            .sample(action, &mut rng)
            .expect("environment action must be valid for the model")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExploreError {
    Config(String),
    /// A supplied admissible sequence failed verification.
    Sequence {
        action: usize,
    },
    /// Fixed-budget run needs at least `needed` rounds.
    Budget {
        needed: u64,
        given: u64,
    },
    Estimation(EstimationError),
}

impl From<EstimationError> for ExploreError {
    fn from(e: EstimationError) -> Self {
        ExploreError::Estimation(e)
    }
}

impl fmt::Display for ExploreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExploreError::Config(what) => write!(f, "bad configuration: {what}"),
            ExploreError::Sequence { action } => {
                write!(
                    f,
                    "admissible sequence for action {action} failed verification"
                )
            }
            ExploreError::Budget { needed, given } => {
                write!(f, "budget {given} below required {needed}")
            }
            ExploreError::Estimation(e) => write!(f, "{e}"),
        }
    }
}

/// Shared algorithm parameters. `alpha_o`/`alpha_i` default to the
/// per-algorithm theoretical scales when unset.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_o: Option<f64>,
    pub alpha_i: Option<f64>,
    /// Enforce the extra sample-size clause in the BGLM stopping rule.
    pub theory_mode: bool,
    /// The unnamed constant in that clause.
    pub theory_c: f64,
    /// Observational estimates refresh every this many iterations.
    pub obs_refresh_period: u64,
    /// Fixed-budget round count (successive reject only).
    pub budget: Option<u64>,
    /// Censor a fixed-confidence run at this many plays and report the
    /// current best candidate.
    pub censor_at: Option<u64>,
    pub round_cap: u64,
    /// Count scheduled observation rounds toward the null arm's
    /// interventional sample count.
    pub count_obs_rounds_for_do: bool,
    pub constants: Option<AssumptionConstants>,
}

impl AlgoConfig {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, ExploreError> {
        let cfg = AlgoConfig {
            epsilon,
            delta,
            alpha_o: None,
            alpha_i: None,
            theory_mode: false,
            theory_c: 1.0,
            obs_refresh_period: 50,
            budget: None,
            censor_at: None,
            round_cap: ROUND_CAP_DEFAULT,
            count_obs_rounds_for_do: true,
            constants: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExploreError> {
        // epsilon = 1 is admitted as the vacuous PAC target.
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ExploreError::Config(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.delta.is_nan() || self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(ExploreError::Config(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if self.obs_refresh_period == 0 {
            return Err(ExploreError::Config(String::from(
                "obs_refresh_period must be >= 1",
            )));
        }
        if self.round_cap == 0 {
            return Err(ExploreError::Config(String::from("round_cap must be >= 1")));
        }
        if self.theory_c.is_nan() || self.theory_c <= 0.0 {
            return Err(ExploreError::Config(String::from(
                "theory_c must be positive",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The confidence stopping rule fired.
    Confidence,
    /// The play budget (or censor point) was reached.
    Budget,
    /// The runaway-trial cap was hit; flagged downstream, never silently
    /// folded into aggregates.
    RoundCap,
}

/// Per-trial output. `rounds` always equals the pull total plus the
/// scheduled observation count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub chosen: usize,
    pub rounds: u64,
    pub pulls: Vec<u64>,
    pub observations: u64,
    pub stop_reason: StopReason,
    pub empty_merge_events: u64,
}

// ── shared per-arm state ────────────────────────────────────────────────

/// Interventional statistics plus the latest observational and merged
/// intervals for every arm.
pub(crate) struct Arms {
    pub(crate) do_index: Option<usize>,
    pub(crate) pulls: Vec<u64>,
    sums: Vec<f64>,
    obs_y_sum: f64,
    pub(crate) obs_count: u64,
    count_obs_for_do: bool,
    pub(crate) obs_int: Vec<IntervalEstimate>,
    pub(crate) merged: Vec<IntervalEstimate>,
    pub(crate) empty_merges: u64,
}

impl Arms {
    pub(crate) fn new(actions: &[Action], count_obs_for_do: bool) -> Self {
        let n = actions.len();
        Arms {
            do_index: actions.iter().position(Action::is_null),
            pulls: vec![0; n],
            sums: vec![0.0; n],
            obs_y_sum: 0.0,
            obs_count: 0,
            count_obs_for_do,
            obs_int: vec![IntervalEstimate::unbounded(); n],
            merged: vec![IntervalEstimate::unbounded(); n],
            empty_merges: 0,
        }
    }

    pub(crate) fn record_pull(&mut self, arm: usize, y: bool) {
        self.pulls[arm] += 1;
        self.sums[arm] += y as u64 as f64;
    }

    pub(crate) fn record_observation(&mut self, y: bool) {
        self.obs_count += 1;
        self.obs_y_sum += y as u64 as f64;
    }

    /// Pull count credited to an arm's interventional interval; the null arm
    /// may also absorb scheduled observation rounds.
    pub(crate) fn effective_pulls(&self, arm: usize) -> u64 {
        let mut n = self.pulls[arm];
        if self.count_obs_for_do && Some(arm) == self.do_index {
            n += self.obs_count;
        }
        n
    }

    fn effective_sum(&self, arm: usize) -> f64 {
        let mut s = self.sums[arm];
        if self.count_obs_for_do && Some(arm) == self.do_index {
            s += self.obs_y_sum;
        }
        s
    }

    pub(crate) fn interventional(
        &self,
        arm: usize,
        n_actions: usize,
        delta: f64,
        alpha_i: f64,
    ) -> IntervalEstimate {
        let n = self.effective_pulls(arm);
        if n == 0 {
            return IntervalEstimate::unbounded();
        }
        let mean = self.effective_sum(arm) / n as f64;
        IntervalEstimate::from_radius(mean, beta_interventional(n, n_actions, delta, alpha_i))
    }

    /// Rebuild every merged interval from the stored observational intervals
    /// and fresh interventional ones.
    pub(crate) fn remerge(&mut self, n_actions: usize, delta: f64, alpha_i: f64) {
        for arm in 0..self.merged.len() {
            let intv = self.interventional(arm, n_actions, delta, alpha_i);
            let (m, empty) = merge_intervals(&self.obs_int[arm], &intv);
            if empty {
                self.empty_merges += 1;
            }
            self.merged[arm] = m;
        }
    }

    /// Highest merged mean (ties to the lowest index).
    pub(crate) fn best_mean(&self) -> usize {
        let mut best = 0usize;
        for (i, m) in self.merged.iter().enumerate().skip(1) {
            if m.mean > self.merged[best].mean {
                best = i;
            }
        }
        best
    }

    /// Highest upper bound excluding `skip` (ties to the lowest index).
    pub(crate) fn best_upper_excluding(&self, skip: usize) -> usize {
        let mut best = usize::MAX;
        for (i, m) in self.merged.iter().enumerate() {
            if i == skip {
                continue;
            }
            if best == usize::MAX || m.upper > self.merged[best].upper {
                best = i;
            }
        }
        best
    }
}

/// Tracks environment plays against the censor point and the runaway cap.
pub(crate) struct PlayBudget {
    pub(crate) plays: u64,
    censor: Option<u64>,
    cap: u64,
}

impl PlayBudget {
    pub(crate) fn new(config: &AlgoConfig) -> Self {
        PlayBudget {
            plays: 0,
            censor: config.censor_at,
            cap: config.round_cap,
        }
    }

    /// Whether one more play is allowed.
    pub(crate) fn can_play(&self) -> bool {
        self.plays < self.cap && self.censor.is_none_or(|c| self.plays < c)
    }

    pub(crate) fn note_play(&mut self) {
        self.plays += 1;
    }

    /// Why the next play was refused.
    pub(crate) fn stop_reason(&self) -> StopReason {
        match self.censor {
            Some(c) if self.plays >= c => StopReason::Budget,
            _ => StopReason::RoundCap,
        }
    }
}
