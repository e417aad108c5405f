//! Finite-sample estimators and confidence radii: per-node GLM maximum
//! likelihood with an identity-seeded gram prior, plug-in estimation of do
//! effects through admissible sequences, the observational/interventional
//! radius formulas, and interval merging.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{Action, AdmissibleSequence, CausalGraph};
use crate::math::{ln_clamped, pow_three_halves, sqrt};
use crate::scm::{AssumptionConstants, Link, Observation};

/// Default exploration scales with theoretical guarantees.
pub const ALPHA_O_BGLM_DEFAULT: f64 = 6.0 * core::f64::consts::SQRT_2;
pub const ALPHA_O_GENERAL_DEFAULT: f64 = 8.0;
pub const ALPHA_I_DEFAULT: f64 = 2.0;

const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimationError {
    /// Newton-Raphson failed to drive the score to zero.
    NonConvergence { node: usize },
    /// The arm has no admissible sequence, so no observational estimate.
    NoSequence { action: usize },
    /// Sequence's intervened nodes disagree with the action's targets.
    SequenceMismatch { action: usize },
}

impl fmt::Display for EstimationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimationError::NonConvergence { node } => {
                write!(f, "MLE did not converge for node {node}")
            }
            EstimationError::NoSequence { action } => {
                write!(f, "action {action} has no admissible sequence")
            }
            EstimationError::SequenceMismatch { action } => {
                write!(f, "sequence does not match targets of action {action}")
            }
        }
    }
}

/// A point estimate with its confidence interval; bounds may be infinite and
/// are left unclamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalEstimate {
    pub fn from_radius(mean: f64, radius: f64) -> Self {
        IntervalEstimate {
            mean,
            lower: mean - radius,
            upper: mean + radius,
        }
    }

    /// The vacuous interval carried before any data arrives.
    pub fn unbounded() -> Self {
        IntervalEstimate {
            mean: 0.0,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Intersect the observational and interventional intervals and take the
/// midpoint as the working mean. A disjoint pair falls back to the
/// interventional interval and reports `true` as the flag.
pub fn merge_intervals(
    obs: &IntervalEstimate,
    intv: &IntervalEstimate,
) -> (IntervalEstimate, bool) {
    let lower = obs.lower.max(intv.lower);
    let upper = obs.upper.min(intv.upper);
    if lower > upper {
        return (*intv, true);
    }
    let mean = if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if intv.mean.is_finite() && intv.lower.is_finite() {
        intv.mean
    } else if obs.lower.is_finite() {
        obs.mean
    } else {
        0.0
    };
    (IntervalEstimate { mean, lower, upper }, false)
}

/// Interventional radius `alpha_i * sqrt(log(|A| log(2t) / delta) / t)`;
/// unsampled arms get an infinite radius.
pub fn beta_interventional(n_pulls: u64, n_actions: usize, delta: f64, alpha_i: f64) -> f64 {
    if n_pulls == 0 {
        return f64::INFINITY;
    }
    let t = n_pulls as f64;
    let arg = n_actions as f64 * ln_clamped(2.0 * t) / delta;
    alpha_i * sqrt(ln_clamped(arg) / t)
}

/// Observational radius for the BGLM:
/// `alpha_o * M1 * D^1.5 / (kappa sqrt(eta)) * sqrt(log(3 n t^2 / delta) / (q t))`.
/// Zero observations or a non-positive `q` yield an infinite radius.
pub fn bglm_obs_radius(
    t: u64,
    q_l: f64,
    constants: &AssumptionConstants,
    n_nodes: usize,
    delta: f64,
    alpha_o: f64,
) -> f64 {
    if t == 0 || q_l <= 0.0 {
        return f64::INFINITY;
    }
    let tf = t as f64;
    let lead = alpha_o * constants.m1 * pow_three_halves(constants.d_max as f64)
        / (constants.kappa * sqrt(constants.eta));
    lead * sqrt(ln_clamped(3.0 * n_nodes as f64 * tf * tf / delta) / (q_l * tf))
}

pub fn bglm_obs_interval(
    mu: f64,
    t: u64,
    q_l: f64,
    constants: &AssumptionConstants,
    n_nodes: usize,
    delta: f64,
    alpha_o: f64,
) -> IntervalEstimate {
    IntervalEstimate::from_radius(
        mu,
        bglm_obs_radius(t, q_l, constants, n_nodes, delta, alpha_o),
    )
}

/// Observational radius for general graphs, evaluated at `T_a`:
/// `alpha_o * sqrt(log(20 k |A| Z_a I_a log(2t) / delta) / t)` with
/// `I_a = 2^{Z_a}`; an empty union replaces `Z_a * I_a` by 1.
pub fn general_obs_radius(
    t_a: u64,
    k_targets: usize,
    z_a: usize,
    n_actions: usize,
    delta: f64,
    alpha_o: f64,
) -> f64 {
    if t_a == 0 {
        return f64::INFINITY;
    }
    let t = t_a as f64;
    let zi = if z_a == 0 {
        1.0
    } else {
        z_a as f64 * (1u64 << z_a) as f64
    };
    let arg = 20.0 * k_targets as f64 * n_actions as f64 * zi * ln_clamped(2.0 * t) / delta;
    alpha_o * sqrt(ln_clamped(arg) / t)
}

pub fn general_obs_interval(
    estimate: f64,
    t_a: u64,
    k_targets: usize,
    z_a: usize,
    n_actions: usize,
    delta: f64,
    alpha_o: f64,
) -> IntervalEstimate {
    IntervalEstimate::from_radius(
        estimate,
        general_obs_radius(t_a, k_targets, z_a, n_actions, delta, alpha_o),
    )
}

// ── GLM maximum likelihood ──────────────────────────────────────────────

struct NodeAcc {
    node: usize,
    parents: Vec<usize>,
    /// Rounds per parent-value pattern (bit i = value of i-th parent).
    counts: Vec<u64>,
    /// Rounds per pattern in which the node came out 1.
    ones: Vec<u64>,
    /// Identity-seeded gram matrix `I + sum v v^T`, row-major.
    gram: Vec<f64>,
}

/// Per-node sufficient statistics for the score equations, fed by full
/// observational rounds.
pub struct MleAccumulator {
    nodes: Vec<NodeAcc>,
    reward: usize,
    rounds: u64,
}

impl MleAccumulator {
    /// Tracks every non-hidden node of the graph; parentless nodes carry no
    /// parameters.
    pub fn new(graph: &CausalGraph) -> Self {
        let nodes = (0..graph.n())
            .filter(|&v| graph.kind(v) != crate::graph::NodeKind::Hidden)
            .map(|v| {
                let parents = graph.parents(v).to_vec();
                let d = parents.len();
                let mut gram = vec![0.0; d * d];
                for i in 0..d {
                    gram[i * d + i] = 1.0;
                }
                NodeAcc {
                    node: v,
                    parents,
                    counts: vec![0; 1 << d],
                    ones: vec![0; 1 << d],
                    gram,
                }
            })
            .collect();
        MleAccumulator {
            nodes,
            reward: graph.reward(),
            rounds: 0,
        }
    }

    #[inline]
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Record one observational round.
    pub fn push(&mut self, obs: &Observation) {
        self.rounds += 1;
        let reward = self.reward;
        for acc in &mut self.nodes {
            let value = if acc.node == reward {
                obs.y
            } else {
                obs.bit(acc.node)
            };
            let mut pattern = 0usize;
            for (i, &p) in acc.parents.iter().enumerate() {
                let bit = if p == reward { obs.y } else { obs.bit(p) };
                pattern |= (bit as usize) << i;
            }
            acc.counts[pattern] += 1;
            acc.ones[pattern] += value as u64;
            let d = acc.parents.len();
            for i in 0..d {
                if pattern >> i & 1 == 0 {
                    continue;
                }
                for j in 0..d {
                    if pattern >> j & 1 == 1 {
                        acc.gram[i * d + j] += 1.0;
                    }
                }
            }
        }
    }

    /// Identity-seeded gram matrix of a node, row-major over its parents.
    pub fn gram(&self, node: usize) -> Option<&[f64]> {
        self.nodes
            .iter()
            .find(|a| a.node == node)
            .map(|a| a.gram.as_slice())
    }

    /// Solve the per-node penalized score equations
    /// `sum_i (x_i - f(v_i . theta)) v_i - theta = 0` by damped
    /// Newton-Raphson. The `-theta` term is the prior contributed by the
    /// identity gram seed; for the identity link the root is exactly the
    /// unit-ridge least-squares solution. With no data the fit is the zero
    /// vector.
    pub fn fit(&self, links: &[Link]) -> Result<Vec<Vec<f64>>, EstimationError> {
        let n_total = links.len();
        let mut theta = vec![Vec::new(); n_total];
        for acc in &self.nodes {
            let d = acc.parents.len();
            if d == 0 {
                continue;
            }
            theta[acc.node] = newton_fit(acc, links[acc.node])?;
        }
        Ok(theta)
    }
}

fn score(acc: &NodeAcc, link: Link, theta: &[f64], out: &mut [f64]) {
    let d = theta.len();
    for g in out.iter_mut() {
        *g = 0.0;
    }
    for pattern in 0..acc.counts.len() {
        let c = acc.counts[pattern];
        if c == 0 {
            continue;
        }
        let mut z = 0.0;
        for (i, w) in theta.iter().enumerate() {
            if pattern >> i & 1 == 1 {
                z += w;
            }
        }
        let resid = acc.ones[pattern] as f64 - c as f64 * link.eval(z);
        for (i, g) in out.iter_mut().enumerate().take(d) {
            if pattern >> i & 1 == 1 {
                *g += resid;
            }
        }
    }
    for (g, w) in out.iter_mut().zip(theta.iter()) {
        *g -= w;
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(crate::math::abs(x)))
}

fn newton_fit(acc: &NodeAcc, link: Link) -> Result<Vec<f64>, EstimationError> {
    let d = acc.parents.len();
    let mut theta = vec![0.0f64; d];
    let mut g = vec![0.0f64; d];
    let mut g_next = vec![0.0f64; d];
    score(acc, link, &theta, &mut g);
    for _ in 0..NEWTON_MAX_ITERS {
        let g_norm = max_abs(&g);
        if g_norm <= NEWTON_TOL {
            return Ok(theta);
        }
        // Hessian of the penalized negative score: I + ridge + sum f' v v^T.
        let mut h = vec![0.0f64; d * d];
        for i in 0..d {
            h[i * d + i] = 1.0 + NEWTON_RIDGE;
        }
        for pattern in 0..acc.counts.len() {
            let c = acc.counts[pattern];
            if c == 0 {
                continue;
            }
            let mut z = 0.0;
            for (i, w) in theta.iter().enumerate() {
                if pattern >> i & 1 == 1 {
                    z += w;
                }
            }
            let w = c as f64 * link.deriv(z);
            for i in 0..d {
                if pattern >> i & 1 == 0 {
                    continue;
                }
                for j in 0..d {
                    if pattern >> j & 1 == 1 {
                        h[i * d + j] += w;
                    }
                }
            }
        }
        let dir = solve_linear(&mut h, &g, d)
            .ok_or(EstimationError::NonConvergence { node: acc.node })?;
        // Halving line search on the score norm.
        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, s)| t + step * s)
                .collect();
            score(acc, link, &trial, &mut g_next);
            if max_abs(&g_next) < g_norm {
                theta = trial;
                core::mem::swap(&mut g, &mut g_next);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(EstimationError::NonConvergence { node: acc.node });
        }
    }
    if max_abs(&g) <= NEWTON_TOL {
        Ok(theta)
    } else {
        Err(EstimationError::NonConvergence { node: acc.node })
    }
}

/// Gaussian elimination with partial pivoting; `a` is destroyed.
fn solve_linear(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if crate::math::abs(a[row * n + col]) > crate::math::abs(a[pivot * n + col]) {
                pivot = row;
            }
        }
        if crate::math::abs(a[pivot * n + col]) < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

// ── Observational counters for admissible-sequence estimation ───────────

struct ArmCounters {
    targets: Vec<(usize, bool)>,
    /// Sorted union of the blocks; bit `j` of a z-index is the value of
    /// `union[j]`.
    union: Vec<usize>,
    /// `masks[l]` marks which union bits belong to `Z_1 ∪ .. ∪ Z_l`.
    masks: Vec<u32>,
    t_z: Vec<u64>,
    y_z: Vec<u64>,
    /// Prefix counts per level: rounds matching `(Z_i = z_i, X_i = x_i)` for
    /// `i <= l-1`, keyed by the `U_{l-1}` projection.
    n_l: Vec<Vec<u64>>,
    /// Same rounds keyed by the `U_l` projection (the numerator of `p`).
    num_l: Vec<Vec<u64>>,
}

#[inline]
fn compress(bits: u64, mask: u32) -> usize {
    let mut out = 0usize;
    let mut j = 0;
    let mut m = mask;
    while m != 0 {
        let pos = m.trailing_zeros();
        out |= (((bits >> pos) & 1) as usize) << j;
        j += 1;
        m &= m - 1;
    }
    out
}

impl ArmCounters {
    fn new(action: &Action, seq: &AdmissibleSequence) -> Self {
        let union = seq.union();
        let k = seq.k();
        let pos_of = |node: usize| union.iter().position(|&u| u == node).unwrap();
        let mut masks = vec![0u32; k + 1];
        for l in 1..=k {
            masks[l] = masks[l - 1];
            for &v in &seq.blocks()[l - 1] {
                masks[l] |= 1 << pos_of(v);
            }
        }
        let z_cells = 1usize << union.len();
        ArmCounters {
            targets: action.targets().to_vec(),
            union,
            n_l: (1..=k)
                .map(|l| vec![0; 1 << masks[l - 1].count_ones()])
                .collect(),
            num_l: (1..=k)
                .map(|l| vec![0; 1 << masks[l].count_ones()])
                .collect(),
            masks,
            t_z: vec![0; z_cells],
            y_z: vec![0; z_cells],
        }
    }

    fn update(&mut self, obs: &Observation) {
        let mut z_bits = 0u64;
        for (j, &v) in self.union.iter().enumerate() {
            if obs.bit(v) {
                z_bits |= 1 << j;
            }
        }
        if self.targets.iter().all(|&(v, b)| obs.bit(v) == b) {
            let z = z_bits as usize;
            self.t_z[z] += 1;
            self.y_z[z] += obs.y as u64;
        }
        for l in 1..=self.n_l.len() {
            let prefix_ok = self.targets[..l - 1].iter().all(|&(v, b)| obs.bit(v) == b);
            if prefix_ok {
                self.n_l[l - 1][compress(z_bits, self.masks[l - 1])] += 1;
                self.num_l[l - 1][compress(z_bits, self.masks[l])] += 1;
            }
        }
    }

    fn t_min(&self) -> u64 {
        self.t_z.iter().copied().min().unwrap_or(0)
    }

    /// Plug-in estimate: sum over block assignments of the conditional
    /// reward mean times the chain of conditional block probabilities. Any
    /// assignment with an unseen cell contributes zero; the `T_a = min_z`
    /// gate keeps the radius infinite until every cell has mass.
    fn plugin(&self) -> f64 {
        let k = self.n_l.len();
        let mut total = 0.0;
        'outer: for z in 0..self.t_z.len() {
            if self.t_z[z] == 0 {
                continue;
            }
            let r = self.y_z[z] as f64 / self.t_z[z] as f64;
            let mut prod = 1.0;
            for l in 1..=k {
                let denom = self.n_l[l - 1][compress(z as u64, self.masks[l - 1])];
                if denom == 0 {
                    continue 'outer;
                }
                let numer = self.num_l[l - 1][compress(z as u64, self.masks[l])];
                prod *= numer as f64 / denom as f64;
            }
            total += r * prod;
        }
        total
    }
}

/// Per-arm observational counters, updated only from null-intervention
/// rounds so every conditional is estimated under the observational law.
pub struct ObsCounters {
    arms: Vec<Option<ArmCounters>>,
}

impl ObsCounters {
    /// `sequences[i]` must verify against `actions[i]`; null actions carry
    /// the empty sequence implicitly.
    pub fn new(
        actions: &[Action],
        sequences: &[Option<AdmissibleSequence>],
    ) -> Result<Self, EstimationError> {
        let mut arms = Vec::with_capacity(actions.len());
        for (i, action) in actions.iter().enumerate() {
            if action.is_null() {
                arms.push(Some(ArmCounters::new(action, &AdmissibleSequence::empty())));
                continue;
            }
            match sequences.get(i).and_then(|s| s.as_ref()) {
                Some(seq) => {
                    let nodes: Vec<usize> = action.nodes().collect();
                    if seq.intervened() != nodes {
                        return Err(EstimationError::SequenceMismatch { action: i });
                    }
                    arms.push(Some(ArmCounters::new(action, seq)));
                }
                None => arms.push(None),
            }
        }
        Ok(ObsCounters { arms })
    }

    pub fn has_sequence(&self, arm: usize) -> bool {
        self.arms[arm].is_some()
    }

    /// Fold one observational round into every estimable arm.
    pub fn update(&mut self, obs: &Observation) {
        for arm in self.arms.iter_mut().flatten() {
            arm.update(obs);
        }
    }

    /// `T_a = min_z T_{a,z}`; `None` for arms without a sequence.
    pub fn t_min(&self, arm: usize) -> Option<u64> {
        self.arms[arm].as_ref().map(|a| a.t_min())
    }

    pub fn union_size(&self, arm: usize) -> Option<usize> {
        self.arms[arm].as_ref().map(|a| a.union.len())
    }

    pub fn plugin_estimate(&self, arm: usize) -> Result<f64, EstimationError> {
        match &self.arms[arm] {
            Some(a) => Ok(a.plugin()),
            None => Err(EstimationError::NoSequence { action: arm }),
        }
    }

    /// Diagnostic: total probability mass carried by the chain of `p`
    /// factors, `sum_z prod_l p_{a,z,l}` over assignments with every cell
    /// populated. With fully populated counters this telescopes to at most
    /// one (plus float slack).
    pub fn chain_mass(&self, arm: usize) -> Option<f64> {
        let a = self.arms[arm].as_ref()?;
        let k = a.n_l.len();
        let mut total = 0.0;
        'outer: for z in 0..a.t_z.len() {
            let mut prod = 1.0;
            for l in 1..=k {
                let denom = a.n_l[l - 1][compress(z as u64, a.masks[l - 1])];
                if denom == 0 {
                    continue 'outer;
                }
                let numer = a.num_l[l - 1][compress(z as u64, a.masks[l])];
                prod *= numer as f64 / denom as f64;
            }
            total += prod;
        }
        Some(total)
    }
}
