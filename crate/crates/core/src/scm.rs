//! Executable structural causal models over binary variables: tabular CPT
//! models (which may include hidden confounders) and binary generalized
//! linear models (BGLM), plus exact enumeration oracles for rewards, joint
//! distributions, reward gaps, and observability scores.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{Action, AdmissibleSequence, CausalGraph, GraphError, NodeKind};
use crate::math;
use crate::rng::Stream;

/// Exact oracles enumerate all node assignments; graphs beyond this size
/// error rather than silently approximate.
pub const ENUM_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum ScmError {
    /// Action target is hidden, the reward, the global node, or unknown.
    ActionDomain(usize),
    TooLarge {
        nodes: usize,
        limit: usize,
    },
    CptSize {
        node: usize,
        expected: usize,
        got: usize,
    },
    ProbOutOfRange {
        node: usize,
    },
    ThetaSize {
        node: usize,
        expected: usize,
        got: usize,
    },
    /// A link value leaves [0, 1] on some parent assignment.
    LinkOutOfRange {
        node: usize,
    },
    /// BGLM graphs cannot contain hidden nodes.
    HiddenNotAllowed,
    NoGlobalNode,
    /// The global node's table must pin it to 1.
    GlobalNotConstant,
    /// Exact oracles are only defined for noise-free models.
    NoisyModel,
    EmptyActionSet,
    BadConstants(&'static str),
    Graph(GraphError),
}

impl From<GraphError> for ScmError {
    fn from(e: GraphError) -> Self {
        ScmError::Graph(e)
    }
}

impl fmt::Display for ScmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScmError::ActionDomain(v) => write!(f, "node {v} is not intervenable"),
            ScmError::TooLarge { nodes, limit } => {
                write!(f, "{nodes} nodes exceeds enumeration limit {limit}")
            }
            ScmError::CptSize {
                node,
                expected,
                got,
            } => {
                write!(
                    f,
                    "cpt for node {node}: expected {expected} rows, got {got}"
                )
            }
            ScmError::ProbOutOfRange { node } => {
                write!(f, "cpt for node {node} has probability outside [0, 1]")
            }
            ScmError::ThetaSize {
                node,
                expected,
                got,
            } => {
                write!(
                    f,
                    "theta for node {node}: expected {expected} weights, got {got}"
                )
            }
            ScmError::LinkOutOfRange { node } => {
                write!(f, "link value for node {node} leaves [0, 1]")
            }
            ScmError::HiddenNotAllowed => write!(f, "BGLM graphs cannot contain hidden nodes"),
            ScmError::NoGlobalNode => write!(f, "model requires a global node"),
            ScmError::GlobalNotConstant => write!(f, "global node must be constant 1"),
            ScmError::NoisyModel => write!(f, "exact oracles require a noise-free model"),
            ScmError::EmptyActionSet => write!(f, "action set is empty"),
            ScmError::BadConstants(what) => write!(f, "bad assumption constants: {what}"),
            ScmError::Graph(e) => write!(f, "{e}"),
        }
    }
}

/// One environment round: values of all observed non-reward nodes (as bits
/// indexed by node id) and the reward bit. Hidden nodes are sampled but not
/// reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub x: u64,
    pub y: bool,
}

impl Observation {
    #[inline]
    pub fn bit(&self, node: usize) -> bool {
        self.x >> node & 1 == 1
    }
}

/// Monotone link functions admitted by the BGLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Logistic,
}

impl Link {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Link::Identity => z,
            Link::Logistic => 1.0 / (1.0 + math::exp(-z)),
        }
    }

    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logistic => {
                let s = self.eval(z);
                s * (1.0 - s)
            }
        }
    }

    /// Exact bound on the first derivative.
    pub fn m1(self) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logistic => 0.25,
        }
    }

    /// Exact bound on the second derivative's magnitude.
    pub fn m2(self) -> f64 {
        match self {
            Link::Identity => 0.0,
            Link::Logistic => 1.0 / (6.0 * math::sqrt(3.0)),
        }
    }

    /// Infimum of the derivative over `|z| <= z_max`.
    pub fn kappa_bound(self, z_max: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logistic => self.deriv(z_max),
        }
    }
}

/// Constants of the GLM regularity assumptions plus the graph's maximum
/// parent count `D`; identity links register (m1, m2) = (1, 0) exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub m1: f64,
    pub m2: f64,
    pub kappa: f64,
    pub eta: f64,
    pub c: f64,
    pub d_max: usize,
}

impl AssumptionConstants {
    pub fn new(
        m1: f64,
        m2: f64,
        kappa: f64,
        eta: f64,
        c: f64,
        d_max: usize,
    ) -> Result<Self, ScmError> {
        if m1.is_nan() || m1 <= 0.0 {
            return Err(ScmError::BadConstants("m1 must be positive"));
        }
        if m2.is_nan() || m2 < 0.0 {
            return Err(ScmError::BadConstants("m2 must be non-negative"));
        }
        if kappa.is_nan() || kappa <= 0.0 {
            return Err(ScmError::BadConstants("kappa must be positive"));
        }
        if eta.is_nan() || eta <= 0.0 {
            return Err(ScmError::BadConstants("eta must be positive"));
        }
        if c.is_nan() || c <= 0.0 {
            return Err(ScmError::BadConstants("c must be positive"));
        }
        if d_max == 0 {
            return Err(ScmError::BadConstants("d_max must be at least 1"));
        }
        Ok(AssumptionConstants {
            m1,
            m2,
            kappa,
            eta,
            c,
            d_max,
        })
    }
}

/// Optional per-node noise on the BGLM success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Zero-mean uniform on `[-half_width, half_width]`, clamped so the
    /// resulting probability stays in [0, 1].
    TruncatedUniform {
        half_width: f64,
    },
}

/// Tabular model: every node (hidden included) carries a table mapping each
/// parent assignment to `P(V = 1 | pa)`.
///
/// Table row index packs the sorted parent list: bit `i` is the value of the
/// `i`-th smallest parent.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularScm {
    graph: CausalGraph,
    cpt: Vec<Vec<f64>>,
}

impl TabularScm {
    pub fn new(graph: CausalGraph, cpt: Vec<Vec<f64>>) -> Result<Self, ScmError> {
        if cpt.len() != graph.n() {
            return Err(ScmError::CptSize {
                node: cpt.len().min(graph.n()),
                expected: graph.n(),
                got: cpt.len(),
            });
        }
        for v in 0..graph.n() {
            let expected = 1usize << graph.parents(v).len();
            if cpt[v].len() != expected {
                return Err(ScmError::CptSize {
                    node: v,
                    expected,
                    got: cpt[v].len(),
                });
            }
            if cpt[v].iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(ScmError::ProbOutOfRange { node: v });
            }
        }
        if let Some(g) = graph.global_node() {
            if cpt[g] != [1.0] {
                return Err(ScmError::GlobalNotConstant);
            }
        }
        Ok(TabularScm { graph, cpt })
    }

    #[inline]
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    #[inline]
    pub fn cpt(&self, node: usize) -> &[f64] {
        &self.cpt[node]
    }

    #[inline]
    fn prob_one(&self, node: usize, bits: u64) -> f64 {
        let mut idx = 0usize;
        for (i, &p) in self.graph.parents(node).iter().enumerate() {
            idx |= (((bits >> p) & 1) as usize) << i;
        }
        self.cpt[node][idx]
    }
}

/// Binary GLM: each node is Bernoulli with success probability
/// `f_X(theta_X · pa(X))`; the graph has no hidden nodes and carries an
/// always-one global node. Weight vectors are indexed like the sorted parent
/// lists.
#[derive(Debug, Clone, PartialEq)]
pub struct BglmScm {
    graph: CausalGraph,
    theta: Vec<Vec<f64>>,
    links: Vec<Link>,
    noise: NoiseSpec,
    constants: AssumptionConstants,
}

impl BglmScm {
    pub fn new(
        graph: CausalGraph,
        theta: Vec<Vec<f64>>,
        links: Vec<Link>,
        noise: NoiseSpec,
        constants: AssumptionConstants,
    ) -> Result<Self, ScmError> {
        if graph.has_hidden() {
            return Err(ScmError::HiddenNotAllowed);
        }
        if graph.global_node().is_none() {
            return Err(ScmError::NoGlobalNode);
        }
        if theta.len() != graph.n() || links.len() != graph.n() {
            return Err(ScmError::ThetaSize {
                node: 0,
                expected: graph.n(),
                got: theta.len().min(links.len()),
            });
        }
        for v in 0..graph.n() {
            let d = graph.parents(v).len();
            if theta[v].len() != d {
                return Err(ScmError::ThetaSize {
                    node: v,
                    expected: d,
                    got: theta[v].len(),
                });
            }
            // Link range over every parent assignment; strictly wider than
            // the reachable set, so valid models always pass.
            for bits in 0u64..(1 << d) {
                let mut z = 0.0;
                for (i, w) in theta[v].iter().enumerate() {
                    if bits >> i & 1 == 1 {
                        z += w;
                    }
                }
                let p = links[v].eval(z);
                if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                    return Err(ScmError::LinkOutOfRange { node: v });
                }
            }
        }
        Ok(BglmScm {
            graph,
            theta,
            links,
            noise,
            constants,
        })
    }

    #[inline]
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    #[inline]
    pub fn theta(&self) -> &[Vec<f64>] {
        &self.theta
    }

    #[inline]
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    #[inline]
    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    #[inline]
    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    #[inline]
    fn prob_one(&self, node: usize, bits: u64) -> f64 {
        if self.graph.global_node() == Some(node) {
            return 1.0;
        }
        bglm_prob_one(&self.graph, &self.links, &self.theta, node, bits)
    }

    /// Derive (m1, m2, kappa, eta, d_max) exactly from the links, weights,
    /// and enumerated observational distribution; `c` is caller-supplied.
    pub fn computed_constants(&self, c: f64) -> Result<AssumptionConstants, ScmError> {
        let g = &self.graph;
        if g.n() > 16 {
            return Err(ScmError::TooLarge {
                nodes: g.n(),
                limit: 16,
            });
        }
        let with_parents: Vec<usize> = (0..g.n()).filter(|&v| !g.parents(v).is_empty()).collect();
        let mut m1 = 0.0f64;
        let mut m2 = 0.0f64;
        let mut kappa = f64::INFINITY;
        for &v in &with_parents {
            let link = self.links[v];
            m1 = m1.max(link.m1());
            m2 = m2.max(link.m2());
            let l1: f64 = self.theta[v].iter().map(|w| math::abs(*w)).sum();
            let z_max = l1 + math::sqrt(self.theta[v].len() as f64);
            kappa = kappa.min(link.kappa_bound(z_max));
        }
        if with_parents.is_empty() {
            kappa = 1.0;
            m1 = 1.0;
        }
        // Full observational joint over all nodes (BGLM has no hidden ones).
        let n = g.n();
        let mut joint = vec![0.0f64; 1 << n];
        for bits in 0u64..(1 << n) {
            let mut p = 1.0;
            for v in 0..n {
                let pv = self.prob_one(v, bits);
                p *= if bits >> v & 1 == 1 { pv } else { 1.0 - pv };
                if p == 0.0 {
                    break;
                }
            }
            joint[bits as usize] = p;
        }
        let mut eta = f64::INFINITY;
        let global = g.global_node();
        for &v in &with_parents {
            for &xp in g.parents(v) {
                if Some(xp) == global {
                    continue;
                }
                let rest: Vec<usize> = g
                    .parents(v)
                    .iter()
                    .copied()
                    .filter(|&p| p != xp && Some(p) != global)
                    .collect();
                for assign in 0u64..(1 << rest.len()) {
                    let mut mass = [0.0f64; 2];
                    'atom: for bits in 0u64..(1 << n) {
                        for (i, &r) in rest.iter().enumerate() {
                            if (bits >> r) & 1 != (assign >> i) & 1 {
                                continue 'atom;
                            }
                        }
                        mass[((bits >> xp) & 1) as usize] += joint[bits as usize];
                    }
                    let total = mass[0] + mass[1];
                    if total > 0.0 {
                        eta = eta.min(mass[0] / total).min(mass[1] / total);
                    }
                }
            }
        }
        if !eta.is_finite() {
            eta = 1.0;
        }
        AssumptionConstants::new(m1, m2, kappa, eta.max(1e-12), c, g.max_parents().max(1))
    }
}

/// Success probability of `node` given the full assignment `bits`, under an
/// arbitrary weight vector; out-of-range link values clamp to [0, 1].
#[inline]
fn bglm_prob_one(
    graph: &CausalGraph,
    links: &[Link],
    theta: &[Vec<f64>],
    node: usize,
    bits: u64,
) -> f64 {
    let mut z = 0.0;
    for (i, &p) in graph.parents(node).iter().enumerate() {
        if bits >> p & 1 == 1 {
            z += theta[node][i];
        }
    }
    links[node].eval(z).clamp(0.0, 1.0)
}

/// Expected reward under `do(S = s)` for an arbitrary weight vector, by
/// exact enumeration of the noise-free BGLM (link values clamped to [0, 1]).
pub fn bglm_sigma(graph: &CausalGraph, links: &[Link], theta: &[Vec<f64>], action: &Action) -> f64 {
    debug_assert!(graph.n() <= ENUM_LIMIT);
    let mut forced_mask = 0u64;
    let mut forced_vals = 0u64;
    for &(v, b) in action.targets() {
        forced_mask |= 1 << v;
        if b {
            forced_vals |= 1 << v;
        }
    }
    let free: Vec<usize> = (0..graph.n())
        .filter(|&v| forced_mask >> v & 1 == 0)
        .collect();
    let mut mu = 0.0;
    for combo in 0u64..(1 << free.len()) {
        let mut bits = forced_vals;
        for (j, &v) in free.iter().enumerate() {
            if combo >> j & 1 == 1 {
                bits |= 1 << v;
            }
        }
        let mut p = 1.0;
        for &v in &free {
            let pv = if graph.global_node() == Some(v) {
                1.0
            } else {
                bglm_prob_one(graph, links, theta, v, bits)
            };
            p *= if bits >> v & 1 == 1 { pv } else { 1.0 - pv };
            if p == 0.0 {
                break;
            }
        }
        if p > 0.0 && bits >> graph.reward() & 1 == 1 {
            mu += p;
        }
    }
    mu
}

/// Exact joint over observed non-reward nodes plus the reward bit, with
/// hidden nodes marginalized out.
///
/// Atom index packs the sorted observed node list (bit `j` = value of the
/// `j`-th observed node) with the reward as the top bit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    nodes: Vec<usize>,
    reward: usize,
    probs: Vec<f64>,
}

impl JointTable {
    #[inline]
    pub fn observed_nodes(&self) -> &[usize] {
        &self.nodes
    }

    #[inline]
    pub fn reward_node(&self) -> usize {
        self.reward
    }

    pub fn atoms(&self) -> impl Iterator<Item = (u64, bool, f64)> + '_ {
        let k = self.nodes.len();
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i as u64 & ((1 << k) - 1), i >> k == 1, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn compact_of(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// Probability of the conjunction of node-value conditions (the reward
    /// node may appear alongside observed nodes) and an optional reward
    /// condition.
    pub fn prob_event(&self, conds: &[(usize, bool)], y: Option<bool>) -> f64 {
        let k = self.nodes.len();
        let mut mask = 0u64;
        let mut want = 0u64;
        for &(node, val) in conds {
            let j = if node == self.reward {
                k
            } else {
                self.compact_of(node)
                    .expect("condition on a non-observed node")
            };
            mask |= 1 << j;
            if val {
                want |= 1 << j;
            }
        }
        if let Some(yv) = y {
            mask |= 1 << k;
            if yv {
                want |= 1 << k;
            }
        }
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as u64) & mask == want)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Conditional mean of the reward given node-value conditions; `None`
    /// when the condition has zero mass.
    pub fn reward_mean_given(&self, conds: &[(usize, bool)]) -> Option<f64> {
        let denom = self.prob_event(conds, None);
        if denom <= 0.0 {
            return None;
        }
        Some(self.prob_event(conds, Some(true)) / denom)
    }
}

/// Reward gaps per arm: the optimum's gap is its lead over the runner-up;
/// every other arm's is its deficit to the optimum. `clamped` applies the
/// `max(gap, epsilon/2)` floor used by hardness sums, and `ranking` sorts
/// action indices by ascending gap (ties by index).
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub clamped: Vec<f64>,
    pub best: usize,
    pub delta_min: f64,
    pub ranking: Vec<usize>,
}

/// A structural causal model of either flavor, behind one sampling and
/// enumeration surface.
#[derive(Debug, Clone, PartialEq)]
pub enum ScmModel {
    Tabular(TabularScm),
    Bglm(BglmScm),
}

impl ScmModel {
    pub fn graph(&self) -> &CausalGraph {
        match self {
            ScmModel::Tabular(m) => m.graph(),
            ScmModel::Bglm(m) => m.graph(),
        }
    }

    /// Noise-free mechanism `P(node = 1 | parents-in-bits)`.
    #[inline]
    pub fn prob_one(&self, node: usize, bits: u64) -> f64 {
        match self {
            ScmModel::Tabular(m) => m.prob_one(node, bits),
            ScmModel::Bglm(m) => m.prob_one(node, bits),
        }
    }

    fn noisy(&self) -> bool {
        matches!(
            self,
            ScmModel::Bglm(m) if m.noise != NoiseSpec::None
        )
    }

    fn check_action(&self, action: &Action) -> Result<(), ScmError> {
        let g = self.graph();
        for &(v, _) in action.targets() {
            let bad = v >= g.n() || g.kind(v) != NodeKind::Observed || g.global_node() == Some(v);
            if bad {
                return Err(ScmError::ActionDomain(v));
            }
        }
        Ok(())
    }

    fn check_size(&self) -> Result<(), ScmError> {
        let n = self.graph().n();
        if n > ENUM_LIMIT {
            return Err(ScmError::TooLarge {
                nodes: n,
                limit: ENUM_LIMIT,
            });
        }
        Ok(())
    }

    /// One interventional round: nodes drawn in topological order, intervened
    /// nodes clamped to their forced bits, hidden nodes sampled but masked
    /// out of the observation.
    pub fn sample(&self, action: &Action, rng: &mut Stream) -> Result<Observation, ScmError> {
        self.check_action(action)?;
        let g = self.graph();
        let mut forced_mask = 0u64;
        let mut forced_vals = 0u64;
        for &(v, b) in action.targets() {
            forced_mask |= 1 << v;
            if b {
                forced_vals |= 1 << v;
            }
        }
        let mut bits = 0u64;
        for &v in g.topo_order() {
            let value = if forced_mask >> v & 1 == 1 {
                forced_vals >> v & 1 == 1
            } else {
                let mut p = self.prob_one(v, bits);
                if let ScmModel::Bglm(m) = self {
                    if let NoiseSpec::TruncatedUniform { half_width } = m.noise {
                        let e = (2.0 * rng.next_f64() - 1.0) * half_width;
                        p = (p + e).clamp(0.0, 1.0);
                    }
                }
                rng.bernoulli(p)
            };
            if value {
                bits |= 1 << v;
            }
        }
        let mut observed_mask = 0u64;
        for v in g.observed_non_reward() {
            observed_mask |= 1 << v;
        }
        Ok(Observation {
            x: bits & observed_mask,
            y: bits >> g.reward() & 1 == 1,
        })
    }

    /// Exact `E[Y | do(S = s)]` by summing over all assignments of
    /// non-intervened nodes (hidden included) under truncated factorization.
    pub fn exact_mu(&self, action: &Action) -> Result<f64, ScmError> {
        self.check_action(action)?;
        self.check_size()?;
        if self.noisy() {
            return Err(ScmError::NoisyModel);
        }
        let g = self.graph();
        let mut forced_mask = 0u64;
        let mut forced_vals = 0u64;
        for &(v, b) in action.targets() {
            forced_mask |= 1 << v;
            if b {
                forced_vals |= 1 << v;
            }
        }
        let free: Vec<usize> = (0..g.n()).filter(|&v| forced_mask >> v & 1 == 0).collect();
        let mut mu = 0.0;
        for combo in 0u64..(1 << free.len()) {
            let mut bits = forced_vals;
            for (j, &v) in free.iter().enumerate() {
                if combo >> j & 1 == 1 {
                    bits |= 1 << v;
                }
            }
            if bits >> g.reward() & 1 == 0 {
                continue;
            }
            let mut p = 1.0;
            for &v in &free {
                let pv = self.prob_one(v, bits);
                p *= if bits >> v & 1 == 1 { pv } else { 1.0 - pv };
                if p == 0.0 {
                    break;
                }
            }
            mu += p;
        }
        Ok(mu)
    }

    /// Exact observational joint over observed nodes (+ reward), hidden
    /// nodes marginalized.
    pub fn exact_joint(&self) -> Result<JointTable, ScmError> {
        self.check_size()?;
        if self.noisy() {
            return Err(ScmError::NoisyModel);
        }
        let g = self.graph();
        let nodes: Vec<usize> = g.observed_non_reward().collect();
        let k = nodes.len();
        let mut probs = vec![0.0f64; 1 << (k + 1)];
        let n = g.n();
        for bits in 0u64..(1 << n) {
            let mut p = 1.0;
            for v in 0..n {
                let pv = self.prob_one(v, bits);
                p *= if bits >> v & 1 == 1 { pv } else { 1.0 - pv };
                if p == 0.0 {
                    break;
                }
            }
            if p == 0.0 {
                continue;
            }
            let mut idx = 0usize;
            for (j, &v) in nodes.iter().enumerate() {
                idx |= (((bits >> v) & 1) as usize) << j;
            }
            idx |= (((bits >> g.reward()) & 1) as usize) << k;
            probs[idx] += p;
        }
        Ok(JointTable {
            nodes,
            reward: g.reward(),
            probs,
        })
    }

    /// Gaps per Eq.-style definition: the optimum is the lowest-index
    /// maximizer; `clamped[a] = max(delta[a], epsilon/2)`.
    pub fn gaps(&self, actions: &[Action], epsilon: f64) -> Result<GapReport, ScmError> {
        if actions.is_empty() {
            return Err(ScmError::EmptyActionSet);
        }
        let mu: Vec<f64> = actions
            .iter()
            .map(|a| self.exact_mu(a))
            .collect::<Result<_, _>>()?;
        Ok(gaps_from_mu(&mu, epsilon))
    }

    /// `q_a` for general graphs: the minimum over block assignments of
    /// `P(S = s, Z_a = z)` under the observational distribution. Actions
    /// without a sequence score 0; the null intervention scores 1.
    pub fn q_general(
        &self,
        action: &Action,
        seq: Option<&AdmissibleSequence>,
    ) -> Result<f64, ScmError> {
        let joint = self.exact_joint()?;
        Ok(q_general_from_joint(&joint, action, seq))
    }
}

/// Gap computation from known means (shared with harness-side reports).
pub fn gaps_from_mu(mu: &[f64], epsilon: f64) -> GapReport {
    let mut best = 0usize;
    for (i, &m) in mu.iter().enumerate() {
        if m > mu[best] {
            best = i;
        }
    }
    let runner_up = mu
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &m)| m)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta: Vec<f64> = mu
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if i == best {
                if runner_up.is_finite() {
                    mu[best] - runner_up
                } else {
                    0.0
                }
            } else {
                mu[best] - m
            }
        })
        .collect();
    let clamped: Vec<f64> = delta.iter().map(|&d| d.max(epsilon / 2.0)).collect();
    let delta_min = delta.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ranking: Vec<usize> = (0..mu.len()).collect();
    ranking.sort_by(|&i, &j| delta[i].partial_cmp(&delta[j]).unwrap().then(i.cmp(&j)));
    GapReport {
        mu: mu.to_vec(),
        delta,
        clamped,
        best,
        delta_min,
        ranking,
    }
}

/// `q_a^{(G)}` evaluated against a precomputed joint.
pub fn q_general_from_joint(
    joint: &JointTable,
    action: &Action,
    seq: Option<&AdmissibleSequence>,
) -> f64 {
    if action.is_null() {
        return 1.0;
    }
    let Some(seq) = seq else { return 0.0 };
    let union = seq.union();
    let mut conds: Vec<(usize, bool)> = action.targets().to_vec();
    let base = conds.len();
    conds.extend(union.iter().map(|&v| (v, false)));
    let mut q = f64::INFINITY;
    for z in 0u64..(1 << union.len()) {
        for (j, &v) in union.iter().enumerate() {
            conds[base + j] = (v, z >> j & 1 == 1);
        }
        q = q.min(joint.prob_event(&conds, None));
    }
    q
}

/// Structural observability score for BGLM: `1 / (len^2 d^3)` where `len`
/// counts nodes on surviving global-to-reward paths. An action that severs
/// every path makes the reward constant, which any data estimates; that
/// degenerate case scores 1.
pub fn q_bglm(graph: &CausalGraph, action: &Action, d_max: usize) -> Result<f64, GraphError> {
    if action.is_null() {
        return Ok(1.0);
    }
    let excluded: Vec<usize> = action.nodes().collect();
    let ell = graph.path_nodes_to_reward(&excluded)?.len();
    if ell == 0 {
        return Ok(1.0);
    }
    let l = ell as f64;
    let d = d_max as f64;
    Ok(1.0 / (l * l * d * d * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;

    fn obs_kinds(n: usize) -> Vec<NodeKind> {
        let mut kinds = vec![NodeKind::Observed; n];
        kinds.push(NodeKind::Reward);
        kinds
    }

    /// X0 -> Y with P(X0=1)=0.5, P(Y=1|X0=1)=0.9, P(Y=1|X0=0)=0.1.
    fn one_parent() -> ScmModel {
        let g = CausalGraph::new(obs_kinds(1), vec![(0, 1)], None).unwrap();
        ScmModel::Tabular(TabularScm::new(g, vec![vec![0.5], vec![0.1, 0.9]]).unwrap())
    }

    #[test]
    fn exact_mu_one_parent_null_action() {
        let m = one_parent();
        let mu = m.exact_mu(&Action::null()).unwrap();
        assert!((mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_mu_interventions() {
        let m = one_parent();
        let g = m.graph().clone();
        let a1 = Action::new(&g, &[(0, true)]).unwrap();
        let a0 = Action::new(&g, &[(0, false)]).unwrap();
        assert!((m.exact_mu(&a1).unwrap() - 0.9).abs() < 1e-12);
        assert!((m.exact_mu(&a0).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn deterministic_model_propagates_exactly() {
        // X0 -> X1 -> Y, all mechanisms deterministic.
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (1, 2)], None).unwrap();
        let m = ScmModel::Tabular(
            TabularScm::new(g, vec![vec![1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        );
        let mut rng = Stream::from_seed(1);
        let o = m.sample(&Action::null(), &mut rng).unwrap();
        assert!(o.bit(0));
        assert!(o.bit(1));
        assert!(!o.y); // Y = NOT X1
        let joint = m.exact_joint().unwrap();
        let mass: Vec<(u64, bool, f64)> = joint.atoms().filter(|&(_, _, p)| p > 0.0).collect();
        assert_eq!(mass, vec![(0b11, false, 1.0)]);
    }

    #[test]
    fn forcing_every_observed_node_pins_x() {
        let m = one_parent();
        let g = m.graph().clone();
        let a = Action::new(&g, &[(0, true)]).unwrap();
        let mut rng = Stream::from_seed(7);
        for _ in 0..20 {
            let o = m.sample(&a, &mut rng).unwrap();
            assert!(o.bit(0));
        }
    }

    #[test]
    fn two_fair_bits_joint() {
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 2)], None).unwrap();
        let m = ScmModel::Tabular(
            TabularScm::new(g, vec![vec![0.5], vec![0.5], vec![0.0, 1.0]]).unwrap(),
        );
        let joint = m.exact_joint().unwrap();
        assert!((joint.total() - 1.0).abs() < 1e-12);
        // X0, X1 independent fair bits
        for (x0, x1) in [(false, false), (false, true), (true, false), (true, true)] {
            let p = joint.prob_event(&[(0, x0), (1, x1)], None);
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_examples() {
        let r = gaps_from_mu(&[0.9, 0.3], 0.0);
        assert_eq!(r.best, 0);
        assert!((r.delta[0] - 0.6).abs() < 1e-12);
        assert!((r.delta[1] - 0.6).abs() < 1e-12);
        let r3 = gaps_from_mu(&[0.9, 0.8, 0.3], 0.0);
        assert!((r3.delta[0] - 0.1).abs() < 1e-12);
        assert!((r3.delta[1] - 0.1).abs() < 1e-12);
        assert!((r3.delta[2] - 0.6).abs() < 1e-12);
        assert_eq!(r3.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn q_general_parallel_and_null() {
        // parallel: X0, X1 -> Y
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 2), (1, 2)], None).unwrap();
        let m = ScmModel::Tabular(
            TabularScm::new(
                g.clone(),
                vec![vec![0.5], vec![0.5], vec![0.1, 0.3, 0.6, 0.9]],
            )
            .unwrap(),
        );
        let a = Action::new(&g, &[(0, true)]).unwrap();
        let seq = AdmissibleSequence::new(&g, vec![0], vec![vec![]]).unwrap();
        let q = m.q_general(&a, Some(&seq)).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
        assert!((m.q_general(&Action::null(), None).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.q_general(&a, None).unwrap(), 0.0);
    }

    #[test]
    fn q_general_chain_hand_enumeration() {
        // X0 -> X1 -> Y; do(X1=1) with Z1 = {X0}:
        // q = min_z P(X1=1, X0=z) = min(0.4*0.2, 0.6*0.7) = 0.08
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (1, 2)], None).unwrap();
        let m = ScmModel::Tabular(
            TabularScm::new(g.clone(), vec![vec![0.6], vec![0.2, 0.7], vec![0.1, 0.8]]).unwrap(),
        );
        let a = Action::new(&g, &[(1, true)]).unwrap();
        let seq = AdmissibleSequence::new(&g, vec![1], vec![vec![0]]).unwrap();
        let q = m.q_general(&a, Some(&seq)).unwrap();
        assert!((q - 0.08).abs() < 1e-12);
    }

    #[test]
    fn q_bglm_closed_form() {
        // global X0 -> X1 -> Y and X0 -> Y: path nodes excluding X1 = {X0, Y}
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (1, 2), (0, 2)], Some(0)).unwrap();
        let a = Action::new(&g, &[(1, true)]).unwrap();
        // ell = 2, with d = 3: q = 1/(4*27)
        assert!((q_bglm(&g, &a, 3).unwrap() - 1.0 / 108.0).abs() < 1e-15);
        // ell = 1, d = 1 => 1 (degenerate-free closed form)
        assert!((q_bglm(&g, &Action::null(), 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_bglm_zero_path_treated_as_one() {
        // global X0 -> X1 -> Y; removing X1 cuts every path.
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (1, 2)], Some(0)).unwrap();
        let a = Action::new(&g, &[(1, true)]).unwrap();
        assert_eq!(q_bglm(&g, &a, 2).unwrap(), 1.0);
    }

    #[test]
    fn bglm_rejects_out_of_range_links() {
        let g = CausalGraph::new(obs_kinds(1), vec![(0, 1)], Some(0)).unwrap();
        let constants = AssumptionConstants::new(1.0, 0.0, 1.0, 0.5, 1.0, 1).unwrap();
        let err = BglmScm::new(
            g,
            vec![vec![], vec![1.4]],
            vec![Link::Identity, Link::Identity],
            NoiseSpec::None,
            constants,
        );
        assert_eq!(err.unwrap_err(), ScmError::LinkOutOfRange { node: 1 });
    }

    #[test]
    fn bglm_sigma_matches_exact_mu() {
        // global X0 -> X1, both -> Y, identity links.
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (0, 2), (1, 2)], Some(0)).unwrap();
        let theta = vec![vec![], vec![0.6], vec![0.2, 0.5]];
        let links = vec![Link::Identity; 3];
        let constants = AssumptionConstants::new(1.0, 0.0, 1.0, 0.4, 1.0, 2).unwrap();
        let m = BglmScm::new(
            g.clone(),
            theta.clone(),
            links.clone(),
            NoiseSpec::None,
            constants,
        )
        .unwrap();
        let model = ScmModel::Bglm(m);
        let a = Action::new(&g, &[(1, true)]).unwrap();
        let mu = model.exact_mu(&a).unwrap();
        let sigma = bglm_sigma(&g, &links, &theta, &a);
        assert!((mu - sigma).abs() < 1e-12);
        assert!((mu - 0.7).abs() < 1e-12); // 0.2 + 0.5
    }

    #[test]
    fn sampling_mean_matches_exact_mu() {
        let m = one_parent();
        let g = m.graph().clone();
        let a = Action::new(&g, &[(0, true)]).unwrap();
        let exact = m.exact_mu(&a).unwrap();
        let mut rng = Stream::from_seed(11);
        let n = 100_000;
        let mut hits = 0u64;
        for _ in 0..n {
            if m.sample(&a, &mut rng).unwrap().y {
                hits += 1;
            }
        }
        let mean = hits as f64 / n as f64;
        let slack = 3.0 * math::sqrt(exact * (1.0 - exact) / n as f64);
        assert!(
            (mean - exact).abs() <= slack,
            "mean {mean} vs exact {exact}"
        );
    }

    #[test]
    fn exact_mu_null_matches_joint_mass() {
        let m = one_parent();
        let mu = m.exact_mu(&Action::null()).unwrap();
        let joint = m.exact_joint().unwrap();
        let mass: f64 = joint
            .atoms()
            .filter(|&(_, y, _)| y)
            .map(|(_, _, p)| p)
            .sum();
        assert!((mu - mass).abs() < 1e-12);
    }

    #[test]
    fn parallel_backdoor_free_identity() {
        // On parallel graphs the do effect equals the conditional mean.
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 2), (1, 2)], None).unwrap();
        let m = ScmModel::Tabular(
            TabularScm::new(
                g.clone(),
                vec![vec![0.3], vec![0.7], vec![0.1, 0.4, 0.5, 0.9]],
            )
            .unwrap(),
        );
        let joint = m.exact_joint().unwrap();
        for (node, val) in [(0usize, true), (0, false), (1, true), (1, false)] {
            let a = Action::new(&g, &[(node, val)]).unwrap();
            let mu = m.exact_mu(&a).unwrap();
            let cond = joint.reward_mean_given(&[(node, val)]).unwrap();
            assert!((mu - cond).abs() < 1e-12, "node {node} val {val}");
        }
    }

    #[test]
    fn computed_constants_identity_model() {
        let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (0, 2), (1, 2)], Some(0)).unwrap();
        let theta = vec![vec![], vec![0.4], vec![0.2, 0.5]];
        let links = vec![Link::Identity; 3];
        let tmp = AssumptionConstants::new(1.0, 0.0, 1.0, 0.5, 1.0, 2).unwrap();
        let m = BglmScm::new(g, theta, links, NoiseSpec::None, tmp).unwrap();
        let k = m.computed_constants(1.0).unwrap();
        assert_eq!(k.m1, 1.0);
        assert_eq!(k.m2, 0.0);
        assert_eq!(k.kappa, 1.0);
        assert_eq!(k.d_max, 2);
        // X1 given nothing else: P(X1=1) = 0.4 -> eta = 0.4
        assert!((k.eta - 0.4).abs() < 1e-12);
    }
}
