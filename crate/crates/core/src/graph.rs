//! Causal graph representation: validation, topological order, surgery,
//! d-separation, and admissible-sequence construction/verification.
//!
//! Graphs are DAGs over observed nodes, hidden nodes, and a single reward
//! node `Y`. Node sets are `u64` bitmasks, so graphs are capped at 64 nodes.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

/// Hard cap on graph size; node sets are `u64` bitmasks.
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Observed,
    Hidden,
    Reward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    /// The edge relation has a directed cycle.
    Cycle,
    /// An edge references a node outside the node list.
    DanglingEdge {
        parent: usize,
        child: usize,
    },
    UnknownNode(usize),
    SelfLoop(usize),
    /// d-separation query sets must be pairwise disjoint.
    OverlappingSets(usize),
    NoReward,
    MultipleRewards {
        first: usize,
        second: usize,
    },
    RewardHasChildren(usize),
    GlobalHasParents(usize),
    /// Operation requires a graph without hidden nodes.
    HiddenNodesPresent,
    NoGlobalNode,
    TooManyNodes(usize),
    /// A block contains a hidden node, the reward, or an intervened node.
    BlockContainsForbidden {
        index: usize,
        node: usize,
    },
    /// Blocks and intervened lists have different lengths.
    SequenceShape,
    /// A sequence's intervened list does not match the action's targets.
    IntervenedMismatch,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::Cycle => write!(f, "edge relation has a cycle"),
            GraphError::DanglingEdge { parent, child } => {
                write!(f, "edge ({parent} -> {child}) references an unknown node")
            }
            GraphError::UnknownNode(v) => write!(f, "unknown node {v}"),
            GraphError::SelfLoop(v) => write!(f, "self loop on node {v}"),
            GraphError::OverlappingSets(v) => write!(f, "query sets overlap at node {v}"),
            GraphError::NoReward => write!(f, "graph has no reward node"),
            GraphError::MultipleRewards { first, second } => {
                write!(f, "multiple reward nodes: {first} and {second}")
            }
            GraphError::RewardHasChildren(v) => {
                write!(f, "reward node has outgoing edge to {v}")
            }
            GraphError::GlobalHasParents(v) => {
                write!(f, "global node has incoming edge from {v}")
            }
            GraphError::HiddenNodesPresent => write!(f, "graph contains hidden nodes"),
            GraphError::NoGlobalNode => write!(f, "graph has no global node"),
            GraphError::TooManyNodes(n) => write!(f, "graph has {n} nodes, max {MAX_NODES}"),
            GraphError::BlockContainsForbidden { index, node } => {
                write!(f, "block {index} contains forbidden node {node}")
            }
            GraphError::SequenceShape => write!(f, "blocks and intervened lists differ in length"),
            GraphError::IntervenedMismatch => {
                write!(
                    f,
                    "sequence's intervened nodes do not match the action targets"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionError {
    UnknownNode(usize),
    DuplicateTarget(usize),
    /// Target is hidden, the reward node, or the global node.
    ForbiddenTarget(usize),
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionError::UnknownNode(v) => write!(f, "action targets unknown node {v}"),
            ActionError::DuplicateTarget(v) => write!(f, "action targets node {v} twice"),
            ActionError::ForbiddenTarget(v) => {
                write!(
                    f,
                    "node {v} cannot be intervened (hidden, reward, or global)"
                )
            }
        }
    }
}

/// Deterministic topological order over `n_nodes` nodes; ties broken by
/// ascending node index.
pub fn validate_and_order(
    n_nodes: usize,
    edges: &[(usize, usize)],
) -> Result<Vec<usize>, GraphError> {
    for &(p, c) in edges {
        if p >= n_nodes || c >= n_nodes {
            return Err(GraphError::DanglingEdge {
                parent: p,
                child: c,
            });
        }
        if p == c {
            return Err(GraphError::SelfLoop(p));
        }
    }
    let mut indegree = vec![0usize; n_nodes];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut seen: Vec<(usize, usize)> = edges.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for &(p, c) in &seen {
        indegree[c] += 1;
        children[p].push(c);
    }
    // Kahn's algorithm with a min-heap on node index.
    let mut ready = alloc::collections::BinaryHeap::new();
    for v in 0..n_nodes {
        if indegree[v] == 0 {
            ready.push(core::cmp::Reverse(v));
        }
    }
    let mut order = Vec::with_capacity(n_nodes);
    while let Some(core::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(core::cmp::Reverse(c));
            }
        }
    }
    if order.len() != n_nodes {
        return Err(GraphError::Cycle);
    }
    Ok(order)
}

/// Immutable causal DAG. Exactly one reward node; hidden nodes participate in
/// paths but are never observed or intervened.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    kinds: Vec<NodeKind>,
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    reward: usize,
    global: Option<usize>,
    topo: Vec<usize>,
    topo_pos: Vec<usize>,
    depth: Vec<usize>,
}

impl CausalGraph {
    pub fn new(
        kinds: Vec<NodeKind>,
        edges: Vec<(usize, usize)>,
        global: Option<usize>,
    ) -> Result<Self, GraphError> {
        let names = kinds
            .iter()
            .enumerate()
            .map(|(i, k)| match k {
                NodeKind::Observed => format!("X{i}"),
                NodeKind::Hidden => format!("U{i}"),
                NodeKind::Reward => String::from("Y"),
            })
            .collect();
        Self::with_names(kinds, names, edges, global)
    }

    pub fn with_names(
        kinds: Vec<NodeKind>,
        names: Vec<String>,
        edges: Vec<(usize, usize)>,
        global: Option<usize>,
    ) -> Result<Self, GraphError> {
        let n = kinds.len();
        if n > MAX_NODES {
            return Err(GraphError::TooManyNodes(n));
        }
        debug_assert_eq!(names.len(), n);
        let topo = validate_and_order(n, &edges)?;
        let mut reward = None;
        for (i, k) in kinds.iter().enumerate() {
            if *k == NodeKind::Reward {
                match reward {
                    None => reward = Some(i),
                    Some(first) => return Err(GraphError::MultipleRewards { first, second: i }),
                }
            }
        }
        let reward = reward.ok_or(GraphError::NoReward)?;
        let mut sorted: Vec<(usize, usize)> = edges;
        sorted.sort_unstable();
        sorted.dedup();
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(p, c) in &sorted {
            if p == reward {
                return Err(GraphError::RewardHasChildren(c));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        if let Some(g) = global {
            if g >= n {
                return Err(GraphError::UnknownNode(g));
            }
            if let Some(&p) = parents[g].first() {
                return Err(GraphError::GlobalHasParents(p));
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let mut topo_pos = vec![0usize; n];
        for (pos, &v) in topo.iter().enumerate() {
            topo_pos[v] = pos;
        }
        let mut depth = vec![0usize; n];
        for &v in &topo {
            depth[v] = parents[v].iter().map(|&p| depth[p] + 1).max().unwrap_or(0);
        }
        Ok(CausalGraph {
            kinds,
            names,
            edges: sorted,
            parents,
            children,
            reward,
            global,
            topo,
            topo_pos,
            depth,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn kind(&self, v: usize) -> NodeKind {
        self.kinds[v]
    }

    #[inline]
    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    #[inline]
    pub fn reward(&self) -> usize {
        self.reward
    }

    #[inline]
    pub fn global_node(&self) -> Option<usize> {
        self.global
    }

    #[inline]
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    #[inline]
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Deterministic topological order over all nodes, hidden included.
    #[inline]
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Position of `v` in the topological order.
    #[inline]
    pub fn topo_position(&self, v: usize) -> usize {
        self.topo_pos[v]
    }

    /// Longest-path depth of `v` from the roots; an ancestor is always
    /// strictly shallower than its descendants.
    #[inline]
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn has_hidden(&self) -> bool {
        self.kinds.contains(&NodeKind::Hidden)
    }

    pub fn observed_non_reward(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(|&v| self.kinds[v] == NodeKind::Observed)
    }

    /// Count of observed non-reward nodes (the `n` in the radius formulas).
    pub fn n_observed(&self) -> usize {
        self.observed_non_reward().count()
    }

    /// Largest parent-set size over all nodes (the constant `D`).
    pub fn max_parents(&self) -> usize {
        (0..self.n())
            .map(|v| self.parents[v].len())
            .max()
            .unwrap_or(0)
    }

    fn check_nodes(&self, set: &[usize]) -> Result<(), GraphError> {
        for &v in set {
            if v >= self.n() {
                return Err(GraphError::UnknownNode(v));
            }
        }
        Ok(())
    }

    /// Descendant closure of `seed` (inclusive), as a bitmask.
    pub fn descendants_mask(&self, seed: &[usize]) -> u64 {
        self.reach_mask(seed, false)
    }

    /// Ancestor closure of `seed` (inclusive), as a bitmask.
    pub fn ancestors_mask(&self, seed: &[usize]) -> u64 {
        self.reach_mask(seed, true)
    }

    fn reach_mask(&self, seed: &[usize], up: bool) -> u64 {
        let mut mask = 0u64;
        let mut stack: Vec<usize> = Vec::new();
        for &v in seed {
            if mask & (1 << v) == 0 {
                mask |= 1 << v;
                stack.push(v);
            }
        }
        while let Some(v) = stack.pop() {
            let next = if up {
                &self.parents[v]
            } else {
                &self.children[v]
            };
            for &w in next {
                if mask & (1 << w) == 0 {
                    mask |= 1 << w;
                    stack.push(w);
                }
            }
        }
        mask
    }

    /// Copy with all in-edges of `remove_incoming` and all out-edges of
    /// `remove_outgoing` deleted; the original is untouched.
    pub fn surgery(
        &self,
        remove_incoming: &[usize],
        remove_outgoing: &[usize],
    ) -> Result<CausalGraph, GraphError> {
        self.check_nodes(remove_incoming)?;
        self.check_nodes(remove_outgoing)?;
        let mut in_mask = 0u64;
        let mut out_mask = 0u64;
        for &v in remove_incoming {
            in_mask |= 1 << v;
        }
        for &v in remove_outgoing {
            out_mask |= 1 << v;
        }
        let kept: Vec<(usize, usize)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(p, c)| in_mask & (1 << c) == 0 && out_mask & (1 << p) == 0)
            .collect();
        CausalGraph::with_names(self.kinds.clone(), self.names.clone(), kept, self.global)
    }

    /// d-separation of `set_a` and `set_b` given `given`, by Bayes-ball
    /// reachability in `O(|V| + |E|)`. The three sets must be pairwise
    /// disjoint.
    pub fn d_separated(
        &self,
        set_a: &[usize],
        set_b: &[usize],
        given: &[usize],
    ) -> Result<bool, GraphError> {
        self.check_nodes(set_a)?;
        self.check_nodes(set_b)?;
        self.check_nodes(given)?;
        let mut a_mask = 0u64;
        let mut b_mask = 0u64;
        let mut z_mask = 0u64;
        for &v in set_a {
            a_mask |= 1 << v;
        }
        for &v in set_b {
            b_mask |= 1 << v;
        }
        for &v in given {
            z_mask |= 1 << v;
        }
        if let Some(v) = (0..self.n()).find(|&v| {
            let bit = 1u64 << v;
            (a_mask & bit != 0 && b_mask & bit != 0)
                || (a_mask & bit != 0 && z_mask & bit != 0)
                || (b_mask & bit != 0 && z_mask & bit != 0)
        }) {
            return Err(GraphError::OverlappingSets(v));
        }
        if a_mask == 0 || b_mask == 0 {
            return Ok(true);
        }
        // Ancestors of the conditioning set (inclusive); colliders in this
        // set pass balls upward.
        let anc_z = self.reach_mask(given, true);
        // States: (node, entered-from-child?). Ball starts as if entering
        // each source from a child.
        let mut visited_up = 0u64;
        let mut visited_down = 0u64;
        let mut stack: Vec<(usize, bool)> = set_a.iter().map(|&v| (v, true)).collect();
        while let Some((v, up)) = stack.pop() {
            let bit = 1u64 << v;
            if up {
                if visited_up & bit != 0 {
                    continue;
                }
                visited_up |= bit;
            } else {
                if visited_down & bit != 0 {
                    continue;
                }
                visited_down |= bit;
            }
            if z_mask & bit == 0 && b_mask & bit != 0 {
                return Ok(false);
            }
            if up {
                if z_mask & bit == 0 {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                    for &c in &self.children[v] {
                        stack.push((c, false));
                    }
                }
            } else {
                if z_mask & bit == 0 {
                    for &c in &self.children[v] {
                        stack.push((c, false));
                    }
                }
                if anc_z & bit != 0 {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                }
            }
        }
        Ok(true)
    }

    /// Every node (endpoints included) on at least one directed path from the
    /// global node to the reward that avoids `excluded`.
    pub fn path_nodes_to_reward(&self, excluded: &[usize]) -> Result<Vec<usize>, GraphError> {
        let global = self.global.ok_or(GraphError::NoGlobalNode)?;
        self.check_nodes(excluded)?;
        let mut ex_mask = 0u64;
        for &v in excluded {
            ex_mask |= 1 << v;
        }
        let fwd = self.reach_avoiding(global, ex_mask, false);
        let bwd = self.reach_avoiding(self.reward, ex_mask, true);
        let both = fwd & bwd;
        Ok((0..self.n()).filter(|&v| both & (1 << v) != 0).collect())
    }

    fn reach_avoiding(&self, start: usize, avoid: u64, up: bool) -> u64 {
        if avoid & (1 << start) != 0 {
            return 0;
        }
        let mut mask = 1u64 << start;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let next = if up {
                &self.parents[v]
            } else {
                &self.children[v]
            };
            for &w in next {
                let bit = 1u64 << w;
                if avoid & bit == 0 && mask & bit == 0 {
                    mask |= bit;
                    stack.push(w);
                }
            }
        }
        mask
    }
}

/// An intervention `do(S = s)` over observed non-reward nodes; an empty
/// target list is the null intervention `do()`. Targets are stored in
/// topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    targets: Vec<(usize, bool)>,
}

impl Action {
    /// The null intervention `do()`.
    pub fn null() -> Self {
        Action {
            targets: Vec::new(),
        }
    }

    pub fn new(graph: &CausalGraph, targets: &[(usize, bool)]) -> Result<Self, ActionError> {
        let mut sorted: Vec<(usize, bool)> = targets.to_vec();
        for &(v, _) in &sorted {
            if v >= graph.n() {
                return Err(ActionError::UnknownNode(v));
            }
            let forbidden = graph.kind(v) != NodeKind::Observed || graph.global_node() == Some(v);
            if forbidden {
                return Err(ActionError::ForbiddenTarget(v));
            }
        }
        // Ancestors first; incomparable targets ordered by node index.
        sorted.sort_by_key(|&(v, _)| (graph.depth(v), v));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ActionError::DuplicateTarget(w[0].0));
            }
        }
        Ok(Action { targets: sorted })
    }

    #[inline]
    pub fn is_null(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn targets(&self) -> &[(usize, bool)] {
        &self.targets
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().map(|&(v, _)| v)
    }

    /// Stable 64-bit identity used to key per-action random substreams.
    pub fn key(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &(v, b) in &self.targets {
            h ^= (v as u64) << 1 | b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

/// Ordered blocks `Z_1..Z_k` licensing sequential-backdoor identification of
/// `E[Y | do(S=s)]` from observational data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissibleSequence {
    intervened: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl AdmissibleSequence {
    /// The empty sequence (for the null intervention).
    pub fn empty() -> Self {
        AdmissibleSequence {
            intervened: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn new(
        graph: &CausalGraph,
        intervened: Vec<usize>,
        blocks: Vec<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        if intervened.len() != blocks.len() {
            return Err(GraphError::SequenceShape);
        }
        for &v in &intervened {
            if v >= graph.n() {
                return Err(GraphError::UnknownNode(v));
            }
        }
        let mut blocks: Vec<Vec<usize>> = blocks;
        for (i, block) in blocks.iter_mut().enumerate() {
            block.sort_unstable();
            block.dedup();
            for &v in block.iter() {
                if v >= graph.n() {
                    return Err(GraphError::UnknownNode(v));
                }
                let forbidden = graph.kind(v) != NodeKind::Observed || intervened.contains(&v);
                if forbidden {
                    return Err(GraphError::BlockContainsForbidden {
                        index: i + 1,
                        node: v,
                    });
                }
            }
        }
        Ok(AdmissibleSequence { intervened, blocks })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.intervened.len()
    }

    #[inline]
    pub fn intervened(&self) -> &[usize] {
        &self.intervened
    }

    #[inline]
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Sorted union of all blocks (`Z_a`).
    pub fn union(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    /// `|Z_a|`, the union cardinality.
    pub fn union_size(&self) -> usize {
        self.union().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceVerdict {
    Valid,
    /// First violated condition (1 or 2) and the 1-based block index.
    Violation {
        condition: u8,
        index: usize,
    },
}

/// Check the two admissibility conditions: blocks contain only
/// non-descendants of the remaining targets, and the reward is d-separated
/// from each target in the surgically modified graph (out-edges of the
/// current target and in-edges of the later targets removed).
pub fn verify_admissible_sequence(
    graph: &CausalGraph,
    action: &Action,
    seq: &AdmissibleSequence,
) -> Result<SequenceVerdict, GraphError> {
    let targets: Vec<usize> = action.nodes().collect();
    if targets != seq.intervened() {
        return Err(GraphError::IntervenedMismatch);
    }
    let k = targets.len();
    for i in 0..k {
        let tail = &targets[i..];
        let descendants = graph.descendants_mask(tail);
        if seq.blocks()[i].iter().any(|&v| descendants & (1 << v) != 0) {
            return Ok(SequenceVerdict::Violation {
                condition: 1,
                index: i + 1,
            });
        }
        let modified = graph.surgery(&targets[i + 1..], &targets[i..=i])?;
        let mut given: Vec<usize> = targets[..i].to_vec();
        for block in &seq.blocks()[..=i] {
            given.extend_from_slice(block);
        }
        given.sort_unstable();
        given.dedup();
        let sep = modified.d_separated(&[graph.reward()], &targets[i..=i], &given)?;
        if !sep {
            return Ok(SequenceVerdict::Violation {
                condition: 2,
                index: i + 1,
            });
        }
    }
    Ok(SequenceVerdict::Valid)
}

/// For hidden-free graphs, build the sequence `Z_i = Pa(X_i) \ (Z_1 ∪ .. ∪
/// Z_{i-1} ∪ {X_1..X_{i-1}})` over topologically ordered targets.
pub fn construct_admissible_sequence_no_hidden(
    graph: &CausalGraph,
    action: &Action,
) -> Result<AdmissibleSequence, GraphError> {
    if graph.has_hidden() {
        return Err(GraphError::HiddenNodesPresent);
    }
    // Action targets are already stored topologically.
    let targets: Vec<usize> = action.nodes().collect();
    let mut used = 0u64;
    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(targets.len());
    for (i, &x) in targets.iter().enumerate() {
        let block: Vec<usize> = graph
            .parents(x)
            .iter()
            .copied()
            .filter(|&p| used & (1 << p) == 0 && !targets[..i].contains(&p))
            .collect();
        for &p in &block {
            used |= 1 << p;
        }
        blocks.push(block);
    }
    AdmissibleSequence::new(graph, targets, blocks)
}
