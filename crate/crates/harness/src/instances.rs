//! Instance generators: the three benchmark experiment families, plus
//! parallel, two-layer, collaborative, causal-tree, and lower-bound-class
//! instances. Every generated admissible sequence is verified before the
//! instance is returned; the null intervention is always action 0.

use serde::Deserialize;
use serde_json::Value;

use cpe_core::graph::{
    construct_admissible_sequence_no_hidden, verify_admissible_sequence, Action,
    AdmissibleSequence, CausalGraph, NodeKind, SequenceVerdict,
};
use cpe_core::rng::Stream;
use cpe_core::scm::{AssumptionConstants, BglmScm, Link, NoiseSpec, ScmModel, TabularScm};

use crate::model_json::{Instance, MetaJson};
use crate::HarnessError;

fn cfg(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn parse_params<T: for<'de> Deserialize<'de>>(params: &Value) -> Result<T, HarnessError> {
    let source = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(source).map_err(|e| cfg(format!("bad params: {e}")))
}

fn meta(kind: &str, seed: u64, params: &Value) -> MetaJson {
    MetaJson {
        kind: kind.to_string(),
        seed,
        params: params.clone(),
    }
}

/// All k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Null intervention plus every sign pattern of every node subset listed.
fn signed_actions(
    graph: &CausalGraph,
    subsets: &[Vec<usize>],
) -> Result<Vec<Action>, HarnessError> {
    let mut actions = vec![Action::null()];
    for subset in subsets {
        for bits in 0u32..(1 << subset.len()) {
            let targets: Vec<(usize, bool)> = subset
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, bits >> i & 1 == 1))
                .collect();
            actions
                .push(Action::new(graph, &targets).map_err(|e| cfg(format!("bad action: {e}")))?);
        }
    }
    Ok(actions)
}

/// Hidden-free instances get their sequences from the parent-set
/// construction; everything is verified regardless of origin.
fn constructed_sequences(
    graph: &CausalGraph,
    actions: &[Action],
) -> Result<Vec<Option<AdmissibleSequence>>, HarnessError> {
    actions
        .iter()
        .map(|a| {
            if a.is_null() {
                return Ok(None);
            }
            let seq = construct_admissible_sequence_no_hidden(graph, a)
                .map_err(|e| cfg(format!("sequence construction: {e}")))?;
            check_sequence(graph, a, seq).map(Some)
        })
        .collect()
}

fn check_sequence(
    graph: &CausalGraph,
    action: &Action,
    seq: AdmissibleSequence,
) -> Result<AdmissibleSequence, HarnessError> {
    match verify_admissible_sequence(graph, action, &seq) {
        Ok(SequenceVerdict::Valid) => Ok(seq),
        Ok(v) => Err(cfg(format!("generated sequence fails verification: {v:?}"))),
        Err(e) => Err(cfg(format!("sequence verification: {e}"))),
    }
}

/// Family-specific candidate blocks pass through verification; actions whose
/// candidates fail become interventional-only arms. Descendants of the
/// remaining targets are dropped from each block up front.
fn verified_or_none(
    graph: &CausalGraph,
    action: &Action,
    mut blocks: Vec<Vec<usize>>,
) -> Option<AdmissibleSequence> {
    let intervened: Vec<usize> = action.nodes().collect();
    for (i, block) in blocks.iter_mut().enumerate() {
        let tail = graph.descendants_mask(&intervened[i..]);
        block.retain(|&v| tail & (1 << v) == 0);
    }
    let seq = AdmissibleSequence::new(graph, intervened, blocks).ok()?;
    match verify_admissible_sequence(graph, action, &seq) {
        Ok(SequenceVerdict::Valid) => Some(seq),
        _ => None,
    }
}

/// Uniform CPT entry away from the extremes.
fn random_prob(rng: &mut Stream) -> f64 {
    0.2 + 0.6 * rng.next_f64()
}

fn random_cpt(graph: &CausalGraph, rng: &mut Stream) -> Vec<Vec<f64>> {
    (0..graph.n())
        .map(|v| {
            (0..(1usize << graph.parents(v).len()))
                .map(|_| random_prob(rng))
                .collect()
        })
        .collect()
}

// ── parallel ────────────────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
struct ParallelParams {
    #[serde(default = "default_parallel_n")]
    n: usize,
    #[serde(default = "default_half")]
    p: f64,
    #[serde(default)]
    p_list: Option<Vec<f64>>,
    /// Optional explicit reward table over the 2^n parent assignments.
    #[serde(default)]
    y_cpt: Option<Vec<f64>>,
}

fn default_parallel_n() -> usize {
    3
}

fn default_half() -> f64 {
    0.5
}

fn parallel(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: ParallelParams = parse_params(params)?;
    let n = p.n;
    if !(1..=12).contains(&n) {
        return Err(cfg("parallel: n must be in 1..=12"));
    }
    let mut kinds = vec![NodeKind::Observed; n];
    kinds.push(NodeKind::Reward);
    let names: Vec<String> = (1..=n)
        .map(|i| format!("X{i}"))
        .chain(std::iter::once("Y".to_string()))
        .collect();
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, n)).collect();
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let ps = match &p.p_list {
        Some(list) if list.len() == n => list.clone(),
        Some(_) => return Err(cfg("parallel: p_list length must equal n")),
        None => vec![p.p; n],
    };
    let mut rng = Stream::derive(seed, 0x706172);
    let y_cpt = match &p.y_cpt {
        Some(t) if t.len() == 1 << n => t.clone(),
        Some(_) => return Err(cfg("parallel: y_cpt must have 2^n rows")),
        None => (0..(1usize << n))
            .map(|_| 0.1 + 0.8 * rng.next_f64())
            .collect(),
    };
    let mut cpt: Vec<Vec<f64>> = ps.iter().map(|&pi| vec![pi]).collect();
    cpt.push(y_cpt);
    let model =
        ScmModel::Tabular(TabularScm::new(graph.clone(), cpt).map_err(|e| cfg(format!("{e}")))?);
    let subsets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let actions = signed_actions(&graph, &subsets)?;
    let sequences = constructed_sequences(&graph, &actions)?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("parallel", seed, params),
    })
}

// ── experiment 1: identity-link BGLM with 3-node all-ones actions ───────

#[derive(Debug, Deserialize)]
struct Experiment1Params {
    #[serde(default = "default_exp1_n")]
    n_observed: usize,
}

fn default_exp1_n() -> usize {
    9
}

fn experiment1(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: Experiment1Params = parse_params(params)?;
    let n = p.n_observed;
    if !(5..=12).contains(&n) {
        return Err(cfg("experiment1: n_observed must be in 5..=12"));
    }
    let mut rng = Stream::derive(seed, 0xe1);
    // Nodes: X0 (global) .. X{n-1}, then Y.
    let mut kinds = vec![NodeKind::Observed; n];
    kinds.push(NodeKind::Reward);
    let names: Vec<String> = (0..n)
        .map(|i| format!("X{i}"))
        .chain(std::iter::once("Y".to_string()))
        .collect();
    let y = n;
    let mut edges = Vec::new();
    let mut theta = vec![Vec::new(); n + 1];
    for i in 1..n {
        // Parents: the global node plus up to two earlier non-global nodes.
        let mut parents = vec![0usize];
        let pool: Vec<usize> = (1..i).collect();
        let extra = pool.len().min(2);
        for &j in rng.choose_distinct(pool.len(), extra).iter() {
            parents.push(pool[j]);
        }
        parents.sort_unstable();
        for &q in &parents {
            edges.push((q, i));
        }
        theta[i] = parents
            .iter()
            .map(|&q| if q == 0 { 0.4 } else { 0.1 })
            .collect();
    }
    // Reward: four random non-global parents, weights 0.3/0.3/0.3/0.05 with
    // the weak coefficient on the largest index.
    let pool: Vec<usize> = (1..n).collect();
    let chosen: Vec<usize> = rng
        .choose_distinct(pool.len(), 4)
        .iter()
        .map(|&j| pool[j])
        .collect();
    for &q in &chosen {
        edges.push((q, y));
    }
    theta[y] = chosen
        .iter()
        .map(|&q| {
            if q == *chosen.last().unwrap() {
                0.05
            } else {
                0.3
            }
        })
        .collect();
    let graph =
        CausalGraph::with_names(kinds, names, edges, Some(0)).map_err(|e| cfg(format!("{e}")))?;
    let links = vec![Link::Identity; n + 1];
    let placeholder = AssumptionConstants::new(1.0, 1e-9, 1.0, 0.4, 1.0, 1).unwrap();
    let bglm = BglmScm::new(
        graph.clone(),
        theta.clone(),
        links.clone(),
        NoiseSpec::None,
        placeholder,
    )
    .map_err(|e| cfg(format!("experiment1 model: {e}")))?;
    let constants = bglm
        .computed_constants(1.0)
        .map_err(|e| cfg(format!("constants: {e}")))?;
    let bglm = BglmScm::new(graph.clone(), theta, links, NoiseSpec::None, constants)
        .map_err(|e| cfg(format!("experiment1 model: {e}")))?;
    let model = ScmModel::Bglm(bglm);
    // Actions: all-ones interventions on 3-subsets of the non-global nodes.
    let subsets: Vec<Vec<usize>> = combinations(n - 1, 3)
        .into_iter()
        .map(|c| c.into_iter().map(|i| i + 1).collect())
        .collect();
    let mut actions = vec![Action::null()];
    for subset in &subsets {
        let targets: Vec<(usize, bool)> = subset.iter().map(|&v| (v, true)).collect();
        actions.push(Action::new(&graph, &targets).map_err(|e| cfg(format!("bad action: {e}")))?);
    }
    let sequences = constructed_sequences(&graph, &actions)?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("experiment1", seed, params),
    })
}

// ── experiment 2: branchy tabular reward, pair interventions ────────────

#[derive(Debug, Deserialize)]
struct Experiment2Params {
    #[serde(default = "default_exp2_n")]
    n: usize,
    /// "all" plays every sign pattern per pair; "ones" restricts to
    /// all-ones pairs (a smaller catalog for fixed-budget runs).
    #[serde(default = "default_signs")]
    signs: String,
}

fn default_exp2_n() -> usize {
    7
}

fn default_signs() -> String {
    "all".to_string()
}

fn experiment2(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: Experiment2Params = parse_params(params)?;
    let n = p.n;
    if !(6..=10).contains(&n) {
        return Err(cfg("experiment2: n must be in 6..=10"));
    }
    let mut rng = Stream::derive(seed, 0xe2);
    // Nodes: X1..Xn at indices 0..n-1, then Y.
    let mut kinds = vec![NodeKind::Observed; n];
    kinds.push(NodeKind::Reward);
    let names: Vec<String> = (1..=n)
        .map(|i| format!("X{i}"))
        .chain(std::iter::once("Y".to_string()))
        .collect();
    let y = n;
    let mut edges = Vec::new();
    let mut cpt: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    cpt[0] = vec![0.5];
    // X2 hangs off X1; later nodes get two random earlier parents and favor
    // agreement between them.
    edges.push((0, 1));
    cpt[1] = vec![0.45, 0.55];
    for i in 2..n {
        let picked = rng.choose_distinct(i, 2);
        for &q in &picked {
            edges.push((q, i));
        }
        cpt[i] = vec![0.55, 0.45, 0.45, 0.55];
    }
    // Reward parents X3..Xn (indices 2..n-1); the branch table reads the
    // first four of them.
    let y_parents: Vec<usize> = (2..n).collect();
    for &q in &y_parents {
        edges.push((q, y));
    }
    let k = y_parents.len();
    let mut y_table = vec![0.0; 1 << k];
    for (bits, cell) in y_table.iter_mut().enumerate() {
        let b = |j: usize| bits >> j & 1 == 1;
        *cell = if b(0) && b(1) {
            0.9
        } else if b(2) && b(3) {
            0.7 + 0.05 * b(0) as u8 as f64 + 0.05 * b(1) as u8 as f64
        } else {
            0.0
        };
    }
    cpt[y] = y_table;
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let model = ScmModel::Tabular(
        TabularScm::new(graph.clone(), cpt).map_err(|e| cfg(format!("experiment2 model: {e}")))?,
    );
    let subsets = combinations(n, 2);
    let actions = match p.signs.as_str() {
        "all" => signed_actions(&graph, &subsets)?,
        "ones" => {
            let mut actions = vec![Action::null()];
            for subset in &subsets {
                let targets: Vec<(usize, bool)> = subset.iter().map(|&v| (v, true)).collect();
                actions.push(
                    Action::new(&graph, &targets).map_err(|e| cfg(format!("bad action: {e}")))?,
                );
            }
            actions
        }
        other => return Err(cfg(format!("experiment2: unknown signs '{other}'"))),
    };
    let sequences = constructed_sequences(&graph, &actions)?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("experiment2", seed, params),
    })
}

// ── experiment 3: hidden confounders between covariates and a sink ──────

#[derive(Debug, Deserialize)]
struct Experiment3Params {
    #[serde(default = "default_exp3_n")]
    n: usize,
}

fn default_exp3_n() -> usize {
    4
}

fn experiment3(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: Experiment3Params = parse_params(params)?;
    let n = p.n;
    if !(2..=6).contains(&n) {
        return Err(cfg("experiment3: n must be in 2..=6"));
    }
    let _ = seed; // structure is fixed; kept for meta reproducibility
                  // Nodes: X0..X{n+1} at 0..n+1, Y at n+2, hidden U1..Un after.
    let y = n + 2;
    let u = |j: usize| n + 2 + j; // j in 1..=n
    let mut kinds = vec![NodeKind::Observed; n + 2];
    kinds.push(NodeKind::Reward);
    kinds.extend(std::iter::repeat_n(NodeKind::Hidden, n));
    let names: Vec<String> = (0..=n + 1)
        .map(|i| format!("X{i}"))
        .chain(std::iter::once("Y".to_string()))
        .chain((1..=n).map(|j| format!("U{j}")))
        .collect();
    let mut edges = vec![(1usize, 0usize)];
    for i in 2..=n + 1 {
        edges.push((1, i));
        edges.push((i, y));
    }
    for j in 1..=n {
        edges.push((u(j), j + 1));
        edges.push((u(j), 0));
    }
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let mut cpt: Vec<Vec<f64>> = vec![Vec::new(); graph.n()];
    cpt[1] = vec![0.5];
    for j in 1..=n {
        cpt[u(j)] = vec![0.5];
    }
    // X0 averages the confounders with a small boost from X1.
    {
        let parents = graph.parents(0); // [1, u(1).. u(n)] sorted
        let rows = 1usize << parents.len();
        let mut table = vec![0.0; rows];
        for (bits, cell) in table.iter_mut().enumerate() {
            let x1 = bits & 1 == 1;
            let u_ones = (bits >> 1).count_ones() as f64;
            *cell = (u_ones / n as f64 + 0.1 * x1 as u8 as f64).min(1.0);
        }
        cpt[0] = table;
    }
    for i in 2..=n + 1 {
        // parents sorted: [1, u(i-1)]
        cpt[i] = vec![0.4, 0.4, 0.4, 0.5];
    }
    {
        let parents = graph.parents(y).to_vec(); // [2..=n+1]
        let rows = 1usize << parents.len();
        let mut table = vec![0.0; rows];
        for (bits, cell) in table.iter_mut().enumerate() {
            let b = |j: usize| (bits >> j & 1 == 1) as u8 as f64;
            let mut v = 0.4 * b(0) + 0.4 * b(1);
            for j in 2..parents.len() {
                v += 0.2 / n as f64 * b(j);
            }
            *cell = v;
        }
        cpt[y] = table;
    }
    let model = ScmModel::Tabular(
        TabularScm::new(graph.clone(), cpt).map_err(|e| cfg(format!("experiment3 model: {e}")))?,
    );
    let subsets: Vec<Vec<usize>> = combinations(n, 2)
        .into_iter()
        .map(|c| c.into_iter().map(|i| i + 2).collect())
        .collect();
    let actions = signed_actions(&graph, &subsets)?;
    // X1 blocks the only backdoor into the intervened pair.
    let sequences: Vec<Option<AdmissibleSequence>> = actions
        .iter()
        .map(|a| {
            if a.is_null() {
                return Ok(None);
            }
            let intervened: Vec<usize> = a.nodes().collect();
            let blocks = vec![vec![1usize], vec![]];
            let seq = AdmissibleSequence::new(&graph, intervened, blocks)
                .map_err(|e| cfg(format!("{e}")))?;
            check_sequence(&graph, a, seq).map(Some)
        })
        .collect::<Result<_, _>>()?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("experiment3", seed, params),
    })
}

// ── two-layer graphs: key variables above, intervenable layer below ─────

#[derive(Debug, Deserialize)]
struct TwoLayerParams {
    #[serde(default = "default_two_layer_k")]
    k: usize,
    #[serde(default = "default_two_layer_nb")]
    n_b: usize,
    #[serde(default = "default_two_layer_l")]
    l: usize,
    #[serde(default = "default_edge_p")]
    edge_p: f64,
    #[serde(default = "default_one")]
    confounder_pairs: usize,
}

fn default_two_layer_k() -> usize {
    3
}
fn default_two_layer_nb() -> usize {
    4
}
fn default_two_layer_l() -> usize {
    2
}
fn default_edge_p() -> f64 {
    0.5
}
fn default_one() -> usize {
    1
}

fn two_layer(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: TwoLayerParams = parse_params(params)?;
    let (k, n_b, l) = (p.k, p.n_b, p.l);
    if k == 0 || n_b == 0 || l == 0 || l > n_b || k + n_b > 12 {
        return Err(cfg("two_layer: need 1 <= l <= n_b and k + n_b <= 12"));
    }
    let mut rng = Stream::derive(seed, 0x2a);
    let y = k + n_b;
    let mut kinds = vec![NodeKind::Observed; k + n_b];
    kinds.push(NodeKind::Reward);
    let mut names: Vec<String> = (1..=k).map(|i| format!("A{i}")).collect();
    names.extend((1..=n_b).map(|i| format!("B{i}")));
    names.push("Y".to_string());
    let mut edges = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            if rng.bernoulli(p.edge_p) {
                edges.push((i, j));
            }
        }
    }
    for b in k..k + n_b {
        let mut any = false;
        for a in 0..k {
            if rng.bernoulli(p.edge_p) {
                edges.push((a, b));
                any = true;
            }
        }
        if !any {
            edges.push((rng.gen_range(k as u64) as usize, b));
        }
        edges.push((b, y));
    }
    let mut confounders = 0usize;
    for _ in 0..p.confounder_pairs {
        if k < 2 {
            break;
        }
        let picked = rng.choose_distinct(k, 2);
        let h = kinds.len();
        kinds.push(NodeKind::Hidden);
        names.push(format!("U{}", confounders + 1));
        confounders += 1;
        edges.push((h, picked[0]));
        edges.push((h, picked[1]));
    }
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let cpt = random_cpt(&graph, &mut rng);
    let model = ScmModel::Tabular(
        TabularScm::new(graph.clone(), cpt).map_err(|e| cfg(format!("two_layer model: {e}")))?,
    );
    let mut subsets = Vec::new();
    for size in 1..=l {
        for c in combinations(n_b, size) {
            subsets.push(c.into_iter().map(|i| i + k).collect::<Vec<usize>>());
        }
    }
    let actions = signed_actions(&graph, &subsets)?;
    let adjustment: Vec<usize> = (0..k).collect();
    let sequences: Vec<Option<AdmissibleSequence>> = actions
        .iter()
        .map(|a| {
            if a.is_null() {
                return Ok(None);
            }
            let intervened: Vec<usize> = a.nodes().collect();
            let mut blocks = vec![Vec::new(); intervened.len()];
            blocks[0] = adjustment.clone();
            let seq = AdmissibleSequence::new(&graph, intervened, blocks)
                .map_err(|e| cfg(format!("{e}")))?;
            check_sequence(&graph, a, seq).map(Some)
        })
        .collect::<Result<_, _>>()?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("two_layer", seed, params),
    })
}

// ── collaborative graphs: grouped covariates, one pick per group ────────

#[derive(Debug, Deserialize)]
struct CollaborativeParams {
    #[serde(default = "default_groups")]
    groups: usize,
    #[serde(default = "default_group_size")]
    group_size: usize,
    #[serde(default = "default_collab_d")]
    d: usize,
    #[serde(default = "default_edge_p")]
    edge_p: f64,
    #[serde(default = "default_half")]
    confounder_p: f64,
}

fn default_groups() -> usize {
    3
}
fn default_group_size() -> usize {
    2
}
fn default_collab_d() -> usize {
    2
}

fn collaborative(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: CollaborativeParams = parse_params(params)?;
    let (g_count, size, d) = (p.groups, p.group_size, p.d);
    if g_count == 0 || size == 0 || d == 0 || d > g_count || g_count * size > 10 {
        return Err(cfg(
            "collaborative: need 1 <= d <= groups and groups*group_size <= 10",
        ));
    }
    let mut rng = Stream::derive(seed, 0xc0);
    let n_x = g_count * size;
    let y = n_x;
    let mut kinds = vec![NodeKind::Observed; n_x];
    kinds.push(NodeKind::Reward);
    let mut names: Vec<String> = (0..n_x)
        .map(|v| format!("G{}N{}", v / size + 1, v % size + 1))
        .collect();
    names.push("Y".to_string());
    let mut edges = Vec::new();
    for v in 0..n_x {
        edges.push((v, y));
    }
    for g in 0..g_count {
        let base = g * size;
        for i in 0..size {
            for j in (i + 1)..size {
                if rng.bernoulli(p.edge_p) {
                    edges.push((base + i, base + j));
                }
            }
        }
    }
    let mut hidden = 0usize;
    for g in 0..g_count {
        if size >= 2 && rng.bernoulli(p.confounder_p) {
            let picked = rng.choose_distinct(size, 2);
            let h = kinds.len();
            kinds.push(NodeKind::Hidden);
            names.push(format!("U{}", hidden + 1));
            hidden += 1;
            edges.push((h, g * size + picked[0]));
            edges.push((h, g * size + picked[1]));
        }
    }
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let cpt = random_cpt(&graph, &mut rng);
    let model = ScmModel::Tabular(
        TabularScm::new(graph.clone(), cpt)
            .map_err(|e| cfg(format!("collaborative model: {e}")))?,
    );
    // One node per chosen group, up to d groups.
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for count in 1..=d {
        for group_combo in combinations(g_count, count) {
            let mut picks: Vec<Vec<usize>> = vec![Vec::new()];
            for &g in &group_combo {
                let mut next = Vec::new();
                for pick in &picks {
                    for node in 0..size {
                        let mut ext = pick.clone();
                        ext.push(g * size + node);
                        next.push(ext);
                    }
                }
                picks = next;
            }
            subsets.extend(picks);
        }
    }
    let actions = signed_actions(&graph, &subsets)?;
    // Candidate adjustment set: every node of every touched group, minus the
    // intervened ones. Interventions whose candidate fails verification
    // (a group-mate downstream of the target, say) stay interventional-only.
    let sequences: Vec<Option<AdmissibleSequence>> = actions
        .iter()
        .map(|a| {
            if a.is_null() {
                return None;
            }
            let intervened: Vec<usize> = a.nodes().collect();
            let mut touched: Vec<usize> = intervened.iter().map(|v| v / size).collect();
            touched.sort_unstable();
            touched.dedup();
            let block: Vec<usize> = touched
                .iter()
                .flat_map(|&g| g * size..(g + 1) * size)
                .filter(|v| !intervened.contains(v))
                .collect();
            let mut blocks = vec![Vec::new(); intervened.len()];
            blocks[0] = block;
            verified_or_none(&graph, a, blocks)
        })
        .collect();
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("collaborative", seed, params),
    })
}

// ── causal tree with two same-layer confounders ─────────────────────────

fn causal_tree(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    // Fixed shape: X1 -> {X2, X3, X4}; X2 -> X5; X3 -> X6; X4 -> {X7, X8};
    // X8 -> Y; confounders X2<->X3 and X7<->X8.
    let x = |i: usize| i - 1;
    let mut kinds = vec![NodeKind::Observed; 8];
    kinds.push(NodeKind::Reward);
    kinds.push(NodeKind::Hidden);
    kinds.push(NodeKind::Hidden);
    let names: Vec<String> = (1..=8)
        .map(|i| format!("X{i}"))
        .chain(["Y".to_string(), "U1".to_string(), "U2".to_string()])
        .collect();
    let edges = vec![
        (x(1), x(2)),
        (x(1), x(3)),
        (x(1), x(4)),
        (x(2), x(5)),
        (x(3), x(6)),
        (x(4), x(7)),
        (x(4), x(8)),
        (x(8), 8),
        (9, x(2)),
        (9, x(3)),
        (10, x(7)),
        (10, x(8)),
    ];
    let graph =
        CausalGraph::with_names(kinds, names, edges, None).map_err(|e| cfg(format!("{e}")))?;
    let mut rng = Stream::derive(seed, 0x7ee);
    let cpt = random_cpt(&graph, &mut rng);
    let model = ScmModel::Tabular(
        TabularScm::new(graph.clone(), cpt).map_err(|e| cfg(format!("causal_tree model: {e}")))?,
    );
    let mut subsets: Vec<Vec<usize>> = (0..8).map(|i| vec![i]).collect();
    subsets.push(vec![x(3), x(4), x(8)]);
    let actions = signed_actions(&graph, &subsets)?;
    // Per-target blocks: the target's confounded companions plus their
    // parents, minus anything already used.
    let component: Vec<Vec<usize>> = vec![
        vec![x(1)],
        vec![x(2), x(3)],
        vec![x(2), x(3)],
        vec![x(4)],
        vec![x(5)],
        vec![x(6)],
        vec![x(7), x(8)],
        vec![x(7), x(8)],
    ];
    let sequences: Vec<Option<AdmissibleSequence>> = actions
        .iter()
        .map(|a| {
            if a.is_null() {
                return Ok(None);
            }
            let intervened: Vec<usize> = a.nodes().collect();
            let mut used: Vec<usize> = intervened.clone();
            let mut blocks = Vec::with_capacity(intervened.len());
            for &t in &intervened {
                let mut block: Vec<usize> = component[t]
                    .iter()
                    .copied()
                    .flat_map(|c| std::iter::once(c).chain(graph.parents(c).iter().copied()))
                    .filter(|v| graph.kind(*v) == NodeKind::Observed && !used.contains(v))
                    .collect();
                block.sort_unstable();
                block.dedup();
                used.extend(block.iter().copied());
                blocks.push(block);
            }
            let seq = AdmissibleSequence::new(&graph, intervened, blocks)
                .map_err(|e| cfg(format!("{e}")))?;
            check_sequence(&graph, a, seq).map(Some)
        })
        .collect::<Result<_, _>>()?;
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: meta("causal_tree", seed, params),
    })
}

// ── lower-bound instance class: parallel, atomic, tight reward band ─────

#[derive(Debug, Deserialize)]
struct LowerBoundParams {
    #[serde(default = "default_lb_n")]
    n: usize,
    #[serde(default = "default_lb_base")]
    base: f64,
    #[serde(default)]
    epsilon: f64,
}

fn default_lb_n() -> usize {
    5
}

fn default_lb_base() -> f64 {
    0.3
}

fn lower_bound_xi(params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    let p: LowerBoundParams = parse_params(params)?;
    let n = p.n;
    if !(2..=8).contains(&n) {
        return Err(cfg("lower_bound_xi: n must be in 2..=8"));
    }
    // Additive per-node contributions keep the conditional reward band
    // narrow, which the class constraints require.
    let coeffs: Vec<f64> = (0..n).map(|i| 0.05 / (1.25f64.powi(i as i32))).collect();
    let mut y_cpt = vec![0.0; 1 << n];
    for (bits, cell) in y_cpt.iter_mut().enumerate() {
        let mut v = p.base;
        for (i, c) in coeffs.iter().enumerate() {
            if bits >> i & 1 == 1 {
                v += c;
            }
        }
        *cell = v;
    }
    let value = serde_json::json!({ "n": n, "p": 0.5, "y_cpt": y_cpt });
    let mut instance = parallel(&value, seed)?;
    instance.meta = meta("lower_bound_xi", seed, params);
    // Class constraints, checked on the exact model.
    let p_min = y_cpt_min(&instance)?;
    let p_max = y_cpt_max(&instance)?;
    let gaps = instance
        .model
        .gaps(&instance.actions, p.epsilon)
        .map_err(|e| HarnessError::runtime(format!("{e}")))?;
    let max_gap = gaps.delta.iter().cloned().fold(0.0f64, f64::max);
    let min_gap = gaps.delta.iter().cloned().fold(f64::INFINITY, f64::min);
    if p_max + 2.0 * max_gap + 2.0 * p.epsilon > 0.9 {
        return Err(cfg("lower_bound_xi: p_max + 2*gap + 2*eps exceeds 0.9"));
    }
    if p_min + min_gap < 0.1 {
        return Err(cfg("lower_bound_xi: p_min + gap_min below 0.1"));
    }
    Ok(instance)
}

fn y_cpt_min(instance: &Instance) -> Result<f64, HarnessError> {
    y_cpt_fold(instance, f64::INFINITY, f64::min)
}

fn y_cpt_max(instance: &Instance) -> Result<f64, HarnessError> {
    y_cpt_fold(instance, 0.0, f64::max)
}

fn y_cpt_fold(
    instance: &Instance,
    init: f64,
    fold: fn(f64, f64) -> f64,
) -> Result<f64, HarnessError> {
    match &instance.model {
        ScmModel::Tabular(t) => {
            let y = t.graph().reward();
            Ok(t.cpt(y).iter().copied().fold(init, fold))
        }
        ScmModel::Bglm(_) => Err(HarnessError::config(
            "lower-bound class requires a tabular model",
        )),
    }
}

/// Generate an instance family by name.
pub fn generate_instance(kind: &str, params: &Value, seed: u64) -> Result<Instance, HarnessError> {
    match kind {
        "parallel" => parallel(params, seed),
        "experiment1" => experiment1(params, seed),
        "experiment2" => experiment2(params, seed),
        "experiment3" => experiment3(params, seed),
        "two_layer" => two_layer(params, seed),
        "collaborative" => collaborative(params, seed),
        "causal_tree" => causal_tree(params, seed),
        "lower_bound_xi" => lower_bound_xi(params, seed),
        other => Err(cfg(format!(
            "unknown instance kind '{other}' (expected parallel, experiment1..3, two_layer, collaborative, causal_tree, lower_bound_xi)"
        ))),
    }
}

/// Names of the extreme conditional reward probabilities of a parallel
/// tabular instance, used by the lower-bound analytics.
pub fn reward_band(instance: &Instance) -> Option<(f64, f64)> {
    match (y_cpt_min(instance), y_cpt_max(instance)) {
        (Ok(lo), Ok(hi)) => Some((lo, hi)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_catalog_shape() {
        let inst = generate_instance("parallel", &serde_json::json!({"n": 3}), 7).unwrap();
        assert_eq!(inst.actions.len(), 7);
        assert!(inst.actions[0].is_null());
        let joint = inst.model.exact_joint().unwrap();
        for (i, a) in inst.actions.iter().enumerate().skip(1) {
            let q = cpe_core::scm::q_general_from_joint(&joint, a, inst.sequences[i].as_ref());
            assert!((q - 0.5).abs() < 1e-12, "q = {q}");
        }
    }

    #[test]
    fn experiment1_catalog_and_sequences() {
        let inst = generate_instance("experiment1", &serde_json::Value::Null, 7).unwrap();
        assert_eq!(inst.model.graph().n_observed(), 9);
        assert_eq!(inst.actions.len(), 57); // null + C(8,3)
        assert!(inst.sequences.iter().skip(1).all(Option::is_some));
        // The optimum forces the three strong reward parents: 0.9 plus the
        // weak parent's residual contribution.
        let gaps = inst.model.gaps(&inst.actions, 0.0).unwrap();
        assert!(gaps.mu[gaps.best] >= 0.9 && gaps.mu[gaps.best] <= 0.95);
        let g = inst.model.graph();
        let strong: Vec<usize> = g
            .parents(g.reward())
            .iter()
            .copied()
            .filter(|&v| v != *g.parents(g.reward()).last().unwrap())
            .collect();
        let targets: Vec<(usize, bool)> = strong.iter().map(|&v| (v, true)).collect();
        let best_action = Action::new(g, &targets).unwrap();
        assert_eq!(inst.actions[gaps.best], best_action);
    }

    #[test]
    fn experiment2_reward_branches() {
        let inst = generate_instance("experiment2", &serde_json::Value::Null, 3).unwrap();
        let g = inst.model.graph().clone();
        // do(X3 = X4 = 1) pins the first reward branch.
        let a = Action::new(&g, &[(2, true), (3, true)]).unwrap();
        assert!((inst.model.exact_mu(&a).unwrap() - 0.9).abs() < 1e-12);
        let gaps = inst.model.gaps(&inst.actions, 0.0).unwrap();
        assert!((gaps.mu[gaps.best] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn experiment3_sequences_verify() {
        let inst = generate_instance("experiment3", &serde_json::json!({"n": 3}), 1).unwrap();
        assert!(inst.model.graph().has_hidden());
        assert!(inst.sequences.iter().skip(1).all(Option::is_some));
    }

    #[test]
    fn tree_and_layer_families_generate() {
        for kind in ["causal_tree", "two_layer", "collaborative"] {
            let inst = generate_instance(kind, &serde_json::Value::Null, 5).unwrap();
            assert!(inst.actions.len() > 1, "{kind}");
            assert!(inst.actions[0].is_null());
            let with_seq = inst.sequences.iter().filter(|s| s.is_some()).count();
            assert!(
                with_seq * 2 >= inst.actions.len(),
                "{kind}: too few sequences"
            );
        }
    }

    #[test]
    fn lower_bound_class_constraints_hold() {
        let inst = generate_instance("lower_bound_xi", &serde_json::Value::Null, 2).unwrap();
        let (lo, hi) = reward_band(&inst).unwrap();
        let gaps = inst.model.gaps(&inst.actions, 0.0).unwrap();
        let max_gap = gaps.delta.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi + 2.0 * max_gap <= 0.9);
        assert!(lo >= 0.1);
    }
}
