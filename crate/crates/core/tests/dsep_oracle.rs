//! d-separation against a brute-force conditional-independence oracle on
//! exactly enumerated joints of random small models.

use cpe_core::graph::{CausalGraph, NodeKind};
use cpe_core::rng::Stream;
use cpe_core::scm::{ScmModel, TabularScm};

const TOL: f64 = 1e-9;

fn random_model(rng: &mut Stream, n_nodes: usize, allow_hidden: bool) -> ScmModel {
    // Edges only point forward, so the last node is a valid reward sink.
    let mut kinds = vec![NodeKind::Observed; n_nodes];
    kinds[n_nodes - 1] = NodeKind::Reward;
    if allow_hidden && n_nodes >= 4 && rng.bernoulli(0.4) {
        kinds[0] = NodeKind::Hidden;
    }
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            if rng.bernoulli(0.5) {
                edges.push((i, j));
            }
        }
    }
    let graph = CausalGraph::new(kinds, edges, None).unwrap();
    let cpt: Vec<Vec<f64>> = (0..n_nodes)
        .map(|v| {
            (0..(1usize << graph.parents(v).len()))
                .map(|_| 0.05 + 0.9 * rng.next_f64())
                .collect()
        })
        .collect();
    ScmModel::Tabular(TabularScm::new(graph, cpt).unwrap())
}

/// True conditional independence of two observed nodes given an observed
/// set, decided on the enumerated joint (hidden nodes marginalized).
fn ci_holds(model: &ScmModel, a: usize, b: usize, given: &[usize]) -> bool {
    let joint = model.exact_joint().unwrap();
    let mut worst = 0.0f64;
    for c_bits in 0u64..(1 << given.len()) {
        let conds: Vec<(usize, bool)> = given
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, c_bits >> i & 1 == 1))
            .collect();
        let p_c = joint.prob_event(&conds, None);
        if p_c <= 1e-12 {
            continue;
        }
        for va in [false, true] {
            for vb in [false, true] {
                let mut c_ab = conds.clone();
                c_ab.push((a, va));
                c_ab.push((b, vb));
                let p_ab = joint.prob_event(&c_ab, None) / p_c;
                let mut c_a = conds.clone();
                c_a.push((a, va));
                let p_a = joint.prob_event(&c_a, None) / p_c;
                let mut c_b = conds.clone();
                c_b.push((b, vb));
                let p_b = joint.prob_event(&c_b, None) / p_c;
                worst = worst.max((p_ab - p_a * p_b).abs());
            }
        }
    }
    worst <= TOL
}

pub fn run_dsep_vs_ci(graph_count: usize, seed: u64) {
    let mut rng = Stream::from_seed(seed);
    let mut checked = 0u64;
    for g in 0..graph_count {
        let n_nodes = 3 + rng.gen_range(3) as usize; // 3..=5
        let model = random_model(&mut rng, n_nodes, true);
        let graph = model.graph().clone();
        let observed: Vec<usize> = (0..graph.n())
            .filter(|&v| graph.kind(v) != NodeKind::Hidden)
            .collect();
        if observed.len() < 2 {
            continue;
        }
        // Every observed pair, with every subset of the remaining observed
        // nodes as the conditioning set.
        for ai in 0..observed.len() {
            for bi in (ai + 1)..observed.len() {
                let (a, b) = (observed[ai], observed[bi]);
                let rest: Vec<usize> = observed
                    .iter()
                    .copied()
                    .filter(|&v| v != a && v != b)
                    .collect();
                for mask in 0u32..(1 << rest.len()) {
                    let given: Vec<usize> = rest
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &v)| v)
                        .collect();
                    let sep = graph.d_separated(&[a], &[b], &given).unwrap();
                    let ci = ci_holds(&model, a, b, &given);
                    assert_eq!(
                        sep, ci,
                        "graph {g}: d-sep({a},{b}|{given:?}) = {sep}, CI = {ci}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 200, "too few queries exercised: {checked}");
}

#[test]
fn dsep_matches_ci_on_random_models() {
    run_dsep_vs_ci(60, 20250615);
}
