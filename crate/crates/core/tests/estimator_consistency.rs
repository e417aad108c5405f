//! Long-run consistency of the finite-sample estimators: logistic MLE
//! recovery, plug-in do-effect estimation, and the BGLM reward-sensitivity
//! bound checked by Monte Carlo.

use cpe_core::estimation::{MleAccumulator, ObsCounters};
use cpe_core::graph::{construct_admissible_sequence_no_hidden, Action, CausalGraph, NodeKind};
use cpe_core::rng::Stream;
use cpe_core::scm::{
    bglm_sigma, AssumptionConstants, BglmScm, Link, NoiseSpec, ScmModel, TabularScm,
};

fn obs_kinds(n: usize) -> Vec<NodeKind> {
    let mut kinds = vec![NodeKind::Observed; n];
    kinds.push(NodeKind::Reward);
    kinds
}

/// Logistic chain: global X0 -> X1 -> X2 -> Y with X0 feeding every node.
fn logistic_chain() -> (ScmModel, Vec<Vec<f64>>, Vec<Link>) {
    let g = CausalGraph::new(
        obs_kinds(3),
        vec![(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)],
        Some(0),
    )
    .unwrap();
    let theta = vec![vec![], vec![-0.4], vec![0.2, 0.9], vec![-0.3, 1.1]];
    let links = vec![Link::Logistic; 4];
    let constants = AssumptionConstants::new(0.25, 0.1, 0.05, 0.1, 1.0, 2).unwrap();
    let m = BglmScm::new(g, theta.clone(), links.clone(), NoiseSpec::None, constants).unwrap();
    (ScmModel::Bglm(m), theta, links)
}

pub fn run_mle_recovery(samples: u64, seed: u64) -> f64 {
    let (model, theta_true, links) = logistic_chain();
    let mut acc = MleAccumulator::new(model.graph());
    let mut rng = Stream::from_seed(seed);
    let null = Action::null();
    for _ in 0..samples {
        let obs = model.sample(&null, &mut rng).unwrap();
        acc.push(&obs);
    }
    let theta_hat = acc.fit(&links).unwrap();
    let mut worst = 0.0f64;
    for v in 0..theta_true.len() {
        for (a, b) in theta_hat[v].iter().zip(theta_true[v].iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn logistic_mle_recovers_truth() {
    let err = run_mle_recovery(20_000, 31);
    assert!(err <= 0.05, "max |theta_hat - theta| = {err}");
}

pub fn run_plugin_consistency_chain(samples: u64, seed: u64) -> f64 {
    // X0 -> X1 -> Y with moderate conditionals.
    let g = CausalGraph::new(obs_kinds(2), vec![(0, 1), (1, 2)], None).unwrap();
    let model = ScmModel::Tabular(
        TabularScm::new(
            g.clone(),
            vec![vec![0.6], vec![0.25, 0.7], vec![0.15, 0.85]],
        )
        .unwrap(),
    );
    let actions = vec![
        Action::new(&g, &[(1, true)]).unwrap(),
        Action::new(&g, &[(1, false)]).unwrap(),
    ];
    let sequences: Vec<_> = actions
        .iter()
        .map(|a| Some(construct_admissible_sequence_no_hidden(&g, a).unwrap()))
        .collect();
    let mut counters = ObsCounters::new(&actions, &sequences).unwrap();
    let mut rng = Stream::from_seed(seed);
    let null = Action::null();
    for _ in 0..samples {
        let obs = model.sample(&null, &mut rng).unwrap();
        counters.update(&obs);
    }
    let mut worst = 0.0f64;
    for (i, a) in actions.iter().enumerate() {
        let est = counters.plugin_estimate(i).unwrap();
        let exact = model.exact_mu(a).unwrap();
        worst = worst.max((est - exact).abs());
    }
    worst
}

#[test]
fn plugin_estimate_converges_on_chain() {
    let err = run_plugin_consistency_chain(200_000, 17);
    assert!(err <= 0.01, "worst |plugin - exact| = {err}");
}

/// The exact joint matches large-sample empirical frequencies atom by atom.
#[test]
fn exact_joint_matches_sampling_frequencies() {
    let mut rng = Stream::from_seed(2718);
    // 4-node random CPT model: X0 -> X1 -> Y, X0 -> X2 -> Y, X0 -> Y.
    let g = CausalGraph::new(
        obs_kinds(3),
        vec![(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)],
        None,
    )
    .unwrap();
    let cpt: Vec<Vec<f64>> = (0..4)
        .map(|v| {
            (0..(1usize << g.parents(v).len()))
                .map(|_| 0.1 + 0.8 * rng.next_f64())
                .collect()
        })
        .collect();
    let model = ScmModel::Tabular(TabularScm::new(g, cpt).unwrap());
    let joint = model.exact_joint().unwrap();
    let n = 1_000_000u64;
    let mut counts = [0u64; 16];
    let null = Action::null();
    for _ in 0..n {
        let obs = model.sample(&null, &mut rng).unwrap();
        let mut idx = 0usize;
        for (j, &v) in joint.observed_nodes().iter().enumerate() {
            idx |= (obs.bit(v) as usize) << j;
        }
        idx |= (obs.y as usize) << joint.observed_nodes().len();
        counts[idx] += 1;
    }
    for (x, y, p) in joint.atoms() {
        let idx = x as usize | (y as usize) << joint.observed_nodes().len();
        let freq = counts[idx] as f64 / n as f64;
        assert!((freq - p).abs() <= 0.005, "atom {idx}: {freq} vs {p}");
    }
    assert!((joint.total() - 1.0).abs() < 1e-12);
}

/// Reward-sensitivity bound: the exact reward difference between two weight
/// vectors is covered by the sampled sum of parent-value deviations along
/// surviving global-to-reward paths, up to Monte Carlo slack.
#[test]
fn bglm_sensitivity_bound_holds() {
    let g = CausalGraph::new(
        obs_kinds(3),
        vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        Some(0),
    )
    .unwrap();
    let theta = vec![vec![], vec![0.5], vec![0.2, 0.3], vec![0.1, 0.25, 0.4]];
    let links = vec![Link::Identity; 4];
    let constants = AssumptionConstants::new(1.0, 0.0, 1.0, 0.2, 1.0, 3).unwrap();
    let model = ScmModel::Bglm(
        BglmScm::new(
            g.clone(),
            theta.clone(),
            links.clone(),
            NoiseSpec::None,
            constants,
        )
        .unwrap(),
    );
    let mut theta_alt = theta.clone();
    theta_alt[2][0] += 0.03;
    theta_alt[3][1] -= 0.02;
    theta_alt[3][2] += 0.04;

    let action = Action::new(&g, &[(1, true)]).unwrap();
    let lhs = (bglm_sigma(&g, &links, &theta, &action)
        - bglm_sigma(&g, &links, &theta_alt, &action))
    .abs();

    let path_nodes = g.path_nodes_to_reward(&[1]).unwrap();
    let m1 = 1.0;
    let mut rng = Stream::from_seed(5);
    let n = 100_000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let obs = model.sample(&action, &mut rng).unwrap();
        let mut dev = 0.0;
        for &x in &path_nodes {
            let mut dot = 0.0;
            for (i, &p) in g.parents(x).iter().enumerate() {
                let bit = if p == g.reward() { obs.y } else { obs.bit(p) };
                if bit {
                    dot += theta[x][i] - theta_alt[x][i];
                }
            }
            dev += dot.abs() * m1;
        }
        sum += dev;
        sum_sq += dev * dev;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let slack = 3.0 * (var / n as f64).sqrt();
    assert!(
        lhs <= mean + slack,
        "sensitivity bound violated: {lhs} > {mean} + {slack}"
    );
}
