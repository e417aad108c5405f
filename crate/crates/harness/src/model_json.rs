//! JSON formats for graphs, models, and instances.
//!
//! The graph document is `{nodes: [{name, kind}], edges: [[parent, child]],
//! reward, global?}`. Models extend it with `cpt` (tabular) or
//! `theta`/`links`/`constants`/`noise` (BGLM). CPT and weight vectors are
//! indexed by the node's parent list sorted by node order: bit `i` of a CPT
//! row index is the value of the `i`-th listed parent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use cpe_core::graph::{Action, AdmissibleSequence, CausalGraph, NodeKind};
use cpe_core::scm::{AssumptionConstants, BglmScm, Link, NoiseSpec, ScmModel, TabularScm};

use crate::HarnessError;

fn cfg(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeJson {
    pub name: String,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<(String, String)>,
    pub reward: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstantsJson {
    pub m1: f64,
    pub m2: f64,
    pub kappa: f64,
    pub eta: f64,
    pub c: f64,
    pub d_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseJson {
    None,
    TruncatedUniform { half_width: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelJson {
    pub graph: GraphJson,
    /// "tabular" or "bglm"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpt: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ActionJson {
    /// Ordered (node name, forced bit) pairs; empty for the null
    /// intervention.
    pub targets: Vec<(String, u8)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceJson {
    /// One block of node names per action target, in target order.
    pub blocks: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetaJson {
    pub kind: String,
    pub seed: u64,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceJson {
    pub model: ModelJson,
    pub actions: Vec<ActionJson>,
    pub sequences: Vec<Option<SequenceJson>>,
    pub meta: MetaJson,
}

/// A fully materialized problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: ScmModel,
    pub actions: Vec<Action>,
    pub sequences: Vec<Option<AdmissibleSequence>>,
    pub meta: MetaJson,
}

// ── graph conversions ───────────────────────────────────────────────────

pub fn graph_to_json(graph: &CausalGraph) -> GraphJson {
    GraphJson {
        nodes: (0..graph.n())
            .map(|v| NodeJson {
                name: graph.name(v).to_string(),
                kind: match graph.kind(v) {
                    NodeKind::Observed => "observed",
                    NodeKind::Hidden => "hidden",
                    NodeKind::Reward => "reward",
                }
                .to_string(),
            })
            .collect(),
        edges: graph
            .edges()
            .iter()
            .map(|&(p, c)| (graph.name(p).to_string(), graph.name(c).to_string()))
            .collect(),
        reward: graph.name(graph.reward()).to_string(),
        global: graph.global_node().map(|g| graph.name(g).to_string()),
    }
}

pub fn graph_from_json(json: &GraphJson) -> Result<CausalGraph, HarnessError> {
    if json.nodes.is_empty() {
        return Err(cfg("graph has no nodes (a reward node is required)"));
    }
    let mut kinds = Vec::with_capacity(json.nodes.len());
    let mut names = Vec::with_capacity(json.nodes.len());
    let mut index = BTreeMap::new();
    for (i, node) in json.nodes.iter().enumerate() {
        let kind = match node.kind.as_str() {
            "observed" => NodeKind::Observed,
            "hidden" => NodeKind::Hidden,
            "reward" => NodeKind::Reward,
            other => return Err(cfg(format!("node '{}': unknown kind '{other}'", node.name))),
        };
        if index.insert(node.name.clone(), i).is_some() {
            return Err(cfg(format!("duplicate node name '{}'", node.name)));
        }
        kinds.push(kind);
        names.push(node.name.clone());
    }
    let resolve = |name: &str| -> Result<usize, HarnessError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| cfg(format!("unknown node '{name}'")))
    };
    let mut edges = Vec::with_capacity(json.edges.len());
    for (p, c) in &json.edges {
        edges.push((resolve(p)?, resolve(c)?));
    }
    let reward = resolve(&json.reward)?;
    if kinds[reward] != NodeKind::Reward {
        return Err(cfg(format!(
            "node '{}' is not marked as the reward",
            json.reward
        )));
    }
    let global = json.global.as_deref().map(resolve).transpose()?;
    CausalGraph::with_names(kinds, names, edges, global)
        .map_err(|e| cfg(format!("invalid graph: {e}")))
}

// ── model conversions ───────────────────────────────────────────────────

pub fn model_to_json(model: &ScmModel) -> ModelJson {
    let graph = model.graph();
    let gj = graph_to_json(graph);
    match model {
        ScmModel::Tabular(t) => ModelJson {
            graph: gj,
            kind: "tabular".to_string(),
            cpt: Some(
                (0..graph.n())
                    .map(|v| (graph.name(v).to_string(), t.cpt(v).to_vec()))
                    .collect(),
            ),
            theta: None,
            links: None,
            noise: None,
            constants: None,
        },
        ScmModel::Bglm(b) => ModelJson {
            graph: gj,
            kind: "bglm".to_string(),
            cpt: None,
            theta: Some(
                (0..graph.n())
                    .map(|v| (graph.name(v).to_string(), b.theta()[v].clone()))
                    .collect(),
            ),
            links: Some(
                (0..graph.n())
                    .map(|v| {
                        let l = match b.links()[v] {
                            Link::Identity => "identity",
                            Link::Logistic => "logistic",
                        };
                        (graph.name(v).to_string(), l.to_string())
                    })
                    .collect(),
            ),
            noise: Some(match b.noise() {
                NoiseSpec::None => NoiseJson::None,
                NoiseSpec::TruncatedUniform { half_width } => {
                    NoiseJson::TruncatedUniform { half_width }
                }
            }),
            constants: Some(ConstantsJson {
                m1: b.constants().m1,
                m2: b.constants().m2,
                kappa: b.constants().kappa,
                eta: b.constants().eta,
                c: b.constants().c,
                d_max: b.constants().d_max,
            }),
        },
    }
}

pub fn model_from_json(json: &ModelJson) -> Result<ScmModel, HarnessError> {
    let graph = graph_from_json(&json.graph)?;
    let by_name = |v: usize| graph.name(v).to_string();
    match json.kind.as_str() {
        "tabular" => {
            let tables = json
                .cpt
                .as_ref()
                .ok_or_else(|| cfg("tabular model needs 'cpt'"))?;
            let mut cpt = Vec::with_capacity(graph.n());
            for v in 0..graph.n() {
                let name = by_name(v);
                let rows = tables
                    .get(&name)
                    .ok_or_else(|| cfg(format!("missing cpt for node '{name}'")))?;
                cpt.push(rows.clone());
            }
            TabularScm::new(graph, cpt)
                .map(ScmModel::Tabular)
                .map_err(|e| cfg(format!("invalid tabular model: {e}")))
        }
        "bglm" => {
            let theta_map = json
                .theta
                .as_ref()
                .ok_or_else(|| cfg("bglm model needs 'theta'"))?;
            let links_map = json
                .links
                .as_ref()
                .ok_or_else(|| cfg("bglm model needs 'links'"))?;
            let constants = json
                .constants
                .as_ref()
                .ok_or_else(|| cfg("bglm model needs 'constants'"))?;
            let mut theta = Vec::with_capacity(graph.n());
            let mut links = Vec::with_capacity(graph.n());
            for v in 0..graph.n() {
                let name = by_name(v);
                theta.push(
                    theta_map
                        .get(&name)
                        .ok_or_else(|| cfg(format!("missing theta for node '{name}'")))?
                        .clone(),
                );
                let link = links_map
                    .get(&name)
                    .ok_or_else(|| cfg(format!("missing link for node '{name}'")))?;
                links.push(match link.as_str() {
                    "identity" => Link::Identity,
                    "logistic" => Link::Logistic,
                    other => return Err(cfg(format!("unknown link '{other}'"))),
                });
            }
            let noise = match json.noise {
                None | Some(NoiseJson::None) => NoiseSpec::None,
                Some(NoiseJson::TruncatedUniform { half_width }) => {
                    NoiseSpec::TruncatedUniform { half_width }
                }
            };
            let constants = AssumptionConstants::new(
                constants.m1,
                constants.m2,
                constants.kappa,
                constants.eta,
                constants.c,
                constants.d_max,
            )
            .map_err(|e| cfg(format!("invalid constants: {e}")))?;
            BglmScm::new(graph, theta, links, noise, constants)
                .map(ScmModel::Bglm)
                .map_err(|e| cfg(format!("invalid bglm model: {e}")))
        }
        other => Err(cfg(format!("unknown model kind '{other}'"))),
    }
}

// ── instance conversions ────────────────────────────────────────────────

pub fn instance_to_json(instance: &Instance) -> InstanceJson {
    let graph = instance.model.graph();
    InstanceJson {
        model: model_to_json(&instance.model),
        actions: instance
            .actions
            .iter()
            .map(|a| ActionJson {
                targets: a
                    .targets()
                    .iter()
                    .map(|&(v, b)| (graph.name(v).to_string(), b as u8))
                    .collect(),
            })
            .collect(),
        sequences: instance
            .sequences
            .iter()
            .map(|s| {
                s.as_ref().map(|seq| SequenceJson {
                    blocks: seq
                        .blocks()
                        .iter()
                        .map(|b| b.iter().map(|&v| graph.name(v).to_string()).collect())
                        .collect(),
                })
            })
            .collect(),
        meta: instance.meta.clone(),
    }
}

pub fn instance_from_json(json: &InstanceJson) -> Result<Instance, HarnessError> {
    let model = model_from_json(&json.model)?;
    let graph = model.graph().clone();
    let index: BTreeMap<&str, usize> = (0..graph.n()).map(|v| (graph.name(v), v)).collect();
    let resolve = |name: &str| -> Result<usize, HarnessError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| cfg(format!("unknown node '{name}'")))
    };
    let mut actions = Vec::with_capacity(json.actions.len());
    for a in &json.actions {
        let mut targets = Vec::with_capacity(a.targets.len());
        for (name, bit) in &a.targets {
            targets.push((resolve(name)?, *bit != 0));
        }
        actions
            .push(Action::new(&graph, &targets).map_err(|e| cfg(format!("invalid action: {e}")))?);
    }
    if json.sequences.len() != json.actions.len() {
        return Err(cfg("sequences and actions must align"));
    }
    let mut sequences = Vec::with_capacity(json.sequences.len());
    for (action, seq) in actions.iter().zip(json.sequences.iter()) {
        match seq {
            None => sequences.push(None),
            Some(sj) => {
                let mut blocks = Vec::with_capacity(sj.blocks.len());
                for block in &sj.blocks {
                    let mut nodes = Vec::with_capacity(block.len());
                    for name in block {
                        nodes.push(resolve(name)?);
                    }
                    blocks.push(nodes);
                }
                let intervened: Vec<usize> = action.nodes().collect();
                let seq = AdmissibleSequence::new(&graph, intervened, blocks)
                    .map_err(|e| cfg(format!("invalid sequence: {e}")))?;
                sequences.push(Some(seq));
            }
        }
    }
    Ok(Instance {
        model,
        actions,
        sequences,
        meta: json.meta.clone(),
    })
}

pub fn load_instance(path: &str) -> Result<Instance, HarnessError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| cfg(format!("cannot read '{path}': {e}")))?;
    let json: InstanceJson =
        serde_json::from_str(&text).map_err(|e| cfg(format!("cannot parse '{path}': {e}")))?;
    instance_from_json(&json)
}

pub fn save_instance(instance: &Instance, path: &str) -> Result<(), HarnessError> {
    let json = instance_to_json(instance);
    let text = serde_json::to_string_pretty(&json)
        .map_err(|e| HarnessError::runtime(format!("serialize: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| HarnessError::runtime(format!("cannot write '{path}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_round_trip() {
        let kinds = vec![NodeKind::Observed, NodeKind::Observed, NodeKind::Reward];
        let g = CausalGraph::new(kinds, vec![(0, 1), (1, 2)], Some(0)).unwrap();
        let j = graph_to_json(&g);
        let back = graph_from_json(&j).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn unknown_edge_node_is_config_error() {
        let j = GraphJson {
            nodes: vec![
                NodeJson {
                    name: "X0".into(),
                    kind: "observed".into(),
                },
                NodeJson {
                    name: "Y".into(),
                    kind: "reward".into(),
                },
            ],
            edges: vec![("X0".into(), "Z9".into())],
            reward: "Y".into(),
            global: None,
        };
        assert!(graph_from_json(&j).is_err());
    }

    #[test]
    fn empty_node_list_is_rejected() {
        let j = GraphJson {
            nodes: vec![],
            edges: vec![],
            reward: "Y".into(),
            global: None,
        };
        assert!(graph_from_json(&j).is_err());
    }
}
