//! Random model generation and brute-force oracles shared by the integration tests.
//! The oracles deliberately avoid the library's own lookup helpers.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use hatrisk::model::{ActionNode, GainBehaviour, Lane, LaneKind, Ooda2Model, Side, Stage};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const CATEGORIES: [&str; 6] = [
    "stability",
    "timely",
    "bias",
    "robustness",
    "misuse",
    "x.y-z",
];
pub const MITIGATIONS: [&str; 3] = ["hysteresis", "odd_margin", "trust_calibration"];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn text(rng: &mut StdRng) -> String {
    const PIECES: [&str; 12] = [
        "Observe",
        "landing",
        " ",
        "sequence",
        "\"quoted\"",
        "back\\slash",
        "a,b",
        "x=y",
        "système",
        "→",
        "#hash",
        "multi\nline",
    ];
    let n = rng.gen_range(0..5);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn gain(rng: &mut StdRng) -> GainBehaviour {
    match rng.gen_range(0..3) {
        0 => GainBehaviour::amplify(1.0 + rng.gen_range(0.001..3.0)).unwrap(),
        1 => GainBehaviour::dampen(rng.gen_range(0.001..0.999)).unwrap(),
        _ => GainBehaviour::neutral(),
    }
}

/// A structurally valid model with up to `max_nodes` nodes and at most two
/// edges per node on average. Cycles are allowed; self-loops are not.
pub fn random_model(rng: &mut StdRng, max_nodes: usize) -> Ooda2Model {
    let mut model = Ooda2Model::new(&text(rng));
    let lane_count = rng.gen_range(1..=4);
    for l in 0..lane_count {
        let kind = *[
            LaneKind::Operator,
            LaneKind::Autonomy,
            LaneKind::Hmi,
            LaneKind::Other,
        ]
        .choose(rng)
        .unwrap();
        let side = kind.required_side().unwrap_or(if rng.gen_bool(0.5) {
            Side::Human
        } else {
            Side::Machine
        });
        model.add_lane(Lane::new(&format!("l{l}"), side, kind, &text(rng)));
    }
    let node_count = rng.gen_range(0..=max_nodes);
    for n in 0..node_count {
        let lane = format!("l{}", rng.gen_range(0..lane_count));
        let stage = *Stage::ALL.choose(rng).unwrap();
        let mut node = ActionNode::new(&format!("n{n}"), &lane, stage, &text(rng));
        for _ in 0..rng.gen_range(0..3) {
            node.response
                .insert(CATEGORIES.choose(rng).unwrap().to_string(), gain(rng));
        }
        if rng.gen_bool(0.2) {
            node.causes
                .push(CATEGORIES.choose(rng).unwrap().to_string());
        }
        if rng.gen_bool(0.2) {
            node.mitigation_ids
                .push(MITIGATIONS.choose(rng).unwrap().to_string());
        }
        model.add_node(node);
    }
    if node_count >= 2 {
        let edge_count = rng.gen_range(0..=2 * node_count);
        for _ in 0..edge_count {
            let from = rng.gen_range(0..node_count);
            let mut to = rng.gen_range(0..node_count - 1);
            if to >= from {
                to += 1;
            }
            let guard = rng.gen_bool(0.2).then(|| text(rng));
            let edge = model.add_edge(&format!("n{from}"), &format!("n{to}"), guard.as_deref());
            if rng.gen_bool(0.1) {
                edge.name = Some(format!("named {from}"));
            }
            if rng.gen_bool(0.1) {
                edge.mitigation_ids.push("hysteresis".to_owned());
            }
        }
    }
    model
}

/// Side of a node, by scanning the declaration lists.
pub fn oracle_side(model: &Ooda2Model, node_id: &str) -> Option<Side> {
    let lane_id = &model.nodes.iter().find(|n| n.id == node_id)?.lane_id;
    Some(model.lanes.iter().find(|l| &l.id == lane_id)?.side)
}

/// Edge ids whose endpoints lie on different sides.
pub fn oracle_cross_side_edges(model: &Ooda2Model) -> Vec<usize> {
    model
        .edges
        .iter()
        .filter(|e| {
            matches!(
                (oracle_side(model, &e.from_node), oracle_side(model, &e.to_node)),
                (Some(a), Some(b)) if a != b
            )
        })
        .map(|e| e.id)
        .collect()
}

/// Nodes reachable from `start` in at most `max_depth - 1` steps, following edges
/// forwards (`forward`) or backwards.
pub fn oracle_reachable(
    model: &Ooda2Model,
    start: &str,
    max_depth: usize,
    forward: bool,
) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.to_owned());
    queue.push_back((start.to_owned(), 1usize));
    while let Some((node, depth)) = queue.pop_front() {
        if depth >= max_depth {
            continue;
        }
        for e in &model.edges {
            let (a, b) = if forward {
                (&e.from_node, &e.to_node)
            } else {
                (&e.to_node, &e.from_node)
            };
            if *a == node && seen.insert(b.clone()) {
                queue.push_back((b.clone(), depth + 1));
            }
        }
    }
    seen
}
