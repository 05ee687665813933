//! Failure propagation along the activity graph.
//!
//! A trace starts at one endpoint of an interaction and enumerates every maximal
//! simple path (downstream along edges, upstream against them) up to a node-count
//! bound. Each node after the start contributes a multiplicative gain for the
//! traced category: its declared response, times the damping of any mitigation it
//! carries for that category, times the damping of mitigations on the edge used to
//! reach it. The product classifies the pathway as mitigated, neutral or amplified.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::interactions::{Direction, Interaction};
use crate::lenses::LensCatalog;
use crate::mapping::SpecialisedFailureMode;
use crate::mitigations::{Mitigation, Placement};
use crate::model::{ActionNode, ActivityEdge, Ooda2Model};

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TraceDirection {
    Upstream,
    Downstream,
}

impl fmt::Display for TraceDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceDirection::Upstream => "upstream",
            TraceDirection::Downstream => "downstream",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    Mitigated,
    Neutral,
    Amplified,
}

impl Classification {
    /// Threshold is exactly 1.
    pub fn of(total_gain: f64) -> Self {
        if total_gain < 1.0 {
            Classification::Mitigated
        } else if total_gain > 1.0 {
            Classification::Amplified
        } else {
            Classification::Neutral
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Mitigated => "Mitigated",
            Classification::Neutral => "Neutral",
            Classification::Amplified => "Amplified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePathway {
    /// Interaction id the trace started from.
    pub origin: usize,
    pub mode_category: String,
    pub direction: TraceDirection,
    pub nodes: Vec<String>,
    /// One entry per node after the starting endpoint.
    pub step_gains: Vec<f64>,
    pub total_gain: f64,
    pub classification: Classification,
}

impl TracePathway {
    /// Node pairs in edge direction, i.e. reversed for upstream pathways.
    pub fn edge_pairs(&self) -> Vec<(&str, &str)> {
        self.nodes
            .windows(2)
            .map(|w| match self.direction {
                TraceDirection::Downstream => (w[0].as_str(), w[1].as_str()),
                TraceDirection::Upstream => (w[1].as_str(), w[0].as_str()),
            })
            .collect()
    }
}

struct Graph<'m> {
    nodes: HashMap<&'m str, &'m ActionNode>,
    /// Neighbour lists in edge declaration order, with the edge used.
    next: HashMap<&'m str, Vec<(&'m str, &'m ActivityEdge)>>,
}

impl<'m> Graph<'m> {
    fn new(model: &'m Ooda2Model, direction: TraceDirection) -> Self {
        let nodes: HashMap<&str, &ActionNode> =
            model.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        let mut next: HashMap<&str, Vec<(&str, &ActivityEdge)>> = HashMap::new();
        for edge in &model.edges {
            if !nodes.contains_key(edge.from_node.as_str())
                || !nodes.contains_key(edge.to_node.as_str())
            {
                continue;
            }
            let (a, b) = match direction {
                TraceDirection::Downstream => (edge.from_node.as_str(), edge.to_node.as_str()),
                TraceDirection::Upstream => (edge.to_node.as_str(), edge.from_node.as_str()),
            };
            next.entry(a).or_default().push((b, edge));
        }
        Graph { nodes, next }
    }
}

fn damping_for<'a>(
    ids: &'a [String],
    category: &'a str,
    placement: Placement,
    mitigations: &'a [Mitigation],
) -> impl Iterator<Item = f64> + 'a {
    ids.iter().filter_map(move |id| {
        mitigations
            .iter()
            .find(|m| &m.id == id && m.placement == placement && m.covers(category))
            .map(|m| m.damping)
    })
}

fn step_gain(
    node: &ActionNode,
    via: &ActivityEdge,
    category: &str,
    mitigations: &[Mitigation],
) -> f64 {
    let response = node.response.get(category).map_or(1.0, |g| g.coefficient());
    damping_for(&node.mitigation_ids, category, Placement::Node, mitigations)
        .chain(damping_for(
            &via.mitigation_ids,
            category,
            Placement::Edge,
            mitigations,
        ))
        .fold(response, |gain, d| gain * d)
}

/// Enumerates maximal simple pathways from the interaction endpoint, at most
/// `max_depth` nodes long, sorted by node-id sequence. Mitigation ids that do not
/// resolve in `mitigations` are ignored.
pub fn trace(
    model: &Ooda2Model,
    interaction: &Interaction,
    mode_category: &str,
    direction: TraceDirection,
    max_depth: usize,
    mitigations: &[Mitigation],
) -> Vec<TracePathway> {
    let start = match direction {
        TraceDirection::Downstream => interaction.target.as_str(),
        TraceDirection::Upstream => interaction.source.as_str(),
    };
    let graph = Graph::new(model, direction);
    if !graph.nodes.contains_key(start) {
        return Vec::new();
    }
    let max_depth = max_depth.max(1);

    let mut paths: Vec<(Vec<&str>, Vec<f64>)> = Vec::new();
    let mut path = vec![start];
    let mut gains = Vec::new();
    extend(
        &graph,
        mode_category,
        mitigations,
        max_depth,
        &mut path,
        &mut gains,
        &mut paths,
    );

    let mut out: Vec<TracePathway> = paths
        .into_iter()
        .map(|(nodes, step_gains)| {
            let total_gain = step_gains.iter().product::<f64>();
            TracePathway {
                origin: interaction.i_id,
                mode_category: mode_category.to_owned(),
                direction,
                nodes: nodes.into_iter().map(str::to_owned).collect(),
                step_gains,
                total_gain,
                classification: Classification::of(total_gain),
            }
        })
        .collect();
    out.sort_by(|a, b| a.nodes.cmp(&b.nodes));
    out
}

fn extend<'m>(
    graph: &Graph<'m>,
    category: &str,
    mitigations: &[Mitigation],
    max_depth: usize,
    path: &mut Vec<&'m str>,
    gains: &mut Vec<f64>,
    out: &mut Vec<(Vec<&'m str>, Vec<f64>)>,
) {
    let last = *path.last().expect("path starts non-empty");
    let mut extended = false;
    if path.len() < max_depth {
        for &(next, edge) in graph.next.get(last).map(Vec::as_slice).unwrap_or_default() {
            if path.contains(&next) {
                continue;
            }
            extended = true;
            gains.push(step_gain(graph.nodes[next], edge, category, mitigations));
            path.push(next);
            extend(graph, category, mitigations, max_depth, path, gains, out);
            path.pop();
            gains.pop();
        }
    }
    if !extended {
        out.push((path.clone(), gains.clone()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum InducedMode {
    Disuse,
    Misuse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderEffect {
    pub origin_sfm_id: u32,
    pub induced_mode: InducedMode,
    pub rationale: String,
}

/// Categories whose repeated realisation changes how the operator treats the autonomy.
pub const DEFAULT_SECOND_ORDER_CATEGORIES: [&str; 3] = ["stability", "timely", "uncertainty"];

pub fn derive_second_order(
    sfms: &[SpecialisedFailureMode],
    interactions: &[Interaction],
    catalog: &LensCatalog,
) -> Vec<SecondOrderEffect> {
    derive_second_order_for(
        sfms,
        interactions,
        catalog,
        &DEFAULT_SECOND_ORDER_CATEGORIES,
    )
}

/// Each SFM on a machine-to-human interaction whose mode category is in `triggers`
/// yields a disuse and a misuse effect.
pub fn derive_second_order_for(
    sfms: &[SpecialisedFailureMode],
    interactions: &[Interaction],
    catalog: &LensCatalog,
    triggers: &[&str],
) -> Vec<SecondOrderEffect> {
    let mut out = Vec::new();
    for sfm in sfms {
        let Some(interaction) = interactions.iter().find(|i| i.i_id == sfm.interaction_id) else {
            continue;
        };
        if interaction.direction != Direction::MachineToHuman {
            continue;
        }
        let Some(mode) = catalog.mode(&sfm.generic_mode_id) else {
            continue;
        };
        if !triggers.contains(&mode.category.as_str()) {
            continue;
        }
        out.push(SecondOrderEffect {
            origin_sfm_id: sfm.sfm_id,
            induced_mode: InducedMode::Disuse,
            rationale: format!(
                "Repeated \"{}\" on interaction {} ({}): operator ignores the autonomy",
                sfm.text, interaction.i_id, interaction.name
            ),
        });
        out.push(SecondOrderEffect {
            origin_sfm_id: sfm.sfm_id,
            induced_mode: InducedMode::Misuse,
            rationale: format!(
                "Repeated \"{}\" on interaction {} ({}): operator accepts the output without understanding it",
                sfm.text, interaction.i_id, interaction.name
            ),
        });
    }
    out
}
