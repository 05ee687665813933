//! Human↔machine interaction extraction.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Ooda2Model, Side, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    MachineToHuman,
    HumanToMachine,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::MachineToHuman => "Machine->Human",
            Direction::HumanToMachine => "Human->Machine",
        }
    }

    pub fn from_arrow(s: &str) -> Option<Self> {
        match s {
            "Machine->Human" => Some(Direction::MachineToHuman),
            "Human->Machine" => Some(Direction::HumanToMachine),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.arrow())
    }
}

/// An edge whose endpoints sit on lanes of different sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interaction {
    pub i_id: usize,
    pub edge_id: usize,
    pub name: String,
    pub source: String,
    pub target: String,
    pub direction: Direction,
    pub machine_stage: Stage,
    pub human_stage: Stage,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown interaction {0}")]
pub struct UnknownInteraction(pub usize);

/// Every cross-side edge in declaration order, numbered 1..n. Edges with
/// unresolved endpoints are skipped.
pub fn extract_interactions(model: &Ooda2Model) -> Vec<Interaction> {
    let mut out = Vec::new();
    for edge in &model.edges {
        let (Ok(from), Ok(to)) = (model.node(&edge.from_node), model.node(&edge.to_node)) else {
            continue;
        };
        let (Some(from_side), Some(to_side)) = (model.side_of(&from.id), model.side_of(&to.id))
        else {
            continue;
        };
        if from_side == to_side {
            continue;
        }
        let (direction, machine, human) = match from_side {
            Side::Machine => (Direction::MachineToHuman, from, to),
            Side::Human => (Direction::HumanToMachine, to, from),
        };
        out.push(Interaction {
            i_id: out.len() + 1,
            edge_id: edge.id,
            name: edge.name.clone().unwrap_or_else(|| to.label.clone()),
            source: from.id.clone(),
            target: to.id.clone(),
            direction,
            machine_stage: machine.stage,
            human_stage: human.stage,
        });
    }
    out
}

pub fn interaction_by_id(
    interactions: &[Interaction],
    i_id: usize,
) -> Result<&Interaction, UnknownInteraction> {
    interactions
        .iter()
        .find(|i| i.i_id == i_id)
        .ok_or(UnknownInteraction(i_id))
}
