//! OODA² activity-graph data model and structural validation.
//!
//! A model is a set of swimlanes (each on the human or machine side), stage-tagged
//! action nodes living in those lanes, and directed edges between nodes. Cycles are
//! expected: every OODA loop closes on itself.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lenses::LensCatalog;
use crate::mitigations::Mitigation;

/// Where an element was declared. Locations never participate in equality, so a
/// parsed model compares equal to the same model built in memory.
#[derive(Debug, Clone, Default)]
pub struct Location {
    pub file: Option<String>,
    pub line: Option<usize>,
}

impl Location {
    pub fn new(file: Option<&str>, line: usize) -> Self {
        Location {
            file: file.map(str::to_owned),
            line: Some(line),
        }
    }

    pub fn builtin() -> Self {
        Location {
            file: Some("<builtin>".to_owned()),
            line: None,
        }
    }
}

impl PartialEq for Location {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{file}:{line}"),
            (Some(file), None) => f.write_str(file),
            (None, Some(line)) => write!(f, "line {line}"),
            (None, None) => f.write_str("<unknown>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Human,
    Machine,
}

impl Side {
    pub fn token(self) -> &'static str {
        match self {
            Side::Human => "human",
            Side::Machine => "machine",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "human" => Some(Side::Human),
            "machine" => Some(Side::Machine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LaneKind {
    Operator,
    Autonomy,
    Hmi,
    Other,
}

impl LaneKind {
    pub fn token(self) -> &'static str {
        match self {
            LaneKind::Operator => "operator",
            LaneKind::Autonomy => "autonomy",
            LaneKind::Hmi => "hmi",
            LaneKind::Other => "other",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "operator" => Some(LaneKind::Operator),
            "autonomy" => Some(LaneKind::Autonomy),
            "hmi" => Some(LaneKind::Hmi),
            "other" => Some(LaneKind::Other),
            _ => None,
        }
    }

    /// The side a lane of this kind must sit on, if the kind constrains it.
    pub fn required_side(self) -> Option<Side> {
        match self {
            LaneKind::Operator => Some(Side::Human),
            LaneKind::Autonomy | LaneKind::Hmi => Some(Side::Machine),
            LaneKind::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub display_name: String,
    pub side: Side,
    pub kind: LaneKind,
    pub location: Location,
}

impl Lane {
    pub fn new(id: &str, side: Side, kind: LaneKind, display_name: &str) -> Self {
        Lane {
            id: id.to_owned(),
            display_name: display_name.to_owned(),
            side,
            kind,
            location: Location::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Stage {
    Observe,
    Orient,
    Decide,
    Act,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Observe, Stage::Orient, Stage::Decide, Stage::Act];

    /// Cyclic successor: Observe → Orient → Decide → Act → Observe.
    pub fn successor(self) -> Stage {
        match self {
            Stage::Observe => Stage::Orient,
            Stage::Orient => Stage::Decide,
            Stage::Decide => Stage::Act,
            Stage::Act => Stage::Observe,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Stage::Observe => "observe",
            Stage::Orient => "orient",
            Stage::Decide => "decide",
            Stage::Act => "act",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "observe" => Some(Stage::Observe),
            "orient" => Some(Stage::Orient),
            "decide" => Some(Stage::Decide),
            "act" => Some(Stage::Act),
            _ => None,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Stage::Observe => "Observe",
            Stage::Orient => "Orient",
            Stage::Decide => "Decide",
            Stage::Act => "Act",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GainKind {
    Amplify,
    Dampen,
    Neutral,
}

impl GainKind {
    pub fn token(self) -> &'static str {
        match self {
            GainKind::Amplify => "amplify",
            GainKind::Dampen => "dampen",
            GainKind::Neutral => "neutral",
        }
    }
}

pub const DEFAULT_AMPLIFY: f64 = 2.0;
pub const DEFAULT_DAMPEN: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("amplify coefficient must be greater than 1, got {0}")]
    AmplifyTooSmall(f64),
    #[error("dampen coefficient must be in (0, 1), got {0}")]
    DampenOutOfRange(f64),
    #[error("coefficient must be finite, got {0}")]
    NotFinite(f64),
}

/// How a node responds to a failure mode passing through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBehaviour {
    kind: GainKind,
    coefficient: f64,
}

impl GainBehaviour {
    pub fn amplify(coefficient: f64) -> Result<Self, GainError> {
        if !coefficient.is_finite() {
            return Err(GainError::NotFinite(coefficient));
        }
        if coefficient <= 1.0 {
            return Err(GainError::AmplifyTooSmall(coefficient));
        }
        Ok(GainBehaviour {
            kind: GainKind::Amplify,
            coefficient,
        })
    }

    pub fn dampen(coefficient: f64) -> Result<Self, GainError> {
        if !coefficient.is_finite() {
            return Err(GainError::NotFinite(coefficient));
        }
        if coefficient <= 0.0 || coefficient >= 1.0 {
            return Err(GainError::DampenOutOfRange(coefficient));
        }
        Ok(GainBehaviour {
            kind: GainKind::Dampen,
            coefficient,
        })
    }

    pub fn neutral() -> Self {
        GainBehaviour {
            kind: GainKind::Neutral,
            coefficient: 1.0,
        }
    }

    pub fn kind(&self) -> GainKind {
        self.kind
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode {
    pub id: String,
    pub lane_id: String,
    pub stage: Stage,
    pub label: String,
    /// Gain per failure-mode category.
    pub response: BTreeMap<String, GainBehaviour>,
    /// Failure-mode categories this node is a known upstream cause of.
    pub causes: Vec<String>,
    pub mitigation_ids: Vec<String>,
    pub location: Location,
}

impl ActionNode {
    pub fn new(id: &str, lane_id: &str, stage: Stage, label: &str) -> Self {
        ActionNode {
            id: id.to_owned(),
            lane_id: lane_id.to_owned(),
            stage,
            label: label.to_owned(),
            response: BTreeMap::new(),
            causes: Vec::new(),
            mitigation_ids: Vec::new(),
            location: Location::default(),
        }
    }

    pub fn with_response(mut self, category: &str, gain: GainBehaviour) -> Self {
        self.response.insert(category.to_owned(), gain);
        self
    }

    pub fn with_cause(mut self, category: &str) -> Self {
        self.causes.push(category.to_owned());
        self
    }

    pub fn with_mitigation(mut self, id: &str) -> Self {
        self.mitigation_ids.push(id.to_owned());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEdge {
    /// 1-based, assigned in declaration order.
    pub id: usize,
    pub from_node: String,
    pub to_node: String,
    pub guard: Option<String>,
    /// Overrides the interaction name when the edge crosses sides.
    pub name: Option<String>,
    pub mitigation_ids: Vec<String>,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ooda2Model {
    pub name: String,
    pub lanes: Vec<Lane>,
    pub nodes: Vec<ActionNode>,
    pub edges: Vec<ActivityEdge>,
    pub location: Location,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown lane `{0}`")]
    UnknownLane(String),
}

impl Ooda2Model {
    pub fn new(name: &str) -> Self {
        Ooda2Model {
            name: name.to_owned(),
            ..Default::default()
        }
    }

    pub fn add_lane(&mut self, lane: Lane) -> &mut Self {
        self.lanes.push(lane);
        self
    }

    pub fn add_node(&mut self, node: ActionNode) -> &mut Self {
        self.nodes.push(node);
        self
    }

    /// Appends an edge, assigning the next declaration-order id.
    pub fn add_edge(&mut self, from: &str, to: &str, guard: Option<&str>) -> &mut ActivityEdge {
        let id = self.edges.len() + 1;
        self.edges.push(ActivityEdge {
            id,
            from_node: from.to_owned(),
            to_node: to.to_owned(),
            guard: guard.map(str::to_owned),
            name: None,
            mitigation_ids: Vec::new(),
            location: Location::default(),
        });
        self.edges.last_mut().expect("just pushed")
    }

    pub fn node(&self, id: &str) -> Result<&ActionNode, ModelError> {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .ok_or_else(|| ModelError::UnknownNode(id.to_owned()))
    }

    pub fn lane(&self, id: &str) -> Result<&Lane, ModelError> {
        self.lanes
            .iter()
            .find(|l| l.id == id)
            .ok_or_else(|| ModelError::UnknownLane(id.to_owned()))
    }

    /// Side of the lane holding `node_id`, if both resolve.
    pub fn side_of(&self, node_id: &str) -> Option<Side> {
        let node = self.node(node_id).ok()?;
        self.lane(&node.lane_id).ok().map(|l| l.side)
    }

    pub fn edge_between(&self, from: &str, to: &str) -> Option<&ActivityEdge> {
        self.edges
            .iter()
            .find(|e| e.from_node == from && e.to_node == to)
    }
}

/// Looks up a node by id.
pub fn node_lookup<'m>(model: &'m Ooda2Model, id: &str) -> Result<&'m ActionNode, ModelError> {
    model.node(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleCode {
    DuplicateLane,
    DuplicateNode,
    LaneKindSide,
    UnresolvedLane,
    UnresolvedNode,
    SelfLoop,
    UnknownCategory,
    UnknownMitigation,
    ObserveTarget,
    StageOrder,
    NoInteractions,
}

impl RuleCode {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleCode::DuplicateLane => "DUPLICATE_LANE",
            RuleCode::DuplicateNode => "DUPLICATE_NODE",
            RuleCode::LaneKindSide => "LANE_KIND_SIDE",
            RuleCode::UnresolvedLane => "UNRESOLVED_LANE",
            RuleCode::UnresolvedNode => "UNRESOLVED_NODE",
            RuleCode::SelfLoop => "SELF_LOOP",
            RuleCode::UnknownCategory => "UNKNOWN_CATEGORY",
            RuleCode::UnknownMitigation => "UNKNOWN_MITIGATION",
            RuleCode::ObserveTarget => "OBSERVE_TARGET",
            RuleCode::StageOrder => "STAGE_ORDER",
            RuleCode::NoInteractions => "NO_INTERACTIONS",
        }
    }
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: RuleCode,
    pub message: String,
    pub location: Location,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}[{}]: {}",
            self.location, self.severity, self.code, self.message
        )
    }
}

/// Optional catalogs that widen validation to category and mitigation references.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationContext<'a> {
    pub catalog: Option<&'a LensCatalog>,
    pub mitigations: Option<&'a [Mitigation]>,
}

/// Structural validation without catalog cross-checks.
pub fn validate(model: &Ooda2Model, strictness: Strictness) -> Vec<Diagnostic> {
    validate_with(model, strictness, ValidationContext::default())
}

pub fn validate_with(
    model: &Ooda2Model,
    strictness: Strictness,
    ctx: ValidationContext<'_>,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut push = |severity, code, location: &Location, message: String| {
        diags.push(Diagnostic {
            severity,
            code,
            message,
            location: location.clone(),
        })
    };

    let mut lanes: HashMap<&str, &Lane> = HashMap::new();
    for lane in &model.lanes {
        if lanes.insert(lane.id.as_str(), lane).is_some() {
            push(
                Severity::Error,
                RuleCode::DuplicateLane,
                &lane.location,
                format!("lane `{}` is declared more than once", lane.id),
            );
        }
        if let Some(required) = lane.kind.required_side() {
            if required != lane.side {
                push(
                    Severity::Error,
                    RuleCode::LaneKindSide,
                    &lane.location,
                    format!(
                        "lane `{}` of kind {} must be on the {} side",
                        lane.id,
                        lane.kind.token(),
                        required.token()
                    ),
                );
            }
        }
    }

    let known_categories: Option<HashSet<&str>> = ctx
        .catalog
        .map(|c| c.modes().map(|m| m.category.as_str()).collect());
    let known_mitigations: Option<HashSet<&str>> = ctx
        .mitigations
        .map(|ms| ms.iter().map(|m| m.id.as_str()).collect());

    let mut nodes: HashMap<&str, &ActionNode> = HashMap::new();
    for node in &model.nodes {
        if nodes.insert(node.id.as_str(), node).is_some() {
            push(
                Severity::Error,
                RuleCode::DuplicateNode,
                &node.location,
                format!("node `{}` is declared more than once", node.id),
            );
        }
        if !lanes.contains_key(node.lane_id.as_str()) {
            push(
                Severity::Error,
                RuleCode::UnresolvedLane,
                &node.location,
                format!(
                    "node `{}` refers to unknown lane `{}`",
                    node.id, node.lane_id
                ),
            );
        }
        if let Some(known) = &known_categories {
            for category in node.response.keys().chain(node.causes.iter()) {
                if !known.contains(category.as_str()) {
                    push(
                        Severity::Error,
                        RuleCode::UnknownCategory,
                        &node.location,
                        format!(
                            "node `{}` refers to unknown failure-mode category `{category}`",
                            node.id
                        ),
                    );
                }
            }
        }
        if let Some(known) = &known_mitigations {
            for id in &node.mitigation_ids {
                if !known.contains(id.as_str()) {
                    push(
                        Severity::Error,
                        RuleCode::UnknownMitigation,
                        &node.location,
                        format!("node `{}` refers to unknown mitigation `{id}`", node.id),
                    );
                }
            }
        }
    }

    let side = |node: &ActionNode| lanes.get(node.lane_id.as_str()).map(|l| l.side);
    let mut crossing = 0usize;
    for edge in &model.edges {
        let from = nodes.get(edge.from_node.as_str()).copied();
        let to = nodes.get(edge.to_node.as_str()).copied();
        for (end, id) in [(from, &edge.from_node), (to, &edge.to_node)] {
            if end.is_none() {
                push(
                    Severity::Error,
                    RuleCode::UnresolvedNode,
                    &edge.location,
                    format!("edge {} refers to unknown node `{id}`", edge.id),
                );
            }
        }
        if edge.from_node == edge.to_node {
            push(
                Severity::Error,
                RuleCode::SelfLoop,
                &edge.location,
                format!("edge {} loops on node `{}`", edge.id, edge.from_node),
            );
        }
        if let Some(known) = &known_mitigations {
            for id in &edge.mitigation_ids {
                if !known.contains(id.as_str()) {
                    push(
                        Severity::Error,
                        RuleCode::UnknownMitigation,
                        &edge.location,
                        format!("edge {} refers to unknown mitigation `{id}`", edge.id),
                    );
                }
            }
        }
        let (Some(from), Some(to)) = (from, to) else {
            continue;
        };
        let (Some(from_side), Some(to_side)) = (side(from), side(to)) else {
            continue;
        };
        if from_side != to_side {
            crossing += 1;
            if to.stage != Stage::Observe {
                let severity = match strictness {
                    Strictness::Strict => Severity::Error,
                    Strictness::Lenient => Severity::Warning,
                };
                push(
                    severity,
                    RuleCode::ObserveTarget,
                    &edge.location,
                    format!(
                        "interaction edge {} (`{}` -> `{}`) targets a {} node; receivers should observe",
                        edge.id, from.id, to.id, to.stage
                    ),
                );
            }
        } else if from.lane_id == to.lane_id
            && edge.from_node != edge.to_node
            && to.stage != from.stage
            && to.stage != from.stage.successor()
            && from.stage != Stage::Decide
        {
            push(
                Severity::Warning,
                RuleCode::StageOrder,
                &edge.location,
                format!(
                    "edge {} goes from {} to {} within lane `{}`",
                    edge.id, from.stage, to.stage, from.lane_id
                ),
            );
        }
    }

    let has_human = model.lanes.iter().any(|l| l.side == Side::Human);
    let has_machine = model.lanes.iter().any(|l| l.side == Side::Machine);
    if !has_human || !has_machine || crossing == 0 {
        push(
            Severity::Warning,
            RuleCode::NoInteractions,
            &model.location,
            "no interactions possible: the model has no edge between a human-side and a machine-side lane"
                .to_owned(),
        );
    }
    diags
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
