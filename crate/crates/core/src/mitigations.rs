//! Mitigation patterns bound to failure-mode categories.

use serde::Serialize;

use crate::mapping::FailureModeTable;

pub const DEFAULT_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Placement {
    Node,
    Edge,
}

impl Placement {
    pub fn token(self) -> &'static str {
        match self {
            Placement::Node => "node",
            Placement::Edge => "edge",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "node" => Some(Placement::Node),
            "edge" => Some(Placement::Edge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mitigation {
    pub id: String,
    pub name: String,
    pub categories: Vec<String>,
    pub placement: Placement,
    pub detail: String,
    /// Multiplier in (0, 1) applied to a traced pathway passing this mitigation.
    pub damping: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

impl Mitigation {
    pub fn covers(&self, category: &str) -> bool {
        self.categories.iter().any(|c| c == category)
    }
}

fn builtin(id: &str, name: &str, categories: &[&str], detail: &str) -> Mitigation {
    Mitigation {
        id: id.to_owned(),
        name: name.to_owned(),
        categories: categories.iter().map(|c| (*c).to_owned()).collect(),
        placement: Placement::Node,
        detail: detail.to_owned(),
        damping: DEFAULT_DAMPING,
        caveat: None,
    }
}

pub fn builtin_mitigations() -> Vec<Mitigation> {
    let mut odd_notification = builtin(
        "odd_notification",
        "ODD edge notification",
        &["robustness"],
        "Notify the operator when inputs approach the edge of the operational design domain.",
    );
    odd_notification.caveat = Some(
        "Reaching the edge of the operational design domain may be hard to detect.".to_owned(),
    );
    vec![
        odd_notification,
        builtin(
            "odd_margin",
            "ODD safety margin",
            &["robustness"],
            "Extend the operational design domain with a safety margin around the expected operating envelope.",
        ),
        builtin(
            "trust_calibration",
            "Trust calibration",
            &["misuse", "disuse"],
            "Develop and calibrate operator trust through training, culture and comprehensible outputs.",
        ),
        builtin(
            "operator_monitoring",
            "Operator monitoring",
            &["misuse", "disuse"],
            "Monitor operators for unusual decision acceptance patterns.",
        ),
        builtin(
            "hysteresis",
            "Input hysteresis",
            &["stability"],
            "Apply hysteresis to the input of the downstream component so small fluctuations do not flip its output.",
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    /// Index into the table's rows.
    pub row: usize,
    pub mitigation: Mitigation,
}

/// For each row, every mitigation covering the row's category, in row then catalog order.
pub fn suggest_mitigations(table: &FailureModeTable, catalog: &[Mitigation]) -> Vec<Suggestion> {
    table
        .rows
        .iter()
        .enumerate()
        .flat_map(|(row, r)| {
            catalog
                .iter()
                .filter(|m| m.covers(&r.category))
                .map(move |m| Suggestion {
                    row,
                    mitigation: m.clone(),
                })
        })
        .collect()
}
