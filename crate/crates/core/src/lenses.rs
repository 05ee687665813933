//! Failure-mode lenses: taxonomies of generic failure modes, phrased as questions,
//! that are laid over each interaction.

use std::collections::HashMap;

use thiserror::Error;

use crate::interactions::{Direction, Interaction};
use crate::model::{Location, Stage};

/// Which interaction directions a mode applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Applicability {
    MachineToHuman,
    HumanToMachine,
    Both,
}

impl Applicability {
    pub fn token(self) -> &'static str {
        match self {
            Applicability::MachineToHuman => "m2h",
            Applicability::HumanToMachine => "h2m",
            Applicability::Both => "both",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "m2h" => Some(Applicability::MachineToHuman),
            "h2m" => Some(Applicability::HumanToMachine),
            "both" => Some(Applicability::Both),
            _ => None,
        }
    }

    pub fn admits(self, direction: Direction) -> bool {
        matches!(
            (self, direction),
            (Applicability::Both, _)
                | (Applicability::MachineToHuman, Direction::MachineToHuman)
                | (Applicability::HumanToMachine, Direction::HumanToMachine)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericFailureMode {
    pub id: String,
    pub lens_id: String,
    /// Matches node `response.*` keys, `cause=` tags and mitigation categories.
    pub category: String,
    pub title: String,
    pub question: String,
    pub applicability: Applicability,
    /// Nominal-case modes are shown but never counted as failures.
    pub benign: bool,
    pub machine_stage: Option<Stage>,
    pub human_stage: Option<Stage>,
    pub location: Location,
}

impl GenericFailureMode {
    pub fn new(
        id: &str,
        lens_id: &str,
        category: &str,
        title: &str,
        question: &str,
        applicability: Applicability,
    ) -> Self {
        GenericFailureMode {
            id: id.to_owned(),
            lens_id: lens_id.to_owned(),
            category: category.to_owned(),
            title: title.to_owned(),
            question: question.to_owned(),
            applicability,
            benign: false,
            machine_stage: None,
            human_stage: None,
            location: Location::default(),
        }
    }

    pub fn applies_to(&self, interaction: &Interaction) -> bool {
        self.applicability.admits(interaction.direction)
            && self
                .machine_stage
                .is_none_or(|s| s == interaction.machine_stage)
            && self
                .human_stage
                .is_none_or(|s| s == interaction.human_stage)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lens {
    pub id: String,
    pub name: String,
    pub modes: Vec<GenericFailureMode>,
    pub location: Location,
}

impl Lens {
    pub fn new(id: &str, name: &str) -> Self {
        Lens {
            id: id.to_owned(),
            name: name.to_owned(),
            modes: Vec::new(),
            location: Location::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LensCatalog {
    pub lenses: Vec<Lens>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LensError {
    #[error("failure mode `{id}` is defined twice ({first} and {second})")]
    DuplicateMode {
        id: String,
        first: Location,
        second: Location,
    },
    #[error("lens `{id}` is defined twice ({first} and {second})")]
    DuplicateLens {
        id: String,
        first: Location,
        second: Location,
    },
}

impl LensCatalog {
    /// All modes in catalog order: lens by lens, mode by mode.
    pub fn modes(&self) -> impl Iterator<Item = &GenericFailureMode> {
        self.lenses.iter().flat_map(|l| l.modes.iter())
    }

    pub fn mode(&self, id: &str) -> Option<&GenericFailureMode> {
        self.modes().find(|m| m.id == id)
    }

    pub fn lens(&self, id: &str) -> Option<&Lens> {
        self.lenses.iter().find(|l| l.id == id)
    }

    pub fn mode_count(&self) -> usize {
        self.lenses.iter().map(|l| l.modes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lenses.is_empty()
    }

    /// Checks lens and mode ids are unique across the catalog.
    pub fn check_ids(&self) -> Result<(), LensError> {
        let mut lenses: HashMap<&str, &Location> = HashMap::new();
        let mut modes: HashMap<&str, &Location> = HashMap::new();
        for lens in &self.lenses {
            if let Some(first) = lenses.insert(&lens.id, &lens.location) {
                return Err(LensError::DuplicateLens {
                    id: lens.id.clone(),
                    first: first.clone(),
                    second: lens.location.clone(),
                });
            }
            for mode in &lens.modes {
                if let Some(first) = modes.insert(&mode.id, &mode.location) {
                    return Err(LensError::DuplicateMode {
                        id: mode.id.clone(),
                        first: first.clone(),
                        second: mode.location.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

const HUMAN_INTENT_QUESTION: &str = "Is the human user intending to use the output of the AI system in the way the designer intended it to be used?";

/// The two built-in lenses: machine behaviour (six modes) and human intent (four).
pub fn builtin_catalog() -> LensCatalog {
    let machine_modes = [
        (
            "accuracy",
            "Accuracy",
            "For an input sampled from a given distribution, what is the probability that the system produces an acceptable response?",
        ),
        (
            "bias",
            "Bias",
            "Is there persistent structure to unacceptable responses produced by the system?",
        ),
        (
            "variability",
            "Variability",
            "If the same input is repeatedly presented to the system, how constant is the system\u{2019}s response?",
        ),
        (
            "stability",
            "Stability",
            "If a small change is made to the system\u{2019}s input, how much does the system\u{2019}s output change?",
        ),
        (
            "uncertainty",
            "Uncertainty",
            "How does the system handle inputs with differing levels of confidence, and how does the system report the confidence level of its output?",
        ),
        (
            "robustness",
            "Robustness",
            "Does the system\u{2019}s performance degrade gracefully for inputs sampled near the edge or slightly outside the system\u{2019}s design domain?",
        ),
    ];
    let mut machine = Lens::new("machine", "Machine Behaviour");
    machine.location = Location::builtin();
    for (category, title, question) in machine_modes {
        let mut mode = GenericFailureMode::new(
            category,
            "machine",
            category,
            title,
            question,
            Applicability::MachineToHuman,
        );
        mode.location = Location::builtin();
        machine.modes.push(mode);
    }

    let mut intent = Lens::new("human_intent", "Human Intent");
    intent.location = Location::builtin();
    for (category, title) in [
        ("use", "Use"),
        ("misuse", "Misuse"),
        ("abuse", "Abuse"),
        ("disuse", "Disuse"),
    ] {
        let mut mode = GenericFailureMode::new(
            category,
            "human_intent",
            category,
            title,
            HUMAN_INTENT_QUESTION,
            Applicability::Both,
        );
        mode.benign = category == "use";
        mode.location = Location::builtin();
        intent.modes.push(mode);
    }

    LensCatalog {
        lenses: vec![machine, intent],
    }
}

/// Union of two catalogs. Any id collision is an error; nothing is overridden.
pub fn merge_catalogs(base: &LensCatalog, extra: &LensCatalog) -> Result<LensCatalog, LensError> {
    let merged = LensCatalog {
        lenses: base.lenses.iter().chain(&extra.lenses).cloned().collect(),
    };
    merged.check_ids()?;
    Ok(merged)
}

/// Modes admitting the interaction, in catalog order.
pub fn applicable_modes<'c>(
    catalog: &'c LensCatalog,
    interaction: &Interaction,
) -> Vec<&'c GenericFailureMode> {
    catalog
        .modes()
        .filter(|m| m.applies_to(interaction))
        .collect()
}
