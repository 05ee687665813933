//! Crossing interactions with generic failure modes, then folding in the analyst's
//! specialised failure modes (SFMs).

use std::collections::HashSet;

use thiserror::Error;

use crate::interactions::{Direction, Interaction};
use crate::lenses::{applicable_modes, LensCatalog};
use crate::model::{Location, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialisedFailureMode {
    pub sfm_id: u32,
    pub interaction_id: usize,
    pub generic_mode_id: String,
    pub text: String,
    pub location: Location,
}

impl SpecialisedFailureMode {
    pub fn new(sfm_id: u32, interaction_id: usize, generic_mode_id: &str, text: &str) -> Self {
        SpecialisedFailureMode {
            sfm_id,
            interaction_id,
            generic_mode_id: generic_mode_id.to_owned(),
            text: text.to_owned(),
            location: Location::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureModeRow {
    pub i_id: usize,
    pub sfm_id: Option<u32>,
    pub interaction_name: String,
    pub machine_stage: Stage,
    pub human_stage: Stage,
    pub direction: Direction,
    pub generic_mode_id: String,
    pub category: String,
    pub generic_mode_title: String,
    pub specialised_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FailureModeTable {
    pub rows: Vec<FailureModeRow>,
}

impl FailureModeTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn specialised(&self) -> impl Iterator<Item = &FailureModeRow> {
        self.rows.iter().filter(|r| r.sfm_id.is_some())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("SFM {sfm_id} refers to unknown interaction {interaction_id}")]
    UnknownInteraction { sfm_id: u32, interaction_id: usize },
    #[error("SFM {sfm_id}: failure mode `{mode}` does not apply to interaction {interaction_id}")]
    InapplicableMode {
        sfm_id: u32,
        interaction_id: usize,
        mode: String,
    },
    #[error("SFM {sfm_id} is declared more than once")]
    DuplicateSfm { sfm_id: u32 },
    #[error("SFM {sfm_id} is out of sequence; expected SFM {expected}")]
    OutOfSequence { sfm_id: u32, expected: u32 },
}

/// One row per interaction and applicable non-benign mode, in interaction then
/// catalog order.
pub fn map_failure_modes(interactions: &[Interaction], catalog: &LensCatalog) -> FailureModeTable {
    let mut rows = Vec::new();
    for interaction in interactions {
        for mode in applicable_modes(catalog, interaction) {
            if mode.benign {
                continue;
            }
            rows.push(FailureModeRow {
                i_id: interaction.i_id,
                sfm_id: None,
                interaction_name: interaction.name.clone(),
                machine_stage: interaction.machine_stage,
                human_stage: interaction.human_stage,
                direction: interaction.direction,
                generic_mode_id: mode.id.clone(),
                category: mode.category.clone(),
                generic_mode_title: mode.title.clone(),
                specialised_text: None,
            });
        }
    }
    FailureModeTable { rows }
}

/// Replaces each generic row that has specialisations by its SFM rows. Generic rows
/// with no SFM stay in place. Within an interaction, specialised rows come first in
/// SFM order, then the remaining generic rows in catalog order.
///
/// SFM ids must ascend without gaps in the order given and must not collide with
/// SFMs already in the table.
pub fn apply_specialisations(
    table: &FailureModeTable,
    sfms: &[SpecialisedFailureMode],
) -> Result<FailureModeTable, MappingError> {
    let mut seen: HashSet<u32> = table.rows.iter().filter_map(|r| r.sfm_id).collect();
    let mut previous: Option<u32> = None;
    for sfm in sfms {
        if !seen.insert(sfm.sfm_id) {
            return Err(MappingError::DuplicateSfm { sfm_id: sfm.sfm_id });
        }
        if let Some(prev) = previous {
            if sfm.sfm_id != prev + 1 {
                return Err(MappingError::OutOfSequence {
                    sfm_id: sfm.sfm_id,
                    expected: prev + 1,
                });
            }
        }
        previous = Some(sfm.sfm_id);
        if !table.rows.iter().any(|r| r.i_id == sfm.interaction_id) {
            return Err(MappingError::UnknownInteraction {
                sfm_id: sfm.sfm_id,
                interaction_id: sfm.interaction_id,
            });
        }
        if !table
            .rows
            .iter()
            .any(|r| r.i_id == sfm.interaction_id && r.generic_mode_id == sfm.generic_mode_id)
        {
            return Err(MappingError::InapplicableMode {
                sfm_id: sfm.sfm_id,
                interaction_id: sfm.interaction_id,
                mode: sfm.generic_mode_id.clone(),
            });
        }
    }

    let mut rows = Vec::with_capacity(table.rows.len() + sfms.len());
    let mut emitted: HashSet<(usize, &str)> = HashSet::new();
    for row in &table.rows {
        let bound: Vec<&SpecialisedFailureMode> = sfms
            .iter()
            .filter(|s| s.interaction_id == row.i_id && s.generic_mode_id == row.generic_mode_id)
            .collect();
        if bound.is_empty() || row.sfm_id.is_some() {
            rows.push(row.clone());
        }
        // A mode may already be specialised by earlier rows; new SFMs are added once.
        if bound.is_empty() || !emitted.insert((row.i_id, row.generic_mode_id.as_str())) {
            continue;
        }
        for sfm in bound {
            rows.push(FailureModeRow {
                sfm_id: Some(sfm.sfm_id),
                specialised_text: Some(sfm.text.clone()),
                ..row.clone()
            });
        }
    }
    rows.sort_by_key(|r| (r.i_id, r.sfm_id.is_none(), r.sfm_id));
    Ok(FailureModeTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lenses::builtin_catalog;

    fn interactions() -> Vec<Interaction> {
        vec![
            Interaction {
                i_id: 1,
                edge_id: 1,
                name: "Recommend".into(),
                source: "m".into(),
                target: "h".into(),
                direction: Direction::MachineToHuman,
                machine_stage: Stage::Decide,
                human_stage: Stage::Observe,
            },
            Interaction {
                i_id: 2,
                edge_id: 2,
                name: "Report".into(),
                source: "h".into(),
                target: "m".into(),
                direction: Direction::HumanToMachine,
                machine_stage: Stage::Observe,
                human_stage: Stage::Decide,
            },
        ]
    }

    #[test]
    fn maps_non_benign_modes() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        // 9 for the m2h interaction (use excluded), 3 for the h2m one.
        assert_eq!(t.len(), 12);
        assert!(t.rows.iter().all(|r| r.generic_mode_id != "use"));
        assert!(map_failure_modes(&[], &builtin_catalog()).is_empty());
    }

    #[test]
    fn specialisation_replaces_generic_row() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        let sfms = vec![
            SpecialisedFailureMode::new(1, 1, "stability", "flickers"),
            SpecialisedFailureMode::new(2, 1, "stability", "oscillates"),
            SpecialisedFailureMode::new(3, 2, "misuse", "overrides"),
        ];
        let s = apply_specialisations(&t, &sfms).unwrap();
        assert_eq!(s.len(), t.len() - 2 + 3);
        assert_eq!(s.rows[0].sfm_id, Some(1));
        assert_eq!(s.rows[1].sfm_id, Some(2));
        assert_eq!(s.rows[1].specialised_text.as_deref(), Some("oscillates"));
        assert!(!s
            .rows
            .iter()
            .any(|r| r.i_id == 1 && r.generic_mode_id == "stability" && r.sfm_id.is_none()));
        let first_h2m = s.rows.iter().position(|r| r.i_id == 2).unwrap();
        assert_eq!(s.rows[first_h2m].sfm_id, Some(3));
    }

    #[test]
    fn empty_sfm_list_is_identity() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        assert_eq!(apply_specialisations(&t, &[]).unwrap(), t);
    }

    #[test]
    fn binding_errors() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        assert_eq!(
            apply_specialisations(&t, &[SpecialisedFailureMode::new(7, 2, "stability", "x")]),
            Err(MappingError::InapplicableMode {
                sfm_id: 7,
                interaction_id: 2,
                mode: "stability".into()
            })
        );
        assert_eq!(
            apply_specialisations(&t, &[SpecialisedFailureMode::new(7, 9, "bias", "x")]),
            Err(MappingError::UnknownInteraction {
                sfm_id: 7,
                interaction_id: 9
            })
        );
        let gap = [
            SpecialisedFailureMode::new(3, 1, "bias", "x"),
            SpecialisedFailureMode::new(5, 1, "bias", "y"),
        ];
        assert_eq!(
            apply_specialisations(&t, &gap),
            Err(MappingError::OutOfSequence {
                sfm_id: 5,
                expected: 4
            })
        );
    }

    #[test]
    fn reapplying_is_rejected() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        let sfms = [SpecialisedFailureMode::new(1, 1, "bias", "x")];
        let once = apply_specialisations(&t, &sfms).unwrap();
        assert_eq!(
            apply_specialisations(&once, &sfms),
            Err(MappingError::DuplicateSfm { sfm_id: 1 })
        );
    }

    #[test]
    fn later_sfms_join_an_already_specialised_mode() {
        let t = map_failure_modes(&interactions(), &builtin_catalog());
        let once =
            apply_specialisations(&t, &[SpecialisedFailureMode::new(1, 1, "bias", "x")]).unwrap();
        let twice = apply_specialisations(&once, &[SpecialisedFailureMode::new(2, 1, "bias", "y")])
            .unwrap();
        let bias: Vec<_> = twice
            .rows
            .iter()
            .filter(|r| r.generic_mode_id == "bias" && r.i_id == 1)
            .map(|r| r.sfm_id)
            .collect();
        assert_eq!(bias, vec![Some(1), Some(2)]);
    }
}
