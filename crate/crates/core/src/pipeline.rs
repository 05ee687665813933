//! End-to-end analysis: interactions, failure-mode table, specialisations, traces,
//! second-order effects and mitigation suggestions in one bundle.

use std::collections::HashSet;

use thiserror::Error;

use crate::interactions::{extract_interactions, Interaction};
use crate::lenses::LensCatalog;
use crate::mapping::{
    apply_specialisations, map_failure_modes, MappingError, SpecialisedFailureMode,
};
use crate::mitigations::{suggest_mitigations, Mitigation};
use crate::model::Ooda2Model;
use crate::report::ReportBundle;
use crate::tracing::{derive_second_order, trace, TraceDirection};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Debug, Clone, Copy)]
pub struct Analysis<'a> {
    pub model: &'a Ooda2Model,
    /// Already merged (built-in plus any user lenses).
    pub catalog: &'a LensCatalog,
    pub sfms: &'a [SpecialisedFailureMode],
    pub mitigations: &'a [Mitigation],
    pub max_depth: usize,
}

impl Analysis<'_> {
    pub fn interactions(&self) -> Vec<Interaction> {
        extract_interactions(self.model)
    }

    /// Pathways are traced for each distinct (interaction, category) pair bound by
    /// an SFM, downstream first, in SFM order.
    pub fn run(&self) -> Result<ReportBundle, PipelineError> {
        let interactions = self.interactions();
        let generic = map_failure_modes(&interactions, self.catalog);
        let table = apply_specialisations(&generic, self.sfms)?;

        let mut pathways = Vec::new();
        let mut traced = HashSet::new();
        for sfm in self.sfms {
            let Some(mode) = self.catalog.mode(&sfm.generic_mode_id) else {
                continue;
            };
            let Some(interaction) = interactions.iter().find(|i| i.i_id == sfm.interaction_id)
            else {
                continue;
            };
            if !traced.insert((interaction.i_id, mode.category.clone())) {
                continue;
            }
            for direction in [TraceDirection::Downstream, TraceDirection::Upstream] {
                pathways.extend(trace(
                    self.model,
                    interaction,
                    &mode.category,
                    direction,
                    self.max_depth,
                    self.mitigations,
                ));
            }
        }

        let second_order = derive_second_order(self.sfms, &interactions, self.catalog);
        let suggestions = suggest_mitigations(&table, self.mitigations);
        Ok(ReportBundle {
            table,
            pathways,
            second_order,
            suggestions,
        })
    }
}
