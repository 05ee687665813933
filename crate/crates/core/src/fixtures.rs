//! Bundled example fixtures and their golden outputs.
//!
//! A fixture is a directory `fixtures/<name>/` holding `<name>.hat` and, optionally,
//! `<name>.lens`, `<name>.sfm` and `<name>.mit`. Golden outputs (`table.csv`,
//! `second_order.json`, `pathway_sfm4.dot`) sit next to them and must regenerate
//! bit-identically from the inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dsl::{
    parse_lens_catalog, parse_mitigation_catalog, parse_model, parse_sfm_bindings, DocumentKind,
    ParseDiagnostic, SourceDocument,
};
use crate::interactions::extract_interactions;
use crate::lenses::{builtin_catalog, merge_catalogs, LensCatalog, LensError};
use crate::mapping::SpecialisedFailureMode;
use crate::mitigations::{builtin_mitigations, Mitigation};
use crate::model::Ooda2Model;
use crate::pipeline::{Analysis, PipelineError};
use crate::report::{emit_csv, emit_dot_pathways, emit_second_order_json, ReportError};
use crate::tracing::{trace, TraceDirection, DEFAULT_MAX_DEPTH};

pub const GOLDEN_TABLE: &str = "table.csv";
pub const GOLDEN_SECOND_ORDER: &str = "second_order.json";
pub const GOLDEN_PATHWAY_SFM4: &str = "pathway_sfm4.dot";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {} parse error(s), first at {}", path.display(), diags.len(), diags[0])]
    Parse {
        path: PathBuf,
        diags: Vec<ParseDiagnostic>,
    },
    #[error(transparent)]
    Lens(#[from] LensError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone)]
pub struct GoldenFixture {
    pub name: String,
    pub dir: PathBuf,
    pub model: Ooda2Model,
    /// The fixture's own lenses, without the built-ins.
    pub lenses: LensCatalog,
    pub sfms: Vec<SpecialisedFailureMode>,
    /// The fixture's own mitigations, without the built-ins.
    pub mitigations: Vec<Mitigation>,
    /// Committed golden outputs by file name.
    pub expected: BTreeMap<String, String>,
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn load_fixture(name: &str) -> Result<GoldenFixture, FixtureError> {
    load_fixture_from(&fixtures_dir(), name)
}

fn read(path: &Path, kind: DocumentKind) -> Result<SourceDocument, FixtureError> {
    SourceDocument::read(path, Some(kind)).map_err(|source| FixtureError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_optional(path: &Path, kind: DocumentKind) -> Result<Option<SourceDocument>, FixtureError> {
    if path.exists() {
        read(path, kind).map(Some)
    } else {
        Ok(None)
    }
}

fn parsed<T>(path: &Path, r: Result<T, Vec<ParseDiagnostic>>) -> Result<T, FixtureError> {
    r.map_err(|diags| FixtureError::Parse {
        path: path.to_owned(),
        diags,
    })
}

pub fn load_fixture_from(root: &Path, name: &str) -> Result<GoldenFixture, FixtureError> {
    let dir = root.join(name);
    let file = |ext: &str| dir.join(format!("{name}.{ext}"));

    let model_path = file("hat");
    let model = parsed(
        &model_path,
        parse_model(&read(&model_path, DocumentKind::Model)?),
    )?;

    let lens_path = file("lens");
    let lenses = match read_optional(&lens_path, DocumentKind::LensCatalog)? {
        Some(doc) => parsed(&lens_path, parse_lens_catalog(&doc))?,
        None => LensCatalog::default(),
    };
    let sfm_path = file("sfm");
    let sfms = match read_optional(&sfm_path, DocumentKind::SfmBindings)? {
        Some(doc) => parsed(&sfm_path, parse_sfm_bindings(&doc))?,
        None => Vec::new(),
    };
    let mit_path = file("mit");
    let mitigations = match read_optional(&mit_path, DocumentKind::MitigationCatalog)? {
        Some(doc) => parsed(&mit_path, parse_mitigation_catalog(&doc))?,
        None => Vec::new(),
    };

    let mut expected = BTreeMap::new();
    for golden in [GOLDEN_TABLE, GOLDEN_SECOND_ORDER, GOLDEN_PATHWAY_SFM4] {
        let path = dir.join(golden);
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|source| FixtureError::Io {
                path: path.clone(),
                source,
            })?;
            expected.insert(golden.to_owned(), text);
        }
    }

    Ok(GoldenFixture {
        name: name.to_owned(),
        dir,
        model,
        lenses,
        sfms,
        mitigations,
        expected,
    })
}

impl GoldenFixture {
    /// Built-in lenses merged with the fixture's own.
    pub fn catalog(&self) -> Result<LensCatalog, LensError> {
        merge_catalogs(&builtin_catalog(), &self.lenses)
    }

    /// Built-in mitigations followed by the fixture's own.
    pub fn mitigation_catalog(&self) -> Vec<Mitigation> {
        let mut all = builtin_mitigations();
        all.extend(self.mitigations.iter().cloned());
        all
    }

    /// Recomputes every golden output from the fixture inputs.
    pub fn regenerate(&self) -> Result<BTreeMap<String, String>, FixtureError> {
        let catalog = self.catalog()?;
        let mitigations = self.mitigation_catalog();
        let bundle = Analysis {
            model: &self.model,
            catalog: &catalog,
            sfms: &self.sfms,
            mitigations: &mitigations,
            max_depth: DEFAULT_MAX_DEPTH,
        }
        .run()?;

        let mut out = BTreeMap::new();
        out.insert(GOLDEN_TABLE.to_owned(), emit_csv(&bundle.table));
        out.insert(
            GOLDEN_SECOND_ORDER.to_owned(),
            emit_second_order_json(&bundle.second_order),
        );
        if let Some(sfm) = self.sfms.iter().find(|s| s.sfm_id == 4) {
            let interactions = extract_interactions(&self.model);
            if let (Some(interaction), Some(mode)) = (
                interactions.iter().find(|i| i.i_id == sfm.interaction_id),
                catalog.mode(&sfm.generic_mode_id),
            ) {
                let pathways = trace(
                    &self.model,
                    interaction,
                    &mode.category,
                    TraceDirection::Downstream,
                    DEFAULT_MAX_DEPTH,
                    &mitigations,
                );
                out.insert(
                    GOLDEN_PATHWAY_SFM4.to_owned(),
                    emit_dot_pathways(&self.model, &pathways)?,
                );
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_fixture_is_an_io_error() {
        match load_fixture("no_such_fixture") {
            Err(FixtureError::Io { path, .. }) => assert!(path.ends_with("no_such_fixture.hat")),
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_fixture_shape() {
        let f = load_fixture("minimal").unwrap();
        assert_eq!(f.model.lanes.len(), 2);
        assert_eq!(extract_interactions(&f.model).len(), 1);
        assert!(f.sfms.is_empty());
    }
}
