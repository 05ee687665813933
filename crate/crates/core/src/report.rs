//! Report emitters. Every emitter is deterministic: the same bundle always renders
//! to the same bytes.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::interactions::extract_interactions;
use crate::mapping::{FailureModeRow, FailureModeTable};
use crate::mitigations::Suggestion;
use crate::model::Ooda2Model;
use crate::tracing::{SecondOrderEffect, TracePathway};

pub const CSV_HEADER: &str = "I ID,SFM ID,Interaction Name,Machine Stage,Human Stage,Direction,Generic Failure Mode,Specialised Failure Mode";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportBundle {
    pub table: FailureModeTable,
    pub pathways: Vec<TracePathway>,
    pub second_order: Vec<SecondOrderEffect>,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("pathway starts from interaction {0}, which the model does not have")]
    UnknownOrigin(usize),
    #[error("pathway node `{0}` is not in the model")]
    UnknownNode(String),
    #[error("pathway step `{0}` -> `{1}` is not an edge of the model")]
    MissingEdge(String, String),
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn row_cells(row: &FailureModeRow) -> [String; 8] {
    [
        row.i_id.to_string(),
        row.sfm_id.map(|id| id.to_string()).unwrap_or_default(),
        row.interaction_name.clone(),
        row.machine_stage.title().to_owned(),
        row.human_stage.title().to_owned(),
        row.direction.arrow().to_owned(),
        row.generic_mode_title.clone(),
        row.specialised_text.clone().unwrap_or_default(),
    ]
}

/// The failure-mode table as CSV, LF line endings, one LF after the last row.
pub fn emit_csv(table: &FailureModeTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row_cells(row).iter().map(|c| csv_field(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn md_cell(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace('\n', "<br>")
}

fn md_table(out: &mut String, header: &[&str], rows: impl Iterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| md_cell(c)).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
}

fn format_gain(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn emit_markdown(bundle: &ReportBundle) -> String {
    let mut out = String::from("## Failure modes\n\n");
    let header: Vec<&str> = CSV_HEADER.split(',').collect();
    md_table(
        &mut out,
        &header,
        bundle.table.rows.iter().map(|r| row_cells(r).to_vec()),
    );

    out.push_str("\n## Pathways\n\n");
    md_table(
        &mut out,
        &[
            "I ID",
            "Category",
            "Direction",
            "Nodes",
            "Step Gains",
            "Total Gain",
            "Classification",
        ],
        bundle.pathways.iter().map(|p| {
            vec![
                p.origin.to_string(),
                p.mode_category.clone(),
                p.direction.to_string(),
                p.nodes.join(" → "),
                p.step_gains
                    .iter()
                    .map(|g| format_gain(*g))
                    .collect::<Vec<_>>()
                    .join(" × "),
                format_gain(p.total_gain),
                p.classification.to_string(),
            ]
        }),
    );

    out.push_str("\n## Second-order effects\n\n");
    md_table(
        &mut out,
        &["SFM ID", "Induced Mode", "Rationale"],
        bundle.second_order.iter().map(|e| {
            vec![
                e.origin_sfm_id.to_string(),
                format!("{:?}", e.induced_mode),
                e.rationale.clone(),
            ]
        }),
    );

    out.push_str("\n## Mitigation suggestions\n\n");
    md_table(
        &mut out,
        &[
            "Row",
            "I ID",
            "SFM ID",
            "Generic Failure Mode",
            "Mitigation",
            "Detail",
        ],
        bundle.suggestions.iter().map(|s| {
            let row = &bundle.table.rows[s.row];
            vec![
                (s.row + 1).to_string(),
                row.i_id.to_string(),
                row.sfm_id.map(|id| id.to_string()).unwrap_or_default(),
                row.generic_mode_title.clone(),
                s.mitigation.name.clone(),
                s.mitigation.detail.clone(),
            ]
        }),
    );
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    i_id: usize,
    sfm_id: Option<u32>,
    interaction_name: &'a str,
    machine_stage: &'a str,
    human_stage: &'a str,
    direction: &'a str,
    generic_failure_mode: &'a str,
    specialised_failure_mode: Option<&'a str>,
}

#[derive(Serialize)]
struct JsonPathway<'a> {
    origin: usize,
    mode_category: &'a str,
    direction: String,
    nodes: &'a [String],
    step_gains: &'a [f64],
    total_gain: f64,
    classification: String,
}

#[derive(Serialize)]
struct JsonEffect<'a> {
    origin_sfm_id: u32,
    induced_mode: String,
    rationale: &'a str,
}

#[derive(Serialize)]
struct JsonSuggestion<'a> {
    row: usize,
    mitigation: &'a str,
    name: &'a str,
    categories: &'a [String],
    damping: f64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    table: Vec<JsonRow<'a>>,
    pathways: Vec<JsonPathway<'a>>,
    second_order: Vec<JsonEffect<'a>>,
    suggestions: Vec<JsonSuggestion<'a>>,
}

fn json_rows(table: &FailureModeTable) -> Vec<JsonRow<'_>> {
    table
        .rows
        .iter()
        .map(|r| JsonRow {
            i_id: r.i_id,
            sfm_id: r.sfm_id,
            interaction_name: &r.interaction_name,
            machine_stage: r.machine_stage.title(),
            human_stage: r.human_stage.title(),
            direction: r.direction.arrow(),
            generic_failure_mode: &r.generic_mode_title,
            specialised_failure_mode: r.specialised_text.as_deref(),
        })
        .collect()
}

fn json_pathways(pathways: &[TracePathway]) -> Vec<JsonPathway<'_>> {
    pathways
        .iter()
        .map(|p| JsonPathway {
            origin: p.origin,
            mode_category: &p.mode_category,
            direction: p.direction.to_string(),
            nodes: &p.nodes,
            step_gains: &p.step_gains,
            total_gain: p.total_gain,
            classification: p.classification.to_string(),
        })
        .collect()
}

fn json_effects(effects: &[SecondOrderEffect]) -> Vec<JsonEffect<'_>> {
    effects
        .iter()
        .map(|e| JsonEffect {
            origin_sfm_id: e.origin_sfm_id,
            induced_mode: format!("{:?}", e.induced_mode),
            rationale: &e.rationale,
        })
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values are always serializable");
    s.push('\n');
    s
}

/// The bundle as JSON; see `schema/report.schema.json`.
pub fn emit_json(bundle: &ReportBundle) -> String {
    pretty(&JsonReport {
        table: json_rows(&bundle.table),
        pathways: json_pathways(&bundle.pathways),
        second_order: json_effects(&bundle.second_order),
        suggestions: bundle
            .suggestions
            .iter()
            .map(|s| JsonSuggestion {
                row: s.row,
                mitigation: &s.mitigation.id,
                name: &s.mitigation.name,
                categories: &s.mitigation.categories,
                damping: s.mitigation.damping,
            })
            .collect(),
    })
}

/// Pathways alone, as a JSON array in the bundle's pathway schema.
pub fn emit_pathways_json(pathways: &[TracePathway]) -> String {
    pretty(&json_pathways(pathways))
}

/// Second-order effects alone, as a JSON array in the bundle's schema.
pub fn emit_second_order_json(effects: &[SecondOrderEffect]) -> String {
    pretty(&json_effects(effects))
}

fn dot_id(s: &str) -> String {
    format!(
        "\"{}\"",
        s.replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace('\n', "\\n")
    )
}

/// Renders the model with one cluster per lane, highlighting one pathway.
pub fn emit_dot(model: &Ooda2Model, pathway: &TracePathway) -> Result<String, ReportError> {
    emit_dot_pathways(model, std::slice::from_ref(pathway))
}

/// Renders the model highlighting every node and edge on any of the pathways
/// (`penwidth=3`); the interaction edges the pathways start from are dashed.
pub fn emit_dot_pathways(
    model: &Ooda2Model,
    pathways: &[TracePathway],
) -> Result<String, ReportError> {
    let interactions = extract_interactions(model);
    let mut dashed: HashSet<usize> = HashSet::new();
    let mut hot_nodes: HashSet<&str> = HashSet::new();
    let mut hot_edges: HashSet<(&str, &str)> = HashSet::new();
    for p in pathways {
        let origin = interactions
            .iter()
            .find(|i| i.i_id == p.origin)
            .ok_or(ReportError::UnknownOrigin(p.origin))?;
        dashed.insert(origin.edge_id);
        for id in &p.nodes {
            model
                .node(id)
                .map_err(|_| ReportError::UnknownNode(id.clone()))?;
            hot_nodes.insert(id);
        }
        for (a, b) in p.edge_pairs() {
            if model.edge_between(a, b).is_none() {
                return Err(ReportError::MissingEdge(a.to_owned(), b.to_owned()));
            }
            hot_edges.insert((a, b));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", dot_id(&model.name));
    out.push_str("  rankdir=LR;\n  node [shape=box];\n");
    for lane in &model.lanes {
        let _ = writeln!(
            out,
            "  subgraph {} {{",
            dot_id(&format!("cluster_{}", lane.id))
        );
        let _ = writeln!(
            out,
            "    label={};",
            dot_id(&format!("{} ({})", lane.display_name, lane.side.token()))
        );
        for node in model.nodes.iter().filter(|n| n.lane_id == lane.id) {
            let label = dot_id(&format!("{}\n[{}]", node.label, node.stage));
            if hot_nodes.contains(node.id.as_str()) {
                let _ = writeln!(out, "    {} [label={label}, penwidth=3];", dot_id(&node.id));
            } else {
                let _ = writeln!(out, "    {} [label={label}];", dot_id(&node.id));
            }
        }
        out.push_str("  }\n");
    }
    for edge in &model.edges {
        let mut attrs = Vec::new();
        if let Some(guard) = &edge.guard {
            attrs.push(format!("label={}", dot_id(guard)));
        }
        if dashed.contains(&edge.id) {
            attrs.push("style=dashed".to_owned());
        }
        if hot_edges.contains(&(edge.from_node.as_str(), edge.to_node.as_str())) {
            attrs.push("penwidth=3".to_owned());
        }
        let _ = write!(
            out,
            "  {} -> {}",
            dot_id(&edge.from_node),
            dot_id(&edge.to_node)
        );
        if !attrs.is_empty() {
            let _ = write!(out, " [{}]", attrs.join(", "));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    Ok(out)
}
