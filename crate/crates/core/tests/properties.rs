//! Property tests: round-trips, oracle equivalence and algebraic invariants over
//! randomly generated models.

mod common;

use std::collections::BTreeSet;

use common::{
    oracle_cross_side_edges, oracle_reachable, oracle_side, random_model, rng, CATEGORIES,
};
use hatrisk::dsl::{
    parse_lens_catalog, parse_mitigation_catalog, parse_model, parse_sfm_bindings,
    serialize_lens_catalog, serialize_mitigation_catalog, serialize_model, serialize_sfm_bindings,
    DocumentKind, SourceDocument,
};
use hatrisk::lenses::{Applicability, GenericFailureMode, Lens, LensError};
use hatrisk::mitigations::{Placement, DEFAULT_DAMPING};
use hatrisk::model::{has_errors, Stage};
use hatrisk::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(256)
}

/// Synthetic interaction whose both endpoints are `node`, so any node can seed a trace.
fn anchor(node: &str) -> Interaction {
    Interaction {
        i_id: 1,
        edge_id: 0,
        name: String::new(),
        source: node.to_owned(),
        target: node.to_owned(),
        direction: Direction::MachineToHuman,
        machine_stage: Stage::Decide,
        human_stage: Stage::Observe,
    }
}

fn mitigation(id: &str, category: &str, placement: Placement, damping: f64) -> Mitigation {
    Mitigation {
        id: id.to_owned(),
        name: id.to_owned(),
        categories: vec![category.to_owned()],
        placement,
        detail: String::new(),
        damping,
        caveat: None,
    }
}

fn lens(id: &str, modes: &[&str]) -> LensCatalog {
    let mut l = Lens::new(id, id);
    for m in modes {
        l.modes.push(GenericFailureMode::new(
            m,
            id,
            m,
            m,
            "?",
            Applicability::Both,
        ));
    }
    LensCatalog { lenses: vec![l] }
}

fn mode_ids(c: &LensCatalog) -> Vec<String> {
    c.modes().map(|m| m.id.clone()).collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn model_round_trips(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 30);
        let doc = serialize_model(&model);
        let parsed = parse_model(&doc).unwrap();
        prop_assert_eq!(&parsed, &model);
        prop_assert_eq!(serialize_model(&parsed).text, doc.text);
    }

    #[test]
    fn crlf_input_parses_identically(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 10);
        let doc = serialize_model(&model);
        let crlf = SourceDocument::new("m.hat", DocumentKind::Model, &doc.text.replace('\n', "\r\n"));
        prop_assert_eq!(parse_model(&crlf).unwrap(), model);
    }

    #[test]
    fn corrupted_documents_report_sorted_in_range_diagnostics(
        seed in any::<u64>(),
        junk in "[a-z=\" #.\\\\>-]{1,12}",
    ) {
        let mut r = rng(seed);
        let text = serialize_model(&random_model(&mut r, 12)).text;
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let at = r.gen_range(0..=lines.len());
        lines.insert(at, junk);
        let corrupted = lines.join("\n");
        let doc = SourceDocument::new("bad.hat", DocumentKind::Model, &corrupted);
        if let Err(diags) = parse_model(&doc) {
            prop_assert!(!diags.is_empty());
            let keys: Vec<_> = diags.iter().map(|d| (d.line, d.column)).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
            for d in &diags {
                prop_assert!(d.line >= 1 && d.line <= lines.len().max(1), "{}", d);
            }
        }
    }

    #[test]
    fn interactions_match_cross_side_oracle(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 30);
        let found = extract_interactions(&model);
        let edge_ids: Vec<usize> = found.iter().map(|i| i.edge_id).collect();
        prop_assert_eq!(edge_ids, oracle_cross_side_edges(&model));
        prop_assert!(found.len() <= model.edges.len());
        for (k, i) in found.iter().enumerate() {
            prop_assert_eq!(i.i_id, k + 1);
            let expected = match oracle_side(&model, &i.source) {
                Some(model::Side::Machine) => Direction::MachineToHuman,
                _ => Direction::HumanToMachine,
            };
            prop_assert_eq!(i.direction, expected);
        }
    }

    #[test]
    fn reversing_edges_flips_directions(seed in any::<u64>()) {
        let mut model = random_model(&mut rng(seed), 20);
        let before = extract_interactions(&model);
        for e in &mut model.edges {
            std::mem::swap(&mut e.from_node, &mut e.to_node);
        }
        let after = extract_interactions(&model);
        prop_assert_eq!(before.len(), after.len());
        for (a, b) in before.iter().zip(&after) {
            prop_assert_ne!(a.direction, b.direction);
            prop_assert_eq!(a.machine_stage, b.machine_stage);
            prop_assert_eq!(a.human_stage, b.human_stage);
        }
    }

    #[test]
    fn validation_is_deterministic_and_strict_subsumes_lenient(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 20);
        let strict = validate(&model, Strictness::Strict);
        prop_assert_eq!(&strict, &validate(&model, Strictness::Strict));
        let lenient = validate(&model, Strictness::Lenient);
        if !has_errors(&strict) {
            prop_assert!(!has_errors(&lenient));
        }
        prop_assert!(lenient.len() == strict.len());
    }

    #[test]
    fn parsed_model_diagnostics_carry_lines(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 20);
        let parsed = parse_model(&serialize_model(&model)).unwrap();
        for d in validate(&parsed, Strictness::Strict) {
            if d.code != model::RuleCode::NoInteractions {
                prop_assert!(d.location.line.is_some(), "{}", d);
            }
        }
    }

    #[test]
    fn node_lookup_finds_every_declared_node(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 30);
        for n in &model.nodes {
            prop_assert_eq!(&node_lookup(&model, &n.id).unwrap().id, &n.id);
        }
        prop_assert!(node_lookup(&model, "no_such_node").is_err());
    }

    #[test]
    fn applicable_modes_match_brute_force(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 30);
        let catalog = builtin_catalog();
        for i in extract_interactions(&model) {
            let got: Vec<&str> = applicable_modes(&catalog, &i).iter().map(|m| m.id.as_str()).collect();
            let mut want = Vec::new();
            for l in &catalog.lenses {
                for m in &l.modes {
                    let dir_ok = match m.applicability {
                        Applicability::Both => true,
                        Applicability::MachineToHuman => i.direction == Direction::MachineToHuman,
                        Applicability::HumanToMachine => i.direction == Direction::HumanToMachine,
                    };
                    if dir_ok
                        && m.machine_stage.is_none_or(|s| s == i.machine_stage)
                        && m.human_stage.is_none_or(|s| s == i.human_stage)
                    {
                        want.push(m.id.as_str());
                    }
                }
            }
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn table_row_count_matches_oracle(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 30);
        let catalog = builtin_catalog();
        let interactions = extract_interactions(&model);
        let table = map_failure_modes(&interactions, &catalog);
        let expected: usize = interactions
            .iter()
            .map(|i| catalog.modes().filter(|m| !m.benign && m.applies_to(i)).count())
            .sum();
        prop_assert_eq!(table.len(), expected);
        prop_assert_eq!(table.specialised().count(), 0);
    }

    #[test]
    fn specialisation_replaces_generic_rows(seed in any::<u64>(), first_id in 1u32..50) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 30);
        let catalog = builtin_catalog();
        let interactions = extract_interactions(&model);
        let table = map_failure_modes(&interactions, &catalog);
        prop_assume!(!table.is_empty());
        let count = r.gen_range(1..6);
        let sfms: Vec<SpecialisedFailureMode> = (0..count)
            .map(|k| {
                let row = table.rows.choose(&mut r).unwrap();
                SpecialisedFailureMode::new(first_id + k, row.i_id, &row.generic_mode_id, &format!("sfm {k}"))
            })
            .collect();
        let out = apply_specialisations(&table, &sfms).unwrap();
        let pairs: BTreeSet<(usize, &str)> =
            sfms.iter().map(|s| (s.interaction_id, s.generic_mode_id.as_str())).collect();
        prop_assert_eq!(out.len(), table.len() - pairs.len() + sfms.len());
        prop_assert_eq!(out.specialised().count(), sfms.len());
        let i_ids: Vec<usize> = out.rows.iter().map(|r| r.i_id).collect();
        let mut sorted = i_ids.clone();
        sorted.sort();
        prop_assert_eq!(i_ids, sorted);
        // Re-applying the same ids collides.
        let dup = apply_specialisations(&out, &sfms[..1]);
        prop_assert!(matches!(dup, Err(mapping::MappingError::DuplicateSfm { .. })), "{:?}", dup);
    }

    #[test]
    fn sfm_bindings_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(0..8);
        let start = r.gen_range(1..20);
        let sfms: Vec<SpecialisedFailureMode> = (0..n)
            .map(|k| {
                let text: String = ["a", "\"q\"", "\\", "é", " ", "x,y", "\n"]
                    .choose_multiple(&mut r, 3).copied().collect();
                SpecialisedFailureMode::new(start + k, r.gen_range(1..9), CATEGORIES.choose(&mut r).unwrap(), &text)
            })
            .collect();
        let doc = serialize_sfm_bindings(&sfms);
        let parsed = parse_sfm_bindings(&doc).unwrap();
        prop_assert_eq!(&parsed, &sfms);
        prop_assert_eq!(serialize_sfm_bindings(&parsed).text, doc.text);
    }

    #[test]
    fn traces_are_simple_connected_and_cover_bfs(seed in any::<u64>(), max_depth in 1usize..8) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 30);
        prop_assume!(!model.nodes.is_empty());
        let start = model.nodes.choose(&mut r).unwrap().id.clone();
        let category = *CATEGORIES.choose(&mut r).unwrap();
        for (dir, forward) in [(TraceDirection::Downstream, true), (TraceDirection::Upstream, false)] {
            let paths = trace(&model, &anchor(&start), category, dir, max_depth, &[]);
            prop_assert!(!paths.is_empty());
            let mut covered = BTreeSet::new();
            for p in &paths {
                prop_assert_eq!(&p.nodes[0], &start);
                prop_assert!(p.nodes.len() <= max_depth);
                prop_assert_eq!(p.step_gains.len(), p.nodes.len() - 1);
                let distinct: BTreeSet<&String> = p.nodes.iter().collect();
                prop_assert_eq!(distinct.len(), p.nodes.len(), "not simple");
                for (a, b) in p.edge_pairs() {
                    prop_assert!(model.edge_between(a, b).is_some(), "{} -> {}", a, b);
                }
                let product: f64 = p.step_gains.iter().product();
                prop_assert!((product - p.total_gain).abs() <= 1e-12 * product.max(1.0));
                prop_assert_eq!(p.classification, Classification::of(p.total_gain));
                covered.extend(p.nodes.iter().cloned());
            }
            prop_assert_eq!(covered, oracle_reachable(&model, &start, max_depth, forward));
            let keys: Vec<&Vec<String>> = paths.iter().map(|p| &p.nodes).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
        }
    }

    #[test]
    fn depth_one_trace_is_the_endpoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 15);
        prop_assume!(!model.nodes.is_empty());
        let start = model.nodes.choose(&mut r).unwrap().id.clone();
        let paths = trace(&model, &anchor(&start), "stability", TraceDirection::Downstream, 1, &[]);
        prop_assert_eq!(paths.len(), 1);
        prop_assert_eq!(&paths[0].nodes, &vec![start]);
        prop_assert_eq!(paths[0].total_gain, 1.0);
        prop_assert_eq!(paths[0].classification, Classification::Neutral);
    }

    #[test]
    fn mitigations_never_raise_gain_and_stay_in_category(seed in any::<u64>(), damping in 0.01f64..0.99) {
        let mut r = rng(seed);
        let mut model = random_model(&mut r, 20);
        prop_assume!(!model.nodes.is_empty());
        let start = model.nodes.choose(&mut r).unwrap().id.clone();
        let catalog = vec![
            mitigation("m_node", "stability", Placement::Node, damping),
            mitigation("m_edge", "stability", Placement::Edge, damping),
        ];
        let base_stab = trace(&model, &anchor(&start), "stability", TraceDirection::Downstream, 6, &catalog);
        let base_bias = trace(&model, &anchor(&start), "bias", TraceDirection::Downstream, 6, &catalog);
        for n in &mut model.nodes {
            if r.gen_bool(0.5) {
                n.mitigation_ids.push("m_node".into());
            }
        }
        for e in &mut model.edges {
            if r.gen_bool(0.5) {
                e.mitigation_ids.push("m_edge".into());
            }
        }
        let stab = trace(&model, &anchor(&start), "stability", TraceDirection::Downstream, 6, &catalog);
        let bias = trace(&model, &anchor(&start), "bias", TraceDirection::Downstream, 6, &catalog);
        prop_assert_eq!(bias, base_bias);
        prop_assert_eq!(stab.len(), base_stab.len());
        for (after, before) in stab.iter().zip(&base_stab) {
            prop_assert_eq!(&after.nodes, &before.nodes);
            prop_assert!(after.total_gain <= before.total_gain);
        }
    }

    #[test]
    fn classification_threshold_is_exactly_one(x in 1e-6f64..1e6) {
        let c = Classification::of(x);
        prop_assert_eq!(c == Classification::Amplified, x > 1.0);
        prop_assert_eq!(c == Classification::Mitigated, x < 1.0);
        prop_assert_eq!(Classification::of(1.0), Classification::Neutral);
    }

    #[test]
    fn suggestions_recount_and_grow_with_catalog(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 20);
        let table = map_failure_modes(&extract_interactions(&model), &builtin_catalog());
        let catalog = builtin_mitigations();
        let got = suggest_mitigations(&table, &catalog);
        let want: usize = table
            .rows
            .iter()
            .map(|r| catalog.iter().filter(|m| m.categories.contains(&r.category)).count())
            .sum();
        prop_assert_eq!(got.len(), want);
        let mut wider = catalog.clone();
        wider.push(mitigation("extra", "accuracy", Placement::Node, DEFAULT_DAMPING));
        let more = suggest_mitigations(&table, &wider);
        prop_assert!(more.len() >= got.len());
        prop_assert!(got.iter().all(|s| more.contains(s)));
    }
}

#[test]
fn catalogs_round_trip() {
    let builtin = builtin_catalog();
    let doc = serialize_lens_catalog(&builtin);
    let parsed = parse_lens_catalog(&doc).unwrap();
    assert_eq!(parsed, builtin);
    assert_eq!(serialize_lens_catalog(&parsed).text, doc.text);

    let mits = builtin_mitigations();
    let doc = serialize_mitigation_catalog(&mits);
    let parsed = parse_mitigation_catalog(&doc).unwrap();
    assert_eq!(parsed, mits);
    assert_eq!(serialize_mitigation_catalog(&parsed).text, doc.text);
}

#[test]
fn merge_is_associative_and_rejects_collisions() {
    let a = lens("a", &["a1", "a2"]);
    let b = lens("b", &["b1"]);
    let c = lens("c", &["c1", "c2", "c3"]);
    let left = merge_catalogs(&merge_catalogs(&a, &b).unwrap(), &c).unwrap();
    let right = merge_catalogs(&a, &merge_catalogs(&b, &c).unwrap()).unwrap();
    assert_eq!(left, right);
    assert_eq!(mode_ids(&left), ["a1", "a2", "b1", "c1", "c2", "c3"]);

    let clash = lens("d", &["b1"]);
    assert!(matches!(
        merge_catalogs(&left, &clash),
        Err(LensError::DuplicateMode { ref id, .. }) if id == "b1"
    ));
    assert!(matches!(
        merge_catalogs(&a, &lens("a", &["z"])),
        Err(LensError::DuplicateLens { ref id, .. }) if id == "a"
    ));
    assert!(merge_catalogs(&builtin_catalog(), &builtin_catalog()).is_err());
}
