//! Acceptance suite: one test per release criterion, each printing a
//! pass line. Criteria 1 and 5 regenerate the whole output tree from the
//! committed fixtures in a scratch copy; criterion 6 mutates pinned files
//! at random and expects verification to name them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tracerec_core::feasibility::FeasibilityReport;
use tracerec_core::matrix::CV_UNDEFINED;
use tracerec_core::model::{Category, PropertyClass};
use tracerec_core::provenance::{self, ProvGraph, QueryPattern};
use tracerec_core::repro;

const REGIMES: [&str; 8] = [
    "bedrock",
    "langsmith",
    "anthropic",
    "openai_agents",
    "otlp_vertex",
    "mcp",
    "oep",
    "replit",
];

/// Expected category matrix, one column per regime in REGIMES order.
const EXPECTED_CELLS: [[&str; 7]; 8] = [
    ["F", "F", "F", "F", "O", "F", "F"],
    ["F", "F", "F", "F", "O", "F", "S"],
    ["F", "S", "F", "F", "O", "F", "F"],
    ["F", "F", "F", "F", "O", "F", "F"],
    ["F", "S", "F", "S", "O", "F", "S"],
    ["P", "S", "S", "F", "O", "F", "P"],
    ["F", "F", "F", "F", "S", "F", "F"],
    ["P", "S", "F", "S", "O", "F", "P"],
];

const EXPECTED_PCT: [f64; 8] = [85.7, 71.4, 71.4, 85.7, 42.9, 42.9, 85.7, 42.9];

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

/// Copy the committed evidence tree (or part of it) into a scratch dir.
fn copy_tree(into: &Path, roots: &[&str]) {
    let from = repo_root();
    for root in roots {
        let source = from.join(root);
        if source.is_file() {
            std::fs::create_dir_all(into.join(root).parent().unwrap()).unwrap();
            std::fs::copy(&source, into.join(root)).unwrap();
            continue;
        }
        for entry in walkdir::WalkDir::new(&source) {
            let entry = entry.unwrap();
            if entry.file_type().is_file() {
                let rel = entry.path().strip_prefix(&from).unwrap();
                let target = into.join(rel);
                std::fs::create_dir_all(target.parent().unwrap()).unwrap();
                std::fs::copy(entry.path(), &target).unwrap();
            }
        }
    }
}

fn snapshot_hashes(base: &Path) -> BTreeMap<String, String> {
    let files = repro::collect_files(base, &["out".to_string()]).unwrap();
    files
        .into_iter()
        .map(|rel| {
            let hash = repro::hash_file(&base.join(&rel)).unwrap();
            (rel, hash)
        })
        .collect()
}

fn load_report(base: &Path, regime: &str) -> FeasibilityReport {
    let raw = std::fs::read(base.join(format!("out/{regime}/feasibility.json"))).unwrap();
    FeasibilityReport::from_bytes(&raw).unwrap()
}

#[test]
fn criterion_1_matrix_reproduction() {
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(
        scratch.path(),
        &["fixtures", "queries", "MANIFEST.json", "checksums.txt"],
    );
    let started = Instant::now();
    let report = repro::regenerate_all(scratch.path()).unwrap();
    let elapsed = started.elapsed();
    assert!(report.verification.all_ok(), "regenerated tree must verify");

    for (index, regime) in REGIMES.iter().enumerate() {
        let report = load_report(scratch.path(), regime);
        let letters: Vec<&str> = report
            .findings
            .iter()
            .map(|f| f.category.letter())
            .collect();
        assert_eq!(letters, EXPECTED_CELLS[index], "column {regime}");
    }
    // Well under the stated bound of 10 seconds per anchor.
    assert!(
        elapsed.as_secs_f64() < 10.0 * REGIMES.len() as f64,
        "regeneration took {elapsed:?}"
    );
    println!(
        "acceptance criterion 1 (matrix reproduction, 56 cells, {:.3}s total): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_2_completeness_tiers() {
    let base = repo_root();
    let mut vendor_tiers: BTreeMap<String, u32> = BTreeMap::new();
    for (index, regime) in REGIMES.iter().enumerate() {
        let report = load_report(&base, regime);
        assert_eq!(
            report.completeness_pct, EXPECTED_PCT[index],
            "completeness for {regime}"
        );
        if index < 6 {
            *vendor_tiers
                .entry(format!("{:.1}", report.completeness_pct))
                .or_insert(0) += 1;
        }
    }
    let expected: BTreeMap<String, u32> = [
        ("85.7".to_string(), 2),
        ("71.4".to_string(), 2),
        ("42.9".to_string(), 2),
    ]
    .into_iter()
    .collect();
    assert_eq!(vendor_tiers, expected, "vendor tier counts must be 2/2/2");
    println!("acceptance criterion 2 (completeness tiers 2/2/2): PASS");
}

#[test]
fn criterion_3_summary_statistics() {
    let base = repo_root();
    let spec = tracerec_core::matrix::ColumnSpec::from_bytes(
        &std::fs::read(base.join("fixtures/columns.json")).unwrap(),
    )
    .unwrap();
    let reports: Vec<FeasibilityReport> =
        REGIMES.iter().map(|r| load_report(&base, r)).collect();
    let summary = tracerec_core::matrix::aggregate(&reports, &spec).unwrap();

    let expected_counts: [[u32; 4]; 7] = [
        [5, 1, 0, 0],
        [3, 0, 3, 0],
        [5, 0, 1, 0],
        [5, 0, 1, 0],
        [0, 0, 0, 6],
        [6, 0, 0, 0],
        [3, 1, 2, 0],
    ];
    let expected_means = [0.92, 0.50, 0.83, 0.83, 0.00, 1.00, 0.58];
    let expected_cvs = [
        Some(0.20),
        Some(1.00),
        Some(0.45),
        Some(0.45),
        None,
        Some(0.00),
        Some(0.77),
    ];

    for (row, (property, stats)) in summary.per_property.iter().enumerate() {
        assert_eq!(stats.counts, expected_counts[row], "counts for {property}");
        assert!(
            (stats.mean - expected_means[row]).abs() <= 0.005,
            "mean for {property}: {} vs {}",
            stats.mean,
            expected_means[row]
        );
        match (stats.cv, expected_cvs[row]) {
            (Some(got), Some(want)) => assert!(
                (got - want).abs() <= 0.005,
                "cv for {property}: {got} vs {want}"
            ),
            (None, None) => {}
            other => panic!("cv presence mismatch for {property}: {other:?}"),
        }

        // Independent brute-force sigma/mu oracle, before rounding.
        let row_scores: Vec<f64> = summary
            .columns
            .iter()
            .filter(|c| c.vendor)
            .map(|c| summary.cells[&c.regime][row].score())
            .collect();
        let mean = row_scores.iter().sum::<f64>() / row_scores.len() as f64;
        assert!((mean - stats.mean).abs() < 1e-12);
        if mean > 0.0 {
            let sigma = (row_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
                / row_scores.len() as f64)
                .sqrt();
            assert!((sigma / mean - stats.cv.unwrap()).abs() < 1e-12);
        } else {
            assert!(stats.cv.is_none());
        }
    }

    // The rendered table carries the literal sentinel.
    let table3 = std::fs::read_to_string(base.join("out/table3.md")).unwrap();
    let reasoning_row = table3
        .lines()
        .find(|l| l.starts_with("| reasoning trace"))
        .expect("reasoning trace row");
    assert!(
        reasoning_row.contains(CV_UNDEFINED),
        "sentinel missing from {reasoning_row:?}"
    );
    assert_eq!(CV_UNDEFINED, "undefined (zero mean)");
    println!("acceptance criterion 3 (summary statistics vs oracle): PASS");
}

#[test]
fn criterion_4_gap_partition() {
    let base = repo_root();
    let raw = std::fs::read(base.join("out/partition.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&raw).unwrap();
    let partition = doc.get("gap_partition").unwrap();
    let expected = [
        ("inputs", "mixed"),
        ("policy_basis", "regime_dependent"),
        ("operator_identity", "regime_dependent"),
        ("authorization_envelope", "regime_dependent"),
        ("reasoning_trace", "regime_independent"),
        ("output_action", "unclassified"),
        ("post_condition_state", "regime_dependent"),
    ];
    for (property, class) in expected {
        assert_eq!(
            partition.get(property).and_then(|v| v.as_str()),
            Some(class),
            "{property}"
        );
    }
    assert_eq!(partition.as_object().unwrap().len(), 7);
    println!("acceptance criterion 4 (gap partition): PASS");
}

#[test]
fn criterion_5_determinism_across_regenerations() {
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(
        scratch.path(),
        &["fixtures", "queries", "MANIFEST.json", "checksums.txt"],
    );
    repro::regenerate_all(scratch.path()).unwrap();
    let first = snapshot_hashes(scratch.path());
    let second_run = repro::regenerate_all(scratch.path()).unwrap();
    let second = snapshot_hashes(scratch.path());
    assert_eq!(first, second, "regeneration must be byte-identical");
    assert_eq!(
        second_run.files_changed, 0,
        "second regeneration must change zero files"
    );
    assert_eq!(first.len(), 8 * 3 + 3, "expected output tree size");
    println!(
        "acceptance criterion 5 (determinism, {} files hash-identical): PASS",
        first.len()
    );
}

#[test]
fn criterion_6_checksum_harness_catches_mutations() {
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(
        scratch.path(),
        &["fixtures", "queries", "out", "MANIFEST.json", "checksums.txt"],
    );
    let manifest = repro::OriginManifest::load(&scratch.path().join("MANIFEST.json")).unwrap();
    let checksums =
        std::fs::read_to_string(scratch.path().join("checksums.txt")).unwrap();

    let clean = repro::verify(scratch.path(), &manifest, &checksums).unwrap();
    assert!(clean.all_ok(), "clean tree must verify");

    let pinned: Vec<String> = repro::parse_checksums(&checksums)
        .unwrap()
        .into_iter()
        .map(|(_, path)| path)
        .collect();

    let mut rng = StdRng::seed_from_u64(0x5eed);
    for round in 0..24 {
        let path = &pinned[rng.gen_range(0..pinned.len())];
        let absolute = scratch.path().join(path);
        let original = std::fs::read(&absolute).unwrap();
        assert!(!original.is_empty(), "{path} is empty");
        let mut mutated = original.clone();
        let index = rng.gen_range(0..mutated.len());
        mutated[index] ^= 0x01;
        std::fs::write(&absolute, &mutated).unwrap();

        let report = repro::verify(scratch.path(), &manifest, &checksums).unwrap();
        assert!(!report.all_ok(), "round {round}: mutation must fail");
        let named = report
            .failures()
            .any(|entry| &entry.path == path);
        assert!(named, "round {round}: failure must name `{path}`");

        std::fs::write(&absolute, &original).unwrap();
    }
    let restored = repro::verify(scratch.path(), &manifest, &checksums).unwrap();
    assert!(restored.all_ok(), "restored tree must verify again");
    println!("acceptance criterion 6 (checksum harness, 24 random mutations): PASS");
}

#[test]
fn criterion_7_provenance_consistency() {
    let base = repo_root();
    for regime in REGIMES {
        let report = load_report(&base, regime);
        let raw = std::fs::read(base.join(format!("out/{regime}/trace.jsonld"))).unwrap();
        let graph = ProvGraph::from_jsonld(&raw).unwrap();
        for (pattern, property) in [
            (QueryPattern::ActionToPolicy, PropertyClass::PolicyBasis),
            (
                QueryPattern::ActionToAuthorizer,
                PropertyClass::AuthorizationEnvelope,
            ),
            (
                QueryPattern::ActionToOperator,
                PropertyClass::OperatorIdentity,
            ),
        ] {
            let results = provenance::query(&graph, pattern);
            let category = report
                .findings
                .iter()
                .find(|f| f.property == property)
                .unwrap()
                .category;
            let evidenced = matches!(
                category,
                Category::FullyFillable | Category::PartiallyFillable
            );
            assert_eq!(
                !results.is_empty(),
                evidenced,
                "{regime}/{}: query results {results:?} vs category {category:?}",
                pattern.as_str()
            );
        }
    }
    println!("acceptance criterion 7 (provenance biconditionals over 8 anchors): PASS");
}

#[test]
fn criterion_8_pipeline_properties() {
    use serde_json::{json, Map};
    use tracerec_core::model::{Fragment, FragmentKind};
    use tracerec_core::pipeline::{self, PipelineConfig};

    let fragment = |id: &str, kind: FragmentKind, ordinal: u32, ts: Option<i64>| Fragment {
        id: id.to_string(),
        kind,
        timestamp: ts.map(tracerec_core::model::format_millis),
        ordinal,
        payload: Map::new(),
        attribution: None,
        inspectable: true,
        refs: vec![],
        regime: "synthetic".to_string(),
    };

    // Randomized permutation sweep.
    let mut rng = StdRng::seed_from_u64(0xacce97);
    let kinds = [
        FragmentKind::ConfigSnapshot,
        FragmentKind::PolicySnapshot,
        FragmentKind::AgentMessage,
        FragmentKind::ToolCall,
        FragmentKind::StateMutation,
        FragmentKind::HumanApproval,
        FragmentKind::ModelGeneration,
    ];
    let config = PipelineConfig::default();
    for _ in 0..200 {
        let len = rng.gen_range(1..16);
        let all_timestamped = rng.gen_bool(0.5);
        let fragments: Vec<Fragment> = (0..len)
            .map(|i| {
                let ts = if all_timestamped || rng.gen_bool(0.7) {
                    Some(1_777_366_800_000 + rng.gen_range(0..60_000))
                } else {
                    None
                };
                fragment(&format!("f{i:03}"), kinds[rng.gen_range(0..7)], i, ts)
            })
            .collect();
        let mut before: Vec<String> = fragments.iter().map(|f| f.id.clone()).collect();
        let ordered = pipeline::order_fragments(fragments);
        let mut after: Vec<String> = ordered.iter().map(|f| f.id.clone()).collect();
        before.sort();
        after.sort();
        assert_eq!(before, after, "ordering must be a permutation");

        let assembly = pipeline::assemble_chain(&ordered, &config).unwrap();
        let tool_calls = ordered
            .iter()
            .filter(|f| f.kind == FragmentKind::ToolCall)
            .count();
        match pipeline::detect_boundaries(&ordered, &assembly, &config) {
            Ok(units) => {
                assert_eq!(units.len(), tool_calls);
                for tc in ordered.iter().filter(|f| f.kind == FragmentKind::ToolCall) {
                    let owners = units
                        .iter()
                        .filter(|u| u.fragment_ids.contains(&tc.id))
                        .count();
                    assert_eq!(owners, 1, "tool_call {} in exactly one unit", tc.id);
                }
            }
            Err(_) => assert_eq!(tool_calls, 0),
        }
    }

    // Tier k=2 halves the unit count on a synthetic two-pair anchor.
    let two_pairs = vec![
        fragment("m0", FragmentKind::AgentMessage, 0, None),
        fragment("t0", FragmentKind::ToolCall, 1, None),
        fragment("s0", FragmentKind::StateMutation, 2, None),
        fragment("m1", FragmentKind::AgentMessage, 3, None),
        fragment("t1", FragmentKind::ToolCall, 4, None),
        fragment("s1", FragmentKind::StateMutation, 5, None),
    ];
    let assembly = pipeline::assemble_chain(&two_pairs, &config).unwrap();
    let tier1 = pipeline::detect_boundaries(&two_pairs, &assembly, &config).unwrap();
    assert_eq!(tier1.len(), 2);
    let merged_config = PipelineConfig {
        within_stack_tier: 2,
        ..PipelineConfig::default()
    };
    let tier2 = pipeline::detect_boundaries(&two_pairs, &assembly, &merged_config).unwrap();
    assert_eq!(tier2.len(), 1, "k=2 must halve the unit count");

    // The default regex tags the destructive payload as mutating.
    let mut drop_call = fragment("t", FragmentKind::ToolCall, 0, None);
    drop_call.payload = json!({
        "tool_name": "execute_sql",
        "arguments": {"query": "DROP DATABASE production_db"}
    })
    .as_object()
    .cloned()
    .unwrap();
    let assembly = pipeline::assemble_chain(&[drop_call], &config).unwrap();
    assert_eq!(assembly.mutating_tool_calls, vec!["t".to_string()]);

    println!("acceptance criterion 8 (pipeline properties): PASS");
}
