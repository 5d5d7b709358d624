//! Black-box tests of the binary: exit codes, golden-output equivalence,
//! and interoperability of the checksums file with system tooling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn tracerec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracerec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

#[test]
fn malformed_input_exits_2_and_names_a_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), b"{\"steps\": [oops]}").unwrap();
    let output = tracerec(
        &[
            "ingest",
            "--adapter",
            "bedrock",
            "--input",
            "broken.json",
            "--out",
            "fragments.json",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("byte"), "stderr: {stderr}");
}

#[test]
fn empty_anchor_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.json"), b"[]").unwrap();
    let output = tracerec(
        &[
            "ingest",
            "--adapter",
            "langsmith",
            "--input",
            "empty.json",
            "--out",
            "fragments.json",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn unmapped_record_kind_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("anchor.jsonl"),
        b"{\"kind\": \"mystery\", \"x\": 1}\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("mapping.json"),
        br#"{"record_kind_map": {"known": "agent_message"}}"#,
    )
    .unwrap();
    let output = tracerec(
        &[
            "ingest",
            "--adapter",
            "generic_jsonl",
            "--input",
            "anchor.jsonl",
            "--mapping",
            "mapping.json",
            "--out",
            "fragments.json",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mystery"), "stderr: {stderr}");
}

#[test]
fn replayed_invocation_reproduces_committed_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    std::fs::copy(
        root.join("fixtures/bedrock/anchor.json"),
        dir.path().join("anchor.json"),
    )
    .unwrap();
    let ingest = tracerec(
        &[
            "ingest",
            "--adapter",
            "bedrock",
            "--input",
            "anchor.json",
            "--out",
            "fragments.json",
        ],
        dir.path(),
    );
    assert!(ingest.status.success());
    let reconstruct = tracerec(
        &[
            "reconstruct",
            "--fragments",
            "fragments.json",
            "--out-dir",
            "report",
            "--within-stack-tier",
            "1",
        ],
        dir.path(),
    );
    assert!(reconstruct.status.success());
    for (fresh, golden) in [
        ("fragments.json", "out/bedrock/fragments.json"),
        ("report/feasibility.json", "out/bedrock/feasibility.json"),
        ("report/trace.jsonld", "out/bedrock/trace.jsonld"),
    ] {
        let fresh_bytes = std::fs::read(dir.path().join(fresh)).unwrap();
        let golden_bytes = std::fs::read(root.join(golden)).unwrap();
        assert_eq!(fresh_bytes, golden_bytes, "{golden} must be reproducible");
    }
}

#[test]
fn multi_agent_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    std::fs::copy(
        root.join("out/bedrock/fragments.json"),
        dir.path().join("fragments.json"),
    )
    .unwrap();
    let output = tracerec(
        &[
            "reconstruct",
            "--fragments",
            "fragments.json",
            "--out-dir",
            "report",
            "--single-agent",
            "false",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not implemented"), "stderr: {stderr}");
}

#[test]
fn query_prints_one_node_id_per_line() {
    let root = repo_root();
    let output = tracerec(
        &[
            "query",
            "--graph",
            "out/bedrock/trace.jsonld",
            "--pattern",
            "action_to_policy",
        ],
        &root,
    );
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.trim(), "entity:bedrock_f002");

    let operator = tracerec(
        &[
            "query",
            "--graph",
            "out/mcp/trace.jsonld",
            "--pattern",
            "action_to_operator",
        ],
        &root,
    );
    assert!(operator.status.success());
    assert!(operator.stdout.is_empty(), "MCP has no operator evidence");

    let unknown = tracerec(
        &[
            "query",
            "--graph",
            "out/bedrock/trace.jsonld",
            "--pattern",
            "action_to_nowhere",
        ],
        &root,
    );
    assert_ne!(unknown.status.code(), Some(0));
}

#[test]
fn matrix_check_detects_baseline_drift() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    // Build a scratch report tree from the committed outputs.
    for regime in [
        "bedrock",
        "langsmith",
        "anthropic",
        "openai_agents",
        "otlp_vertex",
        "mcp",
        "oep",
        "replit",
    ] {
        let source = root.join("out").join(regime).join("feasibility.json");
        let target_dir = dir.path().join("reports").join(regime);
        std::fs::create_dir_all(&target_dir).unwrap();
        std::fs::copy(&source, target_dir.join("feasibility.json")).unwrap();
    }
    std::fs::create_dir_all(dir.path().join("baseline")).unwrap();
    for name in ["table2.md", "table3.md", "partition.json"] {
        std::fs::copy(root.join("out").join(name), dir.path().join("baseline").join(name))
            .unwrap();
    }
    let columns = root.join("fixtures/columns.json");

    let ok = tracerec(
        &[
            "matrix",
            "--reports",
            "reports",
            "--columns",
            columns.to_str().unwrap(),
            "--out",
            "rendered",
            "--check",
            "baseline",
        ],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0), "{:?}", ok);

    // A single changed cell must fail the check.
    let tampered = dir.path().join("baseline/table2.md");
    let text = std::fs::read_to_string(&tampered).unwrap();
    std::fs::write(&tampered, text.replacen("| F |", "| S |", 1)).unwrap();
    let drifted = tracerec(
        &[
            "matrix",
            "--reports",
            "reports",
            "--columns",
            columns.to_str().unwrap(),
            "--out",
            "rendered",
            "--check",
            "baseline",
        ],
        dir.path(),
    );
    assert_eq!(drifted.status.code(), Some(1));
}

#[test]
fn matrix_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    for regime in ["bedrock", "langsmith"] {
        let target_dir = dir.path().join("reports").join(regime);
        std::fs::create_dir_all(&target_dir).unwrap();
        std::fs::copy(
            root.join("out").join(regime).join("feasibility.json"),
            target_dir.join("feasibility.json"),
        )
        .unwrap();
    }
    let output = tracerec(
        &[
            "matrix",
            "--reports",
            "reports",
            "--columns",
            root.join("fixtures/columns.json").to_str().unwrap(),
            "--out",
            "rendered",
        ],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("missing column"), "stderr: {stderr}");
}

#[test]
fn verify_exit_codes_track_tree_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    for sub in ["fixtures", "queries", "out"] {
        copy_dir(&root.join(sub), &dir.path().join(sub));
    }
    for file in ["MANIFEST.json", "checksums.txt"] {
        std::fs::copy(root.join(file), dir.path().join(file)).unwrap();
    }
    let clean = tracerec(&["verify"], dir.path());
    assert_eq!(clean.status.code(), Some(0), "{:?}", clean);

    let target = dir.path().join("out/oep/feasibility.json");
    let mut bytes = std::fs::read(&target).unwrap();
    bytes[0] ^= 0x01;
    std::fs::write(&target, &bytes).unwrap();
    let tampered = tracerec(&["verify"], dir.path());
    assert_eq!(tampered.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&tampered.stdout);
    assert!(
        stdout.contains("MISMATCH  out/oep/feasibility.json"),
        "stdout: {stdout}"
    );
}

#[test]
fn checksums_file_is_shasum_compatible() {
    // Cross-check with the system checksum tool when available.
    let root = repo_root();
    let probe = Command::new("sha256sum").arg("--version").output();
    if probe.is_err() {
        eprintln!("sha256sum not available; skipping interop check");
        return;
    }
    let output = Command::new("sha256sum")
        .args(["--check", "--quiet", "checksums.txt"])
        .current_dir(&root)
        .output()
        .expect("sha256sum runs");
    assert!(
        output.status.success(),
        "sha256sum -c failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn copy_dir(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(from).unwrap();
            let target = to.join(rel);
            std::fs::create_dir_all(target.parent().unwrap()).unwrap();
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}
