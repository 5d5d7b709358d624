//! Tier-A reproducibility: the per-anchor origin manifest, shasum-style
//! checksums, one-command verification, and full regeneration of every
//! committed output from the fixture corpus via the manifest's verbatim
//! CLI invocations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapters::{AdapterError, IngestMode, MappingConfig};
use crate::feasibility::{self, FeasibilityError, FeasibilityReport};
use crate::matrix::{self, ColumnSpec, MatrixError};
use crate::model::{format_millis, FragmentsFile, ModelError};
use crate::pipeline::PipelineConfig;
use crate::provenance::{self, ProvError};

#[derive(Debug, Error)]
pub enum ReproError {
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid origin manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid checksums file: {0}")]
    InvalidChecksums(String),
    #[error("cannot replay invocation `{invocation}`: {detail}")]
    Invocation { invocation: String, detail: String },
    #[error("stage `{stage}` failed for anchor `{anchor}`: {message}")]
    Stage {
        anchor: String,
        stage: String,
        message: String,
    },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Prov(#[from] ProvError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> ReproError {
    ReproError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Origin manifest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    WorkedExample,
    PublicRecordReconstruction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHashes {
    pub anchor_input: String,
    pub fragments_output: String,
    pub feasibility_output: String,
    pub trace_jsonld: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub anchor_id: String,
    pub regime: String,
    pub adapter: String,
    pub source_path: String,
    pub anchor_kind: AnchorKind,
    pub date: String,
    pub sample_count: u32,
    /// Verbatim replayable command line, no placeholders. Two commands
    /// (ingest, reconstruct) joined by " && ".
    pub cli_invocation: String,
    pub sha256: ArtifactHashes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginManifest {
    pub anchors: Vec<AnchorEntry>,
    pub tool_version: String,
}

fn is_hex64(hash: &str) -> bool {
    hash.len() == 64 && hash.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl OriginManifest {
    pub fn from_bytes(raw: &[u8]) -> Result<Self, ReproError> {
        let manifest: Self = serde_json::from_slice(raw)
            .map_err(|e| ReproError::InvalidManifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, ReproError> {
        let raw = fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&raw)
    }

    pub fn validate(&self) -> Result<(), ReproError> {
        if self.anchors.len() != 8 {
            return Err(ReproError::InvalidManifest(format!(
                "expected 8 anchor entries, found {}",
                self.anchors.len()
            )));
        }
        for entry in &self.anchors {
            if entry.sample_count != 1 {
                return Err(ReproError::InvalidManifest(format!(
                    "anchor `{}` must have sample_count 1",
                    entry.anchor_id
                )));
            }
            if entry.regime == "replit"
                && entry.anchor_kind != AnchorKind::PublicRecordReconstruction
            {
                return Err(ReproError::InvalidManifest(
                    "the replit entry must be a public-record reconstruction".to_string(),
                ));
            }
            for (label, hash) in [
                ("anchor_input", &entry.sha256.anchor_input),
                ("fragments_output", &entry.sha256.fragments_output),
                ("feasibility_output", &entry.sha256.feasibility_output),
                ("trace_jsonld", &entry.sha256.trace_jsonld),
            ] {
                if !is_hex64(hash) {
                    return Err(ReproError::InvalidManifest(format!(
                        "anchor `{}`: {label} is not 64 lowercase hex chars",
                        entry.anchor_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Committed report-directory layout per regime.
pub fn fragments_rel(regime: &str) -> String {
    format!("out/{regime}/fragments.json")
}

pub fn feasibility_rel(regime: &str) -> String {
    format!("out/{regime}/feasibility.json")
}

pub fn trace_rel(regime: &str) -> String {
    format!("out/{regime}/trace.jsonld")
}

// ---------------------------------------------------------------------------
// Hashing and checksums

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn hash_file(path: &Path) -> Result<String, ReproError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Expand files and directories (recursively) under `base` into sorted
/// relative paths with forward slashes.
pub fn collect_files(base: &Path, roots: &[String]) -> Result<Vec<String>, ReproError> {
    let mut files = Vec::new();
    for root in roots {
        let absolute = base.join(root);
        if absolute.is_file() {
            files.push(root.replace('\\', "/"));
            continue;
        }
        if !absolute.is_dir() {
            return Err(io_err(
                &absolute,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
        for entry in walkdir::WalkDir::new(&absolute).sort_by_file_name() {
            let entry = entry.map_err(|e| ReproError::Io {
                path: absolute.display().to_string(),
                source: e.into(),
            })?;
            if entry.file_type().is_file() {
                let rel = entry
                    .path()
                    .strip_prefix(base)
                    .expect("walked under base")
                    .to_string_lossy()
                    .replace('\\', "/");
                files.push(rel);
            }
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// shasum-compatible checksums: `<sha256 hex>`, two spaces, relative
/// path, LF; lines sorted by path, trailing newline.
pub fn write_checksums(base: &Path, paths: &[String]) -> Result<Vec<u8>, ReproError> {
    let mut sorted = paths.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut out = String::new();
    for path in &sorted {
        let hash = hash_file(&base.join(path))?;
        out.push_str(&format!("{hash}  {path}\n"));
    }
    Ok(out.into_bytes())
}

pub fn parse_checksums(text: &str) -> Result<Vec<(String, String)>, ReproError> {
    let mut entries = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let (hash, path) = line.split_once("  ").ok_or_else(|| {
            ReproError::InvalidChecksums(format!("line {}: expected two-space separator", number + 1))
        })?;
        if !is_hex64(hash) {
            return Err(ReproError::InvalidChecksums(format!(
                "line {}: `{hash}` is not a lowercase sha256",
                number + 1
            )));
        }
        entries.push((hash.to_string(), path.to_string()));
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    Ok,
    Mismatch,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub path: String,
    pub status: VerifyStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<VerifyEntry>,
}

impl VerificationReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.status == VerifyStatus::Ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyEntry> {
        self.entries.iter().filter(|e| e.status != VerifyStatus::Ok)
    }
}

/// Recompute every pinned hash (checksums file plus the per-anchor
/// manifest hashes) against the tree under `base`.
pub fn verify(
    base: &Path,
    manifest: &OriginManifest,
    checksums_text: &str,
) -> Result<VerificationReport, ReproError> {
    let mut expected: BTreeMap<String, String> = BTreeMap::new();
    let mut expect = |path: String, hash: String| -> Result<(), ReproError> {
        if let Some(previous) = expected.insert(path.clone(), hash.clone()) {
            if previous != hash {
                return Err(ReproError::InvalidManifest(format!(
                    "conflicting expected hashes for `{path}`"
                )));
            }
        }
        Ok(())
    };

    for (hash, path) in parse_checksums(checksums_text)? {
        expect(path, hash)?;
    }
    for entry in &manifest.anchors {
        expect(entry.source_path.clone(), entry.sha256.anchor_input.clone())?;
        expect(
            fragments_rel(&entry.regime),
            entry.sha256.fragments_output.clone(),
        )?;
        expect(
            feasibility_rel(&entry.regime),
            entry.sha256.feasibility_output.clone(),
        )?;
        expect(trace_rel(&entry.regime), entry.sha256.trace_jsonld.clone())?;
    }

    let mut report = VerificationReport::default();
    for (path, hash) in &expected {
        let absolute = base.join(path);
        let status = if !absolute.is_file() {
            VerifyStatus::Missing
        } else if &hash_file(&absolute)? == hash {
            VerifyStatus::Ok
        } else {
            VerifyStatus::Mismatch
        };
        report.entries.push(VerifyEntry {
            path: path.clone(),
            status,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Shared file-producing operations (used by the CLI and by regen)

/// Write only when content differs; reports whether the file changed.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool, ReproError> {
    if let Ok(existing) = fs::read(path) {
        if existing == bytes {
            return Ok(false);
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(true)
}

pub fn ingest_to_file(
    base: &Path,
    mode: IngestMode,
    input: &str,
    mapping: Option<&str>,
    out: &str,
) -> Result<bool, ReproError> {
    let input_path = base.join(input);
    let raw = fs::read(&input_path).map_err(|e| io_err(&input_path, e))?;
    let mapping = mapping
        .map(|rel| {
            let path = base.join(rel);
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            MappingConfig::from_bytes(&bytes).map_err(ReproError::from)
        })
        .transpose()?;
    let file = crate::adapters::ingest_mode(mode, &raw, mapping.as_ref())?;
    let bytes = file.to_canonical_bytes()?;
    write_if_changed(&base.join(out), &bytes)
}

pub fn reconstruct_to_dir(
    base: &Path,
    fragments: &str,
    out_dir: &str,
    config: &PipelineConfig,
) -> Result<usize, ReproError> {
    let fragments_path = base.join(fragments);
    let raw = fs::read(&fragments_path).map_err(|e| io_err(&fragments_path, e))?;
    let file = FragmentsFile::from_bytes(&raw)?;
    let output = feasibility::reconstruct(&file, config)?;
    let graph = provenance::build_graph(&output.ordered, &output.units);

    let mut changed = 0;
    let out_dir = base.join(out_dir);
    if write_if_changed(
        &out_dir.join("feasibility.json"),
        &output.report.to_canonical_bytes()?,
    )? {
        changed += 1;
    }
    if write_if_changed(&out_dir.join("trace.jsonld"), &graph.serialize_jsonld()?)? {
        changed += 1;
    }
    Ok(changed)
}

/// Load one feasibility report per column (when present) and render the
/// matrix artifacts into `out_dir`. A column without a report surfaces as
/// MissingColumn from the aggregator.
pub fn run_matrix(
    base: &Path,
    reports_dir: &str,
    columns: &str,
    out_dir: &str,
) -> Result<usize, ReproError> {
    let columns_path = base.join(columns);
    let spec_raw = fs::read(&columns_path).map_err(|e| io_err(&columns_path, e))?;
    let spec = ColumnSpec::from_bytes(&spec_raw)?;

    let mut reports: Vec<FeasibilityReport> = Vec::new();
    for column in &spec.columns {
        let path = base
            .join(reports_dir)
            .join(&column.regime)
            .join("feasibility.json");
        if !path.is_file() {
            continue;
        }
        let raw = fs::read(&path).map_err(|e| io_err(&path, e))?;
        reports.push(FeasibilityReport::from_bytes(&raw)?);
    }
    let summary = matrix::aggregate(&reports, &spec)?;

    let out_dir = base.join(out_dir);
    let mut changed = 0;
    if write_if_changed(
        &out_dir.join("table2.md"),
        matrix::render_table2(&summary).as_bytes(),
    )? {
        changed += 1;
    }
    if write_if_changed(
        &out_dir.join("table3.md"),
        matrix::render_table3(&summary).as_bytes(),
    )? {
        changed += 1;
    }
    if write_if_changed(
        &out_dir.join("partition.json"),
        &matrix::render_partition_json(&summary)?,
    )? {
        changed += 1;
    }
    Ok(changed)
}

// ---------------------------------------------------------------------------
// Invocation replay and full regeneration

/// Parse one recorded command line (whitespace-separated, no quoting)
/// and execute it against `base`. Returns the number of files changed.
pub fn run_invocation(base: &Path, invocation: &str) -> Result<usize, ReproError> {
    let fail = |detail: &str| ReproError::Invocation {
        invocation: invocation.to_string(),
        detail: detail.to_string(),
    };
    let tokens: Vec<&str> = invocation.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(fail("expected `<binary> <subcommand> ...`"));
    }
    let mut flags: BTreeMap<&str, &str> = BTreeMap::new();
    let mut index = 2;
    while index < tokens.len() {
        let flag = tokens[index]
            .strip_prefix("--")
            .ok_or_else(|| fail(&format!("expected a --flag, found `{}`", tokens[index])))?;
        let value = tokens
            .get(index + 1)
            .ok_or_else(|| fail(&format!("flag --{flag} has no value")))?;
        flags.insert(flag, value);
        index += 2;
    }
    let required = |flag: &str| {
        flags
            .get(flag)
            .copied()
            .ok_or_else(|| fail(&format!("missing required flag --{flag}")))
    };

    match tokens[1] {
        "ingest" => {
            let mode = IngestMode::from_str(required("adapter")?)
                .map_err(|e| fail(&e.to_string()))?;
            let changed = ingest_to_file(
                base,
                mode,
                required("input")?,
                flags.get("mapping").copied(),
                required("out")?,
            )?;
            Ok(usize::from(changed))
        }
        "reconstruct" => {
            let mut config = PipelineConfig::default();
            if let Some(k) = flags.get("within-stack-tier") {
                config.within_stack_tier =
                    k.parse().map_err(|_| fail("--within-stack-tier must be an integer"))?;
            }
            if let Some(re) = flags.get("state-mutation-regex") {
                config.state_mutation_regex = re.to_string();
            }
            if let Some(flag) = flags.get("single-agent") {
                config.single_agent =
                    flag.parse().map_err(|_| fail("--single-agent must be a bool"))?;
            }
            reconstruct_to_dir(base, required("fragments")?, required("out-dir")?, &config)
        }
        other => Err(fail(&format!("unsupported subcommand `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: String,
    pub files_changed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenReport {
    pub stages: Vec<StageResult>,
    pub files_changed: usize,
    pub verification: VerificationReport,
}

/// Standard relative locations inside a reproducibility tree.
pub const MANIFEST_FILE: &str = "MANIFEST.json";
pub const CHECKSUMS_FILE: &str = "checksums.txt";
pub const COLUMNS_FILE: &str = "fixtures/columns.json";

/// Run ingest + reconstruct for every anchor with the manifest's verbatim
/// invocations, then the matrix render, then verification. Idempotent: a
/// second run changes zero files.
pub fn regenerate_all(base: &Path) -> Result<RegenReport, ReproError> {
    let manifest = OriginManifest::load(&base.join(MANIFEST_FILE))?;
    let mut stages = Vec::new();
    let mut files_changed = 0;

    for entry in &manifest.anchors {
        let mut changed = 0;
        for command in entry.cli_invocation.split(" && ") {
            changed += run_invocation(base, command).map_err(|e| ReproError::Stage {
                anchor: entry.anchor_id.clone(),
                stage: "regenerate".to_string(),
                message: e.to_string(),
            })?;
        }
        files_changed += changed;
        stages.push(StageResult {
            stage: format!("regenerate {}", entry.anchor_id),
            files_changed: changed,
        });
    }

    let matrix_changed =
        run_matrix(base, "out", COLUMNS_FILE, "out").map_err(|e| ReproError::Stage {
            anchor: "-".to_string(),
            stage: "matrix".to_string(),
            message: e.to_string(),
        })?;
    files_changed += matrix_changed;
    stages.push(StageResult {
        stage: "matrix".to_string(),
        files_changed: matrix_changed,
    });

    let checksums_path = base.join(CHECKSUMS_FILE);
    let checksums_text =
        fs::read_to_string(&checksums_path).map_err(|e| io_err(&checksums_path, e))?;
    let verification = verify(base, &manifest, &checksums_text)?;
    stages.push(StageResult {
        stage: "verify".to_string(),
        files_changed: 0,
    });

    Ok(RegenReport {
        stages,
        files_changed,
        verification,
    })
}

/// Timestamp for run reports; honors SOURCE_DATE_EPOCH for reproducible
/// builds.
pub fn run_timestamp() -> String {
    let millis = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|value| value.parse::<i64>().ok())
        .map(|seconds| seconds * 1000)
        .unwrap_or_else(|| chrono::Utc::now().timestamp_millis());
    format_millis(millis)
}
