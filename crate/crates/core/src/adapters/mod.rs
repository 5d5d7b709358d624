//! Per-regime adapters: parse each regime's native anchor file into the
//! normalized fragments file. One adapter per vendor regime plus a
//! configurable generic JSONL adapter and a loader for pre-built fragment
//! manifests. Adapters are pure functions of (raw bytes, mapping config);
//! re-running an ingest yields byte-identical output.

mod anthropic;
mod bedrock;
mod generic;
mod langsmith;
mod manifest;
mod mcp;
mod openai;
mod otlp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Fragment, FragmentKind, FragmentsFile, ModelError};

pub use manifest::load_replit_manifest;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("malformed input at byte {offset}: {detail}")]
    MalformedInput { offset: usize, detail: String },
    #[error("unknown record kind `{kind}`: not covered by the mapping config")]
    UnknownRecordKind { kind: String },
    #[error("empty anchor: no decision-relevant fragments")]
    EmptyAnchor,
    #[error("invalid mapping config: {0}")]
    InvalidMapping(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The adapter set, one per supported evidence regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterId {
    Bedrock,
    Langsmith,
    Anthropic,
    OpenaiAgents,
    Otlp,
    Mcp,
    GenericJsonl,
}

impl AdapterId {
    pub const ALL: [AdapterId; 7] = [
        Self::Bedrock,
        Self::Langsmith,
        Self::Anthropic,
        Self::OpenaiAgents,
        Self::Otlp,
        Self::Mcp,
        Self::GenericJsonl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bedrock => "bedrock",
            Self::Langsmith => "langsmith",
            Self::Anthropic => "anthropic",
            Self::OpenaiAgents => "openai_agents",
            Self::Otlp => "otlp",
            Self::Mcp => "mcp",
            Self::GenericJsonl => "generic_jsonl",
        }
    }
}

impl fmt::Display for AdapterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterId {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "bedrock" => Ok(Self::Bedrock),
            "langsmith" => Ok(Self::Langsmith),
            "anthropic" => Ok(Self::Anthropic),
            "openai_agents" => Ok(Self::OpenaiAgents),
            "otlp" => Ok(Self::Otlp),
            "mcp" => Ok(Self::Mcp),
            "generic_jsonl" => Ok(Self::GenericJsonl),
            other => Err(AdapterError::InvalidMapping(format!(
                "unknown adapter `{other}`"
            ))),
        }
    }
}

/// How `ingest` reads an input: through a vendor adapter, or by loading a
/// pre-built fragment manifest that needs no adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    Adapter(AdapterId),
    ReplitManifest,
}

impl FromStr for IngestMode {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "replit_manifest" => Ok(Self::ReplitManifest),
            _ => AdapterId::from_str(s).map(Self::Adapter),
        }
    }
}

/// Target kind(s) for one source record kind. A record may emit more than
/// one fragment (e.g. a permission packet that carries both the policy
/// decision and the permission envelope).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindTargets {
    One(FragmentKind),
    Many(Vec<FragmentKind>),
}

impl KindTargets {
    pub fn as_slice(&self) -> &[FragmentKind] {
        match self {
            Self::One(kind) => std::slice::from_ref(kind),
            Self::Many(kinds) => kinds,
        }
    }
}

/// Mapping configuration for the generic JSONL adapter. Source kinds not
/// named in `record_kind_map` are rejected at load time. The effective
/// source kind of a record is its `kind` field, suffixed with
/// `.<step_type>` when a `step_type` field is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub record_kind_map: BTreeMap<String, KindTargets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_field: Option<String>,
    #[serde(default)]
    pub inspectable_rule: BTreeMap<String, bool>,
}

impl MappingConfig {
    pub fn from_bytes(raw: &[u8]) -> Result<Self, AdapterError> {
        let config: Self = serde_json::from_slice(raw)
            .map_err(|e| AdapterError::InvalidMapping(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.record_kind_map.is_empty() {
            return Err(AdapterError::InvalidMapping(
                "record_kind_map must not be empty".to_string(),
            ));
        }
        for (source, targets) in &self.record_kind_map {
            if targets.as_slice().is_empty() {
                return Err(AdapterError::InvalidMapping(format!(
                    "source kind `{source}` maps to an empty target list"
                )));
            }
        }
        Ok(())
    }
}

/// Parse a regime's native anchor file into the normalized fragments
/// file. `mapping` is consumed only by the generic JSONL adapter.
pub fn ingest(
    adapter: AdapterId,
    raw: &[u8],
    mapping: Option<&MappingConfig>,
) -> Result<FragmentsFile, AdapterError> {
    if adapter != AdapterId::GenericJsonl && mapping.is_some() {
        return Err(AdapterError::InvalidMapping(format!(
            "adapter `{adapter}` does not take a mapping config"
        )));
    }
    // A bare empty JSON array is a degenerate-but-parseable anchor under
    // every adapter.
    if raw.trim_ascii() == b"[]" {
        return Err(AdapterError::EmptyAnchor);
    }
    let file = match adapter {
        AdapterId::Bedrock => bedrock::parse(raw)?,
        AdapterId::Langsmith => langsmith::parse(raw)?,
        AdapterId::Anthropic => anthropic::parse(raw)?,
        AdapterId::OpenaiAgents => openai::parse(raw)?,
        AdapterId::Otlp => otlp::parse(raw)?,
        AdapterId::Mcp => mcp::parse(raw)?,
        AdapterId::GenericJsonl => {
            let mapping = mapping.ok_or_else(|| {
                AdapterError::InvalidMapping(
                    "the generic_jsonl adapter requires a mapping config".to_string(),
                )
            })?;
            generic::parse(raw, mapping)?
        }
    };
    if file.fragments.is_empty() {
        return Err(AdapterError::EmptyAnchor);
    }
    file.validate()?;
    Ok(file)
}

/// Ingest under either an adapter or the pre-built manifest loader.
pub fn ingest_mode(
    mode: IngestMode,
    raw: &[u8],
    mapping: Option<&MappingConfig>,
) -> Result<FragmentsFile, AdapterError> {
    match mode {
        IngestMode::Adapter(adapter) => ingest(adapter, raw, mapping),
        IngestMode::ReplitManifest => {
            if mapping.is_some() {
                return Err(AdapterError::InvalidMapping(
                    "the manifest loader does not take a mapping config".to_string(),
                ));
            }
            load_replit_manifest(raw)
        }
    }
}

/// Byte offset of a 1-based (line, column) position in `raw`.
pub(crate) fn byte_offset(raw: &[u8], line: usize, column: usize) -> usize {
    if line <= 1 {
        return column.saturating_sub(1);
    }
    let mut newlines_to_skip = line - 1;
    let mut line_start = 0;
    for (index, byte) in raw.iter().enumerate() {
        if *byte == b'\n' {
            newlines_to_skip -= 1;
            line_start = index + 1;
            if newlines_to_skip == 0 {
                break;
            }
        }
    }
    line_start + column.saturating_sub(1)
}

pub(crate) fn malformed_json(raw: &[u8], err: &serde_json::Error) -> AdapterError {
    AdapterError::MalformedInput {
        offset: byte_offset(raw, err.line(), err.column()),
        detail: err.to_string(),
    }
}

pub(crate) fn malformed(offset: usize, detail: impl Into<String>) -> AdapterError {
    AdapterError::MalformedInput {
        offset,
        detail: detail.into(),
    }
}

/// Ordered fragment accumulator shared by the adapters; assigns contiguous
/// ordinals and position-derived fragment ids.
pub(crate) struct FragmentStream {
    regime: String,
    prefix: String,
    fragments: Vec<Fragment>,
}

pub(crate) struct FragmentSpec {
    pub kind: FragmentKind,
    pub payload: Map<String, Value>,
    pub timestamp: Option<String>,
    pub attribution: Option<String>,
    pub inspectable: bool,
    pub refs: Vec<String>,
}

impl FragmentSpec {
    pub fn new(kind: FragmentKind, payload: Map<String, Value>) -> Self {
        Self {
            kind,
            payload,
            timestamp: None,
            attribution: None,
            inspectable: true,
            refs: vec![],
        }
    }

    pub fn timestamp(mut self, timestamp: Option<String>) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn attribution(mut self, attribution: Option<String>) -> Self {
        self.attribution = attribution;
        self
    }

    pub fn inspectable(mut self, inspectable: bool) -> Self {
        self.inspectable = inspectable;
        self
    }

    pub fn refs(mut self, refs: Vec<String>) -> Self {
        self.refs = refs;
        self
    }
}

impl FragmentStream {
    pub fn new(regime: &str, prefix: &str) -> Self {
        Self {
            regime: regime.to_string(),
            prefix: prefix.to_string(),
            fragments: Vec::new(),
        }
    }

    /// Append a fragment; returns its assigned id.
    pub fn push(&mut self, spec: FragmentSpec) -> String {
        let ordinal = self.fragments.len() as u32;
        let id = format!("{}_f{:03}", self.prefix, ordinal);
        self.fragments.push(Fragment {
            id: id.clone(),
            kind: spec.kind,
            timestamp: spec.timestamp,
            ordinal,
            payload: spec.payload,
            attribution: spec.attribution,
            inspectable: spec.inspectable,
            refs: spec.refs,
            regime: self.regime.clone(),
        });
        id
    }

    pub fn into_file(self, anchor_id: String, adapter: &str) -> FragmentsFile {
        FragmentsFile {
            anchor_id,
            adapter: adapter.to_string(),
            regime: self.regime,
            fragments: self.fragments,
        }
    }
}

/// Shared helper: object field as string.
pub(crate) fn str_field<'a>(value: &'a Value, key: &str) -> Option<&'a str> {
    value.get(key).and_then(Value::as_str)
}

/// Split JSONL input into (line, starting byte offset) pairs. A trailing
/// newline is required so emitted checksums stay bit-exact.
pub(crate) fn jsonl_lines(raw: &[u8]) -> Result<Vec<(usize, &str)>, AdapterError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| malformed(e.valid_up_to(), "input is not valid UTF-8"))?;
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(malformed(raw.len(), "JSONL input must end with a newline"));
    }
    let mut lines = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if !trimmed.trim().is_empty() {
            lines.push((offset, trimmed));
        }
        offset += line.len();
    }
    Ok(lines)
}
