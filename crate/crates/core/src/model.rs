//! Shared domain types: fragments, decision units, and the
//! property/category vocabulary used by every other module.

use std::fmt;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Hard cap on fragments per anchor (pilot scale).
pub const MAX_FRAGMENTS_PER_ANCHOR: usize = 50;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid fragments file: {0}")]
    InvalidFragmentsFile(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// The seven normalized evidence-record kinds. Adapters may not invent
/// new kinds; span events and vendor-specific records are folded into
/// these at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    ConfigSnapshot,
    PolicySnapshot,
    AgentMessage,
    ToolCall,
    StateMutation,
    HumanApproval,
    ModelGeneration,
}

impl FragmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConfigSnapshot => "config_snapshot",
            Self::PolicySnapshot => "policy_snapshot",
            Self::AgentMessage => "agent_message",
            Self::ToolCall => "tool_call",
            Self::StateMutation => "state_mutation",
            Self::HumanApproval => "human_approval",
            Self::ModelGeneration => "model_generation",
        }
    }
}

impl fmt::Display for FragmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One normalized evidence record produced by an adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    /// Unique within one anchor.
    pub id: String,
    pub kind: FragmentKind,
    /// ISO-8601 UTC instant normalized to millisecond precision, when the
    /// source record carried one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    /// Position in the source file; contiguous from 0 within one anchor.
    pub ordinal: u32,
    pub payload: Map<String, Value>,
    /// Principal identifier, when the source record attributes the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution: Option<String>,
    /// Whether the payload content is externally readable as evidence.
    pub inspectable: bool,
    /// Ids of earlier fragments this fragment points back to.
    #[serde(default)]
    pub refs: Vec<String>,
    pub regime: String,
}

impl Fragment {
    /// Payload serialized as canonical compact JSON, used for regex tagging.
    pub fn payload_text(&self) -> String {
        Value::Object(self.payload.clone()).to_string()
    }

    /// A payload explicitly flagged incomplete (e.g. a prompt paraphrased
    /// from a public record rather than captured verbatim).
    pub fn is_flagged_incomplete(&self) -> bool {
        matches!(self.payload.get("incomplete"), Some(Value::Bool(true)))
    }
}

/// The normalized fragments file: the unit of exchange between `ingest`
/// and `reconstruct`. Canonical encoding is sorted-key JSON with LF line
/// endings; output must be byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentsFile {
    pub anchor_id: String,
    /// Adapter that produced the file ("none" for pre-built manifests).
    pub adapter: String,
    pub regime: String,
    pub fragments: Vec<Fragment>,
}

impl FragmentsFile {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.fragments.len() > MAX_FRAGMENTS_PER_ANCHOR {
            return Err(ModelError::InvalidFragmentsFile(format!(
                "{} fragments exceed the {} per-anchor cap",
                self.fragments.len(),
                MAX_FRAGMENTS_PER_ANCHOR
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (index, fragment) in self.fragments.iter().enumerate() {
            if fragment.ordinal as usize != index {
                return Err(ModelError::InvalidFragmentsFile(format!(
                    "fragment `{}` has ordinal {} at position {}; ordinals must be contiguous from 0 in file order",
                    fragment.id, fragment.ordinal, index
                )));
            }
            if !seen.insert(fragment.id.clone()) {
                return Err(ModelError::InvalidFragmentsFile(format!(
                    "duplicate fragment id `{}`",
                    fragment.id
                )));
            }
            for r in &fragment.refs {
                if !seen.contains(r) || r == &fragment.id {
                    return Err(ModelError::InvalidFragmentsFile(format!(
                        "fragment `{}` refs `{}`, which is not an earlier fragment",
                        fragment.id, r
                    )));
                }
            }
            if fragment.regime != self.regime {
                return Err(ModelError::InvalidFragmentsFile(format!(
                    "fragment `{}` carries regime `{}` but the file declares `{}`",
                    fragment.id, fragment.regime, self.regime
                )));
            }
        }
        Ok(())
    }

    /// Canonical bytes for on-disk exchange.
    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, ModelError> {
        self.validate()?;
        Ok(crate::canon::to_canonical_bytes(self)?)
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, ModelError> {
        let file: Self = serde_json::from_slice(raw)?;
        file.validate()?;
        Ok(file)
    }
}

/// The seven decision-evidence property classes, in canonical row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyClass {
    Inputs,
    PolicyBasis,
    OperatorIdentity,
    AuthorizationEnvelope,
    ReasoningTrace,
    OutputAction,
    PostConditionState,
}

impl PropertyClass {
    /// Canonical iteration order; stable across runs.
    pub const ALL: [PropertyClass; 7] = [
        Self::Inputs,
        Self::PolicyBasis,
        Self::OperatorIdentity,
        Self::AuthorizationEnvelope,
        Self::ReasoningTrace,
        Self::OutputAction,
        Self::PostConditionState,
    ];

    /// Machine key (matches the JSON encoding).
    pub fn key(self) -> &'static str {
        match self {
            Self::Inputs => "inputs",
            Self::PolicyBasis => "policy_basis",
            Self::OperatorIdentity => "operator_identity",
            Self::AuthorizationEnvelope => "authorization_envelope",
            Self::ReasoningTrace => "reasoning_trace",
            Self::OutputAction => "output_action",
            Self::PostConditionState => "post_condition_state",
        }
    }

    /// Human-readable row label used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::Inputs => "inputs",
            Self::PolicyBasis => "policy basis",
            Self::OperatorIdentity => "operator identity",
            Self::AuthorizationEnvelope => "authorization envelope",
            Self::ReasoningTrace => "reasoning trace",
            Self::OutputAction => "output action",
            Self::PostConditionState => "post-condition state",
        }
    }
}

impl fmt::Display for PropertyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// The four reconstructability categories. `StructurallyUnfillable` means
/// no fragment of the required type exists; `Opaque` means evidence exists
/// in principle but is not externally inspectable. Both score zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    FullyFillable,
    PartiallyFillable,
    StructurallyUnfillable,
    Opaque,
}

impl Category {
    /// Strict governance score: F -> 1.0, P -> 0.5, S -> 0.0, O -> 0.0.
    pub fn score(self) -> f64 {
        match self {
            Self::FullyFillable => 1.0,
            Self::PartiallyFillable => 0.5,
            Self::StructurallyUnfillable | Self::Opaque => 0.0,
        }
    }

    /// Score in half-units (0, 1 or 2), for exact integer arithmetic.
    pub fn half_units(self) -> u32 {
        match self {
            Self::FullyFillable => 2,
            Self::PartiallyFillable => 1,
            Self::StructurallyUnfillable | Self::Opaque => 0,
        }
    }

    /// Single-letter cell code used in rendered tables.
    pub fn letter(self) -> &'static str {
        match self {
            Self::FullyFillable => "F",
            Self::PartiallyFillable => "P",
            Self::StructurallyUnfillable => "S",
            Self::Opaque => "O",
        }
    }

    pub fn from_letter(letter: &str) -> Option<Self> {
        match letter {
            "F" => Some(Self::FullyFillable),
            "P" => Some(Self::PartiallyFillable),
            "S" => Some(Self::StructurallyUnfillable),
            "O" => Some(Self::Opaque),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

/// Fixed category-to-score mapping.
pub fn score_of(category: Category) -> f64 {
    category.score()
}

/// A group of fragments bounded around one tool-call/state-mutation pair;
/// the unit at which properties are classified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionUnit {
    pub unit_id: String,
    /// Member fragment ids in ordinal order.
    pub fragment_ids: Vec<String>,
    pub anchor_tool_call: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_state_mutation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_prompt: Option<String>,
}

/// Normalize an ISO-8601 / RFC 3339 instant to UTC millisecond precision.
/// Instant equality downstream is string equality on this form.
pub fn normalize_timestamp(raw: &str) -> Option<String> {
    let parsed = DateTime::parse_from_rfc3339(raw).ok()?;
    Some(format_millis(parsed.with_timezone(&Utc).timestamp_millis()))
}

/// Render epoch milliseconds as the normalized ISO-8601 UTC form.
pub fn format_millis(millis: i64) -> String {
    let dt = Utc.timestamp_millis_opt(millis).single().unwrap_or_default();
    dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

/// Epoch milliseconds of a normalized timestamp, if it parses.
pub fn timestamp_millis(normalized: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(normalized)
        .ok()
        .map(|dt| dt.with_timezone(&Utc).timestamp_millis())
}
