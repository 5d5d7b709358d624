//! Loader for pre-built fragment manifests: inputs that are already
//! normalized and need no adapter, such as public-record reconstructions
//! of named incidents. Only the relative ordering of manifest entries is
//! meaningful; ordinals are assigned from position.

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{malformed, malformed_json, AdapterError};
use crate::model::{normalize_timestamp, Fragment, FragmentKind, FragmentsFile};

#[derive(Debug, Deserialize)]
struct RawManifest {
    anchor_id: String,
    regime: String,
    fragments: Vec<RawFragment>,
}

#[derive(Debug, Deserialize)]
struct RawFragment {
    id: String,
    kind: FragmentKind,
    #[serde(default)]
    timestamp: Option<String>,
    payload: Map<String, Value>,
    #[serde(default)]
    attribution: Option<String>,
    inspectable: bool,
    #[serde(default)]
    refs: Vec<String>,
}

/// The four fragments every committed incident manifest must carry, with
/// their required kinds.
const REQUIRED_FRAGMENTS: [(&str, FragmentKind); 4] = [
    ("replit_f000", FragmentKind::AgentMessage),
    ("replit_f001", FragmentKind::ModelGeneration),
    ("replit_f002", FragmentKind::ToolCall),
    ("replit_f003", FragmentKind::StateMutation),
];

pub fn load_replit_manifest(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let manifest: RawManifest =
        serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;

    for (required_id, required_kind) in REQUIRED_FRAGMENTS {
        let entry = manifest
            .fragments
            .iter()
            .find(|f| f.id == required_id)
            .ok_or_else(|| {
                malformed(0, format!("manifest is missing required fragment `{required_id}`"))
            })?;
        if entry.kind != required_kind {
            return Err(malformed(
                0,
                format!(
                    "fragment `{required_id}` must have kind `{required_kind}`, found `{}`",
                    entry.kind
                ),
            ));
        }
    }
    if manifest.fragments.len() != REQUIRED_FRAGMENTS.len() {
        return Err(malformed(
            0,
            format!(
                "manifest must carry exactly {} fragments, found {}",
                REQUIRED_FRAGMENTS.len(),
                manifest.fragments.len()
            ),
        ));
    }
    let generation = manifest
        .fragments
        .iter()
        .find(|f| f.id == "replit_f001")
        .expect("checked above");
    if generation.inspectable {
        return Err(malformed(
            0,
            "fragment `replit_f001` records non-inspectable internal reasoning; \
             `inspectable` must be false",
        ));
    }

    let regime = manifest.regime.clone();
    let fragments = manifest
        .fragments
        .into_iter()
        .enumerate()
        .map(|(position, raw)| Fragment {
            id: raw.id,
            kind: raw.kind,
            timestamp: raw.timestamp.as_deref().and_then(normalize_timestamp),
            ordinal: position as u32,
            payload: raw.payload,
            attribution: raw.attribution,
            inspectable: raw.inspectable,
            refs: raw.refs,
            regime: regime.clone(),
        })
        .collect();

    let file = FragmentsFile {
        anchor_id: manifest.anchor_id,
        adapter: "none".to_string(),
        regime,
        fragments,
    };
    file.validate()?;
    Ok(file)
}
