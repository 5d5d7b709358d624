//! Vendor-neutral fallback adapter: JSONL records (one per line, UTF-8,
//! LF-separated, trailing newline required) mapped onto fragment kinds by
//! a caller-supplied mapping config.

use serde_json::{Map, Value};

use super::{
    byte_offset, jsonl_lines, malformed, AdapterError, FragmentSpec, FragmentStream,
    MappingConfig,
};
use crate::model::{normalize_timestamp, FragmentsFile};

/// Record fields consumed by the adapter itself rather than carried in
/// the fragment payload.
const CONSUMED_FIELDS: [&str; 4] = ["kind", "step_type", "anchor_id", "regime"];

pub(crate) fn parse(raw: &[u8], mapping: &MappingConfig) -> Result<FragmentsFile, AdapterError> {
    mapping.validate()?;
    let lines = jsonl_lines(raw)?;

    // First pass: anchor identity. Records may stamp `anchor_id` and
    // `regime` provenance fields; the first occurrence wins.
    let mut anchor_id = "generic-anchor".to_string();
    let mut regime = "generic".to_string();
    let mut records = Vec::with_capacity(lines.len());
    let mut seen_anchor = false;
    let mut seen_regime = false;
    for (offset, line) in &lines {
        let record: Value = serde_json::from_str(line).map_err(|e| {
            malformed(
                byte_offset(line.as_bytes(), e.line(), e.column()) + offset,
                e.to_string(),
            )
        })?;
        let object = record
            .as_object()
            .cloned()
            .ok_or_else(|| malformed(*offset, "JSONL record is not an object"))?;
        if !seen_anchor {
            if let Some(id) = object.get("anchor_id").and_then(Value::as_str) {
                anchor_id = id.to_string();
                seen_anchor = true;
            }
        }
        if !seen_regime {
            if let Some(r) = object.get("regime").and_then(Value::as_str) {
                regime = r.to_string();
                seen_regime = true;
            }
        }
        records.push((*offset, object));
    }

    let mut stream = FragmentStream::new(&regime, &regime);

    for (offset, record) in records {
        let kind = record
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(offset, "record is missing the `kind` field"))?;
        let effective_kind = match record.get("step_type").and_then(Value::as_str) {
            Some(step_type) => format!("{kind}.{step_type}"),
            None => kind.to_string(),
        };
        let targets = mapping
            .record_kind_map
            .get(&effective_kind)
            .or_else(|| mapping.record_kind_map.get(kind))
            .ok_or_else(|| AdapterError::UnknownRecordKind {
                kind: effective_kind.clone(),
            })?;

        let timestamp = match &mapping.timestamp_field {
            Some(field) => match record.get(field).and_then(Value::as_str) {
                Some(ts) => Some(normalize_timestamp(ts).ok_or_else(|| {
                    malformed(offset, format!("`{field}` is not an ISO-8601 instant: {ts}"))
                })?),
                None => None,
            },
            None => None,
        };
        let attribution = mapping
            .attribution_field
            .as_ref()
            .and_then(|field| record.get(field).and_then(Value::as_str))
            .map(str::to_string);
        let inspectable = mapping.inspectable_rule.get(kind).copied().unwrap_or(true);

        let payload: Map<String, Value> = record
            .iter()
            .filter(|(key, _)| {
                !CONSUMED_FIELDS.contains(&key.as_str())
                    && Some(key.as_str()) != mapping.timestamp_field.as_deref()
                    && Some(key.as_str()) != mapping.attribution_field.as_deref()
            })
            .map(|(key, value)| (key.clone(), value.clone()))
            .collect();

        for target in targets.as_slice() {
            stream.push(
                FragmentSpec::new(*target, payload.clone())
                    .timestamp(timestamp.clone())
                    .attribution(attribution.clone())
                    .inspectable(inspectable),
            );
        }
    }

    Ok(stream.into_file(anchor_id, "generic_jsonl"))
}
