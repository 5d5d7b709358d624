//! Adapter for OTLP span exports carrying generative-AI semantic
//! convention attributes. The wire format standardizes span shape and
//! attribute namespaces; it does not require explicit governance-evidence
//! bindings, so no policy, config or state fragments are synthesized.

use serde_json::{Map, Value};

use super::{malformed, malformed_json, str_field, AdapterError, FragmentSpec, FragmentStream};
use crate::model::{format_millis, FragmentKind, FragmentsFile};

pub(crate) fn parse(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;
    let resource_spans = doc
        .get("resourceSpans")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(0, "expected an object with a `resourceSpans` array"))?;

    let anchor_id = resource_spans
        .first()
        .and_then(|rs| rs.pointer("/resource/attributes"))
        .and_then(|attrs| attr_string(attrs, "service.name"))
        .unwrap_or_else(|| "otlp-trace".to_string());

    let mut stream = FragmentStream::new("otlp_vertex", "otlp");

    for resource_span in resource_spans {
        let scope_spans = resource_span
            .get("scopeSpans")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(0, "resourceSpans entry is missing `scopeSpans`"))?;
        for scope_span in scope_spans {
            let spans = scope_span
                .get("spans")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed(0, "scopeSpans entry is missing `spans`"))?;
            for span in spans {
                ingest_span(&mut stream, span)?;
            }
        }
    }

    Ok(stream.into_file(anchor_id, "otlp"))
}

fn ingest_span(stream: &mut FragmentStream, span: &Value) -> Result<(), AdapterError> {
    let attributes = span.get("attributes").cloned().unwrap_or(Value::Null);
    let operation = attr_string(&attributes, "gen_ai.operation.name").unwrap_or_default();
    let enduser = attr_string(&attributes, "enduser.id");
    let started = nanos_to_iso(span.get("startTimeUnixNano"));

    match operation.as_str() {
        "chat" | "generate_content" | "invoke_agent" => {
            // Opt-in content-capture events carry the conversation turns.
            if let Some(events) = span.get("events").and_then(Value::as_array) {
                for event in events {
                    if str_field(event, "name") == Some("gen_ai.user.message") {
                        let mut payload = Map::new();
                        if let Some(content) = event
                            .get("attributes")
                            .and_then(|attrs| attr_string(attrs, "content"))
                        {
                            payload.insert("text".to_string(), Value::String(content));
                        }
                        stream.push(
                            FragmentSpec::new(FragmentKind::AgentMessage, payload)
                                .timestamp(nanos_to_iso(event.get("timeUnixNano")))
                                .attribution(enduser.clone()),
                        );
                    }
                }
            }
            // The model span itself: the generation happened, but its
            // deliberation is not on the wire.
            let mut payload = Map::new();
            if let Some(model) = attr_string(&attributes, "gen_ai.request.model") {
                payload.insert("model".to_string(), Value::String(model));
            }
            if let Some(name) = str_field(span, "name") {
                payload.insert("span_name".to_string(), Value::String(name.to_string()));
            }
            stream.push(
                FragmentSpec::new(FragmentKind::ModelGeneration, payload)
                    .timestamp(started)
                    .attribution(enduser)
                    .inspectable(false),
            );
        }
        "execute_tool" => {
            let name = attr_string(&attributes, "gen_ai.tool.name")
                .ok_or_else(|| malformed(0, "execute_tool span has no gen_ai.tool.name"))?;
            let arguments = attr_string(&attributes, "gen_ai.tool.call.arguments")
                .map(|text| {
                    serde_json::from_str(&text).unwrap_or(Value::String(text))
                })
                .unwrap_or(Value::Null);
            let mut payload = Map::new();
            payload.insert("tool_name".to_string(), Value::String(name));
            payload.insert("arguments".to_string(), arguments);
            stream.push(
                FragmentSpec::new(FragmentKind::ToolCall, payload)
                    .timestamp(started)
                    .attribution(enduser),
            );
        }
        // Other span kinds carry no decision evidence under this mapping.
        _ => {}
    }
    Ok(())
}

/// OTLP attribute lists are arrays of {key, value: {stringValue | ...}}.
fn attr_string(attributes: &Value, key: &str) -> Option<String> {
    attributes.as_array()?.iter().find_map(|attr| {
        if str_field(attr, "key") == Some(key) {
            attr.pointer("/value/stringValue")
                .and_then(Value::as_str)
                .map(str::to_string)
        } else {
            None
        }
    })
}

/// Unix nanoseconds (string or integer) to the normalized ISO form,
/// truncated to millisecond precision.
fn nanos_to_iso(value: Option<&Value>) -> Option<String> {
    let nanos = match value? {
        Value::String(text) => text.parse::<i64>().ok()?,
        Value::Number(number) => number.as_i64()?,
        _ => return None,
    };
    Some(format_millis(nanos / 1_000_000))
}
