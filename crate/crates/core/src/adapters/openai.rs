//! Adapter for typed-span agent traces: agent, generation, function,
//! guardrail and handoff spans parented under one workflow trace.

use serde_json::{Map, Value};

use super::{malformed, malformed_json, str_field, AdapterError, FragmentSpec, FragmentStream};
use crate::model::{normalize_timestamp, FragmentKind, FragmentsFile};

pub(crate) fn parse(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;
    let spans = doc
        .get("spans")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(0, "expected an object with a `spans` array"))?;

    let anchor_id = str_field(&doc, "trace_id")
        .unwrap_or("openai-agents-trace")
        .to_string();
    let operator = doc
        .pointer("/metadata/operator")
        .and_then(Value::as_str)
        .map(str::to_string);

    let mut stream = FragmentStream::new("openai_agents", "openai");

    for (index, span) in spans.iter().enumerate() {
        let data = span
            .get("span_data")
            .ok_or_else(|| malformed(0, format!("span {index} is missing `span_data`")))?;
        let span_type = str_field(data, "type")
            .ok_or_else(|| malformed(0, format!("span {index} has no span_data type")))?;
        let started = str_field(span, "started_at").and_then(normalize_timestamp);
        let ended = str_field(span, "ended_at").and_then(normalize_timestamp);

        match span_type {
            // The agent span declares the tool set the agent may use: the
            // permission envelope for the run.
            "agent" => {
                let mut payload = Map::new();
                if let Some(name) = str_field(data, "name") {
                    payload.insert("name".to_string(), Value::String(name.to_string()));
                }
                if let Some(tools) = data.get("tools") {
                    payload.insert("tools".to_string(), tools.clone());
                }
                if let Some(output_type) = data.get("output_type") {
                    payload.insert("output_type".to_string(), output_type.clone());
                }
                stream.push(
                    FragmentSpec::new(FragmentKind::ConfigSnapshot, payload).timestamp(started),
                );
            }
            "generation" => {
                // The user turn is recovered from the generation input.
                let user_text = data
                    .get("input")
                    .and_then(Value::as_array)
                    .and_then(|messages| {
                        messages
                            .iter()
                            .rev()
                            .find(|m| str_field(m, "role") == Some("user"))
                            .and_then(|m| str_field(m, "content"))
                    });
                if let Some(text) = user_text {
                    let mut payload = Map::new();
                    payload.insert("text".to_string(), Value::String(text.to_string()));
                    stream.push(
                        FragmentSpec::new(FragmentKind::AgentMessage, payload)
                            .timestamp(started.clone())
                            .attribution(operator.clone()),
                    );
                }
                // The generation span records the API exchange, not the
                // model's internal deliberation.
                let mut payload = Map::new();
                if let Some(model) = data.get("model") {
                    payload.insert("model".to_string(), model.clone());
                }
                let assistant_text = data
                    .get("output")
                    .and_then(Value::as_array)
                    .and_then(|messages| {
                        messages
                            .iter()
                            .find(|m| str_field(m, "role") == Some("assistant"))
                            .and_then(|m| str_field(m, "content"))
                    });
                if let Some(text) = assistant_text {
                    payload.insert("output_text".to_string(), Value::String(text.to_string()));
                }
                stream.push(
                    FragmentSpec::new(FragmentKind::ModelGeneration, payload)
                        .timestamp(started)
                        .inspectable(false),
                );
            }
            "guardrail" => {
                let mut payload = Map::new();
                if let Some(name) = str_field(data, "name") {
                    payload.insert(
                        "policy_name".to_string(),
                        Value::String(name.to_string()),
                    );
                }
                if let Some(triggered) = data.get("triggered") {
                    payload.insert("triggered".to_string(), triggered.clone());
                }
                stream.push(
                    FragmentSpec::new(FragmentKind::PolicySnapshot, payload).timestamp(started),
                );
            }
            "function" => {
                let name = str_field(data, "name").ok_or_else(|| {
                    malformed(0, format!("span {index}: function span has no name"))
                })?;
                let mut payload = Map::new();
                payload.insert("tool_name".to_string(), Value::String(name.to_string()));
                payload.insert(
                    "arguments".to_string(),
                    parse_embedded_json(data.get("input")),
                );
                let call_id = stream.push(
                    FragmentSpec::new(FragmentKind::ToolCall, payload).timestamp(started),
                );
                // A recorded function output is the post-condition record.
                if let Some(output) = data.get("output") {
                    let mut payload = Map::new();
                    match parse_embedded_json(Some(output)) {
                        Value::Object(fields) => {
                            for (key, value) in fields {
                                payload.insert(key, value);
                            }
                        }
                        other => {
                            payload.insert("output_text".to_string(), other);
                        }
                    }
                    stream.push(
                        FragmentSpec::new(FragmentKind::StateMutation, payload)
                            .timestamp(ended)
                            .refs(vec![call_id]),
                    );
                }
            }
            // Handoffs, transcription and custom spans carry no decision
            // evidence in this schema.
            _ => {}
        }
    }

    Ok(stream.into_file(anchor_id, "openai_agents"))
}

/// Function spans serialize arguments and outputs as JSON strings; parse
/// them back when possible.
fn parse_embedded_json(value: Option<&Value>) -> Value {
    match value {
        Some(Value::String(text)) => {
            serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.clone()))
        }
        Some(other) => other.clone(),
        None => Value::Null,
    }
}
