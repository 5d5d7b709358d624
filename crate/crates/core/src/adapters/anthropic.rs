//! Adapter for message-history files with tool_use/tool_result content
//! blocks. Tool invocations appear inline in the conversation rather than
//! as first-class trace objects, so reconstruction walks the history.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{malformed, malformed_json, str_field, AdapterError, FragmentSpec, FragmentStream};
use crate::model::{FragmentKind, FragmentsFile};

pub(crate) fn parse(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;
    let messages = doc
        .get("messages")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(0, "expected an object with a `messages` array"))?;

    let anchor_id = str_field(&doc, "conversation_id")
        .unwrap_or("anthropic-conversation")
        .to_string();
    let user_attribution = doc
        .pointer("/metadata/user_id")
        .and_then(Value::as_str)
        .map(str::to_string);

    let mut stream = FragmentStream::new("anthropic", "anthropic");
    // tool_use id -> fragment id, for linking tool results back.
    let mut tool_use_fragments: BTreeMap<String, String> = BTreeMap::new();

    // The request-level tool definitions are the permission envelope the
    // model was allowed to act under.
    if let Some(tools) = doc.get("tools").filter(|t| {
        t.as_array().is_some_and(|a| !a.is_empty())
    }) {
        let mut payload = Map::new();
        payload.insert("tools".to_string(), tools.clone());
        if let Some(model) = str_field(&doc, "model") {
            payload.insert("model".to_string(), Value::String(model.to_string()));
        }
        stream.push(FragmentSpec::new(FragmentKind::ConfigSnapshot, payload));
    }

    for (index, message) in messages.iter().enumerate() {
        let role = str_field(message, "role")
            .ok_or_else(|| malformed(0, format!("message {index} is missing `role`")))?;
        let blocks = content_blocks(message, index)?;
        match role {
            "user" => {
                for block in &blocks {
                    match str_field(block, "type") {
                        Some("text") => {
                            let mut payload = Map::new();
                            payload.insert(
                                "text".to_string(),
                                block.get("text").cloned().unwrap_or(Value::Null),
                            );
                            stream.push(
                                FragmentSpec::new(FragmentKind::AgentMessage, payload)
                                    .attribution(user_attribution.clone()),
                            );
                        }
                        Some("tool_result") => {
                            let tool_use_id =
                                str_field(block, "tool_use_id").map(str::to_string);
                            let refs = tool_use_id
                                .as_deref()
                                .and_then(|id| tool_use_fragments.get(id).cloned())
                                .into_iter()
                                .collect();
                            stream.push(
                                FragmentSpec::new(
                                    FragmentKind::StateMutation,
                                    tool_result_payload(block),
                                )
                                .refs(refs),
                            );
                        }
                        _ => {}
                    }
                }
            }
            "assistant" => {
                // One generation per assistant turn. Visible response text
                // is not model deliberation; only an explicit thinking
                // block makes the generation inspectable.
                let mut payload = Map::new();
                let mut deliberation: Option<String> = None;
                let mut visible = Vec::new();
                for block in &blocks {
                    match str_field(block, "type") {
                        Some("text") => {
                            if let Some(text) = str_field(block, "text") {
                                visible.push(text.to_string());
                            }
                        }
                        Some("thinking") => {
                            if let Some(text) = str_field(block, "thinking") {
                                deliberation = Some(text.to_string());
                            }
                        }
                        _ => {}
                    }
                }
                if !visible.is_empty() {
                    payload.insert(
                        "output_text".to_string(),
                        Value::String(visible.join("\n")),
                    );
                }
                let inspectable = deliberation.is_some();
                if let Some(deliberation) = deliberation {
                    payload.insert("deliberation".to_string(), Value::String(deliberation));
                }
                stream.push(
                    FragmentSpec::new(FragmentKind::ModelGeneration, payload)
                        .inspectable(inspectable),
                );

                for block in &blocks {
                    if str_field(block, "type") == Some("tool_use") {
                        let name = str_field(block, "name").ok_or_else(|| {
                            malformed(0, format!("message {index}: tool_use block has no name"))
                        })?;
                        let mut payload = Map::new();
                        payload
                            .insert("tool_name".to_string(), Value::String(name.to_string()));
                        payload.insert(
                            "arguments".to_string(),
                            block.get("input").cloned().unwrap_or(Value::Null),
                        );
                        if let Some(id) = str_field(block, "id") {
                            payload.insert(
                                "tool_use_id".to_string(),
                                Value::String(id.to_string()),
                            );
                        }
                        let fragment_id =
                            stream.push(FragmentSpec::new(FragmentKind::ToolCall, payload));
                        if let Some(id) = str_field(block, "id") {
                            tool_use_fragments.insert(id.to_string(), fragment_id);
                        }
                    }
                }
            }
            other => {
                return Err(malformed(
                    0,
                    format!("message {index}: unknown role `{other}`"),
                ))
            }
        }
    }

    Ok(stream.into_file(anchor_id, "anthropic"))
}

fn content_blocks(message: &Value, index: usize) -> Result<Vec<Value>, AdapterError> {
    match message.get("content") {
        Some(Value::Array(blocks)) => Ok(blocks.clone()),
        Some(Value::String(text)) => Ok(vec![serde_json::json!({
            "type": "text",
            "text": text,
        })]),
        _ => Err(malformed(
            0,
            format!("message {index} has no content blocks"),
        )),
    }
}

/// Structured tool results are recovered when the nested result text
/// parses as a JSON object; its fields are lifted into the payload so the
/// effect record is directly readable.
fn tool_result_payload(block: &Value) -> Map<String, Value> {
    let mut payload = Map::new();
    if let Some(id) = str_field(block, "tool_use_id") {
        payload.insert("tool_use_id".to_string(), Value::String(id.to_string()));
    }
    let text = block
        .get("content")
        .and_then(Value::as_array)
        .and_then(|blocks| {
            blocks
                .iter()
                .find(|b| str_field(b, "type") == Some("text"))
                .and_then(|b| str_field(b, "text"))
        });
    if let Some(text) = text {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(parsed)) => {
                for (key, value) in parsed {
                    payload.insert(key, value);
                }
            }
            _ => {
                payload.insert("result_text".to_string(), Value::String(text.to_string()));
            }
        }
    }
    payload
}
