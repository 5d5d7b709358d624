//! Adapter for JSON-RPC 2.0 protocol transcripts (JSONL, one message per
//! line). Evidence is per message rather than per step: requests and
//! responses are correlated by JSON-RPC id, and no attribution principal
//! is synthesized because the protocol does not carry one per step.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{
    byte_offset, jsonl_lines, malformed, AdapterError, FragmentSpec, FragmentStream,
};
use crate::model::{FragmentKind, FragmentsFile};

pub(crate) fn parse(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let lines = jsonl_lines(raw)?;
    let mut stream = FragmentStream::new("mcp", "mcp");
    let mut anchor_id = "mcp-session".to_string();
    // JSON-RPC id -> (method, fragment id of the request, when any).
    let mut pending: BTreeMap<String, (String, Option<String>)> = BTreeMap::new();

    for (offset, line) in lines {
        let message: Value = serde_json::from_str(line).map_err(|e| {
            malformed(
                byte_offset(line.as_bytes(), e.line(), e.column()) + offset,
                e.to_string(),
            )
        })?;
        if message.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
            return Err(malformed(offset, "message is not JSON-RPC 2.0"));
        }
        let rpc_id = message.get("id").map(|id| id.to_string());

        if let Some(method) = message.get("method").and_then(Value::as_str) {
            let request_fragment = handle_request(&mut stream, &mut anchor_id, method, &message);
            if let Some(rpc_id) = rpc_id {
                pending.insert(rpc_id, (method.to_string(), request_fragment));
            }
        } else if message.get("result").is_some() || message.get("error").is_some() {
            let Some(rpc_id) = rpc_id else {
                return Err(malformed(offset, "response message has no id"));
            };
            let Some((method, request_fragment)) = pending.remove(&rpc_id) else {
                return Err(malformed(
                    offset,
                    format!("response id {rpc_id} matches no pending request"),
                ));
            };
            handle_response(&mut stream, &method, &message, request_fragment);
        } else {
            return Err(malformed(
                offset,
                "message is neither a request, a notification, nor a response",
            ));
        }
    }

    Ok(stream.into_file(anchor_id, "mcp"))
}

/// Requests and notifications. Returns the fragment id when the request
/// itself is evidence.
fn handle_request(
    stream: &mut FragmentStream,
    anchor_id: &mut String,
    method: &str,
    message: &Value,
) -> Option<String> {
    match method {
        "initialize" => {
            if let Some(name) = message
                .pointer("/params/clientInfo/name")
                .and_then(Value::as_str)
            {
                *anchor_id = name.to_string();
            }
            None
        }
        "sampling/createMessage" => {
            // User turns arrive inside the sampling request; consecutive
            // user messages are one split input, chained via refs.
            let messages = message
                .pointer("/params/messages")
                .and_then(Value::as_array)
                .cloned()
                .unwrap_or_default();
            let mut previous: Option<String> = None;
            for turn in messages {
                if turn.get("role").and_then(Value::as_str) != Some("user") {
                    continue;
                }
                let mut payload = Map::new();
                if let Some(text) = turn.pointer("/content/text").and_then(Value::as_str) {
                    payload.insert("text".to_string(), Value::String(text.to_string()));
                }
                let id = stream.push(
                    FragmentSpec::new(FragmentKind::AgentMessage, payload)
                        .refs(previous.clone().into_iter().collect()),
                );
                previous = Some(id);
            }
            None
        }
        "tools/call" => {
            let mut payload = Map::new();
            if let Some(name) = message.pointer("/params/name").and_then(Value::as_str) {
                payload.insert("tool_name".to_string(), Value::String(name.to_string()));
            }
            payload.insert(
                "arguments".to_string(),
                message
                    .pointer("/params/arguments")
                    .cloned()
                    .unwrap_or(Value::Null),
            );
            Some(stream.push(FragmentSpec::new(FragmentKind::ToolCall, payload)))
        }
        // tools/list requests, notifications and other protocol traffic
        // become evidence only through their responses.
        _ => None,
    }
}

fn handle_response(
    stream: &mut FragmentStream,
    method: &str,
    message: &Value,
    request_fragment: Option<String>,
) {
    match method {
        "tools/list" => {
            // The negotiated tool schemas are the permission envelope.
            if let Some(tools) = message.pointer("/result/tools") {
                let mut payload = Map::new();
                payload.insert("tools".to_string(), tools.clone());
                stream.push(FragmentSpec::new(FragmentKind::ConfigSnapshot, payload));
            }
        }
        "sampling/createMessage" => {
            let mut payload = Map::new();
            if let Some(model) = message.pointer("/result/model") {
                payload.insert("model".to_string(), model.clone());
            }
            if let Some(text) = message
                .pointer("/result/content/text")
                .and_then(Value::as_str)
            {
                payload.insert("output_text".to_string(), Value::String(text.to_string()));
            }
            // The sampled completion is visible; the deliberation that
            // produced it is not.
            stream.push(
                FragmentSpec::new(FragmentKind::ModelGeneration, payload).inspectable(false),
            );
        }
        "tools/call" => {
            let mut payload = Map::new();
            if let Some(content) = message.pointer("/result/content") {
                payload.insert("content".to_string(), content.clone());
            }
            if let Some(is_error) = message.pointer("/result/isError") {
                payload.insert("is_error".to_string(), is_error.clone());
            }
            stream.push(
                FragmentSpec::new(FragmentKind::StateMutation, payload)
                    .refs(request_fragment.into_iter().collect()),
            );
        }
        _ => {}
    }
}
