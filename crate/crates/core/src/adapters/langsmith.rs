//! Adapter for observability run lists: each run is a span representing
//! one unit of work (chain, llm, tool, retriever), grouped into a trace.
//! Thread identifiers are parsed and carried in payloads but unused by
//! the pipeline.

use serde_json::{Map, Value};

use super::{malformed, malformed_json, str_field, AdapterError, FragmentSpec, FragmentStream};
use crate::model::{normalize_timestamp, FragmentKind, FragmentsFile};

pub(crate) fn parse(raw: &[u8]) -> Result<FragmentsFile, AdapterError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;
    let runs = doc
        .get("runs")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(0, "expected an object with a `runs` array"))?;

    let anchor_id = runs
        .first()
        .and_then(|r| str_field(r, "trace_id"))
        .unwrap_or("langsmith-trace")
        .to_string();

    let mut stream = FragmentStream::new("langsmith", "langsmith");

    for (index, run) in runs.iter().enumerate() {
        let timestamp = str_field(run, "start_time").and_then(normalize_timestamp);
        let metadata = run
            .pointer("/extra/metadata")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let attribution = metadata
            .get("user_id")
            .and_then(Value::as_str)
            .map(str::to_string);
        let run_type = str_field(run, "run_type")
            .ok_or_else(|| malformed(0, format!("run {index} is missing `run_type`")))?;

        // Governance metadata promotes a run to policy evidence regardless
        // of its run type.
        if let Some(policy) = metadata.get("policy_name").and_then(Value::as_str) {
            let mut payload = Map::new();
            payload.insert(
                "policy_name".to_string(),
                Value::String(policy.to_string()),
            );
            if let Some(name) = str_field(run, "name") {
                payload.insert("run_name".to_string(), Value::String(name.to_string()));
            }
            if let Some(outputs) = run.get("outputs") {
                payload.insert("outputs".to_string(), outputs.clone());
            }
            stream.push(
                FragmentSpec::new(FragmentKind::PolicySnapshot, payload)
                    .timestamp(timestamp)
                    .attribution(attribution),
            );
            continue;
        }

        match run_type {
            "chain" => {
                // Root chain runs carry the user's task input; child
                // chains are orchestration plumbing.
                if run.get("parent_run_id").map_or(true, Value::is_null) {
                    let text = run
                        .pointer("/inputs/input")
                        .and_then(Value::as_str)
                        .unwrap_or_default();
                    let mut payload = Map::new();
                    payload.insert("text".to_string(), Value::String(text.to_string()));
                    if let Some(thread) = metadata.get("thread_id").and_then(Value::as_str) {
                        payload
                            .insert("thread_id".to_string(), Value::String(thread.to_string()));
                    }
                    stream.push(
                        FragmentSpec::new(FragmentKind::AgentMessage, payload)
                            .timestamp(timestamp)
                            .attribution(attribution),
                    );
                }
            }
            "llm" => {
                let invocation_params = run
                    .pointer("/extra/invocation_params")
                    .and_then(Value::as_object)
                    .cloned()
                    .unwrap_or_default();
                // Tool schemas bound to the model call are the permission
                // envelope under which the action was taken.
                if let Some(tools) = invocation_params.get("tools").filter(|t| {
                    t.as_array().is_some_and(|a| !a.is_empty())
                }) {
                    let mut payload = Map::new();
                    payload.insert("tools".to_string(), tools.clone());
                    stream.push(
                        FragmentSpec::new(FragmentKind::ConfigSnapshot, payload)
                            .timestamp(timestamp.clone()),
                    );
                }
                // Run inputs/outputs record the API call, not the model's
                // internal deliberation.
                let mut payload = Map::new();
                if let Some(model) = invocation_params.get("model") {
                    payload.insert("model".to_string(), model.clone());
                }
                if let Some(output) = run.pointer("/outputs/output") {
                    payload.insert("output_text".to_string(), output.clone());
                }
                stream.push(
                    FragmentSpec::new(FragmentKind::ModelGeneration, payload)
                        .timestamp(timestamp)
                        .inspectable(false),
                );
            }
            "tool" => {
                let name = str_field(run, "name")
                    .ok_or_else(|| malformed(0, format!("tool run {index} has no name")))?;
                let mut payload = Map::new();
                payload.insert("tool_name".to_string(), Value::String(name.to_string()));
                payload.insert(
                    "arguments".to_string(),
                    run.get("inputs").cloned().unwrap_or(Value::Null),
                );
                stream.push(
                    FragmentSpec::new(FragmentKind::ToolCall, payload)
                        .timestamp(timestamp)
                        .attribution(attribution),
                );
            }
            // Retriever and other run types carry no decision evidence in
            // this schema.
            _ => {}
        }
    }

    Ok(stream.into_file(anchor_id, "langsmith"))
}
