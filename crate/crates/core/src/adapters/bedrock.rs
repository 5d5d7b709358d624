//! Adapter for agent-session trace files in the Bedrock shape: a session
//! header plus a list of trace steps, each carrying exactly one trace
//! subtype (the step types form a union).

use serde_json::{Map, Value};

use super::{malformed, malformed_json, str_field, AdapterError, FragmentSpec, FragmentStream};
use crate::model::{normalize_timestamp, FragmentKind};

pub(crate) fn parse(raw: &[u8]) -> Result<crate::model::FragmentsFile, AdapterError> {
    let doc: Value = serde_json::from_slice(raw).map_err(|e| malformed_json(raw, &e))?;
    let session = doc
        .as_object()
        .ok_or_else(|| malformed(0, "expected a session object with a `steps` array"))?;

    let anchor_id = str_field(&doc, "sessionId")
        .unwrap_or("bedrock-session")
        .to_string();
    let session_start = str_field(&doc, "sessionStartTime").and_then(normalize_timestamp);

    let mut stream = FragmentStream::new("bedrock", "bedrock");

    // The session-level agent configuration (action groups, schemas,
    // session attributes) is the permission envelope for every step.
    if let Some(config) = session.get("agentConfiguration").and_then(Value::as_object) {
        let mut payload = config.clone();
        if let Some(agent_id) = str_field(&doc, "agentId") {
            payload.insert("agent_id".to_string(), Value::String(agent_id.to_string()));
        }
        if let Some(alias) = str_field(&doc, "agentAliasId") {
            payload.insert(
                "agent_alias_id".to_string(),
                Value::String(alias.to_string()),
            );
        }
        stream.push(
            FragmentSpec::new(FragmentKind::ConfigSnapshot, payload)
                .timestamp(session_start.clone()),
        );
    }

    let steps = session
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(0, "session object is missing the `steps` array"))?;

    for (index, step) in steps.iter().enumerate() {
        let timestamp = str_field(step, "timestamp").and_then(normalize_timestamp);
        let attribution = str_field(step, "invokedBy").map(str::to_string);
        let trace = step
            .get("trace")
            .and_then(Value::as_object)
            .ok_or_else(|| malformed(0, format!("step {index} is missing the `trace` object")))?;
        if trace.len() != 1 {
            return Err(malformed(
                0,
                format!("step {index} must carry exactly one trace subtype"),
            ));
        }
        let (subtype, body) = trace.iter().next().expect("length checked");
        let spec = match subtype.as_str() {
            "preProcessingTrace" => {
                let text = body
                    .pointer("/modelInvocationInput/text")
                    .and_then(Value::as_str)
                    .ok_or_else(|| {
                        malformed(0, format!("step {index}: preProcessingTrace has no input text"))
                    })?;
                let mut payload = Map::new();
                payload.insert("text".to_string(), Value::String(text.to_string()));
                FragmentSpec::new(FragmentKind::AgentMessage, payload)
            }
            "guardrailTrace" => {
                let policy = str_field(body, "policyName").ok_or_else(|| {
                    malformed(0, format!("step {index}: guardrailTrace has no policyName"))
                })?;
                let mut payload = Map::new();
                payload.insert(
                    "policy_name".to_string(),
                    Value::String(policy.to_string()),
                );
                if let Some(action) = str_field(body, "action") {
                    payload.insert("action".to_string(), Value::String(action.to_string()));
                }
                FragmentSpec::new(FragmentKind::PolicySnapshot, payload)
            }
            "orchestrationTrace" => orchestration_fragment(index, body)?,
            // Remaining union members carry service-side processing
            // metadata; none expose model deliberation.
            "postProcessingTrace" | "customOrchestrationTrace" | "routingClassifierTrace" => {
                let payload = body.as_object().cloned().unwrap_or_default();
                FragmentSpec::new(FragmentKind::ModelGeneration, payload).inspectable(false)
            }
            "failureTrace" => {
                let payload = body.as_object().cloned().unwrap_or_default();
                FragmentSpec::new(FragmentKind::StateMutation, payload)
            }
            other => {
                return Err(malformed(
                    0,
                    format!("step {index}: unknown trace subtype `{other}`"),
                ))
            }
        };
        stream.push(spec.timestamp(timestamp).attribution(attribution));
    }

    Ok(stream.into_file(anchor_id, "bedrock"))
}

fn orchestration_fragment(index: usize, body: &Value) -> Result<FragmentSpec, AdapterError> {
    if let Some(rationale) = body.get("rationale") {
        // Orchestration rationale is routing/tool-selection metadata, not
        // externally inspectable model deliberation.
        let mut payload = Map::new();
        if let Some(text) = str_field(rationale, "text") {
            payload.insert("text".to_string(), Value::String(text.to_string()));
        }
        return Ok(FragmentSpec::new(FragmentKind::ModelGeneration, payload).inspectable(false));
    }
    if let Some(invocation) = body.pointer("/invocationInput/actionGroupInvocationInput") {
        let group = str_field(invocation, "actionGroupName").ok_or_else(|| {
            malformed(0, format!("step {index}: invocation input has no actionGroupName"))
        })?;
        let mut arguments = Map::new();
        if let Some(api_path) = str_field(invocation, "apiPath") {
            arguments.insert("api_path".to_string(), Value::String(api_path.to_string()));
        }
        if let Some(verb) = str_field(invocation, "verb") {
            arguments.insert("verb".to_string(), Value::String(verb.to_string()));
        }
        if let Some(parameters) = invocation.get("parameters") {
            arguments.insert("parameters".to_string(), parameters.clone());
        }
        let mut payload = Map::new();
        payload.insert("tool_name".to_string(), Value::String(group.to_string()));
        payload.insert("arguments".to_string(), Value::Object(arguments));
        return Ok(FragmentSpec::new(FragmentKind::ToolCall, payload));
    }
    if let Some(observation) = body.pointer("/observation/actionGroupInvocationOutput") {
        let mut payload = Map::new();
        if let Some(text) = str_field(observation, "text") {
            payload.insert("text".to_string(), Value::String(text.to_string()));
        }
        // Structured state carried with the observation is lifted so the
        // effect record is directly readable.
        if let Some(state) = observation.get("state").and_then(Value::as_object) {
            for (key, value) in state {
                payload.insert(key.clone(), value.clone());
            }
        }
        return Ok(FragmentSpec::new(FragmentKind::StateMutation, payload));
    }
    Err(malformed(
        0,
        format!("step {index}: orchestrationTrace carries no recognized member"),
    ))
}
