//! Reconstruction stages between ingest and classification: temporal
//! ordering, chain assembly, and decision-boundary detection.
//!
//! All three stages are pure functions of the fragment stream and the
//! pipeline configuration, and run in linear time and space in the
//! number of fragments.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{timestamp_millis, DecisionUnit, Fragment, FragmentKind};

/// Upstream default for tagging mutating tool calls.
pub const DEFAULT_STATE_MUTATION_REGEX: &str =
    r"(?i)\b(DROP|DELETE|TRUNCATE|UPDATE|INSERT|ALTER|CREATE|GRANT|REVOKE)\b";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no decision event: the anchor contains no tool_call fragment")]
    NoDecisionEvent,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
}

/// Flags held constant across regimes within one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub single_agent: bool,
    /// How many adjacent units merge into a single decision unit (k >= 1).
    pub within_stack_tier: u32,
    pub state_mutation_regex: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            single_agent: true,
            within_stack_tier: 1,
            state_mutation_regex: DEFAULT_STATE_MUTATION_REGEX.to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<Regex, PipelineError> {
        if !self.single_agent {
            return Err(PipelineError::NotImplemented(
                "multi-agent chain assembly is outside the pilot; set --single-agent true"
                    .to_string(),
            ));
        }
        if self.within_stack_tier < 1 {
            return Err(PipelineError::InvalidConfig(
                "within-stack tier must be >= 1".to_string(),
            ));
        }
        Regex::new(&self.state_mutation_regex).map_err(|e| {
            PipelineError::InvalidConfig(format!("state-mutation regex does not compile: {e}"))
        })
    }
}

/// Stage 2. Sort by (timestamp, ordinal) when every fragment carries a
/// timestamp; any missing or unparseable timestamp falls the whole anchor
/// back to ordinal order. Output is always a permutation of the input.
pub fn order_fragments(mut fragments: Vec<Fragment>) -> Vec<Fragment> {
    let all_timestamped = fragments
        .iter()
        .all(|f| f.timestamp.as_deref().and_then(timestamp_millis).is_some());
    if all_timestamped {
        fragments.sort_by_key(|f| {
            let millis = f
                .timestamp
                .as_deref()
                .and_then(timestamp_millis)
                .expect("checked above");
            (millis, f.ordinal)
        });
    } else {
        fragments.sort_by_key(|f| f.ordinal);
    }
    fragments
}

/// How one fragment is chained to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// tool_call -> the nearest preceding prompt or planning fragment.
    UpstreamPrompt,
    /// state_mutation -> the tool_call that produced it.
    EffectOf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub source: String,
    pub target: String,
    pub kind: LinkKind,
}

/// Stage 3 output: linkage edges plus the mutating-call tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainAssembly {
    pub links: Vec<ChainLink>,
    /// tool_call ids whose payload text matches the state-mutation regex.
    pub mutating_tool_calls: Vec<String>,
}

impl ChainAssembly {
    pub fn upstream_of(&self, tool_call_id: &str) -> Option<&str> {
        self.links
            .iter()
            .find(|l| l.kind == LinkKind::UpstreamPrompt && l.source == tool_call_id)
            .map(|l| l.target.as_str())
    }

    pub fn mutations_of(&self, tool_call_id: &str) -> Vec<&str> {
        self.links
            .iter()
            .filter(|l| l.kind == LinkKind::EffectOf && l.target == tool_call_id)
            .map(|l| l.source.as_str())
            .collect()
    }
}

/// Stage 3. Link each tool_call back to the nearest preceding
/// agent_message or model_generation fragment, link each state_mutation
/// to its tool_call (an explicit `refs` entry wins over proximity), and
/// tag tool calls whose payload matches the state-mutation regex.
pub fn assemble_chain(
    ordered: &[Fragment],
    config: &PipelineConfig,
) -> Result<ChainAssembly, PipelineError> {
    let regex = config.validate()?;
    let mut assembly = ChainAssembly::default();

    for (position, fragment) in ordered.iter().enumerate() {
        match fragment.kind {
            FragmentKind::ToolCall => {
                let upstream = ordered[..position].iter().rev().find(|f| {
                    matches!(
                        f.kind,
                        FragmentKind::AgentMessage | FragmentKind::ModelGeneration
                    )
                });
                if let Some(upstream) = upstream {
                    assembly.links.push(ChainLink {
                        source: fragment.id.clone(),
                        target: upstream.id.clone(),
                        kind: LinkKind::UpstreamPrompt,
                    });
                }
                if regex.is_match(&fragment.payload_text()) {
                    assembly.mutating_tool_calls.push(fragment.id.clone());
                }
            }
            FragmentKind::StateMutation => {
                let by_ref = fragment.refs.iter().find_map(|r| {
                    ordered[..position]
                        .iter()
                        .find(|f| &f.id == r && f.kind == FragmentKind::ToolCall)
                });
                let target = by_ref.or_else(|| {
                    ordered[..position]
                        .iter()
                        .rev()
                        .find(|f| f.kind == FragmentKind::ToolCall)
                });
                if let Some(target) = target {
                    assembly.links.push(ChainLink {
                        source: fragment.id.clone(),
                        target: target.id.clone(),
                        kind: LinkKind::EffectOf,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(assembly)
}

/// Fragment kinds that join a unit as ancillary evidence when they fall
/// inside the unit's window.
const ANCILLARY_KINDS: [FragmentKind; 4] = [
    FragmentKind::PolicySnapshot,
    FragmentKind::ConfigSnapshot,
    FragmentKind::HumanApproval,
    FragmentKind::ModelGeneration,
];

/// The refs-connected group of agent_message fragments around `seed`,
/// restricted to positions strictly before `limit`. This is the upstream
/// input evidence for a decision, including split continuations.
pub fn input_message_group(ordered: &[Fragment], seed: usize, limit: usize) -> Vec<usize> {
    let mut group: BTreeSet<usize> = BTreeSet::new();
    let mut frontier = vec![seed];
    while let Some(index) = frontier.pop() {
        if !group.insert(index) {
            continue;
        }
        for (candidate_index, candidate) in ordered.iter().enumerate().take(limit) {
            if candidate.kind != FragmentKind::AgentMessage || group.contains(&candidate_index) {
                continue;
            }
            let linked = candidate.refs.iter().any(|r| r == &ordered[index].id)
                || ordered[index].refs.iter().any(|r| r == &candidate.id);
            if linked {
                frontier.push(candidate_index);
            }
        }
    }
    group.into_iter().collect()
}

/// Nearest agent_message strictly before `limit`.
pub fn nearest_input_message(ordered: &[Fragment], limit: usize) -> Option<usize> {
    ordered[..limit]
        .iter()
        .rposition(|f| f.kind == FragmentKind::AgentMessage)
}

/// Stage 4. Cut the ordered stream into decision units: one
/// tool-call-plus-state-mutation pair per unit at tier k=1, with k
/// adjacent units merging at higher tiers. Ancillary snapshot/approval/
/// generation fragments attach to the unit whose window covers them;
/// leading fragments attach to the first unit and trailing fragments to
/// the last, so decision-relevant fragments are partitioned.
pub fn detect_boundaries(
    ordered: &[Fragment],
    assembly: &ChainAssembly,
    config: &PipelineConfig,
) -> Result<Vec<DecisionUnit>, PipelineError> {
    config.validate()?;
    let position_of: BTreeMap<&str, usize> = ordered
        .iter()
        .enumerate()
        .map(|(i, f)| (f.id.as_str(), i))
        .collect();

    let tool_calls: Vec<usize> = ordered
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FragmentKind::ToolCall)
        .map(|(i, _)| i)
        .collect();
    if tool_calls.is_empty() {
        return Err(PipelineError::NoDecisionEvent);
    }

    let mut claimed: BTreeSet<usize> = BTreeSet::new();
    let mut units: Vec<(BTreeSet<usize>, usize, Option<usize>, Option<usize>)> = Vec::new();

    for (unit_index, &tc_pos) in tool_calls.iter().enumerate() {
        let mut members: BTreeSet<usize> = BTreeSet::new();
        members.insert(tc_pos);

        let tool_call = &ordered[tc_pos];
        let mutation_positions: Vec<usize> = assembly
            .mutations_of(&tool_call.id)
            .into_iter()
            .filter_map(|id| position_of.get(id).copied())
            .collect();
        let anchor_mutation = mutation_positions.first().copied();
        members.extend(mutation_positions.iter().copied());

        let upstream = assembly
            .upstream_of(&tool_call.id)
            .and_then(|id| position_of.get(id).copied());
        if let Some(upstream) = upstream {
            members.insert(upstream);
        }

        if let Some(seed) = nearest_input_message(ordered, tc_pos) {
            members.extend(input_message_group(ordered, seed, tc_pos));
        }

        // Ancillary window: after the previous unit's anchor, at or before
        // this unit's state mutation (the tool call itself when there is
        // none); the first window opens at the start of the anchor and the
        // last closes at its end.
        let lower = if unit_index == 0 {
            0
        } else {
            tool_calls[unit_index - 1] + 1
        };
        let upper = if unit_index == tool_calls.len() - 1 {
            ordered.len().saturating_sub(1)
        } else {
            anchor_mutation.unwrap_or(tc_pos)
        };
        for (pos, fragment) in ordered.iter().enumerate() {
            if pos >= lower && pos <= upper && ANCILLARY_KINDS.contains(&fragment.kind) {
                members.insert(pos);
            }
        }

        // A fragment belongs to at most one unit; earlier units win.
        members.retain(|pos| !claimed.contains(pos));
        members.insert(tc_pos);
        claimed.extend(members.iter().copied());
        units.push((members, tc_pos, anchor_mutation, upstream));
    }

    // Tier k > 1 merges adjacent units, keeping the first unit's anchors.
    let k = config.within_stack_tier as usize;
    let mut merged: Vec<DecisionUnit> = Vec::new();
    for (chunk_index, chunk) in units.chunks(k).enumerate() {
        let mut members: BTreeSet<usize> = BTreeSet::new();
        for (unit_members, _, _, _) in chunk {
            members.extend(unit_members.iter().copied());
        }
        let (_, tc_pos, anchor_mutation, upstream) = &chunk[0];
        merged.push(DecisionUnit {
            unit_id: format!("unit-{chunk_index:03}"),
            fragment_ids: members.iter().map(|&p| ordered[p].id.clone()).collect(),
            anchor_tool_call: ordered[*tc_pos].id.clone(),
            anchor_state_mutation: anchor_mutation.map(|p| ordered[p].id.clone()),
            upstream_prompt: upstream.map(|p| ordered[p].id.clone()),
        });
    }
    Ok(merged)
}

/// Convenience wrapper running stages 2-4 in sequence.
pub fn reconstruct_units(
    fragments: Vec<Fragment>,
    config: &PipelineConfig,
) -> Result<(Vec<Fragment>, ChainAssembly, Vec<DecisionUnit>), PipelineError> {
    let ordered = order_fragments(fragments);
    let assembly = assemble_chain(&ordered, config)?;
    let units = detect_boundaries(&ordered, &assembly, config)?;
    Ok((ordered, assembly, units))
}
