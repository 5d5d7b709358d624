//! Per-anchor provenance graphs: one entity per fragment, one activity
//! per decision unit, one agent per distinct attribution principal, with
//! wasGeneratedBy / wasDerivedFrom / wasAttributedTo edges. Serialized as
//! canonical JSON-LD; the three canned evidence queries run as graph
//! pattern matchers here and ship as `.rq` documents for external triple
//! stores.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::feasibility::PropertyFinding;
use crate::model::{Category, DecisionUnit, Fragment, FragmentKind, PropertyClass};

#[derive(Debug, Error)]
pub enum ProvError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown query pattern `{0}`")]
    UnknownPattern(String),
    #[error("cannot parse graph document: {0}")]
    Parse(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub const CONTEXT_PROV: &str = "http://www.w3.org/ns/prov#";
pub const CONTEXT_VOCAB: &str = "urn:trace:vocab#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeClass {
    Entity,
    Activity,
    Agent,
}

impl NodeClass {
    fn type_name(self) -> &'static str {
        match self {
            Self::Entity => "prov:Entity",
            Self::Activity => "prov:Activity",
            Self::Agent => "prov:Agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvNode {
    pub id: String,
    pub class: NodeClass,
    /// Fragment kind, for entity nodes.
    pub kind: Option<FragmentKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    WasGeneratedBy,
    WasDerivedFrom,
    WasAttributedTo,
}

impl EdgeKind {
    fn property_name(self) -> &'static str {
        match self {
            Self::WasGeneratedBy => "prov:wasGeneratedBy",
            Self::WasDerivedFrom => "prov:wasDerivedFrom",
            Self::WasAttributedTo => "prov:wasAttributedTo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProvEdge {
    pub source: String,
    pub kind: EdgeKind,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvGraph {
    pub nodes: BTreeMap<String, ProvNode>,
    pub edges: BTreeSet<ProvEdge>,
}

pub fn entity_id(fragment_id: &str) -> String {
    format!("entity:{fragment_id}")
}

pub fn activity_id(unit_id: &str) -> String {
    format!("activity:{unit_id}")
}

pub fn agent_id(principal: &str) -> String {
    format!("agent:{principal}")
}

/// Build the per-anchor graph from classified decision units. Derivation
/// edges exist exactly for the evidence of fully or partially fillable
/// input / policy-basis / authorization-envelope findings; structurally
/// unfillable findings contribute no edges.
pub fn build_graph(
    fragments: &[Fragment],
    classified: &[(DecisionUnit, Vec<PropertyFinding>)],
) -> ProvGraph {
    let mut graph = ProvGraph::default();

    for fragment in fragments {
        graph.nodes.insert(
            entity_id(&fragment.id),
            ProvNode {
                id: entity_id(&fragment.id),
                class: NodeClass::Entity,
                kind: Some(fragment.kind),
            },
        );
    }
    for fragment in fragments {
        if let Some(principal) = fragment.attribution.as_deref().filter(|a| !a.is_empty()) {
            graph.nodes.insert(
                agent_id(principal),
                ProvNode {
                    id: agent_id(principal),
                    class: NodeClass::Agent,
                    kind: None,
                },
            );
        }
    }

    for (unit, findings) in classified {
        let activity = activity_id(&unit.unit_id);
        graph.nodes.insert(
            activity.clone(),
            ProvNode {
                id: activity.clone(),
                class: NodeClass::Activity,
                kind: None,
            },
        );
        let action = entity_id(&unit.anchor_tool_call);
        graph.edges.insert(ProvEdge {
            source: action.clone(),
            kind: EdgeKind::WasGeneratedBy,
            target: activity.clone(),
        });

        for finding in findings {
            let derivable = matches!(
                finding.property,
                PropertyClass::Inputs
                    | PropertyClass::PolicyBasis
                    | PropertyClass::AuthorizationEnvelope
            );
            let evidenced = matches!(
                finding.category,
                Category::FullyFillable | Category::PartiallyFillable
            );
            if !(derivable && evidenced) {
                continue;
            }
            for evidence in &finding.evidence_fragment_ids {
                if evidence != &unit.anchor_tool_call {
                    graph.edges.insert(ProvEdge {
                        source: action.clone(),
                        kind: EdgeKind::WasDerivedFrom,
                        target: entity_id(evidence),
                    });
                }
            }
        }

        // Operator attribution binds both the unit activity and its action.
        if let Some(finding) = findings
            .iter()
            .find(|f| f.property == PropertyClass::OperatorIdentity)
        {
            if finding.category == Category::FullyFillable {
                let principals: BTreeSet<&str> = finding
                    .evidence_fragment_ids
                    .iter()
                    .filter_map(|id| fragments.iter().find(|f| &f.id == id))
                    .filter_map(|f| f.attribution.as_deref())
                    .collect();
                for principal in principals {
                    for source in [activity.clone(), action.clone()] {
                        graph.edges.insert(ProvEdge {
                            source,
                            kind: EdgeKind::WasAttributedTo,
                            target: agent_id(principal),
                        });
                    }
                }
            }
        }
    }
    graph
}

impl ProvGraph {
    pub fn validate(&self) -> Result<(), ProvError> {
        let mut generated_sources: BTreeSet<&str> = BTreeSet::new();
        for edge in &self.edges {
            let source = self.nodes.get(&edge.source).ok_or_else(|| {
                ProvError::InvalidGraph(format!("dangling edge source `{}`", edge.source))
            })?;
            let target = self.nodes.get(&edge.target).ok_or_else(|| {
                ProvError::InvalidGraph(format!("dangling edge target `{}`", edge.target))
            })?;
            let shape_ok = match edge.kind {
                EdgeKind::WasGeneratedBy => {
                    source.class == NodeClass::Entity && target.class == NodeClass::Activity
                }
                EdgeKind::WasDerivedFrom => {
                    source.class == NodeClass::Entity && target.class == NodeClass::Entity
                }
                EdgeKind::WasAttributedTo => {
                    matches!(source.class, NodeClass::Entity | NodeClass::Activity)
                        && target.class == NodeClass::Agent
                }
            };
            if !shape_ok {
                return Err(ProvError::InvalidGraph(format!(
                    "edge `{}` -> `{}` has incompatible node classes",
                    edge.source, edge.target
                )));
            }
            if edge.kind == EdgeKind::WasGeneratedBy
                && !generated_sources.insert(edge.source.as_str())
            {
                return Err(ProvError::InvalidGraph(format!(
                    "entity `{}` has more than one wasGeneratedBy edge",
                    edge.source
                )));
            }
        }
        Ok(())
    }

    fn edges_from<'a>(
        &'a self,
        source: &'a str,
        kind: EdgeKind,
    ) -> impl Iterator<Item = &'a ProvEdge> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.kind == kind && e.source == source)
    }

    /// Entities holding a wasGeneratedBy edge: the decision actions.
    pub fn action_entities(&self) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::WasGeneratedBy)
            .map(|e| e.source.as_str())
            .collect()
    }

    pub fn serialize_jsonld(&self) -> Result<Vec<u8>, ProvError> {
        self.validate()?;
        let context = json!({
            "activity": "urn:trace:activity:",
            "agent": "urn:trace:agent:",
            "entity": "urn:trace:entity:",
            "prov": CONTEXT_PROV,
            "trace": CONTEXT_VOCAB,
        });
        let mut nodes = Vec::new();
        for node in self.nodes.values() {
            let mut object = Map::new();
            object.insert("@id".to_string(), Value::String(node.id.clone()));
            object.insert(
                "@type".to_string(),
                Value::String(node.class.type_name().to_string()),
            );
            if let Some(kind) = node.kind {
                object.insert(
                    "trace:kind".to_string(),
                    Value::String(kind.as_str().to_string()),
                );
            }
            for kind in [
                EdgeKind::WasGeneratedBy,
                EdgeKind::WasDerivedFrom,
                EdgeKind::WasAttributedTo,
            ] {
                let targets: Vec<Value> = self
                    .edges_from(&node.id, kind)
                    .map(|e| json!({"@id": e.target}))
                    .collect();
                if targets.is_empty() {
                    continue;
                }
                let value = if kind == EdgeKind::WasGeneratedBy {
                    targets.into_iter().next().expect("non-empty")
                } else {
                    Value::Array(targets)
                };
                object.insert(kind.property_name().to_string(), value);
            }
            nodes.push(Value::Object(object));
        }
        let document = json!({
            "@context": context,
            "@graph": nodes,
        });
        Ok(crate::canon::to_canonical_bytes(&document)?)
    }

    pub fn from_jsonld(raw: &[u8]) -> Result<Self, ProvError> {
        let document: Value = serde_json::from_slice(raw)?;
        let nodes = document
            .get("@graph")
            .and_then(Value::as_array)
            .ok_or_else(|| ProvError::Parse("document has no @graph array".to_string()))?;
        let mut graph = ProvGraph::default();
        for node in nodes {
            let id = node
                .get("@id")
                .and_then(Value::as_str)
                .ok_or_else(|| ProvError::Parse("node has no @id".to_string()))?
                .to_string();
            let class = match node.get("@type").and_then(Value::as_str) {
                Some("prov:Entity") => NodeClass::Entity,
                Some("prov:Activity") => NodeClass::Activity,
                Some("prov:Agent") => NodeClass::Agent,
                other => {
                    return Err(ProvError::Parse(format!(
                        "node `{id}` has unknown @type {other:?}"
                    )))
                }
            };
            let kind = node
                .get("trace:kind")
                .and_then(Value::as_str)
                .map(|k| {
                    serde_json::from_value::<FragmentKind>(Value::String(k.to_string()))
                        .map_err(|_| ProvError::Parse(format!("unknown fragment kind `{k}`")))
                })
                .transpose()?;
            graph.nodes.insert(
                id.clone(),
                ProvNode {
                    id: id.clone(),
                    class,
                    kind,
                },
            );
            for (kind, property) in [
                (EdgeKind::WasGeneratedBy, "prov:wasGeneratedBy"),
                (EdgeKind::WasDerivedFrom, "prov:wasDerivedFrom"),
                (EdgeKind::WasAttributedTo, "prov:wasAttributedTo"),
            ] {
                let Some(value) = node.get(property) else {
                    continue;
                };
                let targets: Vec<&Value> = match value {
                    Value::Array(items) => items.iter().collect(),
                    single => vec![single],
                };
                for target in targets {
                    let target_id = target
                        .get("@id")
                        .and_then(Value::as_str)
                        .ok_or_else(|| {
                            ProvError::Parse(format!("edge on `{id}` has no @id target"))
                        })?;
                    graph.edges.insert(ProvEdge {
                        source: id.clone(),
                        kind,
                        target: target_id.to_string(),
                    });
                }
            }
        }
        graph.validate()?;
        Ok(graph)
    }
}

/// The three canned evidence queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryPattern {
    ActionToAuthorizer,
    ActionToPolicy,
    ActionToOperator,
}

impl QueryPattern {
    pub const ALL: [QueryPattern; 3] = [
        Self::ActionToAuthorizer,
        Self::ActionToPolicy,
        Self::ActionToOperator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ActionToAuthorizer => "action_to_authorizer",
            Self::ActionToPolicy => "action_to_policy",
            Self::ActionToOperator => "action_to_operator",
        }
    }
}

impl FromStr for QueryPattern {
    type Err = ProvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "action_to_authorizer" => Ok(Self::ActionToAuthorizer),
            "action_to_policy" => Ok(Self::ActionToPolicy),
            "action_to_operator" => Ok(Self::ActionToOperator),
            other => Err(ProvError::UnknownPattern(other.to_string())),
        }
    }
}

/// Graph-pattern traversal from the decision actions; results are sorted
/// node ids.
pub fn query(graph: &ProvGraph, pattern: QueryPattern) -> Vec<String> {
    let mut results: BTreeSet<String> = BTreeSet::new();
    for action in graph.action_entities() {
        match pattern {
            QueryPattern::ActionToAuthorizer | QueryPattern::ActionToPolicy => {
                for edge in graph.edges_from(action, EdgeKind::WasDerivedFrom) {
                    let Some(node) = graph.nodes.get(&edge.target) else {
                        continue;
                    };
                    let matched = match pattern {
                        QueryPattern::ActionToPolicy => {
                            node.kind == Some(FragmentKind::PolicySnapshot)
                        }
                        _ => matches!(
                            node.kind,
                            Some(FragmentKind::ConfigSnapshot)
                                | Some(FragmentKind::HumanApproval)
                        ),
                    };
                    if matched {
                        results.insert(node.id.clone());
                    }
                }
            }
            QueryPattern::ActionToOperator => {
                for edge in graph.edges_from(action, EdgeKind::WasAttributedTo) {
                    results.insert(edge.target.clone());
                }
            }
        }
    }
    results.into_iter().collect()
}
