//! Decision-event schema mapping and feasibility reporting: classify each
//! decision unit's seven evidence properties into reconstructability
//! categories and emit the canonical per-anchor report.
//!
//! The per-property rules below are the tool's concretization of the
//! general rule that a missing required fragment kind reads
//! structurally_unfillable and evidence that exists but is not externally
//! inspectable reads opaque; they are documented in the README.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Category, DecisionUnit, Fragment, FragmentKind, FragmentsFile, PropertyClass};
use crate::pipeline::{self, PipelineConfig, PipelineError};

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One classified property with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyFinding {
    pub property: PropertyClass,
    pub category: Category,
    /// Empty exactly when the category is fully_fillable.
    pub gap_description: String,
    /// Non-empty exactly when the category is F, P or O.
    pub evidence_fragment_ids: Vec<String>,
}

/// The per-anchor feasibility report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub anchor_id: String,
    pub regime: String,
    pub adapter: String,
    pub tool_version: String,
    /// Exactly seven findings in canonical property order.
    pub findings: Vec<PropertyFinding>,
    /// round1(sum(score) / 7 * 100), half away from zero.
    pub completeness_pct: f64,
    /// Present only when the anchor produced more than one decision unit;
    /// the top-level findings are then a worst-category roll-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_findings: Option<Vec<UnitFindings>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFindings {
    pub unit_id: String,
    pub findings: Vec<PropertyFinding>,
}

/// Fixed gap-description template per (property, category) pair, so the
/// emitted reports are byte-stable.
pub fn gap_description(property: PropertyClass, category: Category) -> String {
    use Category::*;
    use PropertyClass::*;
    if category == FullyFillable {
        return String::new();
    }
    match (property, category) {
        (Inputs, PartiallyFillable) => {
            "input evidence is split across multiple message fragments or flagged incomplete"
        }
        (Inputs, _) => "no upstream input message fragment precedes the decision",
        (PolicyBasis, _) => "no policy snapshot is bound to the decision unit",
        (OperatorIdentity, _) => "no fragment in the decision unit carries an attribution principal",
        (AuthorizationEnvelope, _) => {
            "no permission envelope or approval fragment is bound to the decision unit"
        }
        (ReasoningTrace, Opaque) => {
            "reasoning-adjacent evidence is present but not externally inspectable"
        }
        (ReasoningTrace, _) => "no reasoning-adjacent fragment exists in the decision unit",
        (OutputAction, _) => "the tool call is missing its name or its payload",
        (PostConditionState, PartiallyFillable) => {
            "a state mutation is present but its effect record is incomplete"
        }
        (PostConditionState, _) => "no state mutation is bound to the decision unit",
    }
    .to_string()
}

fn finding(
    property: PropertyClass,
    category: Category,
    evidence: Vec<String>,
) -> PropertyFinding {
    PropertyFinding {
        property,
        category,
        gap_description: gap_description(property, category),
        evidence_fragment_ids: evidence,
    }
}

fn members<'a>(unit: &DecisionUnit, ordered: &'a [Fragment]) -> Vec<&'a Fragment> {
    ordered
        .iter()
        .filter(|f| unit.fragment_ids.contains(&f.id))
        .collect()
}

fn has_complete_effect_record(fragment: &Fragment) -> bool {
    (fragment.payload.contains_key("before") && fragment.payload.contains_key("after"))
        || fragment.payload.contains_key("effect")
}

fn non_empty_string(fragment: &Fragment, key: &str) -> bool {
    fragment
        .payload
        .get(key)
        .and_then(|v| v.as_str())
        .is_some_and(|s| !s.is_empty())
}

/// Classify one decision unit against all seven properties. Total and
/// deterministic: every property receives exactly one category.
pub fn classify(unit: &DecisionUnit, ordered: &[Fragment]) -> Vec<PropertyFinding> {
    let members = members(unit, ordered);
    let tc_position = ordered
        .iter()
        .position(|f| f.id == unit.anchor_tool_call)
        .unwrap_or(ordered.len());

    let mut findings = Vec::with_capacity(7);
    for property in PropertyClass::ALL {
        findings.push(match property {
            PropertyClass::Inputs => classify_inputs(ordered, tc_position),
            PropertyClass::PolicyBasis => {
                let evidence: Vec<String> = members
                    .iter()
                    .filter(|f| f.kind == FragmentKind::PolicySnapshot)
                    .map(|f| f.id.clone())
                    .collect();
                if evidence.is_empty() {
                    finding(property, Category::StructurallyUnfillable, vec![])
                } else {
                    finding(property, Category::FullyFillable, evidence)
                }
            }
            PropertyClass::OperatorIdentity => {
                let evidence: Vec<String> = members
                    .iter()
                    .filter(|f| f.attribution.as_deref().is_some_and(|a| !a.is_empty()))
                    .map(|f| f.id.clone())
                    .collect();
                if evidence.is_empty() {
                    finding(property, Category::StructurallyUnfillable, vec![])
                } else {
                    finding(property, Category::FullyFillable, evidence)
                }
            }
            PropertyClass::AuthorizationEnvelope => {
                let evidence: Vec<String> = members
                    .iter()
                    .filter(|f| {
                        matches!(
                            f.kind,
                            FragmentKind::ConfigSnapshot | FragmentKind::HumanApproval
                        )
                    })
                    .map(|f| f.id.clone())
                    .collect();
                if evidence.is_empty() {
                    finding(property, Category::StructurallyUnfillable, vec![])
                } else {
                    finding(property, Category::FullyFillable, evidence)
                }
            }
            PropertyClass::ReasoningTrace => {
                let generations: Vec<&&Fragment> = members
                    .iter()
                    .filter(|f| f.kind == FragmentKind::ModelGeneration)
                    .collect();
                let readable: Vec<String> = generations
                    .iter()
                    .filter(|f| f.inspectable && non_empty_string(f, "deliberation"))
                    .map(|f| f.id.clone())
                    .collect();
                if !readable.is_empty() {
                    finding(property, Category::FullyFillable, readable)
                } else if !generations.is_empty() {
                    finding(
                        property,
                        Category::Opaque,
                        generations.iter().map(|f| f.id.clone()).collect(),
                    )
                } else {
                    finding(property, Category::StructurallyUnfillable, vec![])
                }
            }
            PropertyClass::OutputAction => {
                let tool_call = members.iter().find(|f| f.id == unit.anchor_tool_call);
                match tool_call {
                    Some(tc) => {
                        let named = non_empty_string(tc, "tool_name");
                        let has_payload = tc.payload.contains_key("arguments");
                        let category = if named && has_payload {
                            Category::FullyFillable
                        } else {
                            Category::PartiallyFillable
                        };
                        finding(property, category, vec![tc.id.clone()])
                    }
                    // Unreachable for units built by the pipeline, which
                    // always anchor on a tool call.
                    None => finding(property, Category::StructurallyUnfillable, vec![]),
                }
            }
            PropertyClass::PostConditionState => {
                let mutations: Vec<&&Fragment> = members
                    .iter()
                    .filter(|f| f.kind == FragmentKind::StateMutation)
                    .collect();
                let complete: Vec<String> = mutations
                    .iter()
                    .filter(|f| has_complete_effect_record(f))
                    .map(|f| f.id.clone())
                    .collect();
                if !complete.is_empty() {
                    finding(property, Category::FullyFillable, complete)
                } else if !mutations.is_empty() {
                    finding(
                        property,
                        Category::PartiallyFillable,
                        mutations.iter().map(|f| f.id.clone()).collect(),
                    )
                } else {
                    finding(property, Category::StructurallyUnfillable, vec![])
                }
            }
        });
    }
    findings
}

/// Inputs are classified from the chain rather than unit membership: the
/// nearest agent_message preceding the anchor tool call is the upstream
/// input; a refs-linked continuation or an `incomplete` flag downgrades
/// it to partially fillable.
fn classify_inputs(ordered: &[Fragment], tc_position: usize) -> PropertyFinding {
    let Some(seed) = pipeline::nearest_input_message(ordered, tc_position) else {
        return finding(PropertyClass::Inputs, Category::StructurallyUnfillable, vec![]);
    };
    let group = pipeline::input_message_group(ordered, seed, tc_position);
    let evidence: Vec<String> = group.iter().map(|&i| ordered[i].id.clone()).collect();
    let split = group.len() > 1;
    let incomplete = group.iter().any(|&i| ordered[i].is_flagged_incomplete());
    if split || incomplete {
        finding(PropertyClass::Inputs, Category::PartiallyFillable, evidence)
    } else {
        finding(PropertyClass::Inputs, Category::FullyFillable, evidence)
    }
}

/// Exact completeness percentage in tenths of a percent, computed in
/// integer arithmetic with half-away-from-zero rounding.
pub fn completeness_tenths(findings: &[PropertyFinding]) -> u32 {
    let half_units: u32 = findings.iter().map(|f| f.category.half_units()).sum();
    // pct = half_units * 50 / 7; in tenths: half_units * 500 / 7, rounded.
    (2 * half_units * 500 + 7) / 14
}

/// round1(sum(score) / 7 * 100), as a one-fractional-digit decimal.
pub fn completeness_pct(findings: &[PropertyFinding]) -> f64 {
    completeness_tenths(findings) as f64 / 10.0
}

/// Worst-category order for multi-unit roll-ups: absence outranks
/// opacity, which outranks partial evidence.
fn severity(category: Category) -> u8 {
    match category {
        Category::FullyFillable => 0,
        Category::PartiallyFillable => 1,
        Category::Opaque => 2,
        Category::StructurallyUnfillable => 3,
    }
}

/// Everything `reconstruct` produces for one anchor.
#[derive(Debug, Clone)]
pub struct ReconstructionOutput {
    pub report: FeasibilityReport,
    pub ordered: Vec<Fragment>,
    pub units: Vec<(DecisionUnit, Vec<PropertyFinding>)>,
}

/// Run stages 2-6 over a validated fragments file.
pub fn reconstruct(
    file: &FragmentsFile,
    config: &PipelineConfig,
) -> Result<ReconstructionOutput, FeasibilityError> {
    let (ordered, _assembly, units) =
        pipeline::reconstruct_units(file.fragments.clone(), config)?;
    let classified: Vec<(DecisionUnit, Vec<PropertyFinding>)> = units
        .into_iter()
        .map(|unit| {
            let findings = classify(&unit, &ordered);
            (unit, findings)
        })
        .collect();

    let findings = if classified.len() == 1 {
        classified[0].1.clone()
    } else {
        // Experimental multi-unit roll-up: worst category per property.
        PropertyClass::ALL
            .iter()
            .enumerate()
            .map(|(row, property)| {
                let worst = classified
                    .iter()
                    .map(|(_, f)| &f[row])
                    .max_by_key(|f| severity(f.category))
                    .expect("at least one unit")
                    .clone();
                debug_assert_eq!(worst.property, *property);
                worst
            })
            .collect()
    };

    let completeness = completeness_pct(&findings);
    let report = FeasibilityReport {
        anchor_id: file.anchor_id.clone(),
        regime: file.regime.clone(),
        adapter: file.adapter.clone(),
        tool_version: crate::TOOL_VERSION.to_string(),
        findings,
        completeness_pct: completeness,
        unit_findings: (classified.len() > 1).then(|| {
            classified
                .iter()
                .map(|(unit, findings)| UnitFindings {
                    unit_id: unit.unit_id.clone(),
                    findings: findings.clone(),
                })
                .collect()
        }),
        aggregation: (classified.len() > 1).then(|| "worst_category_experimental".to_string()),
    };
    Ok(ReconstructionOutput {
        report,
        ordered,
        units: classified,
    })
}

impl FeasibilityReport {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        if self.findings.len() != 7 {
            return Err(FeasibilityError::InvalidReport(format!(
                "expected exactly 7 findings, got {}",
                self.findings.len()
            )));
        }
        for (row, finding) in self.findings.iter().enumerate() {
            if finding.property != PropertyClass::ALL[row] {
                return Err(FeasibilityError::InvalidReport(format!(
                    "finding {} is `{}`, expected canonical order",
                    row, finding.property
                )));
            }
            let has_evidence = !finding.evidence_fragment_ids.is_empty();
            let needs_evidence = finding.category != Category::StructurallyUnfillable;
            if has_evidence != needs_evidence {
                return Err(FeasibilityError::InvalidReport(format!(
                    "finding `{}` breaks the evidence/category invariant",
                    finding.property
                )));
            }
            if (finding.category == Category::FullyFillable) != finding.gap_description.is_empty()
            {
                return Err(FeasibilityError::InvalidReport(format!(
                    "finding `{}` breaks the gap-description invariant",
                    finding.property
                )));
            }
        }
        let expected = completeness_tenths(&self.findings) as f64 / 10.0;
        if (self.completeness_pct - expected).abs() > f64::EPSILON {
            return Err(FeasibilityError::InvalidReport(format!(
                "completeness {} does not match findings (expected {})",
                self.completeness_pct, expected
            )));
        }
        Ok(())
    }

    /// Canonical report bytes; rejects reports violating the invariants.
    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, FeasibilityError> {
        self.validate()?;
        Ok(crate::canon::to_canonical_bytes(self)?)
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, FeasibilityError> {
        let report: Self = serde_json::from_slice(raw)?;
        report.validate()?;
        Ok(report)
    }

    /// Categories in canonical property order.
    pub fn categories(&self) -> Vec<Category> {
        self.findings.iter().map(|f| f.category).collect()
    }
}
