//! Cross-regime aggregation: collect per-anchor feasibility reports into
//! the category matrix, compute per-property counts / mean / coefficient
//! of variation over the vendor columns, apply the gap-partition rule,
//! and render the two summary tables as Markdown.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::feasibility::FeasibilityReport;
use crate::model::{Category, PropertyClass};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("missing column `{0}`: no feasibility report for this regime")]
    MissingColumn(String),
    #[error("invalid column spec: {0}")]
    InvalidColumns(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One matrix column: a vendor regime or a comparator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub display: String,
    pub regime: String,
    /// Comparator columns are excluded from counts, mean, CV and the
    /// partition.
    pub vendor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub columns: Vec<Column>,
}

impl ColumnSpec {
    pub fn from_bytes(raw: &[u8]) -> Result<Self, MatrixError> {
        let spec: Self =
            serde_json::from_slice(raw).map_err(|e| MatrixError::InvalidColumns(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MatrixError> {
        let mut seen = std::collections::BTreeSet::new();
        for column in &self.columns {
            if !seen.insert(&column.regime) {
                return Err(MatrixError::DuplicateColumn(column.regime.clone()));
            }
        }
        let vendor_count = self.columns.iter().filter(|c| c.vendor).count();
        if vendor_count != 6 {
            return Err(MatrixError::InvalidColumns(format!(
                "expected exactly 6 vendor columns, found {vendor_count}"
            )));
        }
        Ok(())
    }
}

/// Gap classes from the partition rule over the six vendor cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapClass {
    RegimeIndependent,
    RegimeDependent,
    Mixed,
    Unclassified,
}

impl GapClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RegimeIndependent => "regime_independent",
            Self::RegimeDependent => "regime_dependent",
            Self::Mixed => "mixed",
            Self::Unclassified => "unclassified",
        }
    }
}

/// Per-property statistics over the six vendor columns. `mean` and `cv`
/// are unrounded; rendering rounds half away from zero to two decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyStats {
    /// Category counts in F, P, S, O order.
    pub counts: [u32; 4],
    pub mean: f64,
    /// `None` when the mean is zero and the CV is mathematically
    /// undefined; rendered as the literal sentinel.
    pub cv: Option<f64>,
    pub partition: GapClass,
}

/// Sentinel rendered for a zero-mean CV.
pub const CV_UNDEFINED: &str = "undefined (zero mean)";

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSummary {
    pub columns: Vec<Column>,
    /// regime -> categories in canonical property order.
    pub cells: BTreeMap<String, Vec<Category>>,
    /// regime -> completeness percentage.
    pub completeness: BTreeMap<String, f64>,
    pub per_property: Vec<(PropertyClass, PropertyStats)>,
    /// Anchors per cell; one at pilot scale.
    pub sample_count: u32,
}

/// Collect one report per declared column into the summary.
pub fn aggregate(
    reports: &[FeasibilityReport],
    spec: &ColumnSpec,
) -> Result<MatrixSummary, MatrixError> {
    spec.validate()?;
    let mut by_regime: BTreeMap<&str, &FeasibilityReport> = BTreeMap::new();
    for report in reports {
        if by_regime.insert(report.regime.as_str(), report).is_some() {
            return Err(MatrixError::DuplicateColumn(report.regime.clone()));
        }
    }

    let mut cells = BTreeMap::new();
    let mut completeness = BTreeMap::new();
    for column in &spec.columns {
        let report = by_regime
            .get(column.regime.as_str())
            .ok_or_else(|| MatrixError::MissingColumn(column.regime.clone()))?;
        cells.insert(column.regime.clone(), report.categories());
        completeness.insert(column.regime.clone(), report.completeness_pct);
    }

    let vendor_regimes: Vec<&str> = spec
        .columns
        .iter()
        .filter(|c| c.vendor)
        .map(|c| c.regime.as_str())
        .collect();

    let mut per_property = Vec::with_capacity(7);
    for (row, property) in PropertyClass::ALL.iter().enumerate() {
        let vendor_cells: Vec<Category> = vendor_regimes
            .iter()
            .map(|regime| cells[*regime][row])
            .collect();
        let vendor_cells: [Category; 6] = vendor_cells
            .try_into()
            .expect("exactly six vendor columns");
        per_property.push((*property, property_stats(&vendor_cells)));
    }

    Ok(MatrixSummary {
        columns: spec.columns.clone(),
        cells,
        completeness,
        per_property,
        sample_count: 1,
    })
}

fn count_of(cells: &[Category; 6], wanted: Category) -> u32 {
    cells.iter().filter(|c| **c == wanted).count() as u32
}

/// Counts, population mean, population CV (six-anchor denominator) and
/// gap class for one property row.
pub fn property_stats(cells: &[Category; 6]) -> PropertyStats {
    let counts = [
        count_of(cells, Category::FullyFillable),
        count_of(cells, Category::PartiallyFillable),
        count_of(cells, Category::StructurallyUnfillable),
        count_of(cells, Category::Opaque),
    ];
    let scores: Vec<f64> = cells.iter().map(|c| c.score()).collect();
    let mean = scores.iter().sum::<f64>() / 6.0;
    let cv = if mean > 0.0 {
        let variance = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 6.0;
        Some(variance.sqrt() / mean)
    } else {
        None
    };
    PropertyStats {
        counts,
        mean,
        cv,
        partition: partition(cells),
    }
}

/// Partition one property row over the six vendor cells, rules evaluated
/// in order:
///   1. regime-independent if S or O in a strict majority (>= 4 of 6);
///   2. mixed if dominant-F (exactly 5 F) with the single non-F cell P;
///   3. regime-dependent if dominant-F with the single non-F cell S, or
///      if the row deviates from its modal category by two or more cells;
///   4. unclassified otherwise.
pub fn partition(cells: &[Category; 6]) -> GapClass {
    let zero_evidenced = cells
        .iter()
        .filter(|c| matches!(c, Category::StructurallyUnfillable | Category::Opaque))
        .count();
    if zero_evidenced >= 4 {
        return GapClass::RegimeIndependent;
    }
    let f = count_of(cells, Category::FullyFillable);
    let p = count_of(cells, Category::PartiallyFillable);
    let s = count_of(cells, Category::StructurallyUnfillable);
    if f == 5 && p == 1 {
        return GapClass::Mixed;
    }
    let max_count = [
        f,
        p,
        s,
        count_of(cells, Category::Opaque),
    ]
    .into_iter()
    .max()
    .expect("non-empty");
    let deviation = 6 - max_count;
    if (f == 5 && s == 1) || deviation >= 2 {
        return GapClass::RegimeDependent;
    }
    GapClass::Unclassified
}

/// Half-away-from-zero rounding to two decimals, formatted exactly.
pub fn format_two_decimals(value: f64) -> String {
    let hundredths = (value * 100.0).round() as i64;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// One-fractional-digit percentage, formatted exactly.
pub fn format_pct(value: f64) -> String {
    let tenths = (value * 10.0).round() as i64;
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn markdown_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

/// The per-property by per-regime category matrix, plus the completeness
/// row, in fixed Markdown layout.
pub fn render_table2(summary: &MatrixSummary) -> String {
    let mut header = vec!["Property".to_string()];
    header.extend(summary.columns.iter().map(|c| c.display.clone()));
    let mut out = markdown_row(&header);
    out.push_str(&markdown_row(&vec!["---".to_string(); header.len()]));
    for (row, property) in PropertyClass::ALL.iter().enumerate() {
        let mut cells = vec![property.display_name().to_string()];
        for column in &summary.columns {
            cells.push(summary.cells[&column.regime][row].letter().to_string());
        }
        out.push_str(&markdown_row(&cells));
    }
    let mut cells = vec!["strict-gov. completeness pct".to_string()];
    for column in &summary.columns {
        cells.push(format_pct(summary.completeness[&column.regime]));
    }
    out.push_str(&markdown_row(&cells));
    out
}

/// The per-property descriptive summary over the vendor columns only.
pub fn render_table3(summary: &MatrixSummary) -> String {
    let header = [
        "Property", "F", "P", "S", "O", "Mean", "CV",
    ];
    let mut out = markdown_row(&header.map(String::from));
    out.push_str(&markdown_row(&vec!["---".to_string(); header.len()]));
    for (property, stats) in &summary.per_property {
        let cv = match stats.cv {
            Some(cv) => format_two_decimals(cv),
            None => CV_UNDEFINED.to_string(),
        };
        let cells = vec![
            property.display_name().to_string(),
            stats.counts[0].to_string(),
            stats.counts[1].to_string(),
            stats.counts[2].to_string(),
            stats.counts[3].to_string(),
            format_two_decimals(stats.mean),
            cv,
        ];
        out.push_str(&markdown_row(&cells));
    }
    out
}

/// Canonical partition document.
pub fn render_partition_json(summary: &MatrixSummary) -> Result<Vec<u8>, MatrixError> {
    let mut partition = serde_json::Map::new();
    for (property, stats) in &summary.per_property {
        partition.insert(
            property.key().to_string(),
            json!(stats.partition.as_str()),
        );
    }
    let document = json!({ "gap_partition": partition });
    Ok(crate::canon::to_canonical_bytes(&document)?)
}
