//! Retrieval-style schema-linking metrics: strict recall rate and mean
//! recall/precision/F1, at table or field granularity, plus token averages.
//! Identifiers are canonicalized case-insensitively before comparison; a zero
//! denominator sets the corresponding score to zero, and empty predictions
//! are included.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{ItemKind, SchemaItemId};
use crate::error::{Error, Result};
use crate::llmio::Usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Table,
    Field,
}

impl std::str::FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "table" | "tables" => Ok(Granularity::Table),
            "field" | "fields" => Ok(Granularity::Field),
            other => Err(Error::InvalidArgument(format!(
                "unknown granularity `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub granularity: Granularity,
    pub tp: u32,
    pub n_gold: u32,
    pub n_pred: u32,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub strict: u8,
    /// Instances with no gold items score zero by the zero-denominator rule
    /// and are flagged here.
    pub empty_gold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub granularity: Granularity,
    /// Percentages in [0, 100].
    pub srr: f64,
    pub nsr: f64,
    pub nsp: f64,
    pub nsf: f64,
    pub avg_tokens: f64,
}

fn canonical_set(ids: &BTreeSet<String>) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_lowercase()).collect()
}

/// Score one instance from canonical id sets.
pub fn score_sets(
    instance_id: &str,
    gold: &BTreeSet<String>,
    predicted: &BTreeSet<String>,
    granularity: Granularity,
) -> InstanceScore {
    let gold = canonical_set(gold);
    let predicted = canonical_set(predicted);
    let tp = gold.intersection(&predicted).count() as u32;
    let n_gold = gold.len() as u32;
    let n_pred = predicted.len() as u32;
    let recall = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    let precision = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let strict = u8::from(n_gold > 0 && recall == 1.0);
    InstanceScore {
        instance_id: instance_id.to_string(),
        granularity,
        tp,
        n_gold,
        n_pred,
        recall,
        precision,
        f1,
        strict,
        empty_gold: n_gold == 0,
    }
}

/// Project an item set to canonical ids at one granularity.
pub fn project_items(items: &BTreeSet<SchemaItemId>, granularity: Granularity) -> BTreeSet<String> {
    let kind = match granularity {
        Granularity::Table => ItemKind::Table,
        Granularity::Field => ItemKind::Field,
    };
    items
        .iter()
        .filter(|i| i.kind == kind)
        .map(|i| i.canonical.clone())
        .collect()
}

/// Score one instance: gold schema vs predicted items, at one granularity.
pub fn score_instance(
    instance_id: &str,
    gold: &BTreeSet<SchemaItemId>,
    predicted: &BTreeSet<SchemaItemId>,
    granularity: Granularity,
) -> InstanceScore {
    score_sets(
        instance_id,
        &project_items(gold, granularity),
        &project_items(predicted, granularity),
        granularity,
    )
}

/// Aggregate per-instance scores into the report (percent means).
pub fn aggregate(scores: &[InstanceScore], usages: &[Usage]) -> Result<MetricReport> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no instance scores".into()));
    }
    let granularity = scores[0].granularity;
    if scores.iter().any(|s| s.granularity != granularity) {
        return Err(Error::InvalidArgument(
            "scores mix table and field granularity".into(),
        ));
    }
    let n = scores.len() as f64;
    let srr = scores.iter().map(|s| s.strict as f64).sum::<f64>() / n * 100.0;
    let nsr = scores.iter().map(|s| s.recall).sum::<f64>() / n * 100.0;
    let nsp = scores.iter().map(|s| s.precision).sum::<f64>() / n * 100.0;
    let nsf = scores.iter().map(|s| s.f1).sum::<f64>() / n * 100.0;
    let avg_tokens = if usages.is_empty() {
        0.0
    } else {
        usages.iter().map(|u| u.total() as f64).sum::<f64>() / usages.len() as f64
    };
    Ok(MetricReport {
        n: scores.len(),
        granularity,
        srr,
        nsr,
        nsp,
        nsf,
        avg_tokens,
    })
}

impl MetricReport {
    /// Two-decimal percentage summary line.
    pub fn summary_line(&self) -> String {
        format!(
            "N={} SRR={:.2} NSR={:.2} NSP={:.2} NSF={:.2} AvgTokens={:.1}",
            self.n, self.srr, self.nsr, self.nsp, self.nsf, self.avg_tokens
        )
    }
}
