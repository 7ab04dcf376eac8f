//! Uncertainty-guided agentic refinement.
//!
//! The agent loop works over the uncertain set produced by consolidation.
//! Evidence tools (list_tables, list_columns, get_field_stats, probe_sql) are
//! read-only; membership changes happen only through the three legal
//! transitions: uncertain -> kept, uncertain -> rejected (with a reason), and
//! candidate -> kept. Required items are locked. At termination, undecided
//! uncertain items are kept by default.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    build_field_stats, render_evidence, EvidenceLevel, ItemKind, ProfileStore, SchemaCatalog,
    SchemaItemId,
};
use crate::consolidate::BucketedSets;
use crate::dbadapter::DbAdapter;
use crate::error::{Error, Result};
use crate::llmio::{Backend, ChatMessage, ToolCall, ToolSpec, Usage};

pub const REFINE_TEMPLATE: &str = include_str!("../templates/refine.txt");

pub const PROBE_SQL_ROW_LIMIT: usize = 50;
pub const PROBE_SQL_TIME_LIMIT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub turn: u32,
    pub call: ToolCall,
    pub result: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementState {
    pub required: BTreeSet<SchemaItemId>,
    pub uncertain: BTreeSet<SchemaItemId>,
    pub candidate: BTreeSet<SchemaItemId>,
    pub kept: BTreeSet<SchemaItemId>,
    pub rejected: Vec<RejectedItem>,
    pub turn: u32,
    pub max_turns: u32,
    pub trace: Vec<TraceEntry>,
    pub evidence_upgrades: BTreeSet<SchemaItemId>,
    /// Bytes of evidence text rendered for the agent (prompt + tool results).
    pub evidence_bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedItem {
    pub item: SchemaItemId,
    pub reason: String,
}

/// (required, uncertain, candidate, kept, rejected) at a point in time.
pub type MembershipSnapshot = (
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    Vec<(SchemaItemId, String)>,
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Required,
    Kept,
    Pending,
}

/// The final linked schema of the pipeline: required + kept + pending,
/// disjoint from dropped, closed under parent tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkedSchema {
    pub items: BTreeSet<SchemaItemId>,
    pub provenance: BTreeMap<String, Provenance>,
    pub dropped: Vec<RejectedItem>,
    pub diagnostics: Vec<String>,
}

impl RefinementState {
    pub fn new(buckets: &BucketedSets, max_turns: u32) -> Self {
        Self {
            required: buckets.required.clone(),
            uncertain: buckets.uncertain.clone(),
            candidate: buckets.candidate.clone(),
            kept: BTreeSet::new(),
            rejected: Vec::new(),
            turn: 0,
            max_turns,
            trace: Vec::new(),
            evidence_upgrades: BTreeSet::new(),
            evidence_bytes: 0,
        }
    }

    fn rejected_contains(&self, item: &SchemaItemId) -> bool {
        self.rejected.iter().any(|r| &r.item == item)
    }

    /// uncertain -> kept, or candidate -> kept (recall recovery).
    pub fn apply_keep(&mut self, item: &SchemaItemId) -> Result<()> {
        if self.required.contains(item) {
            return Err(Error::Tool(format!("`{item}` is already locked as required")));
        }
        if self.kept.contains(item) || self.rejected_contains(item) {
            return Err(Error::Tool(format!("`{item}` is already decided")));
        }
        if self.uncertain.remove(item) || self.candidate.remove(item) {
            self.kept.insert(item.clone());
            Ok(())
        } else {
            Err(Error::NotFound(format!("schema item `{item}`")))
        }
    }

    /// uncertain -> rejected, with a non-empty reason.
    pub fn apply_discard(&mut self, item: &SchemaItemId, reason: &str) -> Result<()> {
        if reason.trim().is_empty() {
            return Err(Error::Tool("discard requires a non-empty reason".into()));
        }
        if self.required.contains(item) {
            return Err(Error::Tool(format!("`{item}` is locked as required")));
        }
        if self.candidate.contains(item) {
            return Err(Error::Tool("candidates cannot be discarded".into()));
        }
        if self.kept.contains(item) || self.rejected_contains(item) {
            return Err(Error::Tool(format!("`{item}` is already decided")));
        }
        if self.uncertain.remove(item) {
            self.rejected.push(RejectedItem {
                item: item.clone(),
                reason: reason.trim().to_string(),
            });
            Ok(())
        } else {
            Err(Error::NotFound(format!("schema item `{item}`")))
        }
    }

    /// Membership sets as a snapshot tuple, used by tests to assert that
    /// evidence tools leave them unchanged.
    pub fn membership_snapshot(&self) -> MembershipSnapshot {
        (
            self.required.clone(),
            self.uncertain.clone(),
            self.candidate.clone(),
            self.kept.clone(),
            self.rejected
                .iter()
                .map(|r| (r.item.clone(), r.reason.clone()))
                .collect(),
        )
    }

    pub fn assert_disjoint(&self) -> Result<()> {
        let sets: Vec<&BTreeSet<SchemaItemId>> =
            vec![&self.required, &self.uncertain, &self.candidate, &self.kept];
        let rejected: BTreeSet<SchemaItemId> =
            self.rejected.iter().map(|r| r.item.clone()).collect();
        let mut seen: BTreeSet<&SchemaItemId> = BTreeSet::new();
        for s in sets {
            for item in s {
                if !seen.insert(item) || rejected.contains(item) {
                    return Err(Error::Integrity(format!(
                        "item `{item}` appears in more than one refinement set"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The linked schema per the final-schema rule: required and kept items
    /// plus whatever is still uncertain, excluding rejected items. Parent
    /// tables of kept/pending fields are auto-included.
    pub fn finalize(&self) -> LinkedSchema {
        let mut items = BTreeSet::new();
        let mut provenance = BTreeMap::new();
        let mut diagnostics = Vec::new();
        for i in &self.required {
            items.insert(i.clone());
            provenance.insert(i.canonical.clone(), Provenance::Required);
        }
        for i in &self.kept {
            items.insert(i.clone());
            provenance.insert(i.canonical.clone(), Provenance::Kept);
        }
        for i in &self.uncertain {
            items.insert(i.clone());
            provenance.insert(i.canonical.clone(), Provenance::Pending);
        }
        let mut dropped = self.rejected.clone();
        // parent-table closure; a kept field overrides a dropped parent table
        let fields: Vec<SchemaItemId> = items
            .iter()
            .filter(|i| i.kind == ItemKind::Field)
            .cloned()
            .collect();
        for f in fields {
            let parent = f.parent_table();
            if !items.contains(&parent) {
                if let Some(pos) = dropped.iter().position(|r| r.item == parent) {
                    dropped.remove(pos);
                    diagnostics.push(format!(
                        "parent table `{parent}` re-included for field `{f}` after being discarded"
                    ));
                }
                let p = *provenance
                    .get(&f.canonical)
                    .unwrap_or(&Provenance::Kept);
                items.insert(parent.clone());
                provenance.insert(parent.canonical.clone(), p);
            }
        }
        LinkedSchema {
            items,
            provenance,
            dropped,
            diagnostics,
        }
    }
}

// ---------------------------------------------------------------------------
// Tools

pub const EVIDENCE_TOOLS: [&str; 4] = ["list_tables", "list_columns", "get_field_stats", "probe_sql"];
pub const DECISION_TOOLS: [&str; 2] = ["keep", "discard"];

pub fn tool_specs() -> Vec<ToolSpec> {
    let item_arg = serde_json::json!({
        "type": "object",
        "properties": {
            "item": { "type": "string", "description": "schema item, e.g. `orders` or `orders.user_id`" }
        },
        "required": ["item"]
    });
    vec![
        ToolSpec {
            name: "list_tables".into(),
            description: "List every table in the database with its field names.".into(),
            parameters: serde_json::json!({ "type": "object", "properties": {} }),
        },
        ToolSpec {
            name: "list_columns".into(),
            description: "List the columns of one table with types and semantic categories."
                .into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": { "table": { "type": "string" } },
                "required": ["table"]
            }),
        },
        ToolSpec {
            name: "get_field_stats".into(),
            description:
                "Fetch detailed statistics for one field: range, distinct count, null fraction, histogram."
                    .into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": { "field": { "type": "string", "description": "e.g. `orders.total`" } },
                "required": ["field"]
            }),
        },
        ToolSpec {
            name: "probe_sql".into(),
            description: "Run one read-only SELECT to test whether a hypothesized schema usage is feasible.".into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": { "sql": { "type": "string" } },
                "required": ["sql"]
            }),
        },
        ToolSpec {
            name: "keep".into(),
            description: "Confirm that an uncertain or newly discovered schema item belongs in the final schema.".into(),
            parameters: item_arg.clone(),
        },
        ToolSpec {
            name: "discard".into(),
            description: "Remove an uncertain schema item, with an explicit reason.".into(),
            parameters: serde_json::json!({
                "type": "object",
                "properties": {
                    "item": { "type": "string" },
                    "reason": { "type": "string" }
                },
                "required": ["item", "reason"]
            }),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolResult {
    pub content: String,
    pub is_error: bool,
}

impl ToolResult {
    fn ok(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            is_error: false,
        }
    }
    fn err(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            is_error: true,
        }
    }
}

/// Resolve a raw item name from tool arguments ("t", "t.c", or canonical).
pub fn resolve_item(catalog: &SchemaCatalog, raw: &str) -> Option<SchemaItemId> {
    let lc = raw.trim().to_lowercase();
    if let Some(id) = catalog.get(&lc) {
        return Some(id.clone());
    }
    catalog
        .get(&format!("{}.{}", catalog.database.to_lowercase(), lc))
        .cloned()
}

fn string_arg(call: &ToolCall, name: &str) -> Result<String> {
    call.arguments
        .get(name)
        .and_then(|v| v.as_str())
        .map(String::from)
        .ok_or_else(|| Error::Tool(format!("missing or non-string argument `{name}`")))
}

fn reject_non_select(sql: &str) -> Result<()> {
    let trimmed = sql.trim().trim_end_matches(';');
    if trimmed.contains(';') {
        return Err(Error::Tool("probe_sql accepts a single statement".into()));
    }
    let first = trimmed
        .split_whitespace()
        .next()
        .unwrap_or("")
        .to_uppercase();
    if first != "SELECT" && first != "WITH" {
        return Err(Error::Tool(
            "probe_sql accepts only a single SELECT statement".into(),
        ));
    }
    Ok(())
}

fn render_query_result(result: &crate::dbadapter::QueryResult) -> String {
    let mut out = result.columns.join("\t");
    for row in &result.rows {
        out.push('\n');
        out.push_str(
            &row.iter()
                .map(|v| v.as_deref().unwrap_or("NULL"))
                .collect::<Vec<_>>()
                .join("\t"),
        );
    }
    out.push_str(&format!(
        "\n({} row{}{})",
        result.rows.len(),
        if result.rows.len() == 1 { "" } else { "s" },
        if result.truncated { ", truncated" } else { "" }
    ));
    out
}

/// Dispatch one tool call. Evidence tools never change the membership sets;
/// decision tools mutate only through apply_keep/apply_discard. Failures are
/// returned to the model as tool errors, never as fatal pipeline errors.
pub fn dispatch_tool(
    state: &mut RefinementState,
    call: &ToolCall,
    catalog: &SchemaCatalog,
    store: &ProfileStore,
    adapter: &dyn DbAdapter,
) -> ToolResult {
    let outcome: Result<String> = match call.name.as_str() {
        "list_tables" => {
            let text = crate::catalog::compact_schema_view(catalog);
            state.evidence_bytes += text.len() as u64;
            Ok(text)
        }
        "list_columns" => string_arg(call, "table").and_then(|table| {
            let tid = resolve_item(catalog, &table)
                .filter(|i| i.kind == ItemKind::Table)
                .ok_or_else(|| Error::Tool(format!("unknown table `{table}`")))?;
            let mut out = String::new();
            for f in catalog.fields_of(&tid) {
                out.push_str(&render_evidence(catalog, store, &f, EvidenceLevel::L1)?);
                out.push('\n');
            }
            state.evidence_bytes += out.len() as u64;
            Ok(out)
        }),
        "get_field_stats" => string_arg(call, "field").and_then(|field| {
            let fid = resolve_item(catalog, &field)
                .filter(|i| i.kind == ItemKind::Field)
                .ok_or_else(|| Error::Tool(format!("unknown field `{field}`")))?;
            let base = render_evidence(catalog, store, &fid, EvidenceLevel::L3)?;
            let text = if base.contains("stats:") {
                base
            } else {
                // store was built below L3; acquire stats on demand
                match build_field_stats(adapter, &fid, store.sample_limit)? {
                    Some(stats) => format!(
                        "{}\n  stats: min={} max={} distinct={} null_fraction={:.3}",
                        render_evidence(catalog, store, &fid, EvidenceLevel::L2)?,
                        stats.min.as_deref().unwrap_or("-"),
                        stats.max.as_deref().unwrap_or("-"),
                        stats.distinct_count,
                        stats.null_fraction,
                    ),
                    None => format!("{base}\n  stats: no data"),
                }
            };
            state.evidence_upgrades.insert(fid);
            state.evidence_bytes += text.len() as u64;
            Ok(text)
        }),
        "probe_sql" => string_arg(call, "sql").and_then(|sql| {
            reject_non_select(&sql)?;
            let result = adapter
                .run_query(&sql, PROBE_SQL_ROW_LIMIT, PROBE_SQL_TIME_LIMIT)
                .map_err(|e| Error::Tool(e.to_string()))?;
            let text = render_query_result(&result);
            state.evidence_bytes += text.len() as u64;
            Ok(text)
        }),
        "keep" => string_arg(call, "item").and_then(|raw| {
            let item = resolve_item(catalog, &raw)
                .ok_or_else(|| Error::NotFound(format!("schema item `{raw}`")))?;
            state.apply_keep(&item)?;
            Ok(format!("kept `{item}`"))
        }),
        "discard" => {
            string_arg(call, "item").and_then(|raw| {
                let reason = string_arg(call, "reason")?;
                let item = resolve_item(catalog, &raw)
                    .ok_or_else(|| Error::NotFound(format!("schema item `{raw}`")))?;
                state.apply_discard(&item, &reason)?;
                Ok(format!("discarded `{item}`"))
            })
        }
        other => Err(Error::Tool(format!("unknown tool `{other}`"))),
    };
    let result = match outcome {
        Ok(content) => ToolResult::ok(content),
        Err(e) => ToolResult::err(e.to_string()),
    };
    state.trace.push(TraceEntry {
        turn: state.turn,
        call: call.clone(),
        result: result.content.clone(),
    });
    result
}

// ---------------------------------------------------------------------------
// Agent loop

pub fn refinement_messages(
    state: &mut RefinementState,
    question: &str,
    catalog: &SchemaCatalog,
    store: &ProfileStore,
    evidence_level: EvidenceLevel,
) -> Result<Vec<ChatMessage>> {
    let mut required = String::new();
    for i in &state.required {
        required.push_str(&format!("- {}\n", i.short_name()));
    }
    if required.is_empty() {
        required.push_str("(none)\n");
    }
    let mut uncertain = String::new();
    for i in &state.uncertain {
        let text = render_evidence(catalog, store, i, evidence_level)?;
        state.evidence_bytes += text.len() as u64;
        uncertain.push_str(&format!("- {}\n", text.replace('\n', "\n  ")));
    }
    if uncertain.is_empty() {
        uncertain.push_str("(none)\n");
    }
    let user = format!(
        "Question: {question}\n\nRequired (locked):\n{required}\nUncertain items:\n{uncertain}"
    );
    Ok(vec![
        ChatMessage::system(REFINE_TEMPLATE),
        ChatMessage::user(user),
    ])
}

pub struct RefinementOutcome {
    pub linked: LinkedSchema,
    pub state: RefinementState,
    pub usages: Vec<Usage>,
    pub flags: Vec<String>,
}

/// Run the tool loop until the uncertain set empties, the agent stops
/// requesting tools, or the turn budget is exhausted.
#[allow(clippy::too_many_arguments)]
pub fn run_refinement(
    buckets: &BucketedSets,
    question: &str,
    catalog: &SchemaCatalog,
    store: &ProfileStore,
    adapter: &dyn DbAdapter,
    backend: &dyn Backend,
    max_turns: u32,
    evidence_level: EvidenceLevel,
) -> Result<RefinementOutcome> {
    if max_turns < 1 {
        return Err(Error::InvalidArgument("max_turns must be >= 1".into()));
    }
    let mut state = RefinementState::new(buckets, max_turns);
    let mut messages = refinement_messages(&mut state, question, catalog, store, evidence_level)?;
    let tools = tool_specs();
    let mut usages = Vec::new();
    let mut flags = Vec::new();

    while state.turn < state.max_turns && !state.uncertain.is_empty() {
        let (reply, usage) = match backend.complete(&messages, &tools) {
            Ok(r) => r,
            Err(e) => {
                // treat as a hit turn budget: pending fallback applies
                flags.push(format!("refinement backend error: {e}"));
                break;
            }
        };
        usages.push(usage);
        state.turn += 1;
        if reply.tool_calls.is_empty() {
            break; // agent stopped requesting tools
        }
        let calls = reply.tool_calls.clone();
        messages.push(reply);
        for call in &calls {
            let result = dispatch_tool(&mut state, call, catalog, store, adapter);
            let content = if result.is_error {
                format!("error: {}", result.content)
            } else {
                result.content
            };
            messages.push(ChatMessage::tool(call.id.clone(), content));
        }
    }

    let linked = state.finalize();
    Ok(RefinementOutcome {
        linked,
        state,
        usages,
        flags,
    })
}
