//! Schema catalogs, profiling evidence, and evidence rendering.
//!
//! A catalog is the canonical universe of schema items (tables and fields)
//! for one database. Every item carries a lowercase dotted canonical path
//! ("db.table" or "db.table.field"); identity is case-insensitive. Profiling
//! evidence is organized in four levels:
//!
//! - L0: table and field names
//! - L1: field types and coarse semantic categories
//! - L2: descriptions, representative values, value summaries
//! - L3: field statistics (range, distinct count, null fraction, histogram)

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dbadapter::DbAdapter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Table,
    Field,
}

/// Identity of a table or field. Equality, ordering, and hashing all go
/// through the lowercase canonical path, so lookups are case-insensitive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaItemId {
    pub kind: ItemKind,
    pub database: String,
    pub table: String,
    pub field: Option<String>,
    pub canonical: String,
}

impl SchemaItemId {
    pub fn table(database: &str, table: &str) -> Self {
        Self {
            kind: ItemKind::Table,
            database: database.to_string(),
            table: table.to_string(),
            field: None,
            canonical: format!("{}.{}", database, table).to_lowercase(),
        }
    }

    pub fn field(database: &str, table: &str, field: &str) -> Self {
        Self {
            kind: ItemKind::Field,
            database: database.to_string(),
            table: table.to_string(),
            field: Some(field.to_string()),
            canonical: format!("{}.{}.{}", database, table, field).to_lowercase(),
        }
    }

    /// "table" or "table.field", without the database prefix.
    pub fn short_name(&self) -> String {
        match &self.field {
            Some(f) => format!("{}.{}", self.table, f),
            None => self.table.clone(),
        }
    }

    /// Id of the owning table; identity for table ids.
    pub fn parent_table(&self) -> SchemaItemId {
        SchemaItemId::table(&self.database, &self.table)
    }
}

impl PartialEq for SchemaItemId {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}
impl Eq for SchemaItemId {}
impl PartialOrd for SchemaItemId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SchemaItemId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical.cmp(&other.canonical)
    }
}
impl std::hash::Hash for SchemaItemId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}
impl fmt::Display for SchemaItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum EvidenceLevel {
    L0,
    L1,
    #[default]
    L2,
    L3,
}

impl fmt::Display for EvidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvidenceLevel::L0 => "L0",
            EvidenceLevel::L1 => "L1",
            EvidenceLevel::L2 => "L2",
            EvidenceLevel::L3 => "L3",
        };
        f.write_str(s)
    }
}

impl FromStr for EvidenceLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L0" | "0" => Ok(EvidenceLevel::L0),
            "L1" | "1" => Ok(EvidenceLevel::L1),
            "L2" | "2" => Ok(EvidenceLevel::L2),
            "L3" | "3" => Ok(EvidenceLevel::L3),
            other => Err(Error::InvalidArgument(format!(
                "unknown evidence level `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub data_type: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub description: Option<String>,
    pub fields: Vec<FieldEntry>,
}

/// Canonical universe of schema items for one database.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub database: String,
    pub tables: Vec<TableEntry>,
    item_index: BTreeMap<String, SchemaItemId>,
}

impl SchemaCatalog {
    pub fn new(database: String, tables: Vec<TableEntry>) -> Result<Self> {
        let mut item_index = BTreeMap::new();
        for t in &tables {
            let tid = SchemaItemId::table(&database, &t.name);
            if item_index
                .insert(tid.canonical.clone(), tid.clone())
                .is_some()
            {
                return Err(Error::Integrity(format!(
                    "duplicate table name `{}` (case-insensitive) in database `{}`",
                    t.name, database
                )));
            }
            for f in &t.fields {
                let fid = SchemaItemId::field(&database, &t.name, &f.name);
                if item_index
                    .insert(fid.canonical.clone(), fid.clone())
                    .is_some()
                {
                    return Err(Error::Integrity(format!(
                        "duplicate field name `{}` (case-insensitive) in table `{}`",
                        f.name, t.name
                    )));
                }
            }
        }
        Ok(Self {
            database,
            tables,
            item_index,
        })
    }

    pub fn get(&self, canonical: &str) -> Option<&SchemaItemId> {
        self.item_index.get(&canonical.to_lowercase())
    }

    pub fn contains(&self, id: &SchemaItemId) -> bool {
        self.item_index.contains_key(&id.canonical)
    }

    pub fn item_count(&self) -> usize {
        self.item_index.len()
    }

    /// Every item in the catalog, tables and fields, in canonical order.
    pub fn all_items(&self) -> impl Iterator<Item = &SchemaItemId> {
        self.item_index.values()
    }

    pub fn table_ids(&self) -> Vec<SchemaItemId> {
        self.tables
            .iter()
            .map(|t| SchemaItemId::table(&self.database, &t.name))
            .collect()
    }

    pub fn field_ids(&self) -> Vec<SchemaItemId> {
        self.tables
            .iter()
            .flat_map(|t| {
                t.fields
                    .iter()
                    .map(|f| SchemaItemId::field(&self.database, &t.name, &f.name))
            })
            .collect()
    }

    pub fn table_entry(&self, table: &str) -> Option<&TableEntry> {
        let lc = table.to_lowercase();
        self.tables.iter().find(|t| t.name.to_lowercase() == lc)
    }

    pub fn field_entry(&self, id: &SchemaItemId) -> Option<&FieldEntry> {
        let fname = id.field.as_ref()?.to_lowercase();
        self.table_entry(&id.table)?
            .fields
            .iter()
            .find(|f| f.name.to_lowercase() == fname)
    }

    pub fn fields_of(&self, table_id: &SchemaItemId) -> Vec<SchemaItemId> {
        match self.table_entry(&table_id.table) {
            Some(t) => t
                .fields
                .iter()
                .map(|f| SchemaItemId::field(&self.database, &t.name, &f.name))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Resolve a raw table name ("t", "db.t", any case) to a table id.
    pub fn resolve_table(&self, raw: &str) -> Option<SchemaItemId> {
        let lc = raw.trim().to_lowercase();
        let name = lc.strip_prefix(&format!("{}.", self.database.to_lowercase()))
            .unwrap_or(&lc);
        self.tables
            .iter()
            .find(|t| t.name.to_lowercase() == name)
            .map(|t| SchemaItemId::table(&self.database, &t.name))
    }

    /// Resolve a raw field name within one table (any case).
    pub fn resolve_field(&self, table_id: &SchemaItemId, raw: &str) -> Option<SchemaItemId> {
        let lc = raw.trim().to_lowercase();
        let t = self.table_entry(&table_id.table)?;
        t.fields
            .iter()
            .find(|f| f.name.to_lowercase() == lc)
            .map(|f| SchemaItemId::field(&self.database, &t.name, &f.name))
    }
}

// ---------------------------------------------------------------------------
// Schema documents

#[derive(Debug, Deserialize)]
struct CatalogDoc {
    database: String,
    #[serde(default)]
    tables: Vec<TableDoc>,
}

#[derive(Debug, Deserialize)]
struct TableDoc {
    name: String,
    description: Option<String>,
    #[serde(default)]
    columns: Vec<ColumnDoc>,
}

#[derive(Debug, Deserialize)]
struct ColumnDoc {
    name: String,
    #[serde(rename = "type", default = "default_type")]
    data_type: String,
    description: Option<String>,
}

fn default_type() -> String {
    "TEXT".to_string()
}

/// Parse the house schema-document format (TOML).
pub fn load_catalog_str(source: &str) -> Result<SchemaCatalog> {
    let doc: CatalogDoc =
        toml::from_str(source).map_err(|e| Error::Parse(format!("schema document: {e}")))?;
    let tables = doc
        .tables
        .into_iter()
        .map(|t| TableEntry {
            name: t.name,
            description: t.description,
            fields: t
                .columns
                .into_iter()
                .map(|c| FieldEntry {
                    name: c.name,
                    data_type: c.data_type,
                    description: c.description,
                })
                .collect(),
        })
        .collect();
    SchemaCatalog::new(doc.database, tables)
}

pub fn load_catalog(path: &Path) -> Result<SchemaCatalog> {
    let text = std::fs::read_to_string(path)?;
    load_catalog_str(&text)
}

#[derive(Debug, Deserialize)]
struct BirdDb {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Vec<(i64, String)>,
    #[serde(default)]
    column_types: Vec<String>,
}

/// Import BIRD-style table/column metadata (the `tables.json` layout: one
/// entry per database with parallel original/friendly name arrays).
pub fn load_bird_catalogs_str(json: &str) -> Result<Vec<SchemaCatalog>> {
    let dbs: Vec<BirdDb> =
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("BIRD tables.json: {e}")))?;
    let mut out = Vec::new();
    for db in dbs {
        let mut tables: Vec<TableEntry> = db
            .table_names_original
            .iter()
            .enumerate()
            .map(|(i, name)| TableEntry {
                name: name.clone(),
                description: db
                    .table_names
                    .get(i)
                    .filter(|d| d.to_lowercase() != name.to_lowercase())
                    .cloned(),
                fields: Vec::new(),
            })
            .collect();
        for (ci, (ti, col)) in db.column_names_original.iter().enumerate() {
            if *ti < 0 {
                continue; // the synthetic leading "*" column
            }
            let ti = *ti as usize;
            let table = tables.get_mut(ti).ok_or_else(|| {
                Error::Parse(format!(
                    "BIRD tables.json: column `{col}` references table index {ti} out of range"
                ))
            })?;
            let friendly = db
                .column_names
                .get(ci)
                .map(|(_, n)| n.clone())
                .filter(|d| d.to_lowercase() != col.to_lowercase());
            table.fields.push(FieldEntry {
                name: col.clone(),
                data_type: db
                    .column_types
                    .get(ci)
                    .cloned()
                    .unwrap_or_else(default_type),
                description: friendly,
            });
        }
        out.push(SchemaCatalog::new(db.db_id, tables)?);
    }
    Ok(out)
}

pub fn load_bird_catalogs(path: &Path) -> Result<Vec<SchemaCatalog>> {
    let text = std::fs::read_to_string(path)?;
    load_bird_catalogs_str(&text)
}

// ---------------------------------------------------------------------------
// Profiles

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    Identifier,
    Temporal,
    Categorical,
    Numeric,
    Text,
}

impl fmt::Display for SemanticCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SemanticCategory::Identifier => "identifier",
            SemanticCategory::Temporal => "temporal",
            SemanticCategory::Categorical => "categorical",
            SemanticCategory::Numeric => "numeric",
            SemanticCategory::Text => "text",
        };
        f.write_str(s)
    }
}

impl SemanticCategory {
    /// Deterministic type+name heuristic for the coarse category tag.
    pub fn infer(field_name: &str, data_type: &str) -> Self {
        let n = field_name.to_lowercase();
        let t = data_type.to_lowercase();
        if n == "id" || n == "uuid" || n.ends_with("_id") || n.ends_with("_uuid") {
            return SemanticCategory::Identifier;
        }
        if t.contains("date")
            || t.contains("time")
            || n == "date"
            || n == "year"
            || n.ends_with("_date")
            || n.ends_with("_time")
            || n.ends_with("_at")
        {
            return SemanticCategory::Temporal;
        }
        if t.contains("bool")
            || matches!(n.as_str(), "status" | "type" | "category" | "flag" | "gender" | "country" | "state")
            || n.ends_with("_status")
            || n.ends_with("_type")
            || n.ends_with("_category")
            || n.ends_with("_flag")
        {
            return SemanticCategory::Categorical;
        }
        if t.contains("int")
            || t.contains("real")
            || t.contains("float")
            || t.contains("double")
            || t.contains("decimal")
            || t.contains("numeric")
            || t.contains("number")
        {
            return SemanticCategory::Numeric;
        }
        SemanticCategory::Text
    }
}

pub const MAX_REPRESENTATIVE_VALUES: usize = 8;
pub const MAX_HISTOGRAM_BINS: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub value: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsBlock {
    pub min: Option<String>,
    pub max: Option<String>,
    pub distinct_count: u64,
    pub null_fraction: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldProfile {
    pub id: SchemaItemId,
    pub data_type: String,
    pub semantic_category: SemanticCategory,
    pub description: Option<String>,
    pub representative_values: Vec<String>,
    pub value_summary: Option<String>,
    pub stats: Option<StatsBlock>,
    /// True when the table has no backing data file; such profiles stop at L1.
    pub no_data: bool,
    pub level: EvidenceLevel,
}

/// Immutable store of field profiles, built once up to a target level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileStore {
    pub target: EvidenceLevel,
    pub sample_limit: usize,
    profiles: BTreeMap<String, FieldProfile>,
}

impl ProfileStore {
    pub fn get(&self, id: &SchemaItemId) -> Option<&FieldProfile> {
        self.profiles.get(&id.canonical)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &FieldProfile> {
        self.profiles.values()
    }
}

fn sampled_column(
    adapter: &dyn DbAdapter,
    table: &str,
    field: &str,
    sample_limit: usize,
) -> Result<Option<Vec<Option<String>>>> {
    match adapter.list_rows(table, sample_limit) {
        Ok(rows) => {
            let lc = field.to_lowercase();
            let idx = rows.columns.iter().position(|c| c.to_lowercase() == lc);
            Ok(Some(match idx {
                Some(i) => rows
                    .rows
                    .iter()
                    .map(|r| r.get(i).cloned().unwrap_or(None))
                    .collect(),
                None => Vec::new(),
            }))
        }
        Err(Error::NotFound(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn is_numeric_values(values: &[&String]) -> bool {
    !values.is_empty() && values.iter().all(|v| v.parse::<f64>().is_ok())
}

fn compute_stats(column: &[Option<String>]) -> StatsBlock {
    let total = column.len() as u64;
    let non_null: Vec<&String> = column.iter().filter_map(|v| v.as_ref()).collect();
    let nulls = total - non_null.len() as u64;
    let null_fraction = if total == 0 {
        0.0
    } else {
        nulls as f64 / total as f64
    };

    let mut counts: BTreeMap<&String, u64> = BTreeMap::new();
    for v in &non_null {
        *counts.entry(v).or_insert(0) += 1;
    }
    let distinct_count = counts.len() as u64;

    let numeric = is_numeric_values(&non_null);
    let (min, max) = if non_null.is_empty() {
        (None, None)
    } else if numeric {
        let mut lo = &non_null[0];
        let mut hi = &non_null[0];
        for v in &non_null {
            if v.parse::<f64>().unwrap() < lo.parse::<f64>().unwrap() {
                lo = v;
            }
            if v.parse::<f64>().unwrap() > hi.parse::<f64>().unwrap() {
                hi = v;
            }
        }
        (Some((*lo).clone()), Some((*hi).clone()))
    } else {
        (
            non_null.iter().min().map(|v| (*v).clone()),
            non_null.iter().max().map(|v| (*v).clone()),
        )
    };

    let histogram = if numeric && counts.len() > MAX_HISTOGRAM_BINS {
        // equal-width numeric bins
        let lo: f64 = min.as_ref().unwrap().parse().unwrap();
        let hi: f64 = max.as_ref().unwrap().parse().unwrap();
        let width = (hi - lo) / MAX_HISTOGRAM_BINS as f64;
        let mut bins = [0u64; MAX_HISTOGRAM_BINS];
        for v in &non_null {
            let x: f64 = v.parse().unwrap();
            let mut b = if width > 0.0 {
                ((x - lo) / width) as usize
            } else {
                0
            };
            if b >= MAX_HISTOGRAM_BINS {
                b = MAX_HISTOGRAM_BINS - 1;
            }
            bins[b] += 1;
        }
        bins.iter()
            .enumerate()
            .map(|(i, c)| HistogramBin {
                value: format!("[{:.4},{:.4})", lo + width * i as f64, lo + width * (i + 1) as f64),
                count: *c,
            })
            .collect()
    } else {
        let mut pairs: Vec<(&String, u64)> = counts.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        pairs
            .into_iter()
            .take(MAX_HISTOGRAM_BINS)
            .map(|(v, c)| HistogramBin {
                value: v.clone(),
                count: c,
            })
            .collect()
    };

    StatsBlock {
        min,
        max,
        distinct_count,
        null_fraction,
        histogram,
    }
}

fn l2_content(column: &[Option<String>]) -> (Vec<String>, String) {
    let non_null: Vec<&String> = column.iter().filter_map(|v| v.as_ref()).collect();
    let mut seen = Vec::new();
    for v in &non_null {
        if !seen.contains(*v) {
            seen.push((*v).clone());
        }
        if seen.len() == MAX_REPRESENTATIVE_VALUES {
            break;
        }
    }
    let mut counts: BTreeMap<&String, u64> = BTreeMap::new();
    for v in &non_null {
        *counts.entry(v).or_insert(0) += 1;
    }
    let mut pairs: Vec<(&String, u64)> = counts.iter().map(|(v, c)| (*v, *c)).collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let top: Vec<String> = pairs.iter().take(3).map(|(v, _)| (*v).clone()).collect();
    let summary = if top.is_empty() {
        format!("{} distinct", counts.len())
    } else {
        format!("{} distinct; top values: {}", counts.len(), top.join(", "))
    };
    (seen, summary)
}

/// Build field profiles for every field in the catalog, up to `target`.
pub fn build_profiles(
    catalog: &SchemaCatalog,
    adapter: &dyn DbAdapter,
    target: EvidenceLevel,
    sample_limit: usize,
) -> Result<ProfileStore> {
    if sample_limit == 0 {
        return Err(Error::InvalidArgument("sample_limit must be >= 1".into()));
    }
    let mut profiles = BTreeMap::new();
    for t in &catalog.tables {
        for f in &t.fields {
            let id = SchemaItemId::field(&catalog.database, &t.name, &f.name);
            let mut profile = FieldProfile {
                id: id.clone(),
                data_type: f.data_type.clone(),
                semantic_category: SemanticCategory::infer(&f.name, &f.data_type),
                description: f.description.clone(),
                representative_values: Vec::new(),
                value_summary: None,
                stats: None,
                no_data: false,
                level: EvidenceLevel::L1,
            };
            if target >= EvidenceLevel::L2 {
                match sampled_column(adapter, &t.name, &f.name, sample_limit)? {
                    Some(column) => {
                        let (values, summary) = l2_content(&column);
                        profile.representative_values = values;
                        profile.value_summary = Some(summary);
                        profile.level = EvidenceLevel::L2;
                        if target >= EvidenceLevel::L3 {
                            profile.stats = Some(compute_stats(&column));
                            profile.level = EvidenceLevel::L3;
                        }
                    }
                    None => {
                        profile.no_data = true;
                    }
                }
            }
            profiles.insert(id.canonical.clone(), profile);
        }
    }
    Ok(ProfileStore {
        target,
        sample_limit,
        profiles,
    })
}

/// Compute an on-demand L3 stats block for one field. Returns None when the
/// table has no backing data.
pub fn build_field_stats(
    adapter: &dyn DbAdapter,
    id: &SchemaItemId,
    sample_limit: usize,
) -> Result<Option<StatsBlock>> {
    let field = id
        .field
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("`{id}` is not a field")))?;
    Ok(sampled_column(adapter, &id.table, field, sample_limit)?
        .map(|column| compute_stats(&column)))
}

// ---------------------------------------------------------------------------
// Rendering

fn render_stats_line(stats: &StatsBlock) -> String {
    let hist = stats
        .histogram
        .iter()
        .map(|b| format!("{}:{}", b.value, b.count))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "  stats: min={} max={} distinct={} null_fraction={:.3} histogram=[{}]",
        stats.min.as_deref().unwrap_or("-"),
        stats.max.as_deref().unwrap_or("-"),
        stats.distinct_count,
        stats.null_fraction,
        hist
    )
}

fn render_field(
    id: &SchemaItemId,
    level: EvidenceLevel,
    profile: Option<&FieldProfile>,
) -> String {
    if level == EvidenceLevel::L0 {
        return id.short_name();
    }
    let profile = match profile {
        Some(p) => p,
        None => return format!("{} (evidence clamped to L0)", id.short_name()),
    };
    let effective = level.min(profile.level);
    let mut out = format!(
        "{} : {} [{}]",
        id.short_name(),
        profile.data_type,
        profile.semantic_category
    );
    if effective >= EvidenceLevel::L2 {
        if let Some(d) = &profile.description {
            out.push_str(&format!("\n  description: {d}"));
        }
        if !profile.representative_values.is_empty() {
            out.push_str(&format!(
                "\n  examples: {}",
                profile.representative_values.join(" | ")
            ));
        }
        if let Some(s) = &profile.value_summary {
            out.push_str(&format!("\n  summary: {s}"));
        }
    }
    if effective >= EvidenceLevel::L3 {
        if let Some(stats) = &profile.stats {
            out.push('\n');
            out.push_str(&render_stats_line(stats));
        }
    }
    if profile.no_data && level >= EvidenceLevel::L2 {
        out.push_str("\n  values: no data");
    }
    if effective < level && !profile.no_data {
        out.push_str(&format!("\n  (evidence clamped to {effective})"));
    }
    out
}

fn render_table(catalog: &SchemaCatalog, entry: &TableEntry, level: EvidenceLevel) -> String {
    let _ = catalog;
    let names: Vec<&str> = entry.fields.iter().map(|f| f.name.as_str()).collect();
    if level == EvidenceLevel::L0 {
        return format!("{}({})", entry.name, names.join(", "));
    }
    let mut out = entry.name.clone();
    if let Some(d) = &entry.description {
        out.push_str(&format!(" -- {d}"));
    }
    out.push_str(&format!("\n  fields: {}", names.join(", ")));
    out
}

/// Render deterministic evidence text for one item at the requested level.
/// Requests above what the store was built to are clamped, and the clamp is
/// marked in the output.
pub fn render_evidence(
    catalog: &SchemaCatalog,
    store: &ProfileStore,
    item: &SchemaItemId,
    level: EvidenceLevel,
) -> Result<String> {
    if !catalog.contains(item) {
        return Err(Error::NotFound(format!("schema item `{item}`")));
    }
    match item.kind {
        ItemKind::Table => {
            let entry = catalog
                .table_entry(&item.table)
                .ok_or_else(|| Error::NotFound(format!("table `{}`", item.table)))?;
            Ok(render_table(catalog, entry, level))
        }
        ItemKind::Field => Ok(render_field(item, level, store.get(item))),
    }
}

/// The compact schema view used for table selection: L0 rendering of every
/// table plus its description when present, one table per line.
pub fn compact_schema_view(catalog: &SchemaCatalog) -> String {
    catalog
        .tables
        .iter()
        .map(|t| {
            let names: Vec<&str> = t.fields.iter().map(|f| f.name.as_str()).collect();
            match &t.description {
                Some(d) => format!("{}({}) -- {}", t.name, names.join(", "), d),
                None => format!("{}({})", t.name, names.join(", ")),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
