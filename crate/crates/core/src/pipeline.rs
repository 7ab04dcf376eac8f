//! Run orchestration: configuration, dataset ingestion, the per-instance
//! link pipeline, artifact persistence, and evaluation over run directories.
//!
//! A run directory holds `config.snapshot`, one artifact per instance under
//! `artifacts/`, and (after eval) `report.summary` + `report.per_instance`.
//! Artifacts are self-contained: metrics are recomputable from artifacts and
//! gold labels alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    build_profiles, compact_schema_view, load_bird_catalogs, load_catalog, EvidenceLevel,
    ProfileStore, SchemaCatalog,
};
use crate::consolidate::{bucketize, credibilities, tally, BucketedSets, Credibility, VoteTally};
use crate::dbadapter::{DbAdapter, FileAdapter, MemoryAdapter};
use crate::error::{Error, Result};
use crate::evalmetrics::{aggregate, score_sets, Granularity, InstanceScore, MetricReport};
use crate::grounding::{ground_hypothesis, SelectionSet};
use crate::hypothesis::{check_diversity, elicit_hypotheses, HypothesisSet};
use crate::llmio::{usage_total, Backend, BackendConfig, HttpBackend, ScriptedBackend, Usage};
use crate::refine::{run_refinement, RefinementState, TraceEntry};
use crate::sqlgold::GoldSchema;
use crate::util::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMode {
    #[default]
    Adaptive,
    StaticL0,
    StaticL1,
    StaticL2,
    StaticL3,
}

impl EvidenceMode {
    /// Rendering level for uncertain items in the refinement prompt. The
    /// adaptive policy shows L2 by default and upgrades to L3 on demand via
    /// the get_field_stats tool; a static mode pins the level everywhere.
    pub fn refinement_level(self) -> EvidenceLevel {
        match self {
            EvidenceMode::Adaptive | EvidenceMode::StaticL2 => EvidenceLevel::L2,
            EvidenceMode::StaticL0 => EvidenceLevel::L0,
            EvidenceMode::StaticL1 => EvidenceLevel::L1,
            EvidenceMode::StaticL3 => EvidenceLevel::L3,
        }
    }

    /// Profile depth to prebuild for this mode.
    pub fn profile_target(self) -> EvidenceLevel {
        match self {
            EvidenceMode::Adaptive | EvidenceMode::StaticL2 => EvidenceLevel::L2,
            EvidenceMode::StaticL0 | EvidenceMode::StaticL1 => EvidenceLevel::L1,
            EvidenceMode::StaticL3 => EvidenceLevel::L3,
        }
    }
}

impl std::str::FromStr for EvidenceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "adaptive" => Ok(EvidenceMode::Adaptive),
            "static_l0" | "l0" => Ok(EvidenceMode::StaticL0),
            "static_l1" | "l1" => Ok(EvidenceMode::StaticL1),
            "static_l2" | "l2" => Ok(EvidenceMode::StaticL2),
            "static_l3" | "l3" => Ok(EvidenceMode::StaticL3),
            other => Err(Error::InvalidArgument(format!(
                "unknown evidence mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: BackendKind,
    /// Fixture file for the scripted backend.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(flatten)]
    pub config: BackendConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathsSection {
    /// A catalog file, a directory of catalog files, or a BIRD-style
    /// tables.json.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// Directory of per-database data: `<data>/<database>/<table>.csv`.
    #[serde(default)]
    pub data: Option<PathBuf>,
}

fn default_k() -> u32 {
    4
}
fn default_tau_req() -> f64 {
    0.85
}
fn default_max_turns() -> u32 {
    8
}
fn default_true() -> bool {
    true
}
fn default_sample_limit() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_tau_req")]
    pub tau_req: f64,
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    #[serde(default)]
    pub evidence_mode: EvidenceMode,
    #[serde(default = "default_true")]
    pub multi_hypothesis: bool,
    #[serde(default = "default_true")]
    pub refinement: bool,
    /// Instance-level parallelism; 0 means the number of available cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_sample_limit")]
    pub sample_limit: usize,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            tau_req: default_tau_req(),
            max_turns: default_max_turns(),
            evidence_mode: EvidenceMode::default(),
            multi_hypothesis: true,
            refinement: true,
            workers: 0,
            sample_limit: default_sample_limit(),
            backend: BackendSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if !(self.tau_req > 0.5 && self.tau_req < 1.0) {
            return Err(Error::InvalidArgument("tau_req must be in (0.5, 1)".into()));
        }
        if self.max_turns < 1 {
            return Err(Error::InvalidArgument("max_turns must be >= 1".into()));
        }
        if self.sample_limit < 1 {
            return Err(Error::InvalidArgument("sample_limit must be >= 1".into()));
        }
        self.backend.config.validate()
    }

    /// Effective hypothesis budget: the no-multi ablation forces K = 1.
    pub fn effective_k(&self) -> u32 {
        if self.multi_hypothesis {
            self.k
        } else {
            1
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

// ---------------------------------------------------------------------------
// Dataset

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInstance {
    pub instance_id: String,
    pub question: String,
    pub database: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_knowledge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sql: Option<String>,
}

/// Parse a line-delimited dataset; blank lines are skipped, duplicate ids are
/// an integrity error.
pub fn load_dataset_str(text: &str) -> Result<Vec<DatasetInstance>> {
    let mut out: Vec<DatasetInstance> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: DatasetInstance = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("dataset line {}: {e}", lineno + 1)))?;
        if !seen.insert(inst.instance_id.clone()) {
            return Err(Error::Integrity(format!(
                "duplicate instance_id `{}`",
                inst.instance_id
            )));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetInstance>> {
    load_dataset_str(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Artifacts

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema_version: u32,
    pub instance_id: String,
    pub database: String,
    pub question: String,
    pub hypotheses: HypothesisSet,
    pub selections: Vec<SelectionSet>,
    pub tallies: Vec<VoteTally>,
    pub credibilities: Vec<Credibility>,
    pub buckets: BucketedSets,
    pub trace: Vec<TraceEntry>,
    pub linked: crate::refine::LinkedSchema,
    /// Token usage per stage: elicit, ground, refine.
    pub usage: BTreeMap<String, Usage>,
    pub total_usage: Usage,
    pub evidence_bytes: u64,
    pub flags: Vec<String>,
}

impl RunArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

// ---------------------------------------------------------------------------
// Per-database context

pub struct DbContext {
    pub catalog: SchemaCatalog,
    pub store: ProfileStore,
    pub adapter: Box<dyn DbAdapter>,
}

/// Load every catalog reachable from the config paths, keyed by database
/// name, with profiles built to the mode's target level.
pub fn load_contexts(config: &RunConfig) -> Result<BTreeMap<String, DbContext>> {
    let catalog_path = config
        .paths
        .catalog
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("paths.catalog is not set".into()))?;
    let mut catalogs: Vec<SchemaCatalog> = Vec::new();
    if catalog_path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(catalog_path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        entries.sort();
        for p in entries {
            catalogs.push(load_catalog(&p)?);
        }
    } else if catalog_path.extension().is_some_and(|x| x == "json") {
        catalogs.extend(load_bird_catalogs(catalog_path)?);
    } else {
        catalogs.push(load_catalog(catalog_path)?);
    }

    let mut contexts = BTreeMap::new();
    for catalog in catalogs {
        let adapter: Box<dyn DbAdapter> = match &config.paths.data {
            Some(dir) if dir.join(&catalog.database).is_dir() => {
                Box::new(FileAdapter::open(&dir.join(&catalog.database))?)
            }
            _ => Box::new(MemoryAdapter::new()),
        };
        let store = build_profiles(
            &catalog,
            adapter.as_ref(),
            config.evidence_mode.profile_target(),
            config.sample_limit,
        )?;
        let database = catalog.database.clone();
        contexts.insert(
            database,
            DbContext {
                catalog,
                store,
                adapter,
            },
        );
    }
    Ok(contexts)
}

pub fn build_backend(config: &RunConfig) -> Result<Arc<dyn Backend>> {
    match config.backend.kind {
        BackendKind::Scripted => {
            let path = config.backend.fixture.as_ref().ok_or_else(|| {
                Error::InvalidArgument("scripted backend needs backend.fixture".into())
            })?;
            Ok(Arc::new(ScriptedBackend::load(path)?))
        }
        BackendKind::Http => Ok(Arc::new(HttpBackend::new(config.backend.config.clone())?)),
    }
}

// ---------------------------------------------------------------------------
// Link pipeline

/// Run the full link pipeline for one instance: elicit, ground each
/// hypothesis, consolidate, refine (or pend everything when refinement is
/// off).
pub fn link_instance(
    config: &RunConfig,
    instance: &DatasetInstance,
    ctx: &DbContext,
    backend: &dyn Backend,
) -> Result<RunArtifact> {
    let question = match &instance.external_knowledge {
        Some(k) if !k.trim().is_empty() => {
            format!("{}\n\nExternal knowledge: {}", instance.question, k)
        }
        None | Some(_) => instance.question.clone(),
    };
    let schema_view = compact_schema_view(&ctx.catalog);
    let mut usage: BTreeMap<String, Usage> = BTreeMap::new();
    let mut flags: Vec<String> = Vec::new();

    let (hypotheses, elicit_usages) =
        elicit_hypotheses(&question, &schema_view, config.effective_k(), backend)?;
    usage.insert("elicit".into(), usage_total(&elicit_usages));
    if hypotheses.fallback {
        flags.push("hypothesis fallback".into());
    }
    if hypotheses.truncated {
        flags.push("hypotheses truncated to K".into());
    }
    flags.extend(check_diversity(&hypotheses));

    let mut selections: Vec<SelectionSet> = Vec::new();
    let mut ground_usages: Vec<Usage> = Vec::new();
    for h in &hypotheses.hypotheses {
        let (selection, us) = ground_hypothesis(
            &question,
            h,
            &ctx.catalog,
            &ctx.store,
            EvidenceLevel::L1,
            backend,
        )?;
        flags.extend(
            selection
                .flags
                .iter()
                .map(|f| format!("hypothesis {}: {f}", h.index)),
        );
        selections.push(selection);
        ground_usages.extend(us);
    }
    usage.insert("ground".into(), usage_total(&ground_usages));

    let tallies = tally(&selections, &ctx.catalog);
    let creds = credibilities(&tallies)?;
    let buckets = bucketize(&tallies, config.tau_req, &ctx.catalog)?;

    let (linked, trace, refine_usage, evidence_bytes) = if config.refinement {
        let outcome = run_refinement(
            &buckets,
            &question,
            &ctx.catalog,
            &ctx.store,
            ctx.adapter.as_ref(),
            backend,
            config.max_turns,
            config.evidence_mode.refinement_level(),
        )?;
        flags.extend(outcome.flags);
        (
            outcome.linked,
            outcome.state.trace,
            usage_total(&outcome.usages),
            outcome.state.evidence_bytes,
        )
    } else {
        // Ŝ = required ∪ uncertain: every uncertain item stays pending
        let state = RefinementState::new(&buckets, 1);
        (state.finalize(), Vec::new(), Usage::default(), 0)
    };
    usage.insert("refine".into(), refine_usage);

    let total_usage = usage_total(&usage.values().copied().collect::<Vec<_>>());
    Ok(RunArtifact {
        schema_version: SCHEMA_VERSION,
        instance_id: instance.instance_id.clone(),
        database: instance.database.clone(),
        question: instance.question.clone(),
        hypotheses,
        selections,
        tallies: tallies.into_values().collect(),
        credibilities: creds,
        buckets,
        trace,
        linked,
        usage,
        total_usage,
        evidence_bytes,
        flags,
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub artifacts: usize,
    pub failures: Vec<(String, String)>,
}

/// Run the link pipeline over a dataset, writing one artifact per instance
/// into `out_dir/artifacts/`. Per-instance failures are isolated.
pub fn run_link(
    config: &RunConfig,
    dataset: &[DatasetInstance],
    out_dir: &Path,
) -> Result<RunSummary> {
    config.validate()?;
    let contexts = load_contexts(config)?;
    let backend = build_backend(config)?;

    fs::create_dir_all(out_dir.join("artifacts"))?;
    let snapshot = toml::to_string_pretty(config)
        .map_err(|e| Error::Parse(format!("config snapshot: {e}")))?;
    write_atomic(
        &out_dir.join("config.snapshot"),
        format!("schema_version = {SCHEMA_VERSION}\n\n{snapshot}").as_bytes(),
    )?;

    let workers = if config.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        config.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    use rayon::prelude::*;
    let results: Vec<(String, Result<()>)> = pool.install(|| {
        dataset
            .par_iter()
            .map(|inst| {
                let r = (|| -> Result<()> {
                    let ctx = contexts.get(&inst.database).ok_or_else(|| {
                        Error::NotFound(format!("catalog for database `{}`", inst.database))
                    })?;
                    let artifact = link_instance(config, inst, ctx, backend.as_ref())?;
                    let path = out_dir
                        .join("artifacts")
                        .join(format!("{}.json", sanitize_id(&inst.instance_id)));
                    write_atomic(&path, artifact.to_json()?.as_bytes())?;
                    Ok(())
                })();
                (inst.instance_id.clone(), r)
            })
            .collect()
    });

    let mut summary = RunSummary::default();
    for (id, r) in results {
        match r {
            Ok(()) => summary.artifacts += 1,
            Err(e) => summary.failures.push((id, e.to_string())),
        }
    }
    Ok(summary)
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Read every artifact in a run directory, sorted by file name.
pub fn load_artifacts(run_dir: &Path) -> Result<Vec<RunArtifact>> {
    let dir = run_dir.join("artifacts");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut artifacts = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p)?;
        let a: RunArtifact = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
        artifacts.push(a);
    }
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// Gold labels + eval

/// Flat gold label for one instance: canonical ids only, the exchange format
/// between gold-extract and eval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldLabel {
    pub instance_id: String,
    pub tables: std::collections::BTreeSet<String>,
    pub fields: std::collections::BTreeSet<String>,
}

impl From<&GoldSchema> for GoldLabel {
    fn from(g: &GoldSchema) -> Self {
        GoldLabel {
            instance_id: g.instance_id.clone(),
            tables: g.tables.iter().map(|i| i.canonical.clone()).collect(),
            fields: g.fields.iter().map(|i| i.canonical.clone()).collect(),
        }
    }
}

pub fn load_gold_labels_str(text: &str) -> Result<Vec<GoldLabel>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let g: GoldLabel = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("gold line {}: {e}", lineno + 1)))?;
        out.push(g);
    }
    Ok(out)
}

pub fn load_gold_labels(path: &Path) -> Result<Vec<GoldLabel>> {
    load_gold_labels_str(&fs::read_to_string(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub schema_version: u32,
    pub report: MetricReport,
    pub scores: Vec<InstanceScore>,
    /// Artifact instance ids with no gold label; excluded from N.
    pub missing_gold: Vec<String>,
}

/// Score a run directory against gold labels at one granularity, and write
/// `report.summary` + `report.per_instance` into the run directory.
pub fn run_eval(
    run_dir: &Path,
    gold: &[GoldLabel],
    granularity: Granularity,
) -> Result<EvalOutput> {
    let artifacts = load_artifacts(run_dir)?;
    if artifacts.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no artifacts under {}",
            run_dir.display()
        )));
    }
    let gold_by_id: BTreeMap<&str, &GoldLabel> = gold
        .iter()
        .map(|g| (g.instance_id.as_str(), g))
        .collect();

    let mut scores = Vec::new();
    let mut usages = Vec::new();
    let mut missing = Vec::new();
    for a in &artifacts {
        let Some(g) = gold_by_id.get(a.instance_id.as_str()) else {
            missing.push(a.instance_id.clone());
            continue;
        };
        let gold_set = match granularity {
            Granularity::Table => &g.tables,
            Granularity::Field => &g.fields,
        };
        let predicted = crate::evalmetrics::project_items(&a.linked.items, granularity);
        scores.push(score_sets(&a.instance_id, gold_set, &predicted, granularity));
        usages.push(a.total_usage);
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "no artifact has a matching gold label".into(),
        ));
    }
    let report = aggregate(&scores, &usages)?;

    let output = EvalOutput {
        schema_version: SCHEMA_VERSION,
        report,
        scores,
        missing_gold: missing,
    };
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "report": output.report,
        "missing_gold": output.missing_gold,
    });
    write_atomic(
        &run_dir.join("report.summary"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    let mut per_instance = String::new();
    for s in &output.scores {
        per_instance.push_str(&serde_json::to_string(s)?);
        per_instance.push('\n');
    }
    write_atomic(&run_dir.join("report.per_instance"), per_instance.as_bytes())?;
    Ok(output)
}

/// Load the summary report previously written by `run_eval`.
pub fn load_report(run_dir: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(run_dir.join("report.summary"))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let report = v
        .get("report")
        .ok_or_else(|| Error::Parse("report.summary missing `report`".into()))?;
    Ok(serde_json::from_value(report.clone())?)
}

// ---------------------------------------------------------------------------
// Seeded id-prefix stratified sampling

/// Deterministic stratified subset of instance ids: group by the prefix
/// before the first `_`, `-`, or `.`, then take a proportional seeded sample
/// from each stratum. Exact reproduction of an external subset additionally
/// requires the original id universe.
pub fn stratified_sample(ids: &[String], n: usize, seed: u64) -> Vec<String> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if n >= ids.len() {
        let mut all = ids.to_vec();
        all.sort();
        return all;
    }
    let mut strata: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in ids {
        let prefix = id
            .split(['_', '-', '.'])
            .next()
            .unwrap_or(id)
            .to_string();
        strata.entry(prefix).or_default().push(id.clone());
    }
    let total = ids.len() as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = Vec::new();
    for (_, mut members) in strata {
        members.sort();
        let take = ((members.len() as f64 / total) * n as f64).round() as usize;
        let take = take.min(members.len());
        members.shuffle(&mut rng);
        picked.extend(members.into_iter().take(take));
    }
    // rounding drift: top up or trim deterministically
    let mut remaining: Vec<String> = ids
        .iter()
        .filter(|i| !picked.contains(i))
        .cloned()
        .collect();
    remaining.sort();
    remaining.shuffle(&mut rng);
    while picked.len() < n {
        match remaining.pop() {
            Some(id) => picked.push(id),
            None => break,
        }
    }
    picked.truncate(n);
    picked.sort();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_match_table() {
        let c = RunConfig::default();
        assert_eq!(c.k, 4);
        assert_eq!(c.tau_req, 0.85);
        assert_eq!(c.max_turns, 8);
        assert_eq!(c.evidence_mode, EvidenceMode::Adaptive);
        assert!(c.multi_hypothesis && c.refinement);
        assert_eq!(c.backend.config.temperature, 1.0);
        assert_eq!(c.backend.config.top_p, 0.95);
        assert_eq!(c.backend.config.top_k, 40);
        assert_eq!(c.backend.config.max_tokens, 16384);
    }

    #[test]
    fn config_parses_with_partial_fields() {
        let c: RunConfig = toml::from_str(
            r#"
k = 2
[backend]
kind = "scripted"
fixture = "f.json"
"#,
        )
        .unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.tau_req, 0.85);
        assert_eq!(c.backend.kind, BackendKind::Scripted);
    }

    #[test]
    fn effective_k_honors_ablation() {
        let mut c = RunConfig::default();
        assert_eq!(c.effective_k(), 4);
        c.multi_hypothesis = false;
        assert_eq!(c.effective_k(), 1);
    }

    #[test]
    fn dataset_round_trip_and_duplicates() {
        let text = r#"{"instance_id":"a","question":"q1","database":"db"}
{"instance_id":"b","question":"q2","database":"db","gold_sql":"SELECT 1"}
"#;
        let d = load_dataset_str(text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].gold_sql.as_deref(), Some("SELECT 1"));
        let dup = format!("{0}{0}", r#"{"instance_id":"a","question":"q","database":"db"}
"#);
        assert!(matches!(load_dataset_str(&dup), Err(Error::Integrity(_))));
    }

    #[test]
    fn evidence_mode_levels() {
        assert_eq!(EvidenceMode::Adaptive.refinement_level(), EvidenceLevel::L2);
        assert_eq!(EvidenceMode::StaticL3.refinement_level(), EvidenceLevel::L3);
        assert_eq!(EvidenceMode::StaticL0.profile_target(), EvidenceLevel::L1);
        assert_eq!("static_l3".parse::<EvidenceMode>().unwrap(), EvidenceMode::StaticL3);
    }

    #[test]
    fn stratified_sample_is_deterministic_and_proportional() {
        let ids: Vec<String> = (0..40)
            .map(|i| format!("bird_{i}"))
            .chain((0..40).map(|i| format!("snow_{i}")))
            .collect();
        let s1 = stratified_sample(&ids, 20, 42);
        let s2 = stratified_sample(&ids, 20, 42);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 20);
        let bird = s1.iter().filter(|i| i.starts_with("bird")).count();
        assert_eq!(bird, 10);
        let s3 = stratified_sample(&ids, 20, 7);
        assert_ne!(s1, s3);
    }
}
