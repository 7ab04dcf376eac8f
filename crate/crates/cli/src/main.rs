use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use schemalink_core::catalog::{build_profiles, load_bird_catalogs, load_catalog, EvidenceLevel};
use schemalink_core::dbadapter::{DbAdapter, FileAdapter, MemoryAdapter};
use schemalink_core::evalmetrics::Granularity;
use schemalink_core::pipeline::{
    load_config, load_dataset, load_gold_labels, load_report, run_eval, run_link, EvidenceMode,
    GoldLabel, RunConfig,
};
use schemalink_core::sqlgold::{extract_corpus, CorpusInstance, SqlDialect};
use schemalink_core::SchemaCatalog;

#[derive(Parser)]
#[command(name = "schemalink", version, about = "Uncertainty-aware schema linking for text-to-SQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the link pipeline over a dataset and write a run directory.
    Link {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ablation: single-hypothesis grounding (forces M = 1).
        #[arg(long)]
        no_multi: bool,
        /// Ablation: skip refinement (linked schema = required + uncertain).
        #[arg(long)]
        no_refine: bool,
        /// Ablation: pin the evidence level (L0..L3) instead of adaptive.
        #[arg(long, value_name = "LEVEL")]
        static_evidence: Option<String>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        max_turns: Option<u32>,
        #[arg(long)]
        tau_req: Option<f64>,
    },
    /// Score a run directory against gold labels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "field")]
        granularity: String,
    },
    /// Extract gold tables/fields from reference SQL.
    GoldExtract {
        /// Line-delimited records {instance_id, database, sql}.
        #[arg(long)]
        corpus: PathBuf,
        /// Catalog file, directory of catalog files, or BIRD tables.json.
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value = "ansi")]
        dialect: String,
        /// Output gold-label JSONL path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build field profiles for a catalog and print them.
    Profile {
        #[arg(long)]
        catalog: PathBuf,
        /// Directory of per-table CSV files.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "L2")]
        level: String,
        #[arg(long, default_value_t = 64)]
        sample_limit: usize,
    },
    /// Render a comparison table across evaluated run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load_catalogs(path: &PathBuf) -> anyhow::Result<Vec<SchemaCatalog>> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        entries.sort();
        entries
            .iter()
            .map(|p| load_catalog(p).map_err(Into::into))
            .collect()
    } else if path.extension().is_some_and(|x| x == "json") {
        Ok(load_bird_catalogs(path)?)
    } else {
        Ok(vec![load_catalog(path)?])
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Link {
            config,
            dataset,
            out,
            no_multi,
            no_refine,
            static_evidence,
            k,
            max_turns,
            tau_req,
        } => {
            let mut cfg: RunConfig = load_config(&config).context("loading config")?;
            if no_multi {
                cfg.multi_hypothesis = false;
            }
            if no_refine {
                cfg.refinement = false;
            }
            if let Some(level) = static_evidence {
                cfg.evidence_mode = level.parse::<EvidenceMode>()?;
                if cfg.evidence_mode == EvidenceMode::Adaptive {
                    bail!("--static-evidence expects a level L0..L3");
                }
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(t) = max_turns {
                cfg.max_turns = t;
            }
            if let Some(t) = tau_req {
                cfg.tau_req = t;
            }
            let instances = load_dataset(&dataset).context("loading dataset")?;
            let summary = run_link(&cfg, &instances, &out)?;
            println!(
                "linked {} of {} instances -> {}",
                summary.artifacts,
                instances.len(),
                out.display()
            );
            for (id, err) in &summary.failures {
                eprintln!("instance {id} failed: {err}");
            }
            if summary.artifacts == 0 {
                bail!("no instance produced an artifact");
            }
            Ok(())
        }
        Command::Eval {
            run,
            gold,
            granularity,
        } => {
            let granularity: Granularity = granularity.parse()?;
            let gold = load_gold_labels(&gold).context("loading gold labels")?;
            let output = run_eval(&run, &gold, granularity)?;
            for id in &output.missing_gold {
                eprintln!("warning: no gold label for instance {id}; excluded");
            }
            println!("{}", output.report.summary_line());
            Ok(())
        }
        Command::GoldExtract {
            corpus,
            catalog,
            dialect,
            out,
        } => {
            let dialect: SqlDialect = dialect.parse()?;
            let catalogs: BTreeMap<String, SchemaCatalog> = load_catalogs(&catalog)?
                .into_iter()
                .map(|c| (c.database.clone(), c))
                .collect();
            let text = std::fs::read_to_string(&corpus).context("reading corpus")?;
            let mut instances = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let inst: CorpusInstance = serde_json::from_str(line)
                    .with_context(|| format!("corpus line {}", lineno + 1))?;
                instances.push(inst);
            }
            let report = extract_corpus(&instances, &catalogs, dialect);
            let mut body = String::new();
            for g in &report.gold {
                body.push_str(&serde_json::to_string(&GoldLabel::from(g))?);
                body.push('\n');
            }
            std::fs::write(&out, body)?;
            println!(
                "extracted {} gold labels ({} errors) -> {}",
                report.gold.len(),
                report.errors.len(),
                out.display()
            );
            for e in &report.errors {
                eprintln!("instance {}: {}", e.instance_id, e.error);
            }
            Ok(())
        }
        Command::Profile {
            catalog,
            data,
            level,
            sample_limit,
        } => {
            let level: EvidenceLevel = level.parse()?;
            for cat in load_catalogs(&catalog)? {
                let adapter: Box<dyn DbAdapter> = match &data {
                    Some(dir) if dir.join(&cat.database).is_dir() => {
                        Box::new(FileAdapter::open(&dir.join(&cat.database))?)
                    }
                    Some(dir) if dir.is_dir() => Box::new(FileAdapter::open(dir)?),
                    _ => Box::new(MemoryAdapter::new()),
                };
                let store = build_profiles(&cat, adapter.as_ref(), level, sample_limit)?;
                for profile in store.profiles() {
                    println!("{}", serde_json::to_string(profile)?);
                }
            }
            Ok(())
        }
        Command::Report { runs } => {
            println!(
                "{:<24} {:>6} {:>8} {:>8} {:>8} {:>8} {:>12}",
                "run", "N", "SRR", "NSR", "NSP", "NSF", "AvgTokens"
            );
            for dir in &runs {
                let report = load_report(dir)
                    .with_context(|| format!("reading report for {}", dir.display()))?;
                let name = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().to_string())
                    .unwrap_or_else(|| dir.display().to_string());
                println!(
                    "{:<24} {:>6} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>12.1}",
                    name,
                    report.n,
                    report.srr,
                    report.nsr,
                    report.nsp,
                    report.nsf,
                    report.avg_tokens
                );
            }
            Ok(())
        }
    }
}
