//! Thin command-line front end over the library: code narratives, run
//! the evaluations, render reports, and inspect the call cache. All
//! results go to stdout as JSON (or HTML for reports); progress goes to
//! stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use icbe::backend::{read_cache_file, CachingBackend, CompletionBackend, HttpBackend, HttpBackendConfig, ScriptedBackend};
use icbe::evaluator::{
    build_agreed_wide, build_confusion, compute_recall, qa_stats, AgreedWideConfig,
    DEFAULT_QA_ALERT_THRESHOLD,
};
use icbe::extractor::{run_pipeline, CodedEvent, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook, EventClass};
use icbe::reporter::{render_text_table, render_timeline, IconMap};
use icbe::segmenter::Narrative;
use icbe::store::{self, read_narratives_manifest, GoldMapping};

#[derive(Parser)]
#[command(name = "icbe", about = "Sentence-level event coding for crisis narratives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coding pipeline over a manifest of narratives.
    Code {
        #[command(flatten)]
        config: ConfigArg,
        /// JSON manifest listing crisis_id, title, and body file.
        #[arg(long)]
        narratives: PathBuf,
        /// Directory for events, sentences, and manifest files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Token recall of coded events against consensus gold codings.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        gold: GoldArgs,
        /// Event record files produced by `code`.
        #[arg(long, required = true, num_args = 1..)]
        events: Vec<PathBuf>,
    },
    /// Behavior confusion matrix for one event class.
    Confuse {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        gold: GoldArgs,
        #[arg(long, required = true, num_args = 1..)]
        events: Vec<PathBuf>,
        /// Event class whose behavior vocabulary forms the matrix.
        #[arg(long, value_enum, default_value = "do")]
        class: ClassArg,
        /// Drop gold rows with fewer than this many occurrences.
        #[arg(long, default_value_t = 5)]
        min_count: u64,
    },
    /// QA acceptance rates per ontology node.
    QaStats {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, required = true, num_args = 1..)]
        events: Vec<PathBuf>,
        /// Flag nodes whose acceptance rate falls below this.
        #[arg(long, default_value_t = DEFAULT_QA_ALERT_THRESHOLD)]
        threshold: f64,
    },
    /// Render the event timeline for one coded crisis.
    Report {
        #[command(flatten)]
        config: ConfigArg,
        /// Narrative manifest; the entry matching --crisis is rendered.
        #[arg(long)]
        narratives: PathBuf,
        #[arg(long)]
        crisis: String,
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the plain-text table instead of HTML.
        #[arg(long)]
        text: bool,
    },
    /// Inspect or clear the persistent call cache.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Print entry count and keys of a cache file.
    Show {
        #[arg(long)]
        cache: PathBuf,
    },
    /// Delete a cache file.
    Clear {
        #[arg(long)]
        cache: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration (backend, cache, codebook, tunables).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GoldArgs {
    /// Delimited gold codings file.
    #[arg(long)]
    gold: PathBuf,
    /// Column mapping for the gold file.
    #[arg(long)]
    mapping: PathBuf,
    /// Count trained coders as experts in the consensus filter.
    #[arg(long)]
    pool_trained: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Think,
    Say,
    Do,
}

impl From<ClassArg> for EventClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Think => EventClass::Think,
            ClassArg::Say => EventClass::Say,
            ClassArg::Do => EventClass::Do,
        }
    }
}

/// Run configuration file. All paths are relative to the file itself.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    backend: Option<BackendConfig>,
    /// Call cache file; set to enable caching.
    cache: Option<PathBuf>,
    codebook: Option<PathBuf>,
    aliases: Option<PathBuf>,
    actors: Option<PathBuf>,
    pipeline: PipelineConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BackendConfig {
    Scripted { rules: PathBuf },
    Http(HttpBackendConfig),
}

struct Loaded {
    backend: Box<dyn CompletionBackend>,
    codebook: Codebook,
    aliases: AliasTable,
    actors: ActorDirectory,
    pipeline: PipelineConfig,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_config(arg: &ConfigArg) -> Result<Loaded, String> {
    let (config, base) = match &arg.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            let config: RunConfig = serde_json::from_str(&text)
                .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
            let base = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            (config, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let inner: Box<dyn CompletionBackend> = match &config.backend {
        Some(BackendConfig::Scripted { rules }) => Box::new(
            ScriptedBackend::load(&resolve(&base, rules)).map_err(|e| e.to_string())?,
        ),
        Some(BackendConfig::Http(http)) => Box::new(HttpBackend::new(http.clone())),
        None => Box::new(ScriptedBackend::new(Vec::new())),
    };
    let backend: Box<dyn CompletionBackend> = match &config.cache {
        Some(cache) => Box::new(
            CachingBackend::open(inner, &resolve(&base, cache)).map_err(|e| e.to_string())?,
        ),
        None => inner,
    };
    let codebook = match &config.codebook {
        Some(path) => Codebook::load(&resolve(&base, path)).map_err(|e| e.to_string())?,
        None => Codebook::shipped(),
    };
    let aliases = match &config.aliases {
        Some(path) => AliasTable::load(&resolve(&base, path)).map_err(|e| e.to_string())?,
        None => AliasTable::shipped(),
    };
    let actors = match &config.actors {
        Some(path) => ActorDirectory::load(&resolve(&base, path)).map_err(|e| e.to_string())?,
        None => ActorDirectory::shipped(),
    };
    Ok(Loaded {
        backend,
        codebook,
        aliases,
        actors,
        pipeline: config.pipeline,
    })
}

fn load_events(paths: &[PathBuf]) -> Result<Vec<CodedEvent>, String> {
    let mut events = Vec::new();
    for path in paths {
        events.extend(store::read_events(path).map_err(|e| e.to_string())?);
    }
    Ok(events)
}

fn load_consensus(
    loaded: &Loaded,
    gold: &GoldArgs,
) -> Result<Vec<icbe::evaluator::ConsensusCoding>, String> {
    let mapping = GoldMapping::load(&gold.mapping).map_err(|e| e.to_string())?;
    let (records, dropped) = store::ingest_gold(&gold.gold, &mapping).map_err(|e| e.to_string())?;
    for drop in &dropped {
        eprintln!("gold line {} dropped: {}", drop.line, drop.reason);
    }
    Ok(build_agreed_wide(
        &records,
        &loaded.aliases,
        &AgreedWideConfig {
            pool_trained_with_experts: gold.pool_trained,
        },
    ))
}

fn emit_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializes"));
}

fn run() -> Result<(), String> {
    match Cli::parse().command {
        Command::Code {
            config,
            narratives,
            out_dir,
        } => {
            let loaded = load_config(&config)?;
            let base = narratives
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let entries = read_narratives_manifest(&narratives).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
            for entry in entries {
                eprintln!("coding {}", entry.crisis_id);
                let body = std::fs::read_to_string(resolve(&base, Path::new(&entry.file)))
                    .map_err(|e| format!("cannot read narrative {}: {e}", entry.file))?;
                let narrative = Narrative::new(&entry.crisis_id, &entry.title, body)
                    .map_err(|e| e.to_string())?;
                let output = run_pipeline(
                    &narrative,
                    &loaded.codebook,
                    &loaded.backend,
                    &loaded.pipeline,
                    &loaded.aliases,
                    &loaded.actors,
                )
                .map_err(|e| e.to_string())?;
                let name = |suffix: &str| out_dir.join(format!("{}.{suffix}", entry.crisis_id));
                store::write_events(&name("events.jsonl"), &output.events)
                    .map_err(|e| e.to_string())?;
                store::write_sentences(&name("sentences.jsonl"), &output.sentences)
                    .map_err(|e| e.to_string())?;
                output
                    .manifest
                    .write(&name("manifest.json"))
                    .map_err(|e| e.to_string())?;
                eprintln!(
                    "  {} sentences, {} events, {} calls, digest {}",
                    output.sentences.len(),
                    output.events.len(),
                    output.manifest.total_calls,
                    &output.manifest.output_digest[..12]
                );
            }
            Ok(())
        }
        Command::Eval {
            config,
            gold,
            events,
        } => {
            let loaded = load_config(&config)?;
            let consensus = load_consensus(&loaded, &gold)?;
            let events = load_events(&events)?;
            let report = compute_recall(&events, &consensus, &loaded.codebook, &loaded.aliases);
            emit_json(&report);
            Ok(())
        }
        Command::Confuse {
            config,
            gold,
            events,
            class,
            min_count,
        } => {
            let loaded = load_config(&config)?;
            let consensus = load_consensus(&loaded, &gold)?;
            let events = load_events(&events)?;
            let matrix = build_confusion(
                &events,
                &consensus,
                class.into(),
                &loaded.codebook,
                &loaded.aliases,
            )
            .map_err(|e| e.to_string())?;
            emit_json(&matrix.filter_min_count(min_count));
            Ok(())
        }
        Command::QaStats {
            config,
            events,
            threshold,
        } => {
            let loaded = load_config(&config)?;
            let events = load_events(&events)?;
            let universe: Vec<String> =
                loaded.codebook.nodes.iter().map(|n| n.id.clone()).collect();
            emit_json(&qa_stats(&events, &universe, threshold));
            Ok(())
        }
        Command::Report {
            config,
            narratives,
            crisis,
            sentences,
            events,
            out,
            text,
        } => {
            let _ = load_config(&config)?;
            let base = narratives
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let entry = read_narratives_manifest(&narratives)
                .map_err(|e| e.to_string())?
                .into_iter()
                .find(|e| e.crisis_id == crisis)
                .ok_or_else(|| format!("crisis {crisis:?} not in manifest"))?;
            let body = std::fs::read_to_string(resolve(&base, Path::new(&entry.file)))
                .map_err(|e| format!("cannot read narrative {}: {e}", entry.file))?;
            let narrative =
                Narrative::new(&entry.crisis_id, &entry.title, body).map_err(|e| e.to_string())?;
            let sentences = store::read_sentences(&sentences).map_err(|e| e.to_string())?;
            let events = store::read_events(&events).map_err(|e| e.to_string())?;
            let rendered = if text {
                render_text_table(&narrative, &sentences, &events).map_err(|e| e.to_string())?
            } else {
                render_timeline(&narrative, &sentences, &events, &IconMap::default())
                    .map_err(|e| e.to_string())?
            };
            match out {
                Some(path) => store::write_atomic(&path, rendered.as_bytes())
                    .map_err(|e| e.to_string())?,
                None => print!("{rendered}"),
            }
            Ok(())
        }
        Command::Cache { command } => match command {
            CacheCommand::Show { cache } => {
                let entries = read_cache_file(&cache).map_err(|e| e.to_string())?;
                eprintln!("{} entries", entries.len());
                for entry in entries {
                    println!("{}  {}", entry.key, entry.created_at.to_rfc3339());
                }
                Ok(())
            }
            CacheCommand::Clear { cache } => {
                if cache.exists() {
                    std::fs::remove_file(&cache)
                        .map_err(|e| format!("cannot remove {}: {e}", cache.display()))?;
                    eprintln!("removed {}", cache.display());
                } else {
                    eprintln!("{} does not exist", cache.display());
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
