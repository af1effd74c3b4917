//! `planmine` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod eval;
mod synthetic;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use planmine_core::config::{EmbedderKind, ProviderKind, Settings};
use planmine_core::embed::{EmbeddingProvider, HashEmbedder, RemoteEmbedder};
use planmine_core::llm::{CompletionProvider, Gateway, GatewayOptions, MockProvider, RecordingProvider, RemoteProvider};
use planmine_core::pipeline::{Pipeline, PipelineError, RunManifest};
use planmine_core::store::{CorpusFilter, ExportFormat, Store, StoreError};
use planmine_core::Domain;

use synthetic::SyntheticProvider;

#[derive(Parser)]
#[command(name = "planmine", version, about = "Mine reusable programming plans from example code")]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// SQLite store path.
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, annotate, segment, embed, cluster and name a domain.
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
    /// Compare corpora on complexity metrics and set distances.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Serve the HTTP API.
    Serve {
        /// Overrides `listen` from the config.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Load existing programs from a directory into a domain.
    Ingest {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        library: String,
        #[arg(long)]
        dir: PathBuf,
        /// Substring every accepted file must contain; repeatable.
        #[arg(long)]
        require: Vec<String>,
    },
    /// Write a domain's plans (or its whole corpus) to stdout or a file.
    Export {
        #[arg(long)]
        domain: String,
        /// `json` or `markdown`; plans only.
        #[arg(long, default_value = "json")]
        format: String,
        /// `plans`, or `corpus` for everything the pipeline stored.
        #[arg(long, default_value = "plans")]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace a domain's plans and groups with a JSON export.
    Import {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        file: PathBuf,
    },
    /// Maintain replay fixtures for the mock provider.
    Fixtures {
        #[command(subcommand)]
        cmd: FixturesCmd,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    library: String,
    /// `mock` or `remote`.
    #[arg(long)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mock fixture directory.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// `hash` or `remote`.
    #[arg(long)]
    embedder: Option<EmbedderKind>,
    #[arg(long)]
    n_use_cases: Option<usize>,
    /// Also save every provider response as a fixture in this directory.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    Run(EvalArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// `label=source`, where source is a directory, a file or a domain name.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<String>,
    /// Comma-separated `a:b` label pairs.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Domain corpora keep only representatives of the top candidates.
    #[arg(long)]
    star: bool,
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// Run the pipeline against the built-in synthetic pandas provider and
    /// save every response.
    Record {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "pandas")]
        library: String,
        /// Pipeline seeds to cover; repeatable.
        #[arg(long = "seed", default_values_t = [0u64])]
        seeds: Vec<u64>,
    },
}

/// A failure with its exit code.
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(m: impl fmt::Display) -> Self {
        Failure { code: 2, message: m.to_string() }
    }

    pub fn runtime(m: impl fmt::Display) -> Self {
        Failure { code: 1, message: m.to_string() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Conflict(_) | StoreError::Invalid(_) | StoreError::NotFound(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        None => Settings::default(),
    };
    if let Some(db) = cli.db {
        settings.db = db;
    }
    match cli.command {
        Command::Pipeline { cmd: PipelineCmd::Run(args) } => pipeline_run(settings, args),
        Command::Eval { cmd: EvalCmd::Run(args) } => eval::run(&settings, &args.corpora, &args.pairs, &args.out, args.star),
        Command::Serve { listen } => serve(settings, listen),
        Command::Ingest { domain, library, dir, require } => ingest(&settings, &domain, &library, &dir, require),
        Command::Export { domain, format, kind, out } => export(&settings, &domain, &format, &kind, out.as_deref()),
        Command::Import { domain, file } => import(&settings, &domain, &file),
        Command::Fixtures { cmd: FixturesCmd::Record { out, library, seeds } } => record(&settings, &out, &library, &seeds),
    }
}

fn open_store(settings: &Settings) -> CliResult<Store> {
    if let Some(parent) = settings.db.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::runtime(format!("{}: {e}", parent.display())))?;
    }
    Store::open(&settings.db).map_err(|e| Failure::runtime(format!("{}: {e}", settings.db.display())))
}

fn existing_domain(store: &Store, name: &str) -> CliResult<Domain> {
    store.domain_by_name(name)?.ok_or_else(|| Failure::usage(format!("no domain named `{name}`")))
}

pub fn embedder(settings: &Settings) -> Arc<dyn EmbeddingProvider> {
    match settings.embedder {
        EmbedderKind::Hash => Arc::new(HashEmbedder::new(settings.pipeline.embedding_dim)),
        EmbedderKind::Remote => Arc::new(RemoteEmbedder::from_env(settings.remote_embed.clone())),
    }
}

fn gateway(settings: &Settings, provider: Arc<dyn CompletionProvider>) -> Gateway {
    let options = GatewayOptions { max_in_flight: settings.max_in_flight, ..Default::default() };
    Gateway::new(provider, options)
}

/// `<db dir>/<db stem>.<domain>.manifest.json`
pub fn manifest_path(db: &Path, domain: &str) -> PathBuf {
    let stem = db.file_stem().and_then(|s| s.to_str()).unwrap_or("planmine");
    db.with_file_name(format!("{stem}.{domain}.manifest.json"))
}

fn pipeline_run(mut settings: Settings, args: RunArgs) -> CliResult {
    if let Some(p) = args.provider {
        settings.provider = p;
    }
    if let Some(s) = args.seed {
        settings.pipeline.seed = s;
    }
    if let Some(f) = args.fixtures {
        settings.fixtures = f;
    }
    if let Some(e) = args.embedder {
        settings.embedder = e;
    }
    if let Some(n) = args.n_use_cases {
        settings.pipeline.n_use_cases = n;
    }
    settings.pipeline.validate().map_err(Failure::usage)?;

    let inner: Arc<dyn CompletionProvider> = match settings.provider {
        ProviderKind::Mock => {
            if !settings.fixtures.is_dir() {
                return Err(Failure::usage(format!("fixture directory {} does not exist", settings.fixtures.display())));
            }
            Arc::new(MockProvider::new(&settings.fixtures))
        }
        ProviderKind::Remote => Arc::new(RemoteProvider::from_env(settings.remote.clone()).map_err(Failure::usage)?),
    };
    let provider: Arc<dyn CompletionProvider> = match args.record {
        Some(dir) => Arc::new(RecordingProvider::new(inner, dir)),
        None => inner,
    };

    let store = open_store(&settings)?;
    let domain = store.ensure_domain(&args.domain, &args.library, &settings.language)?;
    let pipeline = Pipeline::new(&store, gateway(&settings, provider), embedder(&settings), settings.pipeline.clone());
    let manifest = pipeline.run(&domain).map_err(|e| match e {
        PipelineError::Config(c) => Failure::usage(c),
        other => Failure::runtime(other),
    })?;
    let path = manifest_path(&settings.db, &args.domain);
    write_json(&path, &manifest)?;
    print_summary(&manifest, &path);
    Ok(())
}

fn print_summary(m: &RunManifest, path: &Path) {
    for s in &m.stages {
        println!("{:<16} {:>8} {:>7} ms", s.stage.as_str(), if s.ran { "ran" } else { "reused" }, s.millis);
    }
    let c = &m.counts;
    println!(
        "use cases {}, programs {} ({} valid), snippets {}, candidates {}",
        c.use_cases, c.programs, c.valid_programs, c.snippets, c.candidates
    );
    if let Some(cl) = &m.clustering {
        println!("pca components {}, k {}", cl.pca_components, cl.k);
    }
    println!("manifest written to {}", path.display());
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    text.push('\n');
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::runtime(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn ingest(settings: &Settings, domain: &str, library: &str, dir: &Path, require: Vec<String>) -> CliResult {
    if !dir.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", dir.display())));
    }
    let store = open_store(settings)?;
    let d = store.ensure_domain(domain, library, &settings.language)?;
    let filter = CorpusFilter { required: require, ..Default::default() };
    let programs = store.ingest_corpus(d.id, dir, &filter)?;
    let valid = programs.iter().filter(|p| p.syntactically_valid).count();
    println!("ingested {} programs ({valid} valid) into `{domain}`", programs.len());
    Ok(())
}

fn export(settings: &Settings, domain: &str, format: &str, kind: &str, out: Option<&Path>) -> CliResult {
    let store = open_store(settings)?;
    let d = existing_domain(&store, domain)?;
    let text = match kind {
        "plans" => {
            let f = ExportFormat::parse(format).ok_or_else(|| Failure::usage(format!("unknown format `{format}`")))?;
            store.export_plans(d.id, f)?
        }
        "corpus" => {
            if format != "json" {
                return Err(Failure::usage("corpus exports are JSON only"));
            }
            // The creation timestamp is the only wall-clock value in a
            // snapshot; drop it so reruns compare byte for byte.
            let mut v = serde_json::to_value(store.snapshot(d.id)?).map_err(Failure::runtime)?;
            if let Some(obj) = v["domain"].as_object_mut() {
                obj.remove("created_at");
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(Failure::runtime)?;
            s.push('\n');
            s
        }
        other => return Err(Failure::usage(format!("unknown export kind `{other}`"))),
    };
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn import(settings: &Settings, domain: &str, file: &Path) -> CliResult {
    let json = std::fs::read_to_string(file).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    let store = open_store(settings)?;
    let d = existing_domain(&store, domain)?;
    store.import_plans(d.id, &json)?;
    println!("imported plans into `{domain}`");
    Ok(())
}

fn record(settings: &Settings, out: &Path, library: &str, seeds: &[u64]) -> CliResult {
    let synthetic = Arc::new(SyntheticProvider::new());
    for &seed in seeds {
        let store = Store::open_in_memory()?;
        let domain = store.create_domain("fixtures", library, &settings.language)?;
        let provider = Arc::new(RecordingProvider::new(synthetic.clone(), out));
        let config = planmine_core::PipelineConfig { seed, ..settings.pipeline.clone() };
        let manifest = Pipeline::new(&store, gateway(settings, provider), embedder(settings), config)
            .run(&domain)
            .map_err(Failure::runtime)?;
        println!("seed {seed}: {} candidates recorded", manifest.counts.candidates);
    }
    println!("fixtures written to {}", out.display());
    Ok(())
}

fn serve(mut settings: Settings, listen: Option<String>) -> CliResult {
    if let Some(l) = listen {
        settings.listen = l;
    }
    settings.validate().map_err(Failure::usage)?;
    let provider: Arc<dyn CompletionProvider> = match settings.provider {
        ProviderKind::Mock => Arc::new(MockProvider::new(&settings.fixtures)),
        ProviderKind::Remote => Arc::new(RemoteProvider::from_env(settings.remote.clone()).map_err(Failure::usage)?),
    };
    let store = Arc::new(open_store(&settings)?);
    let state = planmine_api::AppState::new(
        store,
        gateway(&settings, provider),
        std::time::Duration::from_secs(settings.session_ttl_secs),
    );
    let rt = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&settings.listen)
            .await
            .map_err(|e| Failure::runtime(format!("cannot bind {}: {e}", settings.listen)))?;
        let addr = listener.local_addr().map_err(Failure::runtime)?;
        println!("listening on http://{addr}");
        use std::io::Write as _;
        let _ = std::io::stdout().flush();
        planmine_api::serve(listener, state, settings.cors_origin.as_deref(), shutdown_signal())
            .await
            .map_err(Failure::runtime)?;
        println!("shut down");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
