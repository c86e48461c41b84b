use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tubewire::accounts::accounts_tsv;
use tubewire::cluster::Linkage;
use tubewire::ingest::StreamPaths;
use tubewire::model::parse_timestamp;
use tubewire::par::Execution;
use tubewire::pipeline::{self, AccountGroup, PipelineConfig};
use tubewire::reports::LagGrouping;
use tubewire::synth::{self, SyntheticConfig};

#[derive(Parser)]
#[command(
    name = "tubewire",
    version,
    about = "Offline analytics over tweets that share YouTube videos"
)]
struct Cli {
    /// Worker threads; 1 runs every stage sequentially. Defaults to all cores.
    #[arg(long, global = true, env = "TUBEWIRE_THREADS")]
    threads: Option<usize>,

    /// Pipeline config (TOML). Flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, join and cleanse the record streams into a store directory.
    Ingest(IngestArgs),
    /// Label every sharer promotional or regular.
    Classify(ClassifyArgs),
    /// Extract per-user demographic, interest and sharing features.
    Features(FeaturesArgs),
    /// Lag distributions by category, account group or activity decile.
    Lags(LagsArgs),
    /// Permutation-test marker matrices and political contrasts.
    Stats(StatsArgs),
    /// Fit and cross-validate the first-week popularity model.
    Predict(PredictArgs),
    /// Cluster users by shared-category distribution.
    Cluster(ClusterArgs),
    /// Generate a seeded synthetic dataset with planted parameters.
    Synth(SynthArgs),
    /// Run every stage and write the report bundle with its manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct StreamArgs {
    /// Directory holding users.jsonl, videos.jsonl, events.jsonl (and optionally neighbors.jsonl).
    #[arg(long, conflicts_with_all = ["users", "videos", "events"])]
    input: Option<PathBuf>,
    #[arg(long, requires_all = ["videos", "events"])]
    users: Option<PathBuf>,
    #[arg(long)]
    videos: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    neighbors: Option<PathBuf>,
}

impl StreamArgs {
    fn paths(&self) -> anyhow::Result<StreamPaths> {
        if let Some(dir) = &self.input {
            return Ok(StreamPaths::in_dir(dir));
        }
        match (&self.users, &self.videos, &self.events) {
            (Some(u), Some(v), Some(e)) => Ok(StreamPaths {
                users: u.clone(),
                videos: v.clone(),
                events: e.clone(),
                neighbors: self.neighbors.clone(),
            }),
            _ => Err(usage("give --input DIR or all of --users, --videos and --events")),
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    streams: StreamArgs,
    /// Videos uploaded before this date are dropped (YYYY-MM-DD).
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "accounts.tsv")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    store: PathBuf,
    /// Directory with replacement lookup tables (names.tsv, directory.tsv, ...).
    #[arg(long)]
    resources: Option<PathBuf>,
    #[arg(long, default_value = "features.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct LagsArgs {
    #[arg(long)]
    store: PathBuf,
    /// category, group or decile; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', default_value = "category")]
    by: Vec<LagGrouping>,
    #[arg(long)]
    accounts: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "features.jsonl")]
    features: PathBuf,
    /// Restricts the analysis to regular accounts.
    #[arg(long)]
    accounts: Option<PathBuf>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "accounts.tsv")]
    accounts: PathBuf,
    /// regular, promo or all.
    #[arg(long)]
    group: Option<AccountGroup>,
    /// Number of cross-validation folds.
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "features.jsonl")]
    features: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// average, single or complete.
    #[arg(long)]
    linkage: Option<String>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator config (TOML); unset fields keep their defaults.
    #[arg(long = "synth-config")]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    videos: Option<usize>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    streams: StreamArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// A mistake in how the tool was invoked; exits with the validation code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<tubewire::Error>() {
            return if e.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execution(threads: Option<usize>) -> anyhow::Result<Execution> {
    match threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the worker pool")?;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn write(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let exec = execution(cli.threads)?;
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => {
            if let Some(c) = &a.cutoff {
                config.cleansing.cutoff = parse_timestamp(c)?;
            }
            config.validate()?;
            let ingested = pipeline::ingest(&a.streams.paths()?, &config.cleansing, exec)?;
            pipeline::save_store(&ingested, &a.out)?;
            let r = &ingested.report;
            println!(
                "{} users, {} videos, {} of {} events retained ({} negative lag, {} before cutoff), {} quarantined",
                r.users,
                r.videos,
                r.cleanse.retained_events,
                r.cleanse.input_events,
                r.cleanse.negative_lag_events,
                r.cleanse.pre_cutoff_events,
                r.quarantined_events
            );
        }
        Command::Classify(a) => {
            let (store, _) = pipeline::load_store(&a.store, exec)?;
            let partition = pipeline::classify(&store, &config.promo, exec);
            write(&a.out, &accounts_tsv(&partition))?;
            let promo = partition
                .labels()
                .values()
                .filter(|l| **l == tubewire::accounts::AccountLabel::Promotional)
                .count();
            println!(
                "{promo} of {} accounts promotional (mu = {})",
                partition.rows.len(),
                partition.mu
            );
        }
        Command::Features(a) => {
            if a.resources.is_some() {
                config.resources_dir = a.resources;
            }
            let (store, _) = pipeline::load_store(&a.store, exec)?;
            let features = pipeline::features(&store, &config, exec)?;
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            pipeline::write_features(&a.out, &features)?;
            let active = features.iter().filter(|f| f.active_for_clustering).count();
            println!("{} feature rows ({active} eligible for clustering)", features.len());
        }
        Command::Lags(a) => {
            let (store, _) = pipeline::load_store(&a.store, exec)?;
            let labels = a.accounts.as_deref().map(pipeline::load_accounts).transpose()?;
            let features = a
                .features
                .as_deref()
                .map(|p| pipeline::load_features(p, exec))
                .transpose()?;
            let bundle = pipeline::lags(&store, &a.by, labels.as_ref(), features.as_deref())?;
            bundle.write(&a.out)?;
            println!("{} lag files written to {}", bundle.files().len(), a.out.display());
        }
        Command::Stats(a) => {
            config.permutations = a.permutations.unwrap_or(config.permutations);
            config.seed = a.seed.unwrap_or(config.seed);
            config.validate()?;
            let (store, _) = pipeline::load_store(&a.store, exec)?;
            let labels = a.accounts.as_deref().map(pipeline::load_accounts).transpose()?;
            let features = pipeline::load_features(&a.features, exec)?;
            let bundle = pipeline::stats(&store, labels.as_ref(), &features, &config, exec)?;
            bundle.write(&a.out)?;
            print!("{}", bundle.get("demographics.tsv").unwrap_or_default());
        }
        Command::Predict(a) => {
            config.popularity.group = a.group.unwrap_or(config.popularity.group);
            config.popularity.folds = a.cv.unwrap_or(config.popularity.folds);
            config.seed = a.seed.unwrap_or(config.seed);
            config.validate()?;
            let (store, report) = pipeline::load_store(&a.store, exec)?;
            let labels = pipeline::load_accounts(&a.accounts)?;
            let crawl = report.and_then(|r| r.crawl_ts);
            let (bundle, summary) = pipeline::predict(&store, &labels, crawl, &config, exec)?;
            bundle.write(&a.out)?;
            println!(
                "{} videos with first-week attention, {} with final views; outputs in {}",
                summary.attention_videos,
                summary.final_view_videos,
                a.out.display()
            );
        }
        Command::Cluster(a) => {
            config.cluster.k = a.k.unwrap_or(config.cluster.k);
            if let Some(l) = a.linkage {
                config.cluster.linkage = parse_linkage(&l)?;
            }
            config.permutations = a.permutations.unwrap_or(config.permutations);
            config.seed = a.seed.unwrap_or(config.seed);
            config.validate()?;
            let (store, _) = pipeline::load_store(&a.store, exec)?;
            let features = pipeline::load_features(&a.features, exec)?;
            let (bundle, eligible) = pipeline::cluster(&store, &features, &config, exec)?;
            bundle.write(&a.out)?;
            println!("{eligible} users in {} clusters", config.cluster.k);
        }
        Command::Synth(a) => {
            let mut sc = match &a.synth_config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    SyntheticConfig::from_toml(&text).with_context(|| format!("in {}", p.display()))?
                }
                None => SyntheticConfig::default(),
            };
            sc.seed = a.seed.unwrap_or(sc.seed);
            sc.user_count = a.users.unwrap_or(sc.user_count);
            sc.video_count = a.videos.unwrap_or(sc.video_count);
            sc.event_count = a.events.unwrap_or(sc.event_count);
            let data = synth::generate(&sc)?;
            data.write(&a.out)?;
            println!(
                "{} users, {} videos, {} events ({} promotional users) written to {}",
                data.users.len(),
                data.videos.len(),
                data.events.len(),
                data.truth.promo_users.len(),
                a.out.display()
            );
        }
        Command::Run(a) => {
            config.seed = a.seed.unwrap_or(config.seed);
            config.permutations = a.permutations.unwrap_or(config.permutations);
            let out = pipeline::run(&a.streams.paths()?, &config, exec)?;
            out.write(&a.out)?;
            let digest = tubewire::pipeline::sha256_hex(out.manifest_json()?.as_bytes());
            println!(
                "{} artifacts written to {}",
                out.bundle.files().len() + 1,
                a.out.display()
            );
            println!("manifest sha256 {digest}");
        }
    }
    Ok(())
}

fn parse_linkage(s: &str) -> anyhow::Result<Linkage> {
    match s {
        "average" => Ok(Linkage::Average),
        "single" => Ok(Linkage::Single),
        "complete" => Ok(Linkage::Complete),
        other => Err(usage(format!("unknown linkage `{other}` (average, single, complete)"))),
    }
}
