//! Stage orchestration: configuration, per-stage entry points that read
//! only prior-stage files, and the end-to-end run with its manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accounts::{accounts_tsv, partition_users, read_accounts_tsv, AccountLabel, Partition, PromoThresholds};
use crate::cluster::{
    alignment_from_features, alignment_tsv, cluster_users, clusters_tsv, ClusterConfig, Linkage, DEFAULT_K,
};
use crate::error::{Error, Result};
use crate::ingest::{
    cleanse, parse_jsonl, parse_streams, write_jsonl, CleanseReport, CleansingConfig, EventStore, StreamPaths,
};
use crate::model::SECONDS_PER_DAY;
use crate::model::{Timestamp, UserId};
use crate::par::Execution;
use crate::popularity::{
    attention_tsv, attention_vectors, cross_validate, fit_substitutes_model, single_factor_fits, with_final_views,
    POPULAR_VIEWS,
};
use crate::profiles::{extract_features, FeatureConfig, ProfileResources, UserFeatures};
use crate::reports::{analysis_population, lags_bundle, stats_bundle, Bundle, LagGrouping};
use crate::stats::DEFAULT_PERMUTATIONS;

pub const INGEST_REPORT: &str = "ingest.json";
pub const ACCOUNTS_FILE: &str = "accounts.tsv";
pub const FEATURES_FILE: &str = "features.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Which accounts feed the popularity model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountGroup {
    #[default]
    Regular,
    Promo,
    All,
}

impl AccountGroup {
    pub fn admits(self, label: AccountLabel) -> bool {
        match self {
            AccountGroup::Regular => label == AccountLabel::Regular,
            AccountGroup::Promo => label == AccountLabel::Promotional,
            AccountGroup::All => true,
        }
    }
}

impl std::str::FromStr for AccountGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(AccountGroup::Regular),
            "promo" | "promotional" => Ok(AccountGroup::Promo),
            "all" => Ok(AccountGroup::All),
            other => Err(Error::invalid(format!(
                "unknown account group `{other}` (regular, promo, all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopularityConfig {
    pub threshold: f64,
    pub min_age_days: i64,
    pub folds: usize,
    pub group: AccountGroup,
}

impl Default for PopularityConfig {
    fn default() -> Self {
        PopularityConfig {
            threshold: POPULAR_VIEWS,
            min_age_days: 30,
            folds: 10,
            group: AccountGroup::Regular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: usize,
    pub linkage: Linkage,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k: DEFAULT_K,
            linkage: Linkage::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    /// Bio terms counted for the left/right proportion test.
    pub lexicon: Vec<String>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        let terms = [
            "#p2",
            "#tcot",
            "#teaparty",
            "#gop",
            "#ows",
            "obama",
            "liberal",
            "conservative",
            "progressive",
            "patriot",
        ];
        StatsConfig {
            lexicon: terms.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub permutations: usize,
    /// Directory overriding the bundled lookup tables file by file.
    pub resources_dir: Option<PathBuf>,
    pub cleansing: CleansingConfig,
    pub promo: PromoThresholds,
    pub features: FeatureConfig,
    pub stats: StatsConfig,
    pub popularity: PopularityConfig,
    pub cluster: ClusterSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            permutations: DEFAULT_PERMUTATIONS,
            resources_dir: None,
            cleansing: CleansingConfig::default(),
            promo: PromoThresholds::default(),
            features: FeatureConfig::default(),
            stats: StatsConfig::default(),
            popularity: PopularityConfig::default(),
            cluster: ClusterSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("config {} does not exist", path.display())),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.cleansing.validate()?;
        self.features.polarization.validate()?;
        if self.permutations < crate::stats::MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "permutations = {} is below 100",
                self.permutations
            )));
        }
        if self.popularity.folds < 2 || self.popularity.min_age_days < 0 || !(self.popularity.threshold > 0.0) {
            return Err(Error::Config(
                "popularity needs folds >= 2, min_age_days >= 0, threshold > 0".into(),
            ));
        }
        if self.cluster.k == 0 {
            return Err(Error::Config("cluster.k must be positive".into()));
        }
        Ok(())
    }

    pub fn resources(&self) -> Result<ProfileResources> {
        ProfileResources::load(self.resources_dir.as_deref())
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            k: self.cluster.k,
            linkage: self.cluster.linkage,
            permutations: self.permutations,
            seed: self.seed,
        }
    }
}

/// Row counts and the crawl time recorded next to a cleansed store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub users: usize,
    pub videos: usize,
    pub neighbors: usize,
    pub quarantined_events: usize,
    pub cleanse: CleanseReport,
    /// Crawl time of the view counts: the configured value, else the latest
    /// tweet before cleansing.
    pub crawl_ts: Option<Timestamp>,
}

pub struct Ingested {
    pub store: EventStore,
    pub report: IngestReport,
}

/// Parses and cleanses the input streams.
pub fn ingest(paths: &StreamPaths, cleansing: &CleansingConfig, exec: Execution) -> Result<Ingested> {
    let raw = parse_streams(paths, exec)?;
    let crawl_ts = cleansing.crawl_ts.or_else(|| raw.latest_tweet_ts());
    let (store, cleanse_report) = cleanse(&raw, cleansing)?;
    let report = IngestReport {
        users: store.users.len(),
        videos: store.videos.len(),
        neighbors: store.neighbors.len(),
        quarantined_events: store.quarantine.len(),
        cleanse: cleanse_report,
        crawl_ts,
    };
    Ok(Ingested { store, report })
}

pub fn save_store(ingested: &Ingested, dir: &Path) -> Result<()> {
    ingested.store.save_dir(dir)?;
    let path = dir.join(INGEST_REPORT);
    fs::write(&path, serde_json::to_string_pretty(&ingested.report)? + "\n").map_err(|e| Error::io(&path, e))
}

/// Loads a store directory; the ingest report is absent for directories not
/// written by [`save_store`].
pub fn load_store(dir: &Path, exec: Execution) -> Result<(EventStore, Option<IngestReport>)> {
    if !dir.join("events.jsonl").exists() {
        return Err(Error::invalid(format!(
            "{} is not a store directory; create one with `tubewire ingest --out {}`",
            dir.display(),
            dir.display()
        )));
    }
    let store = EventStore::load_dir(dir, exec)?;
    let path = dir.join(INGEST_REPORT);
    let report = if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok((store, report))
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{} not found; produce it first with `{producer}`",
            path.display()
        )))
    }
}

pub fn load_accounts(path: &Path) -> Result<BTreeMap<UserId, AccountLabel>> {
    require(path, "tubewire classify --store <store> --out accounts.tsv")?;
    read_accounts_tsv(path)
}

pub fn write_features(path: &Path, features: &[UserFeatures]) -> Result<()> {
    write_jsonl(path, features)
}

pub fn load_features(path: &Path, exec: Execution) -> Result<Vec<UserFeatures>> {
    require(path, "tubewire features --store <store> --out features.jsonl")?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_jsonl(&name, &text, exec, |_| Ok(()))
}

pub fn classify(store: &EventStore, thresholds: &PromoThresholds, exec: Execution) -> Partition {
    partition_users(store, thresholds, exec)
}

pub fn features(store: &EventStore, config: &PipelineConfig, exec: Execution) -> Result<Vec<UserFeatures>> {
    extract_features(store, &config.resources()?, &config.features, exec)
}

pub fn lags(
    store: &EventStore,
    by: &[LagGrouping],
    labels: Option<&BTreeMap<UserId, AccountLabel>>,
    features: Option<&[UserFeatures]>,
) -> Result<Bundle> {
    lags_bundle(store, by, labels, features)
}

pub fn stats(
    store: &EventStore,
    labels: Option<&BTreeMap<UserId, AccountLabel>>,
    features: &[UserFeatures],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<Bundle> {
    let users = analysis_population(features, labels);
    stats_bundle(
        &users,
        store,
        &config.stats.lexicon,
        config.permutations,
        config.seed,
        exec,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub group: AccountGroup,
    pub attention_videos: usize,
    pub final_view_videos: usize,
    pub crawl_ts: Timestamp,
}

/// `attention.tsv`, `fit.json` (joint model and single-factor fits) and `cv.json`.
pub fn predict(
    store: &EventStore,
    labels: &BTreeMap<UserId, AccountLabel>,
    crawl_ts: Option<Timestamp>,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<(Bundle, PredictSummary)> {
    let p = &config.popularity;
    let crawl_ts = crawl_ts
        .or(config.cleansing.crawl_ts)
        .or_else(|| store.latest_tweet_ts())
        .ok_or_else(|| Error::invalid("no events, so no crawl time can be inferred"))?;
    let group = store.filter_events(|e| {
        p.group
            .admits(labels.get(&e.user_id).copied().unwrap_or(AccountLabel::Regular))
    });
    let vectors = attention_vectors(&group, exec)?;
    let attention_videos = vectors.len();
    let vectors = with_final_views(vectors, &group, crawl_ts, p.min_age_days * SECONDS_PER_DAY);
    let fit = fit_substitutes_model(&vectors)?;
    let single: Vec<_> = single_factor_fits(&vectors)
        .into_iter()
        .map(|(name, r)| match r {
            Ok(f) => serde_json::json!({ "metric": name, "fit": f }),
            Err(e) => serde_json::json!({ "metric": name, "undefined": e.to_string() }),
        })
        .collect();
    let cv = cross_validate(&vectors, p.folds, config.seed, p.threshold, exec)?;

    let summary = PredictSummary {
        group: p.group,
        attention_videos,
        final_view_videos: vectors.len(),
        crawl_ts,
    };
    let mut b = Bundle::default();
    b.add("attention.tsv", attention_tsv(&vectors));
    b.add_json(
        "fit.json",
        &serde_json::json!({ "group": p.group, "model": fit, "single_factor": single }),
    )?;
    b.add_json("cv.json", &cv)?;
    Ok((b, summary))
}

pub fn cluster(
    store: &EventStore,
    features: &[UserFeatures],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<(Bundle, usize)> {
    let resources = config.resources()?;
    let report = cluster_users(features, store, &resources.stopwords, &config.cluster_config(), exec)?;
    let alignment = alignment_from_features(features)?;
    let mut b = Bundle::default();
    b.add("clusters.tsv", clusters_tsv(&report));
    b.add_json("clusters.json", &report)?;
    b.add("alignment.tsv", alignment_tsv(&alignment));
    b.add_json("alignment.json", &alignment)?;
    Ok((b, report.eligible_users))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub stages: Vec<String>,
    pub config: PipelineConfig,
    pub rows: BTreeMap<String, usize>,
    pub files: BTreeMap<String, FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const STAGES: [&str; 8] = [
    "ingest",
    "classify",
    "profiles",
    "videometrics",
    "lags",
    "stats",
    "popularity",
    "cluster",
];

pub struct RunOutput {
    pub bundle: Bundle,
    pub manifest: Manifest,
}

impl RunOutput {
    /// Writes every artifact and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.bundle.write(dir)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.manifest_json()?).map_err(|e| Error::io(&path, e))
    }

    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.manifest)? + "\n")
    }
}

/// Runs every stage in order over the streams and collects the report bundle.
pub fn run(paths: &StreamPaths, config: &PipelineConfig, exec: Execution) -> Result<RunOutput> {
    config.validate()?;
    let ingested = ingest(paths, &config.cleansing, exec).map_err(|e| e.in_stage("ingest"))?;
    let store = &ingested.store;
    log::info!(
        "ingest: {} of {} events retained, {} quarantined",
        ingested.report.cleanse.retained_events,
        ingested.report.cleanse.input_events,
        ingested.report.quarantined_events
    );
    let mut bundle = Bundle::default();
    let mut rows = BTreeMap::new();
    rows.insert("users".to_string(), ingested.report.users);
    rows.insert("videos".to_string(), ingested.report.videos);
    rows.insert("neighbors".to_string(), ingested.report.neighbors);
    rows.insert("input_events".to_string(), ingested.report.cleanse.input_events);
    rows.insert("retained_events".to_string(), ingested.report.cleanse.retained_events);
    rows.insert("quarantined_events".to_string(), ingested.report.quarantined_events);
    bundle.add_json(INGEST_REPORT, &ingested.report)?;
    let mut quarantine = Vec::new();
    for q in &store.quarantine {
        serde_json::to_writer(&mut quarantine, q)?;
        quarantine.push(b'\n');
    }
    bundle.add(
        "quarantine.jsonl",
        String::from_utf8(quarantine).expect("JSON is UTF-8"),
    );

    let partition = classify(store, &config.promo, exec);
    let labels = partition.labels();
    rows.insert("accounts".to_string(), labels.len());
    rows.insert(
        "promotional_accounts".to_string(),
        labels.values().filter(|l| **l == AccountLabel::Promotional).count(),
    );
    bundle.add(ACCOUNTS_FILE, accounts_tsv(&partition));
    log::info!("classify: {} accounts, mu = {}", labels.len(), partition.mu);

    // profiles and videometrics are both computed per user by extraction
    let features = features(store, config, exec).map_err(|e| e.in_stage("profiles"))?;
    rows.insert("features".to_string(), features.len());
    log::info!("profiles: {} feature rows", features.len());
    let mut lines = Vec::new();
    for f in &features {
        serde_json::to_writer(&mut lines, f)?;
        lines.push(b'\n');
    }
    bundle.add(FEATURES_FILE, String::from_utf8(lines).expect("JSON is UTF-8"));

    let all = [LagGrouping::Category, LagGrouping::Group, LagGrouping::Decile];
    bundle.extend(lags(store, &all, Some(&labels), Some(&features)).map_err(|e| e.in_stage("lags"))?);
    bundle.extend(stats(store, Some(&labels), &features, config, exec).map_err(|e| e.in_stage("stats"))?);

    let (predicted, summary) =
        predict(store, &labels, ingested.report.crawl_ts, config, exec).map_err(|e| e.in_stage("popularity"))?;
    rows.insert("attention_videos".to_string(), summary.attention_videos);
    rows.insert("final_view_videos".to_string(), summary.final_view_videos);
    bundle.extend(predicted);
    log::info!("popularity: {} videos with final views", summary.final_view_videos);

    let (clustered, eligible) = cluster(store, &features, config, exec).map_err(|e| e.in_stage("cluster"))?;
    rows.insert("cluster_users".to_string(), eligible);
    bundle.extend(clustered);
    log::info!("cluster: {eligible} eligible users");

    let files = bundle
        .files()
        .iter()
        .map(|(name, content)| {
            (
                name.clone(),
                FileEntry {
                    bytes: content.len(),
                    sha256: sha256_hex(content.as_bytes()),
                },
            )
        })
        .collect();
    let manifest = Manifest {
        tool: "tubewire".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        stages: STAGES.iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
        rows,
        files,
    };
    Ok(RunOutput { bundle, manifest })
}
