//! Report builders: significance matrices, political contrasts and lag
//! exports, collected as named text files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accounts::AccountLabel;
use crate::error::{Error, Result};
use crate::ingest::EventStore;
use crate::lags::{
    activity_deciles, category_lag_distributions, cdf_tsv, deciles_tsv, group_median_lag, LagDistribution,
    BINS_PER_DECADE,
};
use crate::model::{Category, UserId};
use crate::par::Execution;
use crate::profiles::{tokenize, Gender, Geo, Leaning, Role, UserFeatures};
use crate::stats::{
    mean, perm_test_correlation, perm_test_mean_diff, rank_by_frequency, rank_distance, two_proportion_test,
    ChiSquareResult, Marker, RankDistanceResult,
};

/// Correlations weaker than this print as `0`.
pub const DISPLAY_FLOOR: f64 = 0.05;
/// Significant correlations stronger than this print in brackets.
pub const DISPLAY_BOLD: f64 = 0.1;

/// Named text artifacts in path order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    files: BTreeMap<String, String>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.insert(name.into(), content);
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        self.add(name, serde_json::to_string_pretty(value)? + "\n");
        Ok(())
    }

    pub fn extend(&mut self, other: Bundle) {
        self.files.extend(other.files);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, content) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Users the statistics are computed over: regular accounts when labels are
/// known, everyone otherwise.
pub fn analysis_population<'a>(
    features: &'a [UserFeatures],
    labels: Option<&BTreeMap<UserId, AccountLabel>>,
) -> Vec<&'a UserFeatures> {
    features
        .iter()
        .filter(|f| labels.is_none_or(|l| l.get(&f.user_id) != Some(&AccountLabel::Promotional)))
        .collect()
}

pub const DEMOGRAPHIC_GROUPS: [&str; 8] = ["male", "female", "urban", "rural", "student", "mother", "father", "us"];

pub fn in_demographic(f: &UserFeatures, group: &str) -> bool {
    match group {
        "male" => f.gender == Gender::Male,
        "female" => f.gender == Gender::Female,
        "urban" => f.geo == Geo::UrbanUs,
        "rural" => f.geo == Geo::RuralUs,
        "student" => f.has_role(Role::Student),
        "mother" => f.has_role(Role::Mother),
        "father" => f.has_role(Role::Father),
        "us" => f.geo.is_us(),
        _ => false,
    }
}

const VIDEO_METRICS: [&str; 3] = ["views", "polarization", "lag"];

fn video_metric(f: &UserFeatures, metric: &str) -> Option<f64> {
    match metric {
        "views" => Some(f.shares.median_views),
        "polarization" => f.shares.median_polarization,
        "lag" => Some(f.shares.median_lag),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContrast {
    pub metric: String,
    pub group: String,
    pub group_users: usize,
    pub other_users: usize,
    /// Group mean minus the mean of everyone else; absent when either side is empty.
    pub delta: Option<f64>,
    pub tail_percentile: Option<f64>,
    pub marker: Option<Marker>,
}

/// Each demographic group against its complement on per-user video medians.
pub fn demographic_contrasts(
    users: &[&UserFeatures],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<GroupContrast>> {
    let mut out = Vec::new();
    for (m, metric) in VIDEO_METRICS.iter().enumerate() {
        for (g, group) in DEMOGRAPHIC_GROUPS.iter().enumerate() {
            let (mut inside, mut outside) = (Vec::new(), Vec::new());
            for f in users {
                if let Some(v) = video_metric(f, metric) {
                    if in_demographic(f, group) {
                        inside.push(v);
                    } else {
                        outside.push(v);
                    }
                }
            }
            let test = if inside.is_empty() || outside.is_empty() {
                None
            } else {
                let s = seed.wrapping_add((m * DEMOGRAPHIC_GROUPS.len() + g) as u64);
                Some(perm_test_mean_diff(&inside, &outside, permutations, s, exec)?)
            };
            out.push(GroupContrast {
                metric: metric.to_string(),
                group: group.to_string(),
                group_users: inside.len(),
                other_users: outside.len(),
                delta: test.as_ref().map(|t| t.observed),
                tail_percentile: test.as_ref().map(|t| t.tail_percentile),
                marker: test.map(|t| t.marker),
            });
        }
    }
    Ok(out)
}

pub fn demographics_tsv(contrasts: &[GroupContrast]) -> String {
    let mut out = String::from("metric");
    for g in DEMOGRAPHIC_GROUPS {
        out.push('\t');
        out.push_str(g);
    }
    out.push('\n');
    for metric in VIDEO_METRICS {
        out.push_str(metric);
        for g in DEMOGRAPHIC_GROUPS {
            let cell = contrasts
                .iter()
                .find(|c| c.metric == metric && c.group == g)
                .and_then(|c| c.marker)
                .map_or("n/a", Marker::symbol);
            out.push('\t');
            out.push_str(cell);
        }
        out.push('\n');
    }
    out
}

pub const TWITTER_FEATURES: [&str; 10] = [
    "followers",
    "friends",
    "tweets",
    "retweet_fraction",
    "url_fraction",
    "youtube_url_fraction",
    "hashtag_fraction",
    "mentioned_users",
    "retweeted_fraction",
    "mean_retweets",
];

pub const VIDEO_TARGETS: [&str; 6] = [
    "median_views",
    "median_polarization",
    "median_lag",
    "Music",
    "Sports",
    "News & Politics",
];

fn twitter_feature(f: &UserFeatures, name: &str) -> f64 {
    let b = &f.behavior;
    match name {
        "followers" => b.followers_count as f64,
        "friends" => b.friends_count as f64,
        "tweets" => b.tweet_count as f64,
        "retweet_fraction" => b.retweet_fraction,
        "url_fraction" => b.url_fraction,
        "youtube_url_fraction" => b.youtube_url_fraction,
        "hashtag_fraction" => b.hashtag_fraction,
        "mentioned_users" => b.mentioned_user_count as f64,
        "retweeted_fraction" => b.retweeted_tweet_fraction,
        "mean_retweets" => b.mean_nonzero_retweet_count,
        _ => f64::NAN,
    }
}

fn video_target(f: &UserFeatures, name: &str) -> Option<f64> {
    match name {
        "median_views" => Some(f.shares.median_views),
        "median_polarization" => f.shares.median_polarization,
        "median_lag" => Some(f.shares.median_lag),
        other => other.parse::<Category>().ok().map(|c| f.categories.get(c)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub feature: String,
    pub target: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub tail_percentile: Option<f64>,
    pub marker: Option<Marker>,
    /// Why the coefficient is missing (zero variance, too few users).
    pub undefined: Option<String>,
}

impl CorrelationCell {
    /// Marker shown in the matrix: `0` when not significant or below the
    /// magnitude floor, bracketed above the bold threshold.
    pub fn display(&self) -> String {
        match (self.rho, self.marker) {
            (Some(r), Some(m)) => {
                let shown = r.abs() >= DISPLAY_FLOOR && m.is_significant();
                let sym = if shown { m.symbol() } else { "0" };
                if shown && r.abs() > DISPLAY_BOLD {
                    format!("[{sym}]")
                } else {
                    sym.to_string()
                }
            }
            _ => "n/a".to_string(),
        }
    }
}

/// Spearman correlation of every Twitter feature with every video target,
/// each tested by permutation.
pub fn feature_correlations(
    users: &[&UserFeatures],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<CorrelationCell>> {
    let mut out = Vec::new();
    for (i, feature) in TWITTER_FEATURES.iter().enumerate() {
        for (j, target) in VIDEO_TARGETS.iter().enumerate() {
            let (x, y): (Vec<f64>, Vec<f64>) = users
                .iter()
                .filter_map(|f| video_target(f, target).map(|t| (twitter_feature(f, feature), t)))
                .unzip();
            let s = seed.wrapping_add((i * VIDEO_TARGETS.len() + j) as u64);
            let mut cell = CorrelationCell {
                feature: feature.to_string(),
                target: target.to_string(),
                n: x.len(),
                rho: None,
                tail_percentile: None,
                marker: None,
                undefined: None,
            };
            match perm_test_correlation(&x, &y, permutations, s, exec) {
                Ok(t) => {
                    cell.rho = Some(t.observed);
                    cell.tail_percentile = Some(t.tail_percentile);
                    cell.marker = Some(t.marker);
                }
                Err(e @ (Error::Undefined(_) | Error::InvalidInput(_))) => cell.undefined = Some(e.to_string()),
                Err(e) => return Err(e),
            }
            out.push(cell);
        }
    }
    Ok(out)
}

pub fn correlations_tsv(cells: &[CorrelationCell]) -> String {
    let mut out = String::from("feature\ttarget\tn\trho\ttail_percentile\tmarker\tdisplay\n");
    for c in cells {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            c.feature,
            c.target,
            c.n,
            opt(c.rho),
            opt(c.tail_percentile),
            c.marker.map_or("-", Marker::symbol),
            c.display()
        ));
    }
    out
}

pub fn correlation_matrix_tsv(cells: &[CorrelationCell]) -> String {
    let mut out = String::from("feature");
    for t in VIDEO_TARGETS {
        out.push('\t');
        out.push_str(t);
    }
    out.push('\n');
    for f in TWITTER_FEATURES {
        out.push_str(f);
        for t in VIDEO_TARGETS {
            let cell = cells.iter().find(|c| c.feature == f && c.target == t);
            out.push('\t');
            out.push_str(&cell.map_or("n/a".to_string(), CorrelationCell::display));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaningMean {
    pub leaning: Leaning,
    pub users: usize,
    pub mean_political_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconContrast {
    pub left_matches: u64,
    pub left_users: u64,
    pub right_matches: u64,
    pub right_users: u64,
    pub test: Option<ChiSquareResult>,
    pub undefined: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoliticalReport {
    pub means: Vec<LeaningMean>,
    /// Topic-rank distance between videos shared by left and right users.
    pub topic_rank_distance: Option<RankDistanceResult>,
    pub topic_rank_undefined: Option<String>,
    /// Share of left versus right users whose bio uses a lexicon term.
    pub lexicon: LexiconContrast,
}

pub fn political_report(users: &[&UserFeatures], store: &EventStore, lexicon: &[String]) -> PoliticalReport {
    let means = [Leaning::Left, Leaning::Right, Leaning::Apolitical]
        .into_iter()
        .map(|leaning| {
            let ratios: Vec<f64> = users
                .iter()
                .filter(|f| f.leaning == leaning)
                .filter_map(|f| f.political_ratio)
                .collect();
            LeaningMean {
                leaning,
                users: ratios.len(),
                mean_political_ratio: (!ratios.is_empty()).then(|| mean(&ratios)),
            }
        })
        .collect();

    let by_user = store.events_by_user();
    let topic_counts = |leaning: Leaning| {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for f in users.iter().filter(|f| f.leaning == leaning) {
            for e in by_user.get(&f.user_id).into_iter().flatten() {
                for t in store
                    .videos
                    .get(&e.video_id)
                    .map(|v| v.topics.as_slice())
                    .unwrap_or(&[])
                {
                    *counts.entry(t.clone()).or_default() += 1;
                }
            }
        }
        rank_by_frequency(&counts)
    };
    let (topic_rank_distance, topic_rank_undefined) =
        match rank_distance(&topic_counts(Leaning::Left), &topic_counts(Leaning::Right)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };

    let terms: BTreeSet<String> = lexicon.iter().flat_map(|t| tokenize(t)).collect();
    let count = |leaning: Leaning| {
        let group: Vec<&&UserFeatures> = users.iter().filter(|f| f.leaning == leaning).collect();
        let hits = group
            .iter()
            .filter(|f| {
                store
                    .users
                    .get(&f.user_id)
                    .is_some_and(|u| tokenize(&u.bio).iter().any(|t| terms.contains(t)))
            })
            .count();
        (hits as u64, group.len() as u64)
    };
    let (lk, ln) = count(Leaning::Left);
    let (rk, rn) = count(Leaning::Right);
    let (test, undefined) = match two_proportion_test(lk, ln, rk, rn) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    PoliticalReport {
        means,
        topic_rank_distance,
        topic_rank_undefined,
        lexicon: LexiconContrast {
            left_matches: lk,
            left_users: ln,
            right_matches: rk,
            right_users: rn,
            test,
            undefined,
        },
    }
}

/// `demographics.tsv`, `correlations.tsv`, `correlation_matrix.tsv`,
/// `political.json` and the full results in `stats.json`.
pub fn stats_bundle(
    users: &[&UserFeatures],
    store: &EventStore,
    lexicon: &[String],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Bundle> {
    let contrasts = demographic_contrasts(users, permutations, seed, exec)?;
    let correlations = feature_correlations(users, permutations, seed ^ 0x5157_0000, exec)?;
    let political = political_report(users, store, lexicon);
    let mut b = Bundle::default();
    b.add("demographics.tsv", demographics_tsv(&contrasts));
    b.add("correlations.tsv", correlations_tsv(&correlations));
    b.add("correlation_matrix.tsv", correlation_matrix_tsv(&correlations));
    b.add_json("political.json", &political)?;
    #[derive(Serialize)]
    struct Full<'a> {
        users: usize,
        permutations: usize,
        seed: u64,
        demographics: &'a [GroupContrast],
        correlations: &'a [CorrelationCell],
    }
    b.add_json(
        "stats.json",
        &Full {
            users: users.len(),
            permutations,
            seed,
            demographics: &contrasts,
            correlations: &correlations,
        },
    )?;
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagGrouping {
    Category,
    Group,
    Decile,
}

impl std::str::FromStr for LagGrouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "category" => Ok(LagGrouping::Category),
            "group" => Ok(LagGrouping::Group),
            "decile" => Ok(LagGrouping::Decile),
            other => Err(Error::invalid(format!(
                "unknown lag grouping `{other}` (category, group, decile)"
            ))),
        }
    }
}

fn histogram_tsv(dist: &LagDistribution) -> String {
    let mut out = String::from("lower_seconds\tupper_seconds\tcount\tdensity\n");
    for b in dist.log_histogram(BINS_PER_DECADE) {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", b.lo, b.hi, b.count, b.density));
    }
    out
}

/// Per-category CDFs plus a summary, and the system-wide distribution.
pub fn category_lags(store: &EventStore) -> Result<Bundle> {
    let mut b = Bundle::default();
    let all = LagDistribution::new(store.events.iter().map(|e| e.lag as f64))?;
    if !all.is_empty() {
        b.add("lags/lag_histogram.tsv", histogram_tsv(&all));
        b.add("lags/lag_cdf_all.tsv", cdf_tsv(&all));
    }
    let mut summary = String::from("category\tevents\tmedian_seconds\tq25_seconds\tq75_seconds\n");
    for (c, dist) in category_lag_distributions(store)? {
        let q = |p: f64| dist.quantile(p).map_or("-".to_string(), |v| v.to_string());
        summary.push_str(&format!("{c}\t{}\t{}\t{}\t{}\n", dist.len(), q(0.5), q(0.25), q(0.75)));
        if !dist.is_empty() {
            b.add(format!("lags/lag_cdf_{}.tsv", c.slug()), cdf_tsv(&dist));
        }
    }
    b.add("lags/categories.tsv", summary);
    Ok(b)
}

/// Median-of-medians for account classes and demographic groups. Groups
/// without users are listed with an empty median.
pub fn group_lags(
    store: &EventStore,
    labels: Option<&BTreeMap<UserId, AccountLabel>>,
    features: Option<&[UserFeatures]>,
) -> Result<Bundle> {
    let sharers = store.sharers();
    let mut groups: Vec<(String, Vec<&UserId>)> = vec![("all".into(), sharers.iter().copied().collect())];
    if let Some(labels) = labels {
        for label in [AccountLabel::Promotional, AccountLabel::Regular] {
            let members = sharers
                .iter()
                .copied()
                .filter(|u| labels.get(*u).copied().unwrap_or(AccountLabel::Regular) == label)
                .collect();
            groups.push((label.to_string(), members));
        }
    }
    if let Some(features) = features {
        let population = analysis_population(features, labels);
        for g in DEMOGRAPHIC_GROUPS {
            let members = population
                .iter()
                .filter(|f| in_demographic(f, g) && sharers.contains(&f.user_id))
                .map(|f| &f.user_id)
                .collect();
            groups.push((g.to_string(), members));
        }
    }
    let mut out = String::from("group\tusers\tmedian_lag_seconds\n");
    for (name, members) in &groups {
        let median = if members.is_empty() {
            "-".to_string()
        } else {
            group_median_lag(store, members.iter().copied())?.to_string()
        };
        out.push_str(&format!("{name}\t{}\t{median}\n", members.len()));
    }
    let mut b = Bundle::default();
    b.add("lags/groups.tsv", out);
    Ok(b)
}

/// Activity deciles over regular sharers (all sharers without labels).
pub fn decile_lags(store: &EventStore, labels: Option<&BTreeMap<UserId, AccountLabel>>) -> Result<Bundle> {
    let users: Vec<&UserId> = store
        .sharers()
        .into_iter()
        .filter(|u| labels.is_none_or(|l| l.get(*u) != Some(&AccountLabel::Promotional)))
        .collect();
    let buckets = activity_deciles(store, users)?;
    let mut b = Bundle::default();
    b.add("lags/deciles.tsv", deciles_tsv(&buckets));
    Ok(b)
}

pub fn lags_bundle(
    store: &EventStore,
    by: &[LagGrouping],
    labels: Option<&BTreeMap<UserId, AccountLabel>>,
    features: Option<&[UserFeatures]>,
) -> Result<Bundle> {
    let mut b = Bundle::default();
    for g in by {
        b.extend(match g {
            LagGrouping::Category => category_lags(store)?,
            LagGrouping::Group => group_lags(store, labels, features)?,
            LagGrouping::Decile => decile_lags(store, labels)?,
        });
    }
    Ok(b)
}
