//! Promotional-account detection.
//!
//! A Twitter account is flagged as promotional when it looks like the
//! owner of a YouTube channel whose videos it shares: either the two
//! handles are near-identical, or the handles are similar and the channel
//! dominates the account's (above-average) sharing, or the channel
//! dominates the sharing regardless of the names.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventStore;
use crate::model::UserId;
use crate::par::{self, Execution};

fn normalize_handle(s: &str) -> Vec<char> {
    s.trim().to_lowercase().chars().collect()
}

/// Longest contiguous substring common to both handles after lowercasing
/// and trimming. Ties go to the earliest occurrence in `a`. An empty string
/// is returned when the handles share no character.
pub fn longest_common_substring(a: &str, b: &str) -> Result<String> {
    let a = normalize_handle(a);
    let b = normalize_handle(b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("longest common substring of an empty handle"));
    }
    let (len, end) = lcs_span(&a, &b);
    Ok(a[end - len..end].iter().collect())
}

/// Returns `(length, end index in a)` of the longest common substring.
fn lcs_span(a: &[char], b: &[char]) -> (usize, usize) {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let (mut best, mut best_end) = (0, 0);
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            // strict: the first end position in `a` wins a tie
            if cur[j] > best {
                best = cur[j];
                best_end = i;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best, best_end)
}

/// LCS length relative to the shorter and the longer handle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcsRatios {
    pub short: f64,
    pub long: f64,
}

pub fn lcs_ratios(twitter_handle: &str, channel: &str) -> LcsRatios {
    let a = normalize_handle(twitter_handle);
    let b = normalize_handle(channel);
    if a.is_empty() || b.is_empty() {
        return LcsRatios { short: 0.0, long: 0.0 };
    }
    let (len, _) = lcs_span(&a, &b);
    let len = len as f64;
    LcsRatios {
        short: len / a.len().min(b.len()) as f64,
        long: len / a.len().max(b.len()) as f64,
    }
}

/// Sharing statistics for one (Twitter account, YouTube channel) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub user_id: UserId,
    pub twitter_handle: String,
    pub youtube_channel: String,
    /// Sharing events of this account for videos of this channel.
    pub pair_share_count: u64,
    /// Sharing events of this account over all resolvable channels.
    pub user_total_shares: u64,
    pub lcs_short: f64,
    pub lcs_long: f64,
    pub share_ratio: f64,
}

impl PairStats {
    pub fn new(
        user_id: UserId,
        twitter_handle: &str,
        youtube_channel: &str,
        pair_share_count: u64,
        user_total_shares: u64,
    ) -> PairStats {
        let r = lcs_ratios(twitter_handle, youtube_channel);
        PairStats {
            user_id,
            twitter_handle: twitter_handle.to_string(),
            youtube_channel: youtube_channel.to_string(),
            pair_share_count,
            user_total_shares,
            lcs_short: r.short,
            lcs_long: r.long,
            share_ratio: pair_share_count as f64 / user_total_shares as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatsReport {
    /// Sorted by `(user_id, youtube_channel)`.
    pub pairs: Vec<PairStats>,
    /// Mean total shares per sharer, over every sharer in the store.
    pub mu: f64,
    pub sharers: usize,
    /// Events whose video has no uploader handle.
    pub skipped_unknown_uploader: usize,
}

impl PairStatsReport {
    pub fn by_user(&self) -> BTreeMap<&UserId, &[PairStats]> {
        let mut out = BTreeMap::new();
        let mut start = 0;
        while start < self.pairs.len() {
            let id = &self.pairs[start].user_id;
            let end = start + self.pairs[start..].iter().take_while(|p| &p.user_id == id).count();
            out.insert(id, &self.pairs[start..end]);
            start = end;
        }
        out
    }
}

pub fn compute_pair_stats(store: &EventStore, exec: Execution) -> PairStatsReport {
    let by_user = store.events_by_user();
    let mut skipped = 0;
    let mut counts: Vec<(&UserId, BTreeMap<&str, u64>)> = Vec::with_capacity(by_user.len());
    for (user, events) in &by_user {
        let mut channels: BTreeMap<&str, u64> = BTreeMap::new();
        for e in events {
            match store.videos.get(&e.video_id).map(|v| v.uploader_handle.trim()) {
                Some(h) if !h.is_empty() => *channels.entry(h).or_default() += 1,
                _ => skipped += 1,
            }
        }
        counts.push((user, channels));
    }

    let total_shares: u64 = counts.iter().map(|(_, c)| c.values().sum::<u64>()).sum();
    let mu = if counts.is_empty() {
        0.0
    } else {
        total_shares as f64 / counts.len() as f64
    };

    let per_user = par::map(exec, &counts, |(user, channels)| {
        let handle = store.users.get(*user).map(|u| u.handle.as_str()).unwrap_or_default();
        let total: u64 = channels.values().sum();
        channels
            .iter()
            .map(|(channel, &n)| PairStats::new((*user).clone(), handle, channel, n, total))
            .collect::<Vec<_>>()
    });

    PairStatsReport {
        pairs: per_user.into_iter().flatten().collect(),
        mu,
        sharers: counts.len(),
        skipped_unknown_uploader: skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromoThresholds {
    pub name_match_short: f64,
    pub name_match_long: f64,
    pub similar_short: f64,
    pub similar_long: f64,
    pub similar_ratio: f64,
    pub dominant_ratio: f64,
}

impl Default for PromoThresholds {
    fn default() -> Self {
        PromoThresholds {
            name_match_short: 0.75,
            name_match_long: 0.5,
            similar_short: 0.5,
            similar_long: 0.3,
            similar_ratio: 0.5,
            dominant_ratio: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromoConfig {
    pub thresholds: PromoThresholds,
    pub mu: f64,
}

/// Which rule flagged an account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Handles nearly identical; no activity gate.
    NameMatch = 1,
    /// Similar handles, channel holds the majority of shares, above-average activity.
    SimilarName = 2,
    /// Channel dominates the shares of an above-average account.
    DominantChannel = 3,
}

impl Branch {
    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountLabel {
    Promotional,
    Regular,
}

impl fmt::Display for AccountLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccountLabel::Promotional => "promotional",
            AccountLabel::Regular => "regular",
        })
    }
}

impl FromStr for AccountLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "promotional" | "promo" => Ok(AccountLabel::Promotional),
            "regular" => Ok(AccountLabel::Regular),
            other => Err(Error::invalid(format!("unknown account label `{other}`"))),
        }
    }
}

/// Runs the three rules, in order, against a single pair.
pub fn fire_branch(pair: &PairStats, config: &PromoConfig) -> Option<Branch> {
    let t = &config.thresholds;
    let above_mean = pair.user_total_shares as f64 > config.mu;
    if pair.lcs_short >= t.name_match_short && pair.lcs_long >= t.name_match_long {
        Some(Branch::NameMatch)
    } else if pair.lcs_short >= t.similar_short
        && pair.lcs_long >= t.similar_long
        && pair.share_ratio > t.similar_ratio
        && above_mean
    {
        Some(Branch::SimilarName)
    } else if pair.share_ratio >= t.dominant_ratio && above_mean {
        Some(Branch::DominantChannel)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: AccountLabel,
    pub fired_branch: Option<Branch>,
    /// The firing pair (lowest branch, then channel order) for promotional
    /// accounts; the pair with the highest share ratio otherwise.
    pub pair: Option<PairStats>,
}

/// An account is promotional if any of its pairs fires a rule.
pub fn classify_account(stats: &[PairStats], config: &PromoConfig) -> Classification {
    let fired = stats
        .iter()
        .filter_map(|p| fire_branch(p, config).map(|b| (b, p)))
        .min_by(|(b1, p1), (b2, p2)| b1.cmp(b2).then(p1.youtube_channel.cmp(&p2.youtube_channel)));
    if let Some((branch, pair)) = fired {
        return Classification {
            label: AccountLabel::Promotional,
            fired_branch: Some(branch),
            pair: Some(pair.clone()),
        };
    }
    let best = stats.iter().max_by(|a, b| {
        a.share_ratio
            .total_cmp(&b.share_ratio)
            .then(a.lcs_short.total_cmp(&b.lcs_short))
            .then(b.youtube_channel.cmp(&a.youtube_channel))
    });
    Classification {
        label: AccountLabel::Regular,
        fired_branch: None,
        pair: best.cloned(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountRow {
    pub user_id: UserId,
    pub classification: Classification,
    pub total_shares: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub mu: f64,
    pub rows: BTreeMap<UserId, AccountRow>,
    pub skipped_unknown_uploader: usize,
}

impl Partition {
    pub fn label(&self, user: &UserId) -> Option<AccountLabel> {
        self.rows.get(user).map(|r| r.classification.label)
    }

    pub fn with_label(&self, label: AccountLabel) -> impl Iterator<Item = &UserId> {
        self.rows
            .iter()
            .filter(move |(_, r)| r.classification.label == label)
            .map(|(id, _)| id)
    }

    pub fn labels(&self) -> BTreeMap<UserId, AccountLabel> {
        self.rows
            .iter()
            .map(|(id, r)| (id.clone(), r.classification.label))
            .collect()
    }
}

/// Labels every sharer in the store. Sharers without any resolvable channel
/// are regular.
pub fn partition_users(store: &EventStore, thresholds: &PromoThresholds, exec: Execution) -> Partition {
    let report = compute_pair_stats(store, exec);
    let config = PromoConfig {
        thresholds: *thresholds,
        mu: report.mu,
    };
    let grouped = report.by_user();
    let sharers: Vec<&UserId> = store.sharers().into_iter().collect();
    let rows = par::map(exec, &sharers, |user| {
        let stats = grouped.get(user).copied().unwrap_or(&[]);
        AccountRow {
            user_id: (*user).clone(),
            classification: classify_account(stats, &config),
            total_shares: stats.first().map_or(0, |p| p.user_total_shares),
        }
    });
    Partition {
        mu: report.mu,
        rows: rows.into_iter().map(|r| (r.user_id.clone(), r)).collect(),
        skipped_unknown_uploader: report.skipped_unknown_uploader,
    }
}

const ACCOUNTS_HEADER: &str =
    "user_id\tlabel\tfired_branch\tbest_pair_channel\tlcs_s\tlcs_l\tshare_ratio\ttotal_shares";

pub fn accounts_tsv(partition: &Partition) -> String {
    let mut out = String::from(ACCOUNTS_HEADER);
    out.push('\n');
    for row in partition.rows.values() {
        let c = &row.classification;
        let branch = c.fired_branch.map_or("-".to_string(), |b| b.number().to_string());
        let (channel, s, l, r) = match &c.pair {
            Some(p) => (p.youtube_channel.as_str(), p.lcs_short, p.lcs_long, p.share_ratio),
            None => ("-", 0.0, 0.0, 0.0),
        };
        out.push_str(&format!(
            "{}\t{}\t{branch}\t{channel}\t{s}\t{l}\t{r}\t{}\n",
            row.user_id, c.label, row.total_shares
        ));
    }
    out
}

/// Reads the labels back from an `accounts.tsv` file.
pub fn read_accounts_tsv(path: &Path) -> Result<BTreeMap<UserId, AccountLabel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(id), Some(label)) = (cols.next(), cols.next()) else {
            return Err(Error::Malformed {
                file: path.display().to_string(),
                line: i + 1,
                field: "label".into(),
                message: "expected at least two tab-separated columns".into(),
            });
        };
        let label = label.parse().map_err(|e: Error| Error::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            field: "label".into(),
            message: e.to_string(),
        })?;
        out.insert(UserId::from(id), label);
    }
    Ok(out)
}
