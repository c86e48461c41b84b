//! Agglomerative clustering of users by the categories of the videos they
//! share, with per-cluster summaries and the interest-alignment comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventStore;
use crate::model::{Category, UserId, CATEGORY_COUNT};
use crate::par::{self, Execution};
use crate::profiles::{tokenize, Gender, Geo, Leaning, Role, UserFeatures, FINANCE_INDEX};
use crate::stats::{mean, median, perm_test_mean_diff, population_std, Marker};

pub const DEFAULT_K: usize = 8;
pub const TOP_CATEGORIES: usize = 5;
pub const TOP_TERMS: usize = 5;
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster index per input row. Clusters are numbered by their first member.
    pub labels: Vec<usize>,
    pub k: usize,
    /// All pairwise similarities are equal, so any partition is as good.
    pub degenerate: bool,
}

/// Best partner `j > i` of row `i` and its similarity.
#[derive(Clone, Copy)]
struct Best {
    j: usize,
    sim: f64,
}

/// Merges the most similar pair of clusters until `k` remain. Ties go to
/// the pair with the smallest first index, then the smallest second index;
/// rows are expected in member-id order.
pub fn agglomerate(vectors: &[Vec<f64>], k: usize, linkage: Linkage, exec: Execution) -> Result<Clustering> {
    let n = vectors.len();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} users")));
    }
    let rows = par::map_range(exec, n, |i| {
        (0..n).map(|j| cosine(&vectors[i], &vectors[j])).collect::<Vec<f64>>()
    });
    let mut sim: Vec<f64> = rows.into_iter().flatten().collect();
    let degenerate = n < 2 || {
        let first = sim[1];
        (0..n).all(|i| ((i + 1)..n).all(|j| (sim[i * n + j] - first).abs() <= DEGENERATE_TOL))
    };

    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let best_of = |sim: &[f64], active: &[bool], i: usize| -> Option<Best> {
        let mut best: Option<Best> = None;
        for j in (i + 1)..n {
            if active[j] && best.is_none_or(|b| sim[i * n + j] > b.sim) {
                best = Some(Best { j, sim: sim[i * n + j] });
            }
        }
        best
    };
    let mut best: Vec<Option<Best>> = (0..n).map(|i| best_of(&sim, &active, i)).collect();

    for _ in 0..(n - k) {
        let (a, b) = {
            let mut pick: Option<(usize, Best)> = None;
            for (i, bi) in best.iter().enumerate() {
                if let (true, Some(bi)) = (active[i], bi) {
                    if pick.is_none_or(|(_, p)| bi.sim > p.sim) {
                        pick = Some((i, *bi));
                    }
                }
            }
            let (a, bb) = pick.expect("at least two active clusters");
            (a, bb.j)
        };
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let (ca, cb) = (sim[c * n + a], sim[c * n + b]);
            let merged = match linkage {
                Linkage::Average => (sa * ca + sb * cb) / (sa + sb),
                Linkage::Single => ca.max(cb),
                Linkage::Complete => ca.min(cb),
            };
            sim[c * n + a] = merged;
            sim[a * n + c] = merged;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
        best[b] = None;
        best[a] = best_of(&sim, &active, a);
        for c in 0..a {
            if !active[c] {
                continue;
            }
            match best[c] {
                Some(bc) if bc.j == a || bc.j == b => best[c] = best_of(&sim, &active, c),
                Some(bc) if sim[c * n + a] > bc.sim || (sim[c * n + a] == bc.sim && a < bc.j) => {
                    best[c] = Some(Best {
                        j: a,
                        sim: sim[c * n + a],
                    })
                }
                _ => {}
            }
        }
        for c in (a + 1)..b {
            if active[c] && best[c].is_some_and(|bc| bc.j == b) {
                best[c] = best_of(&sim, &active, c);
            }
        }
    }

    let roots: BTreeMap<usize, usize> = owner
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(label, root)| (root, label))
        .collect();
    Ok(Clustering {
        labels: owner.iter().map(|o| roots[o]).collect(),
        k,
        degenerate,
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let comb2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ra: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sa: f64 = ra.values().map(|&c| comb2(c)).sum();
    let sb: f64 = rb.values().map(|&c| comb2(c)).sum();
    let expected = sa * sb / comb2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}

/// Categories whose cluster mean exceeds the overall mean the most,
/// ties by category order.
pub fn discriminative_categories(members: &[&[f64]], all: &[&[f64]], top: usize) -> Vec<(Category, f64)> {
    let col_mean = |rows: &[&[f64]], j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
    let mut scored: Vec<(Category, f64)> = Category::ALL
        .into_iter()
        .map(|c| (c, col_mean(members, c.index()) - col_mean(all, c.index())))
        .collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.truncate(top);
    scored
}

/// The `top` terms by document frequency over the bios, ties by term,
/// padded with `None`.
pub fn top_bio_terms<'a>(
    bios: impl IntoIterator<Item = &'a str>,
    stopwords: &std::collections::HashSet<String>,
    top: usize,
) -> Vec<Option<String>> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for bio in bios {
        let terms: BTreeSet<String> = tokenize(bio).into_iter().filter(|t| !stopwords.contains(t)).collect();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let mut out: Vec<Option<String>> = ranked.into_iter().take(top).map(|(t, _)| Some(t)).collect();
    out.resize(top, None);
    out
}

fn indicator(b: bool) -> Option<f64> {
    Some(if b { 1.0 } else { 0.0 })
}

/// Named numeric columns of a feature row compared across clusters.
/// `None` marks a value that is undefined for this user.
pub fn comparable_features(f: &UserFeatures) -> Vec<(String, Option<f64>)> {
    let b = &f.behavior;
    let mut cols: Vec<(String, Option<f64>)> = vec![
        ("followers".into(), Some(b.followers_count as f64)),
        ("friends".into(), Some(b.friends_count as f64)),
        ("tweets".into(), Some(b.tweet_count as f64)),
        ("retweet_fraction".into(), Some(b.retweet_fraction)),
        ("url_fraction".into(), Some(b.url_fraction)),
        ("youtube_url_fraction".into(), Some(b.youtube_url_fraction)),
        ("hashtag_fraction".into(), Some(b.hashtag_fraction)),
        ("mentioned_users".into(), Some(b.mentioned_user_count as f64)),
        ("retweeted_fraction".into(), Some(b.retweeted_tweet_fraction)),
        ("mean_retweets".into(), Some(b.mean_nonzero_retweet_count)),
        ("median_views".into(), Some(f.shares.median_views)),
        ("median_polarization".into(), f.shares.median_polarization),
        ("median_lag".into(), Some(f.shares.median_lag)),
        ("political_ratio".into(), f.political_ratio),
        ("male".into(), indicator(f.gender == Gender::Male)),
        ("female".into(), indicator(f.gender == Gender::Female)),
        ("mother".into(), indicator(f.has_role(Role::Mother))),
        ("father".into(), indicator(f.has_role(Role::Father))),
        ("student".into(), indicator(f.has_role(Role::Student))),
        ("urban".into(), indicator(f.geo == Geo::UrbanUs)),
        ("rural".into(), indicator(f.geo == Geo::RuralUs)),
        ("us".into(), indicator(f.geo.is_us())),
        ("left".into(), indicator(f.leaning == Leaning::Left)),
        ("right".into(), indicator(f.leaning == Leaning::Right)),
    ];
    for (i, w) in f.interests.0.iter().enumerate() {
        let name = if i == FINANCE_INDEX {
            "Finance"
        } else {
            Category::from_index(i).expect("in range").name()
        };
        cols.push((format!("T {name}"), Some(*w)));
    }
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub feature: String,
    /// Cluster mean minus the mean of the other eligible users.
    pub delta: f64,
    /// Standard deviation over all eligible users.
    pub sigma: f64,
    pub score: f64,
    pub tail_percentile: f64,
    pub marker: Marker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub discriminative: Vec<(Category, f64)>,
    pub top_terms: Vec<Option<String>>,
    /// Deltas significant at the 1% level (two-sided), by decreasing score.
    pub deltas: Vec<FeatureDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub linkage: Linkage,
    pub degenerate: bool,
    pub eligible_users: usize,
    pub assignments: Vec<(UserId, usize)>,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub linkage: Linkage,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: DEFAULT_K,
            linkage: Linkage::Average,
            permutations: crate::stats::DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

/// Clusters the users flagged `active_for_clustering` and summarizes each
/// cluster.
pub fn cluster_users(
    features: &[UserFeatures],
    store: &EventStore,
    stopwords: &std::collections::HashSet<String>,
    config: &ClusterConfig,
    exec: Execution,
) -> Result<ClusterReport> {
    let mut eligible: Vec<&UserFeatures> = features.iter().filter(|f| f.active_for_clustering).collect();
    eligible.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let vectors: Vec<Vec<f64>> = eligible.iter().map(|f| f.categories.0.to_vec()).collect();
    let clustering = agglomerate(&vectors, config.k, config.linkage, exec)?;

    let all_rows: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
    let columns: Vec<Vec<(String, Option<f64>)>> = eligible.iter().map(|f| comparable_features(f)).collect();
    let names: Vec<String> = columns
        .first()
        .map(|c| c.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();

    let mut clusters = Vec::with_capacity(config.k);
    for c in 0..config.k {
        let members: Vec<usize> = (0..eligible.len()).filter(|&i| clustering.labels[i] == c).collect();
        let member_rows: Vec<&[f64]> = members.iter().map(|&i| all_rows[i]).collect();
        let bios = members
            .iter()
            .filter_map(|&i| store.users.get(&eligible[i].user_id))
            .map(|u| u.bio.as_str());

        let mut deltas = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let (mut inside, mut outside, mut all) = (Vec::new(), Vec::new(), Vec::new());
            for (i, row) in columns.iter().enumerate() {
                if let Some(v) = row[j].1 {
                    all.push(v);
                    if clustering.labels[i] == c {
                        inside.push(v);
                    } else {
                        outside.push(v);
                    }
                }
            }
            let sigma = population_std(&all);
            if inside.is_empty() || outside.is_empty() || sigma == 0.0 {
                continue;
            }
            let seed = config.seed ^ ((c as u64) << 32) ^ j as u64;
            let test = perm_test_mean_diff(&inside, &outside, config.permutations, seed, exec)?;
            if test.marker.is_strong() {
                deltas.push(FeatureDelta {
                    feature: name.clone(),
                    delta: test.observed,
                    sigma,
                    score: test.observed.abs() / sigma,
                    tail_percentile: test.tail_percentile,
                    marker: test.marker,
                });
            }
        }
        deltas.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.feature.cmp(&y.feature)));

        clusters.push(ClusterSummary {
            cluster: c,
            size: members.len(),
            discriminative: discriminative_categories(&member_rows, &all_rows, TOP_CATEGORIES),
            top_terms: top_bio_terms(bios, stopwords, TOP_TERMS),
            deltas,
        });
    }

    Ok(ClusterReport {
        k: config.k,
        linkage: config.linkage,
        degenerate: clustering.degenerate,
        eligible_users: eligible.len(),
        assignments: eligible
            .iter()
            .zip(&clustering.labels)
            .map(|(f, l)| (f.user_id.clone(), *l))
            .collect(),
        clusters,
    })
}

pub fn clusters_tsv(report: &ClusterReport) -> String {
    let mut out = String::from("user_id\tcluster\n");
    for (u, c) in &report.assignments {
        out.push_str(&format!("{u}\t{c}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAlignment {
    pub category: Category,
    pub users: usize,
    pub mean_difference: f64,
    pub median_difference: f64,
    /// Per-user `twitter - youtube` values, in user order.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub users: Vec<UserId>,
    pub categories: Vec<CategoryAlignment>,
    /// Categories whose column is all zero in either matrix.
    pub excluded_categories: Vec<Category>,
    /// Users left with an all-zero row on either side.
    pub excluded_users: Vec<UserId>,
}

fn column_normalize(rows: &mut [Vec<f64>], cols: &[usize]) {
    for &j in cols {
        let s: f64 = rows.iter().map(|r| r[j]).sum();
        rows.iter_mut().for_each(|r| r[j] /= s);
    }
}

/// Compares relative interest on Twitter and YouTube: each category column
/// is scaled to sum to 1 over users, then each user row is scaled to sum
/// to 1 over the retained categories.
pub fn interest_alignment(
    users: &[UserId],
    twitter: &[[f64; CATEGORY_COUNT]],
    youtube: &[[f64; CATEGORY_COUNT]],
) -> Result<AlignmentReport> {
    if users.len() != twitter.len() || users.len() != youtube.len() {
        return Err(Error::invalid("alignment inputs differ in length"));
    }
    let col_sum = |m: &[[f64; CATEGORY_COUNT]], j: usize| m.iter().map(|r| r[j]).sum::<f64>();
    let (kept, excluded_categories): (Vec<usize>, Vec<usize>) =
        (0..CATEGORY_COUNT).partition(|&j| col_sum(twitter, j) > 0.0 && col_sum(youtube, j) > 0.0);
    let mut t: Vec<Vec<f64>> = twitter.iter().map(|r| r.to_vec()).collect();
    let mut y: Vec<Vec<f64>> = youtube.iter().map(|r| r.to_vec()).collect();
    column_normalize(&mut t, &kept);
    column_normalize(&mut y, &kept);

    let mut kept_users = Vec::new();
    let mut excluded_users = Vec::new();
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); kept.len()];
    for (i, u) in users.iter().enumerate() {
        let st: f64 = kept.iter().map(|&j| t[i][j]).sum();
        let sy: f64 = kept.iter().map(|&j| y[i][j]).sum();
        if st == 0.0 || sy == 0.0 {
            excluded_users.push(u.clone());
            continue;
        }
        kept_users.push(u.clone());
        for (d, &j) in diffs.iter_mut().zip(&kept) {
            d.push(t[i][j] / st - y[i][j] / sy);
        }
    }
    let categories = kept
        .iter()
        .zip(diffs)
        .map(|(&j, d)| CategoryAlignment {
            category: Category::from_index(j).expect("in range"),
            users: d.len(),
            mean_difference: if d.is_empty() { 0.0 } else { mean(&d) },
            median_difference: median(&d).unwrap_or(0.0),
            differences: d,
        })
        .collect();
    Ok(AlignmentReport {
        users: kept_users,
        categories,
        excluded_categories: excluded_categories
            .into_iter()
            .filter_map(Category::from_index)
            .collect(),
        excluded_users,
    })
}

/// Alignment over users with at least one share and one matched friend.
pub fn alignment_from_features(features: &[UserFeatures]) -> Result<AlignmentReport> {
    let rows: Vec<&UserFeatures> = features
        .iter()
        .filter(|f| f.matched_friends > 0 && f.shares.num_events > 0)
        .collect();
    let users: Vec<UserId> = rows.iter().map(|f| f.user_id.clone()).collect();
    let twitter: Vec<[f64; CATEGORY_COUNT]> = rows.iter().map(|f| f.interests.video_part()).collect();
    let youtube: Vec<[f64; CATEGORY_COUNT]> = rows.iter().map(|f| f.categories.0).collect();
    interest_alignment(&users, &twitter, &youtube)
}

pub fn alignment_tsv(report: &AlignmentReport) -> String {
    let mut out = String::from("category\tusers\tmean_difference\tmedian_difference\n");
    for c in &report.categories {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            c.category, c.users, c.mean_difference, c.median_difference
        ));
    }
    for c in &report.excluded_categories {
        out.push_str(&format!("{c}\t0\texcluded\texcluded\n"));
    }
    out
}
