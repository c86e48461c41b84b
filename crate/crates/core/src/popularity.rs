//! First-week attention metrics, power-law fits and the log-linear
//! substitutes model that forecasts final views.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{first_week_slice, EventStore};
use crate::model::{SharingEvent, Timestamp, UserId, VideoId, VideoRecord, SECONDS_PER_DAY};
use crate::par::{self, Execution};
use crate::regression::{ols, simple_ols};
use crate::stats::{mean, pearson};

pub const POPULAR_VIEWS: f64 = 10_000.0;
pub const MIN_FINAL_VIEW_AGE_SECS: i64 = 30 * SECONDS_PER_DAY;
pub const MIN_POWER_LAW_POINTS: usize = 10;
pub const MIN_MODEL_POINTS: usize = 50;
/// Coefficients with a p-value below this are flagged significant.
pub const SIGNIFICANCE_P: f64 = 1e-9;

/// Regressor names in model order.
pub const METRICS: [&str; 5] = [
    "shares",
    "impact",
    "exposure",
    "second_order_exposure",
    "share_of_voice",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionVector {
    pub video_id: VideoId,
    /// Total first-week shares, counting repeats by the same user.
    pub shares: u64,
    /// Follower counts summed over distinct sharers.
    pub exposure: u64,
    /// Per-sharer mean retweet count, summed over distinct sharers.
    pub impact: f64,
    /// Follower counts of each sharer's listed followers, summed.
    pub second_order_exposure: u64,
    pub share_of_voice: f64,
    pub views: f64,
}

impl AttentionVector {
    /// Regressor values in model order.
    pub fn metrics(&self) -> [f64; 5] {
        [
            self.shares as f64,
            self.impact,
            self.exposure as f64,
            self.second_order_exposure as f64,
            self.share_of_voice,
        ]
    }
}

/// `(followers_count, friends_count)` of a sharer or a neighbor.
fn counts(store: &EventStore, id: &UserId) -> Option<(u64, u64)> {
    store
        .users
        .get(id)
        .map(|u| (u.followers_count, u.friends_count))
        .or_else(|| store.neighbors.get(id).map(|n| (n.followers_count, n.friends_count)))
}

/// Metrics of one video from its first-week events. Followers that cannot
/// be resolved contribute nothing to the second-order sums.
pub fn attention_vector(
    video: &VideoRecord,
    first_week_events: &[SharingEvent],
    store: &EventStore,
) -> Result<AttentionVector> {
    if first_week_events.is_empty() {
        return Err(Error::invalid(format!(
            "video {} has no first-week events",
            video.video_id
        )));
    }
    let sharers: BTreeSet<&UserId> = first_week_events.iter().map(|e| &e.user_id).collect();
    let missing: Vec<String> = sharers
        .iter()
        .filter(|u| !store.users.contains_key(**u))
        .map(|u| u.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownUsers(missing));
    }
    let mut out = AttentionVector {
        video_id: video.video_id.clone(),
        shares: first_week_events.len() as u64,
        exposure: 0,
        impact: 0.0,
        second_order_exposure: 0,
        share_of_voice: 0.0,
        views: video.views as f64,
    };
    for id in sharers {
        let user = &store.users[id];
        out.exposure += user.followers_count;
        out.impact += user.mean_nonzero_retweet_count;
        let followers: BTreeSet<&UserId> = user.follower_ids.iter().collect();
        let resolved: Vec<(u64, u64)> = followers.into_iter().filter_map(|f| counts(store, f)).collect();
        out.second_order_exposure += resolved.iter().map(|(f, _)| f).sum::<u64>();
        let following: Vec<f64> = resolved
            .iter()
            .filter(|(_, fr)| *fr > 0)
            .map(|(_, fr)| *fr as f64)
            .collect();
        if !following.is_empty() {
            out.share_of_voice += user.followers_count as f64 / mean(&following);
        }
    }
    Ok(out)
}

/// Attention vectors of every video with at least one first-week event,
/// in video-id order.
pub fn attention_vectors(store: &EventStore, exec: Execution) -> Result<Vec<AttentionVector>> {
    let slice: Vec<(VideoId, Vec<SharingEvent>)> = first_week_slice(store).into_iter().collect();
    par::map(exec, &slice, |(id, events)| {
        attention_vector(&store.videos[id], events, store)
    })
    .into_iter()
    .collect()
}

/// Keeps vectors whose video was at least `min_age_secs` old at crawl time,
/// so their view counts can be treated as final.
pub fn with_final_views(
    vectors: Vec<AttentionVector>,
    store: &EventStore,
    crawl_ts: Timestamp,
    min_age_secs: i64,
) -> Vec<AttentionVector> {
    vectors
        .into_iter()
        .filter(|v| {
            store
                .videos
                .get(&v.video_id)
                .is_some_and(|r| crawl_ts - r.upload_ts >= min_age_secs)
        })
        .collect()
}

pub fn attention_tsv(vectors: &[AttentionVector]) -> String {
    let mut out = String::from("video_id\tshares\texposure\timpact\tsecond_order_exposure\tshare_of_voice\tviews\n");
    for v in vectors {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            v.video_id, v.shares, v.exposure, v.impact, v.second_order_exposure, v.share_of_voice, v.views
        ));
    }
    out
}

/// Natural log with zeros floored to 1 (so they map to 0). Positive values
/// below 1 keep their true logarithm.
pub fn floored_ln(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Fits `y = c * x^exponent` by least squares in log-log space.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() < MIN_POWER_LAW_POINTS {
        return Err(Error::invalid(format!(
            "power-law fit needs at least {MIN_POWER_LAW_POINTS} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::undefined("power-law fit of non-positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = simple_ols(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: f.slope,
        stderr: f.slope_stderr,
        prefactor: f.intercept.exp(),
        r_squared: f.r_squared,
        n: f.n,
    })
}

/// `bins` edges spaced evenly in log between `lo` and `hi`, both included.
pub fn log_spaced_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && bins >= 1) {
        return Err(Error::invalid("log-spaced edges need 0 < lo < hi and at least one bin"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| (a + (b - a) * i as f64 / bins as f64).exp())
        .collect();
    edges[0] = lo;
    edges[bins] = hi;
    Ok(edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// Geometric midpoint of the edges.
    pub center: f64,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; 0 for a single point.
    pub stderr: f64,
}

/// Mean of `y` within each `[lo, hi)` bin of `x`, the last bin closed.
/// Points outside the edges and empty bins are dropped.
pub fn binned_means(x: &[f64], y: &[f64], edges: &[f64]) -> Vec<Bin> {
    let nb = edges.len().saturating_sub(1);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for (&xi, &yi) in x.iter().zip(y) {
        let Some(last) = edges.last() else { break };
        if nb == 0 || xi < edges[0] || xi > *last {
            continue;
        }
        let b = edges.partition_point(|e| *e <= xi).saturating_sub(1).min(nb - 1);
        groups[b].push(yi);
    }
    groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(i, g)| {
            let n = g.len() as f64;
            let m = mean(&g);
            let stderr = if g.len() > 1 {
                (g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            Bin {
                lo: edges[i],
                hi: edges[i + 1],
                center: (edges[i] * edges[i + 1]).sqrt(),
                count: g.len(),
                mean: m,
                stderr,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: Coefficient,
    /// Exponents in model order: shares, impact, exposure,
    /// second-order exposure, share of voice.
    pub exponents: Vec<Coefficient>,
    pub r_squared: f64,
    pub n: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn exponent(&self, name: &str) -> Option<f64> {
        self.exponents.iter().find(|c| c.name == name).map(|c| c.estimate)
    }

    pub fn log_estimate(&self, v: &AttentionVector) -> f64 {
        self.intercept.estimate
            + self
                .exponents
                .iter()
                .zip(v.metrics())
                .map(|(c, x)| c.estimate * floored_ln(x))
                .sum::<f64>()
    }

    pub fn estimate(&self, v: &AttentionVector) -> f64 {
        self.log_estimate(v).exp()
    }
}

pub(crate) fn design(vectors: &[AttentionVector]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let columns = (0..METRICS.len())
        .map(|j| vectors.iter().map(|v| floored_ln(v.metrics()[j])).collect())
        .collect();
    let y = vectors.iter().map(|v| floored_ln(v.views)).collect();
    (columns, y)
}

/// Least-squares fit of log views on the five log metrics plus an intercept.
pub fn fit_substitutes_model(vectors: &[AttentionVector]) -> Result<FitResult> {
    if vectors.len() < MIN_MODEL_POINTS {
        return Err(Error::invalid(format!(
            "the attention model needs at least {MIN_MODEL_POINTS} videos, got {}",
            vectors.len()
        )));
    }
    let (columns, y) = design(vectors);
    let fit = ols(&METRICS, &columns, &y)?;
    let coef = |j: usize| Coefficient {
        name: fit.names[j].clone(),
        estimate: fit.coefficients[j],
        stderr: fit.stderrs[j],
        p_value: fit.p_values[j],
        significant: fit.p_values[j] < SIGNIFICANCE_P,
    };
    Ok(FitResult {
        intercept: coef(0),
        exponents: (1..fit.names.len()).map(coef).collect(),
        r_squared: fit.r_squared,
        n: fit.n,
        residuals: fit.residuals.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFactor {
    pub metric: String,
    pub fit: PowerLawFit,
    /// Pearson correlation of the logs.
    pub log_pearson: f64,
}

/// Views against each metric alone, over videos where both are positive.
pub fn single_factor_fits(vectors: &[AttentionVector]) -> Vec<(String, Result<SingleFactor>)> {
    METRICS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (x, y): (Vec<f64>, Vec<f64>) = vectors
                .iter()
                .map(|v| (v.metrics()[j], v.views))
                .filter(|(x, y)| *x > 0.0 && *y > 0.0)
                .unzip();
            let result = power_law_fit(&x, &y).and_then(|fit| {
                let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
                let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
                Ok(SingleFactor {
                    metric: name.to_string(),
                    fit,
                    log_pearson: pearson(&lx, &ly)?,
                })
            });
            (name.to_string(), result)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub actual: bool,
    pub predicted: bool,
}

/// Ground truth is popular at `views >= threshold`; the prediction is
/// popular when the estimate is strictly above it.
pub fn classify_popular(fit: &FitResult, vectors: &[AttentionVector], threshold: f64) -> Vec<Labels> {
    vectors
        .iter()
        .map(|v| Labels {
            actual: v.views >= threshold,
            predicted: fit.estimate(v) > threshold,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn from_labels(labels: &[Labels]) -> Self {
        let mut c = Confusion::default();
        for l in labels {
            match (l.actual, l.predicted) {
                (true, true) => c.true_positive += 1,
                (false, true) => c.false_positive += 1,
                (true, false) => c.false_negative += 1,
                (false, false) => c.true_negative += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> Option<f64> {
        let p = self.true_positive + self.false_positive;
        (p > 0).then(|| self.true_positive as f64 / p as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let p = self.true_positive + self.false_negative;
        (p > 0).then(|| self.true_positive as f64 / p as f64)
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn base_rate(&self) -> f64 {
        (self.true_positive + self.false_negative) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_size: usize,
    pub confusion: Confusion,
    pub base_rate: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Set when the fold is left out of the means.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: usize,
    pub seed: u64,
    pub threshold: f64,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_base_rate: f64,
    /// Expected precision and recall of a classifier that predicts a random
    /// permutation of each fold's true labels. Both equal the fold's base
    /// rate, so these are the mean base rate over the counted folds.
    pub random_precision: f64,
    pub random_recall: f64,
    pub outcomes: Vec<FoldOutcome>,
}

/// Fold index of each vector: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// k-fold cross-validation of the popular-video classifier. A fold whose
/// test set holds one class only, or whose model predicts no popular video,
/// is excluded from the precision mean and reported.
pub fn cross_validate(
    vectors: &[AttentionVector],
    k: usize,
    seed: u64,
    threshold: f64,
    exec: Execution,
) -> Result<CrossValidation> {
    if k < 2 || vectors.len() < k {
        return Err(Error::invalid(format!(
            "{k}-fold cross-validation is infeasible on {} videos",
            vectors.len()
        )));
    }
    let fold = fold_assignment(vectors.len(), k, seed);
    let outcomes = par::map_range(exec, k, |f| -> Result<FoldOutcome> {
        let (train, test): (Vec<_>, Vec<_>) = vectors.iter().zip(&fold).partition(|(_, g)| **g != f);
        let train: Vec<AttentionVector> = train.into_iter().map(|(v, _)| v.clone()).collect();
        let test: Vec<AttentionVector> = test.into_iter().map(|(v, _)| v.clone()).collect();
        let model = fit_substitutes_model(&train).map_err(|e| Error::invalid(format!("fold {f}: {e}")))?;
        let confusion = Confusion::from_labels(&classify_popular(&model, &test, threshold));
        let base_rate = confusion.base_rate();
        let excluded = if base_rate == 0.0 || base_rate == 1.0 {
            Some("test fold holds a single class".to_string())
        } else {
            None
        };
        Ok(FoldOutcome {
            fold: f,
            test_size: test.len(),
            precision: excluded.is_none().then(|| confusion.precision()).flatten(),
            recall: excluded.is_none().then(|| confusion.recall()).flatten(),
            confusion,
            base_rate,
            excluded,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let counted: Vec<&FoldOutcome> = outcomes.iter().filter(|o| o.excluded.is_none()).collect();
    let mean_of = |xs: Vec<f64>| (!xs.is_empty()).then(|| mean(&xs));
    let base_rates: Vec<f64> = counted.iter().map(|o| o.base_rate).collect();
    let random = mean_of(base_rates).unwrap_or(f64::NAN);
    Ok(CrossValidation {
        folds: k,
        seed,
        threshold,
        mean_precision: mean_of(counted.iter().filter_map(|o| o.precision).collect()),
        mean_recall: mean_of(counted.iter().filter_map(|o| o.recall).collect()),
        mean_base_rate: mean(&outcomes.iter().map(|o| o.base_rate).collect::<Vec<_>>()),
        random_precision: random,
        random_recall: random,
        outcomes,
    })
}
