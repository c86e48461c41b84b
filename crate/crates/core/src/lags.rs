//! Inter-event time (upload-to-share lag) analytics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventStore;
use crate::model::{Category, UserId};
use crate::stats::median;

pub const BINS_PER_DECADE: usize = 10;

/// A sample of non-negative lags in seconds, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LagDistribution {
    sorted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (n * (hi - lo))`, an estimate of P(lag) per second.
    pub density: f64,
}

impl LagDistribution {
    pub fn new(lags: impl IntoIterator<Item = f64>) -> Result<LagDistribution> {
        let mut sorted: Vec<f64> = lags.into_iter().collect();
        if let Some(bad) = sorted.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("lag {bad} is not a non-negative duration")));
        }
        sorted.sort_by(f64::total_cmp);
        Ok(LagDistribution { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn median(&self) -> Option<f64> {
        median(&self.sorted)
    }

    /// Linearly interpolated quantile, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.sorted.is_empty() || !(0.0..=1.0).contains(&q) {
            return None;
        }
        let pos = q * (self.sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        Some(self.sorted[lo] + (self.sorted[hi] - self.sorted[lo]) * frac)
    }

    /// Empirical CDF `F(x) = P(lag <= x)`; `None` for an empty sample.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        if self.sorted.is_empty() {
            return None;
        }
        let below = self.sorted.partition_point(|v| *v <= x);
        Some(below as f64 / self.sorted.len() as f64)
    }

    /// Log-spaced bin edges from 1 s up to the first edge above the maximum.
    /// Lags below one second fall into the first bin.
    pub fn log_edges(&self, bins_per_decade: usize) -> Vec<f64> {
        let max = self.sorted.last().copied().unwrap_or(1.0).max(1.0);
        let top = (max.log10() * bins_per_decade as f64).floor() as usize + 1;
        (0..=top)
            .map(|i| 10f64.powf(i as f64 / bins_per_decade as f64))
            .collect()
    }

    pub fn log_histogram(&self, bins_per_decade: usize) -> Vec<HistogramBin> {
        let edges = self.log_edges(bins_per_decade);
        let n = self.sorted.len() as f64;
        edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let lo_bound = if i == 0 { f64::NEG_INFINITY } else { w[0] };
                let start = self.sorted.partition_point(|v| *v < lo_bound);
                let end = self.sorted.partition_point(|v| *v < w[1]);
                let count = end - start;
                HistogramBin {
                    lo: w[0],
                    hi: w[1],
                    count,
                    density: if n > 0.0 {
                        count as f64 / (n * (w[1] - w[0]))
                    } else {
                        0.0
                    },
                }
            })
            .collect()
    }

    /// `(x, F(x))` on the log-spaced grid.
    pub fn cdf_on_grid(&self, bins_per_decade: usize) -> Vec<(f64, f64)> {
        if self.sorted.is_empty() {
            return Vec::new();
        }
        self.log_edges(bins_per_decade)
            .into_iter()
            .map(|x| (x, self.cdf(x).expect("non-empty")))
            .collect()
    }
}

fn user_lags(store: &EventStore) -> BTreeMap<&UserId, Vec<f64>> {
    let mut out: BTreeMap<&UserId, Vec<f64>> = BTreeMap::new();
    for e in &store.events {
        out.entry(&e.user_id).or_default().push(e.lag as f64);
    }
    out
}

/// Per-user median lag for every sharer.
pub fn per_user_median_lags(store: &EventStore) -> BTreeMap<UserId, f64> {
    user_lags(store)
        .into_iter()
        .map(|(u, lags)| (u.clone(), median(&lags).expect("non-empty")))
        .collect()
}

/// Median over the group's users of each user's median lag.
pub fn group_median_lag<'a>(store: &EventStore, group: impl IntoIterator<Item = &'a UserId>) -> Result<f64> {
    let lags = user_lags(store);
    let mut medians = Vec::new();
    for user in group {
        let l = lags
            .get(user)
            .ok_or_else(|| Error::invalid(format!("user {user} has no events")))?;
        medians.push(median(l).expect("non-empty"));
    }
    median(&medians).ok_or_else(|| Error::invalid("empty user group"))
}

/// Every event lag whose video belongs to `category`.
pub fn category_lag_distribution(store: &EventStore, category: Category) -> Result<LagDistribution> {
    LagDistribution::new(
        store
            .events
            .iter()
            .filter(|e| store.videos.get(&e.video_id).map(|v| v.category) == Some(category))
            .map(|e| e.lag as f64),
    )
}

pub fn category_lag_distributions(store: &EventStore) -> Result<BTreeMap<Category, LagDistribution>> {
    let mut lags: BTreeMap<Category, Vec<f64>> = Category::ALL.iter().map(|c| (*c, Vec::new())).collect();
    for e in &store.events {
        if let Some(v) = store.videos.get(&e.video_id) {
            lags.get_mut(&v.category).expect("all categories").push(e.lag as f64);
        }
    }
    lags.into_iter()
        .map(|(c, l)| Ok((c, LagDistribution::new(l)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileBucket {
    /// 1 = least active.
    pub decile: usize,
    pub users: Vec<UserId>,
    pub min_shares: usize,
    pub max_shares: usize,
    pub median_lag: f64,
}

/// Sizes of `n` items split into `buckets` near-equal parts, remainder to
/// the lowest buckets.
pub fn bucket_sizes(n: usize, buckets: usize) -> Vec<usize> {
    (0..buckets)
        .map(|i| n / buckets + usize::from(i < n % buckets))
        .collect()
}

/// Users ranked by number of shares (ties by id), split into ten buckets;
/// each bucket reports the median of its users' median lags.
pub fn activity_deciles<'a>(
    store: &EventStore,
    users: impl IntoIterator<Item = &'a UserId>,
) -> Result<Vec<DecileBucket>> {
    let lags = user_lags(store);
    let mut ranked = Vec::new();
    for u in users {
        let l = lags
            .get(u)
            .ok_or_else(|| Error::invalid(format!("user {u} has no events")))?;
        ranked.push((l.len(), u, median(l).expect("non-empty")));
    }
    if ranked.len() < 10 {
        return Err(Error::invalid(format!(
            "activity deciles need at least 10 users, got {}",
            ranked.len()
        )));
    }
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    ranked.dedup_by(|a, b| a.1 == b.1);

    let mut out = Vec::with_capacity(10);
    let mut start = 0;
    for (i, size) in bucket_sizes(ranked.len(), 10).into_iter().enumerate() {
        let bucket = &ranked[start..start + size];
        start += size;
        let medians: Vec<f64> = bucket.iter().map(|b| b.2).collect();
        out.push(DecileBucket {
            decile: i + 1,
            users: bucket.iter().map(|b| b.1.clone()).collect(),
            min_shares: bucket.first().map_or(0, |b| b.0),
            max_shares: bucket.last().map_or(0, |b| b.0),
            median_lag: median(&medians).expect("non-empty bucket"),
        });
    }
    Ok(out)
}

pub fn cdf_tsv(dist: &LagDistribution) -> String {
    let mut out = String::from("lag_seconds\tcdf\n");
    for (x, f) in dist.cdf_on_grid(BINS_PER_DECADE) {
        out.push_str(&format!("{x}\t{f}\n"));
    }
    out
}

pub fn deciles_tsv(buckets: &[DecileBucket]) -> String {
    let mut out = String::from("decile\tmedian_lag_seconds\n");
    for b in buckets {
        out.push_str(&format!("{}\t{}\n", b.decile, b.median_lag));
    }
    out
}
