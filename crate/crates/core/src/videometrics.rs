//! Per-video polarization and per-user aggregates over shared videos.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SharingEvent, VideoId, VideoRecord};
use crate::regression::simple_ols;
use crate::stats::{mean, median, population_std};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarizationParams {
    pub like_exponent: f64,
    pub dislike_exponent: f64,
}

impl Default for PolarizationParams {
    fn default() -> Self {
        PolarizationParams {
            like_exponent: 0.849,
            dislike_exponent: 0.884,
        }
    }
}

impl PolarizationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("like_exponent", self.like_exponent),
            ("dislike_exponent", self.dislike_exponent),
        ] {
            if !(v > 0.0 && v < 1.5) {
                return Err(Error::Config(format!("{name} = {v} is outside (0, 1.5)")));
            }
        }
        Ok(())
    }
}

/// Like-dislike product with each factor rescaled by a power of the views:
/// `(L / V^a) * (D / V^b)`.
pub fn polarization(views: u64, likes: u64, dislikes: u64, params: &PolarizationParams) -> Result<f64> {
    if views == 0 {
        return Err(Error::undefined("polarization of a video with zero views"));
    }
    let v = views as f64;
    Ok(likes as f64 / v.powf(params.like_exponent) * (dislikes as f64 / v.powf(params.dislike_exponent)))
}

/// Re-estimates the exponents as the slopes of log-likes and log-dislikes
/// against log-views, over videos where all three counts are positive.
pub fn refit_polarization_exponents<'a>(
    videos: impl IntoIterator<Item = &'a VideoRecord>,
) -> Result<PolarizationParams> {
    let (mut lv, mut ll, mut ld) = (Vec::new(), Vec::new(), Vec::new());
    for v in videos {
        if v.views > 0 && v.likes > 0 && v.dislikes > 0 {
            lv.push((v.views as f64).ln());
            ll.push((v.likes as f64).ln());
            ld.push((v.dislikes as f64).ln());
        }
    }
    Ok(PolarizationParams {
        like_exponent: simple_ols(&lv, &ll)?.slope,
        dislike_exponent: simple_ols(&lv, &ld)?.slope,
    })
}

/// Whether video attributes are aggregated once per distinct video or once
/// per sharing event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoWeighting {
    #[default]
    DistinctVideo,
    PerEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAggregates {
    pub num_events: usize,
    pub num_videos_shared: usize,
    pub median_views: f64,
    /// `None` when every shared video has zero views.
    pub median_polarization: Option<f64>,
    /// Lag statistics in seconds; the deviation divides by `n`.
    pub median_lag: f64,
    pub mean_lag: f64,
    pub lag_stddev: f64,
}

/// Summaries over one user's events. Lags are aggregated per event; views
/// and polarization per `weighting`.
pub fn user_aggregates(
    events: &[&SharingEvent],
    videos: &BTreeMap<VideoId, VideoRecord>,
    params: &PolarizationParams,
    weighting: VideoWeighting,
) -> Result<UserAggregates> {
    if events.is_empty() {
        return Err(Error::invalid("user aggregates need at least one event"));
    }
    let lags: Vec<f64> = events.iter().map(|e| e.lag as f64).collect();
    let distinct: BTreeSet<&VideoId> = events.iter().map(|e| &e.video_id).collect();
    let shared: Vec<&VideoRecord> = match weighting {
        VideoWeighting::DistinctVideo => distinct.iter().filter_map(|id| videos.get(*id)).collect(),
        VideoWeighting::PerEvent => events.iter().filter_map(|e| videos.get(&e.video_id)).collect(),
    };
    let views: Vec<f64> = shared.iter().map(|v| v.views as f64).collect();
    let pols: Vec<f64> = shared
        .iter()
        .filter_map(|v| polarization(v.views, v.likes, v.dislikes, params).ok())
        .collect();
    Ok(UserAggregates {
        num_events: events.len(),
        num_videos_shared: distinct.len(),
        median_views: median(&views).unwrap_or(0.0),
        median_polarization: median(&pols),
        median_lag: median(&lags).expect("non-empty"),
        mean_lag: mean(&lags),
        lag_stddev: population_std(&lags),
    })
}
