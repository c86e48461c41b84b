//! Loading, joining and cleansing the user, video and sharing-event streams.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    parse_timestamp, NeighborRecord, SharingEvent, Timestamp, UserId, UserRecord, VideoId, VideoRecord, SECONDS_PER_DAY,
};
use crate::par::{self, Execution};

pub const FIRST_WEEK_SECS: i64 = 7 * SECONDS_PER_DAY;

/// 2006-01-01T00:00:00Z; the cutoff must lie strictly after it.
const EARLIEST_CUTOFF: Timestamp = 1_136_073_600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleansingConfig {
    /// Videos uploaded before this instant are dropped together with their events.
    #[serde(with = "date_string")]
    pub cutoff: Timestamp,
    pub drop_negative_lags: bool,
    /// Time at which view counts were crawled. Defaults to the latest tweet
    /// in the store.
    pub crawl_ts: Option<Timestamp>,
}

impl Default for CleansingConfig {
    fn default() -> Self {
        CleansingConfig {
            cutoff: 1_325_376_000, // 2012-01-01
            drop_negative_lags: true,
            crawl_ts: None,
        }
    }
}

impl CleansingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff <= EARLIEST_CUTOFF {
            return Err(Error::Config(format!(
                "cutoff {} must be after 2006-01-01",
                crate::model::format_date(self.cutoff)
            )));
        }
        Ok(())
    }
}

pub(crate) mod date_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::{format_date, parse_timestamp, Timestamp};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_date(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedEvent {
    #[serde(flatten)]
    pub event: SharingEvent,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanseReport {
    pub input_events: usize,
    pub negative_lag_events: usize,
    pub pre_cutoff_videos: usize,
    pub pre_cutoff_events: usize,
    pub retained_events: usize,
}

/// Joined, deduplicated records. Events are kept in canonical
/// `(tweet_id, video_id)` order so the store does not depend on input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStore {
    pub users: BTreeMap<UserId, UserRecord>,
    pub videos: BTreeMap<VideoId, VideoRecord>,
    /// Friends and followers of sharers that are not sharers themselves.
    pub neighbors: BTreeMap<UserId, NeighborRecord>,
    pub events: Vec<SharingEvent>,
    pub quarantine: Vec<QuarantinedEvent>,
}

#[derive(Debug, Clone)]
pub struct StreamPaths {
    pub users: PathBuf,
    pub videos: PathBuf,
    pub events: PathBuf,
    pub neighbors: Option<PathBuf>,
}

impl StreamPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let neighbors = dir.join("neighbors.jsonl");
        StreamPaths {
            users: dir.join("users.jsonl"),
            videos: dir.join("videos.jsonl"),
            events: dir.join("events.jsonl"),
            neighbors: neighbors.exists().then_some(neighbors),
        }
    }
}

/// A missing input is the caller's mistake; other read failures are not.
fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::invalid(format!("input {} does not exist", path.display())),
        _ => Error::io(path, e),
    })
}

/// Parses a JSON-lines document. Blank lines are skipped; the first failing
/// line (by line number) is reported.
pub fn parse_jsonl<T>(
    file: &str,
    text: &str,
    exec: Execution,
    validate: impl Fn(&T) -> Result<(), (&'static str, String)> + Sync + Send,
) -> Result<Vec<T>>
where
    T: DeserializeOwned + Send,
{
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let parsed = par::map(exec, &lines, |&(line, raw)| {
        let mut de = serde_json::Deserializer::from_str(raw);
        let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            let field = if path == "." || path.is_empty() {
                missing_field(&message).unwrap_or_else(|| "<record>".into())
            } else {
                path
            };
            Error::Malformed {
                file: file.to_string(),
                line,
                field,
                message,
            }
        })?;
        validate(&value).map_err(|(field, message)| Error::Malformed {
            file: file.to_string(),
            line,
            field: field.to_string(),
            message,
        })?;
        Ok(value)
    });
    parsed.into_iter().collect()
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest.split('`').next()?.to_string())
}

fn dedupe<K: Ord + Clone + ToString, V: PartialEq>(
    kind: &'static str,
    records: Vec<V>,
    key: impl Fn(&V) -> &K,
) -> Result<BTreeMap<K, V>> {
    let mut out = BTreeMap::new();
    for r in records {
        let k = key(&r).clone();
        match out.get(&k) {
            Some(existing) if existing == &r => {}
            Some(_) => {
                return Err(Error::DuplicateConflict {
                    kind,
                    id: k.to_string(),
                })
            }
            None => {
                out.insert(k, r);
            }
        }
    }
    Ok(out)
}

impl EventStore {
    /// Builds a store from already-parsed records: deduplicates ids, joins
    /// events to videos to derive lags and quarantines orphan events.
    pub fn from_records(
        users: Vec<UserRecord>,
        videos: Vec<VideoRecord>,
        neighbors: Vec<NeighborRecord>,
        events: Vec<SharingEvent>,
    ) -> Result<EventStore> {
        let users = dedupe("user", users, |u| &u.user_id)?;
        let videos = dedupe("video", videos, |v| &v.video_id)?;
        let neighbors = dedupe("neighbor", neighbors, |n| &n.user_id)?;

        let mut kept = Vec::with_capacity(events.len());
        let mut quarantine = Vec::new();
        for mut e in events {
            let video = videos.get(&e.video_id);
            let reason = match (users.contains_key(&e.user_id), video.is_some()) {
                (true, true) => None,
                (false, true) => Some("unknown_user"),
                (true, false) => Some("unknown_video"),
                (false, false) => Some("unknown_user_and_video"),
            };
            match (reason, video) {
                (None, Some(v)) => {
                    e.lag = e.tweet_ts - v.upload_ts;
                    kept.push(e);
                }
                (Some(reason), _) => quarantine.push(QuarantinedEvent {
                    event: e,
                    reason: reason.to_string(),
                }),
                (None, None) => unreachable!(),
            }
        }
        kept.sort_by(event_order);
        quarantine.sort_by(|a, b| event_order(&a.event, &b.event));
        Ok(EventStore {
            users,
            videos,
            neighbors,
            events: kept,
            quarantine,
        })
    }

    pub fn orphan_count(&self) -> usize {
        self.quarantine.len()
    }

    /// Events grouped by sharer, each group in canonical order.
    pub fn events_by_user(&self) -> BTreeMap<&UserId, Vec<&SharingEvent>> {
        let mut out: BTreeMap<&UserId, Vec<&SharingEvent>> = BTreeMap::new();
        for e in &self.events {
            out.entry(&e.user_id).or_default().push(e);
        }
        out
    }

    pub fn events_by_video(&self) -> BTreeMap<&VideoId, Vec<&SharingEvent>> {
        let mut out: BTreeMap<&VideoId, Vec<&SharingEvent>> = BTreeMap::new();
        for e in &self.events {
            out.entry(&e.video_id).or_default().push(e);
        }
        out
    }

    /// Users with at least one retained event.
    pub fn sharers(&self) -> BTreeSet<&UserId> {
        self.events.iter().map(|e| &e.user_id).collect()
    }

    pub fn latest_tweet_ts(&self) -> Option<Timestamp> {
        self.events.iter().map(|e| e.tweet_ts).max()
    }

    /// Keeps only the events accepted by `keep`; users and videos are untouched.
    pub fn filter_events(&self, keep: impl Fn(&SharingEvent) -> bool) -> EventStore {
        EventStore {
            users: self.users.clone(),
            videos: self.videos.clone(),
            neighbors: self.neighbors.clone(),
            events: self.events.iter().filter(|e| keep(e)).cloned().collect(),
            quarantine: self.quarantine.clone(),
        }
    }

    /// Loads a store directory written by [`EventStore::save_dir`] (or any
    /// directory holding the three input streams).
    pub fn load_dir(dir: &Path, exec: Execution) -> Result<EventStore> {
        let mut store = parse_streams(&StreamPaths::in_dir(dir), exec)?;
        let q = dir.join("quarantine.jsonl");
        if q.exists() {
            let text = read_to_string(&q)?;
            let mut prior: Vec<QuarantinedEvent> = parse_jsonl("quarantine.jsonl", &text, exec, |_| Ok(()))?;
            store.quarantine.append(&mut prior);
            store.quarantine.sort_by(|a, b| event_order(&a.event, &b.event));
            store.quarantine.dedup();
        }
        Ok(store)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("users.jsonl"), self.users.values())?;
        write_jsonl(&dir.join("videos.jsonl"), self.videos.values())?;
        write_jsonl(&dir.join("events.jsonl"), self.events.iter())?;
        write_jsonl(&dir.join("quarantine.jsonl"), self.quarantine.iter())?;
        if !self.neighbors.is_empty() {
            write_jsonl(&dir.join("neighbors.jsonl"), self.neighbors.values())?;
        }
        Ok(())
    }
}

fn event_order(a: &SharingEvent, b: &SharingEvent) -> std::cmp::Ordering {
    (&a.tweet_id, &a.video_id, &a.user_id, a.tweet_ts).cmp(&(&b.tweet_id, &b.video_id, &b.user_id, b.tweet_ts))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Parses the three record streams (and the optional neighbor stream) and
/// joins them into a store. Files are parsed concurrently when `exec` allows.
pub fn parse_streams(paths: &StreamPaths, exec: Execution) -> Result<EventStore> {
    let users_text = read_to_string(&paths.users)?;
    let videos_text = read_to_string(&paths.videos)?;
    let events_text = read_to_string(&paths.events)?;
    let neighbors_text = match &paths.neighbors {
        Some(p) => Some(read_to_string(p)?),
        None => None,
    };
    let name = |p: &Path| {
        p.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };

    let users = parse_jsonl(&name(&paths.users), &users_text, exec, UserRecord::validate)?;
    let videos = parse_jsonl(&name(&paths.videos), &videos_text, exec, VideoRecord::validate)?;
    let events = parse_jsonl(&name(&paths.events), &events_text, exec, |_: &SharingEvent| Ok(()))?;
    let neighbors = match (&paths.neighbors, neighbors_text) {
        (Some(p), Some(text)) => parse_jsonl(&name(p), &text, exec, |_| Ok(()))?,
        _ => Vec::new(),
    };
    EventStore::from_records(users, videos, neighbors, events)
}

/// Drops videos uploaded before the cutoff (with their events), then events
/// whose tweet predates the upload.
pub fn cleanse(store: &EventStore, config: &CleansingConfig) -> Result<(EventStore, CleanseReport)> {
    config.validate()?;
    let mut report = CleanseReport {
        input_events: store.events.len(),
        ..CleanseReport::default()
    };

    let mut videos = BTreeMap::new();
    for (id, v) in &store.videos {
        if v.upload_ts < config.cutoff {
            report.pre_cutoff_videos += 1;
        } else {
            videos.insert(id.clone(), v.clone());
        }
    }

    let mut events = Vec::with_capacity(store.events.len());
    for e in &store.events {
        if !videos.contains_key(&e.video_id) {
            report.pre_cutoff_events += 1;
        } else if config.drop_negative_lags && e.lag < 0 {
            report.negative_lag_events += 1;
        } else {
            events.push(e.clone());
        }
    }
    report.retained_events = events.len();

    let cleansed = EventStore {
        users: store.users.clone(),
        videos,
        neighbors: store.neighbors.clone(),
        events,
        quarantine: store.quarantine.clone(),
    };
    Ok((cleansed, report))
}

/// Events within the closed first-week window `0 <= lag <= 7 days`, by video.
/// Videos without any such event are absent.
pub fn first_week_slice(store: &EventStore) -> BTreeMap<VideoId, Vec<SharingEvent>> {
    let mut out: BTreeMap<VideoId, Vec<SharingEvent>> = BTreeMap::new();
    for e in &store.events {
        if (0..=FIRST_WEEK_SECS).contains(&e.lag) {
            out.entry(e.video_id.clone()).or_default().push(e.clone());
        }
    }
    for events in out.values_mut() {
        events.sort_by(event_order);
    }
    out
}

/// Parses a `--cutoff` style date into a cleansing config.
pub fn config_with_cutoff(cutoff: &str) -> Result<CleansingConfig> {
    let config = CleansingConfig {
        cutoff: parse_timestamp(cutoff)?,
        ..CleansingConfig::default()
    };
    config.validate()?;
    Ok(config)
}
