//! Record types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::Error;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Twitter account id.
    UserId
);
string_id!(
    /// YouTube video id.
    VideoId
);
string_id!(TweetId);

/// UTC epoch seconds.
pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Parses `YYYY-MM-DD`, RFC 3339, `YYYY-MM-DD HH:MM:SS` (UTC) or a bare
/// integer of epoch seconds.
pub fn parse_timestamp(s: &str) -> Result<Timestamp, Error> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc).timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Ok(Utc.from_utc_datetime(&dt).timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Utc
            .from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight"))
            .timestamp());
    }
    Err(Error::invalid(format!("unrecognised timestamp `{s}`")))
}

pub fn format_date(ts: Timestamp) -> String {
    match Utc.timestamp_opt(ts, 0).single() {
        Some(dt) => dt.format("%Y-%m-%d").to_string(),
        None => ts.to_string(),
    }
}

fn de_timestamp<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(v) => Ok(v),
        Raw::Float(v) if v.fract() == 0.0 => Ok(v as i64),
        Raw::Float(v) => Err(serde::de::Error::custom(format!(
            "timestamp {v} is not a whole number of seconds"
        ))),
        Raw::Text(s) => parse_timestamp(&s).map_err(serde::de::Error::custom),
    }
}

/// The 19 YouTube video categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    FilmAnimation,
    AutosVehicles,
    Music,
    PetsAnimals,
    Sports,
    TravelEvents,
    Gaming,
    PeopleBlogs,
    Comedy,
    Entertainment,
    NewsPolitics,
    HowtoStyle,
    Education,
    ScienceTechnology,
    NonprofitsActivism,
    Movies,
    Shows,
    Trailers,
    SciFiFantasy,
}

pub const CATEGORY_COUNT: usize = 19;

impl Category {
    pub const ALL: [Category; CATEGORY_COUNT] = [
        Category::FilmAnimation,
        Category::AutosVehicles,
        Category::Music,
        Category::PetsAnimals,
        Category::Sports,
        Category::TravelEvents,
        Category::Gaming,
        Category::PeopleBlogs,
        Category::Comedy,
        Category::Entertainment,
        Category::NewsPolitics,
        Category::HowtoStyle,
        Category::Education,
        Category::ScienceTechnology,
        Category::NonprofitsActivism,
        Category::Movies,
        Category::Shows,
        Category::Trailers,
        Category::SciFiFantasy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::FilmAnimation => "Film & Animation",
            Category::AutosVehicles => "Autos & Vehicles",
            Category::Music => "Music",
            Category::PetsAnimals => "Pets & Animals",
            Category::Sports => "Sports",
            Category::TravelEvents => "Travel & Events",
            Category::Gaming => "Gaming",
            Category::PeopleBlogs => "People & Blogs",
            Category::Comedy => "Comedy",
            Category::Entertainment => "Entertainment",
            Category::NewsPolitics => "News & Politics",
            Category::HowtoStyle => "Howto & Style",
            Category::Education => "Education",
            Category::ScienceTechnology => "Science & Technology",
            Category::NonprofitsActivism => "Nonprofits & Activism",
            Category::Movies => "Movies",
            Category::Shows => "Shows",
            Category::Trailers => "Trailers",
            Category::SciFiFantasy => "Sci-Fi/Fantasy",
        }
    }

    /// File-name friendly identifier, e.g. `news_politics`.
    pub fn slug(self) -> &'static str {
        match self {
            Category::FilmAnimation => "film_animation",
            Category::AutosVehicles => "autos_vehicles",
            Category::Music => "music",
            Category::PetsAnimals => "pets_animals",
            Category::Sports => "sports",
            Category::TravelEvents => "travel_events",
            Category::Gaming => "gaming",
            Category::PeopleBlogs => "people_blogs",
            Category::Comedy => "comedy",
            Category::Entertainment => "entertainment",
            Category::NewsPolitics => "news_politics",
            Category::HowtoStyle => "howto_style",
            Category::Education => "education",
            Category::ScienceTechnology => "science_technology",
            Category::NonprofitsActivism => "nonprofits_activism",
            Category::Movies => "movies",
            Category::Shows => "shows",
            Category::Trailers => "trailers",
            Category::SciFiFantasy => "scifi_fantasy",
        }
    }

    /// Legacy YouTube API category term.
    fn api_term(self) -> &'static str {
        match self {
            Category::FilmAnimation => "film",
            Category::AutosVehicles => "autos",
            Category::Music => "music",
            Category::PetsAnimals => "animals",
            Category::Sports => "sports",
            Category::TravelEvents => "travel",
            Category::Gaming => "games",
            Category::PeopleBlogs => "people",
            Category::Comedy => "comedy",
            Category::Entertainment => "entertainment",
            Category::NewsPolitics => "news",
            Category::HowtoStyle => "howto",
            Category::Education => "education",
            Category::ScienceTechnology => "tech",
            Category::NonprofitsActivism => "nonprofit",
            Category::Movies => "movies",
            Category::Shows => "shows",
            Category::Trailers => "trailers",
            Category::SciFiFantasy => "scifi",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    /// Accepts the display name, the slug or the legacy API term, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == t || c.slug() == t || c.api_term() == t)
            .ok_or_else(|| Error::invalid(format!("unknown category `{s}`")))
    }
}

impl Serialize for Category {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: UserId,
    pub handle: String,
    #[serde(default)]
    pub display_name: String,
    #[serde(default)]
    pub bio: String,
    #[serde(default)]
    pub location_raw: String,
    pub followers_count: u64,
    pub friends_count: u64,
    /// At most 5,000 entries; `followers_count` may exceed the list length.
    #[serde(default)]
    pub follower_ids: Vec<UserId>,
    #[serde(default)]
    pub friend_ids: Vec<UserId>,
    #[serde(deserialize_with = "de_timestamp", default)]
    pub account_created_at: Timestamp,
    #[serde(default)]
    pub tweet_count: u64,
    #[serde(default)]
    pub retweet_fraction: f64,
    #[serde(default)]
    pub url_fraction: f64,
    #[serde(default)]
    pub youtube_url_fraction: f64,
    #[serde(default)]
    pub hashtag_fraction: f64,
    #[serde(default)]
    pub mentioned_user_count: u64,
    #[serde(default)]
    pub retweeted_tweet_fraction: f64,
    /// Mean retweet count over the user's tweets that were retweeted at least once.
    #[serde(default)]
    pub mean_nonzero_retweet_count: f64,
}

impl UserRecord {
    /// A profile with the given id and handle and every other field zeroed.
    pub fn new(user_id: impl Into<UserId>, handle: impl Into<String>) -> UserRecord {
        UserRecord {
            user_id: user_id.into(),
            handle: handle.into(),
            display_name: String::new(),
            bio: String::new(),
            location_raw: String::new(),
            followers_count: 0,
            friends_count: 0,
            follower_ids: Vec::new(),
            friend_ids: Vec::new(),
            account_created_at: 0,
            tweet_count: 0,
            retweet_fraction: 0.0,
            url_fraction: 0.0,
            youtube_url_fraction: 0.0,
            hashtag_fraction: 0.0,
            mentioned_user_count: 0,
            retweeted_tweet_fraction: 0.0,
            mean_nonzero_retweet_count: 0.0,
        }
    }

    /// Checks field invariants, returning the offending field name on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let fractions = [
            ("retweet_fraction", self.retweet_fraction),
            ("url_fraction", self.url_fraction),
            ("youtube_url_fraction", self.youtube_url_fraction),
            ("hashtag_fraction", self.hashtag_fraction),
            ("retweeted_tweet_fraction", self.retweeted_tweet_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err((name, format!("{v} is outside [0, 1]")));
            }
        }
        let r0 = self.mean_nonzero_retweet_count;
        if !r0.is_finite() || r0 < 0.0 {
            return Err((
                "mean_nonzero_retweet_count",
                format!("{r0} is not a non-negative number"),
            ));
        }
        if self.user_id.0.is_empty() {
            return Err(("user_id", "empty id".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: VideoId,
    #[serde(default)]
    pub uploader_handle: String,
    #[serde(deserialize_with = "de_timestamp")]
    pub upload_ts: Timestamp,
    pub views: u64,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub dislikes: u64,
    #[serde(default)]
    pub favorites: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raters: Option<u64>,
    #[serde(default)]
    pub comments: u64,
    pub category: Category,
    #[serde(default)]
    pub topics: Vec<String>,
}

impl VideoRecord {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.video_id.0.is_empty() {
            return Err(("video_id", "empty id".into()));
        }
        if let Some(raters) = self.raters {
            if self.likes + self.dislikes > raters {
                return Err((
                    "raters",
                    format!(
                        "likes + dislikes = {} exceeds raters = {raters}",
                        self.likes + self.dislikes
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// One tweet sharing one video. A tweet carrying two video ids is two events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingEvent {
    pub tweet_id: TweetId,
    pub user_id: UserId,
    pub video_id: VideoId,
    #[serde(deserialize_with = "de_timestamp")]
    pub tweet_ts: Timestamp,
    /// `tweet_ts - upload_ts` in seconds; filled in when the event is joined
    /// with its video.
    #[serde(default)]
    pub lag: i64,
}

/// Follower/friend counts for an account that is not itself a sampled sharer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub user_id: UserId,
    #[serde(default)]
    pub handle: String,
    pub followers_count: u64,
    pub friends_count: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_in_all_accepted_forms() {
        assert_eq!(parse_timestamp("2012-01-01").unwrap(), 1_325_376_000);
        assert_eq!(parse_timestamp("2012-01-01T00:00:00Z").unwrap(), 1_325_376_000);
        assert_eq!(parse_timestamp("2012-01-01T01:00:00+01:00").unwrap(), 1_325_376_000);
        assert_eq!(parse_timestamp("2012-01-01 00:00:01").unwrap(), 1_325_376_001);
        assert_eq!(parse_timestamp("1325376000").unwrap(), 1_325_376_000);
        assert!(parse_timestamp("yesterday").is_err());
        assert_eq!(format_date(1_325_376_000), "2012-01-01");
    }

    #[test]
    fn category_names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
            assert_eq!(c.slug().parse::<Category>().unwrap(), c);
            assert_eq!(Category::from_index(c.index()), Some(c));
        }
        assert_eq!("News".parse::<Category>().unwrap(), Category::NewsPolitics);
        assert!("Finance".parse::<Category>().is_err());
    }

    #[test]
    fn raters_bound_likes_and_dislikes() {
        let v: VideoRecord = serde_json::from_str(
            r#"{"video_id":"v","upload_ts":"2012-05-01","views":10,"likes":3,"dislikes":2,"raters":4,"category":"Music"}"#,
        )
        .unwrap();
        assert_eq!(v.validate().unwrap_err().0, "raters");
    }
}
