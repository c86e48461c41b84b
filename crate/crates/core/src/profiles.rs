//! Per-user features derived from profiles, friend lists and shares:
//! gender, bio roles, location class, interests, political leaning.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::EventStore;
use crate::model::{Category, SharingEvent, UserId, UserRecord, VideoId, VideoRecord, CATEGORY_COUNT};
use crate::par::{self, Execution};
use crate::videometrics::{user_aggregates, PolarizationParams, UserAggregates, VideoWeighting};

/// Video categories plus the Twitter-only Finance interest.
pub const INTEREST_DIMS: usize = CATEGORY_COUNT + 1;
pub const FINANCE_INDEX: usize = CATEGORY_COUNT;
const FINANCE: &str = "Finance";

const BUNDLED_NAMES: &str = include_str!("../data/names.tsv");
const BUNDLED_GAZETTEER: &str = include_str!("../data/gazetteer.tsv");
const BUNDLED_TOP_CITIES: &str = include_str!("../data/top_cities.txt");
const BUNDLED_DIRECTORY: &str = include_str!("../data/directory.tsv");
const BUNDLED_CATEGORY_MAP: &str = include_str!("../data/category_map.tsv");
const BUNDLED_SEEDS: &str = include_str!("../data/seeds.tsv");
const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Mother,
    Father,
    Student,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Mother, Role::Father, Role::Student];

    fn tokens(self) -> &'static [&'static str] {
        match self {
            Role::Mother => &["mother", "mom", "wife"],
            Role::Father => &["father", "dad", "husband"],
            Role::Student => &["student", "study", "studying"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geo {
    UrbanUs,
    RuralUs,
    UsOther,
    NonUs,
    Unknown,
}

impl Geo {
    pub fn is_us(self) -> bool {
        matches!(self, Geo::UrbanUs | Geo::RuralUs | Geo::UsOther)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaning {
    Left,
    Right,
    Apolitical,
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leaning::Left => "left",
            Leaning::Right => "right",
            Leaning::Apolitical => "apolitical",
        })
    }
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn normalize_key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Non-comment, non-blank lines split on tabs, with 1-based line numbers.
fn table_rows<'a>(file: &str, text: &'a str, min_cols: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() < min_cols {
            return Err(Error::Malformed {
                file: file.into(),
                line: i + 1,
                field: format!("column {}", cols.len() + 1),
                message: format!("expected {min_cols} tab-separated columns"),
            });
        }
        rows.push((i + 1, cols));
    }
    Ok(rows)
}

fn malformed(file: &str, line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Malformed {
        file: file.into(),
        line,
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct NameDictionary(HashMap<String, Gender>);

impl NameDictionary {
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (line, cols) in table_rows(file, text, 2)? {
            let gender = match cols[1].to_lowercase().as_str() {
                "m" | "male" => Gender::Male,
                "f" | "female" => Gender::Female,
                other => return Err(malformed(file, line, "gender", format!("unknown gender `{other}`"))),
            };
            map.insert(cols[0].to_lowercase(), gender);
        }
        Ok(NameDictionary(map))
    }

    pub fn insert(&mut self, name: &str, gender: Gender) {
        self.0.insert(name.to_lowercase(), gender);
    }

    /// All names in alphabetical order.
    pub fn entries(&self) -> Vec<(&str, Gender)> {
        let mut out: Vec<(&str, Gender)> = self.0.iter().map(|(n, g)| (n.as_str(), *g)).collect();
        out.sort();
        out
    }
}

/// Looks up the first whitespace-separated token of the display name.
pub fn infer_gender(display_name: &str, names: &NameDictionary) -> Gender {
    display_name
        .split_whitespace()
        .next()
        .and_then(|t| names.0.get(&t.to_lowercase()).copied())
        .unwrap_or(Gender::Unknown)
}

pub fn infer_roles(bio: &str) -> BTreeSet<Role> {
    let tokens: HashSet<String> = tokenize(bio).into_iter().collect();
    Role::ALL
        .into_iter()
        .filter(|r| r.tokens().iter().any(|t| tokens.contains(*t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub country: String,
    pub city: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer(HashMap<String, Place>);

impl Gazetteer {
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (_, cols) in table_rows(file, text, 2)? {
            let city = cols.get(2).filter(|c| !c.is_empty()).map(|c| c.to_string());
            map.insert(
                normalize_key(cols[0]),
                Place {
                    country: cols[1].to_uppercase(),
                    city,
                },
            );
        }
        Ok(Gazetteer(map))
    }

    pub fn insert(&mut self, location: &str, country: &str, city: Option<&str>) {
        self.0.insert(
            normalize_key(location),
            Place {
                country: country.to_uppercase(),
                city: city.map(str::to_string),
            },
        );
    }

    pub fn resolve(&self, location: &str) -> Option<&Place> {
        self.0.get(&normalize_key(location))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TopCities(HashSet<String>);

impl TopCities {
    pub fn parse(text: &str) -> Self {
        TopCities(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(normalize_key)
                .collect(),
        )
    }

    pub fn contains(&self, city: &str) -> bool {
        self.0.contains(&normalize_key(city))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn infer_geo(location_raw: &str, gazetteer: &Gazetteer, top_cities: &TopCities) -> Geo {
    if location_raw.trim().is_empty() {
        return Geo::Unknown;
    }
    match gazetteer.resolve(location_raw) {
        None => Geo::Unknown,
        Some(p) if p.country != "US" => Geo::NonUs,
        Some(Place { city: Some(c), .. }) if top_cities.contains(c) => Geo::UrbanUs,
        Some(Place { city: Some(_), .. }) => Geo::RuralUs,
        Some(_) => Geo::UsOther,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectoryEntry {
    pub handle: String,
    pub interest_tag: String,
    pub prominence: u8,
}

/// Interest directory keyed by lowercased handle.
#[derive(Debug, Clone, Default)]
pub struct Directory(HashMap<String, Vec<(String, u8)>>);

impl Directory {
    pub fn from_entries(entries: impl IntoIterator<Item = DirectoryEntry>) -> Result<Self> {
        let mut map: HashMap<String, Vec<(String, u8)>> = HashMap::new();
        for e in entries {
            if e.prominence > 100 {
                return Err(Error::invalid(format!(
                    "prominence {} of @{} exceeds 100",
                    e.prominence, e.handle
                )));
            }
            let tags = map.entry(e.handle.to_lowercase()).or_default();
            let tag = e.interest_tag.to_lowercase();
            if tags.iter().any(|(t, _)| *t == tag) {
                return Err(Error::DuplicateConflict {
                    kind: "directory entry",
                    id: format!("{}/{}", e.handle, tag),
                });
            }
            tags.push((tag, e.prominence));
        }
        Ok(Directory(map))
    }

    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (line, cols) in table_rows(file, text, 3)? {
            let prominence: u8 = cols[2]
                .parse()
                .ok()
                .filter(|p| *p <= 100)
                .ok_or_else(|| malformed(file, line, "prominence", "expected an integer in [0, 100]"))?;
            entries.push(DirectoryEntry {
                handle: cols[0].trim_start_matches('@').to_string(),
                interest_tag: cols[1].to_string(),
                prominence,
            });
        }
        Self::from_entries(entries)
    }

    pub fn get(&self, handle: &str) -> Option<&[(String, u8)]> {
        self.0.get(&handle.to_lowercase()).map(Vec::as_slice)
    }

    /// Handles with their tags, in handle order.
    pub fn entries(&self) -> Vec<(&str, &[(String, u8)])> {
        let mut out: Vec<(&str, &[(String, u8)])> = self.0.iter().map(|(h, t)| (h.as_str(), t.as_slice())).collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InterestCategory {
    Video(Category),
    Finance,
}

impl InterestCategory {
    pub fn index(self) -> usize {
        match self {
            InterestCategory::Video(c) => c.index(),
            InterestCategory::Finance => FINANCE_INDEX,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InterestCategory::Video(c) => c.name(),
            InterestCategory::Finance => FINANCE,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            FINANCE_INDEX => Some(InterestCategory::Finance),
            _ => Category::from_index(i).map(InterestCategory::Video),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case(FINANCE) {
            Ok(InterestCategory::Finance)
        } else {
            s.parse().map(InterestCategory::Video)
        }
    }
}

/// Many-to-one mapping from directory tags to interest categories.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap(HashMap<String, InterestCategory>);

impl CategoryMap {
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut map = CategoryMap::default();
        for (line, cols) in table_rows(file, text, 2)? {
            let cat = InterestCategory::parse(cols[1]).map_err(|e| malformed(file, line, "category", e.to_string()))?;
            map.insert(cols[0], cat)
                .map_err(|e| malformed(file, line, "interest_tag", e.to_string()))?;
        }
        Ok(map)
    }

    pub fn insert(&mut self, tag: &str, category: InterestCategory) -> Result<()> {
        if category == InterestCategory::Video(Category::Trailers) {
            return Err(Error::invalid("no interest tag may map to Trailers"));
        }
        let tag = tag.to_lowercase();
        match self.0.get(&tag) {
            Some(existing) if *existing != category => Err(Error::invalid(format!(
                "tag `{tag}` maps to both {} and {}",
                existing.name(),
                category.name()
            ))),
            _ => {
                self.0.insert(tag, category);
                Ok(())
            }
        }
    }

    pub fn get(&self, tag: &str) -> Option<InterestCategory> {
        self.0.get(&tag.to_lowercase()).copied()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PoliticalSeeds {
    pub left: HashSet<String>,
    pub right: HashSet<String>,
}

impl PoliticalSeeds {
    pub fn new(left: impl IntoIterator<Item = String>, right: impl IntoIterator<Item = String>) -> Result<Self> {
        let left: HashSet<String> = left.into_iter().map(|h| h.to_lowercase()).collect();
        let right: HashSet<String> = right.into_iter().map(|h| h.to_lowercase()).collect();
        let mut both: Vec<&String> = left.intersection(&right).collect();
        if !both.is_empty() {
            both.sort();
            return Err(Error::invalid(format!("seed handles on both sides: {both:?}")));
        }
        Ok(PoliticalSeeds { left, right })
    }

    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (line, cols) in table_rows(file, text, 2)? {
            let handle = cols[0].trim_start_matches('@').to_string();
            match cols[1].to_lowercase().as_str() {
                "left" | "d" | "democrat" => left.push(handle),
                "right" | "r" | "republican" => right.push(handle),
                other => return Err(malformed(file, line, "side", format!("unknown side `{other}`"))),
            }
        }
        Self::new(left, right)
    }

    pub fn sorted(&self) -> (Vec<&str>, Vec<&str>) {
        fn sort(set: &HashSet<String>) -> Vec<&str> {
            let mut v: Vec<&str> = set.iter().map(String::as_str).collect();
            v.sort();
            v
        }
        (sort(&self.left), sort(&self.right))
    }
}

/// Runtime lookup tables. Each falls back to the bundled default when no
/// override file is present.
#[derive(Debug, Clone)]
pub struct ProfileResources {
    pub names: NameDictionary,
    pub gazetteer: Gazetteer,
    pub top_cities: TopCities,
    pub directory: Directory,
    pub category_map: CategoryMap,
    pub seeds: PoliticalSeeds,
    pub stopwords: HashSet<String>,
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl ProfileResources {
    pub fn bundled() -> Self {
        Self::load(None).expect("bundled resources parse")
    }

    /// Loads `names.tsv`, `gazetteer.tsv`, `top_cities.txt`, `directory.tsv`,
    /// `category_map.tsv`, `seeds.tsv` and `stopwords.txt` from `dir` where present.
    pub fn load(dir: Option<&Path>) -> Result<Self> {
        let read = |name: &str, bundled: &'static str| -> Result<String> {
            match dir.map(|d| d.join(name)).filter(|p| p.exists()) {
                Some(p) => fs::read_to_string(&p).map_err(|e| Error::io(&p, e)),
                None => Ok(bundled.to_string()),
            }
        };
        Ok(ProfileResources {
            names: NameDictionary::parse("names.tsv", &read("names.tsv", BUNDLED_NAMES)?)?,
            gazetteer: Gazetteer::parse("gazetteer.tsv", &read("gazetteer.tsv", BUNDLED_GAZETTEER)?)?,
            top_cities: TopCities::parse(&read("top_cities.txt", BUNDLED_TOP_CITIES)?),
            directory: Directory::parse("directory.tsv", &read("directory.tsv", BUNDLED_DIRECTORY)?)?,
            category_map: CategoryMap::parse("category_map.tsv", &read("category_map.tsv", BUNDLED_CATEGORY_MAP)?)?,
            seeds: PoliticalSeeds::parse("seeds.tsv", &read("seeds.tsv", BUNDLED_SEEDS)?)?,
            stopwords: parse_stopwords(&read("stopwords.txt", BUNDLED_STOPWORDS)?),
        })
    }
}

/// Fixed-length weight vector serialized as a name-to-weight map of its
/// non-zero entries.
macro_rules! sparse_weights {
    ($name:ident, $len:expr, $label:expr, $lookup:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub [f64; $len]);

        impl Default for $name {
            fn default() -> Self {
                $name([0.0; $len])
            }
        }

        impl $name {
            pub fn total(&self) -> f64 {
                self.0.iter().sum()
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|w| *w == 0.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let label: fn(usize) -> &'static str = $label;
                let m: BTreeMap<&str, f64> = self
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(i, w)| (label(i), *w))
                    .collect();
                m.serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let lookup: fn(&str) -> Option<usize> = $lookup;
                let m = BTreeMap::<String, f64>::deserialize(d)?;
                let mut out = [0.0; $len];
                for (k, w) in m {
                    let i = lookup(&k).ok_or_else(|| serde::de::Error::custom(format!("unknown category `{k}`")))?;
                    out[i] = w;
                }
                Ok($name(out))
            }
        }
    };
}

sparse_weights!(
    InterestVector,
    INTEREST_DIMS,
    |i| InterestCategory::from_index(i).expect("in range").name(),
    |k| InterestCategory::parse(k).ok().map(InterestCategory::index)
);

sparse_weights!(
    CategoryDistribution,
    CATEGORY_COUNT,
    |i| Category::from_index(i).expect("in range").name(),
    |k| k.parse::<Category>().ok().map(Category::index)
);

impl CategoryDistribution {
    /// Event-normalized category shares of a user's events; all-zero for no events.
    pub fn from_events(events: &[&SharingEvent], videos: &BTreeMap<VideoId, VideoRecord>) -> Self {
        let mut counts = [0.0; CATEGORY_COUNT];
        let mut n = 0.0;
        for e in events {
            if let Some(v) = videos.get(&e.video_id) {
                counts[v.category.index()] += 1.0;
                n += 1.0;
            }
        }
        if n > 0.0 {
            counts.iter_mut().for_each(|c| *c /= n);
        }
        CategoryDistribution(counts)
    }

    pub fn get(&self, c: Category) -> f64 {
        self.0[c.index()]
    }
}

impl InterestVector {
    pub fn get(&self, c: InterestCategory) -> f64 {
        self.0[c.index()]
    }

    /// The 19 video-category weights, dropping Finance.
    pub fn video_part(&self) -> [f64; CATEGORY_COUNT] {
        let mut out = [0.0; CATEGORY_COUNT];
        out.copy_from_slice(&self.0[..CATEGORY_COUNT]);
        out
    }
}

/// Resolves user ids of sharers and their neighbors to handles.
#[derive(Debug, Clone, Default)]
pub struct HandleIndex(HashMap<UserId, String>);

impl HandleIndex {
    pub fn from_store(store: &EventStore) -> Self {
        let mut map = HashMap::new();
        for n in store.neighbors.values() {
            map.insert(n.user_id.clone(), n.handle.to_lowercase());
        }
        for u in store.users.values() {
            map.insert(u.user_id.clone(), u.handle.to_lowercase());
        }
        HandleIndex(map)
    }

    pub fn insert(&mut self, id: impl Into<UserId>, handle: &str) {
        self.0.insert(id.into(), handle.to_lowercase());
    }

    pub fn get(&self, id: &UserId) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }

    /// Handles of the distinct resolvable ids.
    fn distinct_handles<'a>(&'a self, ids: &'a [UserId]) -> impl Iterator<Item = &'a str> {
        let distinct: BTreeSet<&UserId> = ids.iter().collect();
        distinct.into_iter().filter_map(|id| self.get(id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterestProfile {
    pub weights: InterestVector,
    /// Distinct friends with a positive-prominence, mapped directory entry.
    pub matched_friends: usize,
}

/// Prominence-weighted fraction of directory-matched friends per category.
/// Entries whose tag is unmapped or whose prominence is zero do not count
/// as matches.
pub fn interest_distribution(
    friend_ids: &[UserId],
    handles: &HandleIndex,
    directory: &Directory,
    category_map: &CategoryMap,
) -> InterestProfile {
    let mut weights = [0.0; INTEREST_DIMS];
    let mut matched = 0;
    for handle in handles.distinct_handles(friend_ids) {
        let Some(entries) = directory.get(handle) else { continue };
        let mut hit = false;
        for (tag, prominence) in entries {
            if let (Some(cat), true) = (category_map.get(tag), *prominence > 0) {
                weights[cat.index()] += f64::from(*prominence);
                hit = true;
            }
        }
        matched += usize::from(hit);
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    InterestProfile {
        weights: InterestVector(weights),
        matched_friends: matched,
    }
}

pub fn infer_leaning(friend_ids: &[UserId], handles: &HandleIndex, seeds: &PoliticalSeeds) -> Leaning {
    let (mut left, mut right) = (0usize, 0usize);
    for h in handles.distinct_handles(friend_ids) {
        left += usize::from(seeds.left.contains(h));
        right += usize::from(seeds.right.contains(h));
    }
    match left.cmp(&right) {
        std::cmp::Ordering::Greater => Leaning::Left,
        std::cmp::Ordering::Less => Leaning::Right,
        std::cmp::Ordering::Equal => Leaning::Apolitical,
    }
}

/// Fraction of the user's events whose video is in News & Politics;
/// `None` without events.
pub fn political_ratio(events: &[&SharingEvent], videos: &BTreeMap<VideoId, VideoRecord>) -> Option<f64> {
    let cats: Vec<Category> = events
        .iter()
        .filter_map(|e| videos.get(&e.video_id))
        .map(|v| v.category)
        .collect();
    if cats.is_empty() {
        return None;
    }
    let political = cats.iter().filter(|c| **c == Category::NewsPolitics).count();
    Some(political as f64 / cats.len() as f64)
}

/// Profile counters echoed from the user record, plus the mean follower
/// count of the user's resolvable followers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub followers_count: u64,
    pub friends_count: u64,
    pub tweet_count: u64,
    pub retweet_fraction: f64,
    pub url_fraction: f64,
    pub youtube_url_fraction: f64,
    pub hashtag_fraction: f64,
    pub mentioned_user_count: u64,
    pub retweeted_tweet_fraction: f64,
    pub mean_nonzero_retweet_count: f64,
    pub mean_followers_of_followers: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub user_id: UserId,
    pub gender: Gender,
    pub roles: BTreeSet<Role>,
    pub geo: Geo,
    pub interests: InterestVector,
    pub matched_friends: usize,
    pub leaning: Leaning,
    pub political_ratio: Option<f64>,
    pub active_for_clustering: bool,
    pub behavior: Behavior,
    pub shares: UserAggregates,
    pub categories: CategoryDistribution,
}

impl UserFeatures {
    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub polarization: PolarizationParams,
    pub weighting: VideoWeighting,
    pub min_videos_for_clustering: usize,
    pub min_matched_friends: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            polarization: PolarizationParams::default(),
            weighting: VideoWeighting::default(),
            min_videos_for_clustering: 10,
            min_matched_friends: 10,
        }
    }
}

/// Follower counts looked up for each distinct resolvable id.
pub(crate) fn follower_counts<'a>(ids: &'a [UserId], store: &'a EventStore) -> impl Iterator<Item = u64> + 'a {
    let distinct: BTreeSet<&UserId> = ids.iter().collect();
    distinct.into_iter().filter_map(|id| {
        store
            .users
            .get(id)
            .map(|u| u.followers_count)
            .or_else(|| store.neighbors.get(id).map(|n| n.followers_count))
    })
}

fn behavior(user: &UserRecord, store: &EventStore) -> Behavior {
    let fof: Vec<u64> = follower_counts(&user.follower_ids, store).collect();
    Behavior {
        followers_count: user.followers_count,
        friends_count: user.friends_count,
        tweet_count: user.tweet_count,
        retweet_fraction: user.retweet_fraction,
        url_fraction: user.url_fraction,
        youtube_url_fraction: user.youtube_url_fraction,
        hashtag_fraction: user.hashtag_fraction,
        mentioned_user_count: user.mentioned_user_count,
        retweeted_tweet_fraction: user.retweeted_tweet_fraction,
        mean_nonzero_retweet_count: user.mean_nonzero_retweet_count,
        mean_followers_of_followers: (!fof.is_empty())
            .then(|| fof.iter().map(|&f| f as f64).sum::<f64>() / fof.len() as f64),
    }
}

/// One feature row per user with at least one event, in user-id order.
pub fn extract_features(
    store: &EventStore,
    resources: &ProfileResources,
    config: &FeatureConfig,
    exec: Execution,
) -> Result<Vec<UserFeatures>> {
    config.polarization.validate()?;
    let handles = HandleIndex::from_store(store);
    let by_user: Vec<(&UserId, Vec<&SharingEvent>)> = store.events_by_user().into_iter().collect();
    let missing: Vec<String> = by_user
        .iter()
        .filter(|(id, _)| !store.users.contains_key(*id))
        .map(|(id, _)| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownUsers(missing));
    }
    let rows = par::map(exec, &by_user, |(id, events)| {
        let user = &store.users[*id];
        let interests = interest_distribution(
            &user.friend_ids,
            &handles,
            &resources.directory,
            &resources.category_map,
        );
        let shares = user_aggregates(events, &store.videos, &config.polarization, config.weighting)?;
        Ok(UserFeatures {
            user_id: (*id).clone(),
            gender: infer_gender(&user.display_name, &resources.names),
            roles: infer_roles(&user.bio),
            geo: infer_geo(&user.location_raw, &resources.gazetteer, &resources.top_cities),
            active_for_clustering: shares.num_videos_shared >= config.min_videos_for_clustering
                && interests.matched_friends >= config.min_matched_friends,
            interests: interests.weights,
            matched_friends: interests.matched_friends,
            leaning: infer_leaning(&user.friend_ids, &handles, &resources.seeds),
            political_ratio: political_ratio(events, &store.videos),
            behavior: behavior(user, store),
            categories: CategoryDistribution::from_events(events, &store.videos),
            shares,
        })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dict() -> NameDictionary {
        let mut d = NameDictionary::default();
        d.insert("john", Gender::Male);
        d.insert("mary", Gender::Female);
        d
    }

    #[test]
    fn gender_uses_exact_first_token() {
        assert_eq!(infer_gender("John Smith", &dict()), Gender::Male);
        assert_eq!(infer_gender("Xq7 Bot", &dict()), Gender::Unknown);
        assert_eq!(infer_gender("mary-jane d.", &dict()), Gender::Unknown);
        assert_eq!(infer_gender("", &dict()), Gender::Unknown);
    }

    #[test]
    fn roles_match_whole_tokens() {
        assert_eq!(infer_roles("proud mom of two"), BTreeSet::from([Role::Mother]));
        assert_eq!(
            infer_roles("studying CS; husband"),
            BTreeSet::from([Role::Father, Role::Student])
        );
        assert!(infer_roles("motherboard enthusiast").is_empty());
        assert_eq!(infer_roles("Mom's taxi"), BTreeSet::from([Role::Mother]));
    }

    #[test]
    fn geo_classes() {
        let r = ProfileResources::bundled();
        let geo = |s| infer_geo(s, &r.gazetteer, &r.top_cities);
        assert_eq!(geo("Chicago, IL"), Geo::UrbanUs);
        assert_eq!(geo("Peoria, IL"), Geo::RuralUs);
        assert_eq!(geo("USA"), Geo::UsOther);
        assert_eq!(geo("London"), Geo::NonUs);
        assert_eq!(geo(""), Geo::Unknown);
        assert_eq!(geo("somewhere over the rainbow"), Geo::Unknown);
        assert_eq!(r.top_cities.len(), 100);
    }

    fn directory(entries: &[(&str, &str, u8)]) -> Directory {
        Directory::from_entries(entries.iter().map(|(h, t, p)| DirectoryEntry {
            handle: h.to_string(),
            interest_tag: t.to_string(),
            prominence: *p,
        }))
        .unwrap()
    }

    fn handles(pairs: &[(&str, &str)]) -> HandleIndex {
        let mut h = HandleIndex::default();
        for (id, handle) in pairs {
            h.insert(*id, handle);
        }
        h
    }

    #[test]
    fn interest_weights() {
        let r = ProfileResources::bundled();
        let dir = directory(&[("espn", "sports", 99), ("x", "music", 33)]);
        let h = handles(&[("1", "ESPN"), ("2", "x"), ("3", "nobody")]);

        let one = interest_distribution(&["1".into()], &h, &dir, &r.category_map);
        assert_eq!(one.weights.get(InterestCategory::Video(Category::Sports)), 1.0);
        assert_eq!(one.matched_friends, 1);

        let two = interest_distribution(&["1".into(), "2".into(), "3".into()], &h, &dir, &r.category_map);
        assert!((two.weights.get(InterestCategory::Video(Category::Sports)) - 0.75).abs() < 1e-15);
        assert!((two.weights.get(InterestCategory::Video(Category::Music)) - 0.25).abs() < 1e-15);
        assert_eq!(two.matched_friends, 2);

        let none = interest_distribution(&["3".into()], &h, &dir, &r.category_map);
        assert!(none.weights.is_zero());
        assert_eq!(none.matched_friends, 0);
    }

    #[test]
    fn directory_rejects_duplicates_and_large_prominence() {
        assert!(Directory::parse("d", "a\tsports\t1\nA\tSports\t2\n").is_err());
        assert!(Directory::parse("d", "a\tsports\t101\n").is_err());
    }

    #[test]
    fn category_map_rules() {
        let r = ProfileResources::bundled();
        assert_eq!(
            r.category_map.get("nfl"),
            Some(InterestCategory::Video(Category::Sports))
        );
        assert_eq!(r.category_map.get("banking"), Some(InterestCategory::Finance));
        assert!(CategoryMap::parse("m", "x\tTrailers\n").is_err());
        assert!(CategoryMap::parse("m", "x\tMusic\nx\tSports\n").is_err());
    }

    #[test]
    fn leaning_majority() {
        let seeds = PoliticalSeeds::new(["l1".into(), "l2".into()], ["r1".into()]).unwrap();
        let h = handles(&[("a", "l1"), ("b", "l2"), ("c", "r1")]);
        let ids = |xs: &[&str]| xs.iter().map(|x| UserId::from(*x)).collect::<Vec<_>>();
        assert_eq!(infer_leaning(&ids(&["a", "b", "c"]), &h, &seeds), Leaning::Left);
        assert_eq!(infer_leaning(&ids(&["a", "c"]), &h, &seeds), Leaning::Apolitical);
        assert_eq!(infer_leaning(&ids(&[]), &h, &seeds), Leaning::Apolitical);
        assert_eq!(
            infer_leaning(&ids(&["c", "a", "c", "c"]), &h, &seeds),
            Leaning::Apolitical
        );
        assert!(PoliticalSeeds::new(["x".into()], ["X".into()]).is_err());
    }

    #[test]
    fn bundled_seed_counts() {
        let r = ProfileResources::bundled();
        assert_eq!((r.seeds.left.len(), r.seeds.right.len()), (13, 19));
    }

    #[test]
    fn sparse_vectors_round_trip() {
        let mut v = InterestVector::default();
        v.0[FINANCE_INDEX] = 0.5;
        v.0[Category::Music.index()] = 0.5;
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"Finance":0.5,"Music":0.5}"#);
        assert_eq!(serde_json::from_str::<InterestVector>(&json).unwrap(), v);
    }

    proptest! {
        #[test]
        fn interest_weights_sum_to_one(
            friends in proptest::collection::vec(0usize..8, 0..20),
            proms in proptest::collection::vec(0u8..=100, 8),
        ) {
            let tags = ["sports", "music", "news", "finance", "tech", "comedy", "travel", "unmapped_tag"];
            let entries: Vec<(String, &str, u8)> =
                (0..8).map(|i| (format!("h{i}"), tags[i], proms[i])).collect();
            let dir = Directory::from_entries(entries.iter().map(|(h, t, p)| DirectoryEntry {
                handle: h.clone(), interest_tag: t.to_string(), prominence: *p,
            })).unwrap();
            let mut h = HandleIndex::default();
            for i in 0..8 { h.insert(format!("{i}"), &format!("h{i}")); }
            let ids: Vec<UserId> = friends.iter().map(|i| UserId(i.to_string())).collect();
            let r = ProfileResources::bundled();
            let p = interest_distribution(&ids, &h, &dir, &r.category_map);
            prop_assert!(p.weights.0.iter().all(|w| *w >= 0.0));
            if p.matched_friends > 0 {
                prop_assert!((p.weights.total() - 1.0).abs() < 1e-12);
            } else {
                prop_assert!(p.weights.is_zero());
            }
        }

        #[test]
        fn leaning_ignores_order_and_duplicates(
            friends in proptest::collection::vec(0usize..6, 0..15),
            extra in proptest::collection::vec(0usize..6, 0..5),
        ) {
            let seeds = PoliticalSeeds::new(["s0".into(), "s1".into(), "s2".into()], ["s3".into(), "s4".into()]).unwrap();
            let mut h = HandleIndex::default();
            for i in 0..6 { h.insert(format!("{i}"), &format!("s{i}")); }
            let ids: Vec<UserId> = friends.iter().map(|i| UserId(i.to_string())).collect();
            let mut shuffled: Vec<UserId> = ids.iter().rev().cloned().collect();
            shuffled.extend(extra.iter().filter(|i| friends.contains(i)).map(|i| UserId(i.to_string())));
            prop_assert_eq!(infer_leaning(&ids, &h, &seeds), infer_leaning(&shuffled, &h, &seeds));
        }

        #[test]
        fn roles_and_gender_are_pure(text in "[a-zA-Z ,.;-]{0,40}") {
            prop_assert_eq!(infer_roles(&text), infer_roles(&text));
            prop_assert_eq!(infer_gender(&text, &dict()), infer_gender(&text, &dict()));
        }
    }
}
