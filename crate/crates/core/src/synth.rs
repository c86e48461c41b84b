//! Seeded synthetic datasets with planted parameters, written in the same
//! record formats the ingest stage reads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_jsonl, EventStore, FIRST_WEEK_SECS};
use crate::model::{
    Category, NeighborRecord, SharingEvent, Timestamp, TweetId, UserId, UserRecord, VideoId, VideoRecord,
    SECONDS_PER_DAY, SECONDS_PER_HOUR,
};
use crate::popularity::{attention_vector, floored_ln};
use crate::profiles::{InterestCategory, Leaning, ProfileResources};

/// Exponents of the five attention metrics in model order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub shares: f64,
    pub impact: f64,
    pub exposure: f64,
    pub second_order_exposure: f64,
    pub share_of_voice: f64,
}

impl Exponents {
    pub const REGULAR: Exponents = Exponents {
        shares: 1.083,
        impact: 0.449,
        exposure: 0.096,
        second_order_exposure: 0.118,
        share_of_voice: -0.102,
    };
    pub const PROMOTIONAL: Exponents = Exponents {
        shares: 0.612,
        impact: 0.307,
        exposure: 0.164,
        second_order_exposure: 0.079,
        share_of_voice: 0.030,
    };

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.shares,
            self.impact,
            self.exposure,
            self.second_order_exposure,
            self.share_of_voice,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoliticalMeans {
    pub left: f64,
    pub right: f64,
    pub apolitical: f64,
}

impl PoliticalMeans {
    fn of(&self, l: Leaning) -> f64 {
        match l {
            Leaning::Left => self.left,
            Leaning::Right => self.right,
            Leaning::Apolitical => self.apolitical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub user_count: usize,
    pub video_count: usize,
    /// Includes the events that cleansing will drop.
    pub event_count: usize,
    pub promo_fraction: f64,
    /// Fraction of a promotional user's shares that point at its own channel.
    pub promo_own_share: f64,
    /// Activity multiplier of promotional users relative to regular ones.
    pub promo_activity: f64,
    pub promo_lag_median_hours: f64,
    pub regular_lag_median_hours: f64,
    /// Spread of the log-normal lag in natural-log units.
    pub lag_sigma: f64,
    /// Per-category lag medians overriding the group medians.
    pub category_lag_median_hours: BTreeMap<Category, f64>,
    pub intercept: f64,
    pub regular_exponents: Exponents,
    pub promo_exponents: Exponents,
    /// Standard deviation of the log-views noise.
    pub noise_sigma: f64,
    pub left_fraction: f64,
    pub right_fraction: f64,
    pub political_means: PoliticalMeans,
    /// Fraction of left and right users whose bio carries a partisan term.
    pub slogan_fraction: f64,
    /// Category groups; each user draws most of its shares from one group.
    pub taste_groups: Vec<Vec<Category>>,
    pub taste_concentration: f64,
    pub negative_lag_fraction: f64,
    pub pre_cutoff_fraction: f64,
    #[serde(with = "crate::ingest::date_string")]
    pub start: Timestamp,
    pub upload_span_days: i64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 1,
            user_count: 200,
            video_count: 600,
            event_count: 2000,
            promo_fraction: 0.1,
            promo_own_share: 0.7,
            promo_activity: 3.0,
            promo_lag_median_hours: 18.0,
            regular_lag_median_hours: 38.0,
            lag_sigma: 1.2,
            category_lag_median_hours: BTreeMap::new(),
            intercept: 5.0,
            regular_exponents: Exponents::REGULAR,
            promo_exponents: Exponents::PROMOTIONAL,
            noise_sigma: 1.0,
            left_fraction: 0.2,
            right_fraction: 0.2,
            political_means: PoliticalMeans {
                left: 0.06,
                right: 0.29,
                apolitical: 0.05,
            },
            slogan_fraction: 0.3,
            taste_groups: vec![
                vec![Category::Sports, Category::Gaming, Category::AutosVehicles],
                vec![Category::Music, Category::Entertainment, Category::PeopleBlogs],
                vec![
                    Category::Education,
                    Category::ScienceTechnology,
                    Category::NonprofitsActivism,
                ],
                vec![Category::Comedy, Category::FilmAnimation, Category::HowtoStyle],
            ],
            taste_concentration: 0.8,
            negative_lag_fraction: 0.01,
            pre_cutoff_fraction: 0.02,
            start: 1_325_376_000,
            upload_span_days: 240,
        }
    }
}

impl SyntheticConfig {
    /// Parses a TOML config; unset fields keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SyntheticConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.user_count == 0 || self.video_count == 0 || self.event_count == 0 {
            return bad("user, video and event counts must be positive".into());
        }
        if self.event_count < self.video_count {
            return bad(format!(
                "{} events cannot give each of {} videos a share",
                self.event_count, self.video_count
            ));
        }
        if self.event_count < self.user_count {
            return bad(format!(
                "{} events cannot give each of {} users a share",
                self.event_count, self.user_count
            ));
        }
        for (name, v) in [
            ("promo_fraction", self.promo_fraction),
            ("promo_own_share", self.promo_own_share),
            ("left_fraction", self.left_fraction),
            ("right_fraction", self.right_fraction),
            ("taste_concentration", self.taste_concentration),
            ("slogan_fraction", self.slogan_fraction),
            ("negative_lag_fraction", self.negative_lag_fraction),
            ("pre_cutoff_fraction", self.pre_cutoff_fraction),
            ("political_means.left", self.political_means.left),
            ("political_means.right", self.political_means.right),
            ("political_means.apolitical", self.political_means.apolitical),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.left_fraction + self.right_fraction > 1.0 {
            return bad("left and right fractions exceed 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.lag_sigma >= 0.0) {
            return bad("noise and lag spreads must be non-negative".into());
        }
        let medians = [self.promo_lag_median_hours, self.regular_lag_median_hours];
        if medians
            .iter()
            .chain(self.category_lag_median_hours.values())
            .any(|m| !(*m > 0.0))
        {
            return bad("lag medians must be positive".into());
        }
        if self.promo_activity <= 0.0 || self.upload_span_days <= 0 {
            return bad("promo_activity and upload_span_days must be positive".into());
        }
        if self.taste_groups.is_empty() || self.taste_groups.iter().any(|g| g.is_empty()) {
            return bad("taste groups must be non-empty".into());
        }
        if self.taste_groups.iter().flatten().any(|c| *c == Category::NewsPolitics) {
            return bad("News & Politics is drawn from the political means, not a taste group".into());
        }
        Ok(())
    }

    fn promo_count(&self) -> usize {
        (self.promo_fraction * self.user_count as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSource {
    /// Views follow the planted model over regular users' first-week shares.
    Regular,
    /// Only promotional users shared the video in its first week.
    Promotional,
    /// No first-week share; views are random.
    Unattended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub config: SyntheticConfig,
    pub promo_users: Vec<UserId>,
    /// Own channel of each promotional user.
    pub promo_channels: BTreeMap<UserId, String>,
    pub leanings: BTreeMap<UserId, Leaning>,
    pub taste_groups: BTreeMap<UserId, usize>,
    pub pre_cutoff_videos: Vec<VideoId>,
    pub negative_lag_events: Vec<TweetId>,
    pub view_sources: BTreeMap<VideoId, ViewSource>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub users: Vec<UserRecord>,
    pub videos: Vec<VideoRecord>,
    pub neighbors: Vec<NeighborRecord>,
    pub events: Vec<SharingEvent>,
    pub truth: SyntheticTruth,
}

impl SyntheticData {
    pub fn store(&self) -> Result<EventStore> {
        EventStore::from_records(
            self.users.clone(),
            self.videos.clone(),
            self.neighbors.clone(),
            self.events.clone(),
        )
    }

    /// Writes `users.jsonl`, `videos.jsonl`, `events.jsonl`, `neighbors.jsonl`
    /// and `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("users.jsonl"), &self.users)?;
        write_jsonl(&dir.join("videos.jsonl"), &self.videos)?;
        write_jsonl(&dir.join("events.jsonl"), &self.events)?;
        write_jsonl(&dir.join("neighbors.jsonl"), &self.neighbors)?;
        let truth = serde_json::to_string_pretty(&self.truth)? + "\n";
        let path = dir.join("truth.json");
        fs::write(&path, truth).map_err(|e| Error::io(&path, e))
    }
}

const PROMO_WORDS: [&str; 16] = [
    "spanish", "beats", "gamer", "kitchen", "studio", "vlogs", "crafts", "daily", "garage", "travel", "comedy",
    "fitness", "makeup", "retro", "science", "guitar",
];
const SURNAMES: [&str; 10] = [
    "smith", "jones", "garcia", "lee", "brown", "nguyen", "miller", "davis", "lopez", "clark",
];
const LOCATIONS: [(&str, u32); 10] = [
    ("Chicago, IL", 3),
    ("New York", 3),
    ("Los Angeles, CA", 2),
    ("Peoria, IL", 2),
    ("Bozeman, MT", 1),
    ("USA", 2),
    ("London", 2),
    ("Toronto", 1),
    ("", 4),
    ("somewhere nice", 1),
];
const TASTE_WORDS: [&[&str]; 4] = [
    &["sports", "football", "fan", "gamer", "cars"],
    &["music", "lover", "singer", "concerts", "dance"],
    &["science", "geek", "teacher", "learning", "tech"],
    &["comedy", "films", "diy", "laughs", "artist"],
];
const ROLE_WORDS: [&str; 6] = ["mom", "dad", "student", "wife", "husband", "studying"];
const LEFT_WORDS: [&str; 3] = ["#p2", "progressive", "liberal"];
const RIGHT_WORDS: [&str; 4] = ["#tcot", "conservative", "#teaparty", "patriot"];
const FILLER: [&str; 6] = ["the", "and", "of", "life", "coffee", "love"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Pool {
    Category(Category),
    Own(usize),
}

struct Planned {
    user: usize,
    pool: Pool,
}

fn random_letters(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
}

/// Splits `total` into `weights.len()` counts of at least one each.
fn at_least_one(rng: &mut ChaCha8Rng, total: usize, weights: &[f64]) -> Vec<usize> {
    let mut counts = vec![1; weights.len()];
    let dist = WeightedIndex::new(weights).expect("positive weights");
    for _ in weights.len()..total {
        counts[dist.sample(rng)] += 1;
    }
    counts
}

/// Gives each non-empty pool between one and `demand` videos, `total` in all,
/// roughly in proportion to demand.
fn allocate(demand: &BTreeMap<Pool, usize>, total: usize) -> Result<BTreeMap<Pool, usize>> {
    let pools: Vec<(Pool, usize)> = demand.iter().filter(|(_, d)| **d > 0).map(|(p, d)| (*p, *d)).collect();
    if pools.len() > total {
        return Err(Error::Config(format!(
            "{total} videos cannot cover {} distinct channel/category pools",
            pools.len()
        )));
    }
    let mut alloc: Vec<usize> = vec![1; pools.len()];
    for _ in pools.len()..total {
        let pick = (0..pools.len())
            .filter(|&i| alloc[i] < pools[i].1)
            .max_by(|&a, &b| {
                let ra = pools[a].1 as f64 / alloc[a] as f64;
                let rb = pools[b].1 as f64 / alloc[b] as f64;
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .ok_or_else(|| Error::Config("more videos than events".into()))?;
        alloc[pick] += 1;
    }
    Ok(pools.iter().map(|(p, _)| *p).zip(alloc).collect())
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let resources = ProfileResources::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.user_count;

    // neighbors: directory accounts, political seeds and generic accounts
    let mut neighbors: Vec<NeighborRecord> = Vec::new();
    let mut directory: Vec<(UserId, BTreeSet<Category>)> = Vec::new();
    for (handle, tags) in resources.directory.entries() {
        let id = UserId(format!("dir_{handle}"));
        let cats: BTreeSet<Category> = tags
            .iter()
            .filter_map(|(t, _)| match resources.category_map.get(t) {
                Some(InterestCategory::Video(c)) => Some(c),
                _ => None,
            })
            .collect();
        neighbors.push(NeighborRecord {
            user_id: id.clone(),
            handle: handle.to_string(),
            followers_count: rng.random_range(100_000..5_000_000),
            friends_count: rng.random_range(10..2_000),
        });
        directory.push((id, cats));
    }
    let (left_seeds, right_seeds) = resources.seeds.sorted();
    let seed_ids = |handles: &[&str], neighbors: &mut Vec<NeighborRecord>, rng: &mut ChaCha8Rng| {
        handles
            .iter()
            .map(|h| {
                let id = UserId(format!("seed_{h}"));
                neighbors.push(NeighborRecord {
                    user_id: id.clone(),
                    handle: h.to_string(),
                    followers_count: rng.random_range(50_000..10_000_000),
                    friends_count: rng.random_range(100..5_000),
                });
                id
            })
            .collect::<Vec<_>>()
    };
    let left_ids = seed_ids(&left_seeds, &mut neighbors, &mut rng);
    let right_ids = seed_ids(&right_seeds, &mut neighbors, &mut rng);
    let follower_counts = LogNormal::new(200f64.ln(), 1.5).expect("valid");
    let friend_counts = LogNormal::new(250f64.ln(), 1.0).expect("valid");
    let generic: Vec<UserId> = (0..2 * n + 20)
        .map(|i| {
            let id = UserId(format!("n{i:05}"));
            let friends = if rng.random_bool(0.05) {
                0
            } else {
                friend_counts.sample(&mut rng).round() as u64 + 1
            };
            neighbors.push(NeighborRecord {
                user_id: id.clone(),
                handle: format!("nb{i}{}", random_letters(&mut rng, 3)),
                followers_count: follower_counts.sample(&mut rng).round() as u64,
                friends_count: friends,
            });
            id
        })
        .collect();

    // users
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let promo: BTreeSet<usize> = order[..config.promo_count()].iter().copied().collect();
    let names = resources.names.entries();
    let location_dist = WeightedIndex::new(LOCATIONS.iter().map(|(_, w)| *w)).expect("weights");
    let retweets = LogNormal::new(2f64.ln(), 0.8).expect("valid");
    let mut users = Vec::with_capacity(n);
    let mut leanings = BTreeMap::new();
    let mut tastes = BTreeMap::new();
    let mut taste_of = Vec::with_capacity(n);
    let mut leaning_of = Vec::with_capacity(n);
    let mut promo_channels = BTreeMap::new();
    let mut channel_of: BTreeMap<usize, String> = BTreeMap::new();
    for i in 0..n {
        let id = UserId(format!("u{i:05}"));
        let taste = rng.random_range(0..config.taste_groups.len());
        let r: f64 = rng.random();
        let leaning = if r < config.left_fraction {
            Leaning::Left
        } else if r < config.left_fraction + config.right_fraction {
            Leaning::Right
        } else {
            Leaning::Apolitical
        };
        let (first, _) = *names.choose(&mut rng).expect("bundled names");
        let surname = *SURNAMES.choose(&mut rng).expect("non-empty");
        let handle = if promo.contains(&i) {
            let a = *PROMO_WORDS.choose(&mut rng).expect("non-empty");
            let b = *PROMO_WORDS.choose(&mut rng).expect("non-empty");
            let handle = format!("{a}{b}{i}");
            let channel = if rng.random_bool(0.5) {
                format!("{handle}tv")
            } else {
                format!("the{handle}")
            };
            promo_channels.insert(id.clone(), channel.clone());
            channel_of.insert(i, channel);
            handle
        } else {
            format!("{first}_{}{}", &surname[..3], rng.random_range(10..9999))
        };

        let words = TASTE_WORDS[taste % TASTE_WORDS.len()];
        let mut bio: Vec<&str> = (0..rng.random_range(2..5))
            .map(|_| *words.choose(&mut rng).expect("words"))
            .collect();
        bio.push(FILLER.choose(&mut rng).expect("filler"));
        if rng.random_bool(0.15) {
            bio.push(ROLE_WORDS.choose(&mut rng).expect("roles"));
        }
        let slogans: &[&str] = match leaning {
            Leaning::Left => &LEFT_WORDS,
            Leaning::Right => &RIGHT_WORDS,
            Leaning::Apolitical => &[],
        };
        if !slogans.is_empty() && rng.random_bool(config.slogan_fraction) {
            bio.push(slogans.choose(&mut rng).expect("non-empty"));
        }

        // friends: directory accounts biased to the taste group, seeds per leaning, generic accounts
        let group = &config.taste_groups[taste];
        let weights: Vec<f64> = directory
            .iter()
            .map(|(_, cats)| {
                if cats.iter().any(|c| group.contains(c)) {
                    6.0
                } else {
                    1.0
                }
            })
            .collect();
        let k = rng.random_range(10..=16).min(directory.len());
        let mut friend_ids: Vec<UserId> =
            rand::seq::index::sample_weighted(&mut rng, directory.len(), |j| weights[j], k)
                .expect("positive weights")
                .into_iter()
                .map(|j| directory[j].0.clone())
                .collect();
        let (major, minor) = match leaning {
            Leaning::Left => (rng.random_range(1..=3), Some((&left_ids, &right_ids))),
            Leaning::Right => (rng.random_range(1..=3), Some((&right_ids, &left_ids))),
            Leaning::Apolitical => (rng.random_range(0..=2), None),
        };
        match minor {
            Some((own, other)) => {
                friend_ids.extend(own.choose_multiple(&mut rng, major).cloned());
                let cross = rng.random_range(0..major);
                friend_ids.extend(other.choose_multiple(&mut rng, cross).cloned());
            }
            None => {
                friend_ids.extend(left_ids.choose_multiple(&mut rng, major).cloned());
                friend_ids.extend(right_ids.choose_multiple(&mut rng, major).cloned());
            }
        }
        let generic_friends = rng.random_range(0..5);
        friend_ids.extend(generic.choose_multiple(&mut rng, generic_friends).cloned());
        let follower_total = rng.random_range(1..15);
        let follower_ids: Vec<UserId> = generic.choose_multiple(&mut rng, follower_total).cloned().collect();

        let mut user = UserRecord::new(id.clone(), handle);
        user.display_name = format!("{} {}", capitalize(first), capitalize(surname));
        user.bio = bio.join(" ");
        user.location_raw = LOCATIONS[location_dist.sample(&mut rng)].0.to_string();
        user.followers_count = follower_counts.sample(&mut rng).round() as u64 + follower_ids.len() as u64;
        user.friends_count = friend_counts.sample(&mut rng).round() as u64 + friend_ids.len() as u64;
        user.follower_ids = follower_ids;
        user.friend_ids = friend_ids;
        user.account_created_at = config.start - rng.random_range(30..2_000) * SECONDS_PER_DAY;
        user.tweet_count = rng.random_range(50..20_000);
        user.retweet_fraction = rng.random_range(0.0..0.6);
        user.url_fraction = rng.random_range(0.0..0.8);
        user.youtube_url_fraction = rng.random_range(0.0..0.3);
        user.hashtag_fraction = rng.random_range(0.0..0.5);
        user.mentioned_user_count = rng.random_range(0..500);
        user.retweeted_tweet_fraction = rng.random_range(0.0..0.5);
        user.mean_nonzero_retweet_count = if rng.random_bool(0.2) {
            0.0
        } else {
            1.0 + retweets.sample(&mut rng)
        };
        users.push(user);
        leanings.insert(id.clone(), leaning);
        tastes.insert(id, taste);
        taste_of.push(taste);
        leaning_of.push(leaning);
    }

    // share counts and the pool each share draws from
    let activity = LogNormal::new(0.0, 0.8).expect("valid");
    let weights: Vec<f64> = (0..n)
        .map(|i| activity.sample(&mut rng) * if promo.contains(&i) { config.promo_activity } else { 1.0 })
        .collect();
    let counts = at_least_one(&mut rng, config.event_count, &weights);
    let mut planned = Vec::with_capacity(config.event_count);
    for (u, &c) in counts.iter().enumerate() {
        let group = &config.taste_groups[taste_of[u]];
        for _ in 0..c {
            let pool = if promo.contains(&u) && rng.random_bool(config.promo_own_share) {
                Pool::Own(u)
            } else if rng.random_bool(config.political_means.of(leaning_of[u])) {
                Pool::Category(Category::NewsPolitics)
            } else if rng.random_bool(config.taste_concentration) {
                Pool::Category(*group.choose(&mut rng).expect("non-empty"))
            } else {
                let others: Vec<Category> = Category::ALL
                    .into_iter()
                    .filter(|c| *c != Category::NewsPolitics)
                    .collect();
                Pool::Category(*others.choose(&mut rng).expect("non-empty"))
            };
            planned.push(Planned { user: u, pool });
        }
    }
    planned.shuffle(&mut rng);

    // videos per pool, each getting at least one share
    let mut demand: BTreeMap<Pool, usize> = BTreeMap::new();
    for p in &planned {
        *demand.entry(p.pool).or_default() += 1;
    }
    let alloc = allocate(&demand, config.video_count)?;
    let channels: Vec<String> = (0..30).map(|_| format!("ch{}", random_letters(&mut rng, 7))).collect();
    let span = config.upload_span_days * SECONDS_PER_DAY;
    let mut videos = Vec::with_capacity(config.video_count);
    let mut pool_videos: BTreeMap<Pool, Vec<usize>> = BTreeMap::new();
    let mut pre_cutoff = Vec::new();
    for (pool, count) in &alloc {
        for _ in 0..*count {
            let idx = videos.len();
            let id = VideoId(format!("v{idx:05}"));
            let (uploader, category) = match pool {
                Pool::Own(u) => (channel_of[u].clone(), config.taste_groups[taste_of[*u]][0]),
                Pool::Category(c) => (channels.choose(&mut rng).expect("channels").clone(), *c),
            };
            let early = matches!(pool, Pool::Category(_)) && rng.random_bool(config.pre_cutoff_fraction);
            let upload_ts = if early {
                pre_cutoff.push(id.clone());
                config.start - rng.random_range(SECONDS_PER_DAY..200 * SECONDS_PER_DAY)
            } else {
                config.start + rng.random_range(0..span)
            };
            videos.push(VideoRecord {
                video_id: id,
                uploader_handle: uploader,
                upload_ts,
                views: 0,
                likes: 0,
                dislikes: 0,
                favorites: 0,
                raters: None,
                comments: 0,
                category,
                topics: vec![category.slug().to_string()],
            });
            pool_videos.entry(*pool).or_default().push(idx);
        }
    }

    // events: the first shares of each pool cover its videos, the rest land at random
    let mut seen: BTreeMap<Pool, usize> = BTreeMap::new();
    let mut events = Vec::with_capacity(planned.len());
    let mut negative = Vec::new();
    for (t, p) in planned.iter().enumerate() {
        let vids = &pool_videos[&p.pool];
        let k = seen.entry(p.pool).or_default();
        let v = if *k < vids.len() {
            vids[*k]
        } else {
            *vids.choose(&mut rng).expect("pool has videos")
        };
        *k += 1;
        let video = &videos[v];
        let median_h = config
            .category_lag_median_hours
            .get(&video.category)
            .copied()
            .unwrap_or(if promo.contains(&p.user) {
                config.promo_lag_median_hours
            } else {
                config.regular_lag_median_hours
            });
        let tweet_id = TweetId(format!("t{t:07}"));
        let lag = if rng.random_bool(config.negative_lag_fraction) {
            negative.push(tweet_id.clone());
            -rng.random_range(600..5 * SECONDS_PER_DAY)
        } else {
            let h = LogNormal::new(median_h.ln(), config.lag_sigma)
                .expect("valid")
                .sample(&mut rng);
            ((h * SECONDS_PER_HOUR as f64).round() as i64).max(1)
        };
        events.push(SharingEvent {
            tweet_id,
            user_id: users[p.user].user_id.clone(),
            video_id: video.video_id.clone(),
            tweet_ts: video.upload_ts + lag,
            lag: 0,
        });
    }

    // views from the planted model over first-week attention
    let store = EventStore::from_records(users.clone(), videos.clone(), neighbors.clone(), events.clone())?;
    let promo_ids: BTreeSet<&UserId> = promo.iter().map(|&i| &users[i].user_id).collect();
    let mut first_week: BTreeMap<&VideoId, (Vec<SharingEvent>, Vec<SharingEvent>)> = BTreeMap::new();
    for e in &store.events {
        if (0..=FIRST_WEEK_SECS).contains(&e.lag) {
            let slot = first_week.entry(&e.video_id).or_default();
            if promo_ids.contains(&e.user_id) {
                slot.1.push(e.clone());
            } else {
                slot.0.push(e.clone());
            }
        }
    }
    let noise = Normal::new(0.0, config.noise_sigma).expect("valid");
    let fallback = LogNormal::new(8.0f64, 1.5).expect("valid");
    let mut sources = BTreeMap::new();
    let mut views = Vec::with_capacity(videos.len());
    for v in &videos {
        let slot = first_week.get(&v.video_id);
        let (source, lv) = match slot {
            Some((regular, _)) if !regular.is_empty() => {
                let a = attention_vector(v, regular, &store)?;
                (
                    ViewSource::Regular,
                    model_log_views(config.intercept, &config.regular_exponents, a.metrics()),
                )
            }
            Some((_, promoted)) if !promoted.is_empty() => {
                let a = attention_vector(v, promoted, &store)?;
                (
                    ViewSource::Promotional,
                    model_log_views(config.intercept, &config.promo_exponents, a.metrics()),
                )
            }
            _ => (ViewSource::Unattended, fallback.sample(&mut rng).ln()),
        };
        let lv = if source == ViewSource::Unattended {
            lv
        } else {
            lv + noise.sample(&mut rng)
        };
        views.push(lv.exp().round().min(1e15) as u64);
        sources.insert(v.video_id.clone(), source);
    }
    let jitter = LogNormal::new(0.0, 0.3).expect("valid");
    for (v, views) in videos.iter_mut().zip(views) {
        let vf = views as f64;
        v.views = views;
        v.likes = ((0.5 * vf.powf(0.849) * jitter.sample(&mut rng)).round() as u64).min(views);
        v.dislikes = ((0.05 * vf.powf(0.884) * jitter.sample(&mut rng)).round() as u64).min(views - v.likes);
        v.favorites = (vf * rng.random_range(0.0..0.01)).round() as u64;
        v.comments = (vf * rng.random_range(0.0..0.005)).round() as u64;
    }

    let promo_users: Vec<UserId> = promo.iter().map(|&i| users[i].user_id.clone()).collect();
    Ok(SyntheticData {
        users,
        videos,
        neighbors,
        events,
        truth: SyntheticTruth {
            config: config.clone(),
            promo_users,
            promo_channels,
            leanings,
            taste_groups: tastes,
            pre_cutoff_videos: pre_cutoff,
            negative_lag_events: negative,
            view_sources: sources,
        },
    })
}

fn model_log_views(intercept: f64, exponents: &Exponents, metrics: [f64; 5]) -> f64 {
    intercept
        + exponents
            .as_array()
            .iter()
            .zip(metrics)
            .map(|(b, x)| b * floored_ln(x))
            .sum::<f64>()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
