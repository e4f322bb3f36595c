//! Tweet corpus loading, daily hashtag volume and burst detection.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::text::{extract_hashtags, parse_timestamp};

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DayRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("empty day range {start}..{end}")));
        }
        Ok(DayRange { start, end })
    }

    /// `len` consecutive days beginning at `start`. `len` must be at least 1.
    pub fn starting_at(start: NaiveDate, len: usize) -> Self {
        assert!(len >= 1, "day range needs at least one day");
        DayRange {
            start,
            end: start + Duration::days(len as i64 - 1),
        }
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }

    /// Offset of `day` from the start, if inside.
    pub fn index_of(&self, day: NaiveDate) -> Option<usize> {
        self.contains(day)
            .then(|| (day - self.start).num_days() as usize)
    }

    pub fn day(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    pub fn extend_end(&self, days: i64) -> Self {
        DayRange {
            start: self.start,
            end: self.end + Duration::days(days),
        }
    }
}

/// Daily counts over consecutive days; gaps are stored as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start_day: NaiveDate,
    pub values: Vec<u64>,
}

impl TimeSeries {
    pub fn range(&self) -> DayRange {
        DayRange::starting_at(self.start_day, self.values.len())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub day: NaiveDate,
    pub text: String,
    pub user_id: String,
    pub hashtags: Vec<String>,
}

impl Tweet {
    pub fn new(id: &str, day: NaiveDate, text: &str, user_id: &str) -> Self {
        Tweet {
            id: id.to_string(),
            day,
            hashtags: extract_hashtags(text),
            text: text.to_string(),
            user_id: user_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    /// First few rejections as `(line number, reason)`.
    pub sample_rejections: Vec<(usize, String)>,
}

const MAX_SAMPLE_REJECTIONS: usize = 20;

/// Immutable after construction; indexed by hashtag and day.
#[derive(Debug, Clone, Default)]
pub struct TweetCorpus {
    tweets: Vec<Tweet>,
    by_hashtag: HashMap<String, Vec<usize>>,
    days: Option<DayRange>,
}

impl TweetCorpus {
    /// Builds a corpus, keeping the first tweet for each repeated id.
    /// Returns the corpus and the number of duplicates dropped.
    pub fn from_tweets(tweets: impl IntoIterator<Item = Tweet>) -> (Self, usize) {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0;
        for t in tweets {
            if seen.insert(t.id.clone()) {
                kept.push(t);
            } else {
                duplicates += 1;
            }
        }
        let mut by_hashtag: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, t) in kept.iter().enumerate() {
            for h in &t.hashtags {
                by_hashtag.entry(h.clone()).or_default().push(i);
            }
        }
        let days = kept
            .iter()
            .map(|t| t.day)
            .min()
            .zip(kept.iter().map(|t| t.day).max())
            .map(|(start, end)| DayRange { start, end });
        (
            TweetCorpus {
                tweets: kept,
                by_hashtag,
                days,
            },
            duplicates,
        )
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    /// First to last day with any tweet.
    pub fn day_range(&self) -> Option<DayRange> {
        self.days
    }

    /// All hashtags, sorted.
    pub fn hashtags(&self) -> Vec<&str> {
        let mut tags: Vec<&str> = self.by_hashtag.keys().map(String::as_str).collect();
        tags.sort_unstable();
        tags
    }

    pub fn tweets_with(&self, hashtag: &str) -> impl Iterator<Item = &Tweet> {
        self.by_hashtag
            .get(hashtag)
            .into_iter()
            .flatten()
            .map(|&i| &self.tweets[i])
    }

    /// Tweets carrying `hashtag` created inside `range`, in corpus order.
    pub fn tweets_in(&self, hashtag: &str, range: DayRange) -> Vec<&Tweet> {
        self.tweets_with(hashtag)
            .filter(|t| range.contains(t.day))
            .collect()
    }

    pub fn distinct_users(&self, hashtag: &str) -> usize {
        self.tweets_with(hashtag)
            .map(|t| t.user_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }
}

#[derive(Debug, Deserialize)]
struct RawTweet {
    id: Option<String>,
    timestamp: Option<serde_json::Value>,
    text: Option<String>,
    user_id: Option<String>,
}

fn parse_tweet_line(line: &str) -> std::result::Result<Tweet, String> {
    let raw: RawTweet = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = raw.id.ok_or("missing id")?;
    let ts = raw.timestamp.ok_or("missing timestamp")?;
    let text = raw.text.ok_or("missing text")?;
    let user = raw.user_id.ok_or("missing user_id")?;
    let at = parse_timestamp(&ts).ok_or_else(|| format!("bad timestamp {ts}"))?;
    Ok(Tweet::new(&id, at.date_naive(), &text, &user))
}

/// Parses JSON-lines tweet records. Malformed lines are counted and skipped;
/// blank lines are ignored.
pub fn load_tweets<I, S>(lines: I, exec: ExecMode) -> (TweetCorpus, IngestReport)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let lines: Vec<(usize, String)> = lines
        .into_iter()
        .enumerate()
        .filter(|(_, l)| !l.as_ref().trim().is_empty())
        .map(|(i, l)| (i + 1, l.as_ref().to_string()))
        .collect();
    let parsed = exec.map(&lines, |(_, l)| parse_tweet_line(l));

    let mut report = IngestReport::default();
    let mut tweets = Vec::with_capacity(parsed.len());
    for ((lineno, _), res) in lines.iter().zip(parsed) {
        match res {
            Ok(t) => tweets.push(t),
            Err(reason) => {
                report.rejected += 1;
                if report.sample_rejections.len() < MAX_SAMPLE_REJECTIONS {
                    report.sample_rejections.push((*lineno, reason));
                }
            }
        }
    }
    let (corpus, duplicates) = TweetCorpus::from_tweets(tweets);
    report.duplicates = duplicates;
    report.accepted = corpus.len();
    (corpus, report)
}

pub fn load_tweets_file(path: &Path, exec: ExecMode) -> Result<(TweetCorpus, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))?;
    Ok(load_tweets(lines, exec))
}

/// Daily count of tweets carrying `hashtag` over `range`.
pub fn hashtag_series(corpus: &TweetCorpus, hashtag: &str, range: DayRange) -> TimeSeries {
    let mut values = vec![0u64; range.len()];
    for t in corpus.tweets_with(hashtag) {
        if let Some(i) = range.index_of(t.day) {
            values[i] += 1;
        }
    }
    TimeSeries {
        start_day: range.start,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurstConfig {
    /// Floor on the median in the outlier-fraction denominator.
    pub n_min: f64,
    /// Days in the median window; odd so it centres on the day.
    pub median_window_days: usize,
    pub trending_fraction_threshold: f64,
    pub variance_threshold: f64,
    pub min_users: usize,
    /// Burst window length in days.
    pub w: usize,
}

impl Default for BurstConfig {
    fn default() -> Self {
        BurstConfig {
            n_min: 10.0,
            median_window_days: 61,
            trending_fraction_threshold: 15.0,
            variance_threshold: 900.0,
            min_users: 500,
            w: 7,
        }
    }
}

impl BurstConfig {
    // negated comparisons so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.n_min > 0.0) {
            return bad("n_min must be > 0");
        }
        if self.median_window_days == 0 || self.median_window_days.is_multiple_of(2) {
            return bad("median_window_days must be odd");
        }
        if !(self.trending_fraction_threshold > 0.0) || !(self.variance_threshold > 0.0) {
            return bad("burst thresholds must be > 0");
        }
        if self.min_users == 0 || self.w == 0 {
            return bad("min_users and w must be > 0");
        }
        Ok(())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// `|n_t - n_b| / max(n_b, n_min)` where `n_b` is the median of the series
/// over a window centred on `day_index`, clipped to the series.
pub fn outlier_fraction(series: &TimeSeries, day_index: usize, config: &BurstConfig) -> f64 {
    let values = &series.values;
    assert!(day_index < values.len(), "day index outside series");
    let half = config.median_window_days / 2;
    let lo = day_index.saturating_sub(half);
    let hi = (day_index + half).min(values.len() - 1);
    let mut window: Vec<f64> = values[lo..=hi].iter().map(|&v| v as f64).collect();
    let n_b = median(&mut window);
    let n_t = values[day_index] as f64;
    (n_t - n_b).abs() / n_b.max(config.n_min)
}

/// Population variance.
pub fn variance(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BurstRejection {
    Absent,
    LowVariance,
    TooFewUsers,
    BelowTrendingThreshold,
}

impl std::fmt::Display for BurstRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BurstRejection::Absent => "absent",
            BurstRejection::LowVariance => "low-variance",
            BurstRejection::TooFewUsers => "too-few-users",
            BurstRejection::BelowTrendingThreshold => "below-trending-threshold",
        })
    }
}

/// Peak of a series that passed the trending filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub outlier_fraction: f64,
}

/// Applies the variance, user and outlier-fraction filters to a series and
/// returns the argmax day (earliest on ties).
pub fn assess_series(
    series: &TimeSeries,
    distinct_users: usize,
    config: &BurstConfig,
) -> std::result::Result<Peak, BurstRejection> {
    if series.total() == 0 {
        return Err(BurstRejection::Absent);
    }
    if variance(&series.values) < config.variance_threshold {
        return Err(BurstRejection::LowVariance);
    }
    if distinct_users < config.min_users {
        return Err(BurstRejection::TooFewUsers);
    }
    let mut best = Peak {
        index: 0,
        outlier_fraction: f64::NEG_INFINITY,
    };
    for i in 0..series.values.len() {
        let p = outlier_fraction(series, i, config);
        if p > best.outlier_fraction {
            best = Peak {
                index: i,
                outlier_fraction: p,
            };
        }
    }
    if best.outlier_fraction < config.trending_fraction_threshold {
        return Err(BurstRejection::BelowTrendingThreshold);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagBurst {
    pub hashtag: String,
    pub window: DayRange,
    pub peak_day: NaiveDate,
    pub peak_outlier_fraction: f64,
    /// Ids of the hashtag's tweets inside the window.
    pub tweet_ids: Vec<String>,
}

/// `w` days centred on `peak` (for even `w` the extra day falls after it).
pub fn burst_window(peak: NaiveDate, w: usize) -> DayRange {
    DayRange::starting_at(peak - Duration::days(((w - 1) / 2) as i64), w)
}

fn make_burst(
    corpus: &TweetCorpus,
    hashtag: &str,
    peak: NaiveDate,
    p: f64,
    w: usize,
) -> HashtagBurst {
    let window = burst_window(peak, w);
    HashtagBurst {
        hashtag: hashtag.to_string(),
        window,
        peak_day: peak,
        peak_outlier_fraction: p,
        tweet_ids: corpus
            .tweets_in(hashtag, window)
            .into_iter()
            .map(|t| t.id.clone())
            .collect(),
    }
}

/// Runs burst detection for one hashtag over the whole corpus range.
pub fn assess_burst(
    corpus: &TweetCorpus,
    hashtag: &str,
    config: &BurstConfig,
) -> std::result::Result<HashtagBurst, BurstRejection> {
    let range = corpus.day_range().ok_or(BurstRejection::Absent)?;
    let series = hashtag_series(corpus, hashtag, range);
    let peak = assess_series(&series, corpus.distinct_users(hashtag), config)?;
    Ok(make_burst(
        corpus,
        hashtag,
        range.day(peak.index),
        peak.outlier_fraction,
        config.w,
    ))
}

/// At most one burst per hashtag (the global peak).
pub fn detect_bursts(
    corpus: &TweetCorpus,
    hashtag: &str,
    config: &BurstConfig,
) -> Vec<HashtagBurst> {
    assess_burst(corpus, hashtag, config).into_iter().collect()
}

/// The burst window around the hashtag's global peak, ignoring the trending
/// filters. Used when a hashtag is requested explicitly.
pub fn forced_burst(
    corpus: &TweetCorpus,
    hashtag: &str,
    config: &BurstConfig,
) -> Option<HashtagBurst> {
    let range = corpus.day_range()?;
    let series = hashtag_series(corpus, hashtag, range);
    if series.total() == 0 {
        return None;
    }
    let (index, p) = (0..series.values.len())
        .map(|i| (i, outlier_fraction(&series, i, config)))
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Some(make_burst(corpus, hashtag, range.day(index), p, config.w))
}

/// Every trending hashtag in the corpus, sorted by hashtag.
pub fn trending_hashtags(
    corpus: &TweetCorpus,
    config: &BurstConfig,
    exec: ExecMode,
) -> Vec<HashtagBurst> {
    let tags = corpus.hashtags();
    exec.map(&tags, |h| assess_burst(corpus, h, config).ok())
        .into_iter()
        .flatten()
        .collect()
}
