//! Ranking evaluation against graded (0/1/2) judgments.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(hashtag, entity title) -> grade`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldLabels {
    grades: HashMap<String, HashMap<String, u8>>,
}

impl GoldLabels {
    pub fn insert(&mut self, hashtag: &str, title: &str, grade: u8) -> Result<()> {
        if grade > 2 {
            return Err(Error::Config(format!("grade {grade} outside 0..=2")));
        }
        self.grades
            .entry(hashtag.to_lowercase())
            .or_default()
            .insert(title.to_string(), grade);
        Ok(())
    }

    /// Parses `hashtag<TAB>title<TAB>grade` lines.
    pub fn parse(body: &str, path: &Path) -> Result<Self> {
        let mut gold = GoldLabels::default();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(err("expected hashtag, title, grade".into()));
            }
            let grade: u8 = cols[2]
                .parse()
                .map_err(|e| err(format!("bad grade: {e}")))?;
            let tag = cols[0].trim_start_matches('#');
            gold.insert(tag, cols[1], grade)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(gold)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&body, path)
    }

    pub fn covers(&self, hashtag: &str) -> bool {
        self.grades.contains_key(hashtag)
    }

    /// Titles graded at least `threshold` for `hashtag`.
    pub fn relevant(&self, hashtag: &str, threshold: u8) -> HashSet<&str> {
        self.grades
            .get(hashtag)
            .into_iter()
            .flatten()
            .filter(|(_, &g)| g >= threshold)
            .map(|(t, _)| t.as_str())
            .collect()
    }
}

/// Relevance of each position; a title repeated further down counts as
/// non-relevant.
fn judged<'a>(
    ranking: &'a [&str],
    relevant: &'a HashSet<&str>,
    k: usize,
) -> impl Iterator<Item = bool> + 'a {
    let mut seen = HashSet::new();
    ranking
        .iter()
        .take(k)
        .map(move |t| seen.insert(*t) && relevant.contains(t))
}

/// Hits in the first `k` positions divided by `k`.
pub fn precision_at(ranking: &[&str], relevant: &HashSet<&str>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = judged(ranking, relevant, k).filter(|&hit| hit).count();
    hits as f64 / k as f64
}

/// Average precision truncated at `k`, normalized by `min(|relevant|, k)`.
pub fn average_precision(ranking: &[&str], relevant: &HashSet<&str>, k: usize) -> f64 {
    let denom = relevant.len().min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, hit) in judged(ranking, relevant, k).enumerate() {
        if hit {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Minimum grade counted as relevant (1 or 2).
    pub relevance_threshold: u8,
    pub map_cutoff: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            relevance_threshold: 1,
            map_cutoff: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub p_at_5: f64,
    pub p_at_15: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagScores {
    pub hashtag: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub relevance_threshold: u8,
    pub evaluated: usize,
    pub mean: Scores,
    pub per_hashtag: Vec<HashtagScores>,
    /// Hashtags with rankings but no judgments.
    pub excluded: Vec<String>,
}

/// Scores `(hashtag, ranked titles)` pairs. Unjudged titles count as
/// non-relevant; hashtags missing from `gold` are excluded and listed.
pub fn evaluate<S: AsRef<str>>(
    rankings: &[(String, Vec<S>)],
    gold: &GoldLabels,
    config: &EvalConfig,
) -> MetricsReport {
    let mut report = MetricsReport {
        relevance_threshold: config.relevance_threshold,
        ..MetricsReport::default()
    };
    for (hashtag, titles) in rankings {
        if !gold.covers(hashtag) {
            report.excluded.push(hashtag.clone());
            continue;
        }
        let relevant = gold.relevant(hashtag, config.relevance_threshold);
        let ranking: Vec<&str> = titles.iter().map(AsRef::as_ref).collect();
        let scores = Scores {
            p_at_5: precision_at(&ranking, &relevant, 5),
            p_at_15: precision_at(&ranking, &relevant, 15),
            map: average_precision(&ranking, &relevant, config.map_cutoff),
        };
        report.per_hashtag.push(HashtagScores {
            hashtag: hashtag.clone(),
            scores,
        });
    }
    let n = report.per_hashtag.len();
    report.evaluated = n;
    if n > 0 {
        let mean = |f: fn(&Scores) -> f64| {
            report.per_hashtag.iter().map(|h| f(&h.scores)).sum::<f64>() / n as f64
        };
        report.mean = Scores {
            p_at_5: mean(|s| s.p_at_5),
            p_at_15: mean(|s| s.p_at_15),
            map: mean(|s| s.map),
        };
    }
    report
}
