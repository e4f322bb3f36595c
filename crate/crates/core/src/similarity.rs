//! Entity-hashtag similarity measures: mention, textual context, temporal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{hashtag_series, HashtagBurst, TweetCorpus};
use crate::exec::ExecMode;
use crate::influence::Components;
use crate::linking::{Candidate, CandidateSet};
use crate::text::TokenBag;
use crate::wiki::WikiSnapshot;

/// Floor applied to probabilities inside the divergence.
pub const PROB_FLOOR: f64 = 1e-10;

/// Maximum-likelihood unigram model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanguageModel {
    probs: BTreeMap<String, f64>,
}

impl LanguageModel {
    pub fn from_bag(bag: &TokenBag) -> Self {
        let total: u64 = bag.values().sum();
        if total == 0 {
            return Self::default();
        }
        LanguageModel {
            probs: bag
                .iter()
                .map(|(w, &n)| (w.clone(), n as f64 / total as f64))
                .collect(),
        }
    }

    pub fn prob(&self, w: &str) -> f64 {
        self.probs.get(w).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(w, &p)| (w.as_str(), p))
    }

    /// `lambda * fg + (1 - lambda) * bg`, keeping only positive entries.
    pub fn mixture(fg: &LanguageModel, bg: &LanguageModel, lambda: f64) -> LanguageModel {
        let mut probs = BTreeMap::new();
        for w in fg.probs.keys().chain(bg.probs.keys()) {
            if probs.contains_key(w) {
                continue;
            }
            let p = lambda * fg.prob(w) + (1.0 - lambda) * bg.prob(w);
            if p > 0.0 {
                probs.insert(w.clone(), p);
            }
        }
        LanguageModel { probs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlVariant {
    /// `sum p log(p / q)`.
    #[default]
    Standard,
    /// `sum p * (p / q)`, without the logarithm. Not zero at identity; kept
    /// for comparison only.
    RatioWithoutLog,
}

/// `exp(-KL(entity || hashtag))` over the words both models assign positive
/// probability, after renormalizing each model on that shared vocabulary.
/// No shared words gives 0.
pub fn divergence_similarity(
    entity: &LanguageModel,
    hashtag: &LanguageModel,
    variant: KlVariant,
) -> f64 {
    let shared: Vec<(f64, f64)> = entity
        .iter()
        .filter_map(|(w, p)| {
            let q = hashtag.prob(w);
            (p > 0.0 && q > 0.0).then_some((p, q))
        })
        .collect();
    if shared.is_empty() {
        return 0.0;
    }
    let zp: f64 = shared.iter().map(|s| s.0).sum();
    let zq: f64 = shared.iter().map(|s| s.1).sum();
    let kl: f64 = shared
        .iter()
        .map(|&(p, q)| {
            let p = (p / zp).max(PROB_FLOOR);
            let q = (q / zq).max(PROB_FLOOR);
            match variant {
                KlVariant::Standard => p * (p / q).ln(),
                KlVariant::RatioWithoutLog => p * (p / q),
            }
        })
        .sum();
    // rounding can push an identity divergence a hair below zero
    (-kl.max(0.0)).exp()
}

/// Context similarity from the entity's in-period additions, its latest
/// article text and the hashtag's tweet words.
pub fn context_similarity(
    temporal: &TokenBag,
    general: &TokenBag,
    hashtag: &TokenBag,
    lambda: f64,
    variant: KlVariant,
) -> f64 {
    let entity = LanguageModel::mixture(
        &LanguageModel::from_bag(temporal),
        &LanguageModel::from_bag(general),
        lambda,
    );
    divergence_similarity(&entity, &LanguageModel::from_bag(hashtag), variant)
}

/// `sum over mentions of LP(e|m) * q(m)`; zero for expansion-only entities.
pub fn mention_similarity(candidate: &Candidate) -> f64 {
    candidate
        .mentions
        .iter()
        .fold(0.0, |acc, m| acc + m.link_prior * m.q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftScaleMatch {
    pub shift: i64,
    pub scale: f64,
    /// `||h - scale * shifted(e)|| / ||h||`.
    pub distance: f64,
}

/// `out[i] = series[i - q]`, zero where that index falls outside.
pub fn shifted(series: &[f64], q: i64) -> Vec<f64> {
    let n = series.len() as i64;
    (0..n)
        .map(|i| {
            let src = i - q;
            if (0..n).contains(&src) {
                series[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares scale for a fixed shift. The distance is infinite when the
/// hashtag series is all zero.
pub fn best_shift_scale(hashtag: &[f64], entity: &[f64], q: i64) -> ShiftScaleMatch {
    assert_eq!(hashtag.len(), entity.len());
    let d = shifted(entity, q);
    let dd = dot(&d, &d);
    let scale = if dd > 0.0 { dot(hashtag, &d) / dd } else { 0.0 };
    let norm_h = dot(hashtag, hashtag).sqrt();
    let resid: f64 = hashtag
        .iter()
        .zip(&d)
        .map(|(h, x)| (h - scale * x).powi(2))
        .sum::<f64>()
        .sqrt();
    ShiftScaleMatch {
        shift: q,
        scale,
        distance: if norm_h > 0.0 {
            resid / norm_h
        } else {
            f64::INFINITY
        },
    }
}

/// Best match over shifts `-max_shift..=max_shift` (smallest shift magnitude,
/// then most negative, on ties). Returns `exp(-distance)` and the match;
/// 0 when the hashtag series is all zero.
pub fn temporal_similarity(
    hashtag: &[f64],
    entity: &[f64],
    max_shift: u32,
) -> (f64, ShiftScaleMatch) {
    let m = max_shift as i64;
    let mut shifts: Vec<i64> = (-m..=m).collect();
    shifts.sort_by_key(|q| (q.abs(), *q));
    let best = shifts
        .into_iter()
        .map(|q| best_shift_scale(hashtag, entity, q))
        .fold(None::<ShiftScaleMatch>, |best, cur| match best {
            Some(b) if b.distance <= cur.distance => Some(b),
            _ => Some(cur),
        })
        .expect("at least one shift");
    ((-best.distance).exp(), best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    /// Weight of the in-period language model in the entity mixture.
    pub lambda: f64,
    /// Largest shift, in days, tried when matching time series.
    pub max_shift: u32,
    /// Extra days after the window whose revisions still count.
    pub lag_days: u32,
    pub kl_variant: KlVariant,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            lambda: 0.9,
            max_shift: 3,
            lag_days: 1,
            kl_variant: KlVariant::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub f_m: f64,
    pub f_c: f64,
    pub f_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    /// Parallel to the candidate list.
    pub raw: Vec<RawScores>,
    pub components: Components,
}

/// Scales to sum 1; an all-zero vector becomes uniform so it stays a
/// probability vector.
pub fn normalize_component(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

/// Scores every candidate against the hashtag's burst.
pub fn compute_similarities(
    candidates: &CandidateSet,
    burst: &HashtagBurst,
    corpus: &TweetCorpus,
    snapshot: &WikiSnapshot,
    config: &SimilarityConfig,
    exec: ExecMode,
) -> SimilarityTable {
    let ts_h = hashtag_series(corpus, &burst.hashtag, burst.window).as_f64();
    let raw = exec.map(&candidates.candidates, |c| {
        let temporal = snapshot
            .revisions
            .temporal_context(c.entity, burst.window, config.lag_days);
        let general = snapshot.revisions.latest_context(c.entity);
        let ts_e = snapshot
            .pageviews
            .view_series(c.entity, burst.window)
            .as_f64();
        RawScores {
            f_m: mention_similarity(c),
            f_c: context_similarity(
                &temporal,
                &general,
                &candidates.hashtag_words,
                config.lambda,
                config.kl_variant,
            ),
            f_t: temporal_similarity(&ts_h, &ts_e, config.max_shift).0,
        }
    });
    let column =
        |f: fn(&RawScores) -> f64| normalize_component(&raw.iter().map(f).collect::<Vec<_>>());
    let components = Components {
        mention: column(|r| r.f_m),
        context: column(|r| r.f_c),
        temporal: column(|r| r.f_t),
    };
    SimilarityTable { raw, components }
}
