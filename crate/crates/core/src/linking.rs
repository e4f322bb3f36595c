//! Mention detection and candidate entity generation.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{HashtagBurst, TweetCorpus};
use crate::influence::milne_witten;
use crate::text::{self, TokenBag};
use crate::wiki::{EntityId, Lexicon, LinkPriorMode, WikiSnapshot};

/// Longest phrase considered for a mention, in tokens.
pub const MAX_NGRAM: usize = 5;

/// Anything that can answer "is this normalized phrase a surface form".
pub trait SurfaceLookup {
    fn has_surface(&self, phrase: &str) -> bool;
}

impl SurfaceLookup for Lexicon {
    fn has_surface(&self, phrase: &str) -> bool {
        self.contains(phrase)
    }
}

impl SurfaceLookup for HashSet<String> {
    fn has_surface(&self, phrase: &str) -> bool {
        self.contains(phrase)
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?i)(https?://|www\.)").unwrap())
}

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:[:;=8xX][\-o^']?[()\[\]dDpP/\\|3*oO]+|[()\[\]dD][\-o^']?[:;=]|<3+|\^_*\^|[oO]_[oO])$")
            .unwrap()
    })
}

/// Splits a hashtag body into words by repeatedly taking the longest prefix
/// found in `vocab`. Characters that start no known word are gathered into a
/// single residual token.
pub fn segment_hashtag(body: &str, vocab: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = Vec::new();
    let mut residual = String::new();
    let mut i = 0;
    while i < chars.len() {
        let hit = (i + 1..=chars.len())
            .rev()
            .map(|j| chars[i..j].iter().collect::<String>())
            .find(|w| vocab.contains(w));
        match hit {
            Some(w) => {
                if !residual.is_empty() {
                    out.push(std::mem::take(&mut residual));
                }
                i += w.chars().count();
                out.push(w);
            }
            None => {
                residual.push(chars[i]);
                i += 1;
            }
        }
    }
    if !residual.is_empty() {
        out.push(residual);
    }
    out
}

/// Normalized word tokens of a tweet. URLs, @-mentions and emoticons are
/// dropped; hashtag bodies are segmented against `vocab`.
pub fn tweet_tokens(tweet: &str, vocab: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for raw in tweet.split_whitespace() {
        if url_re().is_match(raw) || raw.starts_with('@') || emoticon_re().is_match(raw) {
            continue;
        }
        match raw.strip_prefix('#') {
            Some(body) => {
                for word in text::words(body) {
                    out.extend(segment_hashtag(&word, vocab));
                }
            }
            None => out.extend(text::words(raw)),
        }
    }
    out
}

/// All n-grams with `n <= max_n`, longest first at each start position.
pub fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        let longest = max_n.min(tokens.len() - start);
        for n in (1..=longest).rev() {
            out.push(tokens[start..start + n].join(" "));
        }
    }
    out
}

/// Tokenizes a tweet and lists its candidate phrases.
pub fn tweet_phrases(tweet: &str, vocab: &HashSet<String>) -> Vec<String> {
    ngrams(&tweet_tokens(tweet, vocab), MAX_NGRAM)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionMatch {
    pub mention: String,
    pub start: usize,
    pub len: usize,
}

/// Left-to-right longest-match: at each position take the longest phrase (up
/// to [`MAX_NGRAM`] tokens) known to `lookup` and continue after it.
pub fn longest_match<L: SurfaceLookup + ?Sized>(
    tokens: &[String],
    lookup: &L,
) -> Vec<MentionMatch> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = MAX_NGRAM.min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let phrase = tokens[i..i + n].join(" ");
            lookup.has_surface(&phrase).then_some((phrase, n))
        });
        match hit {
            Some((mention, len)) => {
                out.push(MentionMatch {
                    mention,
                    start: i,
                    len,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionStat {
    pub mention: String,
    /// Occurrences of the mention in the sampled tweets.
    pub count: u64,
    /// `count` over the counts of every mention of this entity.
    pub q: f64,
    pub link_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Seed,
    ExpandedFrom(EntityId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity: EntityId,
    pub provenance: Provenance,
    /// Empty for expansion-only entities.
    pub mentions: Vec<MentionStat>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Sorted by entity id.
    pub candidates: Vec<Candidate>,
    pub sampled_tweets: usize,
    /// Word bag of the sampled tweets (the hashtag's text context).
    pub hashtag_words: TokenBag,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn entities(&self) -> Vec<EntityId> {
        self.candidates.iter().map(|c| c.entity).collect()
    }

    pub fn seeds(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates
            .iter()
            .filter(|c| c.provenance == Provenance::Seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkingConfig {
    pub sample_size: usize,
    pub expansion_cap: usize,
    pub seed: u64,
    pub link_prior_mode: LinkPriorMode,
}

impl Default for LinkingConfig {
    fn default() -> Self {
        LinkingConfig {
            sample_size: 10_000,
            expansion_cap: 50,
            seed: 0,
            link_prior_mode: LinkPriorMode::default(),
        }
    }
}

/// FNV-1a, used to derive a per-hashtag stream from the run seed.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Links a uniform sample of the burst's tweets and expands the linked
/// entities along article links.
pub fn build_candidates(
    burst: &HashtagBurst,
    corpus: &TweetCorpus,
    snapshot: &WikiSnapshot,
    config: &LinkingConfig,
) -> CandidateSet {
    let tweets = corpus.tweets_in(&burst.hashtag, burst.window);
    let take = config.sample_size.min(tweets.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ stable_hash(&burst.hashtag));
    let mut picked = rand::seq::index::sample(&mut rng, tweets.len(), take).into_vec();
    picked.sort_unstable();

    let lexicon = &snapshot.lexicon;
    let vocab = lexicon.vocabulary();
    let mut mention_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut words = TokenBag::new();
    for &i in &picked {
        let tokens = tweet_tokens(&tweets[i].text, vocab);
        for m in longest_match(&tokens, lexicon) {
            *mention_counts.entry(m.mention).or_insert(0) += 1;
        }
        text::merge_into(&mut words, &text::bag(tokens));
    }

    // entity -> [(mention, count, LP)]
    let mut per_entity: BTreeMap<EntityId, Vec<(String, u64, f64)>> = BTreeMap::new();
    for (m, &count) in &mention_counts {
        for (e, lp) in lexicon.link_prior(m, config.link_prior_mode) {
            if lp > 0.0 {
                per_entity
                    .entry(e)
                    .or_default()
                    .push((m.clone(), count, lp));
            }
        }
    }

    let mut candidates: BTreeMap<EntityId, Candidate> = per_entity
        .into_iter()
        .map(|(e, ms)| {
            let total: u64 = ms.iter().map(|m| m.1).sum();
            let mentions = ms
                .into_iter()
                .map(|(mention, count, link_prior)| MentionStat {
                    mention,
                    count,
                    q: count as f64 / total as f64,
                    link_prior,
                })
                .collect();
            (
                e,
                Candidate {
                    entity: e,
                    provenance: Provenance::Seed,
                    mentions,
                },
            )
        })
        .collect();

    let seeds: Vec<EntityId> = candidates.keys().copied().collect();
    let seed_set: HashSet<EntityId> = seeds.iter().copied().collect();
    for &seed in &seeds {
        let mut nbs: Vec<(EntityId, f64)> = snapshot
            .links
            .neighbours(seed)
            .into_iter()
            .filter(|n| !seed_set.contains(n))
            .map(|n| (n, milne_witten(&snapshot.links, seed, n)))
            .collect();
        nbs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (n, _) in nbs.into_iter().take(config.expansion_cap) {
            candidates.entry(n).or_insert(Candidate {
                entity: n,
                provenance: Provenance::ExpandedFrom(seed),
                mentions: Vec::new(),
            });
        }
    }

    CandidateSet {
        candidates: candidates.into_values().collect(),
        sampled_tweets: picked.len(),
        hashtag_words: words,
    }
}
