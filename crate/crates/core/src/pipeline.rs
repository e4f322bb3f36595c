//! End-to-end annotation runs, output files and evaluation sweeps.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    assess_burst, forced_burst, BurstConfig, BurstRejection, DayRange, HashtagBurst, TweetCorpus,
};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::influence::{ipl, InfluenceGraph, IplConfig, ModelWeights};
use crate::linking::{build_candidates, LinkingConfig, Provenance};
use crate::metrics::{evaluate, EvalConfig, GoldLabels, MetricsReport};
use crate::similarity::{compute_similarities, SimilarityConfig};
use crate::wiki::WikiSnapshot;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub burst: BurstConfig,
    pub linking: LinkingConfig,
    pub similarity: SimilarityConfig,
    pub ipl: IplConfig,
    pub eval: EvalConfig,
    pub exec: ExecMode,
    /// Skip the `not-trending` records for corpus hashtags that fail the
    /// burst filters.
    pub trending_only: bool,
}

impl Config {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        self.burst.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let walk = &self.ipl.walk;
        if !(0.0..1.0).contains(&walk.damping) {
            return bad("tau must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.similarity.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if self.ipl.k == 0 || !(self.ipl.learning_rate > 0.0) || !(self.ipl.epsilon > 0.0) {
            return bad("k, mu and epsilon must be positive");
        }
        if !(1..=2).contains(&self.eval.relevance_threshold) {
            return bad("relevance threshold must be 1 or 2");
        }
        if self.linking.sample_size == 0 {
            return bad("sample size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEntity {
    pub title: String,
    /// Influence score.
    pub r: f64,
    /// Fused, normalized similarity.
    pub f: f64,
    pub f_m: f64,
    pub f_c: f64,
    pub f_t: f64,
    /// `seed` or `expanded-from:<title>`.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnnotation {
    pub hashtag: String,
    pub window: Option<DayRange>,
    pub weights: Option<ModelWeights>,
    /// Sorted by `r` descending, at most `k` long.
    pub entities: Vec<AnnotatedEntity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl RankedAnnotation {
    fn unannotated(
        hashtag: &str,
        window: Option<DayRange>,
        reason: &str,
        detail: Option<String>,
    ) -> Self {
        RankedAnnotation {
            hashtag: hashtag.to_string(),
            window,
            weights: None,
            entities: Vec::new(),
            reason: Some(reason.to_string()),
            detail,
        }
    }

    pub fn titles(&self) -> Vec<&str> {
        self.entities.iter().map(|e| e.title.as_str()).collect()
    }
}

/// Candidates, similarities and weight learning for one burst.
pub fn annotate_burst(
    burst: &HashtagBurst,
    corpus: &TweetCorpus,
    snapshot: &WikiSnapshot,
    config: &Config,
) -> RankedAnnotation {
    let candidates = build_candidates(burst, corpus, snapshot, &config.linking);
    if candidates.is_empty() {
        return RankedAnnotation::unannotated(
            &burst.hashtag,
            Some(burst.window),
            "no-candidates",
            None,
        );
    }
    let sims = compute_similarities(
        &candidates,
        burst,
        corpus,
        snapshot,
        &config.similarity,
        config.exec,
    );
    let graph = InfluenceGraph::build(&candidates.entities(), &snapshot.links);
    let outcome = ipl(&graph, &sims.components, &config.ipl, config.exec);
    log::debug!(
        "#{}: {} candidates, {} edges, {} IPL iterations, converged={}",
        burst.hashtag,
        candidates.len(),
        graph.edge_count(),
        outcome.losses.len(),
        outcome.converged
    );

    let entities = outcome
        .top
        .iter()
        .map(|&i| {
            let c = &candidates.candidates[i];
            AnnotatedEntity {
                title: snapshot.title(c.entity).to_string(),
                r: outcome.scores[i],
                f: outcome.fused[i],
                f_m: sims.raw[i].f_m,
                f_c: sims.raw[i].f_c,
                f_t: sims.raw[i].f_t,
                provenance: match c.provenance {
                    Provenance::Seed => "seed".to_string(),
                    Provenance::ExpandedFrom(s) => format!("expanded-from:{}", snapshot.title(s)),
                },
            }
        })
        .collect();
    RankedAnnotation {
        hashtag: burst.hashtag.clone(),
        window: Some(burst.window),
        weights: Some(outcome.weights),
        entities,
        reason: None,
        detail: None,
    }
}

fn normalize_tag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

enum Job {
    Burst(HashtagBurst),
    Skip(RankedAnnotation),
}

/// Annotates the requested hashtags, or every corpus hashtag when `hashtags`
/// is `None`. Explicit hashtags bypass the trending filters. Output follows
/// input order (sorted hashtag order for corpus-wide runs).
pub fn run_annotate(
    corpus: &TweetCorpus,
    snapshot: &WikiSnapshot,
    config: &Config,
    hashtags: Option<&[String]>,
) -> Vec<RankedAnnotation> {
    let tags: Vec<String> = match hashtags {
        Some(list) => list.iter().map(|t| normalize_tag(t)).collect(),
        None => corpus.hashtags().into_iter().map(str::to_string).collect(),
    };
    let explicit = hashtags.is_some();
    let jobs: Vec<Job> = config.exec.map(&tags, |tag| {
        if explicit {
            match forced_burst(corpus, tag, &config.burst) {
                Some(b) => Job::Burst(b),
                None => Job::Skip(RankedAnnotation::unannotated(tag, None, "no-tweets", None)),
            }
        } else {
            match assess_burst(corpus, tag, &config.burst) {
                Ok(b) => Job::Burst(b),
                Err(why) => Job::Skip(RankedAnnotation::unannotated(
                    tag,
                    None,
                    "not-trending",
                    Some(why.to_string()),
                )),
            }
        }
    });
    let jobs: Vec<Job> = jobs
        .into_iter()
        .filter(|j| !(config.trending_only && !explicit && matches!(j, Job::Skip(_))))
        .collect();

    config.exec.map(&jobs, |job| match job {
        Job::Skip(a) => a.clone(),
        Job::Burst(b) => {
            let run = panic::catch_unwind(AssertUnwindSafe(|| {
                annotate_burst(b, corpus, snapshot, config)
            }));
            run.unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                log::error!("#{} failed: {msg}", b.hashtag);
                RankedAnnotation::unannotated(&b.hashtag, Some(b.window), "error", Some(msg))
            })
        }
    })
}

/// The trending hashtags of the corpus with their burst windows.
pub fn list_bursts(corpus: &TweetCorpus, config: &Config) -> Vec<HashtagBurst> {
    crate::corpus::trending_hashtags(corpus, &config.burst, config.exec)
}

/// Why `hashtag` is not trending, if it is not.
pub fn burst_rejection(
    corpus: &TweetCorpus,
    hashtag: &str,
    config: &Config,
) -> Option<BurstRejection> {
    assess_burst(corpus, &normalize_tag(hashtag), &config.burst).err()
}

pub fn write_annotations<W: Write>(mut out: W, annotations: &[RankedAnnotation]) -> Result<()> {
    for a in annotations {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))
}

pub fn read_annotations(path: &Path) -> Result<Vec<RankedAnnotation>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Scores annotations against gold labels.
pub fn evaluate_annotations(
    annotations: &[RankedAnnotation],
    gold: &GoldLabels,
    config: &EvalConfig,
) -> MetricsReport {
    let rankings: Vec<(String, Vec<&str>)> = annotations
        .iter()
        .map(|a| (a.hashtag.clone(), a.titles()))
        .collect();
    evaluate(&rankings, gold, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub w: usize,
    pub annotated: usize,
    pub metrics: MetricsReport,
}

/// Re-runs annotation for each burst window size and scores each run.
pub fn sweep_window_sizes(
    corpus: &TweetCorpus,
    snapshot: &WikiSnapshot,
    config: &Config,
    hashtags: Option<&[String]>,
    sizes: &[usize],
    gold: &GoldLabels,
) -> Vec<SweepPoint> {
    sizes
        .iter()
        .map(|&w| {
            let mut cfg = config.clone();
            cfg.burst.w = w;
            let annotations = run_annotate(corpus, snapshot, &cfg, hashtags);
            let annotated: Vec<RankedAnnotation> = annotations
                .into_iter()
                .filter(|a| a.reason.is_none())
                .collect();
            SweepPoint {
                w,
                annotated: annotated.len(),
                metrics: evaluate_annotations(&annotated, gold, &cfg.eval),
            }
        })
        .collect()
}
