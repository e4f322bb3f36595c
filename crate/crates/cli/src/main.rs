//! Command-line front end: ingest, bursts, annotate, evaluate, sweep.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use trendlink::corpus::{load_tweets_file, TweetCorpus};
use trendlink::influence::DanglingPolicy;
use trendlink::metrics::GoldLabels;
use trendlink::pipeline::{
    burst_rejection, evaluate_annotations, list_bursts, read_annotations, run_annotate,
    sweep_window_sizes, write_annotations, Config,
};
use trendlink::similarity::KlVariant;
use trendlink::synthetic::olympics_world;
use trendlink::wiki::{LinkPriorMode, SnapshotSources, WikiSnapshot};
use trendlink::ExecMode;

#[derive(Parser, Debug)]
#[command(
    name = "trendlink",
    version,
    about = "Link trending hashtags to Wikipedia entities"
)]
struct Cli {
    /// TOML file with default values for any flag (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the tweet corpus and/or wiki snapshot and report what was read.
    Ingest(Params),
    /// List trending hashtags with their burst windows.
    Bursts(Params),
    /// Rank entities for trending (or the given) hashtags.
    Annotate(Params),
    /// Score annotations against graded gold labels.
    Evaluate(Params),
    /// Annotate and evaluate once per burst window size.
    Sweep(Params),
    /// Write the synthetic Olympics corpus, snapshot and gold labels.
    GenerateFixture(Params),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum KlArg {
    Standard,
    RatioWithoutLog,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum LinkPriorArg {
    EntityGivenMention,
    AnchorShareOfEntity,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum DanglingArg {
    Uniform,
    Teleport,
}

/// Every option, as a flag or a config-file key of the same name.
#[derive(Args, Deserialize, Default, Debug, Clone, PartialEq)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Params {
    /// Tweets as JSON lines.
    #[arg(long)]
    tweets: Option<PathBuf>,
    /// Directory holding pages.tsv, anchors.tsv, links.tsv, revisions.jsonl
    /// and pageviews.tsv.
    #[arg(long)]
    wiki_dir: Option<PathBuf>,
    /// Restrict to these hashtags, bypassing the trending filters.
    #[arg(long = "hashtag")]
    hashtag: Vec<String>,
    /// Annotations to evaluate.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// hashtag, title, grade (tab separated).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Output file (default: stdout; a directory for generate-fixture).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Entities reported per hashtag.
    #[arg(long)]
    k: Option<usize>,
    /// Burst window in days.
    #[arg(long)]
    w: Option<usize>,
    /// Random walk damping.
    #[arg(long)]
    tau: Option<f64>,
    /// Weight of the burst-period revisions in the entity language model.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight learning rate.
    #[arg(long)]
    mu: Option<f64>,
    /// Loss below which weight learning stops.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Page-view series are shifted by up to this many days either way.
    #[arg(long)]
    shift_range: Option<u32>,
    /// Tweets linked per burst.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Neighbours added per seed entity.
    #[arg(long)]
    expansion_cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum grade counted as relevant (1 or 2).
    #[arg(long)]
    relevance_threshold: Option<u8>,
    /// Window sizes for sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep_w: Vec<usize>,
    /// Skip not-trending records in corpus-wide annotate runs.
    #[arg(long)]
    trending_only: bool,
    #[arg(long, value_enum)]
    kl_variant: Option<KlArg>,
    #[arg(long, value_enum)]
    link_prior: Option<LinkPriorArg>,
    #[arg(long, value_enum)]
    dangling: Option<DanglingArg>,
}

impl Params {
    /// Fills every option not given on the command line from `file`.
    fn or(self, file: Params) -> Params {
        Params {
            tweets: self.tweets.or(file.tweets),
            wiki_dir: self.wiki_dir.or(file.wiki_dir),
            hashtag: if self.hashtag.is_empty() {
                file.hashtag
            } else {
                self.hashtag
            },
            annotations: self.annotations.or(file.annotations),
            gold: self.gold.or(file.gold),
            out: self.out.or(file.out),
            k: self.k.or(file.k),
            w: self.w.or(file.w),
            tau: self.tau.or(file.tau),
            lambda: self.lambda.or(file.lambda),
            mu: self.mu.or(file.mu),
            epsilon: self.epsilon.or(file.epsilon),
            shift_range: self.shift_range.or(file.shift_range),
            sample_size: self.sample_size.or(file.sample_size),
            expansion_cap: self.expansion_cap.or(file.expansion_cap),
            seed: self.seed.or(file.seed),
            relevance_threshold: self.relevance_threshold.or(file.relevance_threshold),
            sweep_w: if self.sweep_w.is_empty() {
                file.sweep_w
            } else {
                self.sweep_w
            },
            trending_only: self.trending_only || file.trending_only,
            kl_variant: self.kl_variant.or(file.kl_variant),
            link_prior: self.link_prior.or(file.link_prior),
            dangling: self.dangling.or(file.dangling),
        }
    }

    fn pipeline_config(&self, exec: ExecMode) -> Result<Config> {
        let mut c = Config {
            exec,
            trending_only: self.trending_only,
            ..Config::default()
        };
        macro_rules! set {
            ($field:ident => $($target:ident).+) => {
                if let Some(v) = self.$field {
                    c.$($target).+ = v;
                }
            };
        }
        set!(k => ipl.k);
        set!(w => burst.w);
        set!(tau => ipl.walk.damping);
        set!(lambda => similarity.lambda);
        set!(mu => ipl.learning_rate);
        set!(epsilon => ipl.epsilon);
        set!(shift_range => similarity.max_shift);
        set!(sample_size => linking.sample_size);
        set!(expansion_cap => linking.expansion_cap);
        set!(seed => linking.seed);
        set!(relevance_threshold => eval.relevance_threshold);
        if let Some(v) = self.kl_variant {
            c.similarity.kl_variant = match v {
                KlArg::Standard => KlVariant::Standard,
                KlArg::RatioWithoutLog => KlVariant::RatioWithoutLog,
            };
        }
        if let Some(v) = self.link_prior {
            c.linking.link_prior_mode = match v {
                LinkPriorArg::EntityGivenMention => LinkPriorMode::EntityGivenMention,
                LinkPriorArg::AnchorShareOfEntity => LinkPriorMode::AnchorShareOfEntity,
            };
        }
        if let Some(v) = self.dangling {
            c.ipl.walk.dangling = match v {
                DanglingArg::Uniform => DanglingPolicy::Uniform,
                DanglingArg::Teleport => DanglingPolicy::Teleport,
            };
        }
        c.validate()?;
        Ok(c)
    }

    fn required<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        match opt {
            Some(p) => Ok(p),
            None => bail!("--{flag} is required"),
        }
    }

    fn hashtags(&self) -> Option<&[String]> {
        (!self.hashtag.is_empty()).then_some(self.hashtag.as_slice())
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_corpus(p: &Params, exec: ExecMode) -> Result<TweetCorpus> {
    let path = Params::required(&p.tweets, "tweets")?;
    let (corpus, report) = load_tweets_file(path, exec)?;
    log::info!(
        "{}: {} tweets, {} duplicates, {} rejected",
        path.display(),
        report.accepted,
        report.duplicates,
        report.rejected
    );
    Ok(corpus)
}

fn load_snapshot(p: &Params) -> Result<WikiSnapshot> {
    let dir = Params::required(&p.wiki_dir, "wiki-dir")?;
    let snapshot = WikiSnapshot::load(dir)?;
    log::info!("{}: {:?}", dir.display(), snapshot.report);
    Ok(snapshot)
}

#[derive(Serialize)]
struct BurstRecord {
    hashtag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<trendlink::corpus::DayRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peak_day: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outlier_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tweets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    let file = match &cli.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&body).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => Params::default(),
    };

    match cli.command {
        Command::Ingest(p) => {
            let p = p.or(file);
            if p.tweets.is_none() && p.wiki_dir.is_none() {
                bail!("ingest needs --tweets and/or --wiki-dir");
            }
            let mut report = serde_json::Map::new();
            if let Some(path) = &p.tweets {
                let (corpus, r) = load_tweets_file(path, exec)?;
                report.insert("tweets".into(), serde_json::to_value(&r)?);
                report.insert("hashtags".into(), corpus.hashtags().len().into());
                report.insert("days".into(), serde_json::to_value(corpus.day_range())?);
            }
            if let Some(dir) = &p.wiki_dir {
                let snapshot = WikiSnapshot::build(SnapshotSources::read_dir(dir)?);
                report.insert("wiki".into(), serde_json::to_value(&snapshot.report)?);
            }
            write_json(&p.out, &report)
        }
        Command::Bursts(p) => {
            let p = p.or(file);
            let config = p.pipeline_config(exec)?;
            let corpus = load_corpus(&p, exec)?;
            let mut records: Vec<BurstRecord> = list_bursts(&corpus, &config)
                .into_iter()
                .map(|b| BurstRecord {
                    hashtag: b.hashtag,
                    window: Some(b.window),
                    peak_day: Some(b.peak_day.to_string()),
                    outlier_fraction: Some(b.peak_outlier_fraction),
                    tweets: Some(b.tweet_ids.len()),
                    reason: None,
                })
                .collect();
            if let Some(tags) = p.hashtags() {
                records.retain(|r| {
                    tags.iter()
                        .any(|t| t.trim_start_matches('#').eq_ignore_ascii_case(&r.hashtag))
                });
                for t in tags {
                    if let Some(why) = burst_rejection(&corpus, t, &config) {
                        records.push(BurstRecord {
                            hashtag: t.trim_start_matches('#').to_lowercase(),
                            window: None,
                            peak_day: None,
                            outlier_fraction: None,
                            tweets: None,
                            reason: Some(why.to_string()),
                        });
                    }
                }
            }
            let mut w = output(&p.out)?;
            for r in &records {
                serde_json::to_writer(&mut w, r)?;
                writeln!(w)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Annotate(p) => {
            let p = p.or(file);
            let config = p.pipeline_config(exec)?;
            let corpus = load_corpus(&p, exec)?;
            let snapshot = load_snapshot(&p)?;
            let annotations = run_annotate(&corpus, &snapshot, &config, p.hashtags());
            write_annotations(output(&p.out)?, &annotations)?;
            Ok(())
        }
        Command::Evaluate(p) => {
            let p = p.or(file);
            let config = p.pipeline_config(exec)?;
            let annotations = read_annotations(Params::required(&p.annotations, "annotations")?)?;
            let gold = GoldLabels::load(Params::required(&p.gold, "gold")?)?;
            let report = evaluate_annotations(&annotations, &gold, &config.eval);
            for tag in &report.excluded {
                log::warn!("#{tag} has no gold labels; excluded");
            }
            write_json(&p.out, &report)
        }
        Command::Sweep(p) => {
            let p = p.or(file);
            let config = p.pipeline_config(exec)?;
            if p.sweep_w.is_empty() {
                bail!("--sweep-w is required, e.g. --sweep-w 3,5,7,9");
            }
            if p.sweep_w.contains(&0) {
                bail!("window sizes must be positive");
            }
            let gold = GoldLabels::load(Params::required(&p.gold, "gold")?)?;
            let corpus = load_corpus(&p, exec)?;
            let snapshot = load_snapshot(&p)?;
            let points =
                sweep_window_sizes(&corpus, &snapshot, &config, p.hashtags(), &p.sweep_w, &gold);
            write_json(&p.out, &points)
        }
        Command::GenerateFixture(p) => {
            let p = p.or(file);
            let dir = Params::required(&p.out, "out")?;
            olympics_world(p.seed.unwrap_or(0)).write_to(dir)?;
            eprintln!("wrote {}/tweets.jsonl, gold.tsv and wiki/", dir.display());
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
