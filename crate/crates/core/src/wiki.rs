//! Read-only stores built from a simplified Wikipedia snapshot.
//!
//! Input files (UTF-8, tab separated unless noted):
//!
//! | file              | columns                                          |
//! |-------------------|--------------------------------------------------|
//! | `pages.tsv`       | title, `ARTICLE` / `REDIRECT:<target>` / `DISAMBIG` / `LIST` |
//! | `anchors.tsv`     | anchor text, target title, count                 |
//! | `links.tsv`       | source title, target title                       |
//! | `revisions.jsonl` | `{"title", "timestamp", "text"}` per line        |
//! | `pageviews.tsv`   | title, `YYYY-MM-DD`, count                       |
//!
//! Redirects are resolved everywhere. Only `ARTICLE` pages become entities;
//! disambiguation page titles still feed the lexicon, pointing at the
//! articles the page links to.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{DayRange, TimeSeries};
use crate::error::{Error, Result};
use crate::text::{self, TokenBag};

/// Dense index of an article; ids follow lexicographic title order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PageKind {
    Article,
    Redirect(String),
    Disambiguation,
    List,
}

impl std::str::FromStr for PageKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "ARTICLE" => Ok(PageKind::Article),
            "DISAMBIG" => Ok(PageKind::Disambiguation),
            "LIST" => Ok(PageKind::List),
            other => match other.strip_prefix("REDIRECT:") {
                Some(t) if !t.trim().is_empty() => Ok(PageKind::Redirect(t.trim().to_string())),
                _ => Err(format!("unknown page flag {other:?}")),
            },
        }
    }
}

/// Raw snapshot records, before resolution.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSources {
    pub pages: Vec<(String, PageKind)>,
    pub anchors: Vec<(String, String, u64)>,
    pub links: Vec<(String, String)>,
    pub revisions: Vec<(String, DateTime<Utc>, String)>,
    pub pageviews: Vec<(String, NaiveDate, u64)>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(body
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn columns<'a>(path: &Path, lineno: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() != n || cols.iter().any(|c| c.is_empty()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("expected {n} non-empty tab-separated columns"),
        });
    }
    Ok(cols)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

impl SnapshotSources {
    /// Reads the five snapshot files from `dir`. `pages.tsv` is required;
    /// the others may be absent and are then treated as empty.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut src = SnapshotSources::default();

        let pages = dir.join("pages.tsv");
        for (n, line) in read_lines(&pages)? {
            let c = columns(&pages, n, &line, 2)?;
            let kind = c[1].parse().map_err(|m: String| parse_err(&pages, n, m))?;
            src.pages.push((c[0].to_string(), kind));
        }

        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };

        if let Some(path) = optional("anchors.tsv") {
            for (n, line) in read_lines(&path)? {
                let c = columns(&path, n, &line, 3)?;
                let count = c[2]
                    .parse::<u64>()
                    .map_err(|e| parse_err(&path, n, e.to_string()))?;
                src.anchors
                    .push((c[0].to_string(), c[1].to_string(), count));
            }
        }
        if let Some(path) = optional("links.tsv") {
            for (n, line) in read_lines(&path)? {
                let c = columns(&path, n, &line, 2)?;
                src.links.push((c[0].to_string(), c[1].to_string()));
            }
        }
        if let Some(path) = optional("revisions.jsonl") {
            #[derive(Deserialize)]
            struct Rev {
                title: String,
                timestamp: serde_json::Value,
                text: String,
            }
            for (n, line) in read_lines(&path)? {
                let rev: Rev =
                    serde_json::from_str(&line).map_err(|e| parse_err(&path, n, e.to_string()))?;
                let at = text::parse_timestamp(&rev.timestamp)
                    .ok_or_else(|| parse_err(&path, n, "bad timestamp"))?;
                src.revisions.push((rev.title, at, rev.text));
            }
        }
        if let Some(path) = optional("pageviews.tsv") {
            for (n, line) in read_lines(&path)? {
                let c = columns(&path, n, &line, 3)?;
                let day = NaiveDate::parse_from_str(c[1], "%Y-%m-%d")
                    .map_err(|e| parse_err(&path, n, e.to_string()))?;
                let count = c[2]
                    .parse::<u64>()
                    .map_err(|e| parse_err(&path, n, e.to_string()))?;
                src.pageviews.push((c[0].to_string(), day, count));
            }
        }
        Ok(src)
    }
}

/// Which normalization the link prior uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkPriorMode {
    /// `|l_m(e)| / sum_e' |l_m(e')|`: a distribution over the candidates of `m`.
    #[default]
    EntityGivenMention,
    /// `|l_m(e)| / sum_m' |l_m'(e)|`: share of `e`'s incoming anchors that use `m`.
    AnchorShareOfEntity,
}

/// Surface form -> candidate entities with link counts.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Vec<(EntityId, u64)>>,
    entity_totals: HashMap<EntityId, u64>,
    vocabulary: HashSet<String>,
}

impl Lexicon {
    /// Aggregates `(surface form, entity, count)` triples. Surface forms are
    /// normalized; zero counts are ignored.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, EntityId, u64)>,
        S: AsRef<str>,
    {
        let mut agg: HashMap<String, BTreeMap<EntityId, u64>> = HashMap::new();
        for (surface, e, n) in counts {
            let m = text::normalize_surface(surface.as_ref());
            if m.is_empty() || n == 0 {
                continue;
            }
            *agg.entry(m).or_default().entry(e).or_insert(0) += n;
        }
        let mut lex = Lexicon::default();
        for (m, per_entity) in agg {
            let mut list: Vec<(EntityId, u64)> = per_entity.into_iter().collect();
            list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(e, n) in &list {
                *lex.entity_totals.entry(e).or_insert(0) += n;
            }
            lex.vocabulary.extend(m.split(' ').map(str::to_string));
            lex.entries.insert(m, list);
        }
        lex
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.entries.contains_key(surface)
    }

    /// Candidates sorted by count descending, then id.
    pub fn get(&self, surface: &str) -> Option<&[(EntityId, u64)]> {
        self.entries.get(surface).map(Vec::as_slice)
    }

    /// Every single word occurring in some surface form.
    pub fn vocabulary(&self) -> &HashSet<String> {
        &self.vocabulary
    }

    /// Link prior of each candidate of `surface`; empty when unknown.
    pub fn link_prior(&self, surface: &str, mode: LinkPriorMode) -> Vec<(EntityId, f64)> {
        let Some(list) = self.entries.get(surface) else {
            return Vec::new();
        };
        match mode {
            LinkPriorMode::EntityGivenMention => {
                let total: u64 = list.iter().map(|&(_, n)| n).sum();
                list.iter()
                    .map(|&(e, n)| (e, n as f64 / total as f64))
                    .collect()
            }
            LinkPriorMode::AnchorShareOfEntity => list
                .iter()
                .map(|&(e, n)| (e, n as f64 / self.entity_totals[&e] as f64))
                .collect(),
        }
    }
}

/// Article link graph with in- and out-adjacency kept in sync.
#[derive(Debug, Clone, Default)]
pub struct LinkGraph {
    out: Vec<Vec<EntityId>>,
    inc: Vec<Vec<EntityId>>,
}

impl LinkGraph {
    /// Self links and duplicates are dropped.
    pub fn from_edges(
        entity_count: usize,
        edges: impl IntoIterator<Item = (EntityId, EntityId)>,
    ) -> Self {
        let mut out = vec![BTreeSet::new(); entity_count];
        let mut inc = vec![BTreeSet::new(); entity_count];
        for (s, t) in edges {
            if s != t {
                out[s.index()].insert(t);
                inc[t.index()].insert(s);
            }
        }
        let flatten =
            |v: Vec<BTreeSet<EntityId>>| v.into_iter().map(|s| s.into_iter().collect()).collect();
        LinkGraph {
            out: flatten(out),
            inc: flatten(inc),
        }
    }

    /// `|E|`.
    pub fn entity_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Sorted targets of `e`'s article links.
    pub fn outgoing(&self, e: EntityId) -> &[EntityId] {
        &self.out[e.index()]
    }

    /// Sorted sources linking to `e`.
    pub fn incoming(&self, e: EntityId) -> &[EntityId] {
        &self.inc[e.index()]
    }

    pub fn links(&self, from: EntityId, to: EntityId) -> bool {
        self.out[from.index()].binary_search(&to).is_ok()
    }

    /// Union of in- and out-neighbours, sorted.
    pub fn neighbours(&self, e: EntityId) -> Vec<EntityId> {
        let mut v: Vec<EntityId> = self
            .outgoing(e)
            .iter()
            .chain(self.incoming(e))
            .copied()
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Revision {
    pub at: DateTime<Utc>,
    pub text: String,
}

/// Per-entity revisions in strictly increasing time order.
#[derive(Debug, Clone, Default)]
pub struct RevisionStore {
    revisions: Vec<Vec<Revision>>,
}

impl RevisionStore {
    /// Revisions are sorted by time; when two share a timestamp the later
    /// record wins.
    pub fn new(
        entity_count: usize,
        records: impl IntoIterator<Item = (EntityId, Revision)>,
    ) -> Self {
        let mut revisions: Vec<Vec<Revision>> = vec![Vec::new(); entity_count];
        for (e, r) in records {
            revisions[e.index()].push(r);
        }
        for list in &mut revisions {
            list.sort_by_key(|r| r.at);
            let mut dedup: Vec<Revision> = Vec::with_capacity(list.len());
            for r in list.drain(..) {
                match dedup.last_mut() {
                    Some(last) if last.at == r.at => *last = r,
                    _ => dedup.push(r),
                }
            }
            *list = dedup;
        }
        RevisionStore { revisions }
    }

    pub fn revisions(&self, e: EntityId) -> &[Revision] {
        self.revisions.get(e.index()).map_or(&[], Vec::as_slice)
    }

    /// Tokens of the latest revision (`C(e)`).
    pub fn latest_context(&self, e: EntityId) -> TokenBag {
        self.revisions(e)
            .last()
            .map(|r| text::bag(text::words(&r.text)))
            .unwrap_or_default()
    }

    /// Tokens added during `period` extended by `lag_days` (`C_T(e)`).
    ///
    /// The revision sequence is the last revision before the period followed
    /// by every revision inside it; the additions of each consecutive pair are
    /// accumulated. Without a prior revision the first in-period revision is
    /// the base.
    pub fn temporal_context(&self, e: EntityId, period: DayRange, lag_days: u32) -> TokenBag {
        let span = period.extend_end(lag_days as i64);
        let revs = self.revisions(e);
        let first_in = revs.partition_point(|r| r.at.date_naive() < span.start);
        let end = revs.partition_point(|r| r.at.date_naive() <= span.end);
        if first_in == end {
            return TokenBag::new();
        }
        let base = first_in.saturating_sub(1);
        let mut acc = TokenBag::new();
        let mut prev = text::bag(text::words(&revs[base].text));
        for r in &revs[base + 1..end] {
            let cur = text::bag(text::words(&r.text));
            text::merge_into(&mut acc, &text::added_tokens(&prev, &cur));
            prev = cur;
        }
        acc
    }
}

/// Daily view counts per entity, redirect views folded in.
#[derive(Debug, Clone, Default)]
pub struct PageViewStore {
    views: Vec<BTreeMap<NaiveDate, u64>>,
}

impl PageViewStore {
    pub fn new(
        entity_count: usize,
        records: impl IntoIterator<Item = (EntityId, NaiveDate, u64)>,
    ) -> Self {
        let mut views = vec![BTreeMap::new(); entity_count];
        for (e, day, n) in records {
            *views[e.index()].entry(day).or_insert(0) += n;
        }
        PageViewStore { views }
    }

    pub fn views(&self, e: EntityId, day: NaiveDate) -> u64 {
        self.views
            .get(e.index())
            .and_then(|m| m.get(&day))
            .copied()
            .unwrap_or(0)
    }

    /// `TS_e` over `period`; missing days are zero.
    pub fn view_series(&self, e: EntityId, period: DayRange) -> TimeSeries {
        let mut values = vec![0u64; period.len()];
        if let Some(m) = self.views.get(e.index()) {
            for (day, &n) in m.range(period.start..=period.end) {
                values[period.index_of(*day).unwrap()] = n;
            }
        }
        TimeSeries {
            start_day: period.start,
            values,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub entities: usize,
    pub redirects: usize,
    pub excluded_pages: usize,
    pub lexicon_entries: usize,
    pub link_edges: usize,
    pub revisions: usize,
    pub pageview_records: usize,
    /// Redirect pages dropped because their chain loops or dead-ends.
    pub dropped_redirects: usize,
    /// Anchor, link, revision or page-view records naming an unknown or
    /// non-article title.
    pub dangling_references: usize,
}

/// All snapshot stores. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct WikiSnapshot {
    titles: Vec<String>,
    ids: HashMap<String, EntityId>,
    pub lexicon: Lexicon,
    pub links: LinkGraph,
    pub revisions: RevisionStore,
    pub pageviews: PageViewStore,
    pub report: BuildReport,
}

enum Resolved {
    Article(EntityId),
    Disambiguation(String),
    Other,
}

struct Resolver<'a> {
    kinds: HashMap<&'a str, &'a PageKind>,
    ids: &'a HashMap<String, EntityId>,
}

impl Resolver<'_> {
    fn resolve(&self, title: &str) -> Resolved {
        let mut seen = HashSet::new();
        let mut cur = title;
        loop {
            if !seen.insert(cur) {
                return Resolved::Other;
            }
            match self.kinds.get(cur) {
                Some(PageKind::Article) => return Resolved::Article(self.ids[cur]),
                Some(PageKind::Redirect(t)) => cur = t.as_str(),
                Some(PageKind::Disambiguation) => return Resolved::Disambiguation(cur.to_string()),
                Some(PageKind::List) | None => return Resolved::Other,
            }
        }
    }

    fn article(&self, title: &str) -> Option<EntityId> {
        match self.resolve(title) {
            Resolved::Article(e) => Some(e),
            _ => None,
        }
    }
}

fn disambiguation_surface(title: &str) -> &str {
    title
        .strip_suffix("(disambiguation)")
        .map(str::trim_end)
        .unwrap_or(title)
}

impl WikiSnapshot {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self::build(SnapshotSources::read_dir(dir)?))
    }

    pub fn build(src: SnapshotSources) -> Self {
        let mut report = BuildReport::default();

        let mut article_titles: Vec<String> = src
            .pages
            .iter()
            .filter(|(_, k)| *k == PageKind::Article)
            .map(|(t, _)| t.clone())
            .collect();
        article_titles.sort();
        article_titles.dedup();
        let ids: HashMap<String, EntityId> = article_titles
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), EntityId(i as u32)))
            .collect();
        let n = article_titles.len();

        let resolver = Resolver {
            kinds: src.pages.iter().map(|(t, k)| (t.as_str(), k)).collect(),
            ids: &ids,
        };

        let mut lexicon_counts: Vec<(String, EntityId, u64)> = Vec::new();
        for t in &article_titles {
            lexicon_counts.push((t.clone(), ids[t], 1));
        }
        for (title, kind) in &src.pages {
            match kind {
                PageKind::Redirect(_) => match resolver.article(title) {
                    Some(e) => {
                        report.redirects += 1;
                        lexicon_counts.push((title.clone(), e, 1));
                    }
                    None => {
                        log::warn!("dropping redirect {title:?}: chain does not reach an article");
                        report.dropped_redirects += 1;
                    }
                },
                PageKind::Disambiguation | PageKind::List => report.excluded_pages += 1,
                PageKind::Article => {}
            }
        }
        for (anchor, target, count) in &src.anchors {
            match resolver.article(target) {
                Some(e) => lexicon_counts.push((anchor.clone(), e, *count)),
                None => report.dangling_references += 1,
            }
        }

        let mut edges = Vec::new();
        for (source, target) in &src.links {
            let Some(to) = resolver.article(target) else {
                report.dangling_references += 1;
                continue;
            };
            match resolver.resolve(source) {
                Resolved::Article(from) => edges.push((from, to)),
                Resolved::Disambiguation(page) => {
                    lexicon_counts.push((disambiguation_surface(&page).to_string(), to, 1));
                }
                Resolved::Other => report.dangling_references += 1,
            }
        }

        let mut revisions = Vec::new();
        for (title, at, body) in src.revisions {
            match resolver.article(&title) {
                Some(e) => revisions.push((e, Revision { at, text: body })),
                None => report.dangling_references += 1,
            }
        }

        let mut views = Vec::new();
        for (title, day, count) in &src.pageviews {
            match resolver.article(title) {
                Some(e) => views.push((e, *day, *count)),
                None => report.dangling_references += 1,
            }
        }
        if report.dangling_references > 0 {
            log::warn!(
                "{} snapshot records reference unknown titles",
                report.dangling_references
            );
        }

        let lexicon = Lexicon::from_counts(lexicon_counts);
        let links = LinkGraph::from_edges(n, edges);
        report.pageview_records = views.len();
        let revisions = RevisionStore::new(n, revisions);
        let pageviews = PageViewStore::new(n, views);

        report.entities = n;
        report.lexicon_entries = lexicon.len();
        report.link_edges = links.edge_count();
        report.revisions = (0..n)
            .map(|i| revisions.revisions(EntityId(i as u32)).len())
            .sum();

        WikiSnapshot {
            titles: article_titles,
            ids,
            lexicon,
            links,
            revisions,
            pageviews,
            report,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.titles.len()
    }

    pub fn title(&self, e: EntityId) -> &str {
        &self.titles[e.index()]
    }

    /// Looks up an article by exact title (no redirect resolution).
    pub fn entity(&self, title: &str) -> Option<EntityId> {
        self.ids.get(title).copied()
    }
}
