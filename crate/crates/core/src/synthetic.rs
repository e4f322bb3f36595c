//! Deterministic synthetic corpus and snapshot for end-to-end runs.
//!
//! The world covers January to March 2014 and has three hashtags:
//!
//! * `#sochi2014` bursts around 2014-02-15. `2014 Winter Olympics` is built
//!   to be its most prominent entity: its page views follow the burst, its
//!   in-window revisions add the vocabulary of the tweets, it owns the
//!   hashtag's own surface form, and its article cites the rest of the topic.
//! * `#mh370` bursts around 2014-03-09 with `Malaysia Airlines Flight 370`
//!   in the same role.
//! * `#weekend` is steady chatter and never trends.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Tweet, TweetCorpus};
use crate::error::{Error, Result};
use crate::metrics::GoldLabels;
use crate::wiki::{PageKind, SnapshotSources, WikiSnapshot};

pub const OLYMPICS: &str = "2014 Winter Olympics";
pub const FLIGHT: &str = "Malaysia Airlines Flight 370";

const OLYMPIC_TOPIC: &[&str] = &[
    "Sochi",
    "Russia",
    "Ice hockey",
    "Figure skating",
    "Alpine skiing",
    "Snowboarding",
    "Biathlon",
    "Canada men's national ice hockey team",
    "Sweden men's national ice hockey team",
    "Yulia Lipnitskaya",
    "Sidney Crosby",
    "Fisht Olympic Stadium",
    "Vladimir Putin",
    "Bolshoy Ice Dome",
    "Olympic medal",
];

/// Pages that cite every page of a topic but are cited by none, giving topic
/// pages shared in-links without drawing walk mass themselves.
const OLYMPIC_HUBS: &[&str] = &[
    "Winter Olympic Games",
    "International Olympic Committee",
    "Winter sports",
];

const FLIGHT_TOPIC: &[&str] = &[
    "Malaysia Airlines",
    "Boeing 777",
    "Kuala Lumpur",
    "Beijing",
    "Indian Ocean",
    "Malaysia",
];

const FLIGHT_HUBS: &[&str] = &["Aviation accident", "Air transport"];

const FILLER: &[&str] = &[
    "Sochi (film)",
    "Weekend",
    "Barack Obama",
    "Apple Inc.",
    "Association football",
    "Music",
    "Pizza",
    "Paris",
    "London",
    "Television",
    "Coffee",
];

pub struct SyntheticWorld {
    pub sources: SnapshotSources,
    pub tweets: Vec<Tweet>,
    /// `(hashtag, title, grade)`.
    pub gold: Vec<(String, String, u8)>,
}

fn day(s: &str) -> NaiveDate {
    s.parse().expect("valid fixture date")
}

struct HashtagPlan {
    peak: NaiveDate,
    /// Tweets per day at offsets -3..=3 from the peak.
    burst: [u32; 7],
    baseline: u32,
    templates: &'static [&'static str],
    users: std::ops::Range<u32>,
}

const SOCHI_TEMPLATES: &[&str] = &[
    "Watching the opening ceremony from Sochi #sochi2014",
    "Canada wins gold medal in the hockey final #sochi2014 http://t.co/abc",
    "Lipnitskaya figure skating was amazing :) #sochi2014",
    "@friend did you see crosby score in the hockey final? #sochi2014",
    "Putin smiles at the winter olympics ceremony #sochi2014",
    "Russia hosts the olympics in sochi #sochi2014",
    "Sweden vs canada hockey final tonight #sochi2014",
    "Another gold medal for russia in figure skating #sochi2014",
    "snowboarding and alpine skiing all day #sochi2014",
];

const FLIGHT_TEMPLATES: &[&str] = &[
    "Prayers for the missing Malaysia Airlines flight #mh370",
    "Search in the indian ocean continues #mh370",
    "boeing 777 vanished after leaving kuala lumpur for beijing #mh370",
    "Still no trace of the plane #prayformh370 #mh370",
    "Malaysia asks for help in the search #mh370 http://t.co/xyz",
];

const WEEKEND_TEMPLATES: &[&str] = &[
    "Pizza and music this #weekend",
    "Coffee in paris this #weekend :)",
    "Finally the #weekend",
];

fn tweets_for(
    plan: &HashtagPlan,
    start: NaiveDate,
    days: i64,
    rng: &mut ChaCha8Rng,
    next_id: &mut u64,
) -> Vec<Tweet> {
    let mut out = Vec::new();
    for offset in 0..days {
        let d = start + Duration::days(offset);
        let from_peak = (d - plan.peak).num_days();
        let n = if (-3..=3).contains(&from_peak) {
            plan.burst[(from_peak + 3) as usize]
        } else {
            rng.gen_range(0..=plan.baseline)
        };
        for _ in 0..n {
            let text = plan.templates[rng.gen_range(0..plan.templates.len())];
            let user = rng.gen_range(plan.users.clone());
            *next_id += 1;
            out.push(Tweet::new(
                &format!("t{next_id}"),
                d,
                text,
                &format!("u{user}"),
            ));
        }
    }
    out
}

fn article(title: &str) -> (String, PageKind) {
    (title.to_string(), PageKind::Article)
}

/// Builds the synthetic world; the same seed gives the same world.
pub fn olympics_world(seed: u64) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = day("2014-01-01");
    let days = 90;

    // tweets
    let plans = [
        HashtagPlan {
            peak: day("2014-02-15"),
            burst: [60, 120, 300, 900, 350, 150, 70],
            baseline: 6,
            templates: SOCHI_TEMPLATES,
            users: 0..3000,
        },
        HashtagPlan {
            peak: day("2014-03-09"),
            burst: [0, 0, 40, 700, 300, 120, 60],
            baseline: 2,
            templates: FLIGHT_TEMPLATES,
            users: 2000..4500,
        },
        HashtagPlan {
            peak: day("2014-02-01"),
            burst: [20, 20, 20, 20, 20, 20, 20],
            baseline: 20,
            templates: WEEKEND_TEMPLATES,
            users: 0..5000,
        },
    ];
    let mut next_id = 0;
    let mut tweets = Vec::new();
    for plan in &plans {
        tweets.extend(tweets_for(plan, start, days, &mut rng, &mut next_id));
    }

    // pages
    let mut pages: Vec<(String, PageKind)> = Vec::new();
    for t in [OLYMPICS, FLIGHT]
        .iter()
        .chain(OLYMPIC_TOPIC)
        .chain(OLYMPIC_HUBS)
        .chain(FLIGHT_TOPIC)
        .chain(FLIGHT_HUBS)
        .chain(FILLER)
    {
        pages.push(article(t));
    }
    for (from, to) in [
        ("Sochi 2014", OLYMPICS),
        ("Sochi Olympics", OLYMPICS),
        ("MH370", FLIGHT),
        ("Lipnitskaya", "Yulia Lipnitskaya"),
        ("Crosby", "Sidney Crosby"),
        ("Putin", "Vladimir Putin"),
        ("Boeing 777-200ER", "Boeing 777"),
    ] {
        pages.push((from.to_string(), PageKind::Redirect(to.to_string())));
    }
    pages.push(("Sochi (disambiguation)".into(), PageKind::Disambiguation));
    pages.push(("List of Olympic venues".into(), PageKind::List));

    // anchors
    let anchor = |a: &str, t: &str, n: u64| (a.to_string(), t.to_string(), n);
    let anchors = vec![
        anchor("sochi", "Sochi", 30),
        anchor("sochi", OLYMPICS, 10),
        anchor("sochi", "Sochi (film)", 2),
        anchor("olympics", "Winter Olympic Games", 20),
        anchor("olympics", OLYMPICS, 15),
        anchor("winter olympics", OLYMPICS, 25),
        anchor("winter olympics", "Winter Olympic Games", 20),
        anchor("hockey", "Ice hockey", 40),
        anchor("hockey final", OLYMPICS, 3),
        anchor("figure skating", "Figure skating", 30),
        anchor("gold medal", "Olympic medal", 12),
        anchor("canada", "Canada men's national ice hockey team", 4),
        anchor("sweden", "Sweden men's national ice hockey team", 4),
        anchor("russia", "Russia", 50),
        anchor("opening ceremony", OLYMPICS, 5),
        anchor("snowboarding", "Snowboarding", 8),
        anchor("alpine skiing", "Alpine skiing", 8),
        anchor("malaysia airlines flight", FLIGHT, 6),
        anchor("malaysia airlines", "Malaysia Airlines", 25),
        anchor("malaysia", "Malaysia", 40),
        anchor("indian ocean", "Indian Ocean", 20),
        anchor("kuala lumpur", "Kuala Lumpur", 20),
        anchor("beijing", "Beijing", 30),
        anchor("plane", "Boeing 777", 1),
        anchor("music", "Music", 10),
        anchor("pizza", "Pizza", 10),
        anchor("paris", "Paris", 30),
        anchor("coffee", "Coffee", 10),
        anchor("weekend", "Weekend", 10),
    ];

    // links
    let mut links: Vec<(String, String)> = Vec::new();
    let mut link = |a: &str, b: &str| links.push((a.to_string(), b.to_string()));
    for (main, topic, hubs) in [
        (OLYMPICS, OLYMPIC_TOPIC, OLYMPIC_HUBS),
        (FLIGHT, FLIGHT_TOPIC, FLIGHT_HUBS),
    ] {
        for t in topic {
            link(main, t);
            link(t, main);
            for h in hubs {
                link(h, t);
            }
        }
        for h in hubs {
            link(h, main);
        }
    }
    link("Sochi", "Russia");
    link("Vladimir Putin", "Russia");
    link("Sidney Crosby", "Canada men's national ice hockey team");
    link("Canada men's national ice hockey team", "Ice hockey");
    link("Sweden men's national ice hockey team", "Ice hockey");
    link("Kuala Lumpur", "Malaysia");
    link("Malaysia Airlines", "Malaysia");
    link("Sochi (film)", "Sochi");
    link("Sochi (film)", "Television");
    link("Weekend", "Music");
    link("Paris", "London");
    link("London", "Paris");
    link("Coffee", "Pizza");
    link("Sochi (disambiguation)", "Sochi");
    link("Sochi (disambiguation)", "Sochi (film)");
    link("Sochi (disambiguation)", "Sochi 2014");
    link("List of Olympic venues", "Fisht Olympic Stadium");

    // revisions
    let at = |d: &str, h: u32| Utc.from_utc_datetime(&day(d).and_hms_opt(h, 0, 0).unwrap());
    let mut revisions = Vec::new();
    let all_titles: Vec<&str> = pages
        .iter()
        .filter(|(_, k)| *k == PageKind::Article)
        .map(|(t, _)| t.as_str())
        .collect();
    for t in &all_titles {
        revisions.push((
            t.to_string(),
            at("2013-11-01", 12),
            format!("{t} is an article about {t} with general background and history"),
        ));
    }
    let olympic_edits = [
        ("2014-02-13", "opening ceremony held in sochi russia"),
        (
            "2014-02-15",
            "canada beat sweden in the hockey final for the gold medal",
        ),
        (
            "2014-02-16",
            "crosby scored and lipnitskaya won gold in figure skating",
        ),
        ("2014-02-19", "snowboarding and alpine skiing medal results"),
    ];
    let mut body = format!("{OLYMPICS} is an international multi sport event");
    for (d, added) in olympic_edits {
        let _ = write!(body, " {added}");
        revisions.push((OLYMPICS.to_string(), at(d, 18), body.clone()));
    }
    let flight_edits = [
        (
            "2014-03-08",
            "the boeing 777 flight from kuala lumpur to beijing went missing",
        ),
        ("2014-03-10", "search in the indian ocean by malaysia"),
    ];
    let mut body = format!("{FLIGHT} was a scheduled passenger flight");
    for (d, added) in flight_edits {
        let _ = write!(body, " {added}");
        revisions.push((FLIGHT.to_string(), at(d, 18), body.clone()));
    }
    // an unrelated in-window edit sharing little vocabulary
    revisions.push((
        "Sochi".to_string(),
        at("2014-02-14", 9),
        "Sochi is an article about Sochi with general background and history population climate"
            .to_string(),
    ));

    // page views
    let mut pageviews = Vec::new();
    let shape = |d: NaiveDate, peak: NaiveDate, burst: &[u32; 7]| -> Option<u64> {
        let off = (d - peak).num_days();
        (-3..=3)
            .contains(&off)
            .then(|| burst[(off + 3) as usize] as u64)
    };
    for (i, t) in all_titles.iter().enumerate() {
        let base = 200 + 37 * i as u64;
        for offset in 0..days {
            let d = start + Duration::days(offset);
            let noise = rng.gen_range(0..base / 10 + 1);
            let mut v = base + noise;
            if *t == OLYMPICS {
                // views lag the tweets by one day
                if let Some(n) = shape(d - Duration::days(1), plans[0].peak, &plans[0].burst) {
                    v += 40 * n;
                }
            }
            if *t == FLIGHT {
                if let Some(n) = shape(d, plans[1].peak, &plans[1].burst) {
                    v += 60 * n;
                }
            }
            pageviews.push((t.to_string(), d, v));
        }
    }
    // redirect traffic folds into the target
    for offset in 0..days {
        pageviews.push(("Sochi 2014".to_string(), start + Duration::days(offset), 25));
    }

    let gold = [
        ("sochi2014", OLYMPICS, 2),
        ("sochi2014", "Sidney Crosby", 2),
        ("sochi2014", "Yulia Lipnitskaya", 2),
        ("sochi2014", "Canada men's national ice hockey team", 2),
        ("sochi2014", "Ice hockey", 1),
        ("sochi2014", "Figure skating", 1),
        ("sochi2014", "Sochi", 1),
        ("sochi2014", "Russia", 1),
        ("sochi2014", "Olympic medal", 1),
        ("sochi2014", "Sochi (film)", 0),
        ("mh370", FLIGHT, 2),
        ("mh370", "Malaysia Airlines", 2),
        ("mh370", "Boeing 777", 1),
        ("mh370", "Kuala Lumpur", 1),
        ("mh370", "Beijing", 1),
        ("mh370", "Indian Ocean", 1),
        ("mh370", "Pizza", 0),
    ]
    .iter()
    .map(|&(h, t, g)| (h.to_string(), t.to_string(), g))
    .collect();

    SyntheticWorld {
        sources: SnapshotSources {
            pages,
            anchors,
            links,
            revisions,
            pageviews,
        },
        tweets,
        gold,
    }
}

impl SyntheticWorld {
    pub fn corpus(&self) -> TweetCorpus {
        TweetCorpus::from_tweets(self.tweets.clone()).0
    }

    pub fn snapshot(&self) -> WikiSnapshot {
        WikiSnapshot::build(self.sources.clone())
    }

    pub fn gold_labels(&self) -> GoldLabels {
        let mut gold = GoldLabels::default();
        for (tag, title, grade) in &self.gold {
            gold.insert(tag, title, *grade)
                .expect("fixture grades are in range");
        }
        gold
    }

    /// Writes `tweets.jsonl`, `gold.tsv` and the snapshot files under
    /// `dir/wiki/`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let wiki = dir.join("wiki");
        fs::create_dir_all(&wiki).map_err(|e| Error::io(&wiki, e))?;
        let write =
            |name: &Path, body: String| fs::write(name, body).map_err(|e| Error::io(name, e));

        let mut body = String::new();
        for t in &self.tweets {
            let ts = t.day.and_hms_opt(12, 0, 0).unwrap().and_utc().to_rfc3339();
            let rec = serde_json::json!({"id": t.id, "timestamp": ts, "text": t.text, "user_id": t.user_id});
            let _ = writeln!(body, "{rec}");
        }
        write(&dir.join("tweets.jsonl"), body)?;

        let mut body = String::new();
        for (h, t, g) in &self.gold {
            let _ = writeln!(body, "{h}\t{t}\t{g}");
        }
        write(&dir.join("gold.tsv"), body)?;

        let s = &self.sources;
        let mut body = String::new();
        for (t, k) in &s.pages {
            let flag = match k {
                PageKind::Article => "ARTICLE".to_string(),
                PageKind::Redirect(to) => format!("REDIRECT:{to}"),
                PageKind::Disambiguation => "DISAMBIG".to_string(),
                PageKind::List => "LIST".to_string(),
            };
            let _ = writeln!(body, "{t}\t{flag}");
        }
        write(&wiki.join("pages.tsv"), body)?;

        let mut body = String::new();
        for (a, t, n) in &s.anchors {
            let _ = writeln!(body, "{a}\t{t}\t{n}");
        }
        write(&wiki.join("anchors.tsv"), body)?;

        let mut body = String::new();
        for (a, b) in &s.links {
            let _ = writeln!(body, "{a}\t{b}");
        }
        write(&wiki.join("links.tsv"), body)?;

        let mut body = String::new();
        for (t, at, text) in &s.revisions {
            let rec = serde_json::json!({"title": t, "timestamp": at.to_rfc3339(), "text": text});
            let _ = writeln!(body, "{rec}");
        }
        write(&wiki.join("revisions.jsonl"), body)?;

        let mut body = String::new();
        for (t, d, n) in &s.pageviews {
            let _ = writeln!(body, "{t}\t{d}\t{n}");
        }
        write(&wiki.join("pageviews.tsv"), body)
    }
}
