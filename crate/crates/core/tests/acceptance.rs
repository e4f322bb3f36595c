//! Acceptance gate. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p trendlink --test acceptance -- --nocapture --test-threads 1`
//! for a tidy report.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trendlink::corpus::{
    assess_burst, detect_bursts, BurstConfig, BurstRejection, Tweet, TweetCorpus,
};
use trendlink::influence::{
    component_walks, frozen_loss, ipl, loss_gradient, milne_witten, random_walk, relatedness,
    top_k, Components, DanglingPolicy, InfluenceGraph, WalkConfig,
};
use trendlink::linking::{build_candidates, longest_match, MentionMatch};
use trendlink::metrics::{evaluate, EvalConfig, GoldLabels};
use trendlink::pipeline::{run_annotate, write_annotations, Config};
use trendlink::similarity::{
    best_shift_scale, compute_similarities, divergence_similarity, temporal_similarity, KlVariant,
    LanguageModel,
};
use trendlink::synthetic::{olympics_world, FLIGHT, OLYMPICS};
use trendlink::text::bag;
use trendlink::wiki::{EntityId, LinkGraph};
use trendlink::ExecMode;

const SUM_TOL: f64 = 1e-9;

static WALKS_CHECKED: AtomicUsize = AtomicUsize::new(0);

fn report(id: &str, name: &str, ok: bool, detail: String) {
    println!(
        "[{}] {id} {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Runs a walk and checks that the result keeps the teleport's total mass
/// (1 for every probability teleport).
fn walk(graph: &InfluenceGraph, s: &[f64], cfg: &WalkConfig) -> Vec<f64> {
    let r = random_walk(graph, s, cfg).scores;
    let want: f64 = s.iter().sum();
    let got: f64 = r.iter().sum();
    assert!(
        (got - want).abs() <= SUM_TOL,
        "walk mass {got} vs teleport mass {want}"
    );
    assert!(r.iter().all(|&x| x >= 0.0));
    WALKS_CHECKED.fetch_add(1, Ordering::Relaxed);
    r
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// Random probability vector with some exact zeros.
fn random_component(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> InfluenceGraph {
    let density = rng.gen_range(0.05..0.5);
    let mut edges = Vec::new();
    for from in 0..n {
        // leave some nodes dangling
        if rng.gen_bool(0.15) {
            continue;
        }
        for to in 0..n {
            if from != to && rng.gen_bool(density) {
                edges.push((from, to, rng.gen_range(0.01..1.0)));
            }
        }
    }
    InfluenceGraph::from_weighted_edges(n, edges)
}

fn random_components(rng: &mut ChaCha8Rng, n: usize) -> Components {
    Components {
        mention: random_component(rng, n),
        context: random_component(rng, n),
        temporal: random_component(rng, n),
    }
}

#[test]
fn a01_walk_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = WalkConfig::default();
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(5..=50);
        let graph = random_graph(&mut rng, n);
        let comps = random_components(&mut rng, n);
        let w = random_simplex(&mut rng, 3);
        let parts: Vec<Vec<f64>> = comps
            .as_array()
            .iter()
            .map(|c| walk(&graph, c, &cfg))
            .collect();
        let fused = comps.fuse([w[0], w[1], w[2]]);
        let whole = walk(&graph, &fused, &cfg);
        for i in 0..n {
            let combo = w[0] * parts[0][i] + w[1] * parts[1][i] + w[2] * parts[2][i];
            worst = worst.max((whole[i] - combo).abs());
        }
    }
    let elapsed = t0.elapsed();
    let ok = worst <= 1e-8 && elapsed < Duration::from_secs(10);
    report(
        "01",
        "walk linearity",
        ok,
        format!("max L-inf {worst:.2e} over 200 graphs in {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn a02_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = WalkConfig::default();
    let h = 1e-6;
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(5..=40);
        let graph = random_graph(&mut rng, n);
        let comps = random_components(&mut rng, n);
        let w = random_simplex(&mut rng, 3);
        let w = [w[0], w[1], w[2]];
        let r = walk(&graph, &comps.fuse(w), &cfg);
        let k = rng.gen_range(1..=n.min(15));
        let top = top_k(&r, graph.nodes(), k);
        let walks = component_walks(&graph, &comps, &cfg, ExecMode::Sequential);
        for wk in &walks {
            assert!((wk.scores.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL);
        }
        let analytic = loss_gradient(
            w,
            &comps,
            [&walks[0].scores, &walks[1].scores, &walks[2].scores],
            &top,
        );
        let numeric: [f64; 3] = std::array::from_fn(|i| {
            let mut up = w;
            let mut down = w;
            up[i] += h;
            down[i] -= h;
            (frozen_loss(up, &comps, &graph, &cfg, &top)
                - frozen_loss(down, &comps, &graph, &cfg, &top))
                / (2.0 * h)
        });
        let scale = analytic
            .iter()
            .chain(&numeric)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if scale < 1e-12 {
            continue;
        }
        let err = (0..3)
            .map(|i| (analytic[i] - numeric[i]).abs())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(err);
    }
    let elapsed = t0.elapsed();
    let ok = worst <= 1e-4 && elapsed < Duration::from_secs(10);
    report(
        "02",
        "gradient check",
        ok,
        format!("max relative error {worst:.2e} over 100 instances in {elapsed:.2?}"),
    );
    assert!(ok);
}

/// `x` moved `q` steps later, zero filled.
fn shift_oracle(x: &[f64], q: i64) -> Vec<f64> {
    (0..x.len() as i64)
        .map(|i| {
            let src = i - q;
            if src >= 0 && (src as usize) < x.len() {
                x[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

#[test]
fn a03_closed_form_scale_and_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_delta: f64 = 0.0;
    for _ in 0..500 {
        let len = rng.gen_range(5..=12);
        let q = rng.gen_range(-3..=3);
        let e: Vec<f64> = (0..len).map(|_| rng.gen_range(1.0..10.0)).collect();
        let c = rng.gen_range(0.1..3.0);
        let d = shift_oracle(&e, q);
        let h: Vec<f64> = d.iter().map(|x| c * x + rng.gen_range(0.0..1.0)).collect();
        let norm_h = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (mut best_delta, mut best_dist) = (0.0, f64::INFINITY);
        for step in 0..=50_000 {
            let delta = step as f64 * 1e-4;
            let dist = h
                .iter()
                .zip(&d)
                .map(|(a, b)| (a - delta * b).powi(2))
                .sum::<f64>()
                .sqrt()
                / norm_h;
            if dist < best_dist {
                best_delta = delta;
                best_dist = dist;
            }
        }
        let m = best_shift_scale(&h, &e, q);
        worst_delta = worst_delta.max((m.scale - best_delta).abs());
    }

    let mut worst_ft: f64 = 0.0;
    for _ in 0..500 {
        let core = rng.gen_range(1..=10);
        let mut h = vec![0.0; 3];
        h.extend((0..core).map(|_| rng.gen_range(0.0..50.0)));
        h.extend([0.0; 3]);
        h[3] += 1.0;
        let q = rng.gen_range(-3..=3);
        let c = rng.gen_range(0.01..100.0);
        let e: Vec<f64> = shift_oracle(&h, q).into_iter().map(|x| c * x).collect();
        let (ft, _) = temporal_similarity(&h, &e, 3);
        worst_ft = worst_ft.max((ft - 1.0).abs());
    }
    let ok = worst_delta <= 1e-3 && worst_ft <= 1e-9;
    report(
        "03",
        "closed-form shift/scale",
        ok,
        format!("max |delta - grid| {worst_delta:.2e} on 500 pairs; max |f_t - 1| {worst_ft:.2e} on 500 copies"),
    );
    assert!(ok);
}

/// Enumerates every span in the lexicon, then walks left to right taking the
/// longest span that starts at or after the cursor's position.
fn brute_force_matches(tokens: &[String], lexicon: &HashSet<String>) -> Vec<MentionMatch> {
    let mut spans = Vec::new();
    for start in 0..tokens.len() {
        for end in start + 1..=tokens.len() {
            let phrase = tokens[start..end].join(" ");
            if end - start <= 5 && lexicon.contains(&phrase) {
                spans.push((start, end - start, phrase));
            }
        }
    }
    let mut out = Vec::new();
    let mut cursor = 0;
    loop {
        let next = spans
            .iter()
            .filter(|s| s.0 >= cursor)
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        match next {
            Some((start, len, phrase)) => {
                out.push(MentionMatch {
                    mention: phrase.clone(),
                    start: *start,
                    len: *len,
                });
                cursor = start + len;
            }
            None => break,
        }
    }
    out
}

#[test]
fn a04_longest_match_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet = ["a", "b", "c", "d", "e", "f"];
    let mut mismatches = 0;
    for _ in 0..1000 {
        let mut lexicon = HashSet::new();
        for _ in 0..rng.gen_range(0..15) {
            let n = rng.gen_range(1..=6);
            let phrase: Vec<&str> = (0..n)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            lexicon.insert(phrase.join(" "));
        }
        let len = rng.gen_range(0..20);
        let tokens: Vec<String> = (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string())
            .collect();
        if longest_match(&tokens, &lexicon) != brute_force_matches(&tokens, &lexicon) {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0;
    report(
        "04",
        "longest-match equivalence",
        ok,
        format!("{mismatches} mismatches in 1000 instances"),
    );
    assert!(ok);
}

#[test]
fn a05_walk_correctness() {
    // One edge 0 -> 1; node 1 dangling. With s = (1/2, 1/2) both dangling
    // policies give B' = [[0, 1/2], [1, 1/2]].
    let graph = InfluenceGraph::from_weighted_edges(2, [(0, 1, 1.0)]);
    let s = [0.5, 0.5];
    let tau = 0.5;
    // (I - tau B') r = (1 - tau) s, solved by Cramer's rule
    let (a, b, c, d) = (1.0, -tau * 0.5, -tau * 1.0, 1.0 - tau * 0.5);
    let (y0, y1) = ((1.0 - tau) * s[0], (1.0 - tau) * s[1]);
    let det = a * d - b * c;
    let expected = [(y0 * d - b * y1) / det, (a * y1 - c * y0) / det];

    let mut worst: f64 = 0.0;
    for dangling in [DanglingPolicy::Uniform, DanglingPolicy::Teleport] {
        let cfg = WalkConfig {
            damping: tau,
            dangling,
            ..WalkConfig::default()
        };
        let r = walk(&graph, &s, &cfg);
        worst = worst
            .max((r[0] - expected[0]).abs())
            .max((r[1] - expected[1]).abs());
    }
    let hand_ok =
        worst <= 1e-9 && (expected[0] - 0.4).abs() < 1e-15 && (expected[1] - 0.6).abs() < 1e-15;

    let cycle = InfluenceGraph::from_weighted_edges(2, [(0, 1, 1.0), (1, 0, 1.0)]);
    let r = walk(&cycle, &s, &WalkConfig::default());
    let cycle_ok = (r[0] - 0.5).abs() <= 1e-12 && (r[1] - 0.5).abs() <= 1e-12;
    let frozen = walk(
        &graph,
        &[0.3, 0.7],
        &WalkConfig {
            damping: 0.0,
            ..WalkConfig::default()
        },
    );
    let tau0_ok = frozen == vec![0.3, 0.7];

    // stochasticity over many random walks, in both execution modes
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let before = WALKS_CHECKED.load(Ordering::Relaxed);
    for _ in 0..300 {
        let n = rng.gen_range(1..=60);
        let graph = random_graph(&mut rng, n);
        let s = random_component(&mut rng, n);
        let cfg = WalkConfig {
            damping: rng.gen_range(0.0..0.99),
            dangling: if rng.gen_bool(0.5) {
                DanglingPolicy::Uniform
            } else {
                DanglingPolicy::Teleport
            },
            ..WalkConfig::default()
        };
        walk(&graph, &s, &cfg);
        let comps = random_components(&mut rng, n);
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            for wk in component_walks(&graph, &comps, &cfg, mode) {
                assert!((wk.scores.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL);
            }
        }
    }
    let stochastic = WALKS_CHECKED.load(Ordering::Relaxed) - before;

    let ok = hand_ok && cycle_ok && tau0_ok;
    report(
        "05",
        "walk correctness",
        ok,
        format!(
            "2-node error {worst:.2e} vs hand solution ({:.3}, {:.3}); {stochastic} random walks sum to 1",
            expected[0], expected[1]
        ),
    );
    assert!(ok);
}

#[test]
fn a06_milne_witten() {
    let ids = |r: std::ops::Range<u32>| r.map(EntityId).collect::<Vec<_>>();

    // |E| = 1000, |I1| = 100, |I2| = 10, overlap 5
    let mut edges = Vec::new();
    for src in 10..110 {
        edges.push((EntityId(src), EntityId(0)));
    }
    for src in (10..15).chain(500..505) {
        edges.push((EntityId(src), EntityId(1)));
    }
    let graph = LinkGraph::from_edges(1000, edges);
    let expected = 1.0 - (100f64.ln() - 5f64.ln()) / (1000f64.ln() - 10f64.ln());
    let worked = milne_witten(&graph, EntityId(0), EntityId(1));
    let direct = relatedness(&ids(10..110), graph.incoming(EntityId(1)), 1000);

    let same = relatedness(&ids(0..10), &ids(0..10), 100);
    let disjoint = relatedness(&ids(0..10), &ids(10..20), 100);

    let examples_ok = (worked - 0.3494).abs() <= 1e-4
        && (worked - expected).abs() <= 1e-12
        && (direct - worked).abs() <= 1e-15
        && (same - 1.0).abs() <= 1e-4
        && disjoint == 0.0;

    // exhaustive symmetry on the synthetic snapshot and a random graph
    let mut pairs = 0usize;
    let mut asymmetric = 0usize;
    let mut out_of_range = 0usize;
    let snapshot = olympics_world(7).snapshot();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random = LinkGraph::from_edges(
        60,
        (0..400).map(|_| {
            (
                EntityId(rng.gen_range(0..60)),
                EntityId(rng.gen_range(0..60)),
            )
        }),
    );
    for g in [&snapshot.links, &random] {
        let n = g.entity_count() as u32;
        for a in 0..n {
            for b in 0..n {
                let ab = milne_witten(g, EntityId(a), EntityId(b));
                let ba = milne_witten(g, EntityId(b), EntityId(a));
                pairs += 1;
                if ab != ba {
                    asymmetric += 1;
                }
                if !(0.0..=1.0).contains(&ab) {
                    out_of_range += 1;
                }
            }
        }
    }
    let ok = examples_ok && asymmetric == 0 && out_of_range == 0;
    report(
        "06",
        "Milne-Witten",
        ok,
        format!("worked case {worked:.4}, identical {same}, disjoint {disjoint}; {pairs} ordered pairs, {asymmetric} asymmetric"),
    );
    assert!(ok);
}

#[test]
fn a07_kl_context_similarity() {
    let lm = |pairs: &[(&str, u64)]| {
        let mut b = BTreeMap::new();
        for &(w, c) in pairs {
            b.insert(w.to_string(), c);
        }
        LanguageModel::from_bag(&b)
    };
    let tweets = lm(&[("sochi", 3), ("hockey", 5), ("gold", 2)]);
    let identity = divergence_similarity(&tweets, &tweets, KlVariant::Standard);
    let same_shape = divergence_similarity(
        &lm(&[("sochi", 30), ("hockey", 50), ("gold", 20)]),
        &tweets,
        KlVariant::Standard,
    );
    let worked = divergence_similarity(
        &lm(&[("a", 8), ("b", 2)]),
        &lm(&[("a", 5), ("b", 5)]),
        KlVariant::Standard,
    );
    let expected = (-(0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln())).exp();
    let from_tokens = divergence_similarity(
        &LanguageModel::from_bag(&bag(["x", "y", "y"])),
        &LanguageModel::from_bag(&bag(["y", "x", "y"])),
        KlVariant::Standard,
    );
    let ok = identity == 1.0
        && same_shape == 1.0
        && from_tokens == 1.0
        && (worked - 0.8247).abs() <= 1e-4
        && (worked - expected).abs() <= 1e-12;
    report(
        "07",
        "KL context similarity",
        ok,
        format!("identity {identity}, worked case {worked:.4}"),
    );
    assert!(ok);
}

#[test]
fn a08_end_to_end_fixture() {
    let t0 = Instant::now();
    let world = olympics_world(2014);
    let corpus = world.corpus();
    let snapshot = world.snapshot();
    let config = Config::default();
    let mut notes = Vec::new();
    let mut ok =
        (4000..=6000).contains(&corpus.len()) && (30..=50).contains(&snapshot.entity_count());

    for (tag, target) in [("sochi2014", OLYMPICS), ("mh370", FLIGHT)] {
        let burst = assess_burst(&corpus, tag, &config.burst).expect("fixture hashtag must trend");
        let candidates = build_candidates(&burst, &corpus, &snapshot, &config.linking);
        let sims = compute_similarities(
            &candidates,
            &burst,
            &corpus,
            &snapshot,
            &config.similarity,
            config.exec,
        );
        let graph = InfluenceGraph::build(&candidates.entities(), &snapshot.links);
        let out = ipl(&graph, &sims.components, &config.ipl, config.exec);
        assert!((out.scores.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL);

        let top_title = snapshot.title(graph.nodes()[out.top[0]]);
        let w = out.weights.as_array();
        let on_simplex =
            w.iter().all(|&x| x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        let mut increases = 0;
        for i in 1..out.losses.len() {
            if out.top_sets[i] == out.top_sets[i - 1] && out.losses[i] > out.losses[i - 1] {
                increases += 1;
            }
        }
        ok &= top_title == target && on_simplex && increases == 0;
        notes.push(format!(
            "#{tag} top={top_title:?} w=({:.3},{:.3},{:.3}) {} iterations, {increases} loss increases",
            w[0],
            w[1],
            w[2],
            out.losses.len()
        ));
    }

    let annotations = run_annotate(&corpus, &snapshot, &config, None);
    for (tag, target) in [("sochi2014", OLYMPICS), ("mh370", FLIGHT)] {
        let a = annotations
            .iter()
            .find(|a| a.hashtag == tag)
            .expect("annotation emitted");
        ok &= a.entities.first().map(|e| e.title.as_str()) == Some(target);
    }
    let elapsed = t0.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    report(
        "08",
        "end-to-end fixture",
        ok,
        format!("{}; {elapsed:.2?}", notes.join("; ")),
    );
    assert!(ok);
}

fn day(offset: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 1).unwrap() + chrono::Duration::days(offset)
}

fn corpus_from_counts(tag: &str, counts: &[u64], users: u64) -> TweetCorpus {
    let mut tweets = Vec::new();
    let mut id = 0u64;
    for (d, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let user = format!("u{}", id % users);
            tweets.push(Tweet::new(
                &id.to_string(),
                day(d as i64),
                &format!("news #{tag}"),
                &user,
            ));
            id += 1;
        }
    }
    TweetCorpus::from_tweets(tweets).0
}

/// Earliest day maximizing the outlier fraction against the clipped 61-day
/// median.
fn brute_force_peak(counts: &[u64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..counts.len() {
        let lo = t.saturating_sub(30);
        let hi = (t + 30).min(counts.len() - 1);
        let mut w: Vec<u64> = counts[lo..=hi].to_vec();
        w.sort_unstable();
        let m = w.len();
        let median = if m % 2 == 1 {
            w[m / 2] as f64
        } else {
            (w[m / 2 - 1] + w[m / 2]) as f64 / 2.0
        };
        let p = (counts[t] as f64 - median).abs() / median.max(10.0);
        if p > best.1 {
            best = (t, p);
        }
    }
    best.0
}

#[test]
fn a09_burst_detection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = BurstConfig::default();
    let mut agree = 0;
    let cases = 25;
    for case in 0..cases {
        let days = rng.gen_range(40..=120);
        let mut counts: Vec<u64> = (0..days).map(|_| rng.gen_range(2..15)).collect();
        let peak = rng.gen_range(0..days);
        counts[peak] = rng.gen_range(400..900);
        if case % 5 == 0 {
            // a second, equal spike later on: the earlier one must win
            let other = (peak + rng.gen_range(3..10)).min(days - 1);
            counts[other] = counts[peak];
        }
        if peak > 0 && rng.gen_bool(0.5) {
            counts[peak - 1] = counts[peak] / 3;
        }
        let corpus = corpus_from_counts("spike", &counts, 2000);
        let detected = detect_bursts(&corpus, "spike", &cfg);
        if detected.len() == 1 && detected[0].peak_day == day(brute_force_peak(&counts) as i64) {
            agree += 1;
        }
    }
    let flat = corpus_from_counts("steady", &vec![20; 90], 2000);
    let flat_verdict = assess_burst(&flat, "steady", &cfg).err();
    let ok = agree == cases && flat_verdict == Some(BurstRejection::LowVariance);
    report(
        "09",
        "burst detection",
        ok,
        format!("{agree}/{cases} spike peaks match brute force; flat series -> {flat_verdict:?}"),
    );
    assert!(ok);
}

fn reference_precision(ranking: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    let mut hits = 0;
    for t in ranking.iter().take(k) {
        if relevant.contains(t) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

fn reference_ap(ranking: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0;
    let mut total = 0.0;
    for (pos, t) in ranking.iter().take(k).enumerate() {
        if relevant.contains(t) {
            hits += 1;
            total += hits as f64 / (pos + 1) as f64;
        }
    }
    total / relevant.len().min(k) as f64
}

#[test]
fn a10_metrics_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pool: Vec<String> = (0..30).map(|i| format!("Entity {i}")).collect();
    let mut mismatches = 0;
    for _ in 0..100 {
        let threshold = rng.gen_range(1..=2u8);
        let mut gold = GoldLabels::default();
        let mut rankings = Vec::new();
        let mut expected = Vec::new();
        for h in 0..rng.gen_range(1..6) {
            let tag = format!("tag{h}");
            let mut relevant = HashSet::new();
            for title in &pool {
                if rng.gen_bool(0.3) {
                    let grade = rng.gen_range(0..=2u8);
                    gold.insert(&tag, title, grade).unwrap();
                    if grade >= threshold {
                        relevant.insert(title.clone());
                    }
                }
            }
            if !gold.covers(&tag) {
                gold.insert(&tag, "Unrelated", 0).unwrap();
            }
            let mut order = pool.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            order.truncate(rng.gen_range(0..=20));
            expected.push((
                reference_precision(&order, &relevant, 5),
                reference_precision(&order, &relevant, 15),
                reference_ap(&order, &relevant, 15),
            ));
            rankings.push((tag, order));
        }
        let cfg = EvalConfig {
            relevance_threshold: threshold,
            ..EvalConfig::default()
        };
        let got = evaluate(&rankings, &gold, &cfg);
        let n = expected.len() as f64;
        let mean_map = expected.iter().map(|e| e.2).sum::<f64>() / n;
        let same = got.per_hashtag.len() == expected.len()
            && got.per_hashtag.iter().zip(&expected).all(|(g, e)| {
                g.scores.p_at_5 == e.0 && g.scores.p_at_15 == e.1 && g.scores.map == e.2
            })
            && got.mean.map == mean_map;
        if !same {
            mismatches += 1;
        }
    }

    let mut gold = GoldLabels::default();
    gold.insert("h", "A", 1).unwrap();
    let worked = evaluate(
        &[("h".to_string(), vec!["B", "A"])],
        &gold,
        &EvalConfig::default(),
    );
    let s = worked.per_hashtag[0].scores;
    let ok = mismatches == 0 && s.map == 0.5 && (s.p_at_5 - 0.2).abs() < 1e-15;
    report(
        "10",
        "metrics reference",
        ok,
        format!(
            "{mismatches} mismatches in 100 instances; worked AP {} P@5 {}",
            s.map, s.p_at_5
        ),
    );
    assert!(ok);
}

#[test]
fn a11_deterministic_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, exec: ExecMode| {
        let world = olympics_world(11);
        let config = Config {
            exec,
            ..Config::default()
        };
        let annotations = run_annotate(&world.corpus(), &world.snapshot(), &config, None);
        let path = dir.path().join(name);
        write_annotations(std::fs::File::create(&path).unwrap(), &annotations).unwrap();
        std::fs::read(&path).unwrap()
    };
    let first = run("first.jsonl", ExecMode::Parallel);
    let second = run("second.jsonl", ExecMode::Parallel);
    let sequential = run("sequential.jsonl", ExecMode::Sequential);
    let ok = !first.is_empty() && first == second && first == sequential;
    report(
        "11",
        "deterministic annotations",
        ok,
        format!(
            "{} bytes, repeat identical: {}, sequential identical: {}",
            first.len(),
            first == second,
            first == sequential
        ),
    );
    assert!(ok);
}
