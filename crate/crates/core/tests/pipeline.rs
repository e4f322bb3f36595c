use trendlink::corpus::BurstRejection;
use trendlink::pipeline::{
    burst_rejection, evaluate_annotations, list_bursts, read_annotations, run_annotate,
    sweep_window_sizes, write_annotations, Config,
};
use trendlink::synthetic::{olympics_world, OLYMPICS};

#[test]
fn corpus_run_emits_every_hashtag_in_order() {
    let world = olympics_world(4);
    let out = run_annotate(&world.corpus(), &world.snapshot(), &Config::default(), None);
    let tags: Vec<&str> = out.iter().map(|a| a.hashtag.as_str()).collect();
    assert_eq!(tags, ["mh370", "prayformh370", "sochi2014", "weekend"]);
    let weekend = &out[3];
    assert_eq!(weekend.reason.as_deref(), Some("not-trending"));
    assert_eq!(weekend.detail.as_deref(), Some("low-variance"));
    assert!(weekend.entities.is_empty() && weekend.weights.is_none());

    let sochi = &out[2];
    assert!(sochi.reason.is_none());
    assert!(sochi.entities.len() <= 15);
    assert!(sochi.entities.windows(2).all(|p| p[0].r >= p[1].r));
    let w = sochi.weights.unwrap();
    assert!((w.alpha + w.beta + w.gamma - 1.0).abs() <= 1e-12);
}

#[test]
fn trending_only_drops_rejections() {
    let world = olympics_world(4);
    let config = Config {
        trending_only: true,
        ..Config::default()
    };
    let out = run_annotate(&world.corpus(), &world.snapshot(), &config, None);
    assert!(out.iter().all(|a| a.reason.is_none()));
    assert_eq!(out.len(), list_bursts(&world.corpus(), &config).len());
}

#[test]
fn explicit_hashtags_bypass_the_filters() {
    let world = olympics_world(4);
    let corpus = world.corpus();
    assert_eq!(
        burst_rejection(&corpus, "#Weekend", &Config::default()),
        Some(BurstRejection::LowVariance)
    );
    let tags = vec!["#Weekend".to_string(), "nosuchtag".to_string()];
    let out = run_annotate(&corpus, &world.snapshot(), &Config::default(), Some(&tags));
    assert_eq!(out[0].hashtag, "weekend");
    assert!(out[0].window.is_some());
    assert_eq!(out[1].reason.as_deref(), Some("no-tweets"));
}

#[test]
fn annotations_round_trip_through_jsonl() {
    let world = olympics_world(4);
    let out = run_annotate(&world.corpus(), &world.snapshot(), &Config::default(), None);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("annotations.jsonl");
    write_annotations(std::fs::File::create(&path).unwrap(), &out).unwrap();
    assert_eq!(read_annotations(&path).unwrap(), out);

    let first: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert!(first["window"]["start"].is_string());
    for key in ["alpha", "beta", "gamma"] {
        assert!(first["weights"][key].is_number());
    }
    for key in ["title", "r", "f", "f_m", "f_c", "f_t", "provenance"] {
        assert!(!first["entities"][0][key].is_null(), "{key}");
    }
}

#[test]
fn fixture_scores_well_against_its_gold() {
    let world = olympics_world(4);
    let out = run_annotate(&world.corpus(), &world.snapshot(), &Config::default(), None);
    let report = evaluate_annotations(&out, &world.gold_labels(), &Config::default().eval);
    assert_eq!(report.evaluated, 2);
    for a in out.iter().filter(|a| a.reason.is_none()) {
        let relevant = world.gold_labels();
        let relevant = relevant.relevant(&a.hashtag, 1);
        assert!(
            relevant.contains(a.entities[0].title.as_str()),
            "#{}",
            a.hashtag
        );
    }
    assert!(report.mean.map >= 0.5, "{report:?}");

    let sweep = sweep_window_sizes(
        &world.corpus(),
        &world.snapshot(),
        &Config::default(),
        None,
        &[3, 7],
        &world.gold_labels(),
    );
    assert_eq!(sweep.iter().map(|p| p.w).collect::<Vec<_>>(), [3, 7]);
    // the sweep scores annotated hashtags only, so nothing is excluded
    assert_eq!(sweep[1].metrics.per_hashtag, report.per_hashtag);
    assert_eq!(sweep[1].metrics.mean, report.mean);
    assert!(sweep[1].metrics.excluded.is_empty());
    let sochi = out.iter().find(|a| a.hashtag == "sochi2014").unwrap();
    assert_eq!(sochi.entities[0].title, OLYMPICS);
}
