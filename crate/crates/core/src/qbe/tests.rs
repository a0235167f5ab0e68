use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{Alignment, Recording};
use crate::nawe::EncoderParams;

fn noise_recording(id: &str, t: usize, dim: usize, seed: u64) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..t * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Recording::new(id, FeatureSequence::new(frames, dim).unwrap(), vec![]).unwrap()
}

fn seg(rec: &str, start: usize, end: usize) -> SegmentRef {
    SegmentRef {
        recording_id: rec.into(),
        start_frame: start,
        end_frame: end,
        embedding_id: 0,
    }
}

fn hit(rec: &str, start: usize, end: usize, score: f64) -> Hit {
    Hit {
        segment: seg(rec, start, end),
        score,
        truth: Truth::Unset,
    }
}

fn truth(rec: &str, start: usize, end: usize) -> TruthInterval {
    TruthInterval {
        recording_id: rec.into(),
        start_frame: start,
        end_frame: end,
    }
}

fn spans(ws: &[SegmentRef]) -> Vec<(usize, usize)> {
    ws.iter().map(|w| (w.start_frame, w.end_frame)).collect()
}

#[test]
fn window_examples() {
    let one = WindowConfig {
        min_len: 50,
        max_len: 50,
        len_step: 1,
        stride: 10,
    };
    let ws = extract_windows(&noise_recording("r", 100, 2, 0), &one);
    assert_eq!(ws.len(), 6);
    assert_eq!(ws.last().unwrap().start_frame, 50);
    assert!(extract_windows(&noise_recording("r", 49, 2, 0), &one).is_empty());

    let two = WindowConfig {
        min_len: 40,
        max_len: 60,
        len_step: 20,
        stride: 60,
    };
    assert_eq!(spans(&extract_windows(&noise_recording("r", 60, 2, 0), &two)), vec![(0, 40), (0, 60)]);
}

#[test]
fn window_config_validation() {
    assert!(WindowConfig::default().validate().is_ok());
    for bad in [
        WindowConfig { min_len: 0, ..Default::default() },
        WindowConfig { min_len: 200, ..Default::default() },
        WindowConfig { len_step: 0, ..Default::default() },
        WindowConfig { stride: 0, ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn collection_order_and_counts() {
    let recs = vec![noise_recording("a", 30, 3, 1), noise_recording("b", 25, 3, 2)];
    let cfg = WindowConfig {
        min_len: 5,
        max_len: 9,
        len_step: 2,
        stride: 4,
    };
    let params = EncoderParams::init(1, 4, 3, 7).unwrap();
    let emb = Embedder::Neural(params);
    let (e1, s1) = embed_collection(&recs, &emb, &cfg).unwrap();
    let (e2, s2) = embed_collection(&recs, &emb, &cfg).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(s1, s2);
    let expected: usize = recs.iter().map(|r| extract_windows(r, &cfg).len()).sum();
    assert_eq!(s1.len(), expected);
    assert_eq!(e1.len(), expected);
    for (i, s) in s1.iter().enumerate() {
        assert_eq!(s.embedding_id, i);
        let single = emb.embed(&recs.iter().find(|r| r.id == s.recording_id).unwrap().features.slice(s.start_frame, s.end_frame).unwrap()).unwrap();
        assert_eq!(single, e1[i]);
    }
    for w in s1.windows(2) {
        let key = |s: &SegmentRef| (s.recording_id.clone(), s.start_frame, s.len());
        assert!(key(&w[0]) < key(&w[1]));
    }
    let (e, s) = embed_collection(&[], &emb, &cfg).unwrap();
    assert!(e.is_empty() && s.is_empty());
}

#[test]
fn template_embedder_matches_reference_vectors() {
    let rec = noise_recording("a", 20, 2, 3);
    let templates = vec![
        WordSegment::new("t", 0, 4, "x", rec.features.slice(0, 4).unwrap()).unwrap(),
        WordSegment::new("t", 5, 12, "y", rec.features.slice(5, 12).unwrap()).unwrap(),
    ];
    let emb = Embedder::Template {
        templates: TemplateSet::new(templates).unwrap(),
        metric: FrameMetric::Cosine,
    };
    let cfg = WindowConfig {
        min_len: 4,
        max_len: 8,
        len_step: 4,
        stride: 3,
    };
    let (e, s) = embed_collection(std::slice::from_ref(&rec), &emb, &cfg).unwrap();
    for (x, w) in e.iter().zip(&s) {
        assert_eq!(*x, emb.embed(&rec.features.slice(w.start_frame, w.end_frame).unwrap()).unwrap());
    }
}

#[test]
fn search_finds_identical_window_first() {
    let recs = vec![noise_recording("a", 60, 3, 4), noise_recording("b", 60, 3, 5)];
    let cfg = WindowConfig {
        min_len: 10,
        max_len: 20,
        len_step: 5,
        stride: 5,
    };
    let params = EncoderParams::init(1, 8, 3, 1).unwrap();
    let index_cfg = IndexConfig {
        bits: 64,
        permutations: 4,
        beamwidth: 8,
        seed: 3,
    };
    let system = SearchSystem::build(&recs, Embedder::Neural(params), &cfg, &index_cfg).unwrap();
    let q = recs[1].features.slice(25, 40).unwrap();
    let sp = SearchParams {
        beamwidth: 8,
        top_k: 5,
        ..Default::default()
    };
    let hits = search(&q, &system, &sp).unwrap();
    assert_eq!(hits[0].segment.recording_id, "b");
    assert_eq!((hits[0].segment.start_frame, hits[0].segment.end_frame), (25, 40));
    assert!(hits[0].score < 1e-12);
    assert!(hits.len() <= 5);
    for w in hits.windows(2) {
        assert!(w[0].score <= w[1].score);
    }
    assert_eq!(hits, search(&q, &system, &sp).unwrap());
    let one = search(&q, &system, &SearchParams { top_k: 1, ..sp }).unwrap();
    assert_eq!(one.len(), 1);
}

#[test]
fn suppression_examples() {
    let kept = suppress_overlaps(vec![hit("r", 0, 10, 0.1), hit("r", 0, 10, 0.2)], 0.5);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].score, 0.1);

    let kept = suppress_overlaps(vec![hit("r", 0, 10, 0.1), hit("r", 10, 20, 0.2)], 0.5);
    assert_eq!(kept.len(), 2);

    // A overlaps B, B overlaps C, A and C disjoint.
    let kept = suppress_overlaps(
        vec![hit("r", 0, 10, 0.1), hit("r", 4, 14, 0.2), hit("r", 10, 20, 0.3)],
        0.5,
    );
    assert_eq!(spans(&kept.iter().map(|h| h.segment.clone()).collect::<Vec<_>>()), vec![(0, 10), (10, 20)]);

    // Different recordings never suppress each other.
    assert_eq!(suppress_overlaps(vec![hit("r", 0, 10, 0.1), hit("s", 0, 10, 0.2)], 0.5).len(), 2);
}

#[test]
fn truth_matching_examples() {
    let t = vec![truth("r", 10, 30), truth("r", 50, 70)];
    let mut hits = vec![hit("r", 10, 30, 0.1), hit("r", 12, 28, 0.2), hit("r", 35, 45, 0.3), hit("q", 10, 30, 0.4)];
    let n = match_hits_to_truth(&mut hits, &t);
    assert_eq!(n, 2);
    let labels: Vec<Truth> = hits.iter().map(|h| h.truth).collect();
    assert_eq!(labels, vec![Truth::Correct, Truth::FalseAlarm, Truth::FalseAlarm, Truth::FalseAlarm]);

    // Midpoint exactly on the end frame is outside; on the start frame inside.
    let mut hits = vec![hit("r", 20, 40, 0.1), hit("r", 40, 60, 0.2)];
    match_hits_to_truth(&mut hits, &t);
    assert_eq!(hits[0].truth, Truth::FalseAlarm);
    assert_eq!(hits[1].truth, Truth::Correct);
}

#[test]
fn truth_intervals_from_alignments() {
    let feats = FeatureSequence::new(vec![0.0; 40], 1).unwrap();
    let rec = Recording::new(
        "r",
        feats,
        vec![
            Alignment { start_frame: 0, end_frame: 5, label: "a".into() },
            Alignment { start_frame: 10, end_frame: 15, label: "b".into() },
            Alignment { start_frame: 20, end_frame: 25, label: "a".into() },
        ],
    )
    .unwrap();
    assert_eq!(truth_for_label(&[rec.clone()], "a"), vec![truth("r", 0, 5), truth("r", 20, 25)]);
    assert!(truth_for_label(&[rec.clone()], "z").is_empty());
    assert!((search_hours(&[rec]) - 40.0 * 0.01 / 3600.0).abs() < 1e-15);
}

#[test]
fn query_result_conversion() {
    let feats = FeatureSequence::new(vec![0.0; 4], 1).unwrap();
    let q = WordSegment::new("query/00001", 0, 4, "w", feats).unwrap();
    let mut hits = vec![hit("r", 0, 10, 0.1), hit("r", 20, 30, 0.3)];
    let n = match_hits_to_truth(&mut hits, &[truth("r", 20, 30)]);
    let r = query_result(&q, &hits, n, 0.5).unwrap();
    assert_eq!(r.query_type, "w");
    assert_eq!(r.example_id, "query/00001");
    assert_eq!(r.hits.iter().map(|h| h.correct).collect::<Vec<_>>(), vec![false, true]);
}

#[test]
fn hit_list_round_trip() {
    let records = vec![
        HitRecord { query_id: "query/00000".into(), hit: Hit { truth: Truth::Correct, ..hit("search/00001", 5, 45, 0.125) } },
        HitRecord { query_id: "query/00000".into(), hit: Hit { truth: Truth::FalseAlarm, ..hit("search/00002", 0, 40, 0.1 + 0.2) } },
        HitRecord { query_id: "query/00001".into(), hit: hit("search/00002", 0, 40, 1.0) },
    ];
    let text = format_hit_list(&records);
    assert!(text.starts_with("#query_id\t"));
    assert_eq!(parse_hit_list(&text).unwrap(), records);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("hits.tsv");
    write_hit_list(&records, &p).unwrap();
    assert_eq!(read_hit_list(&p).unwrap(), records);
}

#[test]
fn hit_list_rejects_bad_lines() {
    for bad in [
        "q\tr\t0\t10\t0.5",
        "q\tr\t10\t10\t0.5\tcorrect",
        "q\tr\t0\t10\t2.5\tcorrect",
        "q\tr\t0\t10\tNaN\tcorrect",
        "q\tr\t0\tx\t0.5\tcorrect",
        "q\tr\t0\t10\t0.5\tmaybe",
        "\tr\t0\t10\t0.5\tcorrect",
    ] {
        assert!(matches!(parse_hit_list(bad), Err(crate::FormatError::Line { line: 1, .. })), "{bad}");
    }
}

#[test]
fn segment_table_round_trip() {
    let recs = vec![noise_recording("a", 30, 1, 1), noise_recording("b", 22, 1, 2)];
    let cfg = WindowConfig { min_len: 5, max_len: 10, len_step: 5, stride: 7 };
    let params = EncoderParams::init(1, 2, 1, 0).unwrap();
    let (_, segs) = embed_collection(&recs, &Embedder::Neural(params), &cfg).unwrap();
    assert_eq!(parse_segment_table(&format_segment_table(&segs)).unwrap(), segs);
    assert!(parse_segment_table("1\ta\t0\t5").is_err());
    assert!(parse_segment_table("0\ta\t5\t5").is_err());
    assert!(parse_segment_table("0\ta\t0").is_err());
}

fn window_oracle(t: usize, cfg: &WindowConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for start in 0..t {
        if start % cfg.stride != 0 {
            continue;
        }
        for len in cfg.min_len..=cfg.max_len {
            if (len - cfg.min_len) % cfg.len_step == 0 && start + len <= t {
                out.push((start, start + len));
            }
        }
    }
    out
}

fn arb_hits() -> impl Strategy<Value = Vec<Hit>> {
    proptest::collection::vec((0usize..3, 0usize..60, 1usize..25, 0.0f64..2.0), 0..30).prop_map(|v| {
        let mut hits: Vec<Hit> = v
            .into_iter()
            .map(|(r, s, l, score)| hit(["a", "b", "c"][r], s, s + l, score))
            .collect();
        hits.sort_by(|a, b| a.score.total_cmp(&b.score));
        hits
    })
}

proptest! {
    #[test]
    fn windows_match_enumeration(
        t in 1usize..120,
        min_len in 1usize..30,
        extra in 0usize..30,
        len_step in 1usize..8,
        stride in 1usize..12,
    ) {
        let cfg = WindowConfig { min_len, max_len: min_len + extra, len_step, stride };
        let rec = noise_recording("r", t, 1, 0);
        prop_assert_eq!(spans(&extract_windows(&rec, &cfg)), window_oracle(t, &cfg));
    }

    #[test]
    fn suppression_output_is_sorted_and_separated(hits in arb_hits(), threshold in 0.0f64..1.0) {
        let kept = suppress_overlaps(hits.clone(), threshold);
        for w in kept.windows(2) {
            prop_assert!(w[0].score <= w[1].score);
        }
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                prop_assert!(overlap_ratio(&kept[i].segment, &kept[j].segment) <= threshold);
            }
        }
        // Every dropped hit overlaps some kept hit with a better or equal position.
        for h in &hits {
            if !kept.contains(h) {
                prop_assert!(kept.iter().any(|k| overlap_ratio(&k.segment, &h.segment) > threshold));
            }
        }
    }

    #[test]
    fn truth_counts_are_consistent(
        mut hits in arb_hits(),
        truths in proptest::collection::vec((0usize..3, 0usize..4), 0..8),
    ) {
        let mut t: Vec<TruthInterval> = truths
            .into_iter()
            .map(|(r, k)| truth(["a", "b", "c"][r], 20 * k, 20 * k + 15))
            .collect();
        t.sort();
        t.dedup();
        let n = match_hits_to_truth(&mut hits, &t);
        let correct = hits.iter().filter(|h| h.truth == Truth::Correct).count();
        let fa = hits.iter().filter(|h| h.truth == Truth::FalseAlarm).count();
        prop_assert!(correct <= n);
        prop_assert_eq!(correct + fa, hits.len());
    }

    #[test]
    fn hit_list_parse_never_panics(text in "[a-z0-9\t.#\n-]{0,200}") {
        let _ = parse_hit_list(&text);
        let _ = parse_segment_table(&text);
    }
}
