use mttsort::ga::{run_ga, run_ga_with, GaConfig, GeneSpec, SubScene};
use mttsort::metrics::{evaluate, hota, identity_counts, predictions_from_results};
use mttsort::synth::{generate, preset_scenario, ScenarioSpec};
use mttsort::{run_sequence, BoundingBox, LabeledBox, TrackerConfig};
use proptest::prelude::*;

fn boxes() -> impl Strategy<Value = Vec<LabeledBox>> {
    prop::collection::vec((1u32..6, 1u64..5, 0u8..12, 0u8..12, 2u8..6, 2u8..6), 1..25).prop_map(|raw| {
        let mut seen = std::collections::BTreeSet::new();
        raw.into_iter()
            .filter(|&(f, id, ..)| seen.insert((f, id)))
            .map(|(frame, id, l, t, w, h)| LabeledBox {
                frame,
                id,
                bbox: BoundingBox::new(l as f64, t as f64, w as f64, h as f64).unwrap(),
            })
            .collect()
    })
}

fn relabel(v: &[LabeledBox], offset: u64) -> Vec<LabeledBox> {
    v.iter()
        .map(|b| LabeledBox {
            id: 100 + offset - b.id,
            ..*b
        })
        .collect()
}

proptest! {
    #[test]
    fn metrics_are_bounded(gt in boxes(), pred in boxes()) {
        let r = evaluate(&gt, &pred).unwrap();
        for v in [r.hota, r.idf1, r.det_a, r.ass_a, r.det_re, r.det_pr] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        prop_assert!(r.mota <= 1.0);
    }

    #[test]
    fn identity_metrics_ignore_id_values(gt in boxes(), pred in boxes()) {
        prop_assert_eq!(
            identity_counts(&gt, &pred),
            identity_counts(&relabel(&gt, 7), &relabel(&pred, 3))
        );
    }

    #[test]
    fn self_evaluation_is_perfect(gt in boxes()) {
        let r = evaluate(&gt, &gt).unwrap();
        prop_assert!((r.hota - 1.0).abs() < 1e-12);
        prop_assert!((r.mota - 1.0).abs() < 1e-12);
        prop_assert!((r.idf1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn split_track_example() {
    let bbox = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let gt: Vec<_> = (1..=10).map(|frame| LabeledBox { frame, id: 1, bbox }).collect();
    let pred: Vec<_> = (1..=10)
        .map(|frame| LabeledBox {
            frame,
            id: 1 + u64::from(frame > 5),
            bbox,
        })
        .collect();
    let r = evaluate(&gt, &pred).unwrap();
    assert!((r.idf1 - 0.5).abs() < 1e-12);
    let h = hota(&gt, &pred).unwrap();
    assert!((h.det_a - 1.0).abs() < 1e-12);
    assert!((h.ass_a - 0.5).abs() < 1e-12);
    assert_eq!(r.idsw_count, 1);
}

#[test]
fn tracking_is_deterministic() {
    let seq = generate(&preset_scenario("crowded", 4).unwrap()).unwrap();
    let cfg = TrackerConfig::default();
    let a = run_sequence(&seq.detections, &cfg, 300).unwrap();
    let b = run_sequence(&seq.detections, &cfg, 300).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ga_is_deterministic_across_runs() {
    let spec = ScenarioSpec {
        occlusions: Vec::new(),
        frames: 60,
        ..preset_scenario("lookalike", 9).unwrap()
    };
    let seq = generate(&spec).unwrap();
    let scenes = vec![SubScene {
        detections: seq.detections,
        ground_truth: seq.ground_truth,
        frame_count: spec.frames,
    }];
    let ga = GaConfig {
        population_size: 6,
        max_generations: 4,
        seed: 21,
        ..GaConfig::default()
    };
    let genes = mttsort::ga::default_gene_specs();
    let a = run_ga(&TrackerConfig::default(), &genes, &ga, &scenes).unwrap();
    let b = run_ga(&TrackerConfig::default(), &genes, &ga, &scenes).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.history, b.history);
}

#[test]
fn ga_best_is_within_gene_bounds() {
    let genes = vec![
        GeneSpec::new("max_age", 10.0, 20.0).unwrap(),
        GeneSpec::new("min_confidence", 0.2, 0.4).unwrap(),
    ];
    let ga = GaConfig {
        seed: 3,
        ..GaConfig::default()
    };
    let out = run_ga_with(&TrackerConfig::default(), &genes, &ga, |c| c.min_confidence - c.max_age as f64).unwrap();
    assert!((10..=20).contains(&out.best.max_age));
    assert!((0.2..=0.4).contains(&out.best.min_confidence));
    assert!(out.history.windows(2).all(|w| w[1].best_ever >= w[0].best_ever));
}

#[test]
fn tracked_clean_scene_predictions_match_truth_ids_one_to_one() {
    let spec = preset_scenario("clean", 1).unwrap();
    let seq = generate(&spec).unwrap();
    let results = run_sequence(&seq.detections, &TrackerConfig::default(), spec.frames).unwrap();
    let ids = identity_counts(&seq.ground_truth, &predictions_from_results(&results));
    assert_eq!(ids.idfp, 0);
}
