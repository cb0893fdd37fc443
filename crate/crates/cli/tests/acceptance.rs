//! End-to-end acceptance checks. Each test prints one `PASS criterion N` or
//! `FAIL criterion N` line before asserting; run with
//! `cargo test -p cocostream-cli --test acceptance -- --nocapture --test-threads=1`.

mod common;

use std::path::Path;
use std::time::Instant;

use cocostream::ingest::{load_detections, load_ground_truth, perturb};
use cocostream::{
    evaluate_exact, iou, match_image_class, AreaRange, BoundingBoxF64, BucketedStateF64,
    DatasetF64, DetectionF64, EvalConfigF64, GroundTruthF64, Metric, MetricReportF64,
    PerturbationParams,
};
use cocostream_cli::render::parse_report_csv;
use cocostream_cli::{
    cmd_evaluate, cmd_synth_bench, EvaluateArgs, Format, GridArgs, Mode, SynthBenchArgs,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!(
        "{} criterion {n}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn streaming(ds: &DatasetF64, config: &EvalConfigF64) -> (BucketedStateF64, MetricReportF64) {
    let mut state = BucketedStateF64::new(config.clone()).unwrap();
    state.update(ds.pairs()).unwrap();
    let report = state.finalize();
    (state, report)
}

fn map_rows() -> impl Iterator<Item = Metric> {
    Metric::ALL.into_iter().filter(|m| m.is_map())
}

fn recall_rows() -> impl Iterator<Item = Metric> {
    Metric::ALL.into_iter().filter(|m| !m.is_map())
}

#[test]
fn criterion_1_recall_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let trials = 150;
    for trial in 0..trials {
        let classes = rng.random_range(1..=4);
        let ds = common::random_dataset(&mut rng, 20, 30, classes, |r| r.random::<f64>());
        let buckets = [1, 10, 100, 10_000][trial % 4];
        let config = EvalConfigF64::coco(classes).with_buckets(buckets);
        let (_, s) = streaming(&ds, &config);
        let e = evaluate_exact(ds.pairs(), &config).unwrap();
        for m in recall_rows() {
            let err = (s.get(m) - e.get(m)).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                failures.push(format!(
                    "trial {trial} {}: {} vs {}",
                    m.key(),
                    s.get(m),
                    e.get(m)
                ));
            }
        }
    }
    let ok = failures.is_empty();
    verdict(
        1,
        ok,
        &format!("{trials} datasets, max recall deviation {worst:e} (tolerance 1e-12)"),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_2_distinct_buckets_reproduce_exact_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let trials = 100;
    for trial in 0..trials {
        let mut pool: Vec<usize> = (0..10_000).collect();
        pool.shuffle(&mut rng);
        let mut next = pool.into_iter();
        let classes = rng.random_range(1..=3);
        let ds = common::random_dataset(&mut rng, 20, 25, classes, |_| {
            (next.next().unwrap() as f64 + 0.5) / 10_000.0
        });
        assert!(ds.detection_count() <= 500);
        let config = EvalConfigF64::coco(classes);
        let (_, s) = streaming(&ds, &config);
        let e = evaluate_exact(ds.pairs(), &config).unwrap();
        for m in map_rows() {
            let err = (s.get(m) - e.get(m)).abs();
            worst = worst.max(err);
            if err > 1e-9 {
                failures.push(format!(
                    "trial {trial} {}: {} vs {}",
                    m.key(),
                    s.get(m),
                    e.get(m)
                ));
            }
        }
    }
    let ok = failures.is_empty();
    verdict(
        2,
        ok,
        &format!("{trials} datasets, max MaP deviation {worst:e} (tolerance 1e-9)"),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_3_merge_is_exact_and_order_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let trials = 40;
    for trial in 0..trials {
        let classes = rng.random_range(1..=3);
        let ds = common::random_dataset(&mut rng, 20, 15, classes, |r| r.random::<f64>());
        let config = EvalConfigF64::coco(classes).with_buckets([100, 10_000][trial % 2]);
        let (whole, whole_report) = streaming(&ds, &config);

        let k = rng.random_range(2..=8);
        let mut shards = vec![Vec::new(); k];
        for i in 0..ds.len() {
            shards[rng.random_range(0..k)].push(i);
        }
        let states: Vec<BucketedStateF64> = shards
            .iter()
            .map(|idx| streaming(&ds.subset(idx), &config).0)
            .collect();

        let mut merged = BucketedStateF64::new(config.clone()).unwrap();
        for s in &states {
            merged.merge_from(s).unwrap();
        }
        if merged != whole || merged.to_snapshot() != whole.to_snapshot() {
            failures.push(format!(
                "trial {trial}: {k}-way merge differs from single pass"
            ));
        }
        if merged.finalize() != whole_report {
            failures.push(format!("trial {trial}: merged report differs"));
        }
        let (a, b, c) = (&states[0], &states[1], &states[k - 1]);
        if a.merge(b).unwrap() != b.merge(a).unwrap() {
            failures.push(format!("trial {trial}: merge not commutative"));
        }
        let left = a.merge(b).unwrap().merge(c).unwrap();
        let right = a.merge(&b.merge(c).unwrap()).unwrap();
        if left != right || left.to_snapshot() != right.to_snapshot() {
            failures.push(format!("trial {trial}: merge not associative"));
        }
    }
    let ok = failures.is_empty();
    verdict(
        3,
        ok,
        &format!("{trials} datasets split into 2..=8 shards, merged counters identical"),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_4_error_margins_on_validation_sized_data() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("val.json");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    std::fs::write(&gt, common::validation_like_ground_truth(500, 80, &mut rng)).unwrap();

    let args = SynthBenchArgs {
        gt: gt.clone(),
        image_counts: "500".into(),
        repeats: 10,
        seed: 0,
        translate: 0.2,
        scale_low: 0.8,
        scale_high: 1.2,
        buckets: 10_000,
        grid: GridArgs::default(),
        output: Some(dir.path().join("rows.csv")),
        summary: Some(dir.path().join("summary.csv")),
        export_dir: None,
    };
    let start = Instant::now();
    let report = cmd_synth_bench(&args).unwrap();
    let elapsed = start.elapsed();
    print!("{}", report.summary_table());

    let limits = [
        (Metric::MapStandard, 0.046),
        (Metric::Map50, 0.075),
        (Metric::Map75, 0.079),
        (Metric::RecallMaxDets1, 0.035),
        (Metric::RecallMaxDets10, 0.035),
        (Metric::RecallMaxDets100, 0.035),
        (Metric::RecallSmall, 0.035),
        (Metric::RecallMedium, 0.035),
        (Metric::RecallLarge, 0.035),
    ];
    let mut failures = Vec::new();
    for (m, limit) in limits {
        let s = report.summary_for(m);
        if s.runs != 10 || !(s.mean_error <= limit) {
            failures.push(format!(
                "{}: mean error {} over {} runs (limit {limit})",
                m.key(),
                s.mean_error,
                s.runs
            ));
        }
    }
    if elapsed.as_secs() >= 600 {
        failures.push(format!("took {elapsed:?}"));
    }
    let ok = failures.is_empty();
    verdict(
        4,
        ok,
        &format!(
            "500 images x 10 runs in {:.1}s, mean errors within limits",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_5_error_shrinks_with_bucket_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gt: DatasetF64 =
        load_ground_truth(&common::validation_like_ground_truth(100, 20, &mut rng)).unwrap();
    let ds = perturb(&gt, &PerturbationParams::default().with_seed(5)).unwrap();
    let mut confidences: Vec<f64> = ds
        .images
        .iter()
        .flat_map(|r| r.detections.iter().map(|d| d.confidence))
        .collect();
    confidences.sort_by(f64::total_cmp);
    assert!(
        confidences.windows(2).all(|w| w[0] != w[1]),
        "confidences must be distinct"
    );

    let base = EvalConfigF64::coco(ds.num_classes());
    let exact = evaluate_exact(ds.pairs(), &base).unwrap();
    let mut errors = Vec::new();
    for buckets in [10, 100, 1000, 10_000] {
        let (_, s) = streaming(&ds, &base.clone().with_buckets(buckets));
        let err = map_rows()
            .map(|m| (s.get(m) - exact.get(m)).abs())
            .fold(0.0, f64::max);
        errors.push((buckets, err));
    }
    let monotone = errors.windows(2).all(|w| w[1].1 <= w[0].1);
    let finest = errors.last().unwrap().1;
    let ok = monotone && finest <= 0.005;
    verdict(5, ok, &format!("max MaP error by bucket count {errors:?}"));
    assert!(ok, "{errors:?}");
}

/// Greedy outcome found by search: every injective partial assignment of
/// detections to ground truths with IoU >= theta is enumerated and only those
/// where each detection took the best still-free ground truth are kept.
fn brute_force(
    dets: &[DetectionF64],
    gts: &[GroundTruthF64],
    theta: f64,
    max_dets: usize,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.partial_cmp(&dets[a].confidence).unwrap());
    order.truncate(max_dets);
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&d| gts.iter().map(|g| iou(&dets[d].bbox, &g.bbox)).collect())
        .collect();

    fn consistent(ious: &[Vec<f64>], assign: &[Option<usize>], theta: f64) -> bool {
        let mut used = vec![false; ious.first().map_or(0, Vec::len)];
        for (d, a) in assign.iter().enumerate() {
            let mut best: Option<usize> = None;
            for g in 0..used.len() {
                if !used[g] && ious[d][g] >= theta && best.is_none_or(|b| ious[d][g] > ious[d][b]) {
                    best = Some(g);
                }
            }
            if *a != best {
                return false;
            }
            if let Some(g) = a {
                used[*g] = true;
            }
        }
        true
    }

    fn search(
        ious: &[Vec<f64>],
        theta: f64,
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        found: &mut Vec<Vec<Option<usize>>>,
    ) {
        let d = assign.len();
        if d == ious.len() {
            if consistent(ious, assign, theta) {
                found.push(assign.clone());
            }
            return;
        }
        assign.push(None);
        search(ious, theta, assign, used, found);
        assign.pop();
        for g in 0..used.len() {
            if !used[g] && ious[d][g] >= theta {
                used[g] = true;
                assign.push(Some(g));
                search(ious, theta, assign, used, found);
                assign.pop();
                used[g] = false;
            }
        }
    }

    let mut found = Vec::new();
    search(
        &ious,
        theta,
        &mut Vec::new(),
        &mut vec![false; gts.len()],
        &mut found,
    );
    assert_eq!(
        found.len(),
        1,
        "exactly one assignment is greedy-consistent"
    );
    found[0].iter().map(Option::is_some).collect()
}

fn grid_box(rng: &mut ChaCha8Rng) -> BoundingBoxF64 {
    let x = rng.random_range(0..8) as f64;
    let y = rng.random_range(0..8) as f64;
    let w = rng.random_range(2..7) as f64;
    let h = rng.random_range(2..7) as f64;
    BoundingBoxF64::from_xywh(x, y, w, h).unwrap()
}

#[test]
fn criterion_6_matching_invariants_and_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let thetas: Vec<f64> = cocostream::config::default_iou_thresholds();
    let limits = [1usize, 2, 3, 5, 100];
    let mut failures = Vec::new();
    let trials = 1500;
    for trial in 0..trials {
        let n_gt = rng.random_range(0..=5);
        let n_dt = rng.random_range(0..=5);
        let gts: Vec<GroundTruthF64> = (0..n_gt)
            .map(|_| GroundTruthF64::new(grid_box(&mut rng), 0))
            .collect();
        // coarse scores so that confidence ties occur
        let dets: Vec<DetectionF64> = (0..n_dt)
            .map(|_| {
                DetectionF64::new(grid_box(&mut rng), 0, rng.random_range(1..=4) as f64 / 4.0)
                    .unwrap()
            })
            .collect();
        let area = AreaRange::all();

        let mut tp = vec![vec![0usize; limits.len()]; thetas.len()];
        for (t, &theta) in thetas.iter().enumerate() {
            for (m, &limit) in limits.iter().enumerate() {
                let r = match_image_class(&dets, &gts, theta, limit, &area).unwrap();
                tp[t][m] = r.tp_count();
                let got: Vec<bool> = r.verdicts.iter().map(|v| v.is_tp).collect();
                let want = brute_force(&dets, &gts, theta, limit);
                if got != want {
                    failures.push(format!(
                        "trial {trial} theta {theta} limit {limit}: {got:?} vs {want:?}"
                    ));
                }
                if r.tp_count() > n_dt.min(n_gt).min(limit) {
                    failures.push(format!(
                        "trial {trial}: {} true positives exceed box counts",
                        r.tp_count()
                    ));
                }
            }
        }
        for m in 0..limits.len() {
            if tp.windows(2).any(|w| w[1][m] > w[0][m]) {
                failures.push(format!(
                    "trial {trial}: true positives grow with the IoU threshold: {:?}",
                    tp.iter().map(|r| r[m]).collect::<Vec<_>>()
                ));
            }
        }
        for row in &tp {
            if row.windows(2).any(|w| w[1] < w[0]) {
                failures.push(format!(
                    "trial {trial}: true positives shrink with the detection limit: {row:?}"
                ));
            }
        }
    }
    let ok = failures.is_empty();
    verdict(
        6,
        ok,
        &format!(
            "{trials} single-image instances x {} thresholds x {} limits",
            thetas.len(),
            limits.len()
        ),
    );
    assert!(ok, "{:#?}", &failures[..failures.len().min(20)]);
}

#[test]
fn criterion_7_golden_fixture() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let expected = [
        (Metric::MapStandard, 779.6 / 2020.0),
        (Metric::Map50, 127.4 / 202.0),
        (Metric::Map75, 56.0 / 202.0),
        (Metric::MapSmall, 193.0 / 303.0),
        (Metric::MapMedium, 0.175),
        (Metric::MapLarge, 0.4),
        (Metric::RecallMaxDets1, 1.0 / 3.0),
        (Metric::RecallMaxDets10, 0.45),
        (Metric::RecallMaxDets100, 0.45),
        (Metric::RecallSmall, 0.7),
        (Metric::RecallMedium, 0.35),
        (Metric::RecallLarge, 0.4),
    ];
    let mut failures = Vec::new();
    for mode in [Mode::Exact, Mode::Streaming] {
        let args = EvaluateArgs {
            gt: fixtures.join("golden_gt.json"),
            dt: fixtures.join("golden_dt.json"),
            mode,
            buckets: 10_000,
            grid: GridArgs::default(),
            format: Format::Csv,
            output: None,
            save_state: None,
        };
        let report = parse_report_csv(&cmd_evaluate(&args).unwrap()).unwrap();
        for (m, want) in expected {
            if (report.get(m) - want).abs() > 1e-12 {
                failures.push(format!("{mode:?} {}: {} vs {want}", m.key(), report.get(m)));
            }
        }
    }
    // the library path agrees with the command path
    let gt = load_ground_truth(&std::fs::read_to_string(fixtures.join("golden_gt.json")).unwrap())
        .unwrap();
    let ds: DatasetF64 = load_detections(
        &std::fs::read_to_string(fixtures.join("golden_dt.json")).unwrap(),
        &gt,
    )
    .unwrap();
    let lib = evaluate_exact(ds.pairs(), &EvalConfigF64::coco(2)).unwrap();
    if (lib.map_standard - expected[0].1).abs() > 1e-12 {
        failures.push(format!("library exact map {}", lib.map_standard));
    }
    let ok = failures.is_empty();
    verdict(
        7,
        ok,
        "3-image fixture reproduced by exact and streaming modes",
    );
    assert!(ok, "{failures:#?}");
}
