//! Acceptance gate: nine criteria, one PASS/FAIL line each.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pairbox::evaluation::{evaluate, EvalConfig, FrameAnnotations, FrameDetections};
use pairbox::geometry::{iou, iou_multimodal, BBox, IouVariant, PairedBox};
use pairbox::io::{read_dataset, read_detections};
use pairbox::pairnms::{paired_nms, Detection};
use pairbox::regression::{
    cross_entropy, decode_box, detector_loss, encode_box, rpn_loss_breakdown, smooth_l1, BoxOffsets, DetectorSample,
    LossConfig, RpnSample,
};
use pairbox::sampling::{assign_detector, assign_rpn, AssignmentConfig, SampleLabel};
use pairbox::simulation::{
    apply_shift, generate_scene, mock_detect, DetectorMode, MockDetectorSpec, SceneSpec, ShiftSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn int_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.random_range(0..40) as f64;
    let y = rng.random_range(0..40) as f64;
    let w = rng.random_range(0..25) as f64;
    let h = rng.random_range(0..25) as f64;
    BBox::new(x, y, w, h).unwrap()
}

fn int_pair(rng: &mut ChaCha8Rng) -> PairedBox {
    PairedBox::new(int_box(rng), int_box(rng))
}

/// Unit cells covered by an integer half-open box.
fn cells(b: &BBox) -> impl Iterator<Item = (i64, i64)> {
    let (x0, y0) = (b.x() as i64, b.y() as i64);
    let (x1, y1) = (b.right() as i64, b.bottom() as i64);
    (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)))
}

/// (intersection, union) by counting cells on a 64 × 64 grid.
fn raster(a: &BBox, b: &BBox) -> (f64, f64) {
    let mut grid = [[0u8; 64]; 64];
    for (x, y) in cells(a) {
        grid[y as usize][x as usize] |= 1;
    }
    for (x, y) in cells(b) {
        grid[y as usize][x as usize] |= 2;
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for row in &grid {
        for &c in row {
            inter += (c == 3) as usize;
            union += (c != 0) as usize;
        }
    }
    (inter as f64, union as f64)
}

fn ratio(i: f64, u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        i / u
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (g, d) = (int_pair(&mut rng), int_pair(&mut rng));
        let (iv, uv) = raster(&g.visible, &d.visible);
        let (it, ut) = raster(&g.thermal, &d.thermal);
        worst = worst.max((iou(&g.visible, &d.visible) - ratio(iv, uv)).abs());
        worst = worst.max((iou_multimodal(&g, &d) - ratio(iv + it, uv + ut)).abs());
    }
    ensure(worst <= 1e-9, || format!("max oracle deviation {worst:e}"))?;
    let mut violations = 0;
    for _ in 0..100_000 {
        let (g, d) = (int_pair(&mut rng), int_pair(&mut rng));
        let (v, t, m) = (iou(&g.visible, &d.visible), iou(&g.thermal, &d.thermal), iou_multimodal(&g, &d));
        violations += (m < v.min(t) || m > v.max(t)) as usize;
    }
    ensure(violations == 0, || format!("{violations} mediant violations"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("oracle dev {worst:.1e} on 1e4 pairs, 0 mediant violations in 1e5, {:.2}s", elapsed.as_secs_f64()))
}

fn aligned_scene(seed: u64) -> (Vec<FrameAnnotations>, Vec<FrameDetections>) {
    let frames = generate_scene(&SceneSpec { num_frames: 300, seed, ..Default::default() }).unwrap();
    let dets = mock_detect(
        &frames,
        &MockDetectorSpec {
            mode: DetectorMode::SingleBox,
            center_noise_sigma: 6.0,
            size_noise_sigma: 0.1,
            miss_prob: 0.1,
            fp_per_frame: 0.5,
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    (frames, dets)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let (g, d) = (int_box(&mut rng), int_box(&mut rng));
        let m = iou_multimodal(&PairedBox::aligned(g), &PairedBox::aligned(d));
        ensure(m.to_bits() == iou(&g, &d).to_bits(), || format!("{g:?} {d:?}: {m} vs {}", iou(&g, &d)))?;
    }
    let (frames, dets) = aligned_scene(2);
    let report = evaluate(&frames, &dets, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let mut mrs = Vec::new();
    for t in [0.5, 0.7] {
        let v = report.get(IouVariant::Visible, t).unwrap();
        let th = report.get(IouVariant::Thermal, t).unwrap();
        let m = report.get(IouVariant::MultiModal, t).unwrap();
        ensure(v.curve == th.curve && v.curve == m.curve, || format!("curves differ at {t}"))?;
        ensure(
            v.log_average_mr.to_bits() == th.log_average_mr.to_bits()
                && v.log_average_mr.to_bits() == m.log_average_mr.to_bits(),
            || format!("MR rows differ at {t}"),
        )?;
        mrs.push(v.log_average_mr);
    }
    Ok(format!("IoU^M == IoU bitwise on 1e4 pairs; MR rows identical ({:.4}, {:.4})", mrs[0], mrs[1]))
}

fn offsets(rng: &mut ChaCha8Rng, scale: f64) -> BoxOffsets {
    BoxOffsets::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    const EPS: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut l1_worst, mut ce_worst, mut rt_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut skipped = 0;
    for _ in 0..1000 {
        let (p, t) = (offsets(&mut rng, 3.0), offsets(&mut rng, 3.0));
        let grad = smooth_l1(&p, &t).1.as_array();
        let (pa, ta) = (p.as_array(), t.as_array());
        for k in 0..4 {
            // the second derivative jumps at |x| = 1
            if ((pa[k] - ta[k]).abs() - 1.0).abs() < 2.0 * EPS {
                skipped += 1;
                continue;
            }
            let at = |dv: f64| {
                let mut q = pa;
                q[k] += dv;
                smooth_l1(&BoxOffsets::try_from(q).unwrap(), &t).0
            };
            l1_worst = l1_worst.max((grad[k] - (at(EPS) - at(-EPS)) / (2.0 * EPS)).abs());
        }

        let n = rng.random_range(2..7);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let label = rng.random_range(0..n);
        let (_, g) = cross_entropy(&logits, label).unwrap();
        for k in 0..n {
            let at = |dv: f64| {
                let mut z = logits.clone();
                z[k] += dv;
                cross_entropy(&z, label).unwrap().0
            };
            ce_worst = ce_worst.max((g[k] - (at(EPS) - at(-EPS)) / (2.0 * EPS)).abs());
        }

        let anchor = BBox::new(
            rng.random_range(0.0..600.0),
            rng.random_range(0.0..400.0),
            rng.random_range(4.0..200.0),
            rng.random_range(4.0..300.0),
        )
        .unwrap();
        let target = BBox::new(
            rng.random_range(0.0..600.0),
            rng.random_range(0.0..400.0),
            rng.random_range(1.0..200.0),
            rng.random_range(1.0..300.0),
        )
        .unwrap();
        let back = decode_box(&anchor, &encode_box(&anchor, &target).unwrap()).unwrap();
        for (a, b) in [(back.x(), target.x()), (back.y(), target.y()), (back.w(), target.w()), (back.h(), target.h())] {
            rt_worst = rt_worst.max((a - b).abs());
        }
    }
    ensure(l1_worst <= 1e-6, || format!("smooth_l1 gradient error {l1_worst:e}"))?;
    ensure(ce_worst <= 1e-6, || format!("cross_entropy gradient error {ce_worst:e}"))?;
    ensure(rt_worst < 1e-9, || format!("encode/decode error {rt_worst:e}"))?;
    Ok(format!(
        "smooth_l1 {l1_worst:.1e}, cross_entropy {ce_worst:.1e} ({skipped} kink coords skipped), round-trip {rt_worst:.1e}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let negatives: Vec<RpnSample> = (0..32)
        .map(|_| RpnSample::negative(rng.random_range(-4.0..4.0), [offsets(&mut rng, 2.0), offsets(&mut rng, 2.0)]))
        .collect();
    let b = rpn_loss_breakdown(&negatives, &LossConfig::new(1.0, 32, 32).unwrap()).map_err(|e| e.to_string())?;
    ensure(b.regression_visible == 0.0 && b.regression_thermal == 0.0, || format!("regression terms {b:?}"))?;
    ensure(b.total == b.classification, || "total differs from classification".into())?;

    let mixed: Vec<RpnSample> = (0..64)
        .map(|i| {
            let pred = [offsets(&mut rng, 2.0), offsets(&mut rng, 2.0)];
            let z = rng.random_range(-4.0..4.0);
            if i % 3 == 0 {
                RpnSample::positive(z, pred, [offsets(&mut rng, 2.0), offsets(&mut rng, 2.0)])
            } else {
                RpnSample::negative(z, pred)
            }
        })
        .collect();
    let rpn = |lambda: f64| rpn_loss_breakdown(&mixed, &LossConfig::new(lambda, 64, 40).unwrap()).unwrap().total;
    let rpn_gap = ((rpn(2.0) - rpn(0.0)) - 2.0 * (rpn(1.0) - rpn(0.0))).abs();
    let det_sample = DetectorSample {
        class_scores: vec![0.3, -1.2, 2.0],
        true_class: 2,
        pred_v: offsets(&mut rng, 2.0),
        pred_t: offsets(&mut rng, 2.0),
        target_v: Some(offsets(&mut rng, 2.0)),
        target_t: Some(offsets(&mut rng, 2.0)),
    };
    let det = |lambda: f64| detector_loss(&det_sample, lambda).unwrap();
    let det_gap = ((det(2.0) - det(0.0)) - 2.0 * (det(1.0) - det(0.0))).abs();
    ensure(rpn_gap <= 1e-12 && det_gap <= 1e-12, || format!("linearity gaps {rpn_gap:e}, {det_gap:e}"))?;

    let zero = BoxOffsets::new(0.0, 0.0, 0.0, 0.0).unwrap();
    let example = DetectorSample {
        class_scores: vec![0.0, 0.0],
        true_class: 1,
        pred_v: BoxOffsets::new(0.5, 0.0, 0.0, 0.0).unwrap(),
        pred_t: zero,
        target_v: Some(zero),
        target_t: Some(zero),
    };
    let got = detector_loss(&example, 1.0).map_err(|e| e.to_string())?;
    let want = std::f64::consts::LN_2 + 0.125;
    ensure((got - want).abs() <= 1e-12, || format!("constructed example {got} vs {want}"))?;
    Ok(format!("all-negative reg = 0; linearity gaps {rpn_gap:.1e}/{det_gap:.1e}; example = ln 2 + 0.125"))
}

fn reference_nms(dets: &[Detection], thresh: f64) -> Vec<BBox> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score().total_cmp(&dets[a].score()).then(a.cmp(&b)));
    let mut keep: Vec<BBox> = Vec::new();
    for i in order {
        let t = dets[i].pair.thermal;
        if keep.iter().all(|k| iou(k, &t) <= thresh) {
            keep.push(t);
        }
    }
    keep
}

fn criterion_5() -> Outcome {
    let mut kept_total = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..50);
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let v = BBox::new(
                    rng.random_range(0.0..300.0),
                    rng.random_range(0.0..200.0),
                    rng.random_range(5.0..80.0),
                    rng.random_range(10.0..160.0),
                )
                .unwrap();
                let t = v.translated(rng.random_range(-20.0..20.0), rng.random_range(-3.0..3.0)).unwrap();
                Detection::pedestrian(PairedBox::new(v, t), rng.random_range(0..50) as f64 / 49.0).unwrap()
            })
            .collect();
        let kept = paired_nms(&dets, 0.5, None);
        let thermal: Vec<BBox> = kept.iter().map(|d| d.pair.thermal).collect();
        ensure(thermal == reference_nms(&dets, 0.5), || format!("scene {seed}: thermal survivors differ"))?;
        ensure(paired_nms(&kept, 0.5, None) == kept, || format!("scene {seed}: not idempotent"))?;
        kept_total += kept.len();
    }
    Ok(format!("1000 scenes match the thermal reference and are idempotent ({kept_total} survivors)"))
}

fn criterion_6() -> Outcome {
    let gt = PairedBox::aligned(BBox::new(0.0, 0.0, 100.0, 100.0).unwrap());
    // a full-height box of width w·100 overlaps the GT at exactly w
    let at = |o: f64| PairedBox::aligned(BBox::new(0.0, 0.0, o * 100.0, 100.0).unwrap());
    let cfg = AssignmentConfig::default();
    let anchors = [at(0.70), at(0.50), at(0.20)];
    let rpn = assign_rpn(&anchors, &[gt], &cfg).map_err(|e| e.to_string())?;
    let want = vec![SampleLabel::Positive(0), SampleLabel::Ignore, SampleLabel::Negative];
    ensure(rpn.labels == want, || format!("rpn labels {:?}", rpn.labels))?;
    let rois = [at(0.55), at(0.30), at(0.05)];
    let det = assign_detector(&rois, &[gt], &cfg).map_err(|e| e.to_string())?;
    let want = vec![SampleLabel::Positive(0), SampleLabel::Negative, SampleLabel::Ignore];
    ensure(det.labels == want, || format!("detector labels {:?}", det.labels))?;
    Ok("rpn {0.70, 0.50, 0.20} -> {positive, ignore, negative}; detector {0.55, 0.30, 0.05} -> {positive, negative, ignore}".into())
}

fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn criterion_7() -> Outcome {
    let cfg = EvalConfig::default();
    let (frames, _) = aligned_scene(7);
    let perfect: Vec<FrameDetections> = frames
        .iter()
        .map(|f| FrameDetections {
            frame_id: f.frame_id.clone(),
            detections: f.objects.iter().map(|o| Detection::pedestrian(o.pair, 1.0).unwrap()).collect(),
        })
        .collect();
    let report = evaluate(&frames, &perfect, &cfg).map_err(|e| e.to_string())?;
    ensure(report.results.len() == 6 && report.results.iter().all(|r| r.log_average_mr == 0.0), || {
        "perfect detector MR not 0".into()
    })?;
    let report = evaluate(&frames, &[], &cfg).map_err(|e| e.to_string())?;
    ensure(report.results.iter().all(|r| r.log_average_mr == 1.0), || "empty detector MR not 1".into())?;

    let gt = read_dataset(core_fixture("four_frames_gt.jsonl")).map_err(|e| e.to_string())?;
    let dets = read_detections(core_fixture("four_frames_det.jsonl")).map_err(|e| e.to_string())?;
    let report = evaluate(&gt.frames, &dets, &cfg).map_err(|e| e.to_string())?;
    let table =
        [(0.9, 0.0, 0.75), (0.8, 0.0, 0.75), (0.7, 0.25, 0.75), (0.6, 0.5, 0.75), (0.5, 0.5, 0.5), (0.3, 0.75, 0.5)];
    for r in &report.results {
        let got: Vec<(f64, f64, f64)> = r.curve.iter().map(|p| (p.score_thresh, p.fppi, p.miss_rate)).collect();
        ensure(got == table, || format!("fixture curve {got:?}"))?;
        ensure((r.log_average_mr - 0.6854).abs() < 5e-5, || format!("fixture MR {}", r.log_average_mr))?;
    }

    let constant = vec![FrameAnnotations {
        frame_id: "c".into(),
        objects: (0..5)
            .map(|k| pairbox::GtObject::new(PairedBox::aligned(BBox::new(100.0 * k as f64, 0.0, 40.0, 100.0).unwrap())))
            .collect(),
    }];
    let one_hit = vec![FrameDetections {
        frame_id: "c".into(),
        detections: vec![
            Detection::pedestrian(PairedBox::aligned(BBox::new(0.0, 0.0, 40.0, 100.0).unwrap()), 0.7).unwrap()
        ],
    }];
    let report = evaluate(&constant, &one_hit, &cfg).map_err(|e| e.to_string())?;
    ensure(report.results.iter().all(|r| r.log_average_mr == 0.8), || "constant curve MR is not 0.8".into())?;
    Ok("perfect 0, empty 1, 4-frame fixture MR 0.6854, constant 0.8 -> 0.8".into())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let scene = SceneSpec { num_frames: 1000, fixed_width: Some(30.0), seed: 8, ..Default::default() };
    let frames = generate_scene(&scene).map_err(|e| e.to_string())?;
    let cfg = EvalConfig { variants: vec![IouVariant::MultiModal], iou_thresholds: vec![0.7], ..Default::default() };
    let mut single_row = Vec::new();
    for sign in [1.0, -1.0] {
        let mut single = Vec::new();
        for dx in [0.0, 5.0, 10.0, 15.0, 20.0] {
            let shifted = apply_shift(&frames, &ShiftSpec::new(sign * dx, scene.image_width).unwrap()).unwrap();
            let mr = |mode| {
                let spec = MockDetectorSpec { mode, seed: 80, ..Default::default() };
                let dets = mock_detect(&shifted, &spec).unwrap();
                evaluate(&shifted, &dets, &cfg).unwrap().mr(IouVariant::MultiModal, 0.7).unwrap()
            };
            let paired = mr(DetectorMode::Paired);
            ensure(paired == 0.0, || format!("paired MR^M@0.7 = {paired} at dx = {}", sign * dx))?;
            single.push(mr(DetectorMode::SingleBox));
        }
        ensure(single.windows(2).all(|w| w[0] <= w[1]), || format!("single_box not monotone: {single:?}"))?;
        ensure(single[4] == 1.0, || format!("single_box MR^M@0.7 at |dx| = 20 is {}", single[4]))?;
        single_row = single;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let row: Vec<String> = single_row.iter().map(|m| format!("{m:.2}")).collect();
    Ok(format!(
        "single_box MR^M@0.7 over |dx| 0..20: [{}], paired 0.00 throughout, {:.2}s",
        row.join(", "),
        elapsed.as_secs_f64()
    ))
}

// --- criterion 9: CLI determinism ---------------------------------------

const LOSS_SAMPLES: &str = r#"{
  "lambda": 1.0,
  "rpn": [
    {"objectness": 1.5, "label": "positive", "pred_v": [0.1, -0.2, 0.05, 0.3], "pred_t": [0.4, 0.0, -1.3, 0.2],
     "target_v": [0.0, 0.0, 0.0, 0.0], "target_t": [0.2, 0.1, 0.0, 0.0]},
    {"objectness": -0.7, "label": "negative", "pred_v": [0.0, 0.0, 0.0, 0.0], "pred_t": [0.0, 0.0, 0.0, 0.0]}
  ],
  "detector": [
    {"class_scores": [0.0, 0.0], "true_class": 1, "pred_v": [0.5, 0.0, 0.0, 0.0], "pred_t": [0.0, 0.0, 0.0, 0.0],
     "target_v": [0.0, 0.0, 0.0, 0.0], "target_t": [0.0, 0.0, 0.0, 0.0]}
  ]
}"#;

/// Runs the CLI in `dir` and returns its exit status, stdout and the bytes of
/// every file it wrote there.
fn run_cli(dir: &Path, args: &[&str], threads: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pairbox"))
        .args(args)
        .current_dir(dir)
        .env("PAIRBOX_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`pairbox {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    let mut blob = out.stdout;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for p in names {
        blob.extend_from_slice(p.file_name().unwrap().to_string_lossy().as_bytes());
        blob.extend(std::fs::read(&p).unwrap());
    }
    Ok(blob)
}

fn criterion_9() -> Outcome {
    let workloads: Vec<(&str, Vec<&str>)> = vec![
        (
            "generate",
            vec![
                "generate",
                "--out",
                "gt.jsonl",
                "--frames",
                "200",
                "--seed",
                "7",
                "--misalign-min",
                "-4",
                "--misalign-max",
                "4",
                "--det-out",
                "det.jsonl",
                "--detector",
                "paired",
                "--sigma",
                "2",
                "--miss-prob",
                "0.1",
                "--fp-per-frame",
                "0.7",
            ],
        ),
        ("evaluate", vec!["evaluate", "--gt", "gt.jsonl", "--det", "det.jsonl"]),
        (
            "evaluate csv",
            vec!["evaluate", "--gt", "gt.jsonl", "--det", "det.jsonl", "--format", "csv", "--out", "curves.csv"],
        ),
        (
            "evaluate svg",
            vec!["evaluate", "--gt", "gt.jsonl", "--det", "det.jsonl", "--format", "svg", "--out", "curves.svg"],
        ),
        (
            "shift-sweep",
            vec![
                "shift-sweep",
                "--gt",
                "gt.jsonl",
                "--seed",
                "3",
                "--sigma",
                "1.5",
                "--fp-per-frame",
                "0.3",
                "--format",
                "csv",
            ],
        ),
        ("nms", vec!["nms", "--det", "det.jsonl", "--iou-thresh", "0.4"]),
        ("assign", vec!["assign", "--gt", "gt.jsonl", "--stage", "rpn", "--seed", "5", "--stride", "32"]),
        ("losses", vec!["losses", "--samples", "loss.json"]),
    ];
    let threads = [1usize, 1, 4];
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for &t in &threads {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("loss.json"), LOSS_SAMPLES).unwrap();
        let mut per_cmd = Vec::new();
        for (_, args) in &workloads {
            per_cmd.push(run_cli(dir.path(), args, t)?);
        }
        outputs.push(per_cmd);
    }
    for (k, (name, _)) in workloads.iter().enumerate() {
        ensure(outputs[0][k] == outputs[1][k], || format!("`{name}` differs between two 1-thread runs"))?;
        ensure(outputs[0][k] == outputs[2][k], || format!("`{name}` differs between 1 and 4 threads"))?;
    }
    Ok(format!("{} commands byte-identical across 2 runs and 1 vs 4 threads", workloads.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("geometry oracle", criterion_1),
        ("degeneracy", criterion_2),
        ("gradient checks", criterion_3),
        ("loss structure", criterion_4),
        ("paired NMS projection", criterion_5),
        ("assignment thresholds", criterion_6),
        ("evaluation protocol", criterion_7),
        ("shift trend", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        match check() {
            Ok(detail) => {
                let _ = writeln!(err, "criterion {n} [{name}]: PASS - {detail}");
            }
            Err(why) => {
                let _ = writeln!(err, "criterion {n} [{name}]: FAIL - {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
