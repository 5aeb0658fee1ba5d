use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use pairbox::config::RunConfig;
use pairbox::error::{Error, IoError};
use pairbox::evaluation::{evaluate, FrameAnnotations, FrameDetections};
use pairbox::io::{self, Dataset, DatasetMeta};
use pairbox::pairnms::paired_nms;
use pairbox::regression::{
    cross_entropy, detector_loss_breakdown, rpn_loss_breakdown, smooth_l1, AnchorLabel, BoxOffsets, LossBreakdown,
    LossConfig,
};
use pairbox::report::{curves_csv, curves_svg, fmt_sig, summary_table, sweep_csv, sweep_table};
use pairbox::sampling::{assign_detector, assign_rpn, grid_anchors, sample_minibatch, AssignmentResult, SampleLabel};
use pairbox::simulation::{
    apply_shift, frame_rng, generate_scene, mock_detect, shift_sweep, DetectorMode, MockDetectorSpec, ShiftSpec,
    SweepCell, SweepRow,
};
use pairbox::{EvalConfig, IouVariant, PairedBox};

use crate::{
    AssignArgs, Cli, Command, EvaluateArgs, Format, GenerateArgs, LossesArgs, MockMode, NmsArgs, NoiseArgs, Stage,
    SweepArgs, SweepDetector,
};

/// Failure classes mapped to exit codes: domain errors 1, input errors 2.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Input(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Input(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}

domain_from!(
    pairbox::error::EvalError,
    pairbox::error::SimulationError,
    pairbox::error::SamplingError,
    pairbox::error::RegressionError
);

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Evaluate(a) => cmd_evaluate(a, config),
        Command::ShiftSweep(a) => cmd_shift_sweep(a, config),
        Command::Generate(a) => cmd_generate(a, config),
        Command::Nms(a) => cmd_nms(a, config),
        Command::Assign(a) => cmd_assign(a, config),
        Command::Losses(a) => cmd_losses(a, config),
    }
}

#[cfg(feature = "parallel")]
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("PAIRBOX_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().map_err(|_| CliError::Input(format!("PAIRBOX_THREADS=`{v}` is not a thread count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> Result<()> {
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check_config(cfg: &RunConfig, image_width: f64) -> Result<()> {
    cfg.validate(image_width).map_err(CliError::Input)
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn apply_eval_flags(cfg: &mut RunConfig, iou_thresh: Option<Vec<f64>>, variants: Option<Vec<IouVariant>>) {
    if let Some(t) = iou_thresh {
        cfg.iou_thresholds = t;
    }
    if let Some(v) = variants {
        cfg.variants = v;
    }
}

fn cmd_evaluate(a: EvaluateArgs, mut cfg: RunConfig) -> Result<()> {
    apply_eval_flags(&mut cfg, a.iou_thresh, a.variants);
    if let Some(h) = a.min_height {
        cfg.min_height = h;
    }
    let gt = io::read_dataset(&a.gt)?;
    check_config(&cfg, gt.meta.image_width)?;
    let dets = io::read_detections(&a.det)?;
    let report = evaluate(&gt.frames, &dets, &cfg.eval_config())?;

    let table = summary_table(&report);
    let rendered = match a.format {
        Format::Table => table.clone(),
        Format::Csv => curves_csv(&report),
        Format::Svg => curves_svg(&report),
    };
    emit(a.out.as_deref(), &rendered)?;
    if a.out.is_some() && a.format != Format::Table {
        emit(None, &table)?;
    }
    if let Some(p) = &cfg.output.table {
        emit(Some(p), &table)?;
    }
    if let Some(p) = &cfg.output.curves {
        emit(Some(p), &curves_csv(&report))?;
    }
    if let Some(p) = &cfg.output.svg {
        emit(Some(p), &curves_svg(&report))?;
    }
    Ok(())
}

fn apply_noise(spec: &mut MockDetectorSpec, n: &NoiseArgs) {
    if let Some(v) = n.sigma {
        spec.center_noise_sigma = v;
    }
    if let Some(v) = n.size_sigma {
        spec.size_noise_sigma = v;
    }
    if let Some(v) = n.miss_prob {
        spec.miss_prob = v;
    }
    if let Some(v) = n.fp_per_frame {
        spec.fp_per_frame = v;
    }
    if let Some(v) = n.score_noise {
        spec.score.noise_sigma = v;
    }
}

fn cmd_shift_sweep(a: SweepArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(s) = a.shift {
        cfg.shifts = s;
    }
    apply_eval_flags(&mut cfg, a.iou_thresh, None);
    let gt = io::read_dataset(&a.gt)?;
    check_config(&cfg, gt.meta.image_width)?;
    let eval = cfg.eval_config();

    let rows = match &a.det_template {
        Some(template) => sweep_provided(&gt, &cfg.shifts, template, &eval)?,
        None => {
            let mut base = cfg.detector;
            base.image_width = gt.meta.image_width;
            base.image_height = gt.meta.image_height;
            if let Some(s) = a.seed {
                base.seed = s;
            }
            apply_noise(&mut base, &a.noise);
            let modes: &[DetectorMode] = match a.detector {
                SweepDetector::Paired => &[DetectorMode::Paired],
                SweepDetector::SingleBox => &[DetectorMode::SingleBox],
                SweepDetector::Both => &[DetectorMode::Paired, DetectorMode::SingleBox],
            };
            let specs: Vec<MockDetectorSpec> = modes.iter().map(|&mode| MockDetectorSpec { mode, ..base }).collect();
            shift_sweep(&gt.frames, gt.meta.image_width, &cfg.shifts, &specs, &eval)?
        }
    };
    let text = match a.format {
        Format::Table => sweep_table(&rows),
        Format::Csv => sweep_csv(&rows),
        Format::Svg => return Err(CliError::Input("shift-sweep supports --format table or csv".into())),
    };
    emit(a.out.as_deref(), &text)
}

fn sweep_provided(gt: &Dataset, shifts: &[f64], template: &str, eval: &EvalConfig) -> Result<Vec<SweepRow>> {
    if !template.contains("{dx}") {
        return Err(CliError::Input(format!("detection template `{template}` lacks a `{{dx}}` placeholder")));
    }
    let cfg = EvalConfig { variants: vec![IouVariant::MultiModal], ..eval.clone() };
    let mut rows = Vec::with_capacity(shifts.len());
    for &dx in shifts {
        let shifted = apply_shift(&gt.frames, &ShiftSpec::new(dx, gt.meta.image_width)?)?;
        let dets = io::read_detections(template.replace("{dx}", &fmt_sig(dx, 9)))?;
        let report = evaluate(&shifted, &dets, &cfg)?;
        let mr = cfg
            .iou_thresholds
            .iter()
            .map(|&t| (t, report.mr(IouVariant::MultiModal, t).expect("threshold was evaluated")))
            .collect();
        rows.push(SweepRow { dx, cells: vec![SweepCell { label: "provided".into(), mr }] });
    }
    Ok(rows)
}

fn cmd_generate(a: GenerateArgs, cfg: RunConfig) -> Result<()> {
    let mut scene = cfg.scene;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = a.$flag {
                scene.$field = v;
            }
        )*};
    }
    set!(frames => num_frames, seed => seed, pedestrians_min => pedestrians_min, pedestrians_max => pedestrians_max,
         height_min => height_min, height_max => height_max, misalign_min => misalignment_min,
         misalign_max => misalignment_max);
    if a.box_width.is_some() {
        scene.fixed_width = a.box_width;
    }
    let mut frames = generate_scene(&scene)?;
    if let Some(dx) = a.shift {
        frames = apply_shift(&frames, &ShiftSpec::new(dx, scene.image_width)?)?;
    }
    let meta = DatasetMeta { name: a.name, image_width: scene.image_width, image_height: scene.image_height };
    let dataset = Dataset { meta, frames };
    io::write_dataset(&dataset, &a.out)?;

    let Some(det_out) = a.det_out else {
        if a.detector.is_some() {
            return Err(CliError::Input("--detector needs --det-out".into()));
        }
        return Ok(());
    };
    let mut spec = cfg.detector;
    spec.image_width = scene.image_width;
    spec.image_height = scene.image_height;
    spec.seed = scene.seed;
    if let Some(m) = a.detector {
        spec.mode = match m {
            MockMode::Paired => DetectorMode::Paired,
            MockMode::SingleBox => DetectorMode::SingleBox,
        };
    }
    apply_noise(&mut spec, &a.noise);
    let dets = mock_detect(&dataset.frames, &spec)?;
    io::write_detections(&dets, &det_out)?;
    Ok(())
}

fn cmd_nms(a: NmsArgs, cfg: RunConfig) -> Result<()> {
    let thresh = a.iou_thresh.unwrap_or(cfg.nms_detection_thresh);
    if !(0.0..=1.0).contains(&thresh) {
        return Err(CliError::Input(format!("NMS threshold {thresh} outside [0, 1]")));
    }
    let frames = io::read_detections(&a.det)?;
    let kept: Vec<FrameDetections> = frames
        .into_iter()
        .map(|f| FrameDetections { detections: paired_nms(&f.detections, thresh, a.max_keep), frame_id: f.frame_id })
        .collect();
    emit(a.out.as_deref(), &io::detections_to_string(&kept))
}

struct FrameAssignment {
    frame_id: String,
    result: AssignmentResult,
    sampled: Option<Vec<bool>>,
}

fn cmd_assign(a: AssignArgs, cfg: RunConfig) -> Result<()> {
    let gt = io::read_dataset(&a.gt)?;
    let acfg = cfg.assignment;
    acfg.validate()?;
    let candidates: HashMap<String, Vec<PairedBox>> = match &a.candidates {
        Some(p) => {
            let list = io::read_candidates(p)?;
            let known: std::collections::HashSet<&str> = gt.frames.iter().map(|f| f.frame_id.as_str()).collect();
            if let Some(c) = list.iter().find(|c| !known.contains(c.frame_id.as_str())) {
                return Err(CliError::Domain(format!("candidates for unknown frame `{}`", c.frame_id)));
            }
            list.into_iter().map(|c| (c.frame_id, c.pairs)).collect()
        }
        None => HashMap::new(),
    };
    let grid = if a.candidates.is_none() {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(a.stride) || !a.scales.iter().chain(&a.aspects).all(|v| positive(*v)) {
            return Err(CliError::Input("stride, scales and aspects must be positive".into()));
        }
        grid_anchors(gt.meta.image_width, gt.meta.image_height, a.stride, &a.scales, &a.aspects)
    } else {
        Vec::new()
    };
    let (batch, pos_fraction) = match a.stage {
        Stage::Rpn => (acfg.rpn_batch, acfg.rpn_pos_fraction),
        Stage::Detector => (acfg.det_batch, acfg.det_pos_fraction),
    };

    let mut out = Vec::with_capacity(gt.frames.len());
    for (i, frame) in gt.frames.iter().enumerate() {
        let cands = match &a.candidates {
            Some(_) => candidates.get(&frame.frame_id).map(Vec::as_slice).unwrap_or(&[]),
            None => grid.as_slice(),
        };
        let gts = gt_pairs(frame);
        let result = match a.stage {
            Stage::Rpn => assign_rpn(cands, &gts, &acfg)?,
            Stage::Detector => assign_detector(cands, &gts, &acfg)?,
        };
        let sampled = match a.seed {
            Some(seed) if !result.positives().is_empty() || !result.negatives().is_empty() => {
                let picked = sample_minibatch(&result, batch, pos_fraction, &mut frame_rng(seed, i))?;
                let mut mask = vec![false; cands.len()];
                for k in picked {
                    mask[k] = true;
                }
                Some(mask)
            }
            Some(_) => Some(vec![false; cands.len()]),
            None => None,
        };
        out.push(FrameAssignment { frame_id: frame.frame_id.clone(), result, sampled });
    }

    let text = match a.format {
        Format::Csv => assignment_csv(&out, a.seed.is_some()),
        Format::Table => assignment_table(&out),
        Format::Svg => return Err(CliError::Input("assign supports --format csv or table".into())),
    };
    emit(a.out.as_deref(), &text)
}

fn gt_pairs(frame: &FrameAnnotations) -> Vec<PairedBox> {
    frame.objects.iter().filter(|o| !o.ignore).map(|o| o.pair).collect()
}

fn assignment_csv(frames: &[FrameAssignment], with_sample: bool) -> String {
    let mut s = String::from("frame,candidate,label,gt,max_ioum");
    s.push_str(if with_sample { ",sampled\n" } else { "\n" });
    for f in frames {
        for (k, (label, o)) in f.result.labels.iter().zip(&f.result.max_ioum).enumerate() {
            let gt = match label {
                SampleLabel::Positive(j) => j.to_string(),
                _ => String::new(),
            };
            let _ = write!(s, "{},{k},{},{gt},{}", f.frame_id, label.name(), fmt_sig(*o, 9));
            if let Some(mask) = &f.sampled {
                let _ = write!(s, ",{}", mask[k] as u8);
            }
            s.push('\n');
        }
    }
    s
}

fn assignment_table(frames: &[FrameAssignment]) -> String {
    let mut s = format!("{:<12} {:>10} {:>10} {:>10} {:>10}\n", "frame", "positive", "negative", "ignore", "sampled");
    for f in frames {
        let pos = f.result.positives().len();
        let neg = f.result.negatives().len();
        let ign = f.result.labels.len() - pos - neg;
        let sampled = f.sampled.as_ref().map_or("-".to_string(), |m| m.iter().filter(|b| **b).count().to_string());
        let _ = writeln!(s, "{:<12} {pos:>10} {neg:>10} {ign:>10} {sampled:>10}", f.frame_id);
    }
    s
}

fn cmd_losses(a: LossesArgs, _cfg: RunConfig) -> Result<()> {
    let file = io::read_loss_samples(&a.samples)?;
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(CliError::Input(format!("--eps {} must be positive", a.eps)));
    }
    let mut s = String::new();
    if !file.rpn.is_empty() {
        let n = file.rpn.len();
        let lc = LossConfig::new(file.lambda, n, file.n_reg.unwrap_or(n))?;
        let b = rpn_loss_breakdown(&file.rpn, &lc)?;
        let _ =
            writeln!(s, "rpn: {n} samples  lambda {}  n_cls {}  n_reg {}", fmt_sig(lc.lambda, 9), lc.n_cls, lc.n_reg);
        write_breakdown(&mut s, &b);
    }
    if !file.detector.is_empty() {
        let _ = writeln!(s, "detector: {} samples  lambda {}", file.detector.len(), fmt_sig(file.lambda, 9));
        let _ = writeln!(
            s,
            "{:>6} {:>16} {:>16} {:>16} {:>16}",
            "roi", "classification", "reg_visible", "reg_thermal", "total"
        );
        let mut sum = 0.0;
        for (i, d) in file.detector.iter().enumerate() {
            let b = detector_loss_breakdown(d, file.lambda)?;
            sum += b.total;
            let _ = writeln!(
                s,
                "{i:>6} {:>16} {:>16} {:>16} {:>16}",
                fmt_sig(b.classification, 9),
                fmt_sig(b.regression_visible, 9),
                fmt_sig(b.regression_thermal, 9),
                fmt_sig(b.total, 9)
            );
        }
        let _ = writeln!(s, "  mean total {}", fmt_sig(sum / file.detector.len() as f64, 9));
    }

    let mut ce_err: f64 = 0.0;
    let mut l1_err: f64 = 0.0;
    for r in &file.rpn {
        let positive = r.label == AnchorLabel::Positive;
        ce_err = ce_err.max(ce_grad_error(&[0.0, r.objectness], positive as usize, a.eps)?);
        if let (true, Some(tv), Some(tt)) = (positive, &r.target_v, &r.target_t) {
            l1_err = l1_err.max(l1_grad_error(&r.pred_v, tv, a.eps)).max(l1_grad_error(&r.pred_t, tt, a.eps));
        }
    }
    for d in &file.detector {
        ce_err = ce_err.max(ce_grad_error(&d.class_scores, d.true_class, a.eps)?);
        if let (true, Some(tv), Some(tt)) = (d.is_foreground(), &d.target_v, &d.target_t) {
            l1_err = l1_err.max(l1_grad_error(&d.pred_v, tv, a.eps)).max(l1_grad_error(&d.pred_t, tt, a.eps));
        }
    }
    let _ = writeln!(s, "gradient check (central differences, eps {}):", fmt_sig(a.eps, 3));
    let _ = writeln!(s, "  cross_entropy max |analytic - numeric| {:.3e}", ce_err);
    let _ = writeln!(s, "  smooth_l1     max |analytic - numeric| {:.3e}", l1_err);
    emit(a.out.as_deref(), &s)
}

fn write_breakdown(s: &mut String, b: &LossBreakdown) {
    for (name, v) in [
        ("classification", b.classification),
        ("reg_visible", b.regression_visible),
        ("reg_thermal", b.regression_thermal),
        ("total", b.total),
    ] {
        let _ = writeln!(s, "  {name:<16} {}", fmt_sig(v, 9));
    }
}

fn ce_grad_error(logits: &[f64], label: usize, eps: f64) -> Result<f64> {
    let (_, grad) = cross_entropy(logits, label)?;
    let mut worst: f64 = 0.0;
    let mut z = logits.to_vec();
    for k in 0..z.len() {
        let orig = z[k];
        z[k] = orig + eps;
        let up = cross_entropy(&z, label)?.0;
        z[k] = orig - eps;
        let down = cross_entropy(&z, label)?.0;
        z[k] = orig;
        worst = worst.max((grad[k] - (up - down) / (2.0 * eps)).abs());
    }
    Ok(worst)
}

fn l1_grad_error(pred: &BoxOffsets, target: &BoxOffsets, eps: f64) -> f64 {
    let grad = smooth_l1(pred, target).1.as_array();
    let base = pred.as_array();
    let loss_at = |p: [f64; 4]| BoxOffsets::try_from(p).map(|p| smooth_l1(&p, target).0).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let mut up = base;
        let mut down = base;
        up[k] += eps;
        down[k] -= eps;
        worst = worst.max((grad[k] - (loss_at(up) - loss_at(down)) / (2.0 * eps)).abs());
    }
    worst
}
