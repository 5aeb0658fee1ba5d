//! Miss-rate evaluation of paired detections.
//!
//! The protocol: mark small or heavily occluded pedestrians as ignore regions,
//! match detections to ground truth greedily by score under one of the three
//! overlap variants, sweep the score threshold to build a FPPI / miss-rate
//! curve, and summarize the curve by its log-average miss rate over nine
//! reference FPPI values in `[1e-2, 1e0]`.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::geometry::{BBox, IouVariant, Modality, PairedBox};
use crate::pairnms::{score_order, Detection};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occlusion {
    #[default]
    None,
    Partial,
    Heavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub pair: PairedBox,
    pub occlusion: Occlusion,
    pub ignore: bool,
}

impl GtObject {
    pub fn new(pair: PairedBox) -> Self {
        Self { pair, occlusion: Occlusion::None, ignore: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotations {
    pub frame_id: String,
    pub objects: Vec<GtObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_id: String,
    pub detections: Vec<Detection>,
}

/// Marks objects whose `modality` box is not taller than `min_height`, or that
/// are heavily occluded, as ignore regions.
pub fn filter_reasonable_by(frames: &[FrameAnnotations], min_height: f64, modality: Modality) -> Vec<FrameAnnotations> {
    frames
        .iter()
        .map(|f| FrameAnnotations {
            frame_id: f.frame_id.clone(),
            objects: f
                .objects
                .iter()
                .map(|o| {
                    let too_small = o.pair.get(modality).h() <= min_height;
                    let heavy = o.occlusion == Occlusion::Heavy;
                    GtObject { ignore: o.ignore || too_small || heavy, ..*o }
                })
                .collect(),
        })
        .collect()
}

/// Reasonable-configuration filter measured on the thermal box.
pub fn filter_reasonable(frames: &[FrameAnnotations], min_height: f64) -> Vec<FrameAnnotations> {
    filter_reasonable_by(frames, min_height, Modality::Thermal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetOutcome {
    /// Matched the evaluable GT at this index.
    TruePositive(usize),
    FalsePositive,
    /// Absorbed by an ignore region.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GtOutcome {
    /// Found by the detection at this index.
    Detected(usize),
    Missed,
    /// Ignore region; never counted.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMatch {
    /// One outcome per input detection, in input order.
    pub detections: Vec<DetOutcome>,
    /// One outcome per GT object, in input order.
    pub ground_truth: Vec<GtOutcome>,
}

/// Greedy one-to-one matching in descending score order.
///
/// Each detection takes the unmatched evaluable GT with the highest overlap
/// at or above `thresh` (lowest index on ties). Failing that, a detection
/// overlapping any ignore region at or above `thresh` is ignored; otherwise it
/// is a false positive.
pub fn match_frame(dets: &[Detection], gts: &[GtObject], variant: IouVariant, thresh: f64) -> FrameMatch {
    let mut det_out = vec![DetOutcome::FalsePositive; dets.len()];
    let mut gt_out: Vec<GtOutcome> =
        gts.iter().map(|g| if g.ignore { GtOutcome::Ignored } else { GtOutcome::Missed }).collect();

    for i in score_order(dets) {
        let d = &dets[i].pair;
        let mut best: Option<(usize, f64)> = None;
        let mut hits_ignore = false;
        for (j, g) in gts.iter().enumerate() {
            let o = variant.overlap(&g.pair, d);
            if o < thresh {
                continue;
            }
            match gt_out[j] {
                GtOutcome::Missed if best.is_none_or(|(_, b)| o > b) => best = Some((j, o)),
                GtOutcome::Ignored => hits_ignore = true,
                _ => {}
            }
        }
        det_out[i] = match best {
            Some((j, _)) => {
                gt_out[j] = GtOutcome::Detected(i);
                DetOutcome::TruePositive(j)
            }
            None if hits_ignore => DetOutcome::Ignored,
            None => DetOutcome::FalsePositive,
        };
    }
    FrameMatch { detections: det_out, ground_truth: gt_out }
}

/// A frame's match together with the scores of its detections.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFrame {
    pub scores: Vec<f64>,
    pub matched: FrameMatch,
}

impl MatchedFrame {
    pub fn new(dets: &[Detection], gts: &[GtObject], variant: IouVariant, thresh: f64) -> Self {
        Self { scores: dets.iter().map(Detection::score).collect(), matched: match_frame(dets, gts, variant, thresh) }
    }

    pub fn evaluable(&self) -> usize {
        self.matched.ground_truth.iter().filter(|g| **g != GtOutcome::Ignored).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Detections with score ≥ this are counted.
    pub score_thresh: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub missed: usize,
    pub fppi: f64,
    pub miss_rate: f64,
}

/// FPPI / miss-rate curve, one point per distinct detection score, ordered by
/// descending threshold.
///
/// Greedy matching visits detections by score, so the match at any score
/// threshold is the prefix of the full match; one pass suffices. An empty
/// detection set yields the single point `(fppi 0, miss rate 1)` at threshold
/// 1.
pub fn miss_rate_curve(frames: &[MatchedFrame]) -> Result<Vec<CurvePoint>, EvalError> {
    let evaluable: usize = frames.iter().map(MatchedFrame::evaluable).sum();
    if evaluable == 0 {
        return Err(EvalError::NoEvaluableGroundTruth);
    }
    let n_frames = frames.len().max(1) as f64;

    let mut scored: Vec<(f64, DetOutcome)> =
        frames.iter().flat_map(|f| f.scores.iter().copied().zip(f.matched.detections.iter().copied())).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let point = |score_thresh: f64, tp: usize, fp: usize| CurvePoint {
        score_thresh,
        true_positives: tp,
        false_positives: fp,
        missed: evaluable - tp,
        fppi: fp as f64 / n_frames,
        miss_rate: (evaluable - tp) as f64 / evaluable as f64,
    };

    if scored.is_empty() {
        return Ok(vec![point(1.0, 0, 0)]);
    }
    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &(score, outcome)) in scored.iter().enumerate() {
        match outcome {
            DetOutcome::TruePositive(_) => tp += 1,
            DetOutcome::FalsePositive => fp += 1,
            DetOutcome::Ignored => {}
        }
        let last_of_score = scored.get(k + 1).is_none_or(|next| next.0 != score);
        if last_of_score {
            curve.push(point(score, tp, fp));
        }
    }
    Ok(curve)
}

/// The nine reference FPPI values `10^-2, 10^-1.75, …, 10^0`.
pub fn reference_fppi() -> [f64; 9] {
    std::array::from_fn(|k| 10f64.powf(-2.0 + 0.25 * k as f64))
}

/// Miss rates read off `curve` at the reference FPPI values.
///
/// Each reference takes the miss rate of the last curve point whose FPPI does
/// not exceed it; references below the smallest achieved FPPI take the best
/// miss rate at that smallest FPPI.
pub fn sample_at_references(curve: &[CurvePoint]) -> Result<[f64; 9], EvalError> {
    if curve.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let min_fppi = curve.iter().map(|p| p.fppi).fold(f64::INFINITY, f64::min);
    let at_min = curve.iter().rev().find(|p| p.fppi == min_fppi).map(|p| p.miss_rate).unwrap_or(1.0);
    Ok(reference_fppi().map(|r| {
        // relative slack absorbs the rounding of 10^x against k / n_frames
        let limit = r * (1.0 + 1e-12);
        curve.iter().rev().find(|p| p.fppi <= limit).map_or(at_min, |p| p.miss_rate)
    }))
}

/// Geometric mean of the curve's miss rates at the reference FPPI values.
///
/// Miss rates are first raised to at least `floor`; with `floor = 0` a single
/// zero sample makes the mean 0.
pub fn log_average_miss_rate(curve: &[CurvePoint], floor: f64) -> Result<f64, EvalError> {
    let samples = sample_at_references(curve)?;
    Ok(geometric_mean(&samples, floor))
}

fn geometric_mean(values: &[f64], floor: f64) -> f64 {
    let floored: Vec<f64> = values.iter().map(|&m| m.max(floor)).collect();
    if floored.iter().any(|&m| m <= 0.0) {
        return 0.0;
    }
    // exp(mean(ln m)) drifts by an ulp on constant input
    if floored.windows(2).all(|w| w[0] == w[1]) {
        return floored.first().copied().unwrap_or(0.0);
    }
    (floored.iter().map(|m| m.ln()).sum::<f64>() / floored.len() as f64).exp()
}

/// A detector that emits one box per object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleBoxDetection {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: u32,
}

/// Lifts single-modality detections into pairs by using the same box for
/// both modalities.
pub fn substitute_single_modality(
    frame_id: impl Into<String>,
    dets: &[SingleBoxDetection],
) -> Result<FrameDetections, crate::error::DetectionError> {
    let detections = dets
        .iter()
        .map(|d| Detection::new(PairedBox::aligned(d.bbox), d.score, d.class_id))
        .collect::<Result<_, _>>()?;
    Ok(FrameDetections { frame_id: frame_id.into(), detections })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub variants: Vec<IouVariant>,
    /// Objects must be strictly taller than this to be evaluable.
    pub min_height: f64,
    pub height_modality: Modality,
    /// Lower bound applied to sampled miss rates before averaging.
    pub mr_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.5, 0.7],
            variants: IouVariant::ALL.to_vec(),
            min_height: 55.0,
            height_modality: Modality::Thermal,
            mr_floor: 0.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.iou_thresholds.is_empty() || self.variants.is_empty() {
            return Err(EvalError::InvalidConfig("need at least one threshold and one variant".into()));
        }
        if let Some(t) = self.iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(EvalError::InvalidConfig(format!("IoU threshold {t} outside (0, 1]")));
        }
        if !(self.mr_floor >= 0.0 && self.mr_floor < 1.0) {
            return Err(EvalError::InvalidConfig(format!("mr_floor {} outside [0, 1)", self.mr_floor)));
        }
        if !self.min_height.is_finite() {
            return Err(EvalError::InvalidConfig("min_height must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricResult {
    pub variant: IouVariant,
    pub iou_thresh: f64,
    pub curve: Vec<CurvePoint>,
    pub log_average_mr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub frames: usize,
    pub evaluable: usize,
    pub ignored: usize,
    /// Variant-major, in configuration order.
    pub results: Vec<MetricResult>,
}

impl EvalReport {
    pub fn get(&self, variant: IouVariant, iou_thresh: f64) -> Option<&MetricResult> {
        self.results.iter().find(|r| r.variant == variant && r.iou_thresh == iou_thresh)
    }

    /// Log-average miss rate for one cell, if it was computed.
    pub fn mr(&self, variant: IouVariant, iou_thresh: f64) -> Option<f64> {
        self.get(variant, iou_thresh).map(|r| r.log_average_mr)
    }
}

/// Runs the full protocol for every configured variant and threshold.
pub fn evaluate(
    annotations: &[FrameAnnotations],
    detections: &[FrameDetections],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(annotations.len());
    for (i, f) in annotations.iter().enumerate() {
        if index.insert(f.frame_id.as_str(), i).is_some() {
            return Err(EvalError::DuplicateFrame(f.frame_id.clone()));
        }
    }

    let mut per_frame: Vec<Vec<Detection>> = vec![Vec::new(); annotations.len()];
    let mut unknown: Vec<String> = Vec::new();
    let mut seen_unknown = HashSet::new();
    for fd in detections {
        match index.get(fd.frame_id.as_str()) {
            Some(&i) => per_frame[i].extend_from_slice(&fd.detections),
            None => {
                if seen_unknown.insert(fd.frame_id.clone()) {
                    unknown.push(fd.frame_id.clone());
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(EvalError::UnknownFrames(unknown));
    }

    let filtered = filter_reasonable_by(annotations, cfg.min_height, cfg.height_modality);
    let total: usize = filtered.iter().map(|f| f.objects.len()).sum();
    let ignored: usize = filtered.iter().flat_map(|f| &f.objects).filter(|o| o.ignore).count();

    let mut results = Vec::with_capacity(cfg.variants.len() * cfg.iou_thresholds.len());
    for &variant in &cfg.variants {
        for &thresh in &cfg.iou_thresholds {
            let matched =
                par::map_indexed(&filtered, |i, f| MatchedFrame::new(&per_frame[i], &f.objects, variant, thresh));
            let curve = miss_rate_curve(&matched)?;
            let log_average_mr = log_average_miss_rate(&curve, cfg.mr_floor)?;
            results.push(MetricResult { variant, iou_thresh: thresh, curve, log_average_mr });
        }
    }
    Ok(EvalReport { frames: annotations.len(), evaluable: total - ignored, ignored, results })
}
