//! Training-sample assignment for anchor pairs and RoI pairs.
//!
//! Candidates are labeled by their best multi-modal IoU against the ground
//! truth pairs, then a fixed-size mini-batch is drawn with a capped share of
//! positives.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SamplingError;
use crate::geometry::{iou_multimodal, BBox, PairedBox};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignmentConfig {
    /// RPN positives need max IoU^M strictly above this.
    pub rpn_pos_thresh: f64,
    /// RPN negatives need max IoU^M strictly below this.
    pub rpn_neg_thresh: f64,
    /// Detector positives need max IoU^M at or above this.
    pub det_pos_thresh: f64,
    /// Detector negatives fall in `[det_neg_lo, det_neg_hi)`.
    pub det_neg_lo: f64,
    pub det_neg_hi: f64,
    pub rpn_batch: usize,
    pub rpn_pos_fraction: f64,
    pub det_batch: usize,
    pub det_pos_fraction: f64,
    /// Also mark, for every GT pair, the anchor pair(s) overlapping it most as
    /// positive regardless of threshold (RPN only).
    pub force_best_anchor: bool,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self {
            rpn_pos_thresh: 0.63,
            rpn_neg_thresh: 0.3,
            det_pos_thresh: 0.5,
            det_neg_lo: 0.1,
            det_neg_hi: 0.5,
            rpn_batch: 256,
            rpn_pos_fraction: 0.5,
            det_batch: 128,
            det_pos_fraction: 0.25,
            force_best_anchor: false,
        }
    }
}

impl AssignmentConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SamplingError::InvalidConfig(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("rpn_pos_thresh", self.rpn_pos_thresh)?;
        unit("rpn_neg_thresh", self.rpn_neg_thresh)?;
        unit("det_pos_thresh", self.det_pos_thresh)?;
        unit("det_neg_lo", self.det_neg_lo)?;
        unit("det_neg_hi", self.det_neg_hi)?;
        if self.rpn_neg_thresh > self.rpn_pos_thresh {
            return Err(SamplingError::InvalidConfig("rpn_neg_thresh exceeds rpn_pos_thresh".into()));
        }
        if self.det_neg_lo >= self.det_neg_hi {
            return Err(SamplingError::InvalidConfig("det_neg_lo must be below det_neg_hi".into()));
        }
        if self.det_neg_hi > self.det_pos_thresh {
            return Err(SamplingError::InvalidConfig("det_neg_hi exceeds det_pos_thresh".into()));
        }
        for (name, f) in [("rpn_pos_fraction", self.rpn_pos_fraction), ("det_pos_fraction", self.det_pos_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(SamplingError::InvalidConfig(format!("{name} = {f} outside (0, 1)")));
            }
        }
        if self.rpn_batch == 0 || self.det_batch == 0 {
            return Err(SamplingError::InvalidConfig("batch sizes must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "label", content = "gt")]
pub enum SampleLabel {
    /// Matched to the GT pair at this index.
    Positive(usize),
    Negative,
    Ignore,
}

impl SampleLabel {
    pub fn name(&self) -> &'static str {
        match self {
            SampleLabel::Positive(_) => "positive",
            SampleLabel::Negative => "negative",
            SampleLabel::Ignore => "ignore",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentResult {
    pub labels: Vec<SampleLabel>,
    /// Best IoU^M of each candidate over all GT pairs (0 with no GT).
    pub max_ioum: Vec<f64>,
}

impl AssignmentResult {
    pub fn positives(&self) -> Vec<usize> {
        self.indices_where(|l| matches!(l, SampleLabel::Positive(_)))
    }

    pub fn negatives(&self) -> Vec<usize> {
        self.indices_where(|l| *l == SampleLabel::Negative)
    }

    fn indices_where(&self, pred: impl Fn(&SampleLabel) -> bool) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, l)| pred(l)).map(|(i, _)| i).collect()
    }
}

/// Best IoU^M of `cand` over `gts`; ties go to the lowest GT index.
fn best_match(cand: &PairedBox, gts: &[PairedBox]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, g) in gts.iter().enumerate() {
        let o = iou_multimodal(g, cand);
        if best.is_none_or(|(_, b)| o > b) {
            best = Some((j, o));
        }
    }
    best
}

fn assign_with(
    cands: &[PairedBox],
    gts: &[PairedBox],
    without_gt: SampleLabel,
    label: impl Fn(usize, f64) -> SampleLabel + Sync + Send,
) -> AssignmentResult {
    let rows = par::map(cands, |c| match best_match(c, gts) {
        Some((j, o)) => (label(j, o), o),
        None => (without_gt, 0.0),
    });
    let (labels, max_ioum) = rows.into_iter().unzip();
    AssignmentResult { labels, max_ioum }
}

/// Labels anchor pairs: positive above `rpn_pos_thresh`, negative below
/// `rpn_neg_thresh`, ignore in between. With no GT every anchor is negative.
pub fn assign_rpn(
    anchors: &[PairedBox],
    gts: &[PairedBox],
    cfg: &AssignmentConfig,
) -> Result<AssignmentResult, SamplingError> {
    cfg.validate()?;
    let mut result = assign_with(anchors, gts, SampleLabel::Negative, |j, o| {
        if o > cfg.rpn_pos_thresh {
            SampleLabel::Positive(j)
        } else if o < cfg.rpn_neg_thresh {
            SampleLabel::Negative
        } else {
            SampleLabel::Ignore
        }
    });
    if cfg.force_best_anchor {
        for (j, g) in gts.iter().enumerate() {
            let overlaps: Vec<f64> = anchors.iter().map(|a| iou_multimodal(g, a)).collect();
            let best = overlaps.iter().copied().fold(0.0, f64::max);
            if best <= 0.0 {
                continue;
            }
            for (i, &o) in overlaps.iter().enumerate() {
                if o == best && !matches!(result.labels[i], SampleLabel::Positive(_)) {
                    result.labels[i] = SampleLabel::Positive(j);
                }
            }
        }
    }
    Ok(result)
}

/// Labels RoI pairs: positive at or above `det_pos_thresh`, negative in
/// `[det_neg_lo, det_neg_hi)`, ignore otherwise.
pub fn assign_detector(
    rois: &[PairedBox],
    gts: &[PairedBox],
    cfg: &AssignmentConfig,
) -> Result<AssignmentResult, SamplingError> {
    cfg.validate()?;
    // with no GT every overlap is 0, which is negative only if the band reaches 0
    let without_gt = if cfg.det_neg_lo <= 0.0 { SampleLabel::Negative } else { SampleLabel::Ignore };
    Ok(assign_with(rois, gts, without_gt, |j, o| {
        if o >= cfg.det_pos_thresh {
            SampleLabel::Positive(j)
        } else if o >= cfg.det_neg_lo && o < cfg.det_neg_hi {
            SampleLabel::Negative
        } else {
            SampleLabel::Ignore
        }
    }))
}

/// Draws up to `floor(pos_fraction · batch)` positives uniformly, then fills
/// the rest of the batch with uniformly drawn negatives. Returns positives
/// followed by negatives, each in ascending index order.
pub fn sample_minibatch<R: Rng + ?Sized>(
    labels: &AssignmentResult,
    batch: usize,
    pos_fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>, SamplingError> {
    if batch == 0 {
        return Err(SamplingError::InvalidConfig("batch must be ≥ 1".into()));
    }
    if !(pos_fraction > 0.0 && pos_fraction < 1.0) {
        return Err(SamplingError::InvalidConfig(format!("pos_fraction = {pos_fraction} outside (0, 1)")));
    }
    let pos = labels.positives();
    let neg = labels.negatives();
    if pos.is_empty() && neg.is_empty() {
        return Err(SamplingError::NoCandidates);
    }
    let pos_quota = ((pos_fraction * batch as f64).floor() as usize).min(pos.len());
    let neg_quota = (batch - pos_quota).min(neg.len());
    let mut out = draw(&pos, pos_quota, rng);
    out.extend(draw(&neg, neg_quota, rng));
    Ok(out)
}

fn draw<R: Rng + ?Sized>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

/// Grid of anchor pairs with identical boxes in both modalities, centered on
/// every `stride`-th pixel, one per (scale, aspect) combination. Aspect is
/// width / height; the anchor area is `scale²`.
pub fn grid_anchors(
    image_width: f64,
    image_height: f64,
    stride: f64,
    scales: &[f64],
    aspects: &[f64],
) -> Vec<PairedBox> {
    let mut out = Vec::new();
    if stride.is_nan() || stride <= 0.0 {
        return out;
    }
    let nx = (image_width / stride).floor() as usize;
    let ny = (image_height / stride).floor() as usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let cx = (ix as f64 + 0.5) * stride;
            let cy = (iy as f64 + 0.5) * stride;
            for &s in scales {
                for &a in aspects {
                    let h = s / a.sqrt();
                    let w = s * a.sqrt();
                    if let Ok(bx) = BBox::new(cx - 0.5 * w, cy - 0.5 * h, w, h) {
                        out.push(PairedBox::aligned(bx));
                    }
                }
            }
        }
    }
    out
}
