//! Box offset encoding and the modal-wise training losses.
//!
//! Offsets use the center/log-size parameterization of the Faster R-CNN
//! family. Both losses add a thermal regression term next to the visible one;
//! gradients are derived by hand and checked against finite differences in
//! the tests.

use serde::{Deserialize, Serialize};

use crate::error::RegressionError;
use crate::geometry::BBox;
use crate::par;

/// Class index of "not object" in two-class RPN scoring and of background in
/// detector scoring.
pub const BACKGROUND: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoxOffsets {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl BoxOffsets {
    pub const ZERO: BoxOffsets = BoxOffsets { tx: 0.0, ty: 0.0, tw: 0.0, th: 0.0 };

    pub fn new(tx: f64, ty: f64, tw: f64, th: f64) -> Result<Self, RegressionError> {
        let o = Self { tx, ty, tw, th };
        if o.as_array().iter().all(|v| v.is_finite()) {
            Ok(o)
        } else {
            Err(RegressionError::NonFiniteOffsets)
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }

    fn from_array([tx, ty, tw, th]: [f64; 4]) -> Self {
        Self { tx, ty, tw, th }
    }
}

impl TryFrom<[f64; 4]> for BoxOffsets {
    type Error = RegressionError;

    fn try_from([tx, ty, tw, th]: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(tx, ty, tw, th)
    }
}

impl From<BoxOffsets> for [f64; 4] {
    fn from(o: BoxOffsets) -> Self {
        o.as_array()
    }
}

pub fn encode_box(anchor: &BBox, target: &BBox) -> Result<BoxOffsets, RegressionError> {
    if anchor.w() <= 0.0 || anchor.h() <= 0.0 {
        return Err(RegressionError::DegenerateBox { role: "anchor" });
    }
    if target.w() <= 0.0 || target.h() <= 0.0 {
        return Err(RegressionError::DegenerateBox { role: "target" });
    }
    let (acx, acy) = anchor.center();
    let (tcx, tcy) = target.center();
    BoxOffsets::new(
        (tcx - acx) / anchor.w(),
        (tcy - acy) / anchor.h(),
        (target.w() / anchor.w()).ln(),
        (target.h() / anchor.h()).ln(),
    )
}

/// Inverse of [`encode_box`].
pub fn decode_box(anchor: &BBox, offsets: &BoxOffsets) -> Result<BBox, RegressionError> {
    if anchor.w() <= 0.0 || anchor.h() <= 0.0 {
        return Err(RegressionError::DegenerateBox { role: "anchor" });
    }
    if !offsets.as_array().iter().all(|v| v.is_finite()) {
        return Err(RegressionError::NonFiniteOffsets);
    }
    let (acx, acy) = anchor.center();
    let cx = acx + offsets.tx * anchor.w();
    let cy = acy + offsets.ty * anchor.h();
    let w = anchor.w() * offsets.tw.exp();
    let h = anchor.h() * offsets.th.exp();
    Ok(BBox::new(cx - 0.5 * w, cy - 0.5 * h, w, h)?)
}

/// Smooth L1 summed over the four offsets, with its gradient w.r.t. `pred`.
pub fn smooth_l1(pred: &BoxOffsets, target: &BoxOffsets) -> (f64, BoxOffsets) {
    let p = pred.as_array();
    let t = target.as_array();
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for d in 0..4 {
        let x = p[d] - t[d];
        if x.abs() < 1.0 {
            loss += 0.5 * x * x;
            grad[d] = x;
        } else {
            loss += x.abs() - 0.5;
            grad[d] = x.signum();
        }
    }
    (loss, BoxOffsets::from_array(grad))
}

/// Softmax cross entropy of `logits` against class `label`, with its gradient
/// w.r.t. the logits (`softmax − one_hot`).
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), RegressionError> {
    if logits.is_empty() {
        return Err(RegressionError::EmptyLogits);
    }
    if label >= logits.len() {
        return Err(RegressionError::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss.max(0.0), grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorLabel {
    Positive,
    Negative,
}

/// One anchor pair in an RPN mini-batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpnSample {
    /// Objectness logit; scored as the two-class softmax `[0, objectness]`,
    /// which equals a sigmoid on this logit.
    pub objectness: f64,
    pub label: AnchorLabel,
    pub pred_v: BoxOffsets,
    pub pred_t: BoxOffsets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_v: Option<BoxOffsets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_t: Option<BoxOffsets>,
}

impl RpnSample {
    pub fn positive(objectness: f64, pred: [BoxOffsets; 2], target: [BoxOffsets; 2]) -> Self {
        Self {
            objectness,
            label: AnchorLabel::Positive,
            pred_v: pred[0],
            pred_t: pred[1],
            target_v: Some(target[0]),
            target_t: Some(target[1]),
        }
    }

    pub fn negative(objectness: f64, pred: [BoxOffsets; 2]) -> Self {
        Self {
            objectness,
            label: AnchorLabel::Negative,
            pred_v: pred[0],
            pred_t: pred[1],
            target_v: None,
            target_t: None,
        }
    }
}

/// One RoI pair seen by the detection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSample {
    /// Logits over all classes, background at index [`BACKGROUND`].
    pub class_scores: Vec<f64>,
    pub true_class: usize,
    pub pred_v: BoxOffsets,
    pub pred_t: BoxOffsets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_v: Option<BoxOffsets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_t: Option<BoxOffsets>,
}

impl DetectorSample {
    pub fn is_foreground(&self) -> bool {
        self.true_class != BACKGROUND
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    /// Classification normalizer (mini-batch size).
    pub n_cls: usize,
    /// Regression normalizer (number of anchor locations).
    pub n_reg: usize,
}

impl LossConfig {
    pub fn new(lambda: f64, n_cls: usize, n_reg: usize) -> Result<Self, RegressionError> {
        let cfg = Self { lambda, n_cls, n_reg };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(RegressionError::InvalidConfig(format!("lambda = {} must be ≥ 0", self.lambda)));
        }
        if self.n_cls == 0 || self.n_reg == 0 {
            return Err(RegressionError::InvalidConfig("n_cls and n_reg must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// The three summed terms of a loss before weighting and normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms {
    pub classification: f64,
    pub regression_visible: f64,
    pub regression_thermal: f64,
}

/// Per-term sums and the weighted total of an RPN or detector loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    /// Normalized classification term.
    pub classification: f64,
    /// Normalized, λ-weighted visible regression term.
    pub regression_visible: f64,
    /// Normalized, λ-weighted thermal regression term.
    pub regression_thermal: f64,
    pub total: f64,
}

fn sample_terms(
    index: usize,
    logits: &[f64],
    label: usize,
    foreground: bool,
    pred: (&BoxOffsets, &BoxOffsets),
    target: (Option<&BoxOffsets>, Option<&BoxOffsets>),
) -> Result<LossTerms, RegressionError> {
    let (classification, _) = cross_entropy(logits, label)?;
    if !foreground {
        return Ok(LossTerms { classification, ..LossTerms::default() });
    }
    let (Some(tv), Some(tt)) = target else {
        return Err(RegressionError::MissingTargets { index });
    };
    Ok(LossTerms {
        classification,
        regression_visible: smooth_l1(pred.0, tv).0,
        regression_thermal: smooth_l1(pred.1, tt).0,
    })
}

/// Sums per-sample terms in input order so the result is bit-stable under
/// any thread count.
fn ordered_sum(terms: Vec<Result<LossTerms, RegressionError>>) -> Result<LossTerms, RegressionError> {
    let mut acc = LossTerms::default();
    for t in terms {
        let t = t?;
        acc.classification += t.classification;
        acc.regression_visible += t.regression_visible;
        acc.regression_thermal += t.regression_thermal;
    }
    Ok(acc)
}

/// Raw per-term sums of the RPN loss over `samples`.
pub fn rpn_loss_terms(samples: &[RpnSample]) -> Result<LossTerms, RegressionError> {
    ordered_sum(par::map_indexed(samples, |i, s| {
        let positive = s.label == AnchorLabel::Positive;
        sample_terms(
            i,
            &[0.0, s.objectness],
            positive as usize,
            positive,
            (&s.pred_v, &s.pred_t),
            (s.target_v.as_ref(), s.target_t.as_ref()),
        )
    }))
}

pub fn rpn_loss_breakdown(samples: &[RpnSample], cfg: &LossConfig) -> Result<LossBreakdown, RegressionError> {
    cfg.validate()?;
    if samples.len() != cfg.n_cls {
        return Err(RegressionError::BatchSizeMismatch { expected: cfg.n_cls, actual: samples.len() });
    }
    let terms = rpn_loss_terms(samples)?;
    let classification = terms.classification / cfg.n_cls as f64;
    let reg_scale = cfg.lambda / cfg.n_reg as f64;
    let regression_visible = reg_scale * terms.regression_visible;
    let regression_thermal = reg_scale * terms.regression_thermal;
    Ok(LossBreakdown {
        classification,
        regression_visible,
        regression_thermal,
        total: classification + reg_scale * (terms.regression_visible + terms.regression_thermal),
    })
}

/// Multi-modal RPN loss: normalized classification plus λ-weighted visible
/// and thermal smooth-L1 terms, the latter counted for positive anchors only.
///
/// `cfg.n_cls` must equal the number of samples.
pub fn rpn_loss(samples: &[RpnSample], cfg: &LossConfig) -> Result<f64, RegressionError> {
    Ok(rpn_loss_breakdown(samples, cfg)?.total)
}

pub fn detector_loss_breakdown(sample: &DetectorSample, lambda: f64) -> Result<LossBreakdown, RegressionError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(RegressionError::InvalidConfig(format!("lambda = {lambda} must be ≥ 0")));
    }
    let terms = sample_terms(
        0,
        &sample.class_scores,
        sample.true_class,
        sample.is_foreground(),
        (&sample.pred_v, &sample.pred_t),
        (sample.target_v.as_ref(), sample.target_t.as_ref()),
    )?;
    Ok(LossBreakdown {
        classification: terms.classification,
        regression_visible: lambda * terms.regression_visible,
        regression_thermal: lambda * terms.regression_thermal,
        total: terms.classification + lambda * (terms.regression_visible + terms.regression_thermal),
    })
}

/// Multi-modal detector loss for one RoI pair; regression counts only for
/// foreground classes.
pub fn detector_loss(sample: &DetectorSample, lambda: f64) -> Result<f64, RegressionError> {
    Ok(detector_loss_breakdown(sample, lambda)?.total)
}
