//! Non-maximum suppression over detection pairs, driven by the thermal boxes.
//!
//! A pair survives or dies as a unit: suppression is decided on thermal IoU
//! alone and the visible partner follows its thermal box.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::DetectionError;
use crate::geometry::{iou, PairedBox};

/// A scored paired box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub pair: PairedBox,
    score: f64,
    pub class_id: u32,
}

impl Detection {
    pub fn new(pair: PairedBox, score: f64, class_id: u32) -> Result<Self, DetectionError> {
        if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
            return Err(DetectionError::InvalidScore(score));
        }
        Ok(Self { pair, score, class_id })
    }

    /// Single-class convenience constructor.
    pub fn pedestrian(pair: PairedBox, score: f64) -> Result<Self, DetectionError> {
        Self::new(pair, score, 0)
    }

    #[inline]
    pub fn score(&self) -> f64 {
        self.score
    }
}

#[derive(Deserialize)]
struct RawDetection {
    pair: PairedBox,
    score: f64,
    class_id: u32,
}

impl<'de> Deserialize<'de> for Detection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawDetection::deserialize(d)?;
        Detection::new(raw.pair, raw.score, raw.class_id).map_err(serde::de::Error::custom)
    }
}

/// Indices of `dets` ordered by descending score, earlier input first on ties.
pub fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Greedy NMS on the thermal boxes, per class.
///
/// Detections are visited in [`score_order`]; a detection is dropped when its
/// thermal IoU with an already kept detection of the same class is strictly
/// greater than `iou_thresh`. The survivors keep their pairing and score and
/// come back in score order, truncated to `max_keep`.
///
/// # Panics
///
/// If `iou_thresh` is outside `[0, 1]`.
pub fn paired_nms(dets: &[Detection], iou_thresh: f64, max_keep: Option<usize>) -> Vec<Detection> {
    assert!((0.0..=1.0).contains(&iou_thresh), "NMS threshold {iou_thresh} outside [0, 1]");
    let mut kept: Vec<Detection> = Vec::new();
    let limit = max_keep.unwrap_or(usize::MAX);
    for i in score_order(dets) {
        if kept.len() >= limit {
            break;
        }
        let cand = &dets[i];
        let suppressed =
            kept.iter().any(|k| k.class_id == cand.class_id && iou(&k.pair.thermal, &cand.pair.thermal) > iou_thresh);
        if !suppressed {
            kept.push(*cand);
        }
    }
    kept
}
