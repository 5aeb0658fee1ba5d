use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::evaluation::EvalConfig;
use crate::geometry::{IouVariant, Modality};
use crate::sampling::AssignmentConfig;
use crate::simulation::{MockDetectorSpec, SceneSpec};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub table: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Everything an experiment run needs; loadable from TOML with every key
/// optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iou_thresholds: Vec<f64>,
    pub variants: Vec<IouVariant>,
    /// Thermal shifts in pixels for the sweep.
    pub shifts: Vec<f64>,
    pub min_height: f64,
    pub height_modality: Modality,
    pub mr_floor: f64,
    pub assignment: AssignmentConfig,
    pub nms_proposal_thresh: f64,
    pub nms_detection_thresh: f64,
    pub scene: SceneSpec,
    pub detector: MockDetectorSpec,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.5, 0.7],
            variants: IouVariant::ALL.to_vec(),
            shifts: (-4..=4).map(|k| 5.0 * k as f64).collect(),
            min_height: 55.0,
            height_modality: Modality::Thermal,
            mr_floor: 0.0,
            assignment: AssignmentConfig::default(),
            nms_proposal_thresh: 0.7,
            nms_detection_thresh: 0.5,
            scene: SceneSpec::default(),
            detector: MockDetectorSpec::default(),
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            iou_thresholds: self.iou_thresholds.clone(),
            variants: self.variants.clone(),
            min_height: self.min_height,
            height_modality: self.height_modality,
            mr_floor: self.mr_floor,
        }
    }

    /// Checks thresholds and that every sweep shift fits in `image_width`.
    pub fn validate(&self, image_width: f64) -> Result<(), String> {
        if let Some(t) = self.iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(format!("IoU threshold {t} outside (0, 1]"));
        }
        if let Some(dx) = self.shifts.iter().find(|dx| !(dx.is_finite() && dx.abs() < image_width)) {
            return Err(format!("shift {dx} does not fit in image width {image_width}"));
        }
        for (name, t) in
            [("nms_proposal_thresh", self.nms_proposal_thresh), ("nms_detection_thresh", self.nms_detection_thresh)]
        {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("{name} = {t} outside [0, 1]"));
            }
        }
        self.assignment.validate().map_err(|e| e.to_string())?;
        self.eval_config().validate().map_err(|e| e.to_string())
    }
}
