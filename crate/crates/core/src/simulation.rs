//! Misalignment injection, synthetic paired scenes and mock detectors.
//!
//! The mock detectors stand in for trained networks: a `paired` detector
//! localizes each modality on its own, a `single_box` detector localizes the
//! visible box and reuses it for thermal. Under a growing thermal shift the
//! latter loses its thermal overlap while the former does not.
//!
//! Randomness: each call takes one root seed; frame `i` draws from the ChaCha
//! stream `i` of that seed, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, SimulationError};
use crate::evaluation::{evaluate, EvalConfig, FrameAnnotations, FrameDetections, GtObject, Occlusion};
use crate::geometry::{BBox, IouVariant, PairedBox};
use crate::pairnms::Detection;
use crate::par;

/// RNG for frame `frame` under root `seed`: ChaCha8 stream `frame`.
pub fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    rng
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    /// Horizontal thermal shift in pixels; positive moves right.
    pub dx: f64,
    pub image_width: f64,
}

impl ShiftSpec {
    pub fn new(dx: f64, image_width: f64) -> Result<Self, SimulationError> {
        let s = Self { dx, image_width };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(self.image_width.is_finite() && self.image_width > 0.0) {
            return Err(SimulationError::InvalidShift(format!("image width {} must be positive", self.image_width)));
        }
        if !(self.dx.is_finite() && self.dx.abs() < self.image_width) {
            return Err(SimulationError::InvalidShift(format!(
                "|dx| = {} must be below the image width {}",
                self.dx.abs(),
                self.image_width
            )));
        }
        Ok(())
    }
}

/// Moves every thermal box by `dx` and clips it to `[0, image_width]`.
/// Visible boxes, occlusion and ignore flags are left untouched.
pub fn apply_shift(frames: &[FrameAnnotations], spec: &ShiftSpec) -> Result<Vec<FrameAnnotations>, SimulationError> {
    spec.validate()?;
    Ok(frames
        .iter()
        .map(|f| FrameAnnotations {
            frame_id: f.frame_id.clone(),
            objects: f
                .objects
                .iter()
                .map(|o| {
                    let moved = o.pair.thermal.translated(spec.dx, 0.0).expect("finite shift of a finite box");
                    GtObject { pair: PairedBox { thermal: moved.clip_horizontal(spec.image_width), ..o.pair }, ..*o }
                })
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub num_frames: usize,
    /// Inclusive range of pedestrians per frame.
    pub pedestrians_min: usize,
    pub pedestrians_max: usize,
    /// Pedestrian height range in pixels, `[min, max)`.
    pub height_min: f64,
    pub height_max: f64,
    /// Fixed box width; when absent width = `aspect_ratio · height`.
    pub fixed_width: Option<f64>,
    pub aspect_ratio: f64,
    /// Thermal-minus-visible horizontal offset, uniform on `[min, max)`.
    pub misalignment_min: f64,
    pub misalignment_max: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub partial_occlusion_prob: f64,
    pub heavy_occlusion_prob: f64,
    /// Reject placements whose boxes intersect an earlier pedestrian's.
    pub avoid_overlap: bool,
    /// Round all coordinates to whole pixels.
    pub integer_pixels: bool,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            num_frames: 100,
            pedestrians_min: 1,
            pedestrians_max: 4,
            height_min: 60.0,
            height_max: 200.0,
            fixed_width: None,
            aspect_ratio: 0.41,
            misalignment_min: 0.0,
            misalignment_max: 0.0,
            image_width: 640.0,
            image_height: 512.0,
            partial_occlusion_prob: 0.0,
            heavy_occlusion_prob: 0.0,
            avoid_overlap: true,
            integer_pixels: true,
            seed: 0,
        }
    }
}

const PLACEMENT_ATTEMPTS: usize = 64;

impl SceneSpec {
    fn max_width(&self) -> f64 {
        self.fixed_width.unwrap_or(self.aspect_ratio * self.height_max)
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidScene(m));
        if !(self.height_min > 0.0 && self.height_max >= self.height_min && self.height_max.is_finite()) {
            return bad(format!(
                "height range [{}, {}] must be positive and ordered",
                self.height_min, self.height_max
            ));
        }
        if self.pedestrians_max < self.pedestrians_min {
            return bad("pedestrians_max below pedestrians_min".into());
        }
        match self.fixed_width {
            Some(w) if !(w > 0.0 && w.is_finite()) => return bad(format!("fixed width {w} must be positive")),
            None if !(self.aspect_ratio > 0.0 && self.aspect_ratio.is_finite()) => {
                return bad(format!("aspect ratio {} must be positive", self.aspect_ratio))
            }
            _ => {}
        }
        if !(self.misalignment_min.is_finite() && self.misalignment_max >= self.misalignment_min) {
            return bad("misalignment range must be finite and ordered".into());
        }
        let p = [self.partial_occlusion_prob, self.heavy_occlusion_prob];
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) || p[0] + p[1] > 1.0 {
            return bad("occlusion probabilities must lie in [0, 1] and sum to at most 1".into());
        }
        let spread = self.misalignment_min.abs().max(self.misalignment_max.abs());
        if self.image_width - self.max_width() - spread < 0.0 || self.image_height - self.height_max < 0.0 {
            return bad("pedestrians do not fit in the image".into());
        }
        Ok(())
    }
}

fn place_pedestrian(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> PairedBox {
    let snap = |v: f64| if spec.integer_pixels { v.round() } else { v };
    let h = snap(uniform(rng, spec.height_min, spec.height_max));
    let w = snap(spec.fixed_width.unwrap_or(spec.aspect_ratio * h)).max(if spec.integer_pixels { 1.0 } else { 0.0 });
    let d = snap(uniform(rng, spec.misalignment_min, spec.misalignment_max));
    let x_lo = (-d).max(0.0);
    let x_hi = spec.image_width - w - d.max(0.0);
    let x = snap(uniform(rng, x_lo, x_hi)).clamp(x_lo, x_hi.max(x_lo));
    let y = snap(uniform(rng, 0.0, spec.image_height - h)).max(0.0);
    let visible = BBox::new(x, y, w, h).expect("validated scene produces valid boxes");
    let thermal = BBox::new(x + d, y, w, h).expect("validated scene produces valid boxes");
    PairedBox::new(visible, thermal)
}

fn overlaps_any(p: &PairedBox, placed: &[GtObject]) -> bool {
    use crate::geometry::intersection_area;
    placed.iter().any(|o| {
        intersection_area(&o.pair.visible, &p.visible) > 0.0 || intersection_area(&o.pair.thermal, &p.thermal) > 0.0
    })
}

/// Seeded synthetic annotations; frame ids are `f000000`, `f000001`, …
pub fn generate_scene(spec: &SceneSpec) -> Result<Vec<FrameAnnotations>, SimulationError> {
    spec.validate()?;
    Ok(par::map_range(spec.num_frames, |i| {
        let mut rng = frame_rng(spec.seed, i);
        let n = rng.random_range(spec.pedestrians_min..=spec.pedestrians_max);
        let mut objects: Vec<GtObject> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pair = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let p = place_pedestrian(spec, &mut rng);
                if !spec.avoid_overlap || !overlaps_any(&p, &objects) {
                    pair = Some(p);
                    break;
                }
            }
            let u: f64 = rng.random();
            let occlusion = if u < spec.heavy_occlusion_prob {
                Occlusion::Heavy
            } else if u < spec.heavy_occlusion_prob + spec.partial_occlusion_prob {
                Occlusion::Partial
            } else {
                Occlusion::None
            };
            if let Some(pair) = pair {
                objects.push(GtObject { pair, occlusion, ignore: false });
            }
        }
        FrameAnnotations { frame_id: format!("f{i:06}"), objects }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    /// One independently localized box per modality.
    Paired,
    /// One box localized on the visible GT, reused for thermal.
    SingleBox,
}

impl std::str::FromStr for DetectorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paired" => Ok(DetectorMode::Paired),
            "single_box" | "single" => Ok(DetectorMode::SingleBox),
            other => Err(format!("unknown detector mode `{other}` (expected paired or single_box)")),
        }
    }
}

impl std::fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorMode::Paired => "paired",
            DetectorMode::SingleBox => "single_box",
        })
    }
}

/// Confidence of a true detection:
/// `clamp(1 − perturbation / diagonal + noise, min_score, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreModel {
    pub noise_sigma: f64,
    pub min_score: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self { noise_sigma: 0.02, min_score: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockDetectorSpec {
    pub mode: DetectorMode,
    /// Std-dev of the box-center displacement, pixels.
    pub center_noise_sigma: f64,
    /// Std-dev of the log-scale size perturbation.
    pub size_noise_sigma: f64,
    pub miss_prob: f64,
    /// Mean of the Poisson false-positive count per frame.
    pub fp_per_frame: f64,
    pub score: ScoreModel,
    pub image_width: f64,
    pub image_height: f64,
    pub seed: u64,
}

impl Default for MockDetectorSpec {
    fn default() -> Self {
        Self {
            mode: DetectorMode::Paired,
            center_noise_sigma: 0.0,
            size_noise_sigma: 0.0,
            miss_prob: 0.0,
            fp_per_frame: 0.0,
            score: ScoreModel::default(),
            image_width: 640.0,
            image_height: 512.0,
            seed: 0,
        }
    }
}

impl MockDetectorSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidDetector(m));
        for (name, v) in [
            ("center_noise_sigma", self.center_noise_sigma),
            ("size_noise_sigma", self.size_noise_sigma),
            ("fp_per_frame", self.fp_per_frame),
            ("score.noise_sigma", self.score.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be ≥ 0"));
            }
        }
        for (name, v) in [("miss_prob", self.miss_prob), ("score.min_score", self.score.min_score)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return bad("image dimensions must be positive".into());
        }
        Ok(())
    }
}

/// Perturbed copy of `b` and the size of the perturbation in pixels.
fn perturb(b: &BBox, spec: &MockDetectorSpec, rng: &mut ChaCha8Rng) -> (BBox, f64) {
    let mut z = || -> f64 { StandardNormal.sample(rng) };
    let dcx = spec.center_noise_sigma * z();
    let dcy = spec.center_noise_sigma * z();
    let w = b.w() * (spec.size_noise_sigma * z()).exp();
    let h = b.h() * (spec.size_noise_sigma * z()).exp();
    let (dw, dh) = (w - b.w(), h - b.h());
    // written as offsets from the original corner so zero noise is bit-exact
    let out = BBox::new(b.x() + dcx - 0.5 * dw, b.y() + dcy - 0.5 * dh, w, h).expect("finite perturbation");
    (out, (dcx * dcx + dcy * dcy + dw * dw + dh * dh).sqrt())
}

fn score_for(magnitude: f64, reference: &BBox, spec: &MockDetectorSpec, rng: &mut ChaCha8Rng) -> f64 {
    let diag = (reference.w().powi(2) + reference.h().powi(2)).sqrt();
    let base = if diag > 0.0 { 1.0 - magnitude / diag } else { 1.0 };
    let noise: f64 = StandardNormal.sample(rng);
    (base + spec.score.noise_sigma * noise).clamp(spec.score.min_score, 1.0)
}

fn detect_frame(frame: &FrameAnnotations, spec: &MockDetectorSpec, rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let mut out = Vec::new();
    for obj in frame.objects.iter().filter(|o| !o.ignore) {
        if rng.random::<f64>() < spec.miss_prob {
            continue;
        }
        let (pair, magnitude) = match spec.mode {
            DetectorMode::Paired => {
                let (v, mv) = perturb(&obj.pair.visible, spec, rng);
                let (t, mt) = perturb(&obj.pair.thermal, spec, rng);
                (PairedBox::new(v, t), mv.max(mt))
            }
            DetectorMode::SingleBox => {
                let (v, mv) = perturb(&obj.pair.visible, spec, rng);
                (PairedBox::aligned(v), mv)
            }
        };
        let score = score_for(magnitude, &obj.pair.visible, spec, rng);
        out.push(Detection::pedestrian(pair, score).expect("score clamped into [0, 1]"));
    }
    if spec.fp_per_frame > 0.0 {
        let count = Poisson::new(spec.fp_per_frame).expect("positive rate").sample(rng) as usize;
        for _ in 0..count {
            let h = uniform(rng, 40.0, 160.0).min(spec.image_height);
            let w = (0.41 * h).min(spec.image_width);
            let x = uniform(rng, 0.0, spec.image_width - w);
            let y = uniform(rng, 0.0, spec.image_height - h);
            let b = BBox::new(x, y, w, h).expect("false positive inside the image");
            let score = uniform(rng, spec.score.min_score, 0.5);
            out.push(Detection::pedestrian(PairedBox::aligned(b), score).expect("score in range"));
        }
    }
    out
}

/// Simulated detections for every frame, in frame order.
pub fn mock_detect(
    frames: &[FrameAnnotations],
    spec: &MockDetectorSpec,
) -> Result<Vec<FrameDetections>, SimulationError> {
    spec.validate()?;
    Ok(par::map_indexed(frames, |i, f| FrameDetections {
        frame_id: f.frame_id.clone(),
        detections: detect_frame(f, spec, &mut frame_rng(spec.seed, i)),
    }))
}

/// Log-average MR^M at each configured threshold for one detector at one shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    /// Detector name, e.g. `paired` or `single_box`.
    pub label: String,
    /// `(iou_thresh, MR^M)` in configuration order.
    pub mr: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dx: f64,
    pub cells: Vec<SweepCell>,
}

/// Shifts the thermal annotations by each `dx`, runs every mock detector on
/// the shifted scene and evaluates MR^M.
pub fn shift_sweep(
    frames: &[FrameAnnotations],
    image_width: f64,
    shifts: &[f64],
    detectors: &[MockDetectorSpec],
    eval: &EvalConfig,
) -> Result<Vec<SweepRow>, crate::error::Error> {
    let cfg = EvalConfig { variants: vec![IouVariant::MultiModal], ..eval.clone() };
    let mut rows = Vec::with_capacity(shifts.len());
    for &dx in shifts {
        let shifted = apply_shift(frames, &ShiftSpec::new(dx, image_width)?)?;
        let mut cells = Vec::with_capacity(detectors.len());
        for det in detectors {
            let dets = mock_detect(&shifted, det)?;
            let report = evaluate(&shifted, &dets, &cfg)?;
            let mr = cfg
                .iou_thresholds
                .iter()
                .map(|&t| report.mr(IouVariant::MultiModal, t).map(|m| (t, m)).ok_or(EvalError::EmptyCurve))
                .collect::<Result<_, _>>()?;
            cells.push(SweepCell { label: det.mode.to_string(), mr });
        }
        rows.push(SweepRow { dx, cells });
    }
    Ok(rows)
}
