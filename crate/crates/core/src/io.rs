//! JSON Lines files for annotations, detections and candidate boxes.
//!
//! Annotation files hold one frame per line, optionally preceded by a
//! metadata line:
//!
//! ```text
//! {"meta":{"name":"demo","image_width":640.0,"image_height":512.0}}
//! {"frame":"f0","objects":[{"v":[x,y,w,h],"t":[x,y,w,h],"occ":"none","ignore":false}]}
//! ```
//!
//! Detection lines carry `{"frame":id,"dets":[{"v":[..],"t":[..],"score":s}]}`;
//! a single-modality detector may write `"box":[..]` instead of `v`/`t`, in
//! which case the box is used for both modalities. Writers always emit the
//! canonical form, so reading and re-writing a canonical file is byte-exact.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::IoError;
use crate::evaluation::{
    substitute_single_modality, FrameAnnotations, FrameDetections, GtObject, Occlusion, SingleBoxDetection,
};
use crate::geometry::{BBox, PairedBox};
use crate::pairnms::Detection;
use crate::regression::{DetectorSample, RpnSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub name: String,
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self { name: "dataset".into(), image_width: 640.0, image_height: 512.0 }
    }
}

#[derive(Serialize)]
struct MetaOut<'a> {
    meta: &'a DatasetMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub frames: Vec<FrameAnnotations>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FrameId {
    Text(String),
    Number(u64),
}

impl From<FrameId> for String {
    fn from(id: FrameId) -> Self {
        match id {
            FrameId::Text(s) => s,
            FrameId::Number(n) => n.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    v: BBox,
    t: BBox,
    #[serde(default)]
    occ: Occlusion,
    #[serde(default)]
    ignore: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationIn {
    frame: FrameId,
    objects: Vec<ObjectRecord>,
}

#[derive(Serialize)]
struct AnnotationOut<'a> {
    frame: &'a str,
    objects: Vec<ObjectRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<BBox>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    single: Option<BBox>,
    score: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    class: u32,
}

fn is_zero(c: &u32) -> bool {
    *c == 0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionsIn {
    frame: FrameId,
    dets: Vec<DetRecord>,
}

#[derive(Serialize)]
struct DetectionsOut<'a> {
    frame: &'a str,
    dets: Vec<DetRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    v: BBox,
    t: BBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidatesIn {
    frame: FrameId,
    pairs: Vec<PairRecord>,
}

/// Candidate boxes (anchors or RoIs) for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCandidates {
    pub frame_id: String,
    pub pairs: Vec<PairedBox>,
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

struct LineParser<'a> {
    path: &'a Path,
    seen: HashSet<String>,
}

impl<'a> LineParser<'a> {
    fn new(path: &'a Path) -> Self {
        Self { path, seen: HashSet::new() }
    }

    fn err(&self, line: usize, reason: impl Into<String>) -> IoError {
        IoError::Parse { path: self.path.to_path_buf(), line, reason: reason.into() }
    }

    fn parse<T: serde::de::DeserializeOwned>(&self, line: usize, value: Value) -> Result<T, IoError> {
        serde_json::from_value(value).map_err(|e| self.err(line, e.to_string()))
    }

    fn json(&self, line: usize, text: &str) -> Result<Value, IoError> {
        serde_json::from_str(text).map_err(|e| self.err(line, e.to_string()))
    }

    fn claim(&mut self, line: usize, id: String) -> Result<String, IoError> {
        if !self.seen.insert(id.clone()) {
            return Err(self.err(line, format!("duplicate frame id `{id}`")));
        }
        Ok(id)
    }
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset, IoError> {
    let mut p = LineParser::new(path);
    let mut meta = None;
    let mut frames = Vec::new();
    for (n, line) in lines(text) {
        let value = p.json(n, line)?;
        if let Some(m) = value.get("meta") {
            if meta.is_some() || !frames.is_empty() {
                return Err(p.err(n, "metadata must be the first record"));
            }
            let m: DatasetMeta = p.parse(n, m.clone())?;
            if !(m.image_width > 0.0 && m.image_height > 0.0 && m.image_width.is_finite() && m.image_height.is_finite())
            {
                return Err(p.err(n, "image dimensions must be positive"));
            }
            meta = Some(m);
            continue;
        }
        let rec: AnnotationIn = p.parse(n, value)?;
        let frame_id = p.claim(n, rec.frame.into())?;
        let objects = rec
            .objects
            .into_iter()
            .map(|o| GtObject { pair: PairedBox::new(o.v, o.t), occlusion: o.occ, ignore: o.ignore })
            .collect();
        frames.push(FrameAnnotations { frame_id, objects });
    }
    Ok(Dataset { meta: meta.unwrap_or_default(), frames })
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, IoError> {
    let path = path.as_ref();
    parse_dataset(&read_text(path)?, path)
}

pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = serde_json::to_string(&MetaOut { meta: &ds.meta }).expect("serializable");
    out.push('\n');
    for f in &ds.frames {
        let rec = AnnotationOut {
            frame: &f.frame_id,
            objects: f
                .objects
                .iter()
                .map(|o| ObjectRecord { v: o.pair.visible, t: o.pair.thermal, occ: o.occlusion, ignore: o.ignore })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &dataset_to_string(ds))
}

fn det_from_record(rec: DetRecord) -> Result<Detection, String> {
    let pair = match (rec.v, rec.t, rec.single) {
        (Some(v), Some(t), None) => PairedBox::new(v, t),
        (None, None, Some(b)) => {
            let single = SingleBoxDetection { bbox: b, score: rec.score, class_id: rec.class };
            return substitute_single_modality("", &[single]).map(|fd| fd.detections[0]).map_err(|e| e.to_string());
        }
        _ => return Err("a detection needs either both `v` and `t` or a single `box`".into()),
    };
    Detection::new(pair, rec.score, rec.class).map_err(|e| e.to_string())
}

pub fn parse_detections(text: &str, path: &Path) -> Result<Vec<FrameDetections>, IoError> {
    let mut p = LineParser::new(path);
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let rec: DetectionsIn = p.parse(n, p.json(n, line)?)?;
        let frame_id = p.claim(n, rec.frame.into())?;
        let detections =
            rec.dets.into_iter().map(det_from_record).collect::<Result<_, _>>().map_err(|reason| p.err(n, reason))?;
        out.push(FrameDetections { frame_id, detections });
    }
    Ok(out)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<FrameDetections>, IoError> {
    let path = path.as_ref();
    parse_detections(&read_text(path)?, path)
}

pub fn detections_to_string(frames: &[FrameDetections]) -> String {
    let mut out = String::new();
    for f in frames {
        let rec = DetectionsOut {
            frame: &f.frame_id,
            dets: f
                .detections
                .iter()
                .map(|d| DetRecord {
                    v: Some(d.pair.visible),
                    t: Some(d.pair.thermal),
                    single: None,
                    score: d.score(),
                    class: d.class_id,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_detections(frames: &[FrameDetections], path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &detections_to_string(frames))
}

pub fn read_candidates(path: impl AsRef<Path>) -> Result<Vec<FrameCandidates>, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut p = LineParser::new(path);
    let mut out = Vec::new();
    for (n, line) in lines(&text) {
        let rec: CandidatesIn = p.parse(n, p.json(n, line)?)?;
        let frame_id = p.claim(n, rec.frame.into())?;
        out.push(FrameCandidates {
            frame_id,
            pairs: rec.pairs.into_iter().map(|r| PairedBox::new(r.v, r.t)).collect(),
        });
    }
    Ok(out)
}

/// Inputs for a loss evaluation: RPN mini-batch and detector RoI samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSampleFile {
    #[serde(default = "one")]
    pub lambda: f64,
    /// Regression normalizer; defaults to the RPN batch size.
    #[serde(default)]
    pub n_reg: Option<usize>,
    #[serde(default)]
    pub rpn: Vec<RpnSample>,
    #[serde(default)]
    pub detector: Vec<DetectorSample>,
}

fn one() -> f64 {
    1.0
}

pub fn read_loss_samples(path: impl AsRef<Path>) -> Result<LossSampleFile, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        reason: e.to_string(),
    })
}
