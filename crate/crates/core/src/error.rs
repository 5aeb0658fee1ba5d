use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box field `{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("box field `{field}` is negative ({value})")]
    NegativeExtent { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("detection score {0} outside [0, 1]")]
    InvalidScore(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("cannot encode against a zero-extent {role} box")]
    DegenerateBox { role: &'static str },
    #[error("box offsets must be finite")]
    NonFiniteOffsets,
    #[error("decoded box is invalid: {0}")]
    Decode(#[from] GeometryError),
    #[error("cross entropy needs at least one logit")]
    EmptyLogits,
    #[error("class label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("sample {index} is labeled foreground but carries no regression targets")]
    MissingTargets { index: usize },
    #[error("invalid loss configuration: {0}")]
    InvalidConfig(String),
    #[error("loss configuration expects {expected} samples, got {actual}")]
    BatchSizeMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("invalid assignment configuration: {0}")]
    InvalidConfig(String),
    #[error("no positive or negative candidates to sample from")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no evaluable ground truth objects; miss rate is undefined")]
    NoEvaluableGroundTruth,
    #[error("miss-rate curve is empty")]
    EmptyCurve,
    #[error("detections reference unknown frame ids: {}", .0.join(", "))]
    UnknownFrames(Vec<String>),
    #[error("duplicate frame id `{0}` in annotations")]
    DuplicateFrame(String),
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid shift: {0}")]
    InvalidShift(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid mock detector: {0}")]
    InvalidDetector(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {reason}", .path.display())]
    Parse { path: PathBuf, line: usize, reason: String },
}

/// Umbrella error for callers composing several modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Io(#[from] IoError),
}
