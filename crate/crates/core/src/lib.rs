//! Paired visible/thermal bounding-box toolkit.
//!
//! Each object is a [`PairedBox`]: one box per modality, possibly at
//! different positions when the two cameras are misaligned. On top of that
//! the crate provides
//!
//! - [`geometry`]: areas, IoU per modality and the multi-modal IoU,
//! - [`regression`]: box offsets and the modal-wise RPN / detector losses,
//! - [`sampling`]: IoU^M-driven anchor and RoI labeling plus mini-batches,
//! - [`pairnms`]: NMS on the thermal boxes that keeps pairs intact,
//! - [`evaluation`]: the log-average miss-rate protocol (MR^V, MR^T, MR^M),
//! - [`simulation`]: thermal shift injection, synthetic scenes, mock detectors,
//! - [`io`], [`report`], [`config`]: files, renderings and run settings.
//!
//! Batch work (per-frame matching, mock detection, candidate labeling, batch
//! losses) runs on rayon when the default `parallel` feature is on, and
//! sequentially otherwise. Outputs are identical either way.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod pairnms;
pub mod par;
pub mod regression;
pub mod report;
pub mod sampling;
pub mod simulation;

pub use error::Error;
pub use evaluation::{evaluate, EvalConfig, EvalReport, FrameAnnotations, FrameDetections, GtObject, Occlusion};
pub use geometry::{intersection_area, iou, iou_multimodal, BBox, IouVariant, Modality, PairedBox};
pub use pairnms::{paired_nms, Detection};
