//! Multi-object tracking by detection with pooled appearance buffers.
//!
//! The crate covers the whole offline loop: a DeepSort-style tracker whose
//! appearance cost uses the average of each track's last few embeddings,
//! CLEAR-MOT / IDF1 / HOTA evaluation, a genetic optimizer over the tracker's
//! hyperparameters, a synthetic sequence generator and the on-disk formats
//! that tie them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod association;
pub mod error;
pub mod ga;
pub mod io;
pub mod kalman;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod track;
pub mod tracker;

pub use error::{Error, Result};
pub use metrics::{EvalReport, LabeledBox};
pub use model::{load_preset, BoundingBox, Detection, TrackState, TrackerConfig};
pub use tracker::{run_sequence, FrameResult, TrackRecord, Tracker};
