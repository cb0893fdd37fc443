//! Streaming, mergeable evaluation of COCO detection metrics.
//!
//! Recall is computed exactly from per-cell true-positive and ground-truth
//! counts. Mean average precision is approximated from fixed-size confidence
//! histograms (`buckets` bins per cell) that can be updated one mini-batch at a
//! time and summed across shards. The [`oracle`] module keeps the full list of
//! scored detections and computes the exact value, which is what the streaming
//! path is checked against.
//!
//! All geometry and metric arithmetic is generic over [`Scalar`] (`f32` or
//! `f64`); counters are always exact `u64`s. The `*F64` / `*F32` aliases below
//! fix the scalar type for the common cases.
//!
//! ```
//! use cocostream::{BoundingBox, Detection, EvalConfigF64, GroundTruth, BucketedStateF64};
//!
//! let gt = vec![GroundTruth::new(BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0)];
//! let dt = vec![Detection::new(BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 0, 0.9).unwrap()];
//!
//! let mut state = BucketedStateF64::new(EvalConfigF64::coco(1)).unwrap();
//! state.update([(dt.as_slice(), gt.as_slice())]).unwrap();
//! let report = state.finalize();
//! assert_eq!(report.map_standard, 1.0);
//! ```

pub mod config;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod matching;
pub mod oracle;
pub mod report;
pub mod streaming;

use std::fmt;

use num_traits::{Float, FromPrimitive, NumCast};
use serde::{de::DeserializeOwned, Serialize};

pub use config::{EvalConfig, NamedAreaRange};
pub use error::{Error, Result};
pub use geometry::{
    box_area, iou, strip_padding, BoundingBox, Detection, GroundTruth, PADDING_CLASS,
};
pub use ingest::{Category, Dataset, ImageId, ImageRecord, PerturbationParams};
pub use matching::{match_image, match_image_class, AreaRange, ImageMatches, MatchResult, Verdict};
pub use oracle::{evaluate_exact, ScoredVerdict};
pub use report::{Metric, MetricReport, UNDEFINED};
pub use streaming::{bucket_index, interpolate_ap, BucketedState, DEFAULT_BUCKETS};

/// Floating-point scalar used for coordinates, confidences, thresholds and
/// metric values.
pub trait Scalar:
    Float
    + FromPrimitive
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts a literal. Every `f64` is representable (possibly rounded)
    /// in both supported types.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal fits scalar")
    }

    fn from_count(n: u64) -> Self {
        <Self as NumCast>::from(n).expect("count fits scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type BoundingBoxF64 = BoundingBox<f64>;
pub type DetectionF64 = Detection<f64>;
pub type GroundTruthF64 = GroundTruth<f64>;
pub type AreaRangeF64 = AreaRange<f64>;
pub type EvalConfigF64 = EvalConfig<f64>;
pub type BucketedStateF64 = BucketedState<f64>;
pub type MetricReportF64 = MetricReport<f64>;
pub type DatasetF64 = Dataset<f64>;

pub type BoundingBoxF32 = BoundingBox<f32>;
pub type DetectionF32 = Detection<f32>;
pub type GroundTruthF32 = GroundTruth<f32>;
pub type AreaRangeF32 = AreaRange<f32>;
pub type EvalConfigF32 = EvalConfig<f32>;
pub type BucketedStateF32 = BucketedState<f32>;
pub type MetricReportF32 = MetricReport<f32>;
pub type DatasetF32 = Dataset<f32>;
