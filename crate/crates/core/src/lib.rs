//! Morphological characteristics ("DefChars") of mask-annotated image
//! patterns, and the retrieval machinery built on them.
//!
//! The crate is organised the way the retrieval pipeline runs:
//!
//! * [`imaging`]: decoding, colour conversion, resizing and cropping of
//!   annotated patterns into [`PatternRecord`]s.
//! * [`geometry`]: polygon tracing, simplification and the quantities the
//!   shape features consume.
//! * [`features`]: the 38-slot [`DefCharVector`], its normalisation, and the
//!   LBP / resized-image baselines.
//! * [`metrics`]: the seven similarity measures and their ranking direction.
//! * [`store`]: the append-only datastore and exhaustive top-k retrieval.
//! * [`evaluation`]: Precision@K, AP@K, mAP@K and the leave-one-out sweep.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod store;

pub use error::{Error, Result};
pub use evaluation::{EvalConfig, EvalReport};
pub use features::{DefCharVector, FeatureKind, LbpHistogram, NeighbourCategory, SLOT_NAMES};
pub use geometry::{Point, Polygon};
pub use imaging::{GrayImage, ImageHsv, ImageRgb, Mask, PatternRecord};
pub use metrics::{Direction, InputKind, Metric};
pub use store::{Datastore, Payload, RankedResults};
