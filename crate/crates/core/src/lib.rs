//! Geometry and evaluation core for box-to-polygon text detection.
//!
//! A detection starts as an axis-aligned box, is refined by a few box
//! stages, turned into a polygon around a cubic Bézier centerline and then
//! refined vertex by vertex. Coordinates are pixels with the y axis up.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod cascade;
pub mod error;
pub mod evalkit;
pub mod geom;
pub mod io;
pub mod polyalign;
pub mod polyiou;
pub mod refine;
pub mod regressor;
pub mod rng;
pub mod synth;

pub use assign::{GroundTruth, MatchPair, MatchResult, MatchWeights, Orientation, Prediction};
pub use cascade::{CascadeConfig, CascadeOutput, Regressor, StageKind, StageRecord};
pub use error::{Error, Result};
pub use evalkit::{EvalReport, EvalThresholds, SceneEval};
pub use geom::{Bbox, BezierCurve, BezierDelta, Point, Polyline, TextPolygon};
pub use polyalign::{AlignVariant, FeatureMap, FeaturePyramid, PolyRoiFeature};
pub use refine::{BoxDelta, PolyDelta, VertexDelta};
pub use synth::{Scene, SceneParams};
