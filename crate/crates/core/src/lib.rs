//! Semantic consistency checks for segmentation label maps.
//!
//! Objects are extracted from a label grid, every ordered pair is described by
//! its relative position, proximity, size ratio and distance, and those
//! relations are scored against co-occurrence statistics learned from a
//! corpus. A linear detector turns the scores into a contradiction verdict,
//! optionally using a model specialized to the image's context.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`.

pub mod boundary;
pub mod context;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod labelgrid;
pub mod relations;
pub mod scalar;
pub mod scene;
pub mod seed;
pub mod shape;
pub mod stats;
pub mod verifier;

pub use error::{Error, Result};
pub use labelgrid::{extract_objects, trace_boundary, BBox, ClassMap, LabelGrid, Pixel, DEFAULT_MIN_AREA};
pub use relations::{Octant, Proximity};
pub use scalar::Scalar;
pub use scene::AnalysisConfig;
pub use seed::derive_seed;
pub use stats::StatsBuilder;
pub use verifier::{Aggregation, Hyperparams, Label, TrainingConfig};

pub type Centroid = labelgrid::Centroid<f64>;
pub type SceneObject = labelgrid::SceneObject<f64>;
pub type PairRelation = relations::PairRelation<f64>;
pub type ShapeHistogram = shape::ShapeHistogram<f64>;
pub type CooccurrenceModel = stats::CooccurrenceModel<f64>;
pub type ContextSelectionReport = context::ContextSelectionReport<f64>;
pub type SceneAnalysis = scene::SceneAnalysis<f64>;
pub type FeatureVector = verifier::FeatureVector<f64>;
pub type LinearModel = verifier::LinearModel<f64>;
pub type Verdict = verifier::Verdict<f64>;
pub type ContextVerifier = verifier::ContextVerifier<f64>;
pub type VerifierRegistry = verifier::VerifierRegistry<f64>;
