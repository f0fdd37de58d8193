//! Contradiction detection: pair features, linear detectors, image-level
//! aggregation and context-specific dispatch.

pub mod features;
pub mod linear;
pub mod registry;

pub use features::{
    class_deficit, featurize, featurize_scene, missing_partner_prob, FeatureVector, SceneFeatures,
    ShapePrototypes, FEATURE_DIM,
    FEATURE_NAMES,
};
pub use linear::{train_linear, Hyperparams, Label, LinearModel, TrainingMeta};
pub use registry::{
    aggregate, contradiction_key, train_registry, verify, Aggregation, ContextVerifier, PairScore, TrainingConfig,
    Verdict, VerifierRegistry, DEFAULT_N_MIN, GLOBAL_LABEL,
};
