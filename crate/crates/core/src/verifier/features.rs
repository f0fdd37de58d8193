//! Pair feature vectors evaluated against a co-occurrence model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relations::PairRelation;
use crate::scalar::Scalar;
use crate::scene::SceneAnalysis;
use crate::shape::ShapeHistogram;
use crate::stats::{CooccurrenceModel, Observation};

pub const FEATURE_DIM: usize = 9;

/// Column layout of every [`FeatureVector`].
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "presence_prob",
    "position_prob",
    "proximity_prob",
    "distance_prob",
    "size_abs_zscore",
    "rdist",
    "shape_l1_to_prototype",
    "missing_partner_prob",
    "class_deficit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "F: Scalar")]
pub struct FeatureVector<F>(pub Vec<F>);

impl<F: Scalar> FeatureVector<F> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, k: F) -> Self {
        FeatureVector(self.0.iter().map(|&x| x * k).collect())
    }
}

/// Mean shape histogram per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ShapePrototypes<F> {
    pub n_bins: usize,
    pub classes: BTreeMap<u32, ShapeHistogram<F>>,
}

impl<F: Scalar> ShapePrototypes<F> {
    pub fn from_scenes<'a>(scenes: impl IntoIterator<Item = &'a SceneAnalysis<F>>, n_bins: usize) -> Self {
        let mut by_class: BTreeMap<u32, Vec<&ShapeHistogram<F>>> = BTreeMap::new();
        for s in scenes {
            for (o, h) in s.objects.iter().zip(&s.shapes) {
                by_class.entry(o.class_id).or_default().push(h);
            }
        }
        ShapePrototypes {
            n_bins,
            classes: by_class
                .into_iter()
                .map(|(c, hs)| (c, ShapeHistogram::mean(hs, n_bins)))
                .collect(),
        }
    }

    /// Prototype for `class`, or the uniform histogram for classes never seen.
    pub fn get(&self, class: u32) -> ShapeHistogram<F> {
        self.classes
            .get(&class)
            .cloned()
            .unwrap_or_else(|| ShapeHistogram::uniform(self.n_bins))
    }
}

/// Largest P(c present | o present) over present classes `o` and classes `c`
/// of the model universe that are absent from the scene. Zero when nothing
/// is missing.
pub fn missing_partner_prob<F: Scalar>(stats: &CooccurrenceModel<F>, present: &[u32]) -> Result<F> {
    let mut best = F::zero();
    for &o in present {
        for &c in stats.classes() {
            if present.binary_search(&c).is_err() {
                best = best.max(stats.conditional_presence(o, c)?);
            }
        }
    }
    Ok(best)
}

/// Expected number of present classes under the model minus the number
/// present in the scene.
pub fn class_deficit<F: Scalar>(stats: &CooccurrenceModel<F>, present: &[u32]) -> Result<F> {
    let images = stats.images();
    if images == 0 {
        return Ok(F::zero());
    }
    let mut seen = 0u64;
    for &c in stats.classes() {
        seen += stats.counts().class_images(c)?;
    }
    Ok(F::from_count(seen) / F::from_count(images) - F::from_index(present.len()))
}

/// Scene-level features shared by every pair of a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneFeatures<F> {
    pub missing_partner: F,
    pub class_deficit: F,
}

impl<F: Scalar> SceneFeatures<F> {
    pub fn compute(stats: &CooccurrenceModel<F>, present: &[u32]) -> Result<Self> {
        Ok(SceneFeatures {
            missing_partner: missing_partner_prob(stats, present)?,
            class_deficit: class_deficit(stats, present)?,
        })
    }
}

/// Builds the feature vector for one ordered pair.
pub fn featurize<F: Scalar>(
    relation: &PairRelation<F>,
    shape_a: &ShapeHistogram<F>,
    stats: &CooccurrenceModel<F>,
    prototypes: &ShapePrototypes<F>,
    scene: SceneFeatures<F>,
) -> Result<FeatureVector<F>> {
    let (a, b) = (relation.a_class, relation.b_class);
    if relation.rdist_bin >= stats.k_dist() {
        return Err(Error::Dimension {
            expected: stats.k_dist(),
            got: relation.rdist_bin + 1,
        });
    }
    let v = vec![
        stats.query(a, b, Observation::Presence)?,
        stats.query(a, b, Observation::Position(relation.rpos))?,
        stats.query(a, b, Observation::Proximity(relation.rprox))?,
        stats.query(a, b, Observation::Distance(relation.rdist_bin))?,
        stats.query_size_zscore(a, b, relation.rsize)?.abs(),
        relation.rdist,
        shape_a.l1_distance(&prototypes.get(a)),
        scene.missing_partner,
        scene.class_deficit,
    ];
    debug_assert_eq!(v.len(), FEATURE_DIM);
    Ok(FeatureVector(v))
}

/// Feature vectors for every relation of an analyzed scene, in relation order.
pub fn featurize_scene<F: Scalar>(
    scene: &SceneAnalysis<F>,
    stats: &CooccurrenceModel<F>,
    prototypes: &ShapePrototypes<F>,
) -> Result<Vec<FeatureVector<F>>> {
    let shared = SceneFeatures::compute(stats, &scene.classes())?;
    scene
        .relations
        .iter()
        .map(|r| featurize(r, &scene.shapes[r.a_object], stats, prototypes, shared))
        .collect()
}
