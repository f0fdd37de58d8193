//! Per-image analysis: objects, pair relations and shape histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelgrid::{extract_objects, LabelGrid, SceneObject, DEFAULT_MIN_AREA};
use crate::relations::{pair_relation, PairRelation, DEFAULT_K_DIST};
use crate::scalar::Scalar;
use crate::shape::{shape_histogram, ShapeHistogram, DEFAULT_SHAPE_BINS, DEFAULT_SHAPE_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub min_area: usize,
    pub k_dist: usize,
    pub shape_samples: usize,
    pub shape_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_area: DEFAULT_MIN_AREA,
            k_dist: DEFAULT_K_DIST,
            shape_samples: DEFAULT_SHAPE_SAMPLES,
            shape_bins: DEFAULT_SHAPE_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnalysis<F> {
    pub image_id: String,
    pub objects: Vec<SceneObject<F>>,
    /// Ordered pairs; pairs with coincident centroids have no defined octant
    /// and are left out.
    pub relations: Vec<PairRelation<F>>,
    /// Indexed by object id.
    pub shapes: Vec<ShapeHistogram<F>>,
    pub skipped_pairs: usize,
}

impl<F: Scalar> SceneAnalysis<F> {
    /// Sorted, deduplicated class ids present in the scene.
    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.objects.iter().map(|o| o.class_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

pub fn analyze<F: Scalar>(grid: &LabelGrid, cfg: &AnalysisConfig) -> Result<SceneAnalysis<F>> {
    let objects: Vec<SceneObject<F>> = extract_objects(grid, cfg.min_area);
    let mut relations = Vec::with_capacity(objects.len() * objects.len().saturating_sub(1));
    let mut skipped_pairs = 0;
    for a in &objects {
        for b in &objects {
            if a.object_id == b.object_id {
                continue;
            }
            match pair_relation(grid, a, b, cfg.k_dist) {
                Ok(r) => relations.push(r),
                Err(Error::DegeneratePair) => skipped_pairs += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let shapes = objects
        .iter()
        .map(|o| shape_histogram(grid, o, cfg.shape_samples, cfg.shape_bins))
        .collect();
    Ok(SceneAnalysis {
        image_id: grid.image_id().to_string(),
        objects,
        relations,
        shapes,
        skipped_pairs,
    })
}
