//! Contradiction examples by object removal.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labelgrid::{extract_objects, LabelGrid};

/// Suffix appended to the image id of a generated contradiction.
pub const CONTRADICTION_SUFFIX: &str = "/contradiction";

/// Removes one object chosen uniformly at random (seeded) by setting its
/// pixels to background. Returns the modified grid and the removed class.
///
/// Objects are the components with at least `min_area` pixels; every other
/// pixel is left untouched.
pub fn generate_contradiction(grid: &LabelGrid, min_area: usize, seed: u64) -> Result<(LabelGrid, u32)> {
    let objects = extract_objects::<f64>(grid, min_area);
    if objects.len() < 2 {
        return Err(Error::NotEnoughObjects(objects.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let victim = &objects[rng.random_range(0..objects.len())];
    let out = grid
        .with_cleared(&victim.pixels)
        .with_image_id(format!("{}{CONTRADICTION_SUFFIX}", grid.image_id()));
    Ok((out, victim.class_id))
}
