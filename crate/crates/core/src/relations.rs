//! Pairwise relations between scene objects: relative position (octant),
//! proximity, size log-ratio and normalized centroid distance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelgrid::{Centroid, LabelGrid, SceneObject};
use crate::scalar::Scalar;

/// Number of normalized-distance bins.
pub const DEFAULT_K_DIST: usize = 5;

/// Vertical tolerance for ON/UNDER, as a fraction of image height.
pub const EPS_ROW_FRACTION: f64 = 0.05;

/// Compass direction from one centroid to another. Indices run
/// counterclockwise from east.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Octant {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

impl Octant {
    pub const ALL: [Octant; 8] = [
        Octant::E,
        Octant::NE,
        Octant::N,
        Octant::NW,
        Octant::W,
        Octant::SW,
        Octant::S,
        Octant::SE,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Octant {
        Self::ALL[i % 8]
    }

    pub fn opposite(self) -> Octant {
        Self::from_index(self.index() + 4)
    }
}

impl fmt::Display for Octant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Proximity {
    On,
    Under,
    Front,
    Back,
    Beside,
    None,
}

impl Proximity {
    pub const ALL: [Proximity; 6] = [
        Proximity::On,
        Proximity::Under,
        Proximity::Front,
        Proximity::Back,
        Proximity::Beside,
        Proximity::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Proximity {
        Self::ALL[i]
    }

    /// The label seen from the other object of the pair.
    pub fn converse(self) -> Proximity {
        match self {
            Proximity::On => Proximity::Under,
            Proximity::Under => Proximity::On,
            Proximity::Front => Proximity::Back,
            Proximity::Back => Proximity::Front,
            other => other,
        }
    }
}

/// Relation observed for the ordered pair (A, B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PairRelation<F> {
    pub a_object: usize,
    pub b_object: usize,
    pub a_class: u32,
    pub b_class: u32,
    /// Direction from A's centroid to B's centroid.
    pub rpos: Octant,
    pub rprox: Proximity,
    /// `ln |A| - ln |B|`.
    pub rsize: F,
    /// Centroid distance over the image diagonal.
    pub rdist: F,
    pub rdist_bin: usize,
}

/// Classifies the direction from `a` to `b` into one of eight half-open 45°
/// sectors, `E = [-22.5°, 22.5°)`, angles increasing counterclockwise with
/// "up" meaning decreasing row.
///
/// Only the signs of cross/dot products against four fixed lines are used,
/// so swapping `a` and `b` always yields the exact opposite octant.
pub fn octant<F: Scalar>(a: Centroid<F>, b: Centroid<F>) -> Result<Octant> {
    let dx = b.col - a.col;
    let dy = a.row - b.row;
    if dx == F::zero() && dy == F::zero() {
        return Err(Error::DegeneratePair);
    }
    let mut above = [false; 4];
    for (j, flag) in above.iter_mut().enumerate() {
        // Line through the origin at 22.5° + 45°·j.
        let phi = std::f64::consts::FRAC_PI_8 * (1 + 2 * j) as f64;
        let (ux, uy) = (F::lit(phi.cos()), F::lit(phi.sin()));
        let side = ux * dy - uy * dx;
        *flag = side > F::zero() || (side == F::zero() && ux * dx + uy * dy > F::zero());
    }
    let count = above.iter().filter(|&&f| f).count();
    let idx = if above[0] { count } else { (8 - count) % 8 };
    Ok(Octant::from_index(idx))
}

/// True when some pixel of `a` and some pixel of `b` are within Chebyshev
/// distance 1.
pub fn contact<F: Scalar>(_grid: &LabelGrid, a: &SceneObject<F>, b: &SceneObject<F>) -> bool {
    let (ab, bb) = (&a.bbox, &b.bbox);
    if ab.max_row + 1 < bb.min_row
        || bb.max_row + 1 < ab.min_row
        || ab.max_col + 1 < bb.min_col
        || bb.max_col + 1 < ab.min_col
    {
        return false;
    }
    let mask = b.mask();
    let w = bb.width();
    let hit = |r: isize, c: isize| {
        r >= bb.min_row as isize
            && c >= bb.min_col as isize
            && r <= bb.max_row as isize
            && c <= bb.max_col as isize
            && mask[(r as usize - bb.min_row) * w + (c as usize - bb.min_col)]
    };
    a.pixels.iter().any(|&(r, c)| {
        let (r, c) = (r as isize, c as isize);
        (-1..=1).any(|dr| (-1..=1).any(|dc| hit(r + dr, c + dc)))
    })
}

/// Proximity label of A relative to B. Containment (FRONT/BACK) takes
/// precedence over the vertical contact labels.
pub fn proximity_relation<F: Scalar>(
    a: &SceneObject<F>,
    b: &SceneObject<F>,
    in_contact: bool,
    image_height: usize,
) -> Proximity {
    let eps = F::lit(EPS_ROW_FRACTION) * F::from_index(image_height);
    if a.bbox.strictly_inside(&b.bbox) {
        Proximity::Front
    } else if b.bbox.strictly_inside(&a.bbox) {
        Proximity::Back
    } else if in_contact && a.centroid.row < b.centroid.row - eps {
        Proximity::On
    } else if in_contact && a.centroid.row > b.centroid.row + eps {
        Proximity::Under
    } else if in_contact {
        Proximity::Beside
    } else {
        Proximity::None
    }
}

pub fn size_log_ratio<F: Scalar>(a: &SceneObject<F>, b: &SceneObject<F>) -> F {
    // Difference of logs keeps the ratio exactly antisymmetric.
    F::from_index(a.pixel_count).ln() - F::from_index(b.pixel_count).ln()
}

pub fn norm_distance<F: Scalar>(a: &SceneObject<F>, b: &SceneObject<F>, grid: &LabelGrid) -> F {
    let dr = a.centroid.row - b.centroid.row;
    let dc = a.centroid.col - b.centroid.col;
    let h = F::from_index(grid.height());
    let w = F::from_index(grid.width());
    let d = (dr * dr + dc * dc).sqrt() / (h * h + w * w).sqrt();
    d.min(F::one())
}

pub fn distance_bin<F: Scalar>(rdist: F, k_dist: usize) -> usize {
    let bin = (rdist * F::from_index(k_dist)).floor().to_usize().unwrap_or(0);
    bin.min(k_dist - 1)
}

pub fn pair_relation<F: Scalar>(
    grid: &LabelGrid,
    a: &SceneObject<F>,
    b: &SceneObject<F>,
    k_dist: usize,
) -> Result<PairRelation<F>> {
    let rpos = octant(a.centroid, b.centroid)?;
    let touching = contact(grid, a, b);
    let rdist = norm_distance(a, b, grid);
    Ok(PairRelation {
        a_object: a.object_id,
        b_object: b.object_id,
        a_class: a.class_id,
        b_class: b.class_id,
        rpos,
        rprox: proximity_relation(a, b, touching, grid.height()),
        rsize: size_log_ratio(a, b),
        rdist,
        rdist_bin: distance_bin(rdist, k_dist),
    })
}

/// Relations for every ordered pair of distinct objects, in (a, b) index order.
pub fn all_pair_relations<F: Scalar>(
    grid: &LabelGrid,
    objects: &[SceneObject<F>],
    k_dist: usize,
) -> Result<Vec<PairRelation<F>>> {
    let mut out = Vec::with_capacity(objects.len() * objects.len().saturating_sub(1));
    for a in objects {
        for b in objects {
            if a.object_id != b.object_id {
                out.push(pair_relation(grid, a, b, k_dist)?);
            }
        }
    }
    Ok(out)
}
