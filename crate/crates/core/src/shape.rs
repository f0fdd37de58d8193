//! Centroid-distance shape histograms.
//!
//! The outer boundary is resampled at uniform arc length, each sample's
//! distance to the centroid is divided by the largest sampled distance, and the
//! normalized distances are binned over `[0, 1]`.
//!
//! The boundary used here is the crack contour: the closed chain of pixel
//! edges separating the object from the outside, with corners on the integer
//! lattice. Unlike a chain of pixel centres it scales exactly when the object
//! is upscaled by pixel replication, so the histogram depends on shape rather
//! than on resolution.

use serde::{Deserialize, Serialize};

use crate::labelgrid::{LabelGrid, SceneObject};
use crate::scalar::Scalar;

pub const DEFAULT_SHAPE_SAMPLES: usize = 64;
pub const DEFAULT_SHAPE_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ShapeHistogram<F> {
    pub bins: Vec<F>,
}

impl<F: Scalar> ShapeHistogram<F> {
    pub fn uniform(n_bins: usize) -> Self {
        ShapeHistogram {
            bins: vec![F::one() / F::from_index(n_bins); n_bins],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn l1_distance(&self, other: &ShapeHistogram<F>) -> F {
        self.bins
            .iter()
            .zip(&other.bins)
            .fold(F::zero(), |acc, (&a, &b)| acc + (a - b).abs())
    }

    /// Bin-wise mean of a non-empty set of histograms.
    pub fn mean<'a>(hists: impl IntoIterator<Item = &'a ShapeHistogram<F>>, n_bins: usize) -> Self {
        let mut acc = vec![F::zero(); n_bins];
        let mut n = 0u64;
        for h in hists {
            for (a, &b) in acc.iter_mut().zip(&h.bins) {
                *a = *a + b;
            }
            n += 1;
        }
        if n == 0 {
            return Self::uniform(n_bins);
        }
        let n = F::from_count(n);
        ShapeHistogram {
            bins: acc.into_iter().map(|a| a / n).collect(),
        }
    }
}

// Clockwise in image coordinates (rows grow downward): E, S, W, N.
const DIRS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

/// Corners of the outer crack contour, relative to the bounding-box corner,
/// walked with the object on the right. Diagonal pixel contacts are treated
/// as connected, matching 8-connected objects.
fn crack_contour<F: Scalar>(object: &SceneObject<F>) -> Vec<(i64, i64)> {
    let mask = object.mask();
    let (h, w) = (object.bbox.height() as i64, object.bbox.width() as i64);
    let filled = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && mask[(r * w + c) as usize];
    let (r0, c0) = (
        (object.pixels[0].0 - object.bbox.min_row) as i64,
        (object.pixels[0].1 - object.bbox.min_col) as i64,
    );
    let start = (r0, c0);
    let (mut v, mut d) = (start, 0usize);
    let mut out = Vec::new();
    loop {
        out.push(v);
        v = (v.0 + DIRS[d].0, v.1 + DIRS[d].1);
        // Pixels ahead-left and ahead-right of corner `v`.
        let (y, x) = v;
        let (left, right) = match d {
            0 => ((y - 1, x), (y, x)),
            1 => ((y, x), (y, x - 1)),
            2 => ((y, x - 1), (y - 1, x - 1)),
            _ => ((y - 1, x - 1), (y - 1, x)),
        };
        d = if filled(left.0, left.1) {
            (d + 3) % 4
        } else if filled(right.0, right.1) {
            d
        } else {
            (d + 1) % 4
        };
        if v == start && d == 0 {
            return out;
        }
    }
}

/// Computes the shape histogram of `object`.
///
/// All geometry is expressed relative to the object's bounding-box corner, so
/// integer translations give bit-identical histograms. A single-pixel object
/// is treated as degenerate and puts all mass in the last bin.
pub fn shape_histogram<F: Scalar>(
    _grid: &LabelGrid,
    object: &SceneObject<F>,
    n_samples: usize,
    n_bins: usize,
) -> ShapeHistogram<F> {
    assert!(n_samples > 0 && n_bins > 0);
    if object.pixel_count <= 1 {
        let mut bins = vec![F::zero(); n_bins];
        bins[n_bins - 1] = F::one();
        return ShapeHistogram { bins };
    }
    let (r0, c0) = (object.bbox.min_row, object.bbox.min_col);

    // Area centroid in corner coordinates: pixel (r, c) spans [r, r + 1).
    let (mut sr, mut sc) = (0u64, 0u64);
    for &(r, c) in &object.pixels {
        sr += (r - r0) as u64;
        sc += (c - c0) as u64;
    }
    let n = F::from_index(object.pixel_count);
    let half = F::lit(0.5);
    let (cr, cc) = (F::from_count(sr) / n + half, F::from_count(sc) / n + half);

    let pts: Vec<(F, F)> = crack_contour(object)
        .into_iter()
        .map(|(r, c)| (F::lit(r as f64), F::lit(c as f64)))
        .collect();

    // Every contour edge has unit length.
    let total = F::from_index(pts.len());
    let mut dists = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let s = total * F::from_index(k) / F::from_index(n_samples);
        let seg = s.floor().to_usize().unwrap_or(0).min(pts.len() - 1);
        let t = s - F::from_index(seg);
        let (a, b) = (pts[seg], pts[(seg + 1) % pts.len()]);
        let pr = a.0 + t * (b.0 - a.0);
        let pc = a.1 + t * (b.1 - a.1);
        dists.push(((pr - cr).powi(2) + (pc - cc).powi(2)).sqrt());
    }

    let max = dists.iter().fold(F::zero(), |m, &d| m.max(d));
    let mut counts = vec![0u64; n_bins];
    for d in dists {
        let bin = ((d / max) * F::from_index(n_bins))
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(n_bins - 1);
        counts[bin] += 1;
    }
    let total = F::from_index(n_samples);
    ShapeHistogram {
        bins: counts.into_iter().map(|c| F::from_count(c) / total).collect(),
    }
}
