//! Label maps and their connected-component objects.
//!
//! A [`LabelGrid`] is a row-major grid of class ids where `0` is background.
//! [`extract_objects`] splits it into 8-connected same-class components and
//! summarizes each one as a [`SceneObject`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::moore_trace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default minimum component area; smaller components are treated as speckle.
pub const DEFAULT_MIN_AREA: usize = 25;

/// `(row, col)` pixel coordinate. Rows grow downward, columns rightward.
pub type Pixel = (usize, usize);

/// Class id → class name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassMap(pub BTreeMap<u32, String>);

impl ClassMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32, name: impl Into<String>) {
        self.0.insert(id, name.into());
    }

    pub fn contains(&self, id: u32) -> bool {
        self.0.contains_key(&id)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.0.get(&id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.0.iter().find(|(_, n)| n.as_str() == name).map(|(id, _)| *id)
    }

    /// Sorted class ids.
    pub fn ids(&self) -> Vec<u32> {
        self.0.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(u32, S)> for ClassMap {
    fn from_iter<I: IntoIterator<Item = (u32, S)>>(iter: I) -> Self {
        ClassMap(iter.into_iter().map(|(k, v)| (k, v.into())).collect())
    }
}

/// A validated label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    image_id: String,
    height: usize,
    width: usize,
    cells: Vec<u32>,
    class_map: Arc<ClassMap>,
}

impl LabelGrid {
    pub fn new(
        image_id: impl Into<String>,
        height: usize,
        width: usize,
        cells: Vec<u32>,
        class_map: Arc<ClassMap>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Format(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if cells.len() != height * width {
            return Err(Error::Format(format!(
                "expected {} cells for {height}x{width}, got {}",
                height * width,
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&c| c != 0 && !class_map.contains(c)) {
            return Err(Error::UnknownClass(bad));
        }
        Ok(LabelGrid {
            image_id: image_id.into(),
            height,
            width,
            cells,
            class_map,
        })
    }

    /// Parses the `.lgrid` text format: a `height width` header followed by
    /// `height` rows of `width` whitespace-separated class ids.
    pub fn parse(image_id: impl Into<String>, text: &str, class_map: Arc<ClassMap>) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad header token {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [height, width] = dims[..] else {
            return Err(Error::Format(format!(
                "header must be `height width`, got {header:?}"
            )));
        };
        let mut cells = Vec::with_capacity(height.saturating_mul(width));
        let mut rows = 0;
        for (lineno, line) in lines {
            if rows == height {
                return Err(Error::Format(format!(
                    "line {}: more than {height} rows",
                    lineno + 1
                )));
            }
            let before = cells.len();
            for tok in line.split_whitespace() {
                let id = tok.parse::<u32>().map_err(|_| {
                    Error::Format(format!("line {}: non-integer token {tok:?}", lineno + 1))
                })?;
                cells.push(id);
            }
            if cells.len() - before != width {
                return Err(Error::Format(format!(
                    "line {}: expected {width} cells, got {}",
                    lineno + 1,
                    cells.len() - before
                )));
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::Format(format!("expected {height} rows, got {rows}")));
        }
        LabelGrid::new(image_id, height, width, cells, class_map)
    }

    /// Serializes back to `.lgrid` text. `parse(to_lgrid_string())` is the identity.
    pub fn to_lgrid_string(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() * 3 + 16);
        let _ = writeln!(out, "{} {}", self.height, self.width);
        for row in self.cells.chunks(self.width) {
            let mut first = true;
            for c in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn class_map(&self) -> &Arc<ClassMap> {
        &self.class_map
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.width + col]
    }

    /// Returns a copy with the given pixels set to background.
    pub fn with_cleared(&self, pixels: &[Pixel]) -> LabelGrid {
        let mut cells = self.cells.clone();
        for &(r, c) in pixels {
            cells[r * self.width + c] = 0;
        }
        LabelGrid {
            cells,
            ..self.clone()
        }
    }

    pub fn with_image_id(mut self, image_id: impl Into<String>) -> LabelGrid {
        self.image_id = image_id.into();
        self
    }
}

/// Inclusive bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BBox {
    fn at(p: Pixel) -> Self {
        BBox {
            min_row: p.0,
            min_col: p.1,
            max_row: p.0,
            max_col: p.1,
        }
    }

    fn include(&mut self, (r, c): Pixel) {
        self.min_row = self.min_row.min(r);
        self.min_col = self.min_col.min(c);
        self.max_row = self.max_row.max(r);
        self.max_col = self.max_col.max(c);
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    /// True when `self` lies strictly inside `outer` on all four sides.
    pub fn strictly_inside(&self, outer: &BBox) -> bool {
        outer.min_row < self.min_row
            && self.max_row < outer.max_row
            && outer.min_col < self.min_col
            && self.max_col < outer.max_col
    }

    pub fn contains(&self, (r, c): Pixel) -> bool {
        (self.min_row..=self.max_row).contains(&r) && (self.min_col..=self.max_col).contains(&c)
    }
}

/// Centroid in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Centroid<F> {
    pub row: F,
    pub col: F,
}

impl<F: Scalar> Centroid<F> {
    pub fn new(row: F, col: F) -> Self {
        Centroid { row, col }
    }
}

/// One 8-connected same-class component of a label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject<F> {
    pub object_id: usize,
    pub class_id: u32,
    pub pixel_count: usize,
    pub centroid: Centroid<F>,
    pub bbox: BBox,
    /// Outer boundary as a closed clockwise cycle (last pixel is adjacent to the first).
    pub boundary: Vec<Pixel>,
    /// Component pixels in raster order.
    pub pixels: Vec<Pixel>,
}

impl<F: Scalar> SceneObject<F> {
    /// Builds an object from its pixel set. Pixels need not be sorted.
    pub fn from_pixels(object_id: usize, class_id: u32, mut pixels: Vec<Pixel>) -> Self {
        assert!(!pixels.is_empty(), "object needs at least one pixel");
        pixels.sort_unstable();
        let mut bbox = BBox::at(pixels[0]);
        let (mut sr, mut sc) = (0u64, 0u64);
        for &p in &pixels {
            bbox.include(p);
            sr += p.0 as u64;
            sc += p.1 as u64;
        }
        let n = F::from_count(pixels.len() as u64);
        let centroid = Centroid::new(F::from_count(sr) / n, F::from_count(sc) / n);
        let boundary = moore_trace(&pixels, &bbox);
        SceneObject {
            object_id,
            class_id,
            pixel_count: pixels.len(),
            centroid,
            bbox,
            boundary,
            pixels,
        }
    }

    /// Membership mask over the bounding box, row-major.
    pub fn mask(&self) -> Vec<bool> {
        let w = self.bbox.width();
        let mut mask = vec![false; self.bbox.height() * w];
        for &(r, c) in &self.pixels {
            mask[(r - self.bbox.min_row) * w + (c - self.bbox.min_col)] = true;
        }
        mask
    }
}

const NEIGHBORS8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Extracts every 8-connected same-class component with at least `min_area`
/// pixels. Object ids follow the raster order of each component's first pixel.
pub fn extract_objects<F: Scalar>(grid: &LabelGrid, min_area: usize) -> Vec<SceneObject<F>> {
    extract_components(grid)
        .into_iter()
        .filter(|(_, px)| px.len() >= min_area.max(1))
        .enumerate()
        .map(|(id, (class, px))| SceneObject::from_pixels(id, class, px))
        .collect()
}

/// All non-background components, unfiltered, in raster order of first pixel.
pub(crate) fn extract_components(grid: &LabelGrid) -> Vec<(u32, Vec<Pixel>)> {
    let (h, w) = (grid.height, grid.width);
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        let class = grid.cells[start];
        if class == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            pixels.push((r, c));
            for (dr, dc) in NEIGHBORS8 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let n = nr as usize * w + nc as usize;
                if !seen[n] && grid.cells[n] == class {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        pixels.sort_unstable();
        out.push((class, pixels));
    }
    out
}

/// Re-traces the outer boundary of `object`. Equal to `object.boundary`.
pub fn trace_boundary<F: Scalar>(grid: &LabelGrid, object: &SceneObject<F>) -> Vec<Pixel> {
    debug_assert!(object
        .pixels
        .iter()
        .all(|&(r, c)| grid.get(r, c) == object.class_id));
    moore_trace(&object.pixels, &object.bbox)
}
