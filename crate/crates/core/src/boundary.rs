//! Moore-neighbour boundary tracing with Jacob's stopping criterion.

use crate::labelgrid::{BBox, Pixel};

// Clockwise (rows grow downward) starting from west.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

fn ring_index(d: (isize, isize)) -> usize {
    RING.iter().position(|&r| r == d).expect("unit step")
}

/// Component mask padded by one background pixel on every side.
struct PaddedMask {
    origin: (isize, isize),
    width: usize,
    cells: Vec<bool>,
}

impl PaddedMask {
    fn new(pixels: &[Pixel], bbox: &BBox) -> Self {
        let width = bbox.width() + 2;
        let height = bbox.height() + 2;
        let origin = (bbox.min_row as isize - 1, bbox.min_col as isize - 1);
        let mut cells = vec![false; width * height];
        for &(r, c) in pixels {
            let lr = (r as isize - origin.0) as usize;
            let lc = (c as isize - origin.1) as usize;
            cells[lr * width + lc] = true;
        }
        PaddedMask {
            origin,
            width,
            cells,
        }
    }

    #[inline]
    fn at(&self, p: (isize, isize)) -> bool {
        let lr = p.0 - self.origin.0;
        let lc = p.1 - self.origin.1;
        if lr < 0 || lc < 0 || lc as usize >= self.width {
            return false;
        }
        self.cells
            .get(lr as usize * self.width + lc as usize)
            .copied()
            .unwrap_or(false)
    }
}

/// Traces the outer boundary of a single 8-connected component.
///
/// `pixels` must be sorted in raster order; tracing starts at `pixels[0]`, the
/// top-left-most pixel, with its west neighbour as backtrack. Tracing stops
/// when the first move out of the start pixel is about to repeat, which also
/// handles shapes whose start pixel is entered from several directions. The
/// returned cycle does not repeat the start pixel at the end. Thin parts of
/// the shape may appear more than once in the cycle.
pub(crate) fn moore_trace(pixels: &[Pixel], bbox: &BBox) -> Vec<Pixel> {
    let mask = PaddedMask::new(pixels, bbox);
    let start = (pixels[0].0 as isize, pixels[0].1 as isize);
    let mut out = vec![pixels[0]];
    let (mut cur, mut back) = (start, 0usize);
    let mut second = None;
    // Every boundary pixel is entered at most four times.
    let cap = 4 * pixels.len() + 8;
    loop {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let p = (cur.0 + RING[d].0, cur.1 + RING[d].1);
            if mask.at(p) {
                let prev = RING[(d + 7) % 8];
                let bg = (cur.0 + prev.0, cur.1 + prev.1);
                next = Some((p, ring_index((bg.0 - p.0, bg.1 - p.1))));
                break;
            }
        }
        let Some((p, b)) = next else {
            // isolated pixel
            return out;
        };
        match second {
            None => second = Some(p),
            Some(s) if cur == start && p == s => {
                out.pop();
                return out;
            }
            Some(_) => {}
        }
        out.push((p.0 as usize, p.1 as usize));
        cur = p;
        back = b;
        if out.len() > cap {
            debug_assert!(false, "boundary trace did not terminate");
            return out;
        }
    }
}
