//! Independent oracles and random inputs shared by the integration suites.

#![allow(dead_code)]

pub mod hand;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenecheck::shape::{shape_histogram, DEFAULT_SHAPE_BINS, DEFAULT_SHAPE_SAMPLES};
use scenecheck::{extract_objects, ClassMap, LabelGrid, Octant, Pixel, ShapeHistogram};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn class_map(n: u32) -> Arc<ClassMap> {
    Arc::new((1..=n).map(|i| (i, format!("c{i}"))).collect())
}

/// Random rectangles and ellipses of `n_classes` classes over `h` x `w`,
/// drawn on top of each other, plus salt noise.
pub fn random_grid(rng: &mut impl Rng, h: usize, w: usize, n_classes: u32) -> LabelGrid {
    let mut cells = vec![0u32; h * w];
    for _ in 0..rng.random_range(1..12) {
        let class = rng.random_range(1..=n_classes);
        let (bh, bw) = (rng.random_range(1..h / 2), rng.random_range(1..w / 2));
        let (top, left) = (rng.random_range(0..h - bh), rng.random_range(0..w - bw));
        let ellipse = rng.random::<bool>();
        for r in 0..bh {
            for c in 0..bw {
                let y = (r as f64 + 0.5) / bh as f64 - 0.5;
                let x = (c as f64 + 0.5) / bw as f64 - 0.5;
                if !ellipse || x * x + y * y <= 0.25 {
                    cells[(top + r) * w + left + c] = class;
                }
            }
        }
    }
    for _ in 0..rng.random_range(0..=h * w / 20) {
        cells[rng.random_range(0..h * w)] = rng.random_range(0..=n_classes);
    }
    LabelGrid::new("random", h, w, cells, class_map(n_classes)).unwrap()
}

/// Union-find over 8-adjacent equal labels. Components are returned in
/// raster order of their first pixel, each with its sorted pixels.
pub fn components_oracle(grid: &LabelGrid) -> Vec<(u32, Vec<Pixel>)> {
    let (h, w) = (grid.height(), grid.width());
    let mut parent: Vec<usize> = (0..h * w).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..h {
        for c in 0..w {
            let v = grid.get(r, c);
            if v == 0 {
                continue;
            }
            for (dr, dc) in [(0isize, 1isize), (1, -1), (1, 0), (1, 1)] {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < h as isize && nc >= 0 && nc < w as isize && grid.get(nr as usize, nc as usize) == v {
                    let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, nr as usize * w + nc as usize));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Pixel>> = BTreeMap::new();
    for i in 0..h * w {
        if grid.cells()[i] != 0 {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push((i / w, i % w));
        }
    }
    let mut out: Vec<(u32, Vec<Pixel>)> = groups
        .into_values()
        .map(|px| (grid.get(px[0].0, px[0].1), px))
        .collect();
    out.sort_by_key(|(_, px)| px[0]);
    out
}

/// Octant from the atan2 angle, with "up" meaning decreasing row.
pub fn octant_oracle(a: (f64, f64), b: (f64, f64)) -> Octant {
    let deg = (a.0 - b.0).atan2(b.1 - a.1).to_degrees();
    let idx = ((deg + 22.5).rem_euclid(360.0) / 45.0).floor() as usize % 8;
    Octant::from_index(idx)
}

pub fn contact_oracle(a: &[Pixel], b: &[Pixel]) -> bool {
    a.iter().any(|&(ar, ac)| {
        b.iter().any(|&(br, bc)| ar.abs_diff(br) <= 1 && ac.abs_diff(bc) <= 1)
    })
}

/// An 8-connected random-walk blob with its holes filled, anchored at `origin`.
pub fn random_blob(rng: &mut impl Rng, origin: Pixel, span: usize, steps: usize) -> Vec<Pixel> {
    let mut set = BTreeSet::new();
    let (mut r, mut c) = (span / 2, span / 2);
    set.insert((r, c));
    for _ in 0..steps {
        let nr = (r as isize + rng.random_range(-1..=1i64) as isize).clamp(0, span as isize - 1) as usize;
        let nc = (c as isize + rng.random_range(-1..=1i64) as isize).clamp(0, span as isize - 1) as usize;
        r = nr;
        c = nc;
        set.insert((r, c));
    }
    fill_holes(&set, span)
        .into_iter()
        .map(|(r, c)| (r + origin.0, c + origin.1))
        .collect()
}

/// Adds every background cell of the `span` x `span` box that is not
/// 4-connected to the outside.
pub fn fill_holes(set: &BTreeSet<Pixel>, span: usize) -> Vec<Pixel> {
    let n = span + 2;
    let inside = |r: usize, c: usize| r >= 1 && c >= 1 && r <= span && c <= span && set.contains(&(r - 1, c - 1));
    let mut outside = vec![false; n * n];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    outside[0] = true;
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= n as isize || nc >= n as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if !outside[nr * n + nc] && !inside(nr, nc) {
                outside[nr * n + nc] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    let mut out = Vec::new();
    for r in 1..=span {
        for c in 1..=span {
            if !outside[r * n + c] {
                out.push((r - 1, c - 1));
            }
        }
    }
    out
}

/// Pixels of a hole-free shape with a 4-neighbour outside the shape.
pub fn boundary_oracle(pixels: &[Pixel]) -> BTreeSet<Pixel> {
    let set: BTreeSet<Pixel> = pixels.iter().copied().collect();
    pixels
        .iter()
        .copied()
        .filter(|&(r, c)| {
            r == 0
                || c == 0
                || !set.contains(&(r - 1, c))
                || !set.contains(&(r + 1, c))
                || !set.contains(&(r, c - 1))
                || !set.contains(&(r, c + 1))
        })
        .collect()
}

pub fn grid_with(h: usize, w: usize, objects: &[(u32, &[Pixel])], n_classes: u32) -> LabelGrid {
    let mut cells = vec![0u32; h * w];
    for (class, px) in objects {
        for &(r, c) in *px {
            cells[r * w + c] = *class;
        }
    }
    LabelGrid::new("blobs", h, w, cells, class_map(n_classes)).unwrap()
}

/// Mutual information in nats by the textbook double sum.
pub fn mi_oracle(joint: &[Vec<u64>]) -> f64 {
    let n: u64 = joint.iter().flatten().sum();
    let n = n as f64;
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum::<u64>() as f64 / n).collect();
    let cols: Vec<f64> = (0..joint[0].len())
        .map(|j| joint.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x > 0 {
                let p = x as f64 / n;
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn entropy(counts: &[u64]) -> f64 {
    let n = counts.iter().sum::<u64>() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Mismatches between `extract_objects` (min_area 1) and the union-find
/// oracle over `n` random 64x64 grids.
pub fn components_mismatches(seed: u64, n: usize) -> usize {
    let mut rng = rng(seed);
    (0..n)
        .filter(|_| {
            let grid = random_grid(&mut rng, 64, 64, 4);
            let got: Vec<(u32, Vec<Pixel>)> = scenecheck::extract_objects::<f64>(&grid, 1)
                .into_iter()
                .enumerate()
                .map(|(i, o)| {
                    assert_eq!(o.object_id, i);
                    (o.class_id, o.pixels)
                })
                .collect();
            got != components_oracle(&grid)
        })
        .count()
}

/// Mismatches between `octant` and the atan2 oracle over `n` random pairs,
/// half with real coordinates and half on the integer lattice.
pub fn octant_mismatches(seed: u64, n: usize) -> usize {
    let mut rng = rng(seed);
    let mut bad = 0;
    let mut done = 0;
    while done < n {
        let lattice = done % 2 == 1;
        let mut draw = || {
            if lattice {
                rng.random_range(0..64) as f64
            } else {
                rng.random_range(0.0..64.0)
            }
        };
        let (a, b) = ((draw(), draw()), (draw(), draw()));
        if a == b {
            continue;
        }
        let got = scenecheck::relations::octant(
            scenecheck::Centroid::new(a.0, a.1),
            scenecheck::Centroid::new(b.0, b.1),
        )
        .unwrap();
        bad += usize::from(got != octant_oracle(a, b));
        done += 1;
    }
    bad
}

/// Mismatches between `contact` and the all-pairs oracle over `n` random blob
/// pairs placed close enough to touch some of the time. Also returns how many
/// pairs touch and how many were compared.
pub fn contact_mismatches(seed: u64, n: usize) -> (usize, usize, usize) {
    let mut rng = rng(seed);
    let (mut bad, mut touching, mut total) = (0, 0, 0);
    while total < n {
        let a = random_blob(&mut rng, (10, 10), 12, 40);
        let origin = (rng.random_range(0..24), rng.random_range(0..24));
        let b: Vec<Pixel> = random_blob(&mut rng, origin, 12, 40)
            .into_iter()
            .filter(|p| !a.contains(p))
            .collect();
        if b.is_empty() {
            continue;
        }
        let grid = grid_with(40, 40, &[(1, &a), (2, &b)], 2);
        let oa = scenecheck::SceneObject::from_pixels(0, 1, a.clone());
        let ob = scenecheck::SceneObject::from_pixels(1, 2, b.clone());
        let expected = contact_oracle(&a, &b);
        bad += usize::from(scenecheck::relations::contact(&grid, &oa, &ob) != expected);
        touching += usize::from(expected);
        total += 1;
    }
    (bad, touching, total)
}

pub fn histogram(pixels: &[Pixel], h: usize, w: usize) -> ShapeHistogram {
    let grid = grid_with(h, w, &[(1, pixels)], 1);
    let objects = extract_objects::<f64>(&grid, 1);
    assert_eq!(objects.len(), 1);
    shape_histogram(&grid, &objects[0], DEFAULT_SHAPE_SAMPLES, DEFAULT_SHAPE_BINS)
}

pub fn upscale(pixels: &[Pixel]) -> Vec<Pixel> {
    pixels
        .iter()
        .flat_map(|&(r, c)| [(2 * r, 2 * c), (2 * r, 2 * c + 1), (2 * r + 1, 2 * c), (2 * r + 1, 2 * c + 1)])
        .collect()
}

/// Union of a few overlapping ellipses, shifted to touch the origin.
pub fn smooth_blob(rng: &mut impl rand::Rng, span: usize) -> Vec<Pixel> {
    use rand::RngExt;
    let mut set = std::collections::BTreeSet::new();
    let k = rng.random_range(1..4);
    let c0 = span as f64 / 2.0;
    for _ in 0..k {
        let (cr, cc) = (c0 + rng.random_range(-3.0..3.0), c0 + rng.random_range(-3.0..3.0));
        let (a, b) = (rng.random_range(3.0..c0 - 3.0), rng.random_range(3.0..c0 - 3.0));
        for r in 0..span {
            for c in 0..span {
                let (y, x) = ((r as f64 + 0.5 - cr) / a, (c as f64 + 0.5 - cc) / b);
                if x * x + y * y <= 1.0 {
                    set.insert((r, c));
                }
            }
        }
    }
    set.into_iter().collect()
}

pub fn max_upscale_l1(seed: u64, n: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..n {
        let blob = if i % 2 == 0 {
            smooth_blob(&mut rng, 24)
        } else {
            random_blob(&mut rng, (0, 0), 16, 80)
        };
        let d = histogram(&blob, 24, 24).l1_distance(&histogram(&upscale(&blob), 48, 48));
        worst = worst.max(d);
    }
    worst
}

/// A generated corpus split into train and val grids.
pub struct World {
    pub corpus: scenecheck::corpus::synth::SyntheticCorpus,
    pub train: Vec<LabelGrid>,
    pub val: Vec<LabelGrid>,
}

pub fn world(seed: u64, images_per_context: usize) -> World {
    let cfg = scenecheck::corpus::synth::SyntheticConfig {
        images_per_context,
        seed,
        ..Default::default()
    };
    let corpus = scenecheck::corpus::synth::generate(&cfg).unwrap();
    let by_id: BTreeMap<&str, &LabelGrid> = corpus.grids.iter().map(|g| (g.image_id(), g)).collect();
    let pick = |ids: &[String]| ids.iter().map(|id| by_id[id.as_str()].clone()).collect::<Vec<_>>();
    let train = pick(&corpus.splits.train);
    let val = pick(&corpus.splits.val);
    World { corpus, train, val }
}

pub fn train_world(w: &World, context: Option<&str>, seed: u64) -> scenecheck::VerifierRegistry {
    scenecheck::verifier::train_registry(
        &w.train,
        &w.corpus.attributes,
        context,
        &scenecheck::TrainingConfig::default(),
        seed,
    )
    .unwrap()
}

/// Attribute ranking over the train split of a generated corpus.
pub fn context_ranking(w: &World) -> scenecheck::ContextSelectionReport {
    let labels: BTreeMap<String, Vec<u32>> = w
        .train
        .iter()
        .map(|g| {
            let classes = extract_objects::<f64>(g, scenecheck::DEFAULT_MIN_AREA).iter().map(|o| o.class_id).collect();
            (g.image_id().to_string(), classes)
        })
        .collect();
    scenecheck::context::score_attributes(&w.corpus.attributes, &labels, Default::default()).unwrap()
}

/// Trains context and global registries and evaluates both on the val split.
pub struct Experiment {
    pub global_only: scenecheck::experiment::RunReport,
    pub with_context: scenecheck::experiment::RunReport,
}

pub fn run_experiment(w: &World, seed: u64) -> Experiment {
    let eval = |reg: &scenecheck::VerifierRegistry| {
        scenecheck::experiment::evaluate(reg, &w.val, &w.corpus.attributes, Some("location"), seed).unwrap()
    };
    Experiment {
        global_only: eval(&train_world(w, None, seed)),
        with_context: eval(&train_world(w, Some("location"), seed)),
    }
}

/// 200 points on either side of a random hyperplane, at least 0.5 away from it.
pub fn separable(seed: u64) -> (Vec<scenecheck::FeatureVector>, Vec<scenecheck::Label>) {
    let mut rng = rng(seed);
    let w: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    while xs.len() < 200 {
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / norm - 0.3;
        if m.abs() < 0.5 {
            continue;
        }
        ys.push(if m > 0.0 { scenecheck::Label::Contradiction } else { scenecheck::Label::Valid });
        xs.push(scenecheck::verifier::FeatureVector(x));
    }
    (xs, ys)
}

pub fn separable_training_accuracy(seed: u64) -> f64 {
    let (xs, ys) = separable(seed);
    let model = scenecheck::verifier::train_linear(&xs, &ys, scenecheck::Hyperparams::default(), seed, "test").unwrap();
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| model.predict(x).unwrap() == y)
        .count();
    correct as f64 / xs.len() as f64
}
