//! Seeded synthetic scene corpora.
//!
//! Each context owns a pool of object groups. A group is an anchor class plus
//! dependents placed relative to it (on top, beside, or nearby) with sizes
//! drawn from per-pair lognormals. A scene samples a few groups of one
//! context, so the context fixes which classes co-occur and how they relate.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, Splits};
use crate::context::{AttributeSchema, AttributeTable};
use crate::error::{Error, Result};
use crate::labelgrid::{ClassMap, LabelGrid, Pixel};
use crate::seed::rng_for;

pub const SYNTH_SCHEMA_VERSION: u64 = 1;

const SCENE_ATTEMPTS: usize = 50;
const GROUP_ATTEMPTS: usize = 30;
const DEPENDENT_ATTEMPTS: usize = 10;
const MIN_SIDE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub shape: ShapeKind,
    /// Inclusive `[min, max]` bounding-box height when placed as an anchor.
    pub height: [usize; 2],
    pub width: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Directly above the anchor, touching it.
    On,
    /// Left or right of the anchor, touching it, bottoms roughly aligned.
    Beside,
    /// Separated from the anchor by a small background gap.
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependentSpec {
    pub class: String,
    pub placement: Placement,
    /// Probability that the dependent is drawn when its group is.
    pub probability: f64,
    /// Mean and spread of ln(dependent area / anchor area).
    pub size_log_mean: f64,
    pub size_log_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub anchor: String,
    #[serde(default)]
    pub dependents: Vec<DependentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub groups: Vec<GroupSpec>,
    /// Inclusive `[min, max]` number of groups per scene.
    pub groups_per_scene: [usize; 2],
}

impl ContextSpec {
    /// Every class this context can produce.
    pub fn pool(&self) -> BTreeSet<&str> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::once(g.anchor.as_str()).chain(g.dependents.iter().map(|d| d.class.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub schema_version: u64,
    /// Overridden by the command line `--seed`.
    #[serde(default)]
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub images_per_context: usize,
    pub val_fraction: f64,
    pub min_objects: usize,
    /// Attribute that records the generating context.
    pub context_attribute: String,
    /// Attributes with uniformly random values, independent of the scene.
    pub noise_attributes: BTreeMap<String, Vec<String>>,
    /// Class ids are 1-based positions in this list.
    pub classes: Vec<ClassSpec>,
    pub contexts: BTreeMap<String, ContextSpec>,
}

fn class(name: &str, shape: ShapeKind, height: [usize; 2], width: [usize; 2]) -> ClassSpec {
    ClassSpec {
        name: name.into(),
        shape,
        height,
        width,
    }
}

fn dep(class: &str, placement: Placement, probability: f64, size_log_mean: f64) -> DependentSpec {
    DependentSpec {
        class: class.into(),
        placement,
        probability,
        size_log_mean,
        size_log_std: 0.2,
    }
}

fn group(anchor: &str, dependents: Vec<DependentSpec>) -> GroupSpec {
    GroupSpec {
        anchor: anchor.into(),
        dependents,
    }
}

impl Default for SyntheticConfig {
    /// Two contexts, `inside` and `outside`, with disjoint class pools.
    fn default() -> Self {
        use Placement::*;
        use ShapeKind::*;
        let classes = vec![
            class("sofa", Rect, [8, 11], [16, 22]),
            class("cat", Ellipse, [6, 8], [7, 10]),
            class("cabinet", Rect, [10, 14], [10, 14]),
            class("tv", Rect, [7, 9], [10, 13]),
            class("table", Rect, [6, 8], [14, 18]),
            class("lamp", Ellipse, [7, 10], [6, 7]),
            class("chair", Rect, [9, 12], [7, 9]),
            class("plant", Ellipse, [8, 12], [6, 9]),
            class("horse", Rect, [10, 13], [16, 20]),
            class("person", Rect, [12, 16], [6, 8]),
            class("tree", Ellipse, [14, 20], [10, 14]),
            class("bird", Ellipse, [6, 7], [6, 8]),
            class("bench", Rect, [6, 8], [14, 18]),
            class("dog", Ellipse, [7, 9], [9, 12]),
            class("car", Rect, [8, 10], [16, 20]),
            class("cow", Ellipse, [9, 12], [14, 18]),
        ];
        let inside = ContextSpec {
            groups: vec![
                group("sofa", vec![dep("cat", On, 0.9, -1.2)]),
                group("cabinet", vec![dep("tv", On, 0.95, -0.6)]),
                group("table", vec![dep("lamp", On, 0.9, -1.0)]),
                group("chair", vec![dep("plant", Beside, 0.85, -0.2)]),
            ],
            groups_per_scene: [3, 3],
        };
        let outside = ContextSpec {
            groups: vec![
                group("horse", vec![dep("person", On, 0.95, -0.8)]),
                group("tree", vec![dep("bird", On, 0.8, -1.6)]),
                group("bench", vec![dep("dog", Beside, 0.85, -0.3)]),
                group("car", vec![dep("cow", Near, 0.7, 0.0)]),
            ],
            groups_per_scene: [2, 2],
        };
        let binary = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
        SyntheticConfig {
            schema_version: SYNTH_SCHEMA_VERSION,
            seed: 0,
            height: 64,
            width: 64,
            images_per_context: 400,
            val_fraction: 0.25,
            min_objects: 3,
            context_attribute: "location".into(),
            noise_attributes: [
                ("objects".to_string(), binary("single", "multiple")),
                ("lighting".to_string(), binary("soft", "hard")),
                ("framing".to_string(), binary("full", "partial")),
            ]
            .into_iter()
            .collect(),
            classes,
            contexts: [("inside".to_string(), inside), ("outside".to_string(), outside)]
                .into_iter()
                .collect(),
        }
    }
}

impl SyntheticConfig {
    pub fn class_map(&self) -> ClassMap {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u32 + 1, c.name.clone()))
            .collect()
    }

    pub fn schema(&self) -> AttributeSchema {
        let mut schema = self.noise_attributes.clone();
        schema.insert(self.context_attribute.clone(), self.contexts.keys().cloned().collect());
        AttributeSchema(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(format!("synthetic config: {m}")));
        if self.schema_version != SYNTH_SCHEMA_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: SYNTH_SCHEMA_VERSION,
            });
        }
        if self.height < 16 || self.width < 16 {
            return bad("grid must be at least 16x16".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if self.contexts.is_empty() {
            return bad("no contexts".into());
        }
        if self.noise_attributes.contains_key(&self.context_attribute) {
            return bad("context attribute also listed as noise".into());
        }
        let names: BTreeSet<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.classes.len() {
            return bad("duplicate class names".into());
        }
        for c in &self.classes {
            if c.height[0] > c.height[1] || c.width[0] > c.width[1] || c.height[0] < MIN_SIDE || c.width[0] < MIN_SIDE {
                return bad(format!("class {}: invalid size range", c.name));
            }
        }
        for (name, ctx) in &self.contexts {
            let [lo, hi] = ctx.groups_per_scene;
            if ctx.groups.is_empty() || lo == 0 || lo > hi || hi > ctx.groups.len() {
                return bad(format!("context {name}: invalid groups_per_scene or empty pool"));
            }
            let mut seen = BTreeSet::new();
            for g in &ctx.groups {
                let members = std::iter::once(g.anchor.as_str()).chain(g.dependents.iter().map(|d| d.class.as_str()));
                for m in members {
                    if !names.contains(m) {
                        return bad(format!("context {name}: unknown class {m}"));
                    }
                    if !seen.insert(m) {
                        return bad(format!("context {name}: class {m} appears in two groups"));
                    }
                }
                for d in &g.dependents {
                    if !(0.0..=1.0).contains(&d.probability) || d.size_log_std < 0.0 {
                        return bad(format!("context {name}: bad dependent {}", d.class));
                    }
                }
            }
        }
        Ok(())
    }
}

/// In-memory result of [`generate`].
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub class_map: Arc<ClassMap>,
    pub attributes: AttributeTable,
    pub splits: Splits,
    pub grids: Vec<LabelGrid>,
}

/// Generates every scene of the corpus. Each image draws from its own seeded
/// stream, so the result is independent of scheduling.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let class_map = Arc::new(config.class_map());
    let ids: BTreeMap<&str, u32> = config
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i as u32 + 1))
        .collect();

    let n = config.images_per_context;
    let n_val = (n as f64 * config.val_fraction).round() as usize;
    let jobs: Vec<(&str, &ContextSpec, usize)> = config
        .contexts
        .iter()
        .flat_map(|(name, ctx)| (0..n).map(move |i| (name.as_str(), ctx, i)))
        .collect();

    let scenes: Vec<(String, LabelGrid, BTreeMap<String, String>)> = jobs
        .par_iter()
        .map(|&(name, ctx, i)| {
            let image_id = format!("{name}_{i:05}");
            let mut rng = rng_for(config.seed, &format!("synth/{image_id}"));
            let cells = generate_scene(config, ctx, &ids, &mut rng)
                .map_err(|e| Error::Placement(format!("{image_id}: {e}")))?;
            let grid = LabelGrid::new(&image_id, config.height, config.width, cells, class_map.clone())?;
            let mut attrs = BTreeMap::new();
            attrs.insert(config.context_attribute.clone(), name.to_string());
            for (attr, values) in &config.noise_attributes {
                attrs.insert(attr.clone(), values[rng.random_range(0..values.len())].clone());
            }
            Ok((image_id, grid, attrs))
        })
        .collect::<Result<_>>()?;

    let mut attributes = AttributeTable::new(config.schema());
    let mut splits = Splits::default();
    let mut grids = Vec::with_capacity(scenes.len());
    for ((id, grid, attrs), &(_, _, i)) in scenes.into_iter().zip(&jobs) {
        attributes.insert(id.clone(), attrs)?;
        if i < n - n_val {
            splits.train.push(id);
        } else {
            splits.val.push(id);
        }
        grids.push(grid);
    }
    Ok(SyntheticCorpus {
        class_map,
        attributes,
        splits,
        grids,
    })
}

/// Generates a corpus and writes it under `out_dir`.
pub fn synth_corpus(config: &SyntheticConfig, out_dir: &Path) -> Result<(Corpus, AttributeTable)> {
    let s = generate(config)?;
    let corpus = Corpus::write(out_dir, &s.class_map, &s.attributes, &s.splits, &s.grids)?;
    Ok((corpus, s.attributes))
}

struct Canvas {
    height: usize,
    width: usize,
    /// Index of the owning object, `usize::MAX` when empty.
    owner: Vec<usize>,
    objects: Vec<(u32, Vec<Pixel>)>,
}

#[derive(Clone, Copy)]
struct Rect {
    top: i64,
    left: i64,
    h: usize,
    w: usize,
}

impl Canvas {
    fn new(height: usize, width: usize) -> Self {
        Canvas {
            height,
            width,
            owner: vec![usize::MAX; height * width],
            objects: Vec::new(),
        }
    }

    fn raster(&self, shape: ShapeKind, r: Rect) -> Option<Vec<Pixel>> {
        if r.top < 0
            || r.left < 0
            || r.top as usize + r.h > self.height
            || r.left as usize + r.w > self.width
        {
            return None;
        }
        let (top, left) = (r.top as usize, r.left as usize);
        let (hh, hw) = (r.h as f64 / 2.0, r.w as f64 / 2.0);
        let mut px = Vec::with_capacity(r.h * r.w);
        for dr in 0..r.h {
            for dc in 0..r.w {
                let inside = match shape {
                    ShapeKind::Rect => true,
                    ShapeKind::Ellipse => {
                        let y = (dr as f64 + 0.5 - hh) / hh;
                        let x = (dc as f64 + 0.5 - hw) / hw;
                        x * x + y * y <= 1.0
                    }
                };
                if inside {
                    px.push((top + dr, left + dc));
                }
            }
        }
        Some(px)
    }

    /// Free cells whose 8-neighbours belong to nobody except `partner`.
    fn fits(&self, pixels: &[Pixel], partner: Option<usize>) -> bool {
        pixels.iter().all(|&(r, c)| {
            if self.owner[r * self.width + c] != usize::MAX {
                return false;
            }
            self.neighbours(r, c).all(|o| o == usize::MAX || Some(o) == partner)
        })
    }

    fn touches(&self, pixels: &[Pixel], other: usize) -> bool {
        pixels.iter().any(|&(r, c)| self.neighbours(r, c).any(|o| o == other))
    }

    fn neighbours(&self, r: usize, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (h, w) = (self.height as i64, self.width as i64);
        (-1i64..=1)
            .flat_map(move |dr| (-1i64..=1).map(move |dc| (r as i64 + dr, c as i64 + dc)))
            .filter(move |&(nr, nc)| nr >= 0 && nc >= 0 && nr < h && nc < w)
            .map(move |(nr, nc)| self.owner[nr as usize * self.width + nc as usize])
    }

    fn commit(&mut self, class: u32, pixels: Vec<Pixel>) -> usize {
        let idx = self.objects.len();
        for &(r, c) in &pixels {
            self.owner[r * self.width + c] = idx;
        }
        self.objects.push((class, pixels));
        idx
    }

    fn rollback(&mut self, keep: usize) {
        while self.objects.len() > keep {
            let (_, px) = self.objects.pop().expect("len checked");
            for (r, c) in px {
                self.owner[r * self.width + c] = usize::MAX;
            }
        }
    }

    fn into_cells(self) -> Vec<u32> {
        let mut cells = vec![0u32; self.height * self.width];
        for (class, px) in &self.objects {
            for &(r, c) in px {
                cells[r * self.width + c] = *class;
            }
        }
        cells
    }
}

fn generate_scene(
    cfg: &SyntheticConfig,
    ctx: &ContextSpec,
    ids: &BTreeMap<&str, u32>,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<u32>, String> {
    let specs: BTreeMap<&str, &ClassSpec> = cfg.classes.iter().map(|c| (c.name.as_str(), c)).collect();
    'scene: for _ in 0..SCENE_ATTEMPTS {
        let [lo, hi] = ctx.groups_per_scene;
        let k = rng.random_range(lo..=hi);
        let chosen = sample(rng, ctx.groups.len(), k);
        let mut canvas = Canvas::new(cfg.height, cfg.width);
        for gi in chosen.iter() {
            if !place_group(&mut canvas, &ctx.groups[gi], &specs, ids, rng) {
                continue 'scene;
            }
        }
        if canvas.objects.len() >= cfg.min_objects {
            return Ok(canvas.into_cells());
        }
    }
    Err(format!("no valid placement after {SCENE_ATTEMPTS} attempts"))
}

fn place_group(
    canvas: &mut Canvas,
    g: &GroupSpec,
    specs: &BTreeMap<&str, &ClassSpec>,
    ids: &BTreeMap<&str, u32>,
    rng: &mut ChaCha8Rng,
) -> bool {
    let anchor_spec = specs[g.anchor.as_str()];
    let keep = canvas.objects.len();
    'attempt: for _ in 0..GROUP_ATTEMPTS {
        canvas.rollback(keep);
        let h = rng.random_range(anchor_spec.height[0]..=anchor_spec.height[1]);
        let w = rng.random_range(anchor_spec.width[0]..=anchor_spec.width[1]);
        if h > canvas.height || w > canvas.width {
            continue;
        }
        let rect = Rect {
            top: rng.random_range(0..=(canvas.height - h) as i64),
            left: rng.random_range(0..=(canvas.width - w) as i64),
            h,
            w,
        };
        let Some(px) = canvas.raster(anchor_spec.shape, rect) else {
            continue;
        };
        if !canvas.fits(&px, None) {
            continue;
        }
        let anchor = canvas.commit(ids[g.anchor.as_str()], px);
        for d in &g.dependents {
            if rng.random::<f64>() >= d.probability {
                continue;
            }
            if !place_dependent(canvas, anchor, rect, d, specs[d.class.as_str()], ids, rng) {
                continue 'attempt;
            }
        }
        return true;
    }
    canvas.rollback(keep);
    false
}

fn place_dependent(
    canvas: &mut Canvas,
    anchor: usize,
    a: Rect,
    d: &DependentSpec,
    spec: &ClassSpec,
    ids: &BTreeMap<&str, u32>,
    rng: &mut ChaCha8Rng,
) -> bool {
    let normal = Normal::new(d.size_log_mean, d.size_log_std).expect("validated spread");
    let max_side = canvas.height.min(canvas.width) / 2;
    let aspect = (spec.height[0] + spec.height[1]) as f64 / (spec.width[0] + spec.width[1]) as f64;
    for _ in 0..DEPENDENT_ATTEMPTS {
        let area = (a.h * a.w) as f64 * normal.sample(rng).exp();
        let h = ((area * aspect).sqrt().round() as usize).clamp(MIN_SIDE, max_side);
        let w = ((area / h as f64).round() as usize).clamp(MIN_SIDE, max_side);
        let (hi, wi) = (h as i64, w as i64);
        let rect = match d.placement {
            Placement::On => {
                let jitter = rng.random_range(-(wi / 4)..=wi / 4);
                Rect {
                    top: a.top - hi,
                    left: a.left + a.w as i64 / 2 - wi / 2 + jitter,
                    h,
                    w,
                }
            }
            Placement::Beside => {
                let left = if rng.random::<bool>() { a.left - wi } else { a.left + a.w as i64 };
                Rect {
                    top: a.top + a.h as i64 - hi + rng.random_range(-1..=1),
                    left,
                    h,
                    w,
                }
            }
            Placement::Near => {
                let gap = rng.random_range(2..=6i64);
                let (top, left) = match rng.random_range(0..4) {
                    0 => (a.top - hi - gap, a.left + rng.random_range(-(wi / 2)..=a.w as i64 / 2)),
                    1 => (a.top + a.h as i64 + gap, a.left + rng.random_range(-(wi / 2)..=a.w as i64 / 2)),
                    2 => (a.top + rng.random_range(-(hi / 2)..=a.h as i64 / 2), a.left - wi - gap),
                    _ => (a.top + rng.random_range(-(hi / 2)..=a.h as i64 / 2), a.left + a.w as i64 + gap),
                };
                Rect { top, left, h, w }
            }
        };
        let Some(px) = canvas.raster(spec.shape, rect) else {
            continue;
        };
        let touching = d.placement != Placement::Near;
        let partner = touching.then_some(anchor);
        if !canvas.fits(&px, partner) || (touching && !canvas.touches(&px, anchor)) {
            continue;
        }
        canvas.commit(ids[d.class.as_str()], px);
        return true;
    }
    false
}
