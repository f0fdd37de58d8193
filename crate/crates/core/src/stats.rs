//! Co-occurrence statistics over class pairs.
//!
//! [`StatsBuilder`] holds only integer counts, so accumulation is associative
//! and commutative bit-for-bit: any image order or shard partition merged with
//! [`StatsBuilder::merge`] gives the same builder. Size log-ratios are stored
//! as fixed-point integers with [`SIZE_FRACTION_BITS`] fractional bits.
//! [`StatsBuilder::finalize`] turns counts into Laplace-smoothed tables.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelgrid::SceneObject;
use crate::relations::{Octant, PairRelation, Proximity};
use crate::scalar::Scalar;

pub const STATS_SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Lower bound on the per-pair size standard deviation.
pub const SIZE_STD_FLOOR: f64 = 0.1;
/// Size spread assumed for pairs never observed together.
pub const SIZE_STD_PRIOR: f64 = 1.0;
pub const SIZE_FRACTION_BITS: u32 = 32;

const N_OCTANTS: usize = 8;
const N_PROXIMITY: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeMoments {
    pub n: u64,
    /// Σ q where q = round(x · 2^SIZE_FRACTION_BITS).
    #[serde(with = "i128_text")]
    pub sum: i128,
    #[serde(with = "i128_text")]
    pub sum_sq: i128,
}

// JSON numbers beyond 64 bits do not survive generic JSON values, so the
// fixed-point sums are stored as decimal strings.
mod i128_text {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &i128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i128, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

impl SizeMoments {
    fn push(&mut self, x: f64) {
        let q = (x * (1u64 << SIZE_FRACTION_BITS) as f64).round() as i64 as i128;
        self.n += 1;
        self.sum += q;
        self.sum_sq += q * q;
    }

    fn add(&mut self, other: &SizeMoments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Population mean and standard deviation (unfloored) of the stored values.
    pub fn mean_std(&self) -> Option<(f64, f64)> {
        if self.n == 0 {
            return None;
        }
        let scale = (1u64 << SIZE_FRACTION_BITS) as f64;
        let n = self.n as i128;
        let mean = self.sum as f64 / self.n as f64 / scale;
        // n·Σq² − (Σq)² is exact when it fits; fall back to floating point otherwise.
        let var = match n
            .checked_mul(self.sum_sq)
            .zip(self.sum.checked_mul(self.sum))
            .and_then(|(a, b)| a.checked_sub(b))
        {
            Some(num) => num.max(0) as f64 / (self.n as f64 * self.n as f64) / (scale * scale),
            None => {
                let m = self.sum as f64 / self.n as f64;
                (self.sum_sq as f64 / self.n as f64 - m * m).max(0.0) / (scale * scale)
            }
        };
        Some((mean, var.sqrt()))
    }
}

/// Which relation channel to look up, with the observed category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Presence,
    Position(Octant),
    Proximity(Proximity),
    Distance(usize),
}

/// Raw co-occurrence counts for a fixed class universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsBuilder {
    classes: Vec<u32>,
    k_dist: usize,
    images: u64,
    class_images: Vec<u64>,
    /// n×n, symmetric. The diagonal counts images holding ≥ 2 objects of a class.
    presence: Vec<u64>,
    position: Vec<u64>,
    proximity: Vec<u64>,
    distance: Vec<u64>,
    size: Vec<SizeMoments>,
}

impl StatsBuilder {
    pub fn new(classes: impl IntoIterator<Item = u32>, k_dist: usize) -> Self {
        let classes: Vec<u32> = classes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let n = classes.len();
        StatsBuilder {
            k_dist,
            images: 0,
            class_images: vec![0; n],
            presence: vec![0; n * n],
            position: vec![0; n * n * N_OCTANTS],
            proximity: vec![0; n * n * N_PROXIMITY],
            distance: vec![0; n * n * k_dist],
            size: vec![SizeMoments::default(); n * n],
            classes,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn k_dist(&self) -> usize {
        self.k_dist
    }

    pub fn images(&self) -> u64 {
        self.images
    }

    pub fn class_index(&self, class: u32) -> Result<usize> {
        self.classes
            .binary_search(&class)
            .map_err(|_| Error::UnknownClass(class))
    }

    fn pair(&self, a: usize, b: usize) -> usize {
        a * self.classes.len() + b
    }

    pub fn class_images(&self, class: u32) -> Result<u64> {
        Ok(self.class_images[self.class_index(class)?])
    }

    pub fn presence_count(&self, a: u32, b: u32) -> Result<u64> {
        let p = self.pair(self.class_index(a)?, self.class_index(b)?);
        Ok(self.presence[p])
    }

    pub fn position_counts(&self, a: u32, b: u32) -> Result<&[u64]> {
        let p = self.pair(self.class_index(a)?, self.class_index(b)?);
        Ok(&self.position[p * N_OCTANTS..(p + 1) * N_OCTANTS])
    }

    pub fn proximity_counts(&self, a: u32, b: u32) -> Result<&[u64]> {
        let p = self.pair(self.class_index(a)?, self.class_index(b)?);
        Ok(&self.proximity[p * N_PROXIMITY..(p + 1) * N_PROXIMITY])
    }

    pub fn distance_counts(&self, a: u32, b: u32) -> Result<&[u64]> {
        let p = self.pair(self.class_index(a)?, self.class_index(b)?);
        Ok(&self.distance[p * self.k_dist..(p + 1) * self.k_dist])
    }

    pub fn size_moments(&self, a: u32, b: u32) -> Result<SizeMoments> {
        let p = self.pair(self.class_index(a)?, self.class_index(b)?);
        Ok(self.size[p])
    }

    /// Adds one image. `relations` should cover every ordered object pair so
    /// that the positional tables stay dual under pair reversal.
    pub fn accumulate<F: Scalar>(
        &mut self,
        objects: &[SceneObject<F>],
        relations: &[PairRelation<F>],
    ) -> Result<()> {
        let mut per_class = vec![0usize; self.classes.len()];
        for o in objects {
            per_class[self.class_index(o.class_id)?] += 1;
        }
        for r in relations {
            for c in [r.a_class, r.b_class] {
                if per_class[self.class_index(c)?] == 0 {
                    return Err(Error::Consistency(format!(
                        "relation references class {c} absent from the image objects"
                    )));
                }
            }
            if r.rdist_bin >= self.k_dist {
                return Err(Error::Consistency(format!(
                    "distance bin {} outside 0..{}",
                    r.rdist_bin, self.k_dist
                )));
            }
        }

        self.images += 1;
        let present: Vec<usize> = (0..per_class.len()).filter(|&i| per_class[i] > 0).collect();
        for &i in &present {
            self.class_images[i] += 1;
            if per_class[i] >= 2 {
                let p = self.pair(i, i);
                self.presence[p] += 1;
            }
        }
        for (x, &i) in present.iter().enumerate() {
            for &j in &present[x + 1..] {
                let (p, q) = (self.pair(i, j), self.pair(j, i));
                self.presence[p] += 1;
                self.presence[q] += 1;
            }
        }

        for r in relations {
            let p = self.pair(self.class_index(r.a_class)?, self.class_index(r.b_class)?);
            self.position[p * N_OCTANTS + r.rpos.index()] += 1;
            self.proximity[p * N_PROXIMITY + r.rprox.index()] += 1;
            self.distance[p * self.k_dist + r.rdist_bin] += 1;
            self.size[p].push(r.rsize.as_f64());
        }
        Ok(())
    }

    /// Element-wise sum of two builders over the same class universe.
    pub fn merge(&self, other: &StatsBuilder) -> Result<StatsBuilder> {
        if self.classes != other.classes || self.k_dist != other.k_dist {
            return Err(Error::Schema(format!(
                "cannot merge builders: classes {:?}/k_dist {} vs classes {:?}/k_dist {}",
                self.classes, self.k_dist, other.classes, other.k_dist
            )));
        }
        let add = |x: &[u64], y: &[u64]| x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>();
        let mut size = self.size.clone();
        for (s, o) in size.iter_mut().zip(&other.size) {
            s.add(o);
        }
        Ok(StatsBuilder {
            classes: self.classes.clone(),
            k_dist: self.k_dist,
            images: self.images + other.images,
            class_images: add(&self.class_images, &other.class_images),
            presence: add(&self.presence, &other.presence),
            position: add(&self.position, &other.position),
            proximity: add(&self.proximity, &other.proximity),
            distance: add(&self.distance, &other.distance),
            size,
        })
    }

    pub fn finalize<F: Scalar>(&self, alpha: F) -> Result<CooccurrenceModel<F>> {
        if self.images == 0 {
            return Err(Error::EmptyCorpus("statistics builder holds no images".into()));
        }
        if !alpha.is_finite() || alpha <= F::zero() {
            return Err(Error::Schema(format!("smoothing alpha must be positive, got {alpha}")));
        }
        let smooth = |counts: &[u64], arity: usize| -> Vec<F> {
            counts
                .chunks(arity)
                .flat_map(|row| {
                    let total: u64 = row.iter().sum();
                    let denom = F::from_count(total) + alpha * F::from_index(arity);
                    row.iter().map(move |&c| (F::from_count(c) + alpha) / denom)
                })
                .collect()
        };
        let two = F::lit(2.0);
        let denom = F::from_count(self.images) + two * alpha;
        let presence = self
            .presence
            .iter()
            .map(|&c| (F::from_count(c) + alpha) / denom)
            .collect();
        let floor = F::lit(SIZE_STD_FLOOR);
        let (size_mean, size_std) = self
            .size
            .iter()
            .map(|m| match m.mean_std() {
                Some((mean, std)) => (F::lit(mean), F::lit(std).max(floor)),
                None => (F::zero(), F::lit(SIZE_STD_PRIOR)),
            })
            .unzip();
        Ok(CooccurrenceModel {
            alpha,
            presence,
            position: smooth(&self.position, N_OCTANTS),
            proximity: smooth(&self.proximity, N_PROXIMITY),
            distance: smooth(&self.distance, self.k_dist),
            size_mean,
            size_std,
            counts: self.clone(),
        })
    }
}

/// Smoothed co-occurrence tables. Immutable once finalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceModel<F> {
    alpha: F,
    counts: StatsBuilder,
    presence: Vec<F>,
    position: Vec<F>,
    proximity: Vec<F>,
    distance: Vec<F>,
    size_mean: Vec<F>,
    size_std: Vec<F>,
}

impl<F: Scalar> CooccurrenceModel<F> {
    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn counts(&self) -> &StatsBuilder {
        &self.counts
    }

    pub fn classes(&self) -> &[u32] {
        &self.counts.classes
    }

    pub fn k_dist(&self) -> usize {
        self.counts.k_dist
    }

    pub fn images(&self) -> u64 {
        self.counts.images
    }

    fn pair(&self, a: u32, b: u32) -> Result<usize> {
        Ok(self
            .counts
            .pair(self.counts.class_index(a)?, self.counts.class_index(b)?))
    }

    /// Smoothed probability of the observed category for the ordered pair (a, b).
    pub fn query(&self, a: u32, b: u32, obs: Observation) -> Result<F> {
        let p = self.pair(a, b)?;
        Ok(match obs {
            Observation::Presence => self.presence[p],
            Observation::Position(o) => self.position[p * N_OCTANTS + o.index()],
            Observation::Proximity(l) => self.proximity[p * N_PROXIMITY + l.index()],
            Observation::Distance(bin) => {
                if bin >= self.k_dist() {
                    return Err(Error::Dimension {
                        expected: self.k_dist(),
                        got: bin + 1,
                    });
                }
                self.distance[p * self.k_dist() + bin]
            }
        })
    }

    /// `(log_ratio - mean) / std` for the ordered pair's size log-ratio.
    pub fn query_size_zscore(&self, a: u32, b: u32, log_ratio: F) -> Result<F> {
        let p = self.pair(a, b)?;
        Ok((log_ratio - self.size_mean[p]) / self.size_std[p])
    }

    pub fn size_mean_std(&self, a: u32, b: u32) -> Result<(F, F)> {
        let p = self.pair(a, b)?;
        Ok((self.size_mean[p], self.size_std[p]))
    }

    /// Full categorical distribution for a channel, e.g. all eight octants.
    pub fn distribution(&self, a: u32, b: u32, channel: Channel) -> Result<&[F]> {
        let p = self.pair(a, b)?;
        let (table, arity) = match channel {
            Channel::Position => (&self.position, N_OCTANTS),
            Channel::Proximity => (&self.proximity, N_PROXIMITY),
            Channel::Distance => (&self.distance, self.k_dist()),
        };
        Ok(&table[p * arity..(p + 1) * arity])
    }

    /// Smoothed P(`target` present | `given` present). For `target == given`
    /// this is the probability of a second instance.
    pub fn conditional_presence(&self, given: u32, target: u32) -> Result<F> {
        let g = self.counts.class_index(given)?;
        let p = self.pair(given, target)?;
        let two = F::lit(2.0);
        Ok((F::from_count(self.counts.presence[p]) + self.alpha)
            / (F::from_count(self.counts.class_images[g]) + two * self.alpha))
    }

    pub fn to_document(&self) -> StatsDocument<F> {
        let c = &self.counts;
        let n = c.classes.len();
        let grid2 = |v: &[u64]| -> Vec<Vec<u64>> { v.chunks(n.max(1)).map(<[u64]>::to_vec).collect() };
        let grid3 = |v: &[u64], k: usize| -> Vec<Vec<Vec<u64>>> {
            v.chunks((n * k).max(1))
                .map(|row| row.chunks(k).map(<[u64]>::to_vec).collect())
                .collect()
        };
        let fgrid2 = |v: &[F]| -> Vec<Vec<F>> { v.chunks(n.max(1)).map(<[F]>::to_vec).collect() };
        let fgrid3 = |v: &[F], k: usize| -> Vec<Vec<Vec<F>>> {
            v.chunks((n * k).max(1))
                .map(|row| row.chunks(k).map(<[F]>::to_vec).collect())
                .collect()
        };
        StatsDocument {
            schema_version: STATS_SCHEMA_VERSION,
            alpha: self.alpha,
            k_dist: c.k_dist,
            classes: c.classes.clone(),
            images: c.images,
            counts: CountTables {
                class_images: c.class_images.clone(),
                presence: grid2(&c.presence),
                position: grid3(&c.position, N_OCTANTS),
                proximity: grid3(&c.proximity, N_PROXIMITY),
                distance: grid3(&c.distance, c.k_dist),
                size_moments: c
                    .size
                    .chunks(n.max(1))
                    .map(<[SizeMoments]>::to_vec)
                    .collect(),
            },
            tables: ProbabilityTables {
                presence: fgrid2(&self.presence),
                position: fgrid3(&self.position, N_OCTANTS),
                proximity: fgrid3(&self.proximity, N_PROXIMITY),
                distance: fgrid3(&self.distance, c.k_dist),
                size_mean: fgrid2(&self.size_mean),
                size_std: fgrid2(&self.size_std),
            },
        }
    }

    /// Rebuilds a model from its document. Probabilities are re-derived from
    /// the counts and must agree with the stored tables.
    pub fn from_document(doc: StatsDocument<F>) -> Result<Self> {
        if doc.schema_version != STATS_SCHEMA_VERSION {
            return Err(Error::Version {
                found: doc.schema_version,
                expected: STATS_SCHEMA_VERSION,
            });
        }
        let n = doc.classes.len();
        let k = doc.k_dist;
        let bad = |what: &str| Error::Format(format!("stats document: malformed {what} table"));
        let flat2 = |v: Vec<Vec<u64>>, what: &str| -> Result<Vec<u64>> {
            if v.len() != n || v.iter().any(|r| r.len() != n) {
                return Err(bad(what));
            }
            Ok(v.into_iter().flatten().collect())
        };
        let flat3 = |v: Vec<Vec<Vec<u64>>>, arity: usize, what: &str| -> Result<Vec<u64>> {
            if v.len() != n || v.iter().any(|r| r.len() != n || r.iter().any(|c| c.len() != arity)) {
                return Err(bad(what));
            }
            Ok(v.into_iter().flatten().flatten().collect())
        };
        let sorted = doc.classes.windows(2).all(|w| w[0] < w[1]);
        if !sorted || doc.counts.class_images.len() != n || k == 0 {
            return Err(bad("class"));
        }
        let size = doc.counts.size_moments;
        if size.len() != n || size.iter().any(|r| r.len() != n) {
            return Err(bad("size"));
        }
        let builder = StatsBuilder {
            classes: doc.classes,
            k_dist: k,
            images: doc.images,
            class_images: doc.counts.class_images,
            presence: flat2(doc.counts.presence, "presence")?,
            position: flat3(doc.counts.position, N_OCTANTS, "position")?,
            proximity: flat3(doc.counts.proximity, N_PROXIMITY, "proximity")?,
            distance: flat3(doc.counts.distance, k, "distance")?,
            size: size.into_iter().flatten().collect(),
        };
        let model = builder.finalize(doc.alpha)?;
        let tol = F::lit(1e-12);
        let close = |x: &[F], y: &[F]| x.len() == y.len() && x.iter().zip(y).all(|(&a, &b)| (a - b).abs() <= tol);
        let t = &doc.tables;
        let ok = close(&flat(&t.presence), &model.presence)
            && close(&flat3f(&t.position), &model.position)
            && close(&flat3f(&t.proximity), &model.proximity)
            && close(&flat3f(&t.distance), &model.distance)
            && close(&flat(&t.size_mean), &model.size_mean)
            && close(&flat(&t.size_std), &model.size_std);
        if !ok {
            return Err(Error::Format(
                "stats document: probability tables disagree with counts".into(),
            ));
        }
        Ok(model)
    }
}

fn flat<F: Copy>(v: &[Vec<F>]) -> Vec<F> {
    v.iter().flatten().copied().collect()
}

fn flat3f<F: Copy>(v: &[Vec<Vec<F>>]) -> Vec<F> {
    v.iter().flatten().flatten().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Position,
    Proximity,
    Distance,
}

/// Versioned JSON form of a [`CooccurrenceModel`]. Tables are nested
/// `[a][b][category]` arrays indexed by position in `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StatsDocument<F> {
    pub schema_version: u64,
    pub alpha: F,
    pub k_dist: usize,
    pub classes: Vec<u32>,
    pub images: u64,
    pub counts: CountTables,
    pub tables: ProbabilityTables<F>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTables {
    pub class_images: Vec<u64>,
    pub presence: Vec<Vec<u64>>,
    pub position: Vec<Vec<Vec<u64>>>,
    pub proximity: Vec<Vec<Vec<u64>>>,
    pub distance: Vec<Vec<Vec<u64>>>,
    pub size_moments: Vec<Vec<SizeMoments>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ProbabilityTables<F> {
    pub presence: Vec<Vec<F>>,
    pub position: Vec<Vec<Vec<F>>>,
    pub proximity: Vec<Vec<Vec<F>>>,
    pub distance: Vec<Vec<Vec<F>>>,
    pub size_mean: Vec<Vec<F>>,
    pub size_std: Vec<Vec<F>>,
}
