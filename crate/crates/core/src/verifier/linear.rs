//! Linear contradiction detector: L2-regularized hinge loss minimized by
//! plain SGD over standardized features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MIN_STD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.01,
            epochs: 50,
            l2_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Valid,
    Contradiction,
}

impl Label {
    fn sign<F: Scalar>(self) -> F {
        match self {
            Label::Contradiction => F::one(),
            Label::Valid => -F::one(),
        }
    }

    pub fn from_margin<F: Scalar>(margin: F) -> Label {
        if margin > F::zero() {
            Label::Contradiction
        } else {
            Label::Valid
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_pos: usize,
    pub n_neg: usize,
    pub context: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LinearModel<F> {
    pub weights: Vec<F>,
    pub bias: F,
    pub feature_means: Vec<F>,
    pub feature_stds: Vec<F>,
    pub hyperparams: Hyperparams,
    pub training_meta: TrainingMeta,
}

impl<F: Scalar> LinearModel<F> {
    /// Zero weights and bias over an identity standardization.
    pub fn null(dim: usize) -> Self {
        LinearModel {
            weights: vec![F::zero(); dim],
            bias: F::zero(),
            feature_means: vec![F::zero(); dim],
            feature_stds: vec![F::one(); dim],
            hyperparams: Hyperparams::default(),
            training_meta: TrainingMeta {
                n_pos: 0,
                n_neg: 0,
                context: "null".into(),
                seed: 0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn standardize(&self, fv: &FeatureVector<F>) -> Result<Vec<F>> {
        if fv.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: fv.len(),
            });
        }
        Ok(fv
            .0
            .iter()
            .zip(self.feature_means.iter().zip(&self.feature_stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect())
    }

    /// `w · standardize(fv) + b`. Positive means contradiction.
    pub fn score(&self, fv: &FeatureVector<F>) -> Result<F> {
        let z = self.standardize(fv)?;
        Ok(dot(&self.weights, &z) + self.bias)
    }

    pub fn predict(&self, fv: &FeatureVector<F>) -> Result<Label> {
        self.score(fv).map(Label::from_margin)
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Fits a linear model. Shuffling is seeded, so identical inputs give
/// bit-identical models.
pub fn train_linear<F: Scalar>(
    features: &[FeatureVector<F>],
    labels: &[Label],
    hyperparams: Hyperparams,
    seed: u64,
    context: &str,
) -> Result<LinearModel<F>> {
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Contradiction).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateTraining(format!(
            "need both labels, got {n_pos} contradiction and {n_neg} valid examples"
        )));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: bad.len(),
        });
    }

    let n = F::from_index(features.len());
    let mut means = vec![F::zero(); dim];
    for f in features {
        for (m, &x) in means.iter_mut().zip(&f.0) {
            *m = *m + x;
        }
    }
    for m in &mut means {
        *m = *m / n;
    }
    let mut stds = vec![F::zero(); dim];
    for f in features {
        for ((s, &x), &m) in stds.iter_mut().zip(&f.0).zip(&means) {
            *s = *s + (x - m) * (x - m);
        }
    }
    for s in &mut stds {
        let sd = (*s / n).sqrt();
        *s = if sd < F::lit(MIN_STD) { F::one() } else { sd };
    }

    let mut model = LinearModel {
        weights: vec![F::zero(); dim],
        bias: F::zero(),
        feature_means: means,
        feature_stds: stds,
        hyperparams,
        training_meta: TrainingMeta {
            n_pos,
            n_neg,
            context: context.to_string(),
            seed,
        },
    };
    let data: Vec<(Vec<F>, F)> = features
        .iter()
        .zip(labels)
        .map(|(f, &l)| (model.standardize(f).expect("dimension checked"), l.sign()))
        .collect();

    let lr = F::lit(hyperparams.learning_rate);
    let shrink = F::one() - lr * F::lit(hyperparams.l2_lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..hyperparams.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let margin = *y * (dot(&model.weights, x) + model.bias);
            for w in &mut model.weights {
                *w = *w * shrink;
            }
            if margin < F::one() {
                for (w, &xi) in model.weights.iter_mut().zip(x) {
                    *w = *w + lr * *y * xi;
                }
                model.bias = model.bias + lr * *y;
            }
        }
    }
    Ok(model)
}
