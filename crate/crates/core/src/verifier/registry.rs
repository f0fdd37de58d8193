//! Context dispatch, image-level aggregation and registry training.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{featurize_scene, ShapePrototypes};
use super::linear::{train_linear, Hyperparams, Label, LinearModel};
use crate::context::{partition_corpus, AttributeTable, PLACEHOLDER};
use crate::corpus::contradiction::generate_contradiction;
use crate::error::{Error, Result};
use crate::labelgrid::LabelGrid;
use crate::scalar::Scalar;
use crate::scene::{analyze, AnalysisConfig, SceneAnalysis};
use crate::seed::derive_seed;
use crate::stats::{CooccurrenceModel, StatsBuilder, DEFAULT_ALPHA};

pub const GLOBAL_LABEL: &str = "global";
pub const DEFAULT_N_MIN: usize = 30;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Majority,
    MeanThreshold,
}

/// Combines pair margins into an image verdict.
///
/// * `Majority`: contradiction iff strictly more than half of the margins are
///   positive; confidence is the fraction of pairs agreeing with the verdict.
/// * `MeanThreshold`: contradiction iff the mean margin is positive;
///   confidence is the logistic of the mean margin.
///
/// With no pairs the verdict abstains: `(false, 0.5)`.
pub fn aggregate<F: Scalar>(margins: &[F], mode: Aggregation) -> (bool, F) {
    if margins.is_empty() {
        return (false, F::lit(0.5));
    }
    let n = margins.len();
    match mode {
        Aggregation::Majority => {
            let pos = margins.iter().filter(|&&m| m > F::zero()).count();
            let contradiction = 2 * pos > n;
            let agree = if contradiction { pos } else { n - pos };
            (contradiction, F::from_index(agree) / F::from_index(n))
        }
        Aggregation::MeanThreshold => {
            let mean = margins.iter().fold(F::zero(), |a, &m| a + m) / F::from_index(n);
            (mean > F::zero(), F::one() / (F::one() + (-mean).exp()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PairScore<F> {
    pub a_object: usize,
    pub b_object: usize,
    pub a_class: u32,
    pub b_class: u32,
    pub margin: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Verdict<F> {
    pub image_id: String,
    pub contradiction: bool,
    pub confidence: F,
    pub model_used: String,
    pub pair_scores: Vec<PairScore<F>>,
}

/// Statistics, shape prototypes and detector for one context (or globally).
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVerifier<F> {
    pub stats: CooccurrenceModel<F>,
    pub prototypes: ShapePrototypes<F>,
    pub model: LinearModel<F>,
    pub images: usize,
}

impl<F: Scalar> ContextVerifier<F> {
    pub fn judge(
        &self,
        scene: &SceneAnalysis<F>,
        aggregation: Aggregation,
        label: &str,
    ) -> Result<Verdict<F>> {
        let features = featurize_scene(scene, &self.stats, &self.prototypes)?;
        let pair_scores = scene
            .relations
            .iter()
            .zip(&features)
            .map(|(r, fv)| {
                Ok(PairScore {
                    a_object: r.a_object,
                    b_object: r.b_object,
                    a_class: r.a_class,
                    b_class: r.b_class,
                    margin: self.model.score(fv)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let margins: Vec<F> = pair_scores.iter().map(|p| p.margin).collect();
        let (contradiction, confidence) = aggregate(&margins, aggregation);
        Ok(Verdict {
            image_id: scene.image_id.clone(),
            contradiction,
            confidence,
            model_used: label.to_string(),
            pair_scores,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub hyperparams: Hyperparams,
    pub alpha: f64,
    pub n_min: usize,
    pub aggregation: Aggregation,
    pub analysis: AnalysisConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hyperparams: Hyperparams::default(),
            alpha: DEFAULT_ALPHA,
            n_min: DEFAULT_N_MIN,
            aggregation: Aggregation::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

/// A global verifier plus one verifier per sufficiently large context.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierRegistry<F> {
    pub context_attribute: Option<String>,
    pub config: TrainingConfig,
    pub global: ContextVerifier<F>,
    pub contexts: BTreeMap<String, ContextVerifier<F>>,
}

impl<F: Scalar> VerifierRegistry<F> {
    /// Picks the verifier for an attribute record. Missing records, missing or
    /// placeholder values and untrained contexts fall back to the global one.
    pub fn resolve(&self, attributes: Option<&BTreeMap<String, String>>) -> (&str, &ContextVerifier<F>) {
        let hit = self.context_attribute.as_ref().and_then(|attr| {
            let value = attributes?.get(attr)?;
            if value == PLACEHOLDER {
                return None;
            }
            self.contexts.get_key_value(value)
        });
        match hit {
            Some((label, v)) => (label.as_str(), v),
            None => (GLOBAL_LABEL, &self.global),
        }
    }

    pub fn analyze(&self, grid: &LabelGrid) -> Result<SceneAnalysis<F>> {
        analyze(grid, &self.config.analysis)
    }

    pub fn verify(
        &self,
        grid: &LabelGrid,
        attributes: Option<&BTreeMap<String, String>>,
    ) -> Result<Verdict<F>> {
        let scene = self.analyze(grid)?;
        let (label, verifier) = self.resolve(attributes);
        verifier.judge(&scene, self.config.aggregation, label)
    }

    /// Verifies with the global verifier regardless of context.
    pub fn verify_global(&self, grid: &LabelGrid) -> Result<Verdict<F>> {
        let scene = self.analyze(grid)?;
        self.global.judge(&scene, self.config.aggregation, GLOBAL_LABEL)
    }
}

pub fn verify<F: Scalar>(
    grid: &LabelGrid,
    registry: &VerifierRegistry<F>,
    attributes: Option<&BTreeMap<String, String>>,
) -> Result<Verdict<F>> {
    registry.verify(grid, attributes)
}

struct TrainingScene<F> {
    valid: SceneAnalysis<F>,
    contradiction: Option<SceneAnalysis<F>>,
}

/// Key under which the contradiction for an image is seeded.
pub fn contradiction_key(image_id: &str) -> String {
    format!("contradiction/{image_id}")
}

/// Trains the global verifier on every scene in `train`, and one verifier per
/// value of `context_attribute` that has at least `config.n_min` images.
///
/// Each scene with two or more objects also yields one contradiction by
/// object removal; all pairs of a scene share the scene's label.
pub fn train_registry<F: Scalar>(
    train: &[LabelGrid],
    table: &AttributeTable,
    context_attribute: Option<&str>,
    config: &TrainingConfig,
    seed: u64,
) -> Result<VerifierRegistry<F>> {
    let first = train
        .first()
        .ok_or_else(|| Error::EmptyCorpus("training split is empty".into()))?;
    let classes = first.class_map().ids();
    let cfg = config.analysis;

    let scenes: Vec<TrainingScene<F>> = train
        .par_iter()
        .map(|grid| {
            let valid = analyze(grid, &cfg)?;
            let contradiction = if valid.objects.len() >= 2 {
                let s = derive_seed(seed, &contradiction_key(grid.image_id()));
                let (g, _) = generate_contradiction(grid, cfg.min_area, s)?;
                Some(analyze(&g, &cfg)?)
            } else {
                None
            };
            Ok(TrainingScene {
                valid,
                contradiction,
            })
        })
        .collect::<Result<_>>()?;

    let all: Vec<usize> = (0..scenes.len()).collect();
    let global = fit_verifier(&scenes, &all, &classes, config, seed, GLOBAL_LABEL)?;

    let mut contexts = BTreeMap::new();
    if let Some(attr) = context_attribute {
        let ids: Vec<String> = train.iter().map(|g| g.image_id().to_string()).collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for (value, members) in partition_corpus(&ids, table, attr)? {
            if value == PLACEHOLDER || members.len() < config.n_min {
                continue;
            }
            let idx: Vec<usize> = members.iter().map(|m| index[m.as_str()]).collect();
            let v = fit_verifier(&scenes, &idx, &classes, config, seed, &value)?;
            contexts.insert(value, v);
        }
    }
    Ok(VerifierRegistry {
        context_attribute: context_attribute.map(str::to_string),
        config: *config,
        global,
        contexts,
    })
}

fn fit_verifier<F: Scalar>(
    scenes: &[TrainingScene<F>],
    members: &[usize],
    classes: &[u32],
    config: &TrainingConfig,
    seed: u64,
    label: &str,
) -> Result<ContextVerifier<F>> {
    let k_dist = config.analysis.k_dist;
    let builder = members
        .par_iter()
        .map(|&i| {
            let s = &scenes[i].valid;
            let mut b = StatsBuilder::new(classes.iter().copied(), k_dist);
            b.accumulate(&s.objects, &s.relations)?;
            Ok(b)
        })
        .try_reduce(
            || StatsBuilder::new(classes.iter().copied(), k_dist),
            |x, y| x.merge(&y),
        )?;
    let stats = builder.finalize(F::lit(config.alpha))?;
    let prototypes = ShapePrototypes::from_scenes(
        members.iter().map(|&i| &scenes[i].valid),
        config.analysis.shape_bins,
    );

    let per_scene: Vec<Vec<(super::features::FeatureVector<F>, Label)>> = members
        .par_iter()
        .map(|&i| {
            let mut out: Vec<_> = featurize_scene(&scenes[i].valid, &stats, &prototypes)?
                .into_iter()
                .map(|f| (f, Label::Valid))
                .collect();
            if let Some(c) = &scenes[i].contradiction {
                out.extend(
                    featurize_scene(c, &stats, &prototypes)?
                        .into_iter()
                        .map(|f| (f, Label::Contradiction)),
                );
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let (features, labels): (Vec<_>, Vec<_>) = per_scene.into_iter().flatten().unzip();
    let model = train_linear(
        &features,
        &labels,
        config.hyperparams,
        derive_seed(seed, &format!("linear/{label}")),
        label,
    )?;
    Ok(ContextVerifier {
        stats,
        prototypes,
        model,
        images: members.len(),
    })
}
