//! Held-out evaluation of a trained registry, comparing the global verifier
//! with context dispatch.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{AttributeTable, PLACEHOLDER};
use crate::corpus::contradiction::generate_contradiction;
use crate::error::Result;
use crate::labelgrid::LabelGrid;
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::verifier::{contradiction_key, VerifierRegistry};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

/// Counts for one evaluation slice. `valid` and `invalid` count intact and
/// contradicted examples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub valid: usize,
    pub invalid: usize,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Metrics {
    fn add(&mut self, truth: bool, correct: bool) {
        if truth {
            self.invalid += 1;
        } else {
            self.valid += 1;
        }
        self.total += 1;
        self.correct += usize::from(correct);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

/// One judged example. `truth` is true for generated contradictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub image_id: String,
    pub context: String,
    pub truth: bool,
    pub global_prediction: bool,
    pub global_confidence: f64,
    pub context_prediction: bool,
    pub context_confidence: f64,
    pub model_used: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u64,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub group_by: Option<String>,
    /// Global verifier over every example.
    pub global: Metrics,
    /// Context-dispatched verifier, per value of `group_by`.
    pub contexts: BTreeMap<String, Metrics>,
    /// Unweighted mean of the per-context accuracies.
    pub per_context_average_accuracy: f64,
    /// `per_context_average_accuracy - global.accuracy`, in percentage points.
    pub improvement_pp: f64,
    pub verdicts: Vec<VerdictRecord>,
}

impl RunReport {
    /// Rebuilds the metrics from the verdict log.
    pub fn recount(&self) -> (Metrics, BTreeMap<String, Metrics>) {
        let mut global = Metrics::default();
        let mut contexts: BTreeMap<String, Metrics> = BTreeMap::new();
        for v in &self.verdicts {
            global.add(v.truth, v.global_prediction == v.truth);
            contexts
                .entry(v.context.clone())
                .or_default()
                .add(v.truth, v.context_prediction == v.truth);
        }
        (global, contexts)
    }
}

/// Judges every held-out image and one removal contradiction per image with
/// two or more objects, using both the global verifier and context dispatch.
///
/// Examples are grouped by `group_by`, defaulting to the registry's context
/// attribute. Contradictions are seeded per image id, so the report is a pure
/// function of its inputs.
pub fn evaluate<F: Scalar>(
    registry: &VerifierRegistry<F>,
    val: &[LabelGrid],
    table: &AttributeTable,
    group_by: Option<&str>,
    seed: u64,
) -> Result<RunReport> {
    let group_by = group_by.map(str::to_string).or_else(|| registry.context_attribute.clone());
    let min_area = registry.config.analysis.min_area;

    let per_image: Vec<Vec<VerdictRecord>> = val
        .par_iter()
        .map(|grid| {
            let id = grid.image_id();
            let record = table.record(id);
            let context = match &group_by {
                Some(attr) => table.value(id, attr).to_string(),
                None => PLACEHOLDER.to_string(),
            };
            let mut examples = vec![(grid.clone(), false)];
            if registry.analyze(grid)?.objects.len() >= 2 {
                let s = derive_seed(seed, &contradiction_key(id));
                examples.push((generate_contradiction(grid, min_area, s)?.0, true));
            }
            examples
                .into_iter()
                .map(|(g, truth)| {
                    let global = registry.verify_global(&g)?;
                    let dispatched = registry.verify(&g, record)?;
                    Ok(VerdictRecord {
                        image_id: g.image_id().to_string(),
                        context: context.clone(),
                        truth,
                        global_prediction: global.contradiction,
                        global_confidence: global.confidence.as_f64(),
                        context_prediction: dispatched.contradiction,
                        context_confidence: dispatched.confidence.as_f64(),
                        model_used: dispatched.model_used,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "evaluate".into(),
        seed,
        config: serde_json::to_value(registry.config)?,
        group_by,
        global: Metrics::default(),
        contexts: BTreeMap::new(),
        per_context_average_accuracy: 0.0,
        improvement_pp: 0.0,
        verdicts: per_image.into_iter().flatten().collect(),
    };
    let (global, contexts) = report.recount();
    let avg = if contexts.is_empty() {
        global.accuracy
    } else {
        contexts.values().map(|m| m.accuracy).sum::<f64>() / contexts.len() as f64
    };
    report.global = global;
    report.contexts = contexts;
    report.per_context_average_accuracy = avg;
    report.improvement_pp = 100.0 * (avg - global.accuracy);
    Ok(report)
}
