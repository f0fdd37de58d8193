//! Per-image attribute annotations and context selection.
//!
//! Attributes are scored against object-class labels by plug-in mutual
//! information; the best eligible attribute partitions the corpus into
//! contexts, each of which gets its own statistics and verifier.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stand-in for a missing attribute value.
pub const PLACEHOLDER: &str = "∅";
pub const DEFAULT_MIN_COVERAGE: f64 = 0.95;
pub const DEFAULT_MIN_BALANCE: f64 = 0.10;

/// Attribute name → allowed values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSchema(pub BTreeMap<String, Vec<String>>);

impl AttributeSchema {
    /// Four binary scene attributes: location, object count, lighting and framing.
    pub fn default_schema() -> Self {
        let pairs = [
            ("location", ["inside", "outside"]),
            ("objects", ["single", "multiple"]),
            ("lighting", ["soft", "hard"]),
            ("framing", ["full", "partial"]),
        ];
        AttributeSchema(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn allowed(&self, attribute: &str) -> Option<&[String]> {
        self.0.get(attribute).map(Vec::as_slice)
    }
}

/// One annotation entry as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub image_id: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnnotationFile {
    Bare(Vec<AnnotationEntry>),
    Versioned {
        schema_version: u64,
        records: Vec<AnnotationEntry>,
    },
}

pub const ATTRIBUTES_SCHEMA_VERSION: u64 = 1;

/// Validated attribute annotations. Every schema attribute is present in
/// every record, possibly as [`PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    schema: AttributeSchema,
    records: BTreeMap<String, BTreeMap<String, String>>,
}

impl AttributeTable {
    pub fn new(schema: AttributeSchema) -> Self {
        AttributeTable {
            schema,
            records: BTreeMap::new(),
        }
    }

    /// Parses an annotation file: either a bare JSON array of
    /// `{"image_id", "attributes"}` entries or the versioned
    /// `{"schema_version", "records"}` wrapper.
    pub fn load(json_text: &str, schema: AttributeSchema) -> Result<Self> {
        let entries = match serde_json::from_str::<AnnotationFile>(json_text)
            .map_err(|e| Error::Format(format!("attribute file: {e}")))?
        {
            AnnotationFile::Bare(v) => v,
            AnnotationFile::Versioned {
                schema_version,
                records,
            } => {
                if schema_version != ATTRIBUTES_SCHEMA_VERSION {
                    return Err(Error::Version {
                        found: schema_version,
                        expected: ATTRIBUTES_SCHEMA_VERSION,
                    });
                }
                records
            }
        };
        let mut table = AttributeTable::new(schema);
        for e in entries {
            table.insert(e.image_id, e.attributes)?;
        }
        Ok(table)
    }

    /// Adds one record, filling unspecified attributes with the placeholder.
    pub fn insert(&mut self, image_id: String, attributes: BTreeMap<String, String>) -> Result<()> {
        if self.records.contains_key(&image_id) {
            return Err(Error::Duplicate(image_id));
        }
        for (name, value) in &attributes {
            let allowed = self
                .schema
                .allowed(name)
                .ok_or_else(|| Error::Schema(format!("{image_id}: unknown attribute {name:?}")))?;
            if value != PLACEHOLDER && !allowed.iter().any(|a| a == value) {
                return Err(Error::Schema(format!(
                    "{image_id}: value {value:?} not allowed for attribute {name:?}"
                )));
            }
        }
        let record = self
            .schema
            .names()
            .map(|name| {
                let v = attributes.get(name).cloned().unwrap_or_else(|| PLACEHOLDER.to_string());
                (name.to_string(), v)
            })
            .collect();
        self.records.insert(image_id, record);
        Ok(())
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn record(&self, image_id: &str) -> Option<&BTreeMap<String, String>> {
        self.records.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Attribute value for an image; missing records read as the placeholder.
    pub fn value(&self, image_id: &str, attribute: &str) -> &str {
        self.records
            .get(image_id)
            .and_then(|r| r.get(attribute))
            .map(String::as_str)
            .unwrap_or(PLACEHOLDER)
    }

    pub fn entries(&self) -> Vec<AnnotationEntry> {
        self.records
            .iter()
            .map(|(id, attrs)| AnnotationEntry {
                image_id: id.clone(),
                attributes: attrs.clone(),
            })
            .collect()
    }
}

/// Dense rows × cols table of non-negative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl Contingency {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Contingency {
            rows,
            cols,
            counts: vec![0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::Format("ragged contingency table".into()));
        }
        Ok(Contingency {
            rows: rows.len(),
            cols,
            counts: rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect(),
        })
    }

    pub fn add(&mut self, row: usize, col: usize, n: u64) {
        self.counts[row * self.cols + col] += n;
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Plug-in mutual information of a joint count table, in nats.
pub fn mutual_information<F: Scalar>(joint: &Contingency) -> Result<F> {
    let total = joint.total();
    if total == 0 {
        return Err(Error::EmptyDistribution);
    }
    let row_sums: Vec<u64> = (0..joint.rows)
        .map(|r| (0..joint.cols).map(|c| joint.get(r, c)).sum())
        .collect();
    let col_sums: Vec<u64> = (0..joint.cols)
        .map(|c| (0..joint.rows).map(|r| joint.get(r, c)).sum())
        .collect();
    let n = F::from_count(total);
    let mut mi = F::zero();
    for r in 0..joint.rows {
        for c in 0..joint.cols {
            let k = joint.get(r, c);
            if k == 0 {
                continue;
            }
            let k = F::from_count(k);
            let ratio = (k * n) / (F::from_count(row_sums[r]) * F::from_count(col_sums[c]));
            mi = mi + (k / n) * ratio.ln();
        }
    }
    Ok(mi.max(F::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCriteria {
    pub min_coverage: f64,
    pub min_balance: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            min_coverage: DEFAULT_MIN_COVERAGE,
            min_balance: DEFAULT_MIN_BALANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AttributeScore<F> {
    pub attribute: String,
    /// Nats.
    pub mutual_information: F,
    /// Fraction of images with a non-placeholder value.
    pub coverage: F,
    /// Image share of the rarest observed value among covered images.
    pub balance: F,
    pub observed_values: usize,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ContextSelectionReport<F> {
    pub criteria: SelectionCriteria,
    pub images: usize,
    pub attributes: Vec<AttributeScore<F>>,
    /// Eligible attributes by mutual information, descending; ties by name.
    pub ranking: Vec<String>,
}

impl<F: Scalar> ContextSelectionReport<F> {
    pub fn best(&self) -> Option<&str> {
        self.ranking.first().map(String::as_str)
    }
}

/// Scores every schema attribute against the object classes of each image.
///
/// `labels` maps image id → class id of every object instance. Each instance
/// contributes one (class, attribute value) event to the joint table.
pub fn score_attributes<F: Scalar>(
    table: &AttributeTable,
    labels: &BTreeMap<String, Vec<u32>>,
    criteria: SelectionCriteria,
) -> Result<ContextSelectionReport<F>> {
    if labels.is_empty() {
        return Err(Error::EmptyCorpus("no labeled images to score".into()));
    }
    let classes: Vec<u32> = labels
        .values()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_images = labels.len();
    let mut scores = Vec::new();
    for (name, allowed) in &table.schema.0 {
        // last column is the placeholder
        let mut joint = Contingency::zeros(classes.len(), allowed.len() + 1);
        let mut image_counts = vec![0usize; allowed.len() + 1];
        for (image_id, objects) in labels {
            let value = table.value(image_id, name);
            let col = allowed.iter().position(|a| a == value).unwrap_or(allowed.len());
            image_counts[col] += 1;
            for class in objects {
                let row = classes.binary_search(class).expect("class collected above");
                joint.add(row, col, 1);
            }
        }
        let covered = n_images - image_counts[allowed.len()];
        let observed: Vec<usize> = image_counts[..allowed.len()]
            .iter()
            .copied()
            .filter(|&c| c > 0)
            .collect();
        let coverage = F::from_index(covered) / F::from_index(n_images);
        let balance = match observed.iter().min() {
            Some(&m) => F::from_index(m) / F::from_index(covered),
            None => F::zero(),
        };
        let mutual_information = match mutual_information(&joint) {
            Ok(mi) => mi,
            Err(Error::EmptyDistribution) => F::zero(),
            Err(e) => return Err(e),
        };
        let eligible = coverage.as_f64() >= criteria.min_coverage
            && balance.as_f64() >= criteria.min_balance
            && observed.len() >= 2;
        scores.push(AttributeScore {
            attribute: name.clone(),
            mutual_information,
            coverage,
            balance,
            observed_values: observed.len(),
            eligible,
        });
    }
    let mut ranked: Vec<&AttributeScore<F>> = scores.iter().filter(|s| s.eligible).collect();
    ranked.sort_by(|a, b| {
        b.mutual_information
            .as_f64()
            .total_cmp(&a.mutual_information.as_f64())
            .then_with(|| a.attribute.cmp(&b.attribute))
    });
    let ranking = ranked.into_iter().map(|s| s.attribute.clone()).collect();
    Ok(ContextSelectionReport {
        criteria,
        images: n_images,
        attributes: scores,
        ranking,
    })
}

/// Groups image ids by their value of `attribute`. Missing values land in the
/// [`PLACEHOLDER`] group. Input order is kept within each group.
pub fn partition_corpus(
    corpus_ids: &[String],
    table: &AttributeTable,
    attribute: &str,
) -> Result<BTreeMap<String, Vec<String>>> {
    if table.schema.allowed(attribute).is_none() {
        return Err(Error::Schema(format!("unknown attribute {attribute:?}")));
    }
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in corpus_ids {
        groups
            .entry(table.value(id, attribute).to_string())
            .or_default()
            .push(id.clone());
    }
    Ok(groups)
}
