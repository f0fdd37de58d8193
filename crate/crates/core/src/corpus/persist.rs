//! JSON persistence for statistics models and verifier registries.
//!
//! A registry is saved as one document plus a sibling `<stem>.stats/`
//! directory holding one statistics document per verifier; the registry
//! refers to them by relative path.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{CooccurrenceModel, StatsDocument, STATS_SCHEMA_VERSION};
use crate::verifier::{
    ContextVerifier, LinearModel, ShapePrototypes, TrainingConfig, VerifierRegistry, FEATURE_NAMES,
};

pub const REGISTRY_SCHEMA_VERSION: u64 = 1;

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json_value(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn read_versioned<T: DeserializeOwned>(path: &Path, expected: u64) -> Result<T> {
    let v = read_json_value(path)?;
    match v.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(found) if found != expected => return Err(Error::Version { found, expected }),
        Some(_) => {}
        None => {
            return Err(Error::Format(format!(
                "{}: missing schema_version",
                path.display()
            )))
        }
    }
    serde_json::from_value(v).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn save_stats<F: Scalar>(path: &Path, model: &CooccurrenceModel<F>) -> Result<()> {
    write_json(path, &model.to_document())
}

pub fn load_stats<F: Scalar>(path: &Path) -> Result<CooccurrenceModel<F>> {
    let doc: StatsDocument<F> = read_versioned(path, STATS_SCHEMA_VERSION)?;
    CooccurrenceModel::from_document(doc)
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct VerifierEntry<F> {
    stats_ref: String,
    images: usize,
    prototypes: ShapePrototypes<F>,
    model: LinearModel<F>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct RegistryDocument<F> {
    schema_version: u64,
    feature_names: Vec<String>,
    context_attribute: Option<String>,
    config: TrainingConfig,
    global: VerifierEntry<F>,
    contexts: BTreeMap<String, VerifierEntry<F>>,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn stats_dir_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "registry".into());
    format!("{stem}.stats")
}

/// Writes the registry document at `path` and its statistics documents under
/// `<stem>.stats/` next to it.
pub fn save_registry<F: Scalar>(path: &Path, registry: &VerifierRegistry<F>) -> Result<()> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = stats_dir_name(path);
    let entry = |v: &ContextVerifier<F>, file: String| -> Result<VerifierEntry<F>> {
        let rel = format!("{dir}/{file}");
        save_stats(&base.join(&rel), &v.stats)?;
        Ok(VerifierEntry {
            stats_ref: rel,
            images: v.images,
            prototypes: v.prototypes.clone(),
            model: v.model.clone(),
        })
    };
    let global = entry(&registry.global, "global.json".into())?;
    let mut contexts = BTreeMap::new();
    for (i, (label, v)) in registry.contexts.iter().enumerate() {
        let e = entry(v, format!("context-{i:03}-{}.json", sanitize(label)))?;
        contexts.insert(label.clone(), e);
    }
    let doc = RegistryDocument {
        schema_version: REGISTRY_SCHEMA_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        context_attribute: registry.context_attribute.clone(),
        config: registry.config,
        global,
        contexts,
    };
    write_json(path, &doc)
}

pub fn load_registry<F: Scalar>(path: &Path) -> Result<VerifierRegistry<F>> {
    let doc: RegistryDocument<F> = read_versioned(path, REGISTRY_SCHEMA_VERSION)?;
    if doc.feature_names != FEATURE_NAMES {
        return Err(Error::Schema(format!(
            "registry feature layout {:?} does not match {:?}",
            doc.feature_names, FEATURE_NAMES
        )));
    }
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let restore = |e: VerifierEntry<F>| -> Result<ContextVerifier<F>> {
        if e.model.dim() != FEATURE_NAMES.len() {
            return Err(Error::Dimension {
                expected: FEATURE_NAMES.len(),
                got: e.model.dim(),
            });
        }
        Ok(ContextVerifier {
            stats: load_stats(&base.join(&e.stats_ref))?,
            prototypes: e.prototypes,
            model: e.model,
            images: e.images,
        })
    };
    let global = restore(doc.global)?;
    let contexts = doc
        .contexts
        .into_iter()
        .map(|(k, e)| Ok((k, restore(e)?)))
        .collect::<Result<_>>()?;
    Ok(VerifierRegistry {
        context_attribute: doc.context_attribute,
        config: doc.config,
        global,
        contexts,
    })
}
