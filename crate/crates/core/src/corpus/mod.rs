//! On-disk corpora, contradiction generation, synthetic scenes and model
//! persistence.
//!
//! Layout of a corpus directory:
//!
//! ```text
//! classes.json      {"schema_version": 1, "classes": {"1": "sofa", ...}}
//! schema.json       {"schema_version": 1, "attributes": {"location": ["inside", "outside"], ...}}
//! attributes.json   {"schema_version": 1, "records": [{"image_id": ..., "attributes": {...}}, ...]}
//! splits.json       {"schema_version": 1, "train": [...], "val": [...]}
//! images/<id>.lgrid
//! ```

pub mod contradiction;
pub mod persist;
pub mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{AttributeSchema, AttributeTable, ATTRIBUTES_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::labelgrid::{ClassMap, LabelGrid};
use persist::{read_json_value, write_json};

pub const CORPUS_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SplitsDocument {
    schema_version: u64,
    train: Vec<String>,
    val: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ClassesDocument {
    schema_version: u64,
    classes: ClassMap,
}

#[derive(Serialize, Deserialize)]
struct SchemaDocument {
    schema_version: u64,
    attributes: AttributeSchema,
}

#[derive(Serialize)]
struct AttributesDocument<'a> {
    schema_version: u64,
    records: &'a [crate::context::AnnotationEntry],
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    class_map: Arc<ClassMap>,
    splits: Splits,
    attributes: AttributeTable,
}

fn check_version(v: &serde_json::Value, expected: u64, what: &str) -> Result<()> {
    match v.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(found) if found == expected => Ok(()),
        Some(found) => Err(Error::Version { found, expected }),
        None => Err(Error::Format(format!("{what}: missing schema_version"))),
    }
}

/// Reads `classes.json`; a bare `{"id": "name"}` object is also accepted.
pub fn load_class_map(path: &Path) -> Result<ClassMap> {
    let v = read_json_value(path)?;
    if v.get("classes").is_some() {
        check_version(&v, CORPUS_SCHEMA_VERSION, "classes.json")?;
        let doc: ClassesDocument = serde_json::from_value(v)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(doc.classes)
    } else {
        serde_json::from_value(v).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Reads an attribute schema file; a bare `{"attr": [values]}` object is also accepted.
pub fn load_schema(path: &Path) -> Result<AttributeSchema> {
    let v = read_json_value(path)?;
    if v.get("attributes").is_some() && v.get("schema_version").is_some() {
        check_version(&v, CORPUS_SCHEMA_VERSION, "schema.json")?;
        let doc: SchemaDocument = serde_json::from_value(v)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(doc.attributes)
    } else {
        serde_json::from_value(v).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

impl Corpus {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let class_map = Arc::new(load_class_map(&root.join("classes.json"))?);
        let schema_path = root.join("schema.json");
        let schema = if schema_path.exists() {
            load_schema(&schema_path)?
        } else {
            AttributeSchema::default_schema()
        };

        let v = read_json_value(&root.join("splits.json"))?;
        check_version(&v, CORPUS_SCHEMA_VERSION, "splits.json")?;
        let s: SplitsDocument =
            serde_json::from_value(v).map_err(|e| Error::Format(format!("splits.json: {e}")))?;
        let splits = Splits {
            train: s.train,
            val: s.val,
        };
        let mut seen = BTreeSet::new();
        for id in splits.train.iter().chain(&splits.val) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Duplicate(id.clone()));
            }
        }

        let attr_path = root.join("attributes.json");
        let text = fs::read_to_string(&attr_path).map_err(|e| Error::io(&attr_path, e))?;
        let attributes = AttributeTable::load(&text, schema)?;

        let corpus = Corpus {
            root,
            class_map,
            splits,
            attributes,
        };
        for id in corpus.splits.train.iter().chain(&corpus.splits.val) {
            let p = corpus.image_path(id);
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "listed image is missing"),
                ));
            }
        }
        Ok(corpus)
    }

    /// Writes a complete corpus directory and returns it loaded.
    pub fn write(
        root: impl AsRef<Path>,
        class_map: &ClassMap,
        attributes: &AttributeTable,
        splits: &Splits,
        grids: &[LabelGrid],
    ) -> Result<Corpus> {
        let root = root.as_ref();
        let images = root.join("images");
        fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        write_json(
            &root.join("classes.json"),
            &ClassesDocument {
                schema_version: CORPUS_SCHEMA_VERSION,
                classes: class_map.clone(),
            },
        )?;
        write_json(
            &root.join("schema.json"),
            &SchemaDocument {
                schema_version: CORPUS_SCHEMA_VERSION,
                attributes: attributes.schema().clone(),
            },
        )?;
        let entries = attributes.entries();
        write_json(
            &root.join("attributes.json"),
            &AttributesDocument {
                schema_version: ATTRIBUTES_SCHEMA_VERSION,
                records: &entries,
            },
        )?;
        write_json(
            &root.join("splits.json"),
            &SplitsDocument {
                schema_version: CORPUS_SCHEMA_VERSION,
                train: splits.train.clone(),
                val: splits.val.clone(),
            },
        )?;
        grids.par_iter().try_for_each(|g| {
            let p = image_file(root, g.image_id());
            fs::write(&p, g.to_lgrid_string()).map_err(|e| Error::io(&p, e))
        })?;
        Corpus::load(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn class_map(&self) -> &Arc<ClassMap> {
        &self.class_map
    }

    pub fn attributes(&self) -> &AttributeTable {
        &self.attributes
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
        }
    }

    pub fn image_path(&self, id: &str) -> PathBuf {
        image_file(&self.root, id)
    }

    pub fn load_grid(&self, id: &str) -> Result<LabelGrid> {
        let p = self.image_path(id);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        LabelGrid::parse(id, &text, self.class_map.clone())
    }

    /// Loads every grid of a split, in split order.
    pub fn load_split(&self, split: Split) -> Result<Vec<LabelGrid>> {
        self.ids(split).par_iter().map(|id| self.load_grid(id)).collect()
    }
}

fn image_file(root: &Path, id: &str) -> PathBuf {
    root.join("images").join(format!("{id}.lgrid"))
}
