use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::records::read_jsonl;
use super::Task;
use crate::error::{Error, Result};
use crate::types::EntityDescription;

/// Train / valid / test records of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Default for Splits<T> {
    fn default() -> Self {
        Splits {
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        }
    }
}

impl<T> Splits<T> {
    pub fn all(&self) -> impl Iterator<Item = &T> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

impl<T: DeserializeOwned> Splits<T> {
    /// Reads `{dir}/train.jsonl`, `valid.jsonl` and `test.jsonl`; a missing
    /// train or valid file reads as empty, a missing test file is an error.
    pub fn load(dir: &Path) -> Result<Self> {
        let optional = |name: &str| -> Result<Vec<T>> {
            let path = dir.join(name);
            if path.exists() {
                read_jsonl(&path)
            } else {
                Ok(Vec::new())
            }
        };
        Ok(Splits {
            train: optional("train.jsonl")?,
            valid: optional("valid.jsonl")?,
            test: read_jsonl(&dir.join("test.jsonl"))?,
        })
    }
}

/// Layout of a generated data directory:
/// `{root}/{task}/{split}.jsonl` plus `{root}/descriptions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataRoot(pub PathBuf);

impl DataRoot {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DataRoot(path.into())
    }

    pub fn task_dir(&self, task: Task) -> PathBuf {
        self.0.join(task.name())
    }

    pub fn descriptions(&self) -> PathBuf {
        self.0.join("descriptions.jsonl")
    }

    pub fn load<T: DeserializeOwned>(&self, task: Task) -> Result<Splits<T>> {
        Splits::load(&self.task_dir(task))
    }
}

/// Reads a description store, keyed by entity id. Duplicate ids are an error.
pub fn load_descriptions(path: &Path) -> Result<BTreeMap<String, EntityDescription>> {
    let mut out = BTreeMap::new();
    for d in read_jsonl::<EntityDescription>(path)? {
        let id = d.entity_id().to_owned();
        if out.insert(id.clone(), d).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate entity {id}",
                path.display()
            )));
        }
    }
    Ok(out)
}
