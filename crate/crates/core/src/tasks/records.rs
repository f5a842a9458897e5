//! JSONL record schemas for generated task data.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{MentionContext, PairGroup};

/// ET instance: a mention and its gold type ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingRecord {
    pub id: String,
    pub context: Vec<String>,
    pub span: (usize, usize),
    pub label: Vec<u32>,
}

/// EFP instance: a claim, its chosen mention, and 1 = SUPPORTS / 0 = REFUTES.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub id: String,
    pub context: Vec<String>,
    pub span: (usize, usize),
    pub label: u8,
}

/// CAP / CERP instance: two mentions, a binary label and an optional group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub context: Vec<String>,
    pub span: (usize, usize),
    pub context2: Vec<String>,
    pub span2: (usize, usize),
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<PairGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub entity_id: String,
    pub prior: f64,
}

/// CoNLL / Rare instance: a mention with scored candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingRecord {
    pub id: String,
    pub context: Vec<String>,
    pub span: (usize, usize),
    pub candidates: Vec<CandidateRecord>,
    pub gold: String,
}

/// ESR instance: two entities and a gold score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub id: String,
    pub subset: String,
    pub entity1: String,
    pub entity2: String,
    pub score: f64,
}

/// ERT instance: two entities and a relation class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub id: String,
    pub entity1: String,
    pub entity2: String,
    pub relation: usize,
    pub relation_name: String,
}

macro_rules! mention_accessor {
    ($ty:ty) => {
        impl $ty {
            pub fn mention(&self) -> Result<MentionContext> {
                MentionContext::new(self.id.clone(), &self.context, self.span)
            }
        }
    };
}

mention_accessor!(TypingRecord);
mention_accessor!(StatementRecord);
mention_accessor!(LinkingRecord);

impl PairRecord {
    pub fn left(&self) -> Result<MentionContext> {
        MentionContext::new(self.id.clone(), &self.context, self.span)
    }

    pub fn right(&self) -> Result<MentionContext> {
        MentionContext::new(self.id.clone(), &self.context2, self.span2)
    }
}

/// Parses JSONL text; blank lines are skipped.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, source: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(source, k + 1, e.to_string()))
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::parse(&source, k + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

/// Serializes records one per line, `\n`-terminated.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_jsonl(records).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_record_shape() {
        let r = PairRecord {
            id: "p1".into(),
            context: vec!["a".into(), "b".into()],
            span: (0, 0),
            context2: vec!["a".into(), "b".into()],
            span2: (1, 1),
            label: 1,
            group: Some(PairGroup::Next),
        };
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            r#"{"id":"p1","context":["a","b"],"span":[0,0],"context2":["a","b"],"span2":[1,1],"label":1,"group":"next"}"#
        );
        let back: Vec<PairRecord> = parse_jsonl(&format!("{line}\n\n"), "t").unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_jsonl::<SimilarityRecord>("\n{\"id\":1}\n", "x.jsonl").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
