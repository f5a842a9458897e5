use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::data::DataRoot;
use super::records::{
    LinkingRecord, PairRecord, RelationRecord, SimilarityRecord, StatementRecord, TypingRecord,
};
use super::Task;
use crate::embed_io::{AvgVecEncoder, EmbeddingSet};
use crate::error::{Error, Result};
use crate::types::EntityDescription;

/// How an item is turned into a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodeKind {
    /// CER: the mention span `(i, j)` inside `tokens`.
    Contextual { span: (usize, usize) },
    /// CER of a mention that is a blank placeholder (Rare); word averaging
    /// covers the whole document.
    Document { span: (usize, usize) },
    /// DER: the whole token sequence.
    Descriptive,
}

/// One vector an encoder must produce for a task, under key `key`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeItem {
    pub key: String,
    pub tokens: Vec<String>,
    #[serde(flatten)]
    pub kind: EncodeKind,
}

struct Collector<'a> {
    items: Vec<EncodeItem>,
    seen: HashSet<String>,
    descriptions: &'a BTreeMap<String, EntityDescription>,
}

impl Collector<'_> {
    fn push(&mut self, key: String, tokens: &[String], kind: EncodeKind) {
        if self.seen.insert(key.clone()) {
            self.items.push(EncodeItem {
                key,
                tokens: tokens.to_vec(),
                kind,
            });
        }
    }

    fn description(&mut self, entity: &str) -> Result<()> {
        let d = self
            .descriptions
            .get(entity)
            .ok_or_else(|| Error::Data(format!("no description for entity {entity}")))?;
        self.push(format!("d:{entity}"), d.tokens(), EncodeKind::Descriptive);
        Ok(())
    }
}

/// Everything a task needs encoded, deduplicated by key in first-seen order
/// (train, valid, test).
pub fn encoding_items(
    root: &DataRoot,
    task: Task,
    descriptions: &BTreeMap<String, EntityDescription>,
) -> Result<Vec<EncodeItem>> {
    let mut c = Collector {
        items: Vec::new(),
        seen: HashSet::new(),
        descriptions,
    };
    match task {
        Task::Cap | Task::Cerp => {
            for r in root.load::<PairRecord>(task)?.all() {
                r.left()?;
                r.right()?;
                c.push(
                    format!("l:{}", r.id),
                    &r.context,
                    EncodeKind::Contextual { span: r.span },
                );
                c.push(
                    format!("r:{}", r.id),
                    &r.context2,
                    EncodeKind::Contextual { span: r.span2 },
                );
            }
        }
        Task::Efp => {
            for r in root.load::<StatementRecord>(task)?.all() {
                r.mention()?;
                c.push(format!("s:{}", r.id), &r.context, EncodeKind::Descriptive);
            }
        }
        Task::Et => {
            for r in root.load::<TypingRecord>(task)?.all() {
                r.mention()?;
                c.push(
                    format!("m:{}", r.id),
                    &r.context,
                    EncodeKind::Contextual { span: r.span },
                );
            }
        }
        Task::Esr => {
            for r in root.load::<SimilarityRecord>(task)?.all() {
                c.description(&r.entity1)?;
                c.description(&r.entity2)?;
            }
        }
        Task::Ert => {
            for r in root.load::<RelationRecord>(task)?.all() {
                c.description(&r.entity1)?;
                c.description(&r.entity2)?;
            }
        }
        Task::Conll | Task::Rare => {
            for r in root.load::<LinkingRecord>(task)?.all() {
                r.mention()?;
                let kind = if task == Task::Rare {
                    EncodeKind::Document { span: r.span }
                } else {
                    EncodeKind::Contextual { span: r.span }
                };
                c.push(format!("m:{}", r.id), &r.context, kind);
                for cand in &r.candidates {
                    c.description(&cand.entity_id)?;
                }
            }
        }
        Task::Ned => {
            return Err(Error::InvalidArgument(
                "ned has no data of its own; encode conll and rare".into(),
            ))
        }
    }
    Ok(c.items)
}

/// Single-layer word-averaging embeddings for `items`.
pub fn encode_avgvec(items: &[EncodeItem], encoder: &AvgVecEncoder<'_>) -> Result<EmbeddingSet> {
    let rows = items.iter().map(|item| {
        let v = match item.kind {
            EncodeKind::Contextual { span: (i, j) } => encoder.encode_tokens(&item.tokens[i..=j]),
            EncodeKind::Document { .. } | EncodeKind::Descriptive => {
                encoder.encode_tokens(&item.tokens)
            }
        };
        (item.key.clone(), v)
    });
    EmbeddingSet::from_rows(1, encoder.dim(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn item_json_shape() {
        let item = EncodeItem {
            key: "m:1".into(),
            tokens: vec!["a".into(), "b".into()],
            kind: EncodeKind::Contextual { span: (1, 1) },
        };
        assert_eq!(
            serde_json::to_string(&item).unwrap(),
            r#"{"key":"m:1","tokens":["a","b"],"kind":"contextual","span":[1,1]}"#
        );
        let d = EncodeItem {
            key: "d:x".into(),
            tokens: vec!["a".into()],
            kind: EncodeKind::Descriptive,
        };
        let line = serde_json::to_string(&d).unwrap();
        assert_eq!(line, r#"{"key":"d:x","tokens":["a"],"kind":"descriptive"}"#);
        assert_eq!(serde_json::from_str::<EncodeItem>(&line).unwrap(), d);
    }
}
