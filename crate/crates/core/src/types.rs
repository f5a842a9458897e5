//! Domain types shared across the crate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of word tokens kept in an entity description.
pub const MAX_DESCRIPTION_TOKENS: usize = 100;

/// Size of the ultra-fine entity-typing label inventory.
pub const NUM_ENTITY_TYPES: usize = 10331;

/// A tokenized sentence with an inclusive mention span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMention", into = "RawMention")]
pub struct MentionContext {
    instance_id: String,
    tokens: Vec<String>,
    span: (usize, usize),
}

#[derive(Serialize, Deserialize)]
struct RawMention {
    id: String,
    context: Vec<String>,
    span: (usize, usize),
}

impl TryFrom<RawMention> for MentionContext {
    type Error = Error;

    fn try_from(raw: RawMention) -> Result<Self> {
        MentionContext::new(raw.id, raw.context, raw.span)
    }
}

impl From<MentionContext> for RawMention {
    fn from(m: MentionContext) -> Self {
        RawMention {
            id: m.instance_id,
            context: m.tokens,
            span: m.span,
        }
    }
}

impl MentionContext {
    /// Builds a mention, lowercasing every token.
    pub fn new<S: AsRef<str>>(
        instance_id: impl Into<String>,
        tokens: impl IntoIterator<Item = S>,
        span: (usize, usize),
    ) -> Result<Self> {
        let tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_lowercase())
            .collect();
        let instance_id = instance_id.into();
        if tokens.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "mention {instance_id}: empty context"
            )));
        }
        let (i, j) = span;
        if i > j || j >= tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "mention {instance_id}: span ({i}, {j}) invalid for {} tokens",
                tokens.len()
            )));
        }
        Ok(MentionContext {
            instance_id,
            tokens,
            span,
        })
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn span(&self) -> (usize, usize) {
        self.span
    }

    /// Tokens `i..=j`.
    pub fn mention_tokens(&self) -> &[String] {
        &self.tokens[self.span.0..=self.span.1]
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.instance_id = id.into();
        self
    }
}

/// An entity's textual description, truncated to at most 100 tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDescription", into = "RawDescription")]
pub struct EntityDescription {
    entity_id: String,
    title: String,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawDescription {
    entity_id: String,
    #[serde(default)]
    title: String,
    description: Vec<String>,
}

impl TryFrom<RawDescription> for EntityDescription {
    type Error = Error;

    fn try_from(raw: RawDescription) -> Result<Self> {
        EntityDescription::new(raw.entity_id, raw.title, raw.description)
    }
}

impl From<EntityDescription> for RawDescription {
    fn from(d: EntityDescription) -> Self {
        RawDescription {
            entity_id: d.entity_id,
            title: d.title,
            description: d.tokens,
        }
    }
}

impl EntityDescription {
    pub fn new<S: AsRef<str>>(
        entity_id: impl Into<String>,
        title: impl Into<String>,
        tokens: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let entity_id = entity_id.into();
        let tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_lowercase())
            .collect();
        if tokens.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "description of {entity_id} is empty"
            )));
        }
        if tokens.len() > MAX_DESCRIPTION_TOKENS {
            return Err(Error::InvalidArgument(format!(
                "description of {entity_id} has {} tokens (max {MAX_DESCRIPTION_TOKENS})",
                tokens.len()
            )));
        }
        Ok(EntityDescription {
            entity_id,
            title: title.into(),
            tokens,
        })
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Which coreference-arc group a CAP pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairGroup {
    Same,
    Next,
}

impl PairGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            PairGroup::Same => "same",
            PairGroup::Next => "next",
        }
    }
}

/// Two mentions and a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInstance {
    pub left: MentionContext,
    pub right: MentionContext,
    pub label: bool,
    pub group: Option<PairGroup>,
}

/// A mention with its gold type set.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedInstance {
    mention: MentionContext,
    gold_types: BTreeSet<u32>,
}

impl TypedInstance {
    pub fn new(mention: MentionContext, gold_types: impl IntoIterator<Item = u32>) -> Result<Self> {
        let gold_types: BTreeSet<u32> = gold_types.into_iter().collect();
        if gold_types.is_empty() {
            return Err(Error::Data(format!(
                "typing instance {} has no gold types",
                mention.instance_id()
            )));
        }
        if let Some(&bad) = gold_types.iter().find(|&&t| t as usize >= NUM_ENTITY_TYPES) {
            return Err(Error::Data(format!(
                "typing instance {}: type id {bad} >= {NUM_ENTITY_TYPES}",
                mention.instance_id()
            )));
        }
        Ok(TypedInstance {
            mention,
            gold_types,
        })
    }

    pub fn mention(&self) -> &MentionContext {
        &self.mention
    }

    pub fn gold_types(&self) -> &BTreeSet<u32> {
        &self.gold_types
    }
}

/// Two described entities with a gold similarity or relatedness score.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub entity1: EntityDescription,
    pub entity2: EntityDescription,
    pub gold_score: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mention_lowercases_and_validates() {
        let m = MentionContext::new("a", ["The", "Cat"], (1, 1)).unwrap();
        assert_eq!(m.tokens(), ["the", "cat"]);
        assert_eq!(m.mention_tokens(), ["cat"]);
        assert!(MentionContext::new("a", ["x"], (0, 1)).is_err());
        assert!(MentionContext::new("a", ["x", "y"], (1, 0)).is_err());
        assert!(MentionContext::new::<&str>("a", [], (0, 0)).is_err());
    }

    #[test]
    fn mention_json_shape() {
        let m = MentionContext::new("id1", ["a", "b"], (0, 1)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"id":"id1","context":["a","b"],"span":[0,1]}"#);
        let back: MentionContext = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<MentionContext>(
            r#"{"id":"x","context":["a"],"span":[0,3]}"#
        )
        .is_err());
    }

    #[test]
    fn description_limits() {
        let long: Vec<String> = (0..101).map(|i| i.to_string()).collect();
        assert!(EntityDescription::new("e", "E", &long).is_err());
        assert!(EntityDescription::new("e", "E", &long[..100]).is_ok());
        assert!(EntityDescription::new::<&str>("e", "E", []).is_err());
    }

    #[test]
    fn typed_instance_rejects_out_of_range_types() {
        let m = MentionContext::new("a", ["x"], (0, 0)).unwrap();
        assert!(TypedInstance::new(m.clone(), [10331]).is_err());
        assert!(TypedInstance::new(m.clone(), []).is_err());
        assert!(TypedInstance::new(m, [0, 10330]).is_ok());
    }
}
