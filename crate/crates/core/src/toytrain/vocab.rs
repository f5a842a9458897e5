use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::wikient::HyperlinkPair;

pub const UNK: &str = "[UNK]";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const BOD: &str = "[BOD]";
pub const BOC: &str = "[BOC]";

/// Reserved symbols, in id order.
pub const SPECIALS: [&str; 5] = [UNK, BOS, EOS, BOD, BOC];
pub const UNK_ID: usize = 0;
pub const BOD_ID: usize = 3;
pub const BOC_ID: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// The reserved symbols followed by every token seen at least
    /// `min_count` times, most frequent first (ties alphabetical), up to
    /// `max_size` entries in total.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a [String]>,
        min_count: usize,
        max_size: usize,
    ) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for t in text {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !SPECIALS.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens: Vec<String> = SPECIALS
            .iter()
            .copied()
            .chain(ranked.into_iter().map(|(t, _)| t))
            .take(max_size.max(SPECIALS.len()))
            .map(str::to_owned)
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(k, t)| (t.clone(), k))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Out-of-vocabulary tokens map to `[UNK]`.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A hyperlink pair over vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyPair {
    pub context: Vec<usize>,
    /// Inclusive mention span in `context`.
    pub span: (usize, usize),
    pub description: Vec<usize>,
}

impl ToyPair {
    pub fn from_pair(pair: &HyperlinkPair, vocab: &Vocab) -> Self {
        ToyPair {
            context: vocab.ids(pair.context.tokens()),
            span: pair.context.span(),
            description: vocab.ids(pair.description.tokens()),
        }
    }

    pub(crate) fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.description.is_empty() {
            return Err(Error::InvalidArgument("empty description".into()));
        }
        if self.span.0 > self.span.1 || self.span.1 >= self.context.len() {
            return Err(Error::InvalidArgument(format!(
                "span {:?} outside context of {}",
                self.span,
                self.context.len()
            )));
        }
        if let Some(t) = self
            .context
            .iter()
            .chain(&self.description)
            .find(|&&t| t >= vocab_size)
        {
            return Err(Error::InvalidArgument(format!(
                "token id {t} outside vocab of {vocab_size}"
            )));
        }
        Ok(())
    }

    /// `[BOC]` + context, with the mention span shifted by one.
    pub fn marked_context(&self) -> (Vec<usize>, (usize, usize)) {
        let mut ids = vec![BOC_ID];
        ids.extend(&self.context);
        (ids, (self.span.0 + 1, self.span.1 + 1))
    }

    /// `[BOD]` + description; the description occupies positions 1..=T.
    pub fn marked_description(&self) -> Vec<usize> {
        let mut ids = vec![BOD_ID];
        ids.extend(&self.description);
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn vocab_order_and_unk() {
        let a = strings("b a b c");
        let b = strings("a b [BOD]");
        let v = Vocab::build([a.as_slice(), b.as_slice()], 2, 100);
        assert_eq!(v.tokens(), &strings("[UNK] <s> </s> [BOD] [BOC] b a"));
        assert_eq!(v.id("c"), UNK_ID);
        assert_eq!(v.id("[BOD]"), BOD_ID);
        assert_eq!(Vocab::build([a.as_slice()], 1, 6).len(), 6);
    }

    #[test]
    fn markers_shift_spans_by_one() {
        let p = ToyPair {
            context: vec![7, 8, 9],
            span: (1, 2),
            description: vec![5, 6],
        };
        let (boc, span) = p.marked_context();
        assert_eq!(boc, vec![BOC_ID, 7, 8, 9]);
        assert_eq!(span, (2, 3));
        assert_eq!(&boc[span.0..=span.1], &p.context[p.span.0..=p.span.1]);
        assert_eq!(p.marked_description(), vec![BOD_ID, 5, 6]);
    }
}
