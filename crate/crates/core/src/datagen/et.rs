use std::collections::HashMap;

use super::sources::TypingExample;
use super::Generated;
use crate::error::{Error, Result};
use crate::tasks::{Splits, TypingRecord};
use crate::types::{MentionContext, TypedInstance};

/// ET: the crowdsourced typing splits mapped onto type ids, unsampled.
///
/// Every type string must occur in `vocab`.
pub fn gen_et(
    train: &[TypingExample],
    valid: &[TypingExample],
    test: &[TypingExample],
    vocab: &HashMap<String, u32>,
) -> Result<Generated<TypingRecord>> {
    let convert = |examples: &[TypingExample]| -> Result<Vec<TypingRecord>> {
        examples
            .iter()
            .map(|e| {
                let mut label = e
                    .types
                    .iter()
                    .map(|t| {
                        vocab.get(t).copied().ok_or_else(|| {
                            Error::Data(format!("{}: type {t:?} not in the type vocabulary", e.id))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()?;
                label.sort_unstable();
                label.dedup();
                TypedInstance::new(
                    MentionContext::new(e.id.clone(), &e.tokens, e.span)?,
                    label.iter().copied(),
                )?;
                Ok(TypingRecord {
                    id: e.id.clone(),
                    context: e.tokens.clone(),
                    span: e.span,
                    label,
                })
            })
            .collect()
    };
    Ok(Generated::new(Splits {
        train: convert(train)?,
        valid: convert(valid)?,
        test: convert(test)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(types: &[&str]) -> TypingExample {
        TypingExample {
            id: "e".into(),
            tokens: vec!["obama".into(), "spoke".into()],
            span: (0, 0),
            types: types.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn maps_types_and_rejects_unknown() {
        let vocab = HashMap::from([("person".to_owned(), 0), ("politician".to_owned(), 5)]);
        let g = gen_et(&[], &[], &[example(&["politician", "person"])], &vocab).unwrap();
        assert_eq!(g.splits.test[0].label, vec![0, 5]);
        assert!(matches!(
            gen_et(&[example(&["alien"])], &[], &[], &vocab),
            Err(Error::Data(_))
        ));
        assert!(gen_et(&[example(&[])], &[], &[], &vocab).is_err());
    }
}
