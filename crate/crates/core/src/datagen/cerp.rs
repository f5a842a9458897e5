use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::sources::{ConceptAssertion, NerAnnotation};
use super::{balanced_splits, rng, Generated, SplitSpec};
use crate::embed_io::WordVectorTable;
use crate::error::Result;
use crate::tasks::PairRecord;

/// ConceptNet relations excluded as too shallow.
pub const DROPPED_RELATIONS: &[&str] = &["RelatedTo", "Synonym", "TranslationOf"];

/// Surface templates excluded by wording (ConceptNet renders some
/// `AtLocation` edges as "you are likely to find [[x]] in [[y]]").
const DROPPED_TEMPLATE: &[&str] = &["likely", "to", "find"];

/// Entity types that do not name an entity.
pub const DROPPED_NER_TYPES: &[&str] = &[
    "DATE", "TIME", "PERCENT", "MONEY", "QUANTITY", "ORDINAL", "CARDINAL",
];

/// Tokens after which the negation is inserted.
pub const AUXILIARY_VERBS: &[&str] = &[
    "is", "are", "was", "were", "am", "be", "can", "could", "will", "would", "should", "may",
    "might", "must", "do", "does", "did", "has", "have", "had",
];

const NEGATION: &str = "not";

/// A sentence with its two concept spans (inclusive, in order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub tokens: Vec<String>,
    pub first: (usize, usize),
    pub second: (usize, usize),
}

/// The four sentences built from one assertion "A rel B" and a
/// replacement C for A.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CerpVariants {
    /// "A rel B", label 1.
    pub positive: Variant,
    /// "C rel B", label 0.
    pub replaced: Variant,
    /// "A rel not B", label 0.
    pub negated: Variant,
    /// "C rel not B", label 1.
    pub replaced_negated: Variant,
}

fn inside(k: usize, span: (usize, usize)) -> bool {
    span.0 <= k && k <= span.1
}

fn shift(span: (usize, usize), at: usize, by: isize) -> (usize, usize) {
    let move_ = |v: usize| {
        if v >= at {
            (v as isize + by) as usize
        } else {
            v
        }
    };
    (move_(span.0), move_(span.1))
}

/// Inserts the negation after the first auxiliary verb outside both
/// concept spans. `None` when there is no such verb or the sentence is
/// already negated there.
pub fn negate(v: &Variant) -> Option<Variant> {
    let aux = (0..v.tokens.len()).find(|&k| {
        !inside(k, v.first)
            && !inside(k, v.second)
            && AUXILIARY_VERBS.contains(&v.tokens[k].as_str())
    })?;
    if v.tokens
        .get(aux + 1)
        .is_some_and(|t| t == NEGATION || t == "n't")
    {
        return None;
    }
    let mut tokens = v.tokens.clone();
    tokens.insert(aux + 1, NEGATION.to_owned());
    Some(Variant {
        tokens,
        first: shift(v.first, aux + 1, 1),
        second: shift(v.second, aux + 1, 1),
    })
}

fn replace_first(v: &Variant, replacement: &[String]) -> Variant {
    let (a0, a1) = v.first;
    let mut tokens = v.tokens[..a0].to_vec();
    tokens.extend(replacement.iter().cloned());
    tokens.extend(v.tokens[a1 + 1..].iter().cloned());
    let delta = replacement.len() as isize - (a1 - a0 + 1) as isize;
    Variant {
        tokens,
        first: (a0, a0 + replacement.len() - 1),
        second: shift(v.second, a1 + 1, delta),
    }
}

/// Builds the four variants; `None` when the sentence cannot be negated.
pub fn cerp_variants(positive: Variant, replacement: &[String]) -> Option<CerpVariants> {
    let negated = negate(&positive)?;
    let replaced = replace_first(&positive, replacement);
    let replaced_negated = negate(&replaced)?;
    Some(CerpVariants {
        positive,
        replaced,
        negated,
        replaced_negated,
    })
}

fn entity_check(
    spans: &[(usize, usize)],
    ner: Option<&NerAnnotation>,
) -> std::result::Result<(), &'static str> {
    let Some(ner) = ner else {
        return Err("non_entity");
    };
    for &(s, e) in spans {
        let overlapping: Vec<&str> = ner
            .spans
            .iter()
            .zip(&ner.types)
            .filter(|(&(i, j), _)| i <= e && s <= j)
            .map(|(_, t)| t.as_str())
            .collect();
        if overlapping.is_empty() {
            return Err("non_entity");
        }
        if overlapping.iter().any(|t| DROPPED_NER_TYPES.contains(t)) {
            return Err("excluded_entity_type");
        }
    }
    Ok(())
}

fn normalized(v: Vec<f32>) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    (norm > 0.0).then(|| v.iter().map(|x| (*x as f64 / norm) as f32).collect())
}

/// CERP: filtered ConceptNet assertions plus generated negatives.
///
/// Kept assertions are English, outside [`DROPPED_RELATIONS`], have exactly
/// two concepts that each overlap an NER entity of an allowed type, and
/// contain an auxiliary verb. For "A rel B", A is replaced by the most
/// cosine-similar other concept C (averaged word vectors; ties go to the
/// lexicographically smallest), giving "C rel B" (negative), "A rel not B"
/// (negative) and "C rel not B" (positive).
pub fn gen_cerp(
    assertions: &[ConceptAssertion],
    ner: &HashMap<String, NerAnnotation>,
    wordvec: &WordVectorTable,
    spec: SplitSpec,
    seed: u64,
) -> Result<Generated<PairRecord>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut kept: Vec<Variant> = Vec::new();
    for a in assertions {
        let reason = if a.language != "en" {
            Some("dropped_language")
        } else if DROPPED_RELATIONS.contains(&a.relation.as_str()) {
            Some("dropped_relation")
        } else if a.spans.len() != 2 {
            Some("dropped_surface")
        } else if a.tokens.windows(3).any(|w| w == DROPPED_TEMPLATE) {
            Some("dropped_relation")
        } else {
            match entity_check(&a.spans, ner.get(&a.id)) {
                Err("non_entity") => Some("dropped_non_entity"),
                Err(_) => Some("dropped_entity_type"),
                Ok(()) => None,
            }
        };
        match reason {
            Some(r) => *counts.entry(r).or_default() += 1,
            None => kept.push(Variant {
                tokens: a.tokens.clone(),
                first: a.spans[0],
                second: a.spans[1],
            }),
        }
    }
    let concept = |v: &Variant, s: (usize, usize)| v.tokens[s.0..=s.1].to_vec();

    // replacement pool: every distinct concept with a known vector, sorted
    let mut pool: Vec<Vec<String>> = kept
        .iter()
        .flat_map(|v| [concept(v, v.first), concept(v, v.second)])
        .collect();
    pool.sort();
    pool.dedup();
    let pool_vectors: Vec<(Vec<String>, Vec<f32>)> = pool
        .into_iter()
        .filter_map(|c| wordvec.average(&c).and_then(normalized).map(|v| (c, v)))
        .collect();

    let variants: Vec<std::result::Result<CerpVariants, &'static str>> = kept
        .par_iter()
        .map(|v| {
            let a = concept(v, v.first);
            let b = concept(v, v.second);
            let query = wordvec
                .average(&a)
                .and_then(normalized)
                .ok_or("skipped_no_vector")?;
            let mut best: Option<(f32, &Vec<String>)> = None;
            for (c, cv) in &pool_vectors {
                if *c == a || *c == b {
                    continue;
                }
                let sim: f32 = query.iter().zip(cv).map(|(x, y)| x * y).sum();
                if best.is_none_or(|(s, _)| sim > s) {
                    best = Some((sim, c));
                }
            }
            let (_, c) = best.ok_or("skipped_no_replacement")?;
            cerp_variants(v.clone(), c).ok_or("skipped_no_relation_verb")
        })
        .collect();

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let record = |k: usize, tag: &str, v: &Variant, label: u8| PairRecord {
        id: format!("cerp-{k}-{tag}"),
        context: v.tokens.clone(),
        span: v.first,
        context2: v.tokens.clone(),
        span2: v.second,
        label,
        group: None,
    };
    for (k, r) in variants.iter().enumerate() {
        match r {
            Ok(vs) => {
                positives.push(record(k, "pos", &vs.positive, 1));
                negatives.push(record(k, "rep", &vs.replaced, 0));
                negatives.push(record(k, "neg", &vs.negated, 0));
                positives.push(record(k, "repneg", &vs.replaced_negated, 1));
            }
            Err(reason) => *counts.entry(reason).or_default() += 1,
        }
    }
    let fitted = spec.fit(2 * positives.len().min(negatives.len()), true);
    let mut rng = rng(seed, "cerp");
    let mut out = Generated::new(balanced_splits(positives, negatives, fitted, &mut rng));
    out.stat("assertions_kept", kept.len());
    for (k, v) in counts {
        out.stat(k, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn four_variant_pattern() {
        let positive = Variant {
            tokens: toks("connecticut is a state"),
            first: (0, 0),
            second: (2, 3),
        };
        let v = cerp_variants(positive, &toks("new york city")).unwrap();
        assert_eq!(v.replaced.tokens, toks("new york city is a state"));
        assert_eq!((v.replaced.first, v.replaced.second), ((0, 2), (4, 5)));
        assert_eq!(v.negated.tokens, toks("connecticut is not a state"));
        assert_eq!(v.negated.second, (3, 4));
        assert_eq!(
            v.replaced_negated.tokens,
            toks("new york city is not a state")
        );
        assert_eq!(v.replaced_negated.second, (5, 6));
    }

    #[test]
    fn negation_needs_a_verb_outside_the_concepts() {
        let v = Variant {
            tokens: toks("what is love part of life"),
            first: (0, 2),
            second: (5, 5),
        };
        assert_eq!(negate(&v), None);
        let modal = Variant {
            tokens: toks("gin can make a martini"),
            first: (0, 0),
            second: (2, 4),
        };
        assert_eq!(
            negate(&modal).unwrap().tokens,
            toks("gin can not make a martini")
        );
        let already = Variant {
            tokens: toks("a is not b"),
            first: (0, 0),
            second: (3, 3),
        };
        assert_eq!(negate(&already), None);
    }

    #[test]
    fn ner_filter() {
        let ann = |types: &[&str]| NerAnnotation {
            instance_id: "x".into(),
            spans: vec![(0, 0), (3, 3)],
            types: types.iter().map(|t| t.to_string()).collect(),
        };
        assert_eq!(
            entity_check(&[(0, 0), (3, 3)], Some(&ann(&["GPE", "ORG"]))),
            Ok(())
        );
        assert_eq!(
            entity_check(&[(0, 0), (3, 3)], Some(&ann(&["GPE", "DATE"]))),
            Err("excluded_entity_type")
        );
        assert_eq!(
            entity_check(&[(0, 0), (2, 2)], Some(&ann(&["GPE", "ORG"]))),
            Err("non_entity")
        );
        assert_eq!(entity_check(&[(0, 0)], None), Err("non_entity"));
    }
}
