use std::collections::BTreeSet;

use super::sources::{KoreList, ScoredPair};
use super::{published, unresolved_error, DescriptionStore, Generated};
use crate::error::{Error, Result};
use crate::tasks::{SimilarityRecord, Splits};

/// Gold score of the KORE candidate at 1-based `rank`: 20 for the most
/// related, 1 for the least.
pub fn kore_score(rank: usize) -> Result<f64> {
    if !(1..=published::KORE_CANDIDATES).contains(&rank) {
        return Err(Error::InvalidArgument(format!(
            "kore rank {rank} outside 1..={}",
            published::KORE_CANDIDATES
        )));
    }
    Ok((published::KORE_CANDIDATES + 1 - rank) as f64)
}

/// ESR: KORE ranked lists and WikiSRS relatedness / similarity pairs, all
/// in the test split, with every entity resolved to a description.
///
/// Any unresolvable name is a hard error naming all of them.
pub fn gen_esr(
    kore: &[KoreList],
    wikisrs_rel: &[ScoredPair],
    wikisrs_sim: &[ScoredPair],
    store: &DescriptionStore,
) -> Result<Generated<SimilarityRecord>> {
    let mut missing = BTreeSet::new();
    let mut resolve = |name: &str| match store.resolve(name) {
        Some(d) => d.entity_id().to_owned(),
        None => {
            missing.insert(name.to_owned());
            String::new()
        }
    };
    let mut test = Vec::new();
    for (s, list) in kore.iter().enumerate() {
        if list.candidates.len() != published::KORE_CANDIDATES {
            return Err(Error::Data(format!(
                "kore seed {:?} has {} candidates, expected {}",
                list.seed,
                list.candidates.len(),
                published::KORE_CANDIDATES
            )));
        }
        let seed = resolve(&list.seed);
        for (k, c) in list.candidates.iter().enumerate() {
            test.push(SimilarityRecord {
                id: format!("kore-{s}-{}", k + 1),
                subset: "kore".into(),
                entity1: seed.clone(),
                entity2: resolve(c),
                score: kore_score(k + 1)?,
            });
        }
    }
    for (subset, pairs) in [("wikisrs_rel", wikisrs_rel), ("wikisrs_sim", wikisrs_sim)] {
        for (k, p) in pairs.iter().enumerate() {
            test.push(SimilarityRecord {
                id: format!("{subset}-{k}"),
                subset: subset.into(),
                entity1: resolve(&p.entity1),
                entity2: resolve(&p.entity2),
                score: p.score,
            });
        }
    }
    if !missing.is_empty() {
        return Err(unresolved_error("esr", missing));
    }
    let mut out = Generated::new(Splits {
        test,
        ..Splits::default()
    });
    out.stat("kore_seeds", kore.len());
    out.stat("wikisrs_rel_pairs", wikisrs_rel.len());
    out.stat("wikisrs_sim_pairs", wikisrs_sim.len());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EntityDescription;

    #[test]
    fn kore_scores_run_twenty_to_one() {
        assert_eq!(kore_score(1).unwrap(), 20.0);
        assert_eq!(kore_score(20).unwrap(), 1.0);
        assert!(kore_score(0).is_err() && kore_score(21).is_err());
    }

    #[test]
    fn unresolved_names_are_listed() {
        let store =
            DescriptionStore::new([EntityDescription::new("Paris", "Paris", ["city"]).unwrap()]);
        let pairs = [
            ScoredPair {
                entity1: "paris".into(),
                entity2: "Atlantis".into(),
                score: 3.0,
            },
            ScoredPair {
                entity1: "Mu".into(),
                entity2: "Paris".into(),
                score: 1.0,
            },
        ];
        let err = gen_esr(&[], &pairs, &[], &store).unwrap_err().to_string();
        assert!(err.contains("Atlantis, Mu"), "{err}");
        let ok = gen_esr(&[], &pairs[..0], &[], &store).unwrap();
        assert!(ok.splits.test.is_empty());
    }
}
