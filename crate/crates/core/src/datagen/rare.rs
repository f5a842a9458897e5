use super::sources::RareDocument;
use super::{rng, sample_splits, DescriptionStore, Generated, SplitSpec};
use crate::error::Result;
use crate::tasks::{CandidateRecord, LinkingRecord};

const CANDIDATES: usize = 4;

/// Rare: blanked documents with exactly four described candidates, sampled.
///
/// The blank token is the mention span; priors are uniform.
pub fn gen_rare(
    docs: &[RareDocument],
    store: &DescriptionStore,
    spec: SplitSpec,
    seed: u64,
) -> Result<Generated<LinkingRecord>> {
    let (mut wrong_count, mut undescribed) = (0, 0);
    let mut pool = Vec::new();
    for d in docs {
        if d.candidates.len() != CANDIDATES || !d.candidates.contains(&d.gold) {
            wrong_count += 1;
            continue;
        }
        let resolved: Option<Vec<String>> = d
            .candidates
            .iter()
            .map(|c| store.resolve(c).map(|e| e.entity_id().to_owned()))
            .collect();
        let Some(ids) = resolved else {
            undescribed += 1;
            continue;
        };
        let gold = ids[d
            .candidates
            .iter()
            .position(|c| *c == d.gold)
            .expect("checked above")]
        .clone();
        pool.push(LinkingRecord {
            id: d.id.clone(),
            context: d.tokens.clone(),
            span: (d.blank, d.blank),
            candidates: ids
                .into_iter()
                .map(|entity_id| CandidateRecord {
                    entity_id,
                    prior: 1.0 / CANDIDATES as f64,
                })
                .collect(),
            gold,
        });
    }
    let fitted = spec.fit(pool.len(), false);
    let mut rng = rng(seed, "rare");
    let mut out = Generated::new(sample_splits(pool, fitted, &mut rng));
    out.stat("dropped_candidate_count", wrong_count);
    out.stat("dropped_undescribed", undescribed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EntityDescription;

    fn doc(id: &str, candidates: &[&str]) -> RareDocument {
        RareDocument {
            id: id.into(),
            tokens: vec!["__blank__".into(), "won".into()],
            blank: 0,
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
            gold: candidates[0].into(),
        }
    }

    #[test]
    fn five_candidates_dropped() {
        let store = DescriptionStore::new(
            ["A", "B", "C", "D", "E"].map(|t| EntityDescription::new(t, t, ["x"]).unwrap()),
        );
        let docs = [
            doc("1", &["A", "B", "C", "D"]),
            doc("2", &["A", "B", "C", "D", "E"]),
            doc("3", &["A", "B", "C", "Z"]),
        ];
        let g = gen_rare(&docs, &store, SplitSpec::new(0, 0, 10), 42).unwrap();
        assert_eq!(g.stats["dropped_candidate_count"], 1);
        assert_eq!(g.stats["dropped_undescribed"], 1);
        assert_eq!(g.splits.test.len(), 1);
        assert_eq!(g.splits.test[0].span, (0, 0));
        assert!(g.splits.test[0].candidates.iter().all(|c| c.prior == 0.25));
    }
}
