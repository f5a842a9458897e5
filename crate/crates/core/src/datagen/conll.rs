use std::collections::BTreeSet;

use super::sources::{AidaDocument, AidaSplit, CrossWikis};
use super::{unresolved_error, DescriptionStore, Generated};
use crate::error::Result;
use crate::tasks::linking::normalize;
use crate::tasks::{smooth_priors, CandidateRecord, LinkingRecord, Splits, MAX_CANDIDATES};

/// CoNLL: every KB-linked AIDA mention with CrossWikis candidates.
///
/// Candidates are the top 30 CrossWikis entries for the surface string,
/// minus those without a description. A gold entity not among them is
/// added at the absent-gold prior, replacing the last candidate when the
/// list is full. Priors are renormalized. Splits follow the AIDA split
/// (train / testa / testb); a gold entity without a description is a hard
/// error.
pub fn gen_conll(
    docs: &[AidaDocument],
    crosswikis: &CrossWikis,
    store: &DescriptionStore,
) -> Result<Generated<LinkingRecord>> {
    let mut splits: Splits<LinkingRecord> = Splits::default();
    let mut missing_gold = BTreeSet::new();
    let (mut nil, mut undescribed, mut gold_added) = (0, 0, 0);
    for doc in docs {
        for m in &doc.mentions {
            let Some(entity) = &m.entity else {
                nil += 1;
                continue;
            };
            let Some(gold) = store.resolve(entity).map(|d| d.entity_id().to_owned()) else {
                missing_gold.insert(entity.clone());
                continue;
            };
            let mut raw: Vec<(String, f64)> = Vec::new();
            for (e, p) in crosswikis.lookup(&m.surface).iter().take(MAX_CANDIDATES) {
                match store.resolve(e) {
                    Some(d) if !raw.iter().any(|(id, _)| id == d.entity_id()) => {
                        raw.push((d.entity_id().to_owned(), *p))
                    }
                    Some(_) => {}
                    None => undescribed += 1,
                }
            }
            let priors = if raw.iter().any(|(e, _)| *e == gold) {
                normalize(&mut raw);
                raw
            } else {
                gold_added += 1;
                raw.truncate(MAX_CANDIDATES - 1);
                smooth_priors(&raw, &gold)
            };
            let record = LinkingRecord {
                id: format!(
                    "{}-{}-{}",
                    doc.id.split_whitespace().collect::<Vec<_>>().join("_"),
                    m.sentence,
                    m.start
                ),
                context: doc.sentences[m.sentence].clone(),
                span: (m.start, m.end),
                candidates: priors
                    .into_iter()
                    .map(|(entity_id, prior)| CandidateRecord { entity_id, prior })
                    .collect(),
                gold,
            };
            match doc.split {
                AidaSplit::Train => splits.train.push(record),
                AidaSplit::Testa => splits.valid.push(record),
                AidaSplit::Testb => splits.test.push(record),
            }
        }
    }
    if !missing_gold.is_empty() {
        return Err(unresolved_error("conll gold", missing_gold));
    }
    let mut out = Generated::new(splits);
    out.stat("mentions", out.splits.all().count());
    out.stat("skipped_nil_mentions", nil);
    out.stat("dropped_undescribed_candidates", undescribed);
    out.stat("gold_added", gold_added);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sources::{parse_crosswikis, AidaMention};
    use crate::tasks::ABSENT_GOLD_PRIOR;
    use crate::types::EntityDescription;

    fn doc(entity: &str) -> AidaDocument {
        AidaDocument {
            id: "1 EU".into(),
            split: AidaSplit::Testb,
            sentences: vec![vec!["germany".into(), "won".into()]],
            mentions: vec![AidaMention {
                sentence: 0,
                start: 0,
                end: 0,
                surface: "Germany".into(),
                entity: Some(entity.into()),
            }],
        }
    }

    fn store(ids: &[&str]) -> DescriptionStore {
        DescriptionStore::new(
            ids.iter()
                .map(|t| EntityDescription::new(*t, *t, ["x"]).unwrap()),
        )
    }

    #[test]
    fn absent_gold_gets_tiny_prior() {
        let cw = parse_crosswikis("Germany\t0.5 Germany_national_football_team\nGermany\t0.3 Germany\nGermany\t0.2 Nowhere\n", "cw").unwrap();
        let g = gen_conll(
            &[doc("West Germany")],
            &cw,
            &store(&["Germany national football team", "Germany", "West Germany"]),
        )
        .unwrap();
        let r = &g.splits.test[0];
        assert_eq!(r.id, "1_EU-0-0");
        let ids: Vec<&str> = r.candidates.iter().map(|c| c.entity_id.as_str()).collect();
        assert_eq!(
            ids,
            ["Germany national football team", "Germany", "West Germany"]
        );
        let total = 0.8 + ABSENT_GOLD_PRIOR;
        assert!((r.candidates[0].prior - 0.5 / total).abs() < 1e-12);
        assert!((r.candidates[2].prior - ABSENT_GOLD_PRIOR / total).abs() < 1e-15);
        assert_eq!(g.stats["dropped_undescribed_candidates"], 1);
    }

    #[test]
    fn full_list_makes_room_for_gold() {
        let text: String = (0..40)
            .map(|k| format!("Germany\t{:.3} E{k}\n", 0.02 - k as f64 * 1e-4))
            .collect();
        let cw = parse_crosswikis(&text, "cw").unwrap();
        let mut ids: Vec<String> = (0..40).map(|k| format!("E{k}")).collect();
        ids.push("Gold".into());
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let g = gen_conll(&[doc("Gold")], &cw, &store(&refs)).unwrap();
        let c = &g.splits.test[0].candidates;
        assert_eq!(c.len(), MAX_CANDIDATES);
        assert_eq!(c.last().unwrap().entity_id, "Gold");
        assert!((c.iter().map(|c| c.prior).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn undescribed_gold_is_fatal() {
        let cw = CrossWikis::default();
        let err = gen_conll(&[doc("Atlantis")], &cw, &store(&[])).unwrap_err();
        assert!(err.to_string().contains("Atlantis"));
    }
}
