use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::sources::CorefDocument;
use super::{published, rng, Generated, SplitSpec};
use crate::embed_io::WordVectorTable;
use crate::error::{Error, Result};
use crate::metrics::cosine;
use crate::tasks::{PairRecord, Splits};
use crate::types::PairGroup;

#[derive(Debug, Clone, PartialEq)]
pub struct CapConfig {
    /// Quantile bins over mention-name cosine similarity.
    pub bins: usize,
    pub same: SplitSpec,
    pub next: SplitSpec,
    pub seed: u64,
}

impl Default for CapConfig {
    fn default() -> Self {
        CapConfig {
            bins: 10,
            same: published::CAP_SAME,
            next: published::CAP_NEXT,
            seed: 42,
        }
    }
}

struct Candidate {
    record: PairRecord,
    similarity: f64,
}

fn sanitize(id: &str) -> String {
    id.split_whitespace().collect::<Vec<_>>().join("_")
}

fn candidates(doc: &CorefDocument, wordvec: &WordVectorTable) -> (Vec<Candidate>, usize) {
    let mut out = Vec::new();
    let mut pronoun_pairs = 0;
    let vectors: Vec<Option<Vec<f32>>> = doc
        .mentions
        .iter()
        .map(|m| wordvec.average(doc.mention_tokens(m)))
        .collect();
    for (a, ma) in doc.mentions.iter().enumerate() {
        for (b, mb) in doc.mentions.iter().enumerate().skip(a + 1) {
            let group = match mb.sentence - ma.sentence {
                0 => PairGroup::Same,
                1 => PairGroup::Next,
                _ => break,
            };
            if ma.pronoun && mb.pronoun {
                pronoun_pairs += 1;
                continue;
            }
            let (context, offset) = match group {
                PairGroup::Same => (doc.sentences[ma.sentence].clone(), 0),
                PairGroup::Next => {
                    let first = &doc.sentences[ma.sentence];
                    let mut joined = first.clone();
                    joined.extend(doc.sentences[mb.sentence].iter().cloned());
                    (joined, first.len())
                }
            };
            let similarity = match (&vectors[a], &vectors[b]) {
                (Some(x), Some(y)) => cosine(x, y).unwrap_or(0.0),
                _ => 0.0,
            };
            out.push(Candidate {
                record: PairRecord {
                    id: format!("cap-{}-{}-{a}-{b}", group.as_str(), sanitize(&doc.id)),
                    context: context.clone(),
                    span: (ma.start, ma.end),
                    context2: context,
                    span2: (mb.start + offset, mb.end + offset),
                    label: u8::from(ma.cluster == mb.cluster),
                    group: Some(group),
                },
                similarity,
            });
        }
    }
    (out, pronoun_pairs)
}

/// CAP: same- and next-sentence mention pairs from coreference documents.
///
/// Pairs of two pronouns are dropped. Within each group, pairs are binned
/// into quantiles of mention-name cosine similarity and every bin
/// contributes equally many positives and negatives; bins lacking either
/// label are skipped.
pub fn gen_cap(
    docs: &[CorefDocument],
    wordvec: &WordVectorTable,
    cfg: &CapConfig,
) -> Result<Generated<PairRecord>> {
    if cfg.bins == 0 {
        return Err(Error::InvalidArgument("cap needs at least one bin".into()));
    }
    let per_doc: Vec<(Vec<Candidate>, usize)> =
        docs.par_iter().map(|d| candidates(d, wordvec)).collect();
    let pronoun_pairs: usize = per_doc.iter().map(|p| p.1).sum();
    let all: Vec<Candidate> = per_doc.into_iter().flat_map(|p| p.0).collect();

    let mut splits: Splits<PairRecord> = Splits::default();
    let mut generated_stats = Vec::new();
    for (group, spec) in [(PairGroup::Same, cfg.same), (PairGroup::Next, cfg.next)] {
        let name = group.as_str();
        let mut rng = rng(cfg.seed, &format!("cap-{name}"));
        let mut pool: Vec<&Candidate> = all
            .iter()
            .filter(|c| c.record.group == Some(group))
            .collect();
        // stable order: by similarity, ties in generation order
        pool.sort_by(|x, y| x.similarity.total_cmp(&y.similarity));
        let n = pool.len();
        let mut bins: Vec<(Vec<&PairRecord>, Vec<&PairRecord>)> =
            vec![(Vec::new(), Vec::new()); cfg.bins];
        for (rank, c) in pool.iter().enumerate() {
            let bin = rank * cfg.bins / n.max(1);
            if c.record.label == 1 {
                bins[bin].0.push(&c.record);
            } else {
                bins[bin].1.push(&c.record);
            }
        }
        let mut units: Vec<(usize, &PairRecord, &PairRecord)> = Vec::new();
        let mut skipped = 0;
        for (b, (mut pos, mut neg)) in bins.into_iter().enumerate() {
            if pos.is_empty() || neg.is_empty() {
                if !(pos.is_empty() && neg.is_empty()) {
                    warn!("cap {name}: bin {b} lacks positives or negatives, skipped");
                    skipped += 1;
                }
                continue;
            }
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            units.extend(pos.into_iter().zip(neg).map(|(p, q)| (b, p, q)));
        }
        units.shuffle(&mut rng);
        let fitted = spec.fit(2 * units.len(), true);
        let mut bin_counts = vec![0usize; cfg.bins];
        let mut cursor = units.into_iter();
        for (target, count) in [
            (&mut splits.train, fitted.train),
            (&mut splits.valid, fitted.valid),
            (&mut splits.test, fitted.test),
        ] {
            let mut chunk: Vec<PairRecord> = Vec::with_capacity(count);
            for (b, p, q) in cursor.by_ref().take(count / 2) {
                bin_counts[b] += 1;
                chunk.push(p.clone());
                chunk.push(q.clone());
            }
            chunk.shuffle(&mut rng);
            target.extend(chunk);
        }
        generated_stats.push((format!("{name}/candidates"), n));
        generated_stats.push((format!("{name}/skipped_bins"), skipped));
        for (b, c) in bin_counts.iter().enumerate() {
            generated_stats.push((format!("{name}/bin{b}/pairs_per_label"), *c));
        }
    }
    let mut out = Generated::new(splits);
    out.stat("pronoun_pairs_dropped", pronoun_pairs);
    for (k, v) in generated_stats {
        out.stat(&k, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sources::parse_preco;

    fn table() -> WordVectorTable {
        let mut t = WordVectorTable::new(2);
        for (w, v) in [
            ("he", [1.0, 0.0]),
            ("she", [0.9, 0.1]),
            ("mary", [0.0, 1.0]),
            ("john", [0.2, 0.8]),
            ("bob", [0.5, 0.5]),
        ] {
            t.insert(w, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn pronoun_pairs_are_dropped_and_next_contexts_concatenate() {
        let line = r#"{"id":"d","sentences":[["He","met","her","."],["Mary","smiled","."]],"mention_clusters":[[[0,0,1]],[[0,2,3],[1,0,1]]]}"#;
        let docs = parse_preco(line, "p").unwrap();
        let (cands, pronouns) = candidates(&docs[0], &table());
        assert_eq!(pronouns, 1);
        assert_eq!(cands.len(), 2);
        assert!(cands
            .iter()
            .all(|c| c.record.group == Some(PairGroup::Next)));
        let (he_mary, her_mary) = (&cands[0].record, &cands[1].record);
        assert_eq!((he_mary.label, her_mary.label), (0, 1));
        assert_eq!(her_mary.context.len(), 7);
        assert_eq!(her_mary.span2, (4, 4));
        assert_eq!(her_mary.context2[4], "mary");
    }

    #[test]
    fn zero_bins_rejected() {
        let cfg = CapConfig {
            bins: 0,
            ..CapConfig::default()
        };
        assert!(gen_cap(&[], &table(), &cfg).is_err());
    }
}
