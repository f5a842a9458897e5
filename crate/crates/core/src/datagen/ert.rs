use std::collections::{BTreeMap, HashMap};

use log::warn;
use rand::seq::SliceRandom;

use super::sources::KbTuple;
use super::{published, rng, DescriptionStore, Generated, SplitSpec};
use crate::embed_io::{EmbeddingSet, WordVectorTable};
use crate::error::Result;
use crate::metrics::make_pair_feature;
use crate::probe::{
    train_linear, MixMode, MixSetup, MixWeights, ProbeInputs, Targets, TrainConfig,
};
use crate::tasks::{argmax, RelationRecord, Splits};
use crate::text::tokenize;

/// Relations with fewer tuples cannot fill 5 / 10 / 10 and are excluded.
pub const MIN_TUPLES_PER_RELATION: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct ErtConfig {
    /// Relations kept after dropping the easiest.
    pub relations: usize,
    pub per_relation: SplitSpec,
    /// Tuples per relation held out to score the name-only probe.
    pub probe_dev_per_relation: usize,
    /// Cap on name-only probe training tuples per relation.
    pub probe_train_per_relation: usize,
    pub probe: TrainConfig,
    pub seed: u64,
}

impl Default for ErtConfig {
    fn default() -> Self {
        ErtConfig {
            relations: published::ERT_RELATIONS,
            per_relation: published::ERT_PER_RELATION,
            probe_dev_per_relation: 5,
            probe_train_per_relation: 100,
            probe: TrainConfig::default(),
            seed: 42,
        }
    }
}

struct Resolved {
    entity1: String,
    entity2: String,
}

/// Dev accuracy of a multiclass probe that sees only the averaged word
/// vectors of the two entity names, per relation (in `groups` order).
fn name_probe_accuracy(
    groups: &[(&String, Vec<Resolved>)],
    titles: &HashMap<String, String>,
    wordvec: &WordVectorTable,
    cfg: &ErtConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>> {
    let dim = wordvec.dim();
    let name_vec = |id: &str| {
        let tokens = tokenize(titles.get(id).map_or(id, String::as_str));
        wordvec.average(&tokens).unwrap_or_else(|| vec![0.0; dim])
    };
    let (mut train_rows, mut train_y, mut dev_rows, mut dev_y) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (class, (_, tuples)) in groups.iter().enumerate() {
        let mut order: Vec<usize> = (0..tuples.len()).collect();
        order.shuffle(rng);
        for (k, &t) in order.iter().enumerate() {
            let feature =
                make_pair_feature(&name_vec(&tuples[t].entity1), &name_vec(&tuples[t].entity2))?;
            if k < cfg.probe_dev_per_relation {
                dev_rows.push(feature);
                dev_y.push(class);
            } else if k < cfg.probe_dev_per_relation + cfg.probe_train_per_relation {
                train_rows.push(feature);
                train_y.push(class);
            }
        }
    }
    let as_set = |rows: Vec<Vec<f32>>| {
        let width = 4 * dim;
        EmbeddingSet::from_rows(
            1,
            width,
            rows.into_iter()
                .enumerate()
                .map(|(k, r)| (k.to_string(), r)),
        )
    };
    let (train_set, dev_set) = (as_set(train_rows)?, as_set(dev_rows)?);
    let train_inputs = ProbeInputs::single(&train_set, (0..train_set.n_instances()).collect());
    let dev_inputs = ProbeInputs::single(&dev_set, (0..dev_set.n_instances()).collect());
    let n_classes = groups.len();
    let probe = train_linear(
        &train_inputs,
        &Targets::Multiclass {
            n_classes,
            labels: train_y,
        },
        &cfg.probe,
        &MixSetup::fixed(MixWeights::initial(MixMode::Unnormalized, 1)),
        None,
    )?;
    let mut correct = vec![0usize; n_classes];
    let mut total = vec![0usize; n_classes];
    for (logits, &gold) in probe.logits(&dev_inputs)?.into_iter().zip(&dev_y) {
        total[gold] += 1;
        correct[gold] += usize::from(argmax(logits) == gold);
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&c, &t)| c as f64 / t.max(1) as f64)
        .collect())
}

/// ERT: Freebase-style tuples with described entities, restricted to the
/// relations a name-only probe finds hardest.
///
/// Relations with fewer than [`MIN_TUPLES_PER_RELATION`] tuples are
/// excluded. The remaining relations are ranked by the dev accuracy of a
/// probe over averaged word vectors of the two entity names, and the most
/// accurate are dropped (ties by name) until `cfg.relations` remain. Each
/// retained relation contributes `cfg.per_relation` tuples per split;
/// relation ids index the retained names in sorted order.
pub fn gen_ert(
    tuples: &[KbTuple],
    store: &DescriptionStore,
    wordvec: &WordVectorTable,
    cfg: &ErtConfig,
) -> Result<Generated<RelationRecord>> {
    let mut rng = rng(cfg.seed, "ert");
    let mut undescribed = 0;
    let mut titles: HashMap<String, String> = HashMap::new();
    let mut by_relation: BTreeMap<&String, Vec<Resolved>> = BTreeMap::new();
    for t in tuples {
        let (Some(d1), Some(d2)) = (store.resolve(&t.entity1), store.resolve(&t.entity2)) else {
            undescribed += 1;
            continue;
        };
        for d in [d1, d2] {
            titles
                .entry(d.entity_id().to_owned())
                .or_insert_with(|| d.title().to_owned());
        }
        by_relation.entry(&t.relation).or_default().push(Resolved {
            entity1: d1.entity_id().to_owned(),
            entity2: d2.entity_id().to_owned(),
        });
    }
    let needed = MIN_TUPLES_PER_RELATION.max(cfg.per_relation.total());
    let mut small = 0;
    let groups: Vec<(&String, Vec<Resolved>)> = by_relation
        .into_iter()
        .filter(|(name, list)| {
            let keep = list.len() >= needed;
            if !keep {
                warn!(
                    "ert: relation {name} has {} tuples (< {needed}), excluded",
                    list.len()
                );
                small += 1;
            }
            keep
        })
        .collect();

    let mut dropped_easy = Vec::new();
    let retained: Vec<usize> = if groups.len() > cfg.relations {
        let accuracy = name_probe_accuracy(&groups, &titles, wordvec, cfg, &mut rng)?;
        let mut ranked: Vec<usize> = (0..groups.len()).collect();
        ranked.sort_by(|&a, &b| {
            accuracy[b]
                .total_cmp(&accuracy[a])
                .then_with(|| groups[a].0.cmp(groups[b].0))
        });
        let n_drop = groups.len() - cfg.relations;
        dropped_easy = ranked[..n_drop].to_vec();
        let mut keep = ranked[n_drop..].to_vec();
        keep.sort_unstable();
        keep
    } else {
        (0..groups.len()).collect()
    };
    for &g in &dropped_easy {
        log::info!("ert: dropped easy relation {}", groups[g].0);
    }

    let mut splits: Splits<RelationRecord> = Splits::default();
    let spec = cfg.per_relation;
    for (relation, &g) in retained.iter().enumerate() {
        let (name, list) = &groups[g];
        let mut order: Vec<usize> = (0..list.len()).collect();
        order.shuffle(&mut rng);
        let record = |k: usize, t: &Resolved| RelationRecord {
            id: format!("ert-{relation}-{k}"),
            entity1: t.entity1.clone(),
            entity2: t.entity2.clone(),
            relation,
            relation_name: (*name).clone(),
        };
        for (k, &t) in order.iter().take(spec.total()).enumerate() {
            let target = if k < spec.train {
                &mut splits.train
            } else if k < spec.train + spec.valid {
                &mut splits.valid
            } else {
                &mut splits.test
            };
            target.push(record(k, &list[t]));
        }
    }
    let mut out = Generated::new(splits);
    out.stat("relations_retained", retained.len());
    out.stat("relations_dropped_easy", dropped_easy.len());
    out.stat("relations_too_small", small);
    out.stat("tuples_undescribed", undescribed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EntityDescription;
    use rand::{Rng, SeedableRng};

    /// Three relations of 30 tuples. In "easy" both names contain a word
    /// no other relation uses; the other two draw names from one shared pool.
    fn fixture() -> (Vec<KbTuple>, DescriptionStore, WordVectorTable) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut table = WordVectorTable::new(4);
        table.insert("zeta", vec![5.0, 0.0, 0.0, 0.0]).unwrap();
        for w in 0..8 {
            let v: Vec<f32> = (0..4)
                .map(|d| {
                    if d == 0 {
                        0.0
                    } else {
                        r.random_range(-1.0..1.0)
                    }
                })
                .collect();
            table.insert(&format!("w{w}"), v).unwrap();
        }
        let mut descriptions = Vec::new();
        let mut tuples = Vec::new();
        let mut entity = |title: String| {
            let id = format!("Q{}", descriptions.len());
            descriptions.push(EntityDescription::new(id.clone(), title, ["x"]).unwrap());
            id
        };
        for relation in ["easy", "hard_a", "hard_b"] {
            for k in 0..30 {
                let mut name = |side: u32| {
                    if relation == "easy" {
                        format!("zeta {k}{side}")
                    } else {
                        format!("w{} {k}{side}", r.random_range(0..8))
                    }
                };
                let (n1, n2) = (name(1), name(2));
                tuples.push(KbTuple {
                    entity1: entity(n1),
                    relation: relation.into(),
                    entity2: entity(n2),
                });
            }
        }
        (tuples, DescriptionStore::new(descriptions), table)
    }

    #[test]
    fn name_predictable_relation_is_dropped_first() {
        let (tuples, store, table) = fixture();
        let cfg = ErtConfig {
            relations: 2,
            ..ErtConfig::default()
        };
        let g = gen_ert(&tuples, &store, &table, &cfg).unwrap();
        let names: std::collections::BTreeSet<&str> =
            g.splits.all().map(|r| r.relation_name.as_str()).collect();
        assert_eq!(names.into_iter().collect::<Vec<_>>(), ["hard_a", "hard_b"]);
        assert_eq!(g.splits.sizes(), (10, 20, 20));
        assert!(g
            .splits
            .all()
            .all(|r| r.relation == usize::from(r.relation_name == "hard_b")));
    }

    #[test]
    fn small_relations_excluded() {
        let (mut tuples, store, table) = fixture();
        tuples.truncate(30 + 24);
        let g = gen_ert(&tuples, &store, &table, &ErtConfig::default()).unwrap();
        assert_eq!(g.stats["relations_too_small"], 1);
        assert_eq!(g.stats["relations_retained"], 1);
        assert_eq!(g.stats["relations_dropped_easy"], 0);
    }
}
