//! Construction of the task datasets from raw source corpora.
//!
//! Every generator is a pure function of its parsed sources and a seed.
//! Split targets default to the published dataset sizes and shrink
//! proportionally when a source is too small to fill them.

mod cap;
mod cerp;
mod conll;
mod efp;
mod ert;
mod esr;
mod et;
mod pipeline;
mod rare;
pub mod sources;

pub use cap::{gen_cap, CapConfig};
pub use cerp::{
    cerp_variants, gen_cerp, negate, CerpVariants, Variant, AUXILIARY_VERBS, DROPPED_NER_TYPES,
};
pub use conll::gen_conll;
pub use efp::gen_efp;
pub use ert::{gen_ert, ErtConfig, MIN_TUPLES_PER_RELATION};
pub use esr::{gen_esr, kore_score};
pub use et::gen_et;
pub use pipeline::{files, generate, DatagenOptions, DatagenSummary};
pub use rare::gen_rare;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tasks::{write_jsonl, Splits};
use crate::types::EntityDescription;

/// Target train / valid / test sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl SplitSpec {
    pub const fn new(train: usize, valid: usize, test: usize) -> Self {
        SplitSpec { train, valid, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    /// Targets scaled down so they fit in `available` items (floor per
    /// split). With `even`, every count is rounded down to an even number.
    pub fn fit(&self, available: usize, even: bool) -> SplitSpec {
        let round = |v: usize| if even { v - v % 2 } else { v };
        let total = self.total();
        if available >= total {
            return *self;
        }
        let scale =
            |t: usize| round(((t as u128 * available as u128) / total.max(1) as u128) as usize);
        SplitSpec::new(scale(self.train), scale(self.valid), scale(self.test))
    }
}

/// Published split sizes.
pub mod published {
    use super::SplitSpec;

    pub const CAP_SAME: SplitSpec = SplitSpec::new(3982, 3806, 3938);
    pub const CAP_NEXT: SplitSpec = SplitSpec::new(3982, 3828, 3850);
    pub const CERP: SplitSpec = SplitSpec::new(4000, 4000, 4000);
    pub const EFP: SplitSpec = SplitSpec::new(10000, 2000, 2000);
    pub const ET: SplitSpec = SplitSpec::new(1998, 1998, 1998);
    pub const ERT_RELATIONS: usize = 626;
    /// Tuples per retained relation.
    pub const ERT_PER_RELATION: SplitSpec = SplitSpec::new(5, 10, 10);
    pub const CONLL: SplitSpec = SplitSpec::new(18538, 4790, 4481);
    pub const CONLL_MENTIONS: usize = 27816;
    pub const RARE: SplitSpec = SplitSpec::new(10000, 4000, 4000);
    pub const KORE_SEEDS: usize = 20;
    pub const KORE_CANDIDATES: usize = 20;
    pub const WIKISRS_PAIRS: usize = 688;
}

/// Generated splits plus named counters (drops, warnings, pool sizes).
#[derive(Debug, Clone, PartialEq)]
pub struct Generated<T> {
    pub splits: Splits<T>,
    pub stats: BTreeMap<String, usize>,
}

impl<T> Generated<T> {
    pub(crate) fn new(splits: Splits<T>) -> Self {
        Generated {
            splits,
            stats: BTreeMap::new(),
        }
    }

    pub(crate) fn stat(&mut self, name: &str, value: usize) {
        self.stats.insert(name.to_owned(), value);
    }
}

impl<T: Serialize> Generated<T> {
    /// Writes `{dir}/train.jsonl`, `valid.jsonl`, `test.jsonl`; empty train
    /// and valid splits are not written.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, split) in [
            ("train", &self.splits.train),
            ("valid", &self.splits.valid),
            ("test", &self.splits.test),
        ] {
            if name == "test" || !split.is_empty() {
                write_jsonl(&dir.join(format!("{name}.jsonl")), split)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn rng(seed: u64, salt: &str) -> ChaCha8Rng {
    // fold the salt in so generators sharing a seed draw independent streams
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Shuffles `items` and cuts train / valid / test off the front.
pub(crate) fn sample_splits<T>(
    mut items: Vec<T>,
    spec: SplitSpec,
    rng: &mut ChaCha8Rng,
) -> Splits<T> {
    items.shuffle(rng);
    items.truncate(spec.total());
    let test = items.split_off(spec.train + spec.valid);
    let valid = items.split_off(spec.train);
    Splits {
        train: items,
        valid,
        test,
    }
}

/// Label-balanced split: `positives` and `negatives` are shuffled and each
/// split takes half its count from either side.
pub(crate) fn balanced_splits<T>(
    mut positives: Vec<T>,
    mut negatives: Vec<T>,
    spec: SplitSpec,
    rng: &mut ChaCha8Rng,
) -> Splits<T> {
    positives.shuffle(rng);
    negatives.shuffle(rng);
    let mut take = |n: usize| -> Vec<T> {
        let half = n / 2;
        let mut out: Vec<T> = positives.drain(..half).collect();
        out.extend(negatives.drain(..half));
        out.shuffle(rng);
        out
    };
    Splits {
        train: take(spec.train),
        valid: take(spec.valid),
        test: take(spec.test),
    }
}

/// MediaWiki page-title normalization: underscores become spaces, runs of
/// whitespace collapse, and the first character is uppercased.
pub fn normalize_title(title: &str) -> String {
    let joined = title
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let mut chars = joined.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Resolves entity names to description-store entries: an explicit
/// alignment first, then the normalized entity id, then a case-insensitive
/// title match.
#[derive(Debug, Clone, Default)]
pub struct DescriptionStore {
    by_id: BTreeMap<String, EntityDescription>,
    by_title: BTreeMap<String, String>,
    alignment: BTreeMap<String, String>,
}

impl DescriptionStore {
    pub fn new(descriptions: impl IntoIterator<Item = EntityDescription>) -> Self {
        let mut store = DescriptionStore::default();
        for d in descriptions {
            store
                .by_title
                .entry(d.title().to_lowercase())
                .or_insert_with(|| d.entity_id().to_owned());
            store.by_id.entry(d.entity_id().to_owned()).or_insert(d);
        }
        store
    }

    /// Adds `name -> entity id` overrides.
    pub fn with_alignment(mut self, alignment: BTreeMap<String, String>) -> Self {
        self.alignment = alignment;
        self
    }

    pub fn resolve(&self, name: &str) -> Option<&EntityDescription> {
        if let Some(id) = self.alignment.get(name) {
            return self.by_id.get(id);
        }
        self.by_id
            .get(name)
            .or_else(|| self.by_id.get(&normalize_title(name)))
            .or_else(|| {
                self.by_title
                    .get(&normalize_title(name).to_lowercase())
                    .and_then(|id| self.by_id.get(id))
            })
    }

    pub fn get(&self, entity_id: &str) -> Option<&EntityDescription> {
        self.by_id.get(entity_id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// The entries for `ids`, in id order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<EntityDescription> {
        let wanted: BTreeSet<&str> = ids.into_iter().collect();
        wanted
            .into_iter()
            .filter_map(|id| self.by_id.get(id).cloned())
            .collect()
    }
}

pub(crate) fn unresolved_error(what: &str, names: BTreeSet<String>) -> Error {
    let list: Vec<String> = names.into_iter().collect();
    Error::Data(format!(
        "{what}: {} entities have no description (add them to the alignment file): {}",
        list.len(),
        list.join(", ")
    ))
}

/// Checks that instance ids are unique across and within splits.
pub fn check_disjoint<T>(splits: &Splits<T>, id: impl Fn(&T) -> &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in splits.all() {
        if !seen.insert(id(item)) {
            return Err(Error::Data(format!("instance {} appears twice", id(item))));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_scales_down_only() {
        let spec = SplitSpec::new(4000, 4000, 4000);
        assert_eq!(spec.fit(20000, true), spec);
        assert_eq!(spec.fit(1200, true), SplitSpec::new(400, 400, 400));
        assert_eq!(spec.fit(31, true), SplitSpec::new(10, 10, 10));
        assert_eq!(
            SplitSpec::new(10000, 2000, 2000).fit(70, false),
            SplitSpec::new(50, 10, 10)
        );
    }

    #[test]
    fn title_normalization() {
        assert_eq!(normalize_title("apple_Inc."), "Apple Inc.");
        assert_eq!(normalize_title("  new  york "), "New york");
        assert_eq!(normalize_title(""), "");
    }

    #[test]
    fn balanced_splits_are_balanced() {
        let mut r = rng(1, "t");
        let s = balanced_splits(
            (0..50).collect(),
            (100..150).collect(),
            SplitSpec::new(10, 6, 4),
            &mut r,
        );
        for (split, n) in [(&s.train, 10), (&s.valid, 6), (&s.test, 4)] {
            assert_eq!(split.len(), n);
            assert_eq!(split.iter().filter(|&&v| v < 100).count(), n / 2);
        }
        check_disjoint(
            &Splits {
                train: vec!["a"],
                valid: vec!["b"],
                test: vec!["a"],
            },
            |s| s,
        )
        .unwrap_err();
    }

    #[test]
    fn resolver_order() {
        let d = |id: &str, title: &str| EntityDescription::new(id, title, ["x"]).unwrap();
        let store = DescriptionStore::new([d("Apple Inc.", "Apple Inc."), d("Q1", "Steve Jobs")])
            .with_alignment(BTreeMap::from([("Jobs".to_owned(), "Q1".to_owned())]));
        assert_eq!(
            store.resolve("Apple_Inc.").unwrap().entity_id(),
            "Apple Inc."
        );
        assert_eq!(store.resolve("steve_jobs").unwrap().entity_id(), "Q1");
        assert_eq!(store.resolve("Jobs").unwrap().entity_id(), "Q1");
        assert!(store.resolve("Microsoft").is_none());
    }
}
