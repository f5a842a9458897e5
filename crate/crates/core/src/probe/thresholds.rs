use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::{MacroAccumulator, Prf};

/// Per-type decision thresholds; type `t` is predicted when `score >= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub thresholds: Vec<f64>,
}

impl ThresholdVector {
    pub fn uniform(n_types: usize, value: f64) -> Self {
        ThresholdVector {
            thresholds: vec![value; n_types],
        }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn apply(&self, scores: &[Vec<f64>]) -> Vec<BTreeSet<u32>> {
        scores
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.thresholds)
                    .enumerate()
                    .filter(|(_, (s, t))| s >= t)
                    .map(|(k, _)| k as u32)
                    .collect()
            })
            .collect()
    }
}

/// What threshold tuning maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TuneObjective {
    /// Macro multilabel F1 over the dev set.
    #[default]
    F1,
    /// Per-type binary decision accuracy.
    Accuracy,
}

fn validate(scores: &[Vec<f64>], gold: &[BTreeSet<u32>]) -> Result<usize> {
    if scores.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} score rows for {} gold sets",
            scores.len(),
            gold.len()
        )));
    }
    let n_types = scores.first().map_or(0, Vec::len);
    for row in scores {
        if row.len() != n_types {
            return Err(Error::InvalidArgument("ragged score rows".into()));
        }
        if row.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidArgument("scores must lie in [0, 1]".into()));
        }
    }
    if let Some(t) = gold.iter().flatten().find(|&&t| t as usize >= n_types) {
        return Err(Error::InvalidArgument(format!(
            "gold type {t} >= {n_types}"
        )));
    }
    Ok(n_types)
}

/// A threshold that no score of this type reaches (capped at 1).
fn above(max: f64) -> f64 {
    if max < 1.0 {
        (max + 1.0) / 2.0
    } else {
        1.0
    }
}

/// Candidate thresholds for one type: `(threshold, instances newly included)`
/// in decreasing threshold order, starting from "predict never".
fn sweep(column: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[b].total_cmp(&column[a]));
    let max = order.first().map_or(0.0, |&k| column[k]);
    let mut out = vec![(above(max), Vec::new())];
    let mut k = 0;
    while k < order.len() {
        let value = column[order[k]];
        let mut group = Vec::new();
        while k < order.len() && column[order[k]] == value {
            group.push(order[k]);
            k += 1;
        }
        // any threshold in (next lower value, value] selects the same set;
        // take the midpoint so the decision is robust on both sides
        let threshold = match order.get(k) {
            Some(&next) => (value + column[next]) / 2.0,
            None => value,
        };
        out.push((threshold, group));
    }
    out
}

/// Tunes one threshold per type on dev scores.
///
/// Types with no dev positives are switched off. The remaining types are
/// tuned by coordinate ascent starting from 0.5; a type's threshold only
/// changes on strict improvement, so the tuned dev score is never below the
/// score at the uniform 0.5 threshold.
pub fn tune_thresholds(
    scores: &[Vec<f64>],
    gold: &[BTreeSet<u32>],
    objective: TuneObjective,
) -> Result<ThresholdVector> {
    tune_thresholds_with_unscored(scores, gold, &vec![0; gold.len()], objective)
}

/// Like [`tune_thresholds`], for instances that also carry `unscored[i]`
/// gold types outside the score columns. Those types can never be
/// predicted but still count towards each instance's recall denominator.
pub fn tune_thresholds_with_unscored(
    scores: &[Vec<f64>],
    gold: &[BTreeSet<u32>],
    unscored: &[usize],
    objective: TuneObjective,
) -> Result<ThresholdVector> {
    let n_types = validate(scores, gold)?;
    if unscored.len() != gold.len() {
        return Err(Error::InvalidArgument(
            "unscored counts must cover every instance".into(),
        ));
    }
    let column = |t: usize| -> Vec<f64> { scores.iter().map(|row| row[t]).collect() };
    let is_gold = |i: usize, t: usize| gold[i].contains(&(t as u32));
    let mut thresholds = vec![0.5; n_types];

    for (t, th) in thresholds.iter_mut().enumerate() {
        if !(0..gold.len()).any(|i| is_gold(i, t)) {
            let max = scores.iter().map(|r| r[t]).fold(0.0, f64::max);
            *th = above(max);
        }
    }

    match objective {
        TuneObjective::Accuracy => {
            for (t, th) in thresholds.iter_mut().enumerate() {
                let col = column(t);
                let correct_at = |cut: f64| {
                    col.iter()
                        .enumerate()
                        .filter(|&(i, &s)| (s >= cut) == is_gold(i, t))
                        .count()
                };
                let mut best = correct_at(*th);
                let mut running = col
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| !is_gold(i, t))
                    .count();
                for (cut, group) in sweep(&col) {
                    for &i in &group {
                        if is_gold(i, t) {
                            running += 1;
                        } else {
                            running -= 1;
                        }
                    }
                    if running > best {
                        best = running;
                        *th = cut;
                    }
                }
            }
        }
        TuneObjective::F1 => {
            let predicted = |th: &[f64]| {
                ThresholdVector {
                    thresholds: th.to_vec(),
                }
                .apply(scores)
            };
            let mut pred_count: Vec<usize>;
            let mut correct_count: Vec<usize>;
            {
                let p = predicted(&thresholds);
                pred_count = p.iter().map(BTreeSet::len).collect();
                correct_count = p
                    .iter()
                    .zip(gold)
                    .map(|(p, g)| p.intersection(g).count())
                    .collect();
            }
            let gold_count: Vec<usize> = gold
                .iter()
                .zip(unscored)
                .map(|(g, &u)| g.len() + u)
                .collect();
            let score = |acc: &MacroAccumulator| acc.prf().f1;

            for _pass in 0..2 {
                let mut changed = false;
                for t in 0..n_types {
                    let col = column(t);
                    // counts with type t removed
                    let mut acc = MacroAccumulator::default();
                    let mut base_pred = pred_count.clone();
                    let mut base_correct = correct_count.clone();
                    for i in 0..gold.len() {
                        if col[i] >= thresholds[t] {
                            base_pred[i] -= 1;
                            if is_gold(i, t) {
                                base_correct[i] -= 1;
                            }
                        }
                        acc.add(base_correct[i], base_pred[i], gold_count[i], 1.0);
                    }
                    let current = {
                        let mut a = acc;
                        for i in 0..gold.len() {
                            if col[i] >= thresholds[t] {
                                let c = base_correct[i] + usize::from(is_gold(i, t));
                                a.add(base_correct[i], base_pred[i], gold_count[i], -1.0);
                                a.add(c, base_pred[i] + 1, gold_count[i], 1.0);
                            }
                        }
                        score(&a)
                    };
                    let mut best = (current, thresholds[t]);
                    for (cut, group) in sweep(&col) {
                        for &i in &group {
                            let c = base_correct[i] + usize::from(is_gold(i, t));
                            acc.add(base_correct[i], base_pred[i], gold_count[i], -1.0);
                            acc.add(c, base_pred[i] + 1, gold_count[i], 1.0);
                        }
                        let f = score(&acc);
                        if f > best.0 + 1e-12 {
                            best = (f, cut);
                        }
                    }
                    if best.1 != thresholds[t] {
                        thresholds[t] = best.1;
                        changed = true;
                    }
                    for i in 0..gold.len() {
                        let on = col[i] >= thresholds[t];
                        pred_count[i] = base_pred[i] + usize::from(on);
                        correct_count[i] = base_correct[i] + usize::from(on && is_gold(i, t));
                    }
                }
                if !changed {
                    break;
                }
            }
        }
    }
    Ok(ThresholdVector { thresholds })
}

/// Macro F1 of `thresholds` applied to `scores`.
pub fn f1_at(
    thresholds: &ThresholdVector,
    scores: &[Vec<f64>],
    gold: &[BTreeSet<u32>],
) -> Result<Prf> {
    crate::metrics::multilabel_f1(&thresholds.apply(scores), gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(items: &[u32]) -> BTreeSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn separable_scores_reach_perfect_f1() {
        let scores = vec![vec![0.9], vec![0.1], vec![0.9], vec![0.1]];
        let gold = vec![set(&[0]), set(&[]), set(&[0]), set(&[])];
        let th = tune_thresholds(&scores, &gold, TuneObjective::F1).unwrap();
        assert!(th.thresholds[0] > 0.1 && th.thresholds[0] <= 0.9);
        assert_eq!(f1_at(&th, &scores, &gold).unwrap().f1, 1.0);
    }

    #[test]
    fn vacuous_type_is_never_predicted() {
        let scores = vec![vec![0.8, 0.7], vec![0.2, 0.95]];
        let gold = vec![set(&[0]), set(&[0])];
        let th = tune_thresholds(&scores, &gold, TuneObjective::F1).unwrap();
        assert!(th.thresholds[1] > 0.95);
        assert!(th.apply(&scores).iter().all(|p| !p.contains(&1)));
    }

    #[test]
    fn accuracy_objective() {
        let scores = vec![vec![0.3], vec![0.35], vec![0.2], vec![0.1]];
        let gold = vec![set(&[0]), set(&[0]), set(&[]), set(&[])];
        let th = tune_thresholds(&scores, &gold, TuneObjective::Accuracy).unwrap();
        assert_eq!(th.apply(&scores), gold);
    }

    #[test]
    fn rejects_out_of_range_scores() {
        assert!(tune_thresholds(&[vec![1.5]], &[set(&[0])], TuneObjective::F1).is_err());
    }

    /// Exhaustive oracle on a tiny instance: the tuned vector is never worse
    /// than 0.5 and matches the best single-type improvement found by
    /// brute force over every candidate cut.
    #[test]
    fn tuned_f1_dominates_half_on_random_overlaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(3..12);
            let t = rng.random_range(1..4);
            let gold: Vec<BTreeSet<u32>> = (0..n)
                .map(|_| {
                    let mut g: BTreeSet<u32> =
                        (0..t as u32).filter(|_| rng.random_bool(0.4)).collect();
                    if g.is_empty() {
                        g.insert(rng.random_range(0..t as u32));
                    }
                    g
                })
                .collect();
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..t)
                        .map(|k| {
                            let base = if gold[i].contains(&(k as u32)) {
                                0.6
                            } else {
                                0.4
                            };
                            let v: f64 = base + rng.random_range(-0.35..0.35);
                            (v * 10.0).round() / 10.0
                        })
                        .collect()
                })
                .collect();
            let tuned = tune_thresholds(&scores, &gold, TuneObjective::F1).unwrap();
            let f_tuned = f1_at(&tuned, &scores, &gold).unwrap().f1;
            let f_half = f1_at(&ThresholdVector::uniform(t, 0.5), &scores, &gold)
                .unwrap()
                .f1;
            assert!(f_tuned >= f_half - 1e-12, "{f_tuned} < {f_half}");

            // brute force: with one type, tuned F1 equals the global optimum
            if t == 1 {
                let mut cuts: Vec<f64> = scores.iter().map(|r| r[0]).collect();
                cuts.push(1.01);
                let best = cuts
                    .iter()
                    .map(|&c| {
                        let pred: Vec<BTreeSet<u32>> = scores
                            .iter()
                            .map(|r| if r[0] >= c { set(&[0]) } else { set(&[]) })
                            .collect();
                        crate::metrics::multilabel_f1(&pred, &gold).unwrap().f1
                    })
                    .fold(0.0, f64::max);
                assert!((f_tuned - best).abs() < 1e-12, "{f_tuned} vs brute {best}");
            }
        }
    }
}
