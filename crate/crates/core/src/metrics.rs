//! Pair featurizer and task metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// `[x1, x2, x1 * x2, |x1 - x2|]`.
pub fn make_pair_feature(x1: &[f32], x2: &[f32]) -> Result<Vec<f32>> {
    if x1.len() != x2.len() {
        return Err(Error::InvalidArgument(format!(
            "pair feature: dimension mismatch ({} vs {})",
            x1.len(),
            x2.len()
        )));
    }
    let d = x1.len();
    let mut out = Vec::with_capacity(4 * d);
    out.extend_from_slice(x1);
    out.extend_from_slice(x2);
    out.extend(x1.iter().zip(x2).map(|(a, b)| a * b));
    out.extend(x1.iter().zip(x2).map(|(a, b)| (a - b).abs()));
    Ok(out)
}

/// Fractional (1-based, tie-averaged) ranks.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share the mean of ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with fractional ranking of ties.
pub fn spearman(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "spearman: length mismatch ({} vs {})",
            pred.len(),
            gold.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, got {}",
            pred.len()
        )));
    }
    if pred.iter().chain(gold).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("spearman: NaN input".into()));
    }
    pearson(&fractional_ranks(pred), &fractional_ranks(gold))
        .ok_or_else(|| Error::UndefinedCorrelation("zero rank variance".into()))
}

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Running sums behind the macro-averaged multilabel F1.
///
/// Kept separate so threshold tuning can update one instance at a time.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MacroAccumulator {
    pub precision_sum: f64,
    pub precision_count: usize,
    pub recall_sum: f64,
    pub recall_count: usize,
}

impl MacroAccumulator {
    pub fn add(&mut self, correct: usize, predicted: usize, gold: usize, sign: f64) {
        if predicted > 0 {
            self.precision_sum += sign * correct as f64 / predicted as f64;
            if sign > 0.0 {
                self.precision_count += 1;
            } else {
                self.precision_count -= 1;
            }
        }
        if gold > 0 {
            self.recall_sum += sign * correct as f64 / gold as f64;
            if sign > 0.0 {
                self.recall_count += 1;
            } else {
                self.recall_count -= 1;
            }
        }
    }

    pub fn prf(&self) -> Prf {
        let p = if self.precision_count > 0 {
            self.precision_sum / self.precision_count as f64
        } else {
            0.0
        };
        let r = if self.recall_count > 0 {
            self.recall_sum / self.recall_count as f64
        } else {
            0.0
        };
        Prf::from_pr(p, r)
    }
}

fn check_lengths<T>(predicted: &[T], gold: &[T]) -> Result<()> {
    if predicted.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "multilabel f1: {} predictions for {} gold instances",
            predicted.len(),
            gold.len()
        )));
    }
    Ok(())
}

/// Macro-averaged multilabel P/R/F1.
///
/// Precision is averaged over instances with a nonempty prediction, recall
/// over instances with a nonempty gold set, and F1 is the harmonic mean of
/// the two averages.
pub fn multilabel_f1(predicted: &[BTreeSet<u32>], gold: &[BTreeSet<u32>]) -> Result<Prf> {
    check_lengths(predicted, gold)?;
    let mut acc = MacroAccumulator::default();
    for (p, g) in predicted.iter().zip(gold) {
        acc.add(p.intersection(g).count(), p.len(), g.len(), 1.0);
    }
    Ok(acc.prf())
}

/// Micro-averaged multilabel P/R/F1 over all (instance, type) decisions.
pub fn multilabel_f1_micro(predicted: &[BTreeSet<u32>], gold: &[BTreeSet<u32>]) -> Result<Prf> {
    check_lengths(predicted, gold)?;
    let (mut correct, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (p, g) in predicted.iter().zip(gold) {
        correct += p.intersection(g).count();
        n_pred += p.len();
        n_gold += g.len();
    }
    let p = if n_pred > 0 {
        correct as f64 / n_pred as f64
    } else {
        0.0
    };
    let r = if n_gold > 0 {
        correct as f64 / n_gold as f64
    } else {
        0.0
    };
    Ok(Prf::from_pr(p, r))
}

/// Fraction of positions where `predicted` equals `gold`.
pub fn accuracy<T: PartialEq>(predicted: &[T], gold: &[T]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "accuracy: {} predictions for {} labels",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("accuracy of empty input".into()));
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Cosine similarity, `None` when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na.sqrt() * nb.sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[u32]) -> BTreeSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn pair_feature_examples() {
        assert_eq!(
            make_pair_feature(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            [1.0, 2.0, 1.0, 2.0, 1.0, 4.0, 0.0, 0.0]
        );
        assert_eq!(
            make_pair_feature(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]
        );
        assert_eq!(
            make_pair_feature(&[0.5; 300], &[0.25; 300]).unwrap().len(),
            1200
        );
        assert!(matches!(
            make_pair_feature(&[1.0], &[1.0, 2.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), -1.0);
        // 1 - 6 * (0 + 1 + 1) / (3 * 8) = 0.5
        let rho = spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        assert!(matches!(
            spearman(&[1.0], &[2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn fractional_ranks_average_ties() {
        assert_eq!(
            fractional_ranks(&[10.0, 20.0, 20.0, 5.0]),
            [2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn multilabel_examples() {
        let gold = vec![set(&[1, 2]), set(&[3])];
        let prf = multilabel_f1(&gold, &gold).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));

        let prf = multilabel_f1(&[set(&[7])], &[set(&[7, 8])]).unwrap();
        assert_eq!(prf.precision, 1.0);
        assert_eq!(prf.recall, 0.5);
        assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-15);

        let empty = vec![BTreeSet::new(), BTreeSet::new()];
        assert_eq!(multilabel_f1(&empty, &gold).unwrap().f1, 0.0);
        assert!(multilabel_f1(&empty[..1], &gold).is_err());
    }

    #[test]
    fn micro_differs_from_macro() {
        let pred = vec![set(&[1]), set(&[2, 3, 4])];
        let gold = vec![set(&[1]), set(&[2, 5, 6, 7])];
        let micro = multilabel_f1_micro(&pred, &gold).unwrap();
        assert!((micro.precision - 0.5).abs() < 1e-15);
        assert!((micro.recall - 0.4).abs() < 1e-15);
        let macro_ = multilabel_f1(&pred, &gold).unwrap();
        assert!((macro_.precision - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 1, 0, 1], &[1, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn pair_feature_shape(x in prop::collection::vec(-10f32..10.0, 1..40)) {
            let f = make_pair_feature(&x, &x).unwrap();
            let d = x.len();
            prop_assert_eq!(f.len(), 4 * d);
            for k in 0..d {
                prop_assert_eq!(f[2 * d + k], x[k] * x[k]);
                prop_assert_eq!(f[3 * d + k], 0.0);
            }
        }

        #[test]
        fn spearman_symmetric_bounded_monotone(
            pairs in prop::collection::vec((-100i32..100, -100i32..100), 3..30)
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            if let (Ok(ab), Ok(ba)) = (spearman(&a, &b), spearman(&b, &a)) {
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ab.abs() <= 1.0);
                let warped: Vec<f64> = a.iter().map(|v| (v / 7.0).exp() + 3.0 * v).collect();
                prop_assert!((spearman(&warped, &b).unwrap() - ab).abs() < 1e-12);
            }
        }

        #[test]
        fn multilabel_permutation_invariant(
            rows in prop::collection::vec(
                (prop::collection::btree_set(0u32..6, 0..4), prop::collection::btree_set(0u32..6, 1..4)),
                1..20),
            rot in 0usize..20,
        ) {
            let (pred, gold): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let base = multilabel_f1(&pred, &gold).unwrap();
            let k = rot % pred.len();
            let mut p2 = pred.clone();
            let mut g2 = gold.clone();
            p2.rotate_left(k);
            g2.rotate_left(k);
            let rotated = multilabel_f1(&p2, &g2).unwrap();
            prop_assert!((base.f1 - rotated.f1).abs() < 1e-12);
        }
    }
}
