use crate::error::{Error, Result};
use crate::types::{EntityDescription, MentionContext};

/// Prior assigned to a gold entity missing from the candidate prior table.
pub const ABSENT_GOLD_PRIOR: f64 = 1e-6;

/// Largest candidate list kept per mention.
pub const MAX_CANDIDATES: usize = 30;

const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity_id: String,
    pub prior: f64,
    pub description: EntityDescription,
}

/// A mention with 1..=30 described candidates and normalized priors.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    mention: MentionContext,
    candidates: Vec<Candidate>,
    gold: String,
}

impl CandidateSet {
    pub fn new(
        mention: MentionContext,
        candidates: Vec<Candidate>,
        gold: impl Into<String>,
    ) -> Result<Self> {
        let gold = gold.into();
        let id = mention.instance_id().to_owned();
        if candidates.is_empty() || candidates.len() > MAX_CANDIDATES {
            return Err(Error::Data(format!(
                "{id}: {} candidates (allowed 1..={MAX_CANDIDATES})",
                candidates.len()
            )));
        }
        if !candidates.iter().any(|c| c.entity_id == gold) {
            return Err(Error::Data(format!(
                "{id}: gold {gold} absent from candidates"
            )));
        }
        let total: f64 = candidates.iter().map(|c| c.prior).sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE || candidates.iter().any(|c| !(c.prior >= 0.0))
        {
            return Err(Error::Data(format!(
                "{id}: priors sum to {total}, expected 1"
            )));
        }
        Ok(CandidateSet {
            mention,
            candidates,
            gold,
        })
    }

    pub fn mention(&self) -> &MentionContext {
        &self.mention
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn gold(&self) -> &str {
        &self.gold
    }

    pub fn gold_index(&self) -> usize {
        self.candidates
            .iter()
            .position(|c| c.entity_id == self.gold)
            .expect("gold checked at construction")
    }
}

/// Adds the gold entity at [`ABSENT_GOLD_PRIOR`] when missing, then
/// normalizes so the priors sum to one. Order is preserved; an added gold
/// entity goes last.
pub fn smooth_priors(raw: &[(String, f64)], gold: &str) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = raw.to_vec();
    if !out.iter().any(|(e, _)| e == gold) {
        out.push((gold.to_owned(), ABSENT_GOLD_PRIOR));
    }
    normalize(&mut out);
    out
}

pub(crate) fn normalize(priors: &mut [(String, f64)]) {
    let total: f64 = priors.iter().map(|(_, p)| p).sum();
    if total > 0.0 {
        for (_, p) in priors.iter_mut() {
            *p /= total;
        }
    } else {
        let n = priors.len() as f64;
        for (_, p) in priors.iter_mut() {
            *p = 1.0 / n;
        }
    }
}

/// `argmax_c prior(c) + classifier(c)`; ties go to the lowest index.
pub fn predict_with_prior(priors: &[f64], classifier: &[f64]) -> usize {
    argmax(priors.iter().zip(classifier).map(|(p, c)| p + c))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_absent_from_prior_table() {
        let raw = vec![("A".to_owned(), 0.5), ("B".to_owned(), 0.3)];
        let smoothed = smooth_priors(&raw, "C");
        let total = 0.8 + 1e-6;
        assert_eq!(smoothed.len(), 3);
        assert!((smoothed[0].1 - 0.5 / total).abs() < 1e-15);
        assert!((smoothed[1].1 - 0.3 / total).abs() < 1e-15);
        assert!((smoothed[2].1 - 1e-6 / total).abs() < 1e-18);
        assert_eq!(smoothed[2].0, "C");
        assert!((smoothed.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gold_present_is_only_normalized() {
        let raw = vec![("A".to_owned(), 2.0), ("B".to_owned(), 2.0)];
        assert_eq!(
            smooth_priors(&raw, "B"),
            vec![("A".to_owned(), 0.5), ("B".to_owned(), 0.5)]
        );
    }

    #[test]
    fn zero_classifier_is_prior_argmax_with_low_index_ties() {
        assert_eq!(predict_with_prior(&[0.2, 0.5, 0.3], &[0.0; 3]), 1);
        assert_eq!(predict_with_prior(&[0.4, 0.4, 0.2], &[0.5; 3]), 0);
        assert_eq!(predict_with_prior(&[0.6, 0.4], &[0.0, 0.3]), 1);
    }

    #[test]
    fn candidate_set_invariants() {
        let m = MentionContext::new("m", ["china"], (0, 0)).unwrap();
        let d = |e: &str| EntityDescription::new(e, e, ["x"]).unwrap();
        let c = |e: &str, p: f64| Candidate {
            entity_id: e.into(),
            prior: p,
            description: d(e),
        };
        assert!(CandidateSet::new(m.clone(), vec![c("a", 0.5), c("b", 0.5)], "b").is_ok());
        assert!(CandidateSet::new(m.clone(), vec![c("a", 0.5), c("b", 0.5)], "z").is_err());
        assert!(CandidateSet::new(m.clone(), vec![c("a", 0.5), c("b", 0.4)], "a").is_err());
        let many: Vec<Candidate> = (0..31).map(|k| c(&k.to_string(), 1.0 / 31.0)).collect();
        assert!(CandidateSet::new(m, many, "0").is_err());
    }
}
