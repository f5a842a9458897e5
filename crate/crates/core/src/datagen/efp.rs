use rand::Rng;

use super::sources::FeverClaim;
use super::{rng, sample_splits, Generated, SplitSpec};
use crate::error::Result;
use crate::tasks::StatementRecord;

/// EFP: SUPPORTS / REFUTES claims, each with one seeded mention pick.
///
/// NOT ENOUGH INFO claims and claims without a mention are dropped.
pub fn gen_efp(
    claims: &[FeverClaim],
    spec: SplitSpec,
    seed: u64,
) -> Result<Generated<StatementRecord>> {
    let mut rng = rng(seed, "efp");
    let (mut not_enough_info, mut no_mention) = (0, 0);
    let mut pool = Vec::new();
    for c in claims {
        let label = match c.label.to_ascii_uppercase().as_str() {
            "SUPPORTS" => 1,
            "REFUTES" => 0,
            _ => {
                not_enough_info += 1;
                continue;
            }
        };
        if c.mentions.is_empty() {
            no_mention += 1;
            continue;
        }
        // draw only when there is a choice so single-mention claims leave the stream alone
        let pick = if c.mentions.len() == 1 {
            0
        } else {
            rng.random_range(0..c.mentions.len())
        };
        pool.push(StatementRecord {
            id: c.id.clone(),
            context: c.tokens.clone(),
            span: c.mentions[pick],
            label,
        });
    }
    let fitted = spec.fit(pool.len(), false);
    let mut out = Generated::new(sample_splits(pool, fitted, &mut rng));
    out.stat("dropped_not_enough_info", not_enough_info);
    out.stat("skipped_no_mention", no_mention);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn claim(id: &str, label: &str, mentions: Vec<(usize, usize)>) -> FeverClaim {
        FeverClaim {
            id: id.into(),
            label: label.into(),
            tokens: vec!["a".into(), "b".into(), "c".into()],
            mentions,
        }
    }

    #[test]
    fn filters_and_is_deterministic() {
        let claims = vec![
            claim("1", "SUPPORTS", vec![(0, 0)]),
            claim("2", "NOT ENOUGH INFO", vec![(0, 0)]),
            claim("3", "REFUTES", vec![]),
            claim("4", "REFUTES", vec![(0, 0), (2, 2)]),
        ];
        let spec = SplitSpec::new(1, 0, 1);
        let a = gen_efp(&claims, spec, 7).unwrap();
        assert_eq!(a.stats["dropped_not_enough_info"], 1);
        assert_eq!(a.stats["skipped_no_mention"], 1);
        assert_eq!(a.splits.all().count(), 2);
        assert_eq!(a, gen_efp(&claims, spec, 7).unwrap());
    }
}
