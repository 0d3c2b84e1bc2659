//! Admissible predictable reward families.
//!
//! A family is backed by a process `φ_0..φ_N` and evaluated at a stopping
//! time pointwise, `φ(τ)(ω) = φ_{τ(ω)}(ω)`, so the consistency condition
//! `φ(τ) = φ(τ')` on `{τ = τ'}` holds identically. Admissibility then reduces
//! to `φ_t` being `Q_t`-measurable.

use crate::error::{Error, Result, ValidationReport, Violation};
use crate::rational::Rational;
use crate::space::{first_nonconstant_block, is_measurable, RandomVar, SampleSpace, TwoSlotFiltration};
use crate::stopping::PredictableTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardFamily {
    per_time: Vec<RandomVar>,
}

impl RewardFamily {
    pub fn new(per_time: Vec<RandomVar>) -> Self {
        RewardFamily { per_time }
    }

    pub fn constant(n: usize, horizon: usize, c: Rational) -> Self {
        RewardFamily { per_time: vec![RandomVar::constant(n, c); horizon + 1] }
    }

    pub fn at_time(&self, t: usize) -> &RandomVar {
        &self.per_time[t]
    }

    pub fn per_time(&self) -> &[RandomVar] {
        &self.per_time
    }

    pub fn horizon(&self) -> usize {
        self.per_time.len().saturating_sub(1)
    }

    /// `φ(τ)`: pointwise `φ_{τ(ω)}(ω)`.
    pub fn eval_at(&self, tau: &PredictableTime) -> RandomVar {
        let out = RandomVar(
            (0..tau.time().len())
                .map(|w| self.per_time[tau.at(w)][w].clone())
                .collect(),
        );
        debug_assert!(is_measurable(&out, tau.pre_sigma()));
        out
    }

    /// The family `α·φ` on times after `S`, zero on `{t < S}`.
    ///
    /// `α` must be `F_{S-}`-measurable; the result is then `Q_t`-measurable
    /// at every `t`, so it is an admissible family in its own right.
    pub fn scale_by(&self, alpha: &RandomVar, s: &PredictableTime) -> Result<RewardFamily> {
        if !is_measurable(alpha, s.pre_sigma()) {
            return Err(Error::NotMeasurable { what: "alpha".into() });
        }
        let per_time = self
            .per_time
            .iter()
            .enumerate()
            .map(|(t, phi)| {
                RandomVar(
                    (0..phi.len())
                        .map(|w| if s.at(w) <= t { &alpha[w] * &phi[w] } else { Rational::zero() })
                        .collect(),
                )
            })
            .collect();
        Ok(RewardFamily { per_time })
    }
}

/// Checks `φ_t` against `Q_t` at every time; each non-constant block is one
/// violation, with the constant time `t` as the predictable witness.
pub fn validate_admissible(fam: &RewardFamily, space: &SampleSpace, filt: &TwoSlotFiltration) -> ValidationReport {
    let mut violations = Vec::new();
    let expected = filt.horizon() + 1;
    if fam.per_time.len() != expected {
        violations.push(Violation::RewardLength { expected, found: fam.per_time.len() });
        return ValidationReport { violations };
    }
    for (t, phi) in fam.per_time.iter().enumerate() {
        if phi.len() != space.len() {
            violations.push(Violation::RewardLength { expected: space.len(), found: phi.len() });
            continue;
        }
        for w in space.outcomes() {
            if phi[w].is_negative() {
                violations.push(Violation::NegativeReward {
                    t,
                    outcome: space.id(w).to_string(),
                    value: phi[w].clone(),
                });
            }
        }
        let pre = filt.pre(t);
        let mut rest = phi.clone();
        while let Some(b) = first_nonconstant_block(&rest, pre) {
            violations.push(Violation::RewardNotPredictable { t, block: space.block_ids(&pre.blocks()[b]) });
            // flatten the reported block so the next search moves on
            let first = rest[pre.blocks()[b][0]].clone();
            for &w in &pre.blocks()[b] {
                rest.0[w] = first.clone();
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Partition;
    use crate::stopping::StoppingTime;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rv(vals: &[&str]) -> RandomVar {
        RandomVar(vals.iter().map(|s| q(s)).collect())
    }

    fn e3() -> (SampleSpace, TwoSlotFiltration, RewardFamily) {
        let filt = TwoSlotFiltration::new(
            vec![Partition::trivial(2), Partition::trivial(2), Partition::discrete(2)],
            vec![Partition::trivial(2), Partition::discrete(2), Partition::discrete(2)],
        );
        let fam = RewardFamily::new(vec![rv(&["0", "0"]), rv(&["1", "1"]), rv(&["3", "0"])]);
        (SampleSpace::uniform(["u", "d"]), filt, fam)
    }

    #[test]
    fn coarsened_pre_slot_is_rejected_with_block() {
        let space = SampleSpace::uniform(["u", "d"]);
        let filt = TwoSlotFiltration::new(
            vec![Partition::trivial(2), Partition::trivial(2)],
            vec![Partition::trivial(2), Partition::discrete(2)],
        );
        let fam = RewardFamily::new(vec![rv(&["1", "1"]), rv(&["2", "0"])]);
        let report = validate_admissible(&fam, &space, &filt);
        assert_eq!(
            report.violations,
            vec![Violation::RewardNotPredictable { t: 1, block: vec!["u".into(), "d".into()] }]
        );
    }

    #[test]
    fn constant_family_is_admissible() {
        let (space, filt, _) = e3();
        let fam = RewardFamily::constant(2, 2, q("5/2"));
        assert!(validate_admissible(&fam, &space, &filt).is_ok());
    }

    #[test]
    fn eval_at_examples() {
        let (_, filt, fam) = e3();
        let two = PredictableTime::constant(&filt, 2);
        assert_eq!(fam.eval_at(&two), rv(&["3", "0"]));
        for t in 0..=2 {
            assert_eq!(&fam.eval_at(&PredictableTime::constant(&filt, t)), fam.at_time(t));
        }
    }

    #[test]
    fn scale_by_examples() {
        let (_, filt, fam) = e3();
        let one = PredictableTime::constant(&filt, 1);
        let id = fam.scale_by(&rv(&["1", "1"]), &PredictableTime::constant(&filt, 0)).unwrap();
        assert_eq!(id, fam);
        let zero = fam.scale_by(&rv(&["0", "0"]), &one).unwrap();
        assert!(zero.per_time().iter().all(|x| x.iter().all(Rational::is_zero)));
        let doubled = fam.scale_by(&rv(&["2", "2"]), &one).unwrap();
        assert_eq!(doubled.at_time(1), &rv(&["2", "2"]));
        assert_eq!(doubled.at_time(2), &rv(&["6", "0"]));
        assert!(matches!(fam.scale_by(&rv(&["1", "2"]), &one), Err(Error::NotMeasurable { .. })));
    }

    #[test]
    fn non_predictable_time_cannot_be_certified() {
        let (_, filt, _) = e3();
        assert!(PredictableTime::new(StoppingTime(vec![2, 1]), &filt).is_err());
    }
}
