//! The predictable value function `V_p` and strict value `V_p⁺`.
//!
//! [`value_backward`] runs the grid Bellman recursion
//!
//! ```text
//! V_p(N)  = φ_N,                 V_p⁺(N) = φ_N
//! V_p⁺(t) = E[V_p(t+1) | Q_t],   V_p(t)  = max(φ_t, V_p⁺(t))     (t < N)
//! ```
//!
//! and [`value_bruteforce`] is the independent oracle: the essential supremum
//! of `E[φ(τ) | F_{S-}]` over the complete enumeration of predictable times,
//! which on a finite space without null sets is a pointwise maximum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::space::{condexp, is_measurable, Event, RandomVar, SampleSpace};
use crate::stopping::{enumerate_stopping, glue, PredictableTime, StoppingTime};

/// The pair `(V_p, V_p⁺)` as per-time random variables, tied to the instance
/// it was computed for.
#[derive(Clone, Debug)]
pub struct ValueSystem<'a> {
    instance: &'a Instance,
    v: Vec<RandomVar>,
    v_plus: Vec<RandomVar>,
}

impl<'a> ValueSystem<'a> {
    /// Wraps externally supplied tables without recomputing them. Used to
    /// run the checks against perturbed or foreign value tables.
    pub fn from_parts(instance: &'a Instance, v: Vec<RandomVar>, v_plus: Vec<RandomVar>) -> Self {
        assert_eq!(v.len(), instance.horizon() + 1);
        assert_eq!(v_plus.len(), instance.horizon() + 1);
        ValueSystem { instance, v, v_plus }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn v(&self, t: usize) -> &RandomVar {
        &self.v[t]
    }

    pub fn v_plus(&self, t: usize) -> &RandomVar {
        &self.v_plus[t]
    }

    pub fn v_table(&self) -> &[RandomVar] {
        &self.v
    }

    pub fn v_plus_table(&self) -> &[RandomVar] {
        &self.v_plus
    }

    /// `V_p(τ)(ω) = V_p(τ(ω))(ω)`.
    pub fn value_at(&self, tau: &PredictableTime) -> RandomVar {
        compose(&self.v, tau.time())
    }

    /// `V_p⁺(τ)(ω) = V_p⁺(τ(ω))(ω)`.
    pub fn value_plus_at(&self, tau: &PredictableTime) -> RandomVar {
        compose(&self.v_plus, tau.time())
    }

    /// Discrete right limit `V_p(S⁺) := V_p((S + 1) ∧ N)`.
    pub fn right_limit_at(&self, s: &PredictableTime) -> RandomVar {
        compose(&self.v, &s.time().successor(self.instance.horizon()))
    }

    /// Contact set `{V_p(t) = φ_t}`.
    pub fn contact(&self, t: usize) -> Event {
        self.v[t].eq_event(self.instance.reward().at_time(t))
    }

    /// `τ ↦ 1_A · V_p(τ)` over `T_S^p`; `A` must be `F_{S-}`-measurable.
    pub fn localized_value(&self, a: &Event, s: &PredictableTime) -> Result<LocalizedValue<'_, 'a>> {
        if !a.is_measurable(s.pre_sigma()) {
            return Err(Error::NotMeasurable { what: "localization event".into() });
        }
        Ok(LocalizedValue { system: self, event: a.clone(), start: s.time().clone() })
    }
}

/// The family `V^A(τ) = 1_A V_p(τ)` for `τ >= S`.
pub struct LocalizedValue<'s, 'a> {
    system: &'s ValueSystem<'a>,
    event: Event,
    start: StoppingTime,
}

impl LocalizedValue<'_, '_> {
    pub fn at(&self, tau: &PredictableTime) -> Result<RandomVar> {
        if !self.start.le(tau.time()) {
            return Err(Error::NotAfter);
        }
        Ok(self.system.value_at(tau).restrict(&self.event))
    }

    pub fn event(&self) -> &Event {
        &self.event
    }
}

/// Pointwise composition of a time-indexed family with a stopping time.
pub fn compose(family: &[RandomVar], tau: &StoppingTime) -> RandomVar {
    RandomVar((0..tau.len()).map(|w| family[tau.at(w)][w].clone()).collect())
}

/// Grid Bellman recursion over the pre-partitions.
pub fn value_backward(inst: &Instance) -> ValueSystem<'_> {
    let n = inst.horizon();
    let filt = inst.filtration();
    let phi = inst.reward();
    let mut v = vec![RandomVar::zero(inst.num_outcomes()); n + 1];
    let mut v_plus = v.clone();
    v[n] = phi.at_time(n).clone();
    v_plus[n] = phi.at_time(n).clone();
    for t in (0..n).rev() {
        v_plus[t] = condexp(&v[t + 1], filt.pre(t), inst.space());
        v[t] = phi.at_time(t).max(&v_plus[t]);
    }
    ValueSystem { instance: inst, v, v_plus }
}

/// Pointwise maximum of `E[X | G]` over the candidates, or `None` when there
/// are none.
pub fn conditional_sup<I>(space: &SampleSpace, cond: &crate::space::Partition, candidates: I) -> Option<RandomVar>
where
    I: IntoIterator<Item = RandomVar>,
{
    candidates
        .into_iter()
        .map(|x| condexp(&x, cond, space))
        .reduce(|acc, y| acc.max(&y))
}

/// `esssup_{τ ∈ T_S^p} E[φ(τ) | F_{S-}]` by enumeration (`T_{S+}^p` with
/// `strict`).
pub fn value_bruteforce(inst: &Instance, s: &PredictableTime, strict: bool, budget: usize) -> Result<RandomVar> {
    let class = inst.predictable_after(s, strict, budget)?;
    let phi = inst.reward();
    conditional_sup(inst.space(), s.pre_sigma(), class.iter().map(|tau| phi.eval_at(tau)))
        .ok_or_else(|| Error::Internal("empty class of predictable times".into()))
}

/// One element of an optimizing sequence.
#[derive(Clone, Debug)]
pub struct SequenceStep {
    pub tau: PredictableTime,
    pub conditional: RandomVar,
}

/// Builds a sequence of predictable times whose conditional rewards given
/// `F_{S-}` increase pointwise to the (strict) value at `S`.
///
/// Walks the enumeration in order; each candidate is glued with the current
/// best on `A = {E[φ(cand) | F_{S-}] <= E[φ(best) | F_{S-}]}` (best on `A`).
/// A step is recorded whenever the glued time strictly improves somewhere.
pub fn optimizing_sequence(
    inst: &Instance,
    s: &PredictableTime,
    strict: bool,
    budget: usize,
) -> Result<Vec<SequenceStep>> {
    let class = inst.predictable_after(s, strict, budget)?;
    let space = inst.space();
    let phi = inst.reward();
    let cond = |tau: &PredictableTime| condexp(&phi.eval_at(tau), s.pre_sigma(), space);
    let mut iter = class.into_iter();
    let first = iter.next().ok_or_else(|| Error::Internal("empty class of predictable times".into()))?;
    let mut seq = vec![SequenceStep { conditional: cond(&first), tau: first }];
    for cand in iter {
        let best = seq.last().expect("nonempty");
        let cand_value = cond(&cand);
        let keep = Event::from_fn(space.len(), |w| cand_value[w] <= best.conditional[w]);
        if keep.complement().is_empty() {
            continue;
        }
        let glued = glue(best.tau.time(), cand.time(), &keep);
        let glued = inst
            .predictable(glued)
            .map_err(|e| Error::Internal(format!("glued time lost predictability: {e}")))?;
        let value = cond(&glued);
        if value != best.conditional.max(&cand_value) {
            return Err(Error::Internal("glued time does not realize the pairwise maximum".into()));
        }
        seq.push(SequenceStep { tau: glued, conditional: value });
    }
    Ok(seq)
}

/// First violated pair of a system check.
#[derive(Clone, Debug, Serialize)]
pub struct SystemViolation {
    pub tau: StoppingTime,
    pub tau_prime: StoppingTime,
    pub block: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemReport {
    pub holds: bool,
    pub pairs_checked: usize,
    pub violation: Option<SystemViolation>,
}

/// Checks `E[U(τ') | F_{τ-}] <= U(τ)` (or `=` with `martingale`) for every
/// pair of predictable `τ <= τ'`, where `U(τ)` is the pointwise composition
/// of the per-time family `u`.
pub fn check_supermartingale_system(
    u: &[RandomVar],
    inst: &Instance,
    martingale: bool,
    budget: usize,
) -> Result<SystemReport> {
    let filt = inst.filtration();
    if u.len() != inst.horizon() + 1 {
        return Err(Error::Internal("system must have one variable per grid time".into()));
    }
    for (t, ut) in u.iter().enumerate() {
        if !is_measurable(ut, filt.pre(t)) {
            return Err(Error::NotMeasurable { what: format!("U({t})") });
        }
    }
    let all = inst.predictable_after(&inst.constant_time(0), false, budget)?;
    let values: Vec<RandomVar> = all.iter().map(|tau| compose(u, tau.time())).collect();
    let mut pairs = 0;
    for (i, tau) in all.iter().enumerate() {
        for (j, later) in all.iter().enumerate() {
            if !tau.time().le(later.time()) {
                continue;
            }
            pairs += 1;
            let lhs = condexp(&values[j], tau.pre_sigma(), inst.space());
            let bad = if martingale { lhs.first_diff(&values[i]) } else { lhs.first_gt(&values[i]) };
            if let Some(w) = bad {
                let block = &tau.pre_sigma().blocks()[tau.pre_sigma().block_of(w)];
                return Ok(SystemReport {
                    holds: false,
                    pairs_checked: pairs,
                    violation: Some(SystemViolation {
                        tau: tau.time().clone(),
                        tau_prime: later.time().clone(),
                        block: inst.space().block_ids(block),
                        lhs: lhs[w].to_string(),
                        rhs: values[i][w].to_string(),
                    }),
                });
            }
        }
    }
    Ok(SystemReport { holds: true, pairs_checked: pairs, violation: None })
}

/// Classical Snell envelope over the post-partitions:
/// `U(N) = φ_N`, `U(t) = max(φ_t, E[U(t+1) | P_t])`.
pub fn classical_value(inst: &Instance) -> Vec<RandomVar> {
    let n = inst.horizon();
    let filt = inst.filtration();
    let phi = inst.reward();
    let mut u = vec![RandomVar::zero(inst.num_outcomes()); n + 1];
    u[n] = phi.at_time(n).clone();
    for t in (0..n).rev() {
        u[t] = phi.at_time(t).max(&condexp(&u[t + 1], filt.post(t), inst.space()));
    }
    u
}

/// Classical value at time 0 by enumerating every plain stopping time and
/// conditioning on `P_0`.
pub fn classical_bruteforce(inst: &Instance, budget: usize) -> Result<RandomVar> {
    let times = enumerate_stopping(inst.filtration(), budget)?;
    let phi = inst.reward().per_time();
    conditional_sup(inst.space(), inst.filtration().post(0), times.iter().map(|tau| compose(phi, tau)))
        .ok_or_else(|| Error::Internal("no stopping times".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::canonical;
    use crate::rational::Rational;
    use crate::reward::RewardFamily;
    use crate::stopping::DEFAULT_BUDGET;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rv(vals: &[&str]) -> RandomVar {
        RandomVar(vals.iter().map(|s| q(s)).collect())
    }

    #[test]
    fn backward_e1() {
        let inst = canonical("E1").unwrap();
        let vs = value_backward(&inst);
        assert_eq!(vs.v_table(), &[rv(&["3"]), rv(&["3"]), rv(&["2"])]);
        assert_eq!(vs.v_plus_table(), &[rv(&["3"]), rv(&["2"]), rv(&["2"])]);
    }

    #[test]
    fn backward_e3() {
        let inst = canonical("E3").unwrap();
        let vs = value_backward(&inst);
        assert_eq!(vs.v(2), &rv(&["3", "0"]));
        assert_eq!(vs.v(1), &rv(&["3/2", "3/2"]));
        assert_eq!(vs.v(0), &rv(&["3/2", "3/2"]));
    }

    #[test]
    fn constant_reward_is_its_own_value() {
        let inst = canonical("E3").unwrap();
        let inst = inst.with_reward(RewardFamily::constant(2, 2, q("7/4"))).unwrap();
        let vs = value_backward(&inst);
        for t in 0..=2 {
            assert_eq!(vs.v(t), &rv(&["7/4", "7/4"]));
            assert_eq!(vs.v_plus(t), &rv(&["7/4", "7/4"]));
        }
    }

    #[test]
    fn bruteforce_examples() {
        let e1 = canonical("E1").unwrap();
        assert_eq!(value_bruteforce(&e1, &e1.constant_time(0), false, DEFAULT_BUDGET).unwrap(), rv(&["3"]));
        let e3 = canonical("E3").unwrap();
        assert_eq!(value_bruteforce(&e3, &e3.constant_time(0), false, DEFAULT_BUDGET).unwrap(), rv(&["3/2", "3/2"]));
        for name in ["E1", "E2", "E3"] {
            let inst = canonical(name).unwrap();
            let n = inst.horizon();
            let top = inst.constant_time(n);
            let got = value_bruteforce(&inst, &top, false, DEFAULT_BUDGET).unwrap();
            assert_eq!(&got, inst.reward().at_time(n));
        }
    }

    #[test]
    fn value_at_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        assert_eq!(vs.value_at(&e1.constant_time(1)), rv(&["3"]));
        let e3 = canonical("E3").unwrap();
        assert!(e3.predictable(glue(&StoppingTime(vec![2, 2]), &StoppingTime(vec![1, 1]), &Event::from_members(2, [0]))).is_err());
    }

    #[test]
    fn localized_examples() {
        let e3 = canonical("E3").unwrap();
        let vs = value_backward(&e3);
        let s = e3.constant_time(1);
        let two = e3.constant_time(2);
        let full = vs.localized_value(&Event::full(2), &s).unwrap();
        assert_eq!(full.at(&two).unwrap(), rv(&["3", "0"]));
        let none = vs.localized_value(&Event::empty(2), &s).unwrap();
        assert_eq!(none.at(&two).unwrap(), rv(&["0", "0"]));
        // {u} is not F_{1-}-measurable in E3
        assert!(vs.localized_value(&Event::from_members(2, [0]), &s).is_err());
        assert!(matches!(full.at(&e3.constant_time(0)), Err(Error::NotAfter)));
    }

    #[test]
    fn supermartingale_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        assert!(check_supermartingale_system(vs.v_table(), &e1, false, DEFAULT_BUDGET).unwrap().holds);
        let c = vec![rv(&["2"]); 3];
        assert!(check_supermartingale_system(&c, &e1, true, DEFAULT_BUDGET).unwrap().holds);
        let phi = e1.reward().per_time().to_vec();
        let report = check_supermartingale_system(&phi, &e1, false, DEFAULT_BUDGET).unwrap();
        let viol = report.violation.unwrap();
        assert_eq!(viol.tau, StoppingTime(vec![0]));
        assert_eq!(viol.tau_prime, StoppingTime(vec![1]));
        assert_eq!((viol.lhs.as_str(), viol.rhs.as_str()), ("3", "1"));
    }

    #[test]
    fn optimizing_sequence_examples() {
        let e1 = canonical("E1").unwrap();
        let seq = optimizing_sequence(&e1, &e1.constant_time(0), false, DEFAULT_BUDGET).unwrap();
        assert_eq!(seq.last().unwrap().conditional, rv(&["3"]));
        let at_end = optimizing_sequence(&e1, &e1.constant_time(2), false, DEFAULT_BUDGET).unwrap();
        assert_eq!(at_end.len(), 1);
        let e3 = canonical("E3").unwrap();
        let seq = optimizing_sequence(&e3, &e3.constant_time(0), false, DEFAULT_BUDGET).unwrap();
        assert_eq!(seq.last().unwrap().conditional, rv(&["3/2", "3/2"]));
        for pair in seq.windows(2) {
            assert!(pair[0].conditional.le(&pair[1].conditional));
        }
    }

    #[test]
    fn classical_gap_on_e3() {
        let e3 = canonical("E3").unwrap();
        assert_eq!(classical_value(&e3)[0], rv(&["2", "2"]));
        assert_eq!(classical_bruteforce(&e3, DEFAULT_BUDGET).unwrap(), rv(&["2", "2"]));
        assert_eq!(value_backward(&e3).v(0), &rv(&["3/2", "3/2"]));
    }
}
