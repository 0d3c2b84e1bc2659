//! Optimal and ε-optimal predictable stopping times.
//!
//! `τ^α(S)` is the first time after `S` at which the reward covers an
//! `α`-fraction of the value. As `α ↑ 1` it increases to the first contact
//! time `τ̂(S) = min{t >= S : V_p(t) = φ_t}`; on a finite grid the limit is
//! reached at some `α* < 1`. The left- and right-limit parts of the limiting
//! representation are empty on the grid, so `τ̂(S)` alone attains the value.

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::rational::Rational;
use crate::snell::ValueSystem;
use crate::space::condexp;
use crate::stopping::{lattice, PredictableTime, StoppingTime};

/// `α` values probed by reports and checks.
pub fn alpha_probes() -> [Rational; 4] {
    [Rational::new(1, 4), Rational::new(1, 2), Rational::new(3, 4), Rational::new(9, 10)]
}

fn scan(vs: &ValueSystem<'_>, s: &PredictableTime, hit: impl Fn(&Rational, &Rational) -> bool) -> StoppingTime {
    let inst = vs.instance();
    let n = inst.horizon();
    let phi = inst.reward();
    StoppingTime(
        inst.space()
            .outcomes()
            .map(|w| {
                (s.at(w)..=n)
                    .find(|&t| hit(&vs.v(t)[w], &phi.at_time(t)[w]))
                    .unwrap_or(n)
            })
            .collect(),
    )
}

/// `τ^α(S) = min{t >= S : α V_p(t) <= φ_t}` pointwise.
pub fn tau_alpha(vs: &ValueSystem<'_>, s: &PredictableTime, alpha: &Rational) -> Result<PredictableTime> {
    if !alpha.is_positive() || *alpha >= Rational::one() {
        return Err(Error::AlphaOutOfRange(alpha.clone()));
    }
    let time = scan(vs, s, |v, phi| &(alpha * v) <= phi);
    let tau = vs
        .instance()
        .predictable(time)
        .map_err(|e| Error::Internal(format!("penalized time is not predictable: {e}")))?;
    let inst = vs.instance();
    let lhs = vs.value_at(&tau).scale(alpha);
    if !lhs.le(&inst.reward().eval_at(&tau)) {
        return Err(Error::Internal("α V_p(τ^α) exceeds φ(τ^α)".into()));
    }
    Ok(tau)
}

/// First contact time `min{t >= S : V_p(t) = φ_t}`.
pub fn tau_hat(vs: &ValueSystem<'_>, s: &PredictableTime) -> Result<PredictableTime> {
    let time = scan(vs, s, |v, phi| v == phi);
    vs.instance()
        .predictable(time)
        .map_err(|e| Error::Internal(format!("first contact time is not predictable: {e}")))
}

/// Smallest `α*` such that `τ^α(S) = τ̂(S)` for every `α` in `(α*, 1)`:
/// the largest ratio `φ_t / V_p(t)` over the points strictly before first
/// contact (zero if there are none).
pub fn stationarity_threshold(vs: &ValueSystem<'_>, s: &PredictableTime) -> Result<Rational> {
    let hat = tau_hat(vs, s)?;
    let phi = vs.instance().reward();
    let mut best = Rational::zero();
    for w in vs.instance().space().outcomes() {
        for t in s.at(w)..hat.at(w) {
            let ratio = &phi.at_time(t)[w] / &vs.v(t)[w];
            best = best.max(ratio);
        }
    }
    Ok(best)
}

/// Limit of `τ^α(S)` along `α = 1 - 1/k`, `k = 2, 4, 8, ..`, taken once
/// `α` passes the stationarity threshold. Returns the limit and the `α`
/// at which it was read.
pub fn tau_alpha_limit(vs: &ValueSystem<'_>, s: &PredictableTime) -> Result<(PredictableTime, Rational)> {
    let threshold = stationarity_threshold(vs, s)?;
    let mut k: i64 = 2;
    loop {
        let alpha = Rational::one() - Rational::new(1, k);
        if alpha > threshold {
            let tau = tau_alpha(vs, s, &alpha)?;
            return Ok((tau, alpha));
        }
        k = k.checked_mul(2).ok_or_else(|| Error::Internal("α did not become stationary".into()))?;
    }
}

/// Local form of the martingale property on `[S, τ]`: `V_p(t) = E[V_p(t+1) | Q_t]`
/// on `{S <= t < τ}` for every `t`.
pub fn martingale_interval(vs: &ValueSystem<'_>, s: &PredictableTime, tau: &PredictableTime) -> Result<bool> {
    if !s.time().le(tau.time()) {
        return Err(Error::NotAfter);
    }
    let inst = vs.instance();
    for t in 0..inst.horizon() {
        let inside = |w: usize| s.at(w) <= t && t < tau.at(w);
        if !inst.space().outcomes().any(inside) {
            continue;
        }
        // V_p⁺(t) is E[V_p(t+1) | Q_t] only for a consistent table, so
        // recompute the projection here.
        let proj = condexp(vs.v(t + 1), inst.filtration().pre(t), inst.space());
        if inst.space().outcomes().any(|w| inside(w) && proj[w] != vs.v(t)[w]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pairwise form: `E[V_p(τ2) | F_{τ1-}] = V_p(τ1)` for all predictable
/// `S <= τ1 <= τ2 <= τ`.
pub fn martingale_interval_pairwise(
    vs: &ValueSystem<'_>,
    s: &PredictableTime,
    tau: &PredictableTime,
    budget: usize,
) -> Result<bool> {
    if !s.time().le(tau.time()) {
        return Err(Error::NotAfter);
    }
    let inst = vs.instance();
    let inside: Vec<PredictableTime> = inst
        .predictable_after(s, false, budget)?
        .into_iter()
        .filter(|t| t.time().le(tau.time()))
        .collect();
    let values: Vec<_> = inside.iter().map(|t| vs.value_at(t)).collect();
    for (i, t1) in inside.iter().enumerate() {
        for (j, t2) in inside.iter().enumerate() {
            if t1.time().le(t2.time()) && condexp(&values[j], t1.pre_sigma(), inst.space()) != values[i] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Criterion {
    /// `E[φ(τ*)] = max_{τ ∈ T_S^p} E[φ(τ)]`, by enumeration.
    pub optimal: bool,
    /// `V_p(τ*) = φ(τ*)`.
    pub cond1: bool,
    /// `V_p` is a martingale system on `[S, τ*]`.
    pub cond2: bool,
}

/// Evaluates the two optimality conditions and the direct optimality test
/// without asserting their equivalence.
pub fn criterion_parts(
    vs: &ValueSystem<'_>,
    s: &PredictableTime,
    tau_star: &PredictableTime,
    budget: usize,
) -> Result<Criterion> {
    if !s.time().le(tau_star.time()) {
        return Err(Error::NotAfter);
    }
    let inst = vs.instance();
    let space = inst.space();
    let phi = inst.reward();
    let best = inst
        .predictable_after(s, false, budget)?
        .iter()
        .map(|tau| space.expectation(&phi.eval_at(tau)))
        .max()
        .ok_or_else(|| Error::Internal("empty class".into()))?;
    let reward = phi.eval_at(tau_star);
    Ok(Criterion {
        optimal: space.expectation(&reward) == best,
        cond1: vs.value_at(tau_star) == reward,
        cond2: martingale_interval(vs, s, tau_star)?,
    })
}

/// Optimality criterion: `τ*` is optimal iff both conditions hold. The
/// equivalence is asserted.
pub fn criterion_check(
    vs: &ValueSystem<'_>,
    s: &PredictableTime,
    tau_star: &PredictableTime,
    budget: usize,
) -> Result<Criterion> {
    let c = criterion_parts(vs, s, tau_star, budget)?;
    if c.optimal != (c.cond1 && c.cond2) {
        return Err(Error::Internal(format!(
            "optimality criterion mismatch at τ*={tau_star}: optimal={}, cond1={}, cond2={}",
            c.optimal, c.cond1, c.cond2
        )));
    }
    Ok(c)
}

/// The times after `S` on which `V_p` is a martingale system, and their
/// pointwise maximum `τ̃(S)`. Closure under pairwise maximum and the
/// martingale property on `[S, τ̃]` are asserted.
pub fn optimal_set(
    vs: &ValueSystem<'_>,
    s: &PredictableTime,
    budget: usize,
) -> Result<(Vec<PredictableTime>, PredictableTime)> {
    let inst = vs.instance();
    let mut set = Vec::new();
    for tau in inst.predictable_after(s, false, budget)? {
        if martingale_interval(vs, s, &tau)? {
            set.push(tau);
        }
    }
    let members: std::collections::HashSet<&StoppingTime> = set.iter().map(|t| t.time()).collect();
    for a in &set {
        for b in &set {
            let (_, hi) = lattice(a.time(), b.time());
            if !members.contains(&hi) {
                return Err(Error::Internal(format!("optimal set not closed under max: {a} ∨ {b}")));
            }
        }
    }
    let top = set
        .iter()
        .map(|t| t.time().clone())
        .reduce(|a, b| lattice(&a, &b).1)
        .ok_or_else(|| Error::Internal("optimal set is empty".into()))?;
    let top = inst.predictable(top)?;
    if !martingale_interval(vs, s, &top)? {
        return Err(Error::Internal("V_p is not a martingale up to the maximal element".into()));
    }
    Ok((set, top))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RepresentationReport {
    pub holds: bool,
    /// `V_p(S) = E[φ(τ̂) | F_{S-}]` pointwise.
    pub conditional_match: bool,
    /// `E[φ(τ̂)] = max_τ E[φ(τ)]`.
    pub expectation_match: bool,
    pub expected_reward: Rational,
    pub best_expected_reward: Rational,
    /// Mass of the left-limit part of the representation (always zero).
    pub h_minus_mass: Rational,
    /// Mass of the right-limit part of the representation (always zero).
    pub h_plus_mass: Rational,
}

/// `V_p(S) = E[φ(τ̂(S)) | F_{S-}]` and `E[φ(τ̂)] = sup_τ E[φ(τ)]`.
pub fn representation_check(vs: &ValueSystem<'_>, s: &PredictableTime, budget: usize) -> Result<RepresentationReport> {
    let inst = vs.instance();
    let space = inst.space();
    let phi = inst.reward();
    let hat = tau_hat(vs, s)?;
    let reward = phi.eval_at(&hat);
    let conditional_match = condexp(&reward, s.pre_sigma(), space) == vs.value_at(s);
    let expected_reward = space.expectation(&reward);
    let best_expected_reward = inst
        .predictable_after(s, false, budget)?
        .iter()
        .map(|tau| space.expectation(&phi.eval_at(tau)))
        .max()
        .unwrap_or_else(Rational::zero);
    let expectation_match = expected_reward == best_expected_reward;
    // H⁺ = {V_p(τ̂) != φ(τ̂)} is empty by first contact; H⁻ needs a strictly
    // increasing approach, impossible on the grid
    let h_plus = space.mass(&vs.value_at(&hat).eq_event(&reward).complement());
    Ok(RepresentationReport {
        holds: conditional_match && expectation_match && h_plus.is_zero(),
        conditional_match,
        expectation_match,
        expected_reward,
        best_expected_reward,
        h_minus_mass: Rational::zero(),
        h_plus_mass: h_plus,
    })
}

/// Everything the optimal-stopping constructions produce at one `S`.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalReport {
    pub s: IndexMap<String, usize>,
    pub tau_alpha: IndexMap<String, IndexMap<String, usize>>,
    pub tau_hat: IndexMap<String, usize>,
    pub optimal_set: Vec<IndexMap<String, usize>>,
    pub tau_tilde: IndexMap<String, usize>,
    pub value_at_s: IndexMap<String, Rational>,
    pub optimal_value: Rational,
    pub attained_by: Vec<IndexMap<String, usize>>,
    pub h_minus_mass: Rational,
    pub h_plus_mass: Rational,
}

pub fn optimal_report(vs: &ValueSystem<'_>, s: &PredictableTime, budget: usize) -> Result<OptimalReport> {
    let inst: &Instance = vs.instance();
    let space = inst.space();
    let map = |t: &PredictableTime| t.time().to_map(space);
    let mut tau_alpha_map = IndexMap::new();
    for alpha in alpha_probes() {
        tau_alpha_map.insert(alpha.to_string(), map(&tau_alpha(vs, s, &alpha)?));
    }
    let hat = tau_hat(vs, s)?;
    let (set, tilde) = optimal_set(vs, s, budget)?;
    let mut attained_by = Vec::new();
    for tau in inst.predictable_after(s, false, budget)? {
        if criterion_check(vs, s, &tau, budget)?.optimal {
            attained_by.push(tau);
        }
    }
    if !attained_by.iter().any(|t| t.time() == hat.time()) {
        return Err(Error::Internal("first contact time is not optimal".into()));
    }
    let rep = representation_check(vs, s, budget)?;
    let value = vs.value_at(s);
    Ok(OptimalReport {
        s: map(s),
        tau_alpha: tau_alpha_map,
        tau_hat: map(&hat),
        optimal_set: set.iter().map(map).collect(),
        tau_tilde: map(&tilde),
        value_at_s: space.outcomes().map(|w| (space.id(w).to_string(), value[w].clone())).collect(),
        optimal_value: space.expectation(&value),
        attained_by: attained_by.iter().map(map).collect(),
        h_minus_mass: rep.h_minus_mass,
        h_plus_mass: rep.h_plus_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::canonical;
    use crate::reward::RewardFamily;
    use crate::snell::value_backward;
    use crate::stopping::DEFAULT_BUDGET;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn consts(t: &[usize]) -> StoppingTime {
        StoppingTime(t.to_vec())
    }

    #[test]
    fn tau_alpha_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let s = e1.constant_time(0);
        assert_eq!(tau_alpha(&vs, &s, &q("1/2")).unwrap().time(), &consts(&[1]));
        // 1/4 · 3 <= 1 already at S
        assert_eq!(tau_alpha(&vs, &s, &q("1/4")).unwrap().time(), &consts(&[0]));
        let e3 = canonical("E3").unwrap();
        let vs3 = value_backward(&e3);
        assert_eq!(tau_alpha(&vs3, &e3.constant_time(0), &q("1/2")).unwrap().time(), &consts(&[1, 1]));
        for bad in ["0", "1", "3/2", "-1/2"] {
            assert!(matches!(tau_alpha(&vs, &s, &q(bad)), Err(Error::AlphaOutOfRange(_))));
        }
    }

    #[test]
    fn tau_hat_examples() {
        for (name, expected) in [("E1", vec![1]), ("E3", vec![2, 2]), ("E2", vec![0, 0])] {
            let inst = canonical(name).unwrap();
            let vs = value_backward(&inst);
            let s = inst.constant_time(0);
            let hat = tau_hat(&vs, &s).unwrap();
            assert_eq!(hat.time(), &StoppingTime(expected), "{name}");
            let (limit, _) = tau_alpha_limit(&vs, &s).unwrap();
            assert_eq!(limit.time(), hat.time());
        }
    }

    #[test]
    fn criterion_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let s = e1.constant_time(0);
        let c = criterion_check(&vs, &s, &e1.constant_time(1), DEFAULT_BUDGET).unwrap();
        assert!(c.optimal && c.cond1 && c.cond2);
        let c = criterion_check(&vs, &s, &e1.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert!(!c.optimal && !c.cond1);
        let e3 = canonical("E3").unwrap();
        let vs3 = value_backward(&e3);
        let c = criterion_check(&vs3, &e3.constant_time(0), &e3.constant_time(2), DEFAULT_BUDGET).unwrap();
        assert!(c.optimal && c.cond1 && c.cond2);
    }

    #[test]
    fn martingale_interval_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let s = e1.constant_time(0);
        assert!(martingale_interval(&vs, &s, &s).unwrap());
        assert!(martingale_interval(&vs, &s, &e1.constant_time(1)).unwrap());
        assert!(!martingale_interval(&vs, &s, &e1.constant_time(2)).unwrap());
        for t in 0..=2 {
            let tau = e1.constant_time(t);
            assert_eq!(
                martingale_interval(&vs, &s, &tau).unwrap(),
                martingale_interval_pairwise(&vs, &s, &tau, DEFAULT_BUDGET).unwrap()
            );
        }
    }

    #[test]
    fn optimal_set_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let (set, tilde) = optimal_set(&vs, &e1.constant_time(0), DEFAULT_BUDGET).unwrap();
        let times: Vec<_> = set.iter().map(|t| t.time().clone()).collect();
        assert_eq!(times, vec![consts(&[0]), consts(&[1])]);
        assert_eq!(tilde.time(), &consts(&[1]));

        let e3 = canonical("E3").unwrap();
        let vs3 = value_backward(&e3);
        let (set, tilde) = optimal_set(&vs3, &e3.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(tilde.time(), &consts(&[2, 2]));

        let flat = e3.with_reward(RewardFamily::constant(2, 2, q("1"))).unwrap();
        let vsf = value_backward(&flat);
        let (set, tilde) = optimal_set(&vsf, &flat.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert_eq!(set.len(), flat.predictable_after(&flat.constant_time(0), false, DEFAULT_BUDGET).unwrap().len());
        assert_eq!(tilde.time(), &consts(&[2, 2]));
    }

    #[test]
    fn representation_examples() {
        let e1 = canonical("E1").unwrap();
        let rep = representation_check(&value_backward(&e1), &e1.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.expected_reward, q("3"));
        let e3 = canonical("E3").unwrap();
        let rep = representation_check(&value_backward(&e3), &e3.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.expected_reward, q("3/2"));
        let flat = e3.with_reward(RewardFamily::constant(2, 2, q("5"))).unwrap();
        let rep = representation_check(&value_backward(&flat), &flat.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.expected_reward, q("5"));
    }

    #[test]
    fn report_for_e1() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let rep = optimal_report(&vs, &e1.constant_time(0), DEFAULT_BUDGET).unwrap();
        assert_eq!(rep.optimal_value, q("3"));
        assert_eq!(rep.tau_hat["w"], 1);
        assert_eq!(rep.tau_tilde["w"], 1);
        assert_eq!(rep.attained_by.len(), 1);
        assert_eq!(rep.tau_alpha["1/2"]["w"], 1);
    }
}
