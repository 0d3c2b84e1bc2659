//! Grid Mertens decomposition of the predictable value system,
//! `V_p(t) = M_t - A_t - C_{t-1}`.
//!
//! On the grid every decrement of the value between consecutive instants is
//! known at the pre-slot, so the whole compensator is booked into `C` with
//! increments `ΔC_t = V_p(t) - E[V_p(t+1) | Q_t]` (nonnegative magnitudes)
//! and `A` is identically zero. `M` is a martingale for the pre-partitions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::snell::ValueSystem;
use crate::space::{condexp, is_measurable, Event, RandomVar};
use crate::stopping::PredictableTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MertensDecomposition {
    pub m: Vec<RandomVar>,
    pub a: Vec<RandomVar>,
    /// `C_{-1}, C_0, .., C_N`; index `t + 1` holds `C_t`.
    pub c: Vec<RandomVar>,
    /// `{V_p(t) = φ_t}` per time.
    pub contact: Vec<Event>,
}

impl MertensDecomposition {
    pub fn horizon(&self) -> usize {
        self.m.len() - 1
    }

    /// `C_{t-1}`
    pub fn c_before(&self, t: usize) -> &RandomVar {
        &self.c[t]
    }

    /// `C_t`
    pub fn c_at(&self, t: usize) -> &RandomVar {
        &self.c[t + 1]
    }

    /// `ΔC_t = C_t - C_{t-1}`
    pub fn delta_c(&self, t: usize) -> RandomVar {
        self.c[t + 1].sub(&self.c[t])
    }

    /// `C_{τ-1}` pointwise.
    pub fn c_before_time(&self, tau: &PredictableTime) -> RandomVar {
        RandomVar((0..tau.time().len()).map(|w| self.c[tau.at(w)][w].clone()).collect())
    }

    /// `M_τ` pointwise.
    pub fn m_at_time(&self, tau: &PredictableTime) -> RandomVar {
        RandomVar((0..tau.time().len()).map(|w| self.m[tau.at(w)][w].clone()).collect())
    }

    /// Every structural invariant, checked against the value system it came
    /// from. Returns the first broken one.
    pub fn check(&self, vs: &ValueSystem<'_>) -> Result<(), String> {
        let inst = vs.instance();
        let n = inst.horizon();
        let space = inst.space();
        if !self.c[0].iter().all(Rational::is_zero) {
            return Err("C_{-1} is not zero".into());
        }
        for t in 0..=n {
            let rebuilt = self.m[t].sub(&self.a[t]).sub(self.c_before(t));
            if let Some(w) = rebuilt.first_diff(vs.v(t)) {
                return Err(format!(
                    "reconstruction fails at t={t}, outcome {}: M-A-C = {}, V_p = {}",
                    space.id(w),
                    rebuilt[w],
                    vs.v(t)[w]
                ));
            }
            if !self.a[t].iter().all(Rational::is_zero) {
                return Err(format!("A_{t} is not zero"));
            }
            let dc = self.delta_c(t);
            if let Some(w) = dc.iter().position(Rational::is_negative) {
                return Err(format!("ΔC_{t} negative on {}", space.id(w)));
            }
            if !is_measurable(&dc, inst.filtration().pre(t)) {
                return Err(format!("ΔC_{t} is not measurable before t"));
            }
            let expected = vs.v(t).sub(vs.v_plus(t));
            if let Some(w) = dc.first_diff(&expected) {
                return Err(format!(
                    "ΔC_{t} differs from V_p - V_p⁺ on {}: {} vs {}",
                    space.id(w),
                    dc[w],
                    expected[w]
                ));
            }
            if t < n {
                let proj = condexp(&self.m[t + 1], inst.filtration().pre(t), space);
                if let Some(w) = proj.first_diff(&self.m[t]) {
                    return Err(format!(
                        "M is not a martingale at t={t} on {}: E[M_{}|Q_{t}] = {}, M_{t} = {}",
                        space.id(w),
                        t + 1,
                        proj[w],
                        self.m[t][w]
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `C_{-1} = 0`, `C_t = C_{t-1} + V_p(t) - V_p⁺(t)`, `M_t = V_p(t) + C_{t-1}`,
/// `A = 0`. All invariants are verified before returning.
pub fn decompose(vs: &ValueSystem<'_>) -> Result<MertensDecomposition> {
    let inst = vs.instance();
    let n = inst.horizon();
    let size = inst.num_outcomes();
    let mut c = vec![RandomVar::zero(size)];
    for t in 0..=n {
        let next = c[t].add(&vs.v(t).sub(vs.v_plus(t)));
        c.push(next);
    }
    let m = (0..=n).map(|t| vs.v(t).add(&c[t])).collect();
    let d = MertensDecomposition {
        m,
        a: vec![RandomVar::zero(size); n + 1],
        c,
        contact: (0..=n).map(|t| vs.contact(t)).collect(),
    };
    d.check(vs).map_err(Error::Internal)?;
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlatnessViolation {
    pub t: usize,
    pub outcome: String,
    pub increment: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlatnessReport {
    pub holds: bool,
    pub violation: Option<FlatnessViolation>,
}

impl FlatnessReport {
    fn from(violation: Option<FlatnessViolation>) -> Self {
        FlatnessReport { holds: violation.is_none(), violation }
    }
}

/// `ΔC_t = 0` on `{V_p(t) > φ_t}` for every `t`: the compensator only grows
/// on the contact set.
pub fn flat_off_contact_check(d: &MertensDecomposition, ids: &[String]) -> FlatnessReport {
    for t in 0..=d.horizon() {
        let dc = d.delta_c(t);
        for (w, inc) in dc.iter().enumerate() {
            if !inc.is_zero() && !d.contact[t].contains(w) {
                return FlatnessReport::from(Some(FlatnessViolation {
                    t,
                    outcome: ids[w].clone(),
                    increment: inc.to_string(),
                }));
            }
        }
    }
    FlatnessReport::from(None)
}

/// `C_{τ-1} = C_{S-1}` pointwise: no compensator growth on `[S, τ)`.
pub fn flat_before(d: &MertensDecomposition, tau: &PredictableTime, s: &PredictableTime, ids: &[String]) -> Result<FlatnessReport> {
    if !s.time().le(tau.time()) {
        return Err(Error::NotAfter);
    }
    for w in 0..ids.len() {
        for t in s.at(w)..tau.at(w) {
            let inc = &d.c[t + 1][w] - &d.c[t][w];
            if !inc.is_zero() {
                return Ok(FlatnessReport::from(Some(FlatnessViolation {
                    t,
                    outcome: ids[w].clone(),
                    increment: inc.to_string(),
                })));
            }
        }
    }
    Ok(FlatnessReport::from(None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::canonical;
    use crate::reward::RewardFamily;
    use crate::snell::value_backward;

    fn rv(vals: &[&str]) -> RandomVar {
        RandomVar(vals.iter().map(|s| s.parse().unwrap()).collect())
    }

    #[test]
    fn decompose_e1() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let d = decompose(&vs).unwrap();
        let dc: Vec<RandomVar> = (0..=2).map(|t| d.delta_c(t)).collect();
        assert_eq!(dc, vec![rv(&["0"]), rv(&["1"]), rv(&["0"])]);
        assert_eq!(d.c, vec![rv(&["0"]), rv(&["0"]), rv(&["1"]), rv(&["1"])]);
        assert_eq!(d.m, vec![rv(&["3"]); 3]);
    }

    #[test]
    fn decompose_e3_and_constant() {
        let e3 = canonical("E3").unwrap();
        let vs = value_backward(&e3);
        let d = decompose(&vs).unwrap();
        assert_eq!(d.delta_c(2), rv(&["0", "0"]));
        assert_eq!(d.m[0], rv(&["3/2", "3/2"]));
        assert_eq!(d.m[1], rv(&["3/2", "3/2"]));
        assert_eq!(d.m[2], rv(&["3", "0"]));

        let flat = e3.with_reward(RewardFamily::constant(2, 2, "4".parse().unwrap())).unwrap();
        let vs = value_backward(&flat);
        let d = decompose(&vs).unwrap();
        assert!(d.c.iter().all(|c| c == &rv(&["0", "0"])));
        assert!(d.m.iter().all(|m| m == &rv(&["4", "4"])));
        assert!(flat_off_contact_check(&d, flat.space().ids()).holds);
    }

    #[test]
    fn flat_off_contact_e1_and_corruption() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let mut d = decompose(&vs).unwrap();
        assert!(flat_off_contact_check(&d, e1.space().ids()).holds);
        // ΔC_0 := 1
        d.c[1] = rv(&["1"]);
        d.c[2] = rv(&["2"]);
        d.c[3] = rv(&["2"]);
        let report = flat_off_contact_check(&d, e1.space().ids());
        assert_eq!(report.violation.unwrap().t, 0);
        assert!(d.check(&vs).is_err());
    }

    #[test]
    fn flat_before_examples() {
        let e1 = canonical("E1").unwrap();
        let vs = value_backward(&e1);
        let d = decompose(&vs).unwrap();
        let ids = e1.space().ids();
        let s = e1.constant_time(0);
        assert!(flat_before(&d, &s, &s, ids).unwrap().holds);
        assert!(flat_before(&d, &e1.constant_time(1), &s, ids).unwrap().holds);
        let report = flat_before(&d, &e1.constant_time(2), &s, ids).unwrap();
        assert_eq!(report.violation.unwrap().t, 1);
        assert!(flat_before(&d, &s, &e1.constant_time(1), ids).is_err());
    }
}
