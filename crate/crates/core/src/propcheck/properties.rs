use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ctx::{fmt_partition, Ctx, Rel, Witness};
use crate::decomposition::{decompose, flat_before, flat_off_contact_check};
use crate::error::Result;
use crate::optimal::{
    alpha_probes, martingale_interval, optimal_set, representation_check, stationarity_threshold, tau_alpha,
    tau_alpha_limit, tau_hat,
};
use crate::rational::Rational;
use crate::snell::{check_supermartingale_system, compose, optimizing_sequence as build_sequence, SystemReport};
use crate::space::{condexp, is_measurable, Event, RandomVar};
use crate::stopping::{classify, glue, lattice, pre_sigma, PredictableTime, StoppingTime, TimeClass};

type Check = Result<Option<Witness>>;

macro_rules! check {
    ($e:expr) => {
        if let Some(w) = $e {
            return Ok(Some(w));
        }
    };
}

fn system_witness(c: &Ctx<'_, '_>, relation: &str, r: SystemReport) -> Option<Witness> {
    let v = r.violation?;
    Some(Witness {
        tau: Some(c.map(&v.tau)),
        theta: Some(c.map(&v.tau_prime)),
        block: Some(v.block),
        lhs: v.lhs,
        rhs: v.rhs,
        ..Witness::new(relation)
    })
}

// ---- predictable times and their pre-sigma-algebras

pub fn pre_sigma_constant(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    for t in filt.times() {
        let p = pre_sigma(&StoppingTime::constant(c.space().len(), t), filt)?;
        if &p != filt.pre(t) {
            return Ok(Some(
                Witness::new("F_{t-} = Q_t").time(t).sides(fmt_partition(&p, c.space()), fmt_partition(filt.pre(t), c.space())),
            ));
        }
    }
    Ok(None)
}

pub fn pre_sigma_events(c: &Ctx<'_, '_>) -> Check {
    for tau in c.all()?.iter() {
        let g = tau.pre_sigma();
        for t in c.inst.filtration().times() {
            for (name, e) in [("{τ = t}", tau.time().eq_event(t)), ("{τ > t}", tau.time().gt_event(t))] {
                if !e.is_measurable(g) {
                    let w = Witness { tau: Some(c.map(tau.time())), event: Some(c.ids(&e)), ..Witness::new(name) };
                    return Ok(Some(w.time(t).sides("event", fmt_partition(g, c.space()))));
                }
            }
        }
        if !is_measurable(&c.phi().eval_at(tau), g) {
            let w = Witness { tau: Some(c.map(tau.time())), ..Witness::new("φ(τ) in F_{τ-}") };
            return Ok(Some(w.sides("φ(τ)", fmt_partition(g, c.space()))));
        }
    }
    Ok(None)
}

pub fn pre_sigma_meet(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let (lo, _) = lattice(a.time(), b.time());
            let lhs = pre_sigma(&lo, c.inst.filtration())?;
            let rhs = a.pre_sigma().meet(b.pre_sigma());
            if lhs != rhs {
                let w = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), ..Witness::new("F_{(τ1 ∧ τ2)-} = F_{τ1-} ∩ F_{τ2-}") };
                return Ok(Some(w.sides(fmt_partition(&lhs, c.space()), fmt_partition(&rhs, c.space()))));
            }
        }
    }
    Ok(None)
}

pub fn pre_sigma_monotone(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    for s in all.iter() {
        for th in all.iter().filter(|th| s.time().le(th.time())) {
            if !s.pre_sigma().is_coarser_than(th.pre_sigma()) {
                let w = Witness { theta: Some(c.map(th.time())), ..c.at_s("F_{S-} ⊆ F_{θ-}", s) };
                return Ok(Some(w.sides(fmt_partition(s.pre_sigma(), c.space()), fmt_partition(th.pre_sigma(), c.space()))));
            }
        }
    }
    Ok(None)
}

pub fn glue_lattice(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    let all = c.all()?;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let base = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), ..Witness::default() };
            let (lo, hi) = lattice(a.time(), b.time());
            for (name, x) in [("τ1 ∧ τ2 predictable", &lo), ("τ1 ∨ τ2 predictable", &hi)] {
                if classify(x, filt) != TimeClass::Predictable {
                    return Ok(Some(Witness { relation: name.into(), ..base }.sides(x, "predictable")));
                }
            }
            let g = pre_sigma(&lo, filt)?;
            for e in c.events(&g) {
                let glued = glue(a.time(), b.time(), &e);
                if classify(&glued, filt) != TimeClass::Predictable {
                    let w = Witness { relation: "τ1 1_A + τ2 1_{A^c} predictable".into(), event: Some(c.ids(&e)), ..base };
                    return Ok(Some(w.sides(glued, "predictable")));
                }
            }
        }
    }
    Ok(None)
}

pub fn enumeration_complete(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    let n = c.space().len();
    let horizon = c.horizon();
    let all = c.all()?;
    // exhaustive oracle at S = 0 when the map space is small
    let maps = (horizon as u64 + 1).checked_pow(n as u32).filter(|&m| m <= 50_000);
    if let Some(count) = maps {
        let mut found = Vec::new();
        for code in 0..count {
            let mut x = code;
            let times: Vec<usize> = (0..n)
                .map(|_| {
                    let t = (x % (horizon as u64 + 1)) as usize;
                    x /= horizon as u64 + 1;
                    t
                })
                .collect();
            let tau = StoppingTime(times);
            if classify(&tau, filt) == TimeClass::Predictable {
                found.push(tau);
            }
        }
        found.sort();
        let listed: Vec<StoppingTime> = all.iter().map(|t| t.time().clone()).collect();
        if found != listed {
            return Ok(Some(Witness::new("T_0^p = predictable time maps").sides(listed.len(), found.len())));
        }
    }
    for s in all.iter() {
        let cls = c.class(s, false)?;
        let strict = c.class(s, true)?;
        let last = StoppingTime::constant(n, horizon);
        let has = |t: &StoppingTime| cls.iter().any(|x| x.time() == t);
        if !has(s.time()) || !has(&last) {
            return Ok(Some(c.at_s("S, N in T_S^p", s).sides(cls.len(), "contains S and N")));
        }
        if let Some(bad) = cls.iter().find(|t| !s.time().le(t.time())) {
            return Ok(Some(c.at_pair("τ >= S", s, bad).sides(bad, s)));
        }
        let expected: Vec<&StoppingTime> =
            cls.iter().map(|t| t.time()).filter(|t| t.strictly_after(s.time(), horizon)).collect();
        let got: Vec<&StoppingTime> = strict.iter().map(|t| t.time()).collect();
        if expected != got {
            return Ok(Some(c.at_s("T_{S+}^p = {τ in T_S^p : τ > S on {S < N}}", s).sides(got.len(), expected.len())));
        }
    }
    Ok(None)
}

pub fn reward_admissible(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    let vals: Vec<RandomVar> = all.iter().map(|t| c.phi().eval_at(t)).collect();
    for (i, a) in all.iter().enumerate() {
        if let Some(b) = crate::space::first_nonconstant_block(&vals[i], a.pre_sigma()) {
            let w = c.at_pair("φ(τ) in F_{τ-}", a, a);
            let block = &a.pre_sigma().blocks()[b];
            return Ok(Some(Witness { block: Some(c.space().block_ids(block)), ..w }.sides(&vals[i][block[0]], "constant")));
        }
        for (j, b) in all.iter().enumerate().skip(i + 1) {
            let on = a.time().agree_event(b.time());
            let base = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), ..Witness::new("φ(τ) = φ(τ') on {τ = τ'}") };
            check!(c.compare(&vals[i], &vals[j], Rel::Eq, Some(&on), None, base));
        }
    }
    Ok(None)
}

// ---- value families

pub fn pairwise_max(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    for s in c.all()?.iter() {
        for strict in [false, true] {
            let cls = c.class(s, strict)?;
            let conds: Vec<RandomVar> = cls.iter().map(|t| c.ce(&c.phi().eval_at(t), s)).collect();
            for (i, t1) in cls.iter().enumerate() {
                for (j, t2) in cls.iter().enumerate().skip(i + 1) {
                    let a = Event::from_fn(c.space().len(), |w| conds[j][w] <= conds[i][w]);
                    let glued = glue(t1.time(), t2.time(), &a);
                    let base = Witness {
                        tau: Some(c.map(t1.time())),
                        theta: Some(c.map(t2.time())),
                        event: Some(c.ids(&a)),
                        ..c.at_s("E[φ(τ3) | F_{S-}] = E[φ(τ1) | F_{S-}] ∨ E[φ(τ2) | F_{S-}]", s)
                    };
                    let in_class = cls.iter().any(|t| t.time() == &glued);
                    if !in_class || classify(&glued, filt) != TimeClass::Predictable {
                        return Ok(Some(Witness { detail: Some("glued time left the class".into()), ..base }.sides(glued, "in class")));
                    }
                    let tau3 = c.inst.predictable(glued)?;
                    let lhs = c.ce(&c.phi().eval_at(&tau3), s);
                    check!(c.compare(&lhs, &conds[i].max(&conds[j]), Rel::Eq, None, Some(s.pre_sigma()), base));
                }
            }
        }
    }
    Ok(None)
}

pub fn optimizing_sequence(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        for strict in [false, true] {
            let seq = build_sequence(c.inst, s, strict, c.budget)?;
            for pair in seq.windows(2) {
                let base = Witness { tau: Some(c.map(pair[1].tau.time())), ..c.at_s("E[φ(τ^n) | F_{S-}] nondecreasing", s) };
                check!(c.compare(&pair[0].conditional, &pair[1].conditional, Rel::Le, None, Some(s.pre_sigma()), base));
            }
            let last = seq.last().expect("nonempty");
            let target = if strict { c.vs.value_plus_at(s) } else { c.vs.value_at(s) };
            let rel = if strict { "lim E[φ(τ^n) | F_{S-}] = V_p⁺(S)" } else { "lim E[φ(τ^n) | F_{S-}] = V_p(S)" };
            let base = Witness { tau: Some(c.map(last.tau.time())), ..c.at_s(rel, s) };
            check!(c.compare(&last.conditional, &target, Rel::Eq, None, Some(s.pre_sigma()), base));
        }
    }
    Ok(None)
}


pub fn aggregation(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let brute = c.brute(c.phi(), s, false)?;
        check!(c.compare(&c.vs.value_at(s), &brute, Rel::Eq, None, Some(s.pre_sigma()), c.at_s("V_p(S) = esssup E[φ(τ) | F_{S-}]", s)));
    }
    Ok(None)
}

pub fn strict_aggregation(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let brute = c.brute(c.phi(), s, true)?;
        check!(c.compare(&c.vs.value_plus_at(s), &brute, Rel::Eq, None, Some(s.pre_sigma()), c.at_s("V_p⁺(S) = esssup_{T_{S+}} E[φ(τ) | F_{S-}]", s)));
    }
    Ok(None)
}

pub fn bellman_alpha(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let alphas = c.alphas(s);
        for th in c.class(s, false)?.iter() {
            for strict in [false, true] {
                let value = if strict { c.vs.value_plus_at(th) } else { c.vs.value_at(th) };
                let rewards: Vec<RandomVar> = c.class(th, strict)?.iter().map(|t| c.phi().eval_at(t)).collect();
                for alpha in &alphas {
                    let lhs = c.ce(&alpha.mul(&value), s);
                    let rhs = rewards
                        .iter()
                        .map(|r| c.ce(&alpha.mul(r), s))
                        .reduce(|a, b| a.max(&b))
                        .expect("nonempty");
                    let rel = if strict {
                        "E[α V_p⁺(θ) | F_{S-}] = esssup_{T_{θ+}} E[α φ(τ) | F_{S-}]"
                    } else {
                        "E[α V_p(θ) | F_{S-}] = esssup_{T_θ} E[α φ(τ) | F_{S-}]"
                    };
                    let base = Witness { theta: Some(c.map(th.time())), alpha: Some(c.var(alpha)), ..c.at_s(rel, s) };
                    check!(c.compare(&lhs, &rhs, Rel::Eq, None, Some(s.pre_sigma()), base));
                }
            }
        }
    }
    Ok(None)
}

/// `V^α(τ) = α V_p(τ)` and the strict form, with `V^α` computed by brute
/// force on the scaled family.
fn scaled_identity(c: &Ctx<'_, '_>, s: &PredictableTime, alpha: &RandomVar, label: &str) -> Check {
    let fam = c.phi().scale_by(alpha, s)?;
    for strict in [false, true] {
        for tau in c.class(s, strict)?.iter() {
            let lhs = c.brute(&fam, tau, strict)?;
            let value = if strict { c.vs.value_plus_at(tau) } else { c.vs.value_at(tau) };
            let rhs = alpha.mul(&value);
            let rel = format!("{label}{}", if strict { " (strict)" } else { "" });
            let base = Witness { alpha: Some(c.var(alpha)), ..c.at_pair(&rel, s, tau) };
            check!(c.compare(&lhs, &rhs, Rel::Eq, None, Some(tau.pre_sigma()), base));
        }
    }
    Ok(None)
}

pub fn scaling(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        for alpha in c.alphas(s) {
            check!(scaled_identity(c, s, &alpha, "V^α(τ) = α V_p(τ)")?);
        }
    }
    Ok(None)
}

pub fn localization(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        for a in c.events(s.pre_sigma()) {
            check!(scaled_identity(c, s, &a.indicator(), "V^A(τ) = 1_A V_p(τ)")?.map(|w| Witness { event: Some(c.ids(&a)), ..w }));
        }
    }
    Ok(None)
}

pub fn localization_agree(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let agree = a.time().agree_event(b.time());
            if agree.members().next().is_none() {
                continue;
            }
            let lo = c.inst.predictable(lattice(a.time(), b.time()).0)?;
            let fam = c.phi().scale_by(&agree.indicator(), &lo)?;
            for strict in [false, true] {
                let lhs = c.brute(&fam, a, strict)?;
                let rhs = c.brute(&fam, b, strict)?;
                let rel = if strict { "V^{A+}(τ) = V^{A+}(τ̃)" } else { "V^A(τ) = V^A(τ̃)" };
                let base = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), event: Some(c.ids(&agree)), ..Witness::new(rel) };
                check!(c.compare(&lhs, &rhs, Rel::Eq, None, None, base));
            }
        }
    }
    Ok(None)
}

pub fn strict_localization_bound(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    for tau in all.iter() {
        let reward = c.phi().eval_at(tau);
        for tt in all.iter() {
            let b = tau.time().after_event(tt.time());
            if b.members().next().is_none() {
                continue;
            }
            let lhs = c.ce(&reward, tt).restrict(&b);
            let fam = c.phi().scale_by(&b.indicator(), tt)?;
            let local = c.brute(&fam, tt, true)?;
            let base = Witness { tau: Some(c.map(tau.time())), theta: Some(c.map(tt.time())), event: Some(c.ids(&b)), ..Witness::default() };
            check!(c.compare(&lhs, &local, Rel::Le, None, Some(tt.pre_sigma()), Witness { relation: "E[φ(τ) | F_{τ̃-}] 1_B <= V^{B+}(τ̃)".into(), ..base.clone() }));
            let strict = c.vs.value_plus_at(tt).restrict(&b);
            check!(c.compare(&lhs, &strict, Rel::Le, None, Some(tt.pre_sigma()), Witness { relation: "E[φ(τ) | F_{τ̃-}] 1_B <= V_p⁺(τ̃) 1_B".into(), ..base }));
        }
    }
    Ok(None)
}

pub fn additivity(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        for a in c.events(s.pre_sigma()) {
            let fa = c.phi().scale_by(&a.indicator(), s)?;
            let fc = c.phi().scale_by(&a.complement().indicator(), s)?;
            for tau in c.class(s, false)?.iter() {
                let sum = c.brute(&fa, tau, false)?.add(&c.brute(&fc, tau, false)?);
                let base = Witness { event: Some(c.ids(&a)), ..c.at_pair("V_p(τ) = V^A(τ) + V^{A^c}(τ)", s, tau) };
                check!(c.compare(&c.vs.value_at(tau), &sum, Rel::Eq, None, Some(tau.pre_sigma()), base));
            }
        }
    }
    Ok(None)
}

pub fn value_admissible(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    for t in filt.times() {
        for (name, x) in [("V_p(t) in Q_t", c.vs.v(t)), ("V_p⁺(t) in Q_t", c.vs.v_plus(t))] {
            if let Some(b) = crate::space::first_nonconstant_block(x, filt.pre(t)) {
                let block = &filt.pre(t).blocks()[b];
                let w = Witness { block: Some(c.space().block_ids(block)), ..Witness::new(name) };
                return Ok(Some(w.time(t).sides(&x[block[0]], "constant")));
            }
        }
    }
    let all = c.all()?;
    let v: Vec<RandomVar> = all.iter().map(|t| c.vs.value_at(t)).collect();
    let vp: Vec<RandomVar> = all.iter().map(|t| c.vs.value_plus_at(t)).collect();
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate().skip(i + 1) {
            let on = a.time().agree_event(b.time());
            let base = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), ..Witness::default() };
            check!(c.compare(&v[i], &v[j], Rel::Eq, Some(&on), None, Witness { relation: "V_p(τ) = V_p(τ') on {τ = τ'}".into(), ..base.clone() }));
            check!(c.compare(&vp[i], &vp[j], Rel::Eq, Some(&on), None, Witness { relation: "V_p⁺(τ) = V_p⁺(τ') on {τ = τ'}".into(), ..base }));
        }
    }
    Ok(None)
}

pub fn localized_martingale(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let (_, tilde) = optimal_set(c.vs, s, c.budget)?;
        let inside: Vec<PredictableTime> =
            c.class(s, false)?.iter().filter(|t| t.time().le(tilde.time())).cloned().collect();
        for a in c.events(s.pre_sigma()) {
            let fam = c.phi().scale_by(&a.indicator(), s)?;
            let va: Vec<RandomVar> = inside.iter().map(|t| c.brute(&fam, t, false)).collect::<Result<_>>()?;
            for (i, t1) in inside.iter().enumerate() {
                for (j, t2) in inside.iter().enumerate() {
                    if i == j || !t1.time().le(t2.time()) {
                        continue;
                    }
                    let base = Witness {
                        tau: Some(c.map(t1.time())),
                        theta: Some(c.map(t2.time())),
                        event: Some(c.ids(&a)),
                        ..c.at_s("E[V^A(τ2) | F_{τ1-}] = V^A(τ1) on [S, τ̃(S)]", s)
                    };
                    check!(c.compare(&c.ce(&va[j], t1), &va[i], Rel::Eq, None, Some(t1.pre_sigma()), base));
                }
            }
        }
    }
    Ok(None)
}

pub fn supermartingale(c: &Ctx<'_, '_>) -> Check {
    let r = check_supermartingale_system(c.vs.v_table(), c.inst, false, c.budget)?;
    check!(system_witness(c, "E[V_p(τ') | F_{τ-}] <= V_p(τ)", r));
    let r = check_supermartingale_system(c.vs.v_plus_table(), c.inst, false, c.budget)?;
    check!(system_witness(c, "E[V_p⁺(τ') | F_{τ-}] <= V_p⁺(τ)", r));
    Ok(None)
}

/// Dominating supermartingale systems built from the reward alone: the
/// constant `max φ`, and backward recursions `U(t) = max(φ_t, E[U(t+1) | Q_t]) + r_t`
/// with random `Q_t`-measurable `r_t >= 0`.
fn dominating_systems(c: &Ctx<'_, '_>) -> Vec<Vec<RandomVar>> {
    let n = c.space().len();
    let horizon = c.horizon();
    let filt = c.inst.filtration();
    let digest = crate::instance::digest(c.inst);
    let seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = c.phi().per_time().iter().flat_map(|x| x.iter()).max().cloned().unwrap_or_else(Rational::zero);
    let mut out = vec![vec![RandomVar::constant(n, top); horizon + 1]];
    for _ in 0..3 {
        let mut u = vec![RandomVar::zero(n); horizon + 1];
        for t in (0..=horizon).rev() {
            let mut r = vec![Rational::zero(); n];
            for b in filt.pre(t).blocks() {
                let x = Rational::new(rng.gen_range(0..=3), rng.gen_range(1..=3));
                for &w in b {
                    r[w] = x.clone();
                }
            }
            let base = if t == horizon {
                c.phi().at_time(t).clone()
            } else {
                c.phi().at_time(t).max(&condexp(&u[t + 1], filt.pre(t), c.space()))
            };
            u[t] = base.add(&RandomVar(r));
        }
        out.push(u);
    }
    out
}

pub fn snell_minimality(c: &Ctx<'_, '_>) -> Check {
    for (k, u) in dominating_systems(c).into_iter().enumerate() {
        let r = check_supermartingale_system(&u, c.inst, false, c.budget)?;
        if let Some(w) = system_witness(c, "constructed U is a supermartingale system", r) {
            return Ok(Some(w.detail(format!("system #{k}"))));
        }
        for t in c.inst.filtration().times() {
            let base = Witness::new("V_p(t) <= U(t)").time(t).detail(format!("system #{k}"));
            check!(c.compare(c.vs.v(t), &u[t], Rel::Le, None, Some(c.inst.filtration().pre(t)), base));
        }
    }
    Ok(None)
}

pub fn reward_or_strict(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    for t in filt.times() {
        let rhs = c.phi().at_time(t).max(c.vs.v_plus(t));
        check!(c.compare(c.vs.v(t), &rhs, Rel::Eq, None, Some(filt.pre(t)), Witness::new("V_p(t) = φ_t ∨ V_p⁺(t)").time(t)));
    }
    for s in c.all()?.iter() {
        let rhs = c.phi().eval_at(s).max(&c.vs.value_plus_at(s));
        check!(c.compare(&c.vs.value_at(s), &rhs, Rel::Eq, None, Some(s.pre_sigma()), c.at_s("V_p(S) = φ(S) ∨ V_p⁺(S)", s)));
    }
    Ok(None)
}

pub fn strict_value_bound(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let vp = c.vs.value_plus_at(s);
        for tau in c.class(s, false)?.iter() {
            let on = tau.time().after_event(s.time());
            let lhs = c.ce(&c.vs.value_at(tau), s);
            check!(c.compare(&lhs, &vp, Rel::Le, Some(&on), Some(s.pre_sigma()), c.at_pair("E[V_p(τ) | F_{S-}] <= V_p⁺(S) on {τ > S}", s, tau)));
        }
    }
    Ok(None)
}

/// `E[V_p(S⁺) | F_{S-}]` recomputed from the value table.
fn right_limit(c: &Ctx<'_, '_>, s: &PredictableTime) -> RandomVar {
    c.ce(&compose(c.vs.v_table(), &s.time().successor(c.horizon())), s)
}

pub fn right_limit_bounds(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let r = right_limit(c, s);
        for tau in c.class(s, true)?.iter() {
            let lhs = c.ce(&c.vs.value_at(tau), s);
            check!(c.compare(&lhs, &r, Rel::Le, None, Some(s.pre_sigma()), c.at_pair("E[V_p(τ) | F_{S-}] <= E[V_p(S⁺) | F_{S-}]", s, tau)));
        }
        check!(c.compare(&c.vs.value_plus_at(s), &r, Rel::Le, None, Some(s.pre_sigma()), c.at_s("V_p⁺(S) <= E[V_p(S⁺) | F_{S-}]", s)));
    }
    Ok(None)
}

pub fn right_limit_dominated(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        check!(c.compare(&right_limit(c, s), &c.vs.value_at(s), Rel::Le, None, Some(s.pre_sigma()), c.at_s("E[V_p(S⁺) | F_{S-}] <= V_p(S)", s)));
    }
    Ok(None)
}

pub fn right_limit_bellman(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let r = right_limit(c, s);
        let v = c.vs.value_at(s);
        let phi = c.phi().eval_at(s);
        check!(c.compare(&v, &phi.max(&r), Rel::Eq, None, Some(s.pre_sigma()), c.at_s("V_p(S) = φ(S) ∨ E[V_p(S⁺) | F_{S-}]", s)));
        let off = v.eq_event(&phi).complement();
        let gap = v.sub(&r);
        let zero = RandomVar::zero(gap.len());
        check!(c.compare(&gap, &zero, Rel::Eq, Some(&off), Some(s.pre_sigma()), c.at_s("V_p(S) - E[V_p(S⁺) | F_{S-}] = 0 on {V_p(S) > φ(S)}", s)));
    }
    Ok(None)
}

pub fn strict_strong_supermartingale(c: &Ctx<'_, '_>) -> Check {
    let filt = c.inst.filtration();
    let horizon = c.horizon();
    let u: Vec<RandomVar> = filt
        .times()
        .map(|t| if t < horizon { condexp(c.vs.v(t + 1), filt.pre(t), c.space()) } else { c.vs.v(t).clone() })
        .collect();
    let r = check_supermartingale_system(&u, c.inst, false, c.budget)?;
    check!(system_witness(c, "E[Z(τ') | F_{τ-}] <= Z(τ), Z(t) = E[V_p(t+1) | Q_t]", r));
    Ok(None)
}

// ---- optimality

fn best_expected(c: &Ctx<'_, '_>, s: &PredictableTime) -> Result<Rational> {
    Ok(c.class(s, false)?
        .iter()
        .map(|t| c.space().expectation(&c.phi().eval_at(t)))
        .max()
        .expect("nonempty"))
}

pub fn criterion_equivalence(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let best = best_expected(c, s)?;
        for tau in c.class(s, false)?.iter() {
            let reward = c.phi().eval_at(tau);
            let expected = c.space().expectation(&reward);
            let optimal = expected == best;
            let cond1 = c.vs.value_at(tau) == reward;
            let cond2 = martingale_interval(c.vs, s, tau)?;
            if optimal != (cond1 && cond2) {
                let w = c.at_pair("optimal iff V_p(τ*) = φ(τ*) and martingale on [S, τ*]", s, tau);
                return Ok(Some(w.sides(expected, best).detail(format!("optimal={optimal} cond1={cond1} cond2={cond2}"))));
            }
        }
    }
    Ok(None)
}

pub fn first_contact_optimal(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let hat = tau_hat(c.vs, s)?;
        let reward = c.phi().eval_at(&hat);
        let best = best_expected(c, s)?;
        let expected = c.space().expectation(&reward);
        let base = c.at_pair("τ̂(S) optimal", s, &hat);
        if expected != best {
            return Ok(Some(base.sides(expected, best).detail("E[φ(τ̂)] below the maximum")));
        }
        check!(c.compare(&c.vs.value_at(&hat), &reward, Rel::Eq, None, None, Witness { relation: "V_p(τ̂) = φ(τ̂)".into(), ..base.clone() }));
        if !martingale_interval(c.vs, s, &hat)? {
            return Ok(Some(base.sides("false", "true").detail("V_p not a martingale on [S, τ̂]")));
        }
    }
    Ok(None)
}

pub fn optimal_set_closure(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let (set, tilde) = optimal_set(c.vs, s, c.budget)?;
        let members: HashSet<&StoppingTime> = set.iter().map(|t| t.time()).collect();
        for a in &set {
            for b in &set {
                let hi = lattice(a.time(), b.time()).1;
                if !members.contains(&hi) {
                    let w = Witness { tau: Some(c.map(a.time())), theta: Some(c.map(b.time())), ..c.at_s("A^p_S stable by ∨", s) };
                    return Ok(Some(w.sides(hi, "member")));
                }
            }
        }
        let top = set.iter().map(|t| t.time().clone()).reduce(|a, b| lattice(&a, &b).1).expect("nonempty");
        if &top != tilde.time() || !martingale_interval(c.vs, s, &tilde)? {
            return Ok(Some(c.at_pair("τ̃(S) = max A^p_S with V_p a martingale up to it", s, &tilde).sides(tilde.time(), top)));
        }
        let hat = tau_hat(c.vs, s)?;
        if !members.contains(hat.time()) {
            return Ok(Some(c.at_pair("τ̂(S) in A^p_S", s, &hat).sides(hat.time(), "member")));
        }
    }
    Ok(None)
}

pub fn martingale_interval_forms(c: &Ctx<'_, '_>) -> Check {
    let all = c.all()?;
    let k = all.len();
    let values: Vec<RandomVar> = all.iter().map(|t| c.vs.value_at(t)).collect();
    let le: Vec<Vec<bool>> = all.iter().map(|a| all.iter().map(|b| a.time().le(b.time())).collect()).collect();
    // the pairwise condition for (τ1, τ2) does not depend on the interval
    let ok: Vec<Vec<bool>> = (0..k)
        .map(|i| (0..k).map(|j| !le[i][j] || c.ce(&values[j], &all[i]) == values[i]).collect())
        .collect();
    for (si, s) in all.iter().enumerate() {
        for (ti, tau) in all.iter().enumerate() {
            if !le[si][ti] {
                continue;
            }
            let local = martingale_interval(c.vs, s, tau)?;
            let inside: Vec<usize> = (0..k).filter(|&i| le[si][i] && le[i][ti]).collect();
            let pairwise = inside.iter().all(|&i| inside.iter().all(|&j| ok[i][j]));
            if local != pairwise {
                return Ok(Some(c.at_pair("one-step and pairwise martingale conditions agree", s, tau).sides(local, pairwise)));
            }
        }
    }
    Ok(None)
}

pub fn penalized_cover(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        for alpha in alpha_probes() {
            let tau = tau_alpha(c.vs, s, &alpha)?;
            let base = Witness { alpha: Some(c.var(&RandomVar::constant(c.space().len(), alpha.clone()))), ..c.at_pair("α V_p(τ^α) <= φ(τ^α)", s, &tau) };
            if !s.time().le(tau.time()) || classify(tau.time(), c.inst.filtration()) != TimeClass::Predictable {
                return Ok(Some(base.sides(tau.time(), "predictable and >= S")));
            }
            let lhs = c.vs.value_at(&tau).scale(&alpha);
            check!(c.compare(&lhs, &c.phi().eval_at(&tau), Rel::Le, None, Some(tau.pre_sigma()), base));
        }
    }
    Ok(None)
}

pub fn penalized_essinf(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let cls = c.class(s, false)?;
        for alpha in alpha_probes() {
            let set: Vec<&StoppingTime> = cls
                .iter()
                .filter(|t| c.vs.value_at(t).scale(&alpha).le(&c.phi().eval_at(t)))
                .map(|t| t.time())
                .collect();
            let alpha_map = c.var(&RandomVar::constant(c.space().len(), alpha.clone()));
            let members: HashSet<&StoppingTime> = set.iter().copied().collect();
            for a in &set {
                for b in &set {
                    let lo = lattice(a, b).0;
                    if !members.contains(&lo) {
                        let w = Witness { tau: Some(c.map(a)), theta: Some(c.map(b)), alpha: Some(alpha_map), ..c.at_s("T^α_S stable by ∧", s) };
                        return Ok(Some(w.sides(lo, "member")));
                    }
                }
            }
            let scan = tau_alpha(c.vs, s, &alpha)?;
            let inf = set.iter().map(|t| (*t).clone()).reduce(|a, b| lattice(&a, &b).0);
            if inf.as_ref() != Some(scan.time()) {
                let w = Witness { alpha: Some(alpha_map), ..c.at_pair("τ^α(S) = essinf T^α_S", s, &scan) };
                let rhs = inf.map_or_else(|| "empty".to_string(), |t| t.to_string());
                return Ok(Some(w.sides(scan.time(), rhs)));
            }
        }
    }
    Ok(None)
}

pub fn penalized_monotone(c: &Ctx<'_, '_>) -> Check {
    let n = c.space().len();
    for s in c.all()?.iter() {
        let hat = tau_hat(c.vs, s)?;
        let probes = alpha_probes();
        let taus: Vec<PredictableTime> = probes.iter().map(|a| tau_alpha(c.vs, s, a)).collect::<Result<_>>()?;
        for (i, tau) in taus.iter().enumerate() {
            let base = Witness { alpha: Some(c.var(&RandomVar::constant(n, probes[i].clone()))), ..c.at_pair("τ^α(S) <= τ^{α'}(S) <= τ̂(S)", s, tau) };
            if !tau.time().le(hat.time()) {
                return Ok(Some(base.sides(tau.time(), hat.time())));
            }
            if let Some(next) = taus.get(i + 1) {
                if !tau.time().le(next.time()) {
                    return Ok(Some(base.sides(tau.time(), next.time())));
                }
            }
        }
        let threshold = stationarity_threshold(c.vs, s)?;
        let (limit, _) = tau_alpha_limit(c.vs, s)?;
        if limit.time() != hat.time() {
            return Ok(Some(c.at_pair("lim_{α↑1} τ^α(S) = τ̂(S)", s, &limit).sides(limit.time(), hat.time())));
        }
        let one = Rational::one();
        let mid = (&threshold + &one) / Rational::from_integer(2);
        let near = (&threshold + &(&one * &Rational::from_integer(7))) / Rational::from_integer(8);
        for alpha in [mid, near] {
            let tau = tau_alpha(c.vs, s, &alpha)?;
            if tau.time() != hat.time() {
                let w = Witness { alpha: Some(c.var(&RandomVar::constant(n, alpha))), ..c.at_pair("τ^α(S) = τ̂(S) past the threshold", s, &tau) };
                return Ok(Some(w.sides(tau.time(), hat.time())));
            }
        }
        if threshold.is_positive() {
            let tau = tau_alpha(c.vs, s, &threshold)?;
            if tau.time() == hat.time() {
                let w = Witness { alpha: Some(c.var(&RandomVar::constant(n, threshold))), ..c.at_pair("τ^{α*}(S) < τ̂(S) somewhere", s, &tau) };
                return Ok(Some(w.sides(tau.time(), hat.time())));
            }
        }
    }
    Ok(None)
}

// ---- decomposition

pub fn mertens_decomposition(c: &Ctx<'_, '_>) -> Check {
    let d = decompose(c.vs)?;
    if let Err(e) = d.check(c.vs) {
        return Ok(Some(Witness::new("decomposition invariants").detail(e)));
    }
    if decompose(c.vs)? != d {
        return Ok(Some(Witness::new("decompose is deterministic")));
    }
    for tau in c.all()?.iter() {
        let rebuilt = d.m_at_time(tau).sub(&d.c_before_time(tau));
        check!(c.compare(&c.vs.value_at(tau), &rebuilt, Rel::Eq, None, None, c.at_pair("V_p(τ) = M_τ - A_τ - C_{τ-1}", tau, tau)));
    }
    Ok(None)
}

pub fn flat_off_contact(c: &Ctx<'_, '_>) -> Check {
    let d = decompose(c.vs)?;
    let r = flat_off_contact_check(&d, c.space().ids());
    if let Some(v) = r.violation {
        let w = Witness { outcome: Some(v.outcome), ..Witness::new("ΔC_t = 0 on {V_p(t) > φ_t}") };
        return Ok(Some(w.time(v.t).sides(v.increment, "0")));
    }
    for s in c.all()?.iter() {
        let dc = compose(&(0..=c.horizon()).map(|t| d.delta_c(t)).collect::<Vec<_>>(), s.time());
        let off = c.vs.value_at(s).eq_event(&c.phi().eval_at(s)).complement();
        let zero = RandomVar::zero(dc.len());
        check!(c.compare(&dc, &zero, Rel::Eq, Some(&off), Some(s.pre_sigma()), c.at_s("ΔC_S = 0 on {V_p(S) > φ(S)}", s)));
    }
    Ok(None)
}

pub fn flat_before_penalized(c: &Ctx<'_, '_>) -> Check {
    let d = decompose(c.vs)?;
    let ids = c.space().ids();
    let n = c.space().len();
    for s in c.all()?.iter() {
        let mut targets: Vec<(Option<Rational>, PredictableTime)> =
            alpha_probes().into_iter().map(|a| tau_alpha(c.vs, s, &a).map(|t| (Some(a), t))).collect::<Result<_>>()?;
        targets.push((None, tau_hat(c.vs, s)?));
        for (alpha, tau) in targets {
            let base = Witness { alpha: alpha.map(|a| c.var(&RandomVar::constant(n, a))), ..c.at_pair("C_{τ-1} = C_{S-1}", s, &tau) };
            let r = flat_before(&d, &tau, s, ids)?;
            if let Some(v) = r.violation {
                return Ok(Some(Witness { outcome: Some(v.outcome), ..base }.time(v.t).sides(v.increment, "0")));
            }
            let inner = d.m_at_time(&tau).sub(&d.c_before_time(&tau));
            let rhs = c.ce(&inner, s);
            check!(c.compare(&c.vs.value_at(s), &rhs, Rel::Eq, None, Some(s.pre_sigma()), Witness { relation: "V_p(S) = E[M_τ - A_τ - C_{τ-1} | F_{S-}]".into(), ..base }));
        }
    }
    Ok(None)
}

pub fn first_contact_representation(c: &Ctx<'_, '_>) -> Check {
    for s in c.all()?.iter() {
        let rep = representation_check(c.vs, s, c.budget)?;
        if !rep.holds || !rep.h_minus_mass.is_zero() || !rep.h_plus_mass.is_zero() {
            let hat = tau_hat(c.vs, s)?;
            let w = c.at_pair("V_p(S) = E[φ(τ̂(S)) | F_{S-}]", s, &hat).sides(rep.expected_reward, rep.best_expected_reward);
            return Ok(Some(w.detail(format!(
                "conditional_match={} expectation_match={} h_minus={} h_plus={}",
                rep.conditional_match, rep.expectation_match, rep.h_minus_mass, rep.h_plus_mass
            ))));
        }
        let hat = tau_hat(c.vs, s)?;
        let lhs = c.ce(&c.phi().eval_at(&hat), s);
        check!(c.compare(&c.vs.value_at(s), &lhs, Rel::Eq, None, Some(s.pre_sigma()), c.at_pair("V_p(S) = E[φ(τ̂(S)) | F_{S-}]", s, &hat)));
    }
    Ok(None)
}
