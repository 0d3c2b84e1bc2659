use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::Result;
use crate::model::Instance;
use crate::rational::Rational;
use crate::reward::RewardFamily;
use crate::snell::{conditional_sup, ValueSystem};
use crate::space::{condexp, Event, Outcome, Partition, RandomVar, SampleSpace};
use crate::stopping::{PredictableTime, StoppingTime};

/// Everything needed to replay a failed check.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub relation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<IndexMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<IndexMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<IndexMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<IndexMap<String, Rational>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<String>>,
    pub lhs: String,
    pub rhs: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Witness {
    pub fn new(relation: impl Into<String>) -> Self {
        Witness { relation: relation.into(), ..Witness::default() }
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn time(mut self, t: usize) -> Self {
        self.time = Some(t);
        self
    }

    pub fn sides(mut self, lhs: impl ToString, rhs: impl ToString) -> Self {
        self.lhs = lhs.to_string();
        self.rhs = rhs.to_string();
        self
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rel {
    Eq,
    Le,
}

type Class = Rc<Vec<PredictableTime>>;

/// Shared state of one suite run: the value system under test and cached
/// enumerations.
pub struct Ctx<'v, 'a> {
    pub vs: &'v ValueSystem<'a>,
    pub inst: &'a Instance,
    pub budget: usize,
    classes: RefCell<HashMap<(StoppingTime, bool), Class>>,
}

impl<'v, 'a> Ctx<'v, 'a> {
    pub fn new(vs: &'v ValueSystem<'a>, budget: usize) -> Self {
        Ctx { vs, inst: vs.instance(), budget, classes: RefCell::new(HashMap::new()) }
    }

    pub fn space(&self) -> &'a SampleSpace {
        self.inst.space()
    }

    pub fn horizon(&self) -> usize {
        self.inst.horizon()
    }

    pub fn phi(&self) -> &'a RewardFamily {
        self.inst.reward()
    }

    /// `T_S^p` (`T_{S+}^p` with `strict`), cached.
    pub fn class(&self, s: &PredictableTime, strict: bool) -> Result<Rc<Vec<PredictableTime>>> {
        let key = (s.time().clone(), strict);
        if let Some(c) = self.classes.borrow().get(&key) {
            return Ok(c.clone());
        }
        let c = Rc::new(self.inst.predictable_after(s, strict, self.budget)?);
        self.classes.borrow_mut().insert(key, c.clone());
        Ok(c)
    }

    /// `T_0^p`
    pub fn all(&self) -> Result<Rc<Vec<PredictableTime>>> {
        self.class(&self.inst.constant_time(0), false)
    }

    /// `E[x | F_{τ-}]`
    pub fn ce(&self, x: &RandomVar, tau: &PredictableTime) -> RandomVar {
        condexp(x, tau.pre_sigma(), self.space())
    }

    pub fn map(&self, tau: &StoppingTime) -> IndexMap<String, usize> {
        tau.to_map(self.space())
    }

    pub fn var(&self, x: &RandomVar) -> IndexMap<String, Rational> {
        crate::instance::var_map(self.space(), x)
    }

    pub fn ids(&self, event: &Event) -> Vec<String> {
        event.members().map(|w| self.space().id(w).to_string()).collect()
    }

    /// Witness pre-filled with `S` (and optionally `τ`).
    pub fn at_s(&self, relation: &str, s: &PredictableTime) -> Witness {
        Witness { s: Some(self.map(s.time())), ..Witness::new(relation) }
    }

    pub fn at_pair(&self, relation: &str, s: &PredictableTime, tau: &PredictableTime) -> Witness {
        Witness { tau: Some(self.map(tau.time())), ..self.at_s(relation, s) }
    }

    /// Compares `lhs` and `rhs` pointwise on `on` (everywhere if `None`).
    /// On violation, fills outcome, block of `part` and both sides.
    pub(crate) fn compare(
        &self,
        lhs: &RandomVar,
        rhs: &RandomVar,
        rel: Rel,
        on: Option<&Event>,
        part: Option<&Partition>,
        base: Witness,
    ) -> Option<Witness> {
        let bad = (0..lhs.len()).find(|&w| {
            on.is_none_or(|e| e.contains(w))
                && match rel {
                    Rel::Eq => lhs[w] != rhs[w],
                    Rel::Le => lhs[w] > rhs[w],
                }
        })?;
        Some(self.fill(base, bad, part, &lhs[bad], &rhs[bad]))
    }

    pub fn fill(&self, mut base: Witness, w: Outcome, part: Option<&Partition>, lhs: &Rational, rhs: &Rational) -> Witness {
        base.outcome = Some(self.space().id(w).to_string());
        base.block = part.map(|p| self.space().block_ids(&p.blocks()[p.block_of(w)]));
        base.lhs = lhs.to_string();
        base.rhs = rhs.to_string();
        base
    }

    /// Constant probes plus, when `F_{S-}` has several atoms, the indicator
    /// mixtures `1/4 1_B + 3/4 1_{B^c}` and `1_B` for each atom `B`.
    pub fn alphas(&self, s: &PredictableTime) -> Vec<RandomVar> {
        let n = self.space().len();
        let mut out: Vec<RandomVar> =
            crate::optimal::alpha_probes().into_iter().map(|a| RandomVar::constant(n, a)).collect();
        let g = s.pre_sigma();
        if g.num_blocks() >= 2 {
            let (lo, hi) = (Rational::new(1, 4), Rational::new(3, 4));
            for b in 0..g.num_blocks() {
                let ind = g.block_event(b);
                out.push(RandomVar((0..n).map(|w| if ind.contains(w) { lo.clone() } else { hi.clone() }).collect()));
                out.push(ind.indicator());
            }
        }
        out
    }

    /// Events of the sigma-algebra of `part`: all of them for at most four
    /// atoms, otherwise the atoms, their complements, `∅` and `Ω`.
    pub fn events(&self, part: &Partition) -> Vec<Event> {
        let n = self.space().len();
        let k = part.num_blocks();
        if k <= 4 {
            (0u32..1 << k)
                .map(|mask| {
                    Event::from_fn(n, |w| mask & (1 << part.block_of(w)) != 0)
                })
                .collect()
        } else {
            let mut out = vec![Event::empty(n), Event::full(n)];
            for b in 0..k {
                let e = part.block_event(b);
                out.push(e.complement());
                out.push(e);
            }
            out
        }
    }

    /// Brute-force value of an arbitrary family at `τ`:
    /// `esssup_{θ in T_τ^p (T_{τ+}^p)} E[fam(θ) | F_{τ-}]`.
    pub fn brute(&self, fam: &RewardFamily, tau: &PredictableTime, strict: bool) -> Result<RandomVar> {
        let cls = self.class(tau, strict)?;
        Ok(conditional_sup(self.space(), tau.pre_sigma(), cls.iter().map(|th| fam.eval_at(th)))
            .expect("classes are nonempty"))
    }
}

pub fn fmt_partition(p: &Partition, space: &SampleSpace) -> String {
    p.blocks()
        .iter()
        .map(|b| format!("{{{}}}", space.block_ids(b).join(",")))
        .collect::<Vec<_>>()
        .join("|")
}
