//! Stopping times on the grid `0..=N`, the predictable class, the
//! pre-sigma-algebra `F_{τ-}`, and enumeration of predictable times.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{generated_partition, Event, Outcome, Partition, SampleSpace, TwoSlotFiltration};

/// Default cap on the number of stopping times any enumeration may produce.
pub const DEFAULT_BUDGET: usize = 20_000;

/// Outcome-indexed time map.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StoppingTime(pub Vec<usize>);

impl StoppingTime {
    pub fn constant(n: usize, t: usize) -> Self {
        StoppingTime(vec![t; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, w: Outcome) -> usize {
        self.0[w]
    }

    pub fn times(&self) -> &[usize] {
        &self.0
    }

    /// `{τ = t}`
    pub fn eq_event(&self, t: usize) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] == t)
    }

    /// `{τ > t}`
    pub fn gt_event(&self, t: usize) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] > t)
    }

    /// `{τ >= t}`
    pub fn ge_event(&self, t: usize) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] >= t)
    }

    /// `{τ <= t}`
    pub fn le_event(&self, t: usize) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] <= t)
    }

    /// `{self = other}`
    pub fn agree_event(&self, other: &StoppingTime) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] == other.0[w])
    }

    /// `{self > other}`
    pub fn after_event(&self, other: &StoppingTime) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] > other.0[w])
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &StoppingTime) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `self` is in the strict class after `s`: `self > s` on `{s < N}` and
    /// `self = N` on `{s = N}`.
    pub fn strictly_after(&self, s: &StoppingTime, horizon: usize) -> bool {
        self.0
            .iter()
            .zip(&s.0)
            .all(|(&t, &st)| if st < horizon { t > st } else { t == horizon })
    }

    /// `(self + 1) ∧ N`
    pub fn successor(&self, horizon: usize) -> StoppingTime {
        StoppingTime(self.0.iter().map(|&t| (t + 1).min(horizon)).collect())
    }

    pub fn to_map(&self, space: &SampleSpace) -> indexmap::IndexMap<String, usize> {
        space.outcomes().map(|w| (space.id(w).to_string(), self.0[w])).collect()
    }
}

impl fmt::Display for StoppingTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(&first) = self.0.first() {
            if self.0.iter().all(|&t| t == first) {
                return write!(f, "≡{first}");
            }
        }
        write!(f, "(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// Strongest class a time map belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeClass {
    NotStopping,
    Stopping,
    Predictable,
}

/// Plain stopping: `{τ <= t}` is `P_t`-measurable. Predictable:
/// `{τ = t}` is `Q_t`-measurable for every `t`.
pub fn classify(tau: &StoppingTime, filt: &TwoSlotFiltration) -> TimeClass {
    let n = filt.horizon();
    if tau.0.iter().any(|&t| t > n) || tau.len() != filt.post(0).len() {
        return TimeClass::NotStopping;
    }
    if filt.times().all(|t| tau.eq_event(t).is_measurable(filt.pre(t))) {
        return TimeClass::Predictable;
    }
    if filt.times().all(|t| tau.le_event(t).is_measurable(filt.post(t))) {
        TimeClass::Stopping
    } else {
        TimeClass::NotStopping
    }
}

/// Atoms of `F_{τ-}`: generated by `A ∩ {τ > t}` for `A` in `P_t`, `t < N`,
/// and `A ∩ {τ >= t}` for `A` in `Q_t`, `t <= N`.
///
/// For a constant time `t` this is exactly `Q_t`.
pub fn pre_sigma(tau: &StoppingTime, filt: &TwoSlotFiltration) -> Result<Partition> {
    if classify(tau, filt) != TimeClass::Predictable {
        return Err(Error::NotPredictable(tau.to_string()));
    }
    Ok(pre_sigma_unchecked(tau, filt))
}

fn pre_sigma_unchecked(tau: &StoppingTime, filt: &TwoSlotFiltration) -> Partition {
    let n = tau.len();
    let mut sets = Vec::new();
    for t in filt.times() {
        if t < filt.horizon() {
            let later = tau.gt_event(t);
            for b in 0..filt.post(t).num_blocks() {
                sets.push(filt.post(t).block_event(b).intersect(&later));
            }
        }
        let from = tau.ge_event(t);
        for b in 0..filt.pre(t).num_blocks() {
            sets.push(filt.pre(t).block_event(b).intersect(&from));
        }
    }
    generated_partition(n, &sets)
}

/// A stopping time certified predictable for a filtration, with its
/// pre-sigma-algebra precomputed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictableTime {
    time: StoppingTime,
    pre: Partition,
}

impl PredictableTime {
    pub fn new(time: StoppingTime, filt: &TwoSlotFiltration) -> Result<Self> {
        let pre = pre_sigma(&time, filt)?;
        Ok(PredictableTime { time, pre })
    }

    pub fn constant(filt: &TwoSlotFiltration, t: usize) -> Self {
        let n = filt.post(0).len();
        PredictableTime { time: StoppingTime::constant(n, t), pre: filt.pre(t).clone() }
    }

    pub fn time(&self) -> &StoppingTime {
        &self.time
    }

    pub fn at(&self, w: Outcome) -> usize {
        self.time.0[w]
    }

    /// The atoms of `F_{τ-}`.
    pub fn pre_sigma(&self) -> &Partition {
        &self.pre
    }

    pub fn into_time(self) -> StoppingTime {
        self.time
    }
}

impl fmt::Display for PredictableTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.time.fmt(f)
    }
}

/// All predictable `τ >= S` (or, with `strict`, the class `T_{S+}`: `τ > S`
/// on `{S < N}` and `τ = N` on `{S = N}`), sorted lexicographically in
/// outcome order.
///
/// `{τ = t}` is chosen recursively as a union of `Q_t` blocks inside the
/// not-yet-stopped region, which produces each predictable time exactly once.
pub fn enumerate_predictable(
    filt: &TwoSlotFiltration,
    s: &StoppingTime,
    strict: bool,
    budget: usize,
) -> Result<Vec<PredictableTime>> {
    if classify(s, filt) != TimeClass::Predictable {
        return Err(Error::NotPredictable(s.to_string()));
    }
    let horizon = filt.horizon();
    let allowed = |w: Outcome, t: usize| {
        if t == horizon {
            true
        } else if strict {
            s.at(w) < t
        } else {
            s.at(w) <= t
        }
    };
    let mut out = Vec::new();
    let mut current = vec![usize::MAX; s.len()];
    enumerate_from(filt, 0, &allowed, &mut current, &mut out, budget)?;
    out.sort();
    Ok(out
        .into_iter()
        .map(|times| {
            let time = StoppingTime(times);
            let pre = pre_sigma_unchecked(&time, filt);
            PredictableTime { time, pre }
        })
        .collect())
}

fn enumerate_from(
    filt: &TwoSlotFiltration,
    t: usize,
    allowed: &dyn Fn(Outcome, usize) -> bool,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    budget: usize,
) -> Result<()> {
    let horizon = filt.horizon();
    if t == horizon {
        let done: Vec<usize> = current.iter().map(|&x| if x == usize::MAX { horizon } else { x }).collect();
        if out.len() >= budget {
            return Err(Error::BudgetExceeded { limit: budget });
        }
        out.push(done);
        return Ok(());
    }
    let candidates: Vec<&Vec<Outcome>> = filt
        .pre(t)
        .blocks()
        .iter()
        .filter(|b| b.iter().all(|&w| current[w] == usize::MAX && allowed(w, t)))
        .collect();
    if candidates.len() >= usize::BITS as usize {
        return Err(Error::BudgetExceeded { limit: budget });
    }
    for mask in 0u64..(1u64 << candidates.len()) {
        for (i, b) in candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for &w in b.iter() {
                    current[w] = t;
                }
            }
        }
        let res = enumerate_from(filt, t + 1, allowed, current, out, budget);
        for (i, b) in candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for &w in b.iter() {
                    current[w] = usize::MAX;
                }
            }
        }
        res?;
    }
    Ok(())
}

/// All plain stopping times (`{τ <= t}` in `P_t`), for the classical
/// comparison value.
pub fn enumerate_stopping(filt: &TwoSlotFiltration, budget: usize) -> Result<Vec<StoppingTime>> {
    let n = filt.post(0).len();
    let horizon = filt.horizon();
    let mut out = Vec::new();
    let mut current = vec![usize::MAX; n];
    fn go(
        filt: &TwoSlotFiltration,
        t: usize,
        horizon: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<StoppingTime>,
        budget: usize,
    ) -> Result<()> {
        if t == horizon {
            if out.len() >= budget {
                return Err(Error::BudgetExceeded { limit: budget });
            }
            out.push(StoppingTime(current.iter().map(|&x| x.min(horizon)).collect()));
            return Ok(());
        }
        let candidates: Vec<Vec<Outcome>> = filt
            .post(t)
            .blocks()
            .iter()
            .filter(|b| b.iter().all(|&w| current[w] == usize::MAX))
            .cloned()
            .collect();
        if candidates.len() >= 64 {
            return Err(Error::BudgetExceeded { limit: budget });
        }
        for mask in 0u64..(1u64 << candidates.len()) {
            for (i, b) in candidates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    b.iter().for_each(|&w| current[w] = t);
                }
            }
            let res = go(filt, t + 1, horizon, current, out, budget);
            for (i, b) in candidates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    b.iter().for_each(|&w| current[w] = usize::MAX);
                }
            }
            res?;
        }
        Ok(())
    }
    go(filt, 0, horizon, &mut current, &mut out, budget)?;
    out.sort();
    Ok(out)
}

/// `τ1` on `A`, `τ2` off `A`.
pub fn glue(tau1: &StoppingTime, tau2: &StoppingTime, a: &Event) -> StoppingTime {
    StoppingTime(
        (0..tau1.len())
            .map(|w| if a.contains(w) { tau1.at(w) } else { tau2.at(w) })
            .collect(),
    )
}

/// Pointwise `(min, max)`.
pub fn lattice(tau1: &StoppingTime, tau2: &StoppingTime) -> (StoppingTime, StoppingTime) {
    let (lo, hi) = tau1.0.iter().zip(&tau2.0).map(|(&a, &b)| (a.min(b), a.max(b))).unzip();
    (StoppingTime(lo), StoppingTime(hi))
}
