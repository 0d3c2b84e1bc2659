//! Finite probability spaces, partition-represented sigma-algebras and the
//! two-slot filtration.
//!
//! Every finite sigma-algebra is generated by a unique partition of the
//! outcome set into atoms, so a sigma-algebra is stored only as its
//! [`Partition`]. Measurability is then a constancy check on blocks and
//! conditional expectation is a block-wise weighted average.
//!
//! A [`TwoSlotFiltration`] carries, for each grid time `t`, a pre-partition
//! `Q_t` (information strictly before `t`) and a post-partition `P_t`
//! (information at `t`), forming the chain `Q_t ⊑ P_t ⊑ Q_{t+1}`. Whenever
//! `Q_t` is strictly coarser than `P_t` the filtration jumps at `t` in a way
//! no predictable time can anticipate, i.e. it fails quasi-left-continuity.

use std::collections::HashSet;
use std::ops::Index;

use serde::Serialize;

use crate::error::{Slot, ValidationReport, Violation};
use crate::rational::Rational;

/// Index of an outcome in its [`SampleSpace`].
pub type Outcome = usize;

/// Finite outcome set with strictly positive probabilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSpace {
    ids: Vec<String>,
    prob: Vec<Rational>,
}

impl SampleSpace {
    /// Stores the outcomes as given; invariants are checked by
    /// [`validate_space`].
    pub fn new(ids: Vec<String>, prob: Vec<Rational>) -> Self {
        assert_eq!(ids.len(), prob.len(), "one probability per outcome");
        SampleSpace { ids, prob }
    }

    /// Uniform space over the given ids.
    pub fn uniform<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        let p = Rational::new(1, ids.len() as i64);
        let prob = vec![p; ids.len()];
        SampleSpace { ids, prob }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, w: Outcome) -> &str {
        &self.ids[w]
    }

    pub fn index_of(&self, id: &str) -> Option<Outcome> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn prob(&self, w: Outcome) -> &Rational {
        &self.prob[w]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.prob
    }

    pub fn outcomes(&self) -> std::ops::Range<Outcome> {
        0..self.ids.len()
    }

    pub fn mass(&self, event: &Event) -> Rational {
        event.members().map(|w| &self.prob[w]).sum()
    }

    pub fn expectation(&self, x: &RandomVar) -> Rational {
        self.outcomes().map(|w| &self.prob[w] * &x[w]).sum()
    }

    pub fn block_ids(&self, block: &[Outcome]) -> Vec<String> {
        block.iter().map(|&w| self.ids[w].clone()).collect()
    }
}

/// A set of outcomes, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event(Vec<bool>);

impl Event {
    pub fn empty(n: usize) -> Self {
        Event(vec![false; n])
    }

    pub fn full(n: usize) -> Self {
        Event(vec![true; n])
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = Outcome>) -> Self {
        let mut mask = vec![false; n];
        for w in members {
            mask[w] = true;
        }
        Event(mask)
    }

    pub fn from_fn(n: usize, f: impl FnMut(Outcome) -> bool) -> Self {
        Event((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn contains(&self, w: Outcome) -> bool {
        self.0[w]
    }

    pub fn members(&self) -> impl Iterator<Item = Outcome> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(w, _)| w)
    }

    pub fn complement(&self) -> Event {
        Event(self.0.iter().map(|b| !b).collect())
    }

    pub fn intersect(&self, other: &Event) -> Event {
        Event(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn union(&self, other: &Event) -> Event {
        Event(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }

    pub fn indicator(&self) -> RandomVar {
        RandomVar(
            self.0
                .iter()
                .map(|&b| if b { Rational::one() } else { Rational::zero() })
                .collect(),
        )
    }

    /// True iff the event is a union of blocks of `p`.
    pub fn is_measurable(&self, p: &Partition) -> bool {
        p.blocks().iter().all(|b| b.iter().all(|&w| self.0[w] == self.0[b[0]]))
    }
}

/// A partition of the outcome set into nonempty disjoint blocks.
///
/// Blocks are sorted internally and ordered by their smallest outcome, so two
/// partitions are equal iff they have the same blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<Outcome>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn trivial(n: usize) -> Self {
        Partition::from_labels(&vec![0; n])
    }

    pub fn discrete(n: usize) -> Self {
        Partition::from_labels(&(0..n).collect::<Vec<_>>())
    }

    /// Builds a partition from per-outcome labels: outcomes sharing a label
    /// share a block.
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(labels: &[L]) -> Self {
        let mut seen: Vec<(L, usize)> = Vec::new();
        let mut blocks: Vec<Vec<Outcome>> = Vec::new();
        let mut block_of = vec![0; labels.len()];
        for (w, l) in labels.iter().enumerate() {
            let b = match seen.iter().find(|(k, _)| k == l) {
                Some((_, b)) => *b,
                None => {
                    seen.push((l.clone(), blocks.len()));
                    blocks.push(Vec::new());
                    blocks.len() - 1
                }
            };
            blocks[b].push(w);
            block_of[w] = b;
        }
        Partition { blocks, block_of }
    }

    /// Validates an explicit block list over `n` outcomes.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<Outcome>>) -> Result<Self, String> {
        let mut label = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(format!("block {b} is empty"));
            }
            for &w in block {
                if w >= n {
                    return Err(format!("block {b} names an unknown outcome"));
                }
                if label[w] != usize::MAX {
                    return Err(format!("outcome {w} appears in more than one block"));
                }
                label[w] = b;
            }
        }
        if let Some(w) = label.iter().position(|&l| l == usize::MAX) {
            return Err(format!("outcome {w} is not covered"));
        }
        Ok(Partition::from_labels(&label))
    }

    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<Outcome>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, w: Outcome) -> usize {
        self.block_of[w]
    }

    pub fn block_event(&self, b: usize) -> Event {
        Event::from_members(self.len(), self.blocks[b].iter().copied())
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() <= 1
    }

    /// `self ⊑ finer`: every block of `finer` lies inside a block of `self`.
    pub fn is_coarser_than(&self, finer: &Partition) -> bool {
        finer
            .blocks
            .iter()
            .all(|b| b.iter().all(|&w| self.block_of[w] == self.block_of[b[0]]))
    }

    /// Common refinement (the sigma-algebra generated by both).
    pub fn join(&self, other: &Partition) -> Partition {
        let labels: Vec<(usize, usize)> =
            (0..self.len()).map(|w| (self.block_of[w], other.block_of[w])).collect();
        Partition::from_labels(&labels)
    }

    /// Finest common coarsening (the intersection of the sigma-algebras).
    pub fn meet(&self, other: &Partition) -> Partition {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        for p in [self, other] {
            for b in &p.blocks {
                for &w in &b[1..] {
                    let (a, c) = (find(&mut parent, b[0]), find(&mut parent, w));
                    parent[c] = a;
                }
            }
        }
        let labels: Vec<usize> = (0..n).map(|w| find(&mut parent, w)).collect();
        Partition::from_labels(&labels)
    }

    /// Restriction of the partition to an event, as blocks of that event.
    pub fn blocks_within<'a>(&'a self, event: &'a Event) -> impl Iterator<Item = &'a Vec<Outcome>> + 'a {
        self.blocks.iter().filter(move |b| event.contains(b[0]))
    }
}

/// Coarsest partition in which every input set is a union of blocks: the
/// atoms of the sigma-algebra generated by `sets`.
pub fn generated_partition(n: usize, sets: &[Event]) -> Partition {
    let labels: Vec<Vec<bool>> = (0..n).map(|w| sets.iter().map(|s| s.contains(w)).collect()).collect();
    Partition::from_labels(&labels)
}

/// A nonnegative (in the model) rational random variable, one value per
/// outcome.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RandomVar(pub Vec<Rational>);

impl RandomVar {
    pub fn constant(n: usize, c: Rational) -> Self {
        RandomVar(vec![c; n])
    }

    pub fn zero(n: usize) -> Self {
        RandomVar::constant(n, Rational::zero())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.0.iter()
    }

    pub fn map(&self, f: impl FnMut(&Rational) -> Rational) -> RandomVar {
        RandomVar(self.0.iter().map(f).collect())
    }

    pub fn zip_with(&self, other: &RandomVar, mut f: impl FnMut(&Rational, &Rational) -> Rational) -> RandomVar {
        RandomVar(self.0.iter().zip(&other.0).map(|(a, b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &RandomVar) -> RandomVar {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RandomVar) -> RandomVar {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &RandomVar) -> RandomVar {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: &Rational) -> RandomVar {
        self.map(|a| a * c)
    }

    pub fn max(&self, other: &RandomVar) -> RandomVar {
        self.zip_with(other, |a, b| a.max(b).clone())
    }

    pub fn min(&self, other: &RandomVar) -> RandomVar {
        self.zip_with(other, |a, b| a.min(b).clone())
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &RandomVar) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// First outcome where `self <= other` fails.
    pub fn first_gt(&self, other: &RandomVar) -> Option<Outcome> {
        self.0.iter().zip(&other.0).position(|(a, b)| a > b)
    }

    /// First outcome where the two variables differ.
    pub fn first_diff(&self, other: &RandomVar) -> Option<Outcome> {
        self.0.iter().zip(&other.0).position(|(a, b)| a != b)
    }

    /// Restriction to an event: `1_A · self`.
    pub fn restrict(&self, event: &Event) -> RandomVar {
        RandomVar(
            self.0
                .iter()
                .enumerate()
                .map(|(w, a)| if event.contains(w) { a.clone() } else { Rational::zero() })
                .collect(),
        )
    }

    /// `{ self == other }`.
    pub fn eq_event(&self, other: &RandomVar) -> Event {
        Event::from_fn(self.len(), |w| self.0[w] == other.0[w])
    }
}

impl Index<Outcome> for RandomVar {
    type Output = Rational;
    fn index(&self, w: Outcome) -> &Rational {
        &self.0[w]
    }
}

/// Conditional expectation of `x` given the sigma-algebra generated by `b`:
/// on each block the probability-weighted mean of `x`.
pub fn condexp(x: &RandomVar, b: &Partition, space: &SampleSpace) -> RandomVar {
    let mut out = vec![Rational::zero(); x.len()];
    for block in b.blocks() {
        let (num, den) = block.iter().fold((Rational::zero(), Rational::zero()), |(n, d), &w| {
            (n + space.prob(w) * &x[w], d + space.prob(w))
        });
        let mean = &num / &den;
        for &w in block {
            out[w] = mean.clone();
        }
    }
    RandomVar(out)
}

/// True iff `x` is constant on every block of `b`.
pub fn is_measurable(x: &RandomVar, b: &Partition) -> bool {
    first_nonconstant_block(x, b).is_none()
}

pub(crate) fn first_nonconstant_block(x: &RandomVar, b: &Partition) -> Option<usize> {
    b.blocks().iter().position(|block| block.iter().any(|&w| x[w] != x[block[0]]))
}

/// Per-time pre-partitions `Q_t` and post-partitions `P_t`, `t = 0..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSlotFiltration {
    pre: Vec<Partition>,
    post: Vec<Partition>,
}

impl TwoSlotFiltration {
    /// Stores the slots as given; the chain is checked by [`validate_space`].
    pub fn new(pre: Vec<Partition>, post: Vec<Partition>) -> Self {
        TwoSlotFiltration { pre, post }
    }

    /// Same partition in both slots at every time (quasi-left-continuous).
    pub fn from_post(post: Vec<Partition>) -> Self {
        let mut pre = post.clone();
        if let Some(first) = pre.first_mut() {
            *first = Partition::trivial(first.len());
        }
        TwoSlotFiltration { pre, post }
    }

    /// The horizon `N`; grid times are `0..=N`.
    pub fn horizon(&self) -> usize {
        self.post.len().saturating_sub(1)
    }

    pub fn times(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.horizon()
    }

    pub fn pre(&self, t: usize) -> &Partition {
        &self.pre[t]
    }

    pub fn post(&self, t: usize) -> &Partition {
        &self.post[t]
    }

    pub fn pre_slots(&self) -> &[Partition] {
        &self.pre
    }

    pub fn post_slots(&self) -> &[Partition] {
        &self.post
    }

    /// Quasi-left-continuity fails at `t` iff `Q_t` is strictly coarser
    /// than `P_t`.
    pub fn qlc_fails_at(&self, t: usize) -> bool {
        self.pre[t] != self.post[t]
    }
}

/// Checks every invariant of the space and filtration, collecting all
/// violations.
pub fn validate_space(space: &SampleSpace, filt: &TwoSlotFiltration) -> ValidationReport {
    let mut v = Vec::new();
    if space.is_empty() {
        v.push(Violation::EmptySpace);
    }
    let mut seen = HashSet::new();
    for id in space.ids() {
        if !seen.insert(id.as_str()) {
            v.push(Violation::DuplicateOutcome { outcome: id.clone() });
        }
    }
    for w in space.outcomes() {
        if !space.prob(w).is_positive() {
            v.push(Violation::NonPositiveProbability {
                outcome: space.id(w).to_string(),
                prob: space.prob(w).clone(),
            });
        }
    }
    let total: Rational = space.probs().iter().sum();
    if total != Rational::one() {
        v.push(Violation::ProbabilitySum { total });
    }
    if filt.pre.is_empty() || filt.pre.len() != filt.post.len() {
        v.push(Violation::FiltrationLength {
            expected: filt.post.len().max(1),
            pre: filt.pre.len(),
            post: filt.post.len(),
        });
        return ValidationReport { violations: v };
    }
    let n = space.len();
    let mut sized = true;
    for t in filt.times() {
        for (slot, p) in [(Slot::Pre, &filt.pre[t]), (Slot::Post, &filt.post[t])] {
            if p.len() != n {
                sized = false;
                v.push(Violation::NotAPartition {
                    t,
                    slot,
                    defect: format!("covers {} outcomes, space has {n}", p.len()),
                });
            }
        }
    }
    if !sized {
        return ValidationReport { violations: v };
    }
    if !filt.pre[0].is_trivial() {
        v.push(Violation::InitialPreNotTrivial);
    }
    for t in filt.times() {
        if !filt.pre[t].is_coarser_than(&filt.post[t]) {
            v.push(Violation::RefinementBroken {
                t,
                detail: "pre-partition is not coarser than post-partition".into(),
            });
        }
        if t > 0 && !filt.post[t - 1].is_coarser_than(&filt.pre[t]) {
            v.push(Violation::RefinementBroken {
                t,
                detail: format!("post-partition at t={} is not coarser than pre-partition", t - 1),
            });
        }
    }
    ValidationReport { violations: v }
}
