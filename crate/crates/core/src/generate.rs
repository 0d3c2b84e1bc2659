//! Seeded random instances.
//!
//! The post-chain grows by random binary splits of blocks. Where the
//! filtration is meant to jump, the pre-slot undoes a nonempty subset of the
//! splits made at that time, so `P_{t-1} ⊑ Q_t ⊊ P_t`. Rewards are drawn per
//! `Q_t` block, which makes them admissible by construction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Instance;
use crate::rational::Rational;
use crate::reward::RewardFamily;
use crate::space::{Outcome, Partition, RandomVar, SampleSpace, TwoSlotFiltration};

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    /// Outcome count is drawn from `1..=max_outcomes`.
    pub max_outcomes: usize,
    /// Exact horizon `N`.
    pub horizon: usize,
    /// Chance that the filtration jumps at a given time.
    pub qlc_violation_prob: f64,
    /// Rewards lie in `[0, reward_max]`.
    pub reward_max: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_outcomes: 5, horizon: 3, qlc_violation_prob: 0.5, reward_max: 10 }
    }
}

/// Splits a block into two nonempty halves.
fn split(block: &[Outcome], rng: &mut ChaCha8Rng) -> (Vec<Outcome>, Vec<Outcome>) {
    let mut shuffled = block.to_vec();
    shuffled.shuffle(rng);
    let cut = rng.gen_range(1..shuffled.len());
    let (mut a, mut b) = (shuffled[..cut].to_vec(), shuffled[cut..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// One step of the chain: `(Q_t, P_t)` from `P_{t-1}`.
fn step(prev: &Partition, jump: bool, force_pre_trivial: bool, rng: &mut ChaCha8Rng) -> (Partition, Partition) {
    let n = prev.len();
    let mut post_blocks = Vec::new();
    // each split remembers its parent so the pre-slot can undo it
    let mut splits: Vec<(Vec<Outcome>, Vec<Outcome>, Vec<Outcome>)> = Vec::new();
    for b in prev.blocks() {
        if b.len() >= 2 && rng.gen_bool(0.5) {
            let (x, y) = split(b, rng);
            splits.push((b.clone(), x, y));
        } else {
            post_blocks.push(b.clone());
        }
    }
    if jump && splits.is_empty() {
        if let Some(b) = prev.blocks().iter().find(|b| b.len() >= 2) {
            let (x, y) = split(b, rng);
            post_blocks.retain(|p| p != b);
            splits.push((b.clone(), x, y));
        }
    }
    let mut pre_blocks = post_blocks.clone();
    let undo: Vec<bool> = if jump && !splits.is_empty() {
        let mut mask: Vec<bool> = splits.iter().map(|_| rng.gen_bool(0.5)).collect();
        if !mask.iter().any(|&m| m) {
            let i = rng.gen_range(0..mask.len());
            mask[i] = true;
        }
        mask
    } else {
        vec![false; splits.len()]
    };
    for ((parent, x, y), undone) in splits.into_iter().zip(undo) {
        if undone {
            pre_blocks.push(parent);
        } else {
            pre_blocks.push(x.clone());
            pre_blocks.push(y.clone());
        }
        post_blocks.push(x);
        post_blocks.push(y);
    }
    let post = Partition::from_blocks(n, post_blocks).expect("splits partition the space");
    let pre = if force_pre_trivial {
        Partition::trivial(n)
    } else {
        Partition::from_blocks(n, pre_blocks).expect("splits partition the space")
    };
    (pre, post)
}

/// Deterministic in `seed`; the result always validates.
pub fn generate_random(seed: u64, params: &GenParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=params.max_outcomes.max(1));
    let ids: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let weights: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let probs = weights.iter().map(|&w| Rational::new(w, total)).collect();
    let space = SampleSpace::new(ids, probs);

    let q = params.qlc_violation_prob.clamp(0.0, 1.0);
    let mut pre = Vec::with_capacity(params.horizon + 1);
    let mut post = Vec::with_capacity(params.horizon + 1);
    // at t = 0 the pre-slot is trivial, so only a jump may refine P_0
    let jump0 = rng.gen_bool(q);
    let (q0, p0) = if jump0 {
        step(&Partition::trivial(n), true, true, &mut rng)
    } else {
        (Partition::trivial(n), Partition::trivial(n))
    };
    pre.push(q0);
    post.push(p0);
    for _ in 1..=params.horizon {
        let jump = rng.gen_bool(q);
        let (qt, pt) = step(post.last().expect("nonempty"), jump, false, &mut rng);
        pre.push(qt);
        post.push(pt);
    }

    let reward_max = i64::from(params.reward_max);
    let per_time = pre
        .iter()
        .map(|qt| {
            let mut values = vec![Rational::zero(); n];
            for block in qt.blocks() {
                let den = rng.gen_range(1..=4);
                let v = Rational::new(rng.gen_range(0..=reward_max * den), den);
                for &w in block {
                    values[w] = v.clone();
                }
            }
            RandomVar(values)
        })
        .collect();
    let filt = TwoSlotFiltration::new(pre, post);
    Instance::new(space, filt, RewardFamily::new(per_time)).expect("generated instances validate")
}
