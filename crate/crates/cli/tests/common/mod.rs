//! Reference computations written directly from the definitions, sharing no
//! code with the engine beyond the number type: instances are read back from
//! their JSON documents, predictability is tested block by block, and values
//! are maxima over every time map.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

use predstop::{generate_random, instance, GenParams, Instance, Rational};
use serde_json::Value;

pub type Time = Vec<usize>;
pub type Var = Vec<Rational>;

pub fn q(s: &str) -> Rational {
    s.parse().expect("rational literal")
}

/// The 500 acceptance instances: up to five outcomes, horizon `seed mod 4`,
/// jump probability 1/2.
pub fn fuzz_params(seed: u64) -> GenParams {
    GenParams { max_outcomes: 5, horizon: (seed % 4) as usize, qlc_violation_prob: 0.5, reward_max: 10 }
}

pub fn fuzz_instances() -> Vec<(u64, Instance)> {
    (0..500).map(|seed| (seed, generate_random(seed, &fuzz_params(seed)))).collect()
}

pub struct Oracle {
    pub ids: Vec<String>,
    pub horizon: usize,
    pub prob: Vec<Rational>,
    /// Block label of each outcome in `Q_t` and `P_t`.
    pub pre: Vec<Vec<usize>>,
    pub post: Vec<Vec<usize>>,
    pub phi: Vec<Var>,
    /// Every predictable time map, in lexicographic order.
    pub all: Vec<Time>,
}

fn labels(blocks: &Value, ids: &[String]) -> Vec<usize> {
    let mut out = vec![usize::MAX; ids.len()];
    for (b, block) in blocks.as_array().unwrap().iter().enumerate() {
        for id in block.as_array().unwrap() {
            let w = ids.iter().position(|x| x == id.as_str().unwrap()).unwrap();
            out[w] = b;
        }
    }
    assert!(out.iter().all(|&b| b != usize::MAX));
    out
}

/// Every map from `n` outcomes into `0..=horizon`.
fn all_maps(n: usize, horizon: usize) -> Vec<Time> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|m| (0..=horizon).map(move |t| [m.clone(), vec![t]].concat())).collect();
    }
    out.sort();
    out
}

impl Oracle {
    pub fn new(inst: &Instance) -> Oracle {
        let doc: Value = serde_json::from_str(&instance::to_json(inst)).unwrap();
        let ids: Vec<String> = doc["outcomes"].as_array().unwrap().iter().map(|o| o["id"].as_str().unwrap().to_string()).collect();
        let prob = doc["outcomes"].as_array().unwrap().iter().map(|o| q(o["prob"].as_str().unwrap())).collect();
        let horizon = doc["horizon"].as_u64().unwrap() as usize;
        let slots = doc["filtration"].as_array().unwrap();
        let pre = slots.iter().map(|s| labels(&s["pre"], &ids)).collect();
        let post = slots.iter().map(|s| labels(&s["post"], &ids)).collect();
        let phi = doc["reward"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| ids.iter().map(|id| q(r["values"][id].as_str().unwrap())).collect())
            .collect();
        let mut o = Oracle { ids, horizon, prob, pre, post, phi, all: vec![] };
        o.all = all_maps(o.ids.len(), horizon).into_iter().filter(|t| o.is_predictable(t)).collect();
        o
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    fn measurable_event(labels: &[usize], event: impl Fn(usize) -> bool) -> bool {
        let n = labels.len();
        (0..n).all(|a| (0..n).all(|b| labels[a] != labels[b] || event(a) == event(b)))
    }

    /// `{τ = t}` lies in `Q_t` for every `t`.
    pub fn is_predictable(&self, tau: &[usize]) -> bool {
        (0..=self.horizon).all(|t| Self::measurable_event(&self.pre[t], |w| tau[w] == t))
    }

    /// `{τ = t}` lies in `P_t` for every `t`.
    pub fn is_stopping(&self, tau: &[usize]) -> bool {
        (0..=self.horizon).all(|t| Self::measurable_event(&self.post[t], |w| tau[w] == t))
    }

    /// Atom of `F_{τ-}` containing each outcome: the `Q_s` block inside `{τ = s}`.
    pub fn atoms(&self, tau: &[usize]) -> Vec<(usize, usize)> {
        (0..self.n()).map(|w| (tau[w], self.pre[tau[w]][w])).collect()
    }

    pub fn condexp<K: std::hash::Hash + Eq + Copy>(&self, x: &[Rational], key: &[K]) -> Var {
        let mut mass: HashMap<K, (Rational, Rational)> = HashMap::new();
        for w in 0..self.n() {
            let e = mass.entry(key[w]).or_insert((Rational::zero(), Rational::zero()));
            e.0 = &e.0 + &(&self.prob[w] * &x[w]);
            e.1 = &e.1 + &self.prob[w];
        }
        (0..self.n()).map(|w| &mass[&key[w]].0 / &mass[&key[w]].1).collect()
    }

    pub fn ce(&self, x: &[Rational], tau: &[usize]) -> Var {
        self.condexp(x, &self.atoms(tau))
    }

    pub fn expect(&self, x: &[Rational]) -> Rational {
        (0..self.n()).map(|w| &self.prob[w] * &x[w]).sum()
    }

    pub fn reward(&self, tau: &[usize]) -> Var {
        (0..self.n()).map(|w| self.phi[tau[w]][w].clone()).collect()
    }

    pub fn compose(&self, table: &[Var], tau: &[usize]) -> Var {
        (0..self.n()).map(|w| table[tau[w]][w].clone()).collect()
    }

    pub fn le(a: &[usize], b: &[usize]) -> bool {
        a.iter().zip(b).all(|(x, y)| x <= y)
    }

    /// `T_S^p`, or `T_{S+}^p` with `strict` (`τ > S` wherever `S < N`).
    pub fn class(&self, s: &[usize], strict: bool) -> Vec<&Time> {
        self.all
            .iter()
            .filter(|t| {
                (0..self.n()).all(|w| if strict && s[w] < self.horizon { t[w] > s[w] } else { t[w] >= s[w] })
            })
            .collect()
    }

    /// `esssup E[φ(τ) | F_{S-}]` over the class.
    pub fn value(&self, s: &[usize], strict: bool) -> Var {
        let key = self.atoms(s);
        let mut best: Option<Var> = None;
        for tau in self.class(s, strict) {
            let c = self.condexp(&self.reward(tau), &key);
            best = Some(match best {
                None => c,
                Some(b) => b.into_iter().zip(c).map(|(x, y)| x.max(y)).collect(),
            });
        }
        best.expect("class contains the horizon")
    }

    pub fn constant(&self, t: usize) -> Time {
        vec![t; self.n()]
    }

    /// Value table at the grid times.
    pub fn grid(&self, strict: bool) -> Vec<Var> {
        (0..=self.horizon).map(|t| self.value(&self.constant(t), strict)).collect()
    }

    /// Largest expected reward of a stopping time of the post-filtration.
    pub fn classical_value(&self) -> Rational {
        all_maps(self.n(), self.horizon)
            .into_iter()
            .filter(|t| self.is_stopping(t))
            .map(|t| self.expect(&self.reward(&t)))
            .max()
            .unwrap()
    }

    /// Martingale property of the grid values on `[s, tau]`, pairwise over
    /// predictable times in between.
    pub fn martingale_between(&self, grid: &[Var], s: &[usize], tau: &[usize]) -> bool {
        let inside: Vec<&Time> = self.all.iter().filter(|t| Self::le(s, t) && Self::le(t, tau)).collect();
        inside.iter().all(|a| {
            let va = self.compose(grid, a);
            inside.iter().filter(|b| Self::le(a, b)).all(|b| self.ce(&self.compose(grid, b), a) == va)
        })
    }

    pub fn time_of(&self, map: &Value) -> Time {
        self.ids.iter().map(|id| map[id].as_u64().unwrap() as usize).collect()
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_predstop"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("PREDSTOP_BUDGET").output().expect("binary runs")
}

pub fn write_canonical(dir: &std::path::Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    instance::save(&predstop::canonical(name).unwrap(), &path).unwrap();
    path
}
