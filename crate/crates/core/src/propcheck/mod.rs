//! The property registry: every modeled identity and inequality of the
//! predictable optimal stopping theory as a named check over one instance.
//!
//! A check quantifies over every enumerated predictable time it needs. When
//! an enumeration exceeds the budget the property is reported as
//! `skipped-budget`, never as passed. Statements about strict left limits or
//! right-continuity conditions have no counterpart on a finite grid; they are
//! listed with status `not-modeled`.
//!
//! A failing check returns a [`Witness`] carrying the times, the `α` or event,
//! the outcome and block and both sides of the violated relation, so the
//! failure can be replayed with [`run_property`].

mod ctx;
mod properties;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::digest;
use crate::snell::ValueSystem;
use crate::stopping::DEFAULT_BUDGET;

pub use ctx::{Ctx, Witness};

type CheckFn = fn(&Ctx<'_, '_>) -> Result<Option<Witness>>;

/// One registered statement.
pub struct Property {
    pub id: &'static str,
    /// The statement, written out.
    pub anchor: &'static str,
    /// What the check ranges over.
    pub quantifiers: &'static str,
    check: Option<CheckFn>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Descriptor {
    pub id: &'static str,
    pub anchor: &'static str,
    pub quantifiers: &'static str,
    pub modeled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    SkippedBudget,
    NotModeled,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyResult {
    pub id: &'static str,
    pub anchor: &'static str,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skipped_budget: usize,
    pub not_modeled: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub instance_digest: String,
    pub budget: usize,
    pub summary: Summary,
    pub properties: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| p.status == Status::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.id == id)
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub budget: usize,
    /// Restrict the run to these ids; all when `None`.
    pub props: Option<Vec<String>>,
}

impl Default for Config {
    fn default() -> Self {
        Config { budget: DEFAULT_BUDGET, props: None }
    }
}

macro_rules! prop {
    ($id:literal, $anchor:literal, $q:literal, $f:path) => {
        Property { id: $id, anchor: $anchor, quantifiers: $q, check: Some($f) }
    };
    ($id:literal, $anchor:literal, $q:literal) => {
        Property { id: $id, anchor: $anchor, quantifiers: $q, check: None }
    };
}

use properties as p;

static PROPERTIES: &[Property] = &[
    prop!("pre_sigma_constant", "F_{t-} = Q_t for the constant time t", "t in 0..=N", p::pre_sigma_constant),
    prop!("pre_sigma_events", "{τ = t}, {τ > t} and φ(τ) are F_{τ-}-measurable", "τ in T_0^p, t", p::pre_sigma_events),
    prop!("pre_sigma_meet", "F_{(τ1 ∧ τ2)-} = F_{τ1-} ∩ F_{τ2-}", "τ1, τ2 in T_0^p", p::pre_sigma_meet),
    prop!("pre_sigma_monotone", "S <= θ implies F_{S-} ⊆ F_{θ-}", "S <= θ in T_0^p", p::pre_sigma_monotone),
    prop!(
        "glue_lattice",
        "τ1 ∧ τ2, τ1 ∨ τ2 and τ1 1_A + τ2 1_{A^c} are predictable for A in F_{(τ1 ∧ τ2)-}",
        "τ1, τ2 in T_0^p, A generated by F_{(τ1 ∧ τ2)-} blocks",
        p::glue_lattice
    ),
    prop!(
        "enumeration_complete",
        "T_S^p is every predictable τ >= S; T_{S+}^p ⊆ T_S^p",
        "S in T_0^p; all time maps at S = 0",
        p::enumeration_complete
    ),
    prop!(
        "reward_admissible",
        "φ(τ) is F_{τ-}-measurable and φ(τ) = φ(τ') on {τ = τ'}",
        "τ, τ' in T_0^p",
        p::reward_admissible
    ),
    prop!(
        "pairwise_max",
        "{E[φ(τ) | F_{S-}], τ in T_S^p (T_{S+}^p)} is closed under pairwise maximization",
        "S in T_0^p, τ1, τ2 in T_S^p and T_{S+}^p",
        p::pairwise_max
    ),
    prop!(
        "optimizing_sequence",
        "E[φ(τ^n) | F_{S-}] increases to V_p(S) (V_p⁺(S))",
        "S in T_0^p, both classes",
        p::optimizing_sequence
    ),
    prop!(
        "aggregation",
        "V_p(τ) = esssup_{θ in T_τ^p} E[φ(θ) | F_{τ-}]",
        "τ in T_0^p",
        p::aggregation
    ),
    prop!(
        "strict_aggregation",
        "V_p⁺(τ) = esssup_{θ in T_{τ+}^p} E[φ(θ) | F_{τ-}]",
        "τ in T_0^p",
        p::strict_aggregation
    ),
    prop!(
        "bellman_alpha",
        "E[α V_p(θ) | F_{S-}] = esssup_{τ in T_θ^p} E[α φ(τ) | F_{S-}], and the strict form with V_p⁺ and T_{θ+}^p",
        "S <= θ in T_0^p, α in the F_{S-} probe set",
        p::bellman_alpha
    ),
    prop!(
        "scaling",
        "V^α(τ) = α V_p(τ), V^{α+}(τ) = α V_p⁺(τ)",
        "S in T_0^p, α in the F_{S-} probe set, τ in T_S^p (T_{S+}^p)",
        p::scaling
    ),
    prop!(
        "localization",
        "V^A(τ) = 1_A V_p(τ), V^{A+}(τ) = 1_A V_p⁺(τ)",
        "S in T_0^p, A in F_{S-}, τ in T_S^p (T_{S+}^p)",
        p::localization
    ),
    prop!(
        "localization_agree",
        "V^A(τ) = V^A(τ̃) and V^{A+}(τ) = V^{A+}(τ̃) for A = {τ = τ̃}",
        "τ, τ̃ in T_0^p",
        p::localization_agree
    ),
    prop!(
        "strict_localization_bound",
        "E[φ(τ) | F_{τ̃-}] 1_B <= V^{B+}(τ̃) and <= V_p⁺(τ̃) 1_B for B = {τ > τ̃}",
        "τ, τ̃ in T_0^p",
        p::strict_localization_bound
    ),
    prop!(
        "additivity",
        "V_p(τ) = V^A(τ) + V^{A^c}(τ)",
        "S in T_0^p, A in F_{S-}, τ in T_S^p",
        p::additivity
    ),
    prop!(
        "value_admissible",
        "V_p and V_p⁺ are admissible families",
        "t; τ, τ' in T_0^p",
        p::value_admissible
    ),
    prop!(
        "localized_martingale",
        "V_p a martingale system on [S, τ̃(S)] implies V^A is one for A in F_{S-}",
        "S in T_0^p, A in F_{S-}, S <= τ1 <= τ2 <= τ̃(S)",
        p::localized_martingale
    ),
    prop!(
        "supermartingale",
        "E[V_p(τ') | F_{τ-}] <= V_p(τ) and E[V_p⁺(τ') | F_{τ-}] <= V_p⁺(τ)",
        "τ <= τ' in T_0^p",
        p::supermartingale
    ),
    prop!(
        "snell_minimality",
        "U a supermartingale system with U >= φ implies U >= V_p",
        "seeded dominating systems U",
        p::snell_minimality
    ),
    prop!(
        "reward_or_strict",
        "V_p(S) = φ(S) ∨ V_p⁺(S)",
        "t in 0..=N; S in T_0^p",
        p::reward_or_strict
    ),
    prop!(
        "strict_value_bound",
        "E[V_p(τ) | F_{S-}] <= V_p⁺(S) on {τ > S}",
        "S in T_0^p, τ in T_S^p",
        p::strict_value_bound
    ),
    prop!(
        "right_limit_bounds",
        "E[V_p(τ) | F_{S-}] <= E[V_p(S⁺) | F_{S-}] for τ in T_{S+}^p, and V_p⁺(S) <= E[V_p(S⁺) | F_{S-}]",
        "S in T_0^p, τ in T_{S+}^p",
        p::right_limit_bounds
    ),
    prop!(
        "right_limit_dominated",
        "E[V_p(S⁺) | F_{S-}] <= V_p(S)",
        "S in T_0^p",
        p::right_limit_dominated
    ),
    prop!(
        "right_limit_bellman",
        "V_p(S) = φ(S) ∨ E[V_p(S⁺) | F_{S-}], with V_p(S) - E[V_p(S⁺) | F_{S-}] vanishing off {V_p(S) = φ(S)}",
        "S in T_0^p",
        p::right_limit_bellman
    ),
    prop!(
        "strict_strong_supermartingale",
        "t ↦ E[V_p(t+1) | Q_t] is a predictable supermartingale system",
        "τ <= τ' in T_0^p",
        p::strict_strong_supermartingale
    ),
    prop!(
        "criterion_equivalence",
        "τ* optimal iff V_p(τ*) = φ(τ*) and V_p is a martingale system on [S, τ*]",
        "S in T_0^p, τ* in T_S^p",
        p::criterion_equivalence
    ),
    prop!(
        "first_contact_optimal",
        "τ̂(S) = min{t >= S : V_p(t) = φ_t} is optimal for V_p(S)",
        "S in T_0^p",
        p::first_contact_optimal
    ),
    prop!(
        "optimal_set_closure",
        "A^p_S is stable by pairwise maximization and V_p is a martingale system on [S, τ̃(S)]",
        "S in T_0^p",
        p::optimal_set_closure
    ),
    prop!(
        "martingale_interval_forms",
        "one-step martingale condition on [S, τ] iff E[V_p(τ2) | F_{τ1-}] = V_p(τ1) for S <= τ1 <= τ2 <= τ",
        "S <= τ in T_0^p",
        p::martingale_interval_forms
    ),
    prop!(
        "penalized_cover",
        "α V_p(τ^α(S)) <= φ(τ^α(S))",
        "S in T_0^p, α in {1/4, 1/2, 3/4, 9/10}",
        p::penalized_cover
    ),
    prop!(
        "penalized_essinf",
        "τ^α(S) = essinf {τ in T_S^p : α V_p(τ) <= φ(τ)}, a set stable by pairwise minimization",
        "S in T_0^p, α in {1/4, 1/2, 3/4, 9/10}",
        p::penalized_essinf
    ),
    prop!(
        "penalized_monotone",
        "τ^α(S) is nondecreasing in α, bounded by τ̂(S) and equal to it for α close to 1",
        "S in T_0^p, α in {1/4, 1/2, 3/4, 9/10} and past the stationarity threshold",
        p::penalized_monotone
    ),
    prop!(
        "mertens_decomposition",
        "V_p(t) = M_t - A_t - C_{t-1}, M a martingale for Q, ΔC_t = V_p(t) - E[V_p(t+1) | Q_t] >= 0",
        "t in 0..=N; τ in T_0^p",
        p::mertens_decomposition
    ),
    prop!(
        "flat_off_contact",
        "ΔC_t = 0 on {V_p(t) > φ_t}",
        "t in 0..=N; S in T_0^p",
        p::flat_off_contact
    ),
    prop!(
        "flat_before_penalized",
        "C_{τ-1} = C_{S-1} for τ in {τ^α(S), τ̂(S)}, and V_p(S) = E[M_τ - A_τ - C_{τ-1} | F_{S-}]",
        "S in T_0^p, α in {1/4, 1/2, 3/4, 9/10}",
        p::flat_before_penalized
    ),
    prop!(
        "first_contact_representation",
        "V_p(S) = E[φ(τ̂(S)) | F_{S-}] with empty left- and right-limit parts, and E[φ(τ̂)] = sup_τ E[φ(τ)]",
        "S in T_0^p",
        p::first_contact_representation
    ),
    prop!("left_limit_bellman", "V_p(τ⁻) = φ(τ⁻) ∨ V_p(τ)", "strictly increasing sequences of predictable times"),
    prop!("left_limit_value_bound", "V_p(S) <= V_p(S⁻)", "foretelling sequences S_n ↑ S"),
    prop!("left_limited_value", "V_p is left limited along predictable times", "strictly increasing sequences of predictable times"),
    prop!(
        "right_limit_conditional_equality",
        "E[V_p(S⁺) | F_{S-}] = V_p⁺(S) under right upper semicontinuity in expectation",
        "decreasing sequences converging to S"
    ),
    prop!(
        "limit_trichotomy",
        "nontrivial H_S⁻ and H_S⁺ in the representation of V_p(S) through τ̂(S)",
        "strictly monotone approximations of τ̂(S)"
    ),
];

pub fn registry() -> Vec<Descriptor> {
    PROPERTIES
        .iter()
        .map(|p| Descriptor { id: p.id, anchor: p.anchor, quantifiers: p.quantifiers, modeled: p.check.is_some() })
        .collect()
}

fn evaluate(prop: &Property, ctx: &Ctx<'_, '_>) -> PropertyResult {
    let (status, witness) = match prop.check {
        None => (Status::NotModeled, None),
        Some(check) => match check(ctx) {
            Ok(None) => (Status::Pass, None),
            Ok(Some(w)) => (Status::Fail, Some(w)),
            Err(Error::BudgetExceeded { .. }) => (Status::SkippedBudget, None),
            Err(e) => (Status::Fail, Some(Witness::new("engine invariant").detail(e.to_string()))),
        },
    };
    PropertyResult { id: prop.id, anchor: prop.anchor, status, witness }
}

fn summarize(properties: Vec<PropertyResult>, vs: &ValueSystem<'_>, budget: usize) -> PropertyReport {
    let mut summary = Summary::default();
    for p in &properties {
        match p.status {
            Status::Pass => summary.pass += 1,
            Status::Fail => summary.fail += 1,
            Status::SkippedBudget => summary.skipped_budget += 1,
            Status::NotModeled => summary.not_modeled += 1,
        }
    }
    PropertyReport { instance_digest: digest(vs.instance()), budget, summary, properties }
}

/// Evaluates the registry (or the ids in `config.props`) against a value
/// system. The value system need not be the one computed by the engine.
pub fn run_suite(vs: &ValueSystem<'_>, config: &Config) -> Result<PropertyReport> {
    let selected: Vec<&Property> = match &config.props {
        None => PROPERTIES.iter().collect(),
        Some(ids) => ids
            .iter()
            .map(|id| PROPERTIES.iter().find(|p| p.id == id).ok_or_else(|| Error::UnknownProperty(id.clone())))
            .collect::<Result<_>>()?,
    };
    let ctx = Ctx::new(vs, config.budget);
    let results = selected.into_iter().map(|p| evaluate(p, &ctx)).collect();
    Ok(summarize(results, vs, config.budget))
}

/// Re-runs a single property.
pub fn run_property(vs: &ValueSystem<'_>, id: &str, budget: usize) -> Result<PropertyResult> {
    let prop = PROPERTIES.iter().find(|p| p.id == id).ok_or_else(|| Error::UnknownProperty(id.to_string()))?;
    Ok(evaluate(prop, &Ctx::new(vs, budget)))
}
