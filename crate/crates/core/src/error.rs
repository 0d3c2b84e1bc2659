use std::fmt;

use serde::Serialize;

use crate::rational::Rational;

/// Which slot of the filtration a partition belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Pre,
    Post,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Pre => f.write_str("pre"),
            Slot::Post => f.write_str("post"),
        }
    }
}

/// One violated invariant of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptySpace,
    DuplicateOutcome { outcome: String },
    NonPositiveProbability { outcome: String, prob: Rational },
    ProbabilitySum { total: Rational },
    FiltrationLength { expected: usize, pre: usize, post: usize },
    NotAPartition { t: usize, slot: Slot, defect: String },
    InitialPreNotTrivial,
    RefinementBroken { t: usize, detail: String },
    RewardLength { expected: usize, found: usize },
    NegativeReward { t: usize, outcome: String, value: Rational },
    /// `phi_t` is not constant on a block of the pre-partition at `t`; the
    /// constant time `t` is a predictable witness whose reward is not
    /// measurable for its pre-sigma-algebra.
    RewardNotPredictable { t: usize, block: Vec<String> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySpace => write!(f, "sample space has no outcomes"),
            Violation::DuplicateOutcome { outcome } => write!(f, "duplicate outcome id {outcome:?}"),
            Violation::NonPositiveProbability { outcome, prob } => {
                write!(f, "outcome {outcome:?} has nonpositive probability {prob}")
            }
            Violation::ProbabilitySum { total } => write!(f, "probabilities sum to {total}"),
            Violation::FiltrationLength { expected, pre, post } => write!(
                f,
                "filtration must have {expected} pre and post partitions, found {pre} and {post}"
            ),
            Violation::NotAPartition { t, slot, defect } => {
                write!(f, "{slot} blocks at t={t} are not a partition: {defect}")
            }
            Violation::InitialPreNotTrivial => write!(f, "pre-partition at t=0 is not trivial"),
            Violation::RefinementBroken { t, detail } => {
                write!(f, "refinement chain broken at t={t}: {detail}")
            }
            Violation::RewardLength { expected, found } => {
                write!(f, "reward must have {expected} times, found {found}")
            }
            Violation::NegativeReward { t, outcome, value } => {
                write!(f, "reward at t={t} is negative on {outcome:?}: {value}")
            }
            Violation::RewardNotPredictable { t, block } => write!(
                f,
                "reward at t={t} is not constant on pre-block {{{}}}; phi(tau) for tau={t} is not measurable before tau",
                block.join(",")
            ),
        }
    }
}

/// The complete list of violated invariants of an instance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), Error> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("stopping time is not predictable: {0}")]
    NotPredictable(String),
    #[error("{what} is not measurable for the required sigma-algebra")]
    NotMeasurable { what: String },
    #[error("enumeration budget of {limit} stopping times exceeded")]
    BudgetExceeded { limit: usize },
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(Rational),
    #[error("stopping time must dominate S pointwise")]
    NotAfter,
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unknown canonical instance {0:?} (expected E1, E2 or E3)")]
    UnknownInstance(String),
    #[error("unknown property id {0:?}")]
    UnknownProperty(String),
    #[error("invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
