//! Exact optimal stopping over predictable stopping times on finite
//! filtered probability spaces.
//!
//! The filtration has two slots per grid time: a pre-partition `Q_t` for the
//! information available strictly before `t` and a post-partition `P_t` for
//! the information at `t`. A predictable time must decide to stop at `t` from
//! `Q_t` alone, so when `Q_t` is strictly coarser than `P_t` the information
//! revealed at `t` cannot be used at `t`.
//!
//! All arithmetic is exact ([`Rational`]), conditional expectations are
//! block averages over partitions, and every construction is cross-checked
//! against brute-force enumeration of predictable times.
//!
//! ```
//! use predstop::{canonical, value_backward, Rational};
//!
//! let e3 = canonical("E3").unwrap();
//! let vs = value_backward(&e3);
//! assert_eq!(vs.v(0)[0], "3/2".parse::<Rational>().unwrap());
//! ```

pub mod decomposition;
pub mod error;
pub mod generate;
pub mod instance;
pub mod model;
pub mod optimal;
pub mod propcheck;
pub mod rational;
pub mod reward;
pub mod snell;
pub mod space;
pub mod stopping;

pub use decomposition::{decompose, MertensDecomposition};
pub use error::{Error, Result, ValidationReport, Violation};
pub use generate::{generate_random, GenParams};
pub use instance::{canonical, load, save};
pub use model::Instance;
pub use propcheck::{registry, run_suite, Config, PropertyReport};
pub use rational::Rational;
pub use reward::RewardFamily;
pub use snell::{value_backward, value_bruteforce, ValueSystem};
pub use space::{condexp, is_measurable, Event, Partition, RandomVar, SampleSpace, TwoSlotFiltration};
pub use stopping::{PredictableTime, StoppingTime, DEFAULT_BUDGET};
