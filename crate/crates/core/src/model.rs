use crate::error::{Result, ValidationReport};
use crate::reward::{validate_admissible, RewardFamily};
use crate::space::{validate_space, SampleSpace, TwoSlotFiltration};
use crate::stopping::{enumerate_predictable, PredictableTime, StoppingTime};

/// A validated problem: space, filtration and an admissible reward.
///
/// The only way to obtain one is through [`Instance::new`], so every engine
/// entry point that takes an `Instance` runs on admissible input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    space: SampleSpace,
    filtration: TwoSlotFiltration,
    reward: RewardFamily,
}

impl Instance {
    pub fn new(space: SampleSpace, filtration: TwoSlotFiltration, reward: RewardFamily) -> Result<Self> {
        let mut report = validate_space(&space, &filtration);
        if report.is_ok() {
            report = validate_admissible(&reward, &space, &filtration);
        }
        report.into_result()?;
        Ok(Instance { space, filtration, reward })
    }

    /// Full validation report without constructing.
    pub fn validate(space: &SampleSpace, filtration: &TwoSlotFiltration, reward: &RewardFamily) -> ValidationReport {
        let mut report = validate_space(space, filtration);
        if report.is_ok() {
            report.violations.extend(validate_admissible(reward, space, filtration).violations);
        }
        report
    }

    /// Same space and filtration, different reward.
    pub fn with_reward(&self, reward: RewardFamily) -> Result<Self> {
        validate_admissible(&reward, &self.space, &self.filtration).into_result()?;
        Ok(Instance { space: self.space.clone(), filtration: self.filtration.clone(), reward })
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn filtration(&self) -> &TwoSlotFiltration {
        &self.filtration
    }

    pub fn reward(&self) -> &RewardFamily {
        &self.reward
    }

    pub fn horizon(&self) -> usize {
        self.filtration.horizon()
    }

    pub fn num_outcomes(&self) -> usize {
        self.space.len()
    }

    pub fn constant_time(&self, t: usize) -> PredictableTime {
        PredictableTime::constant(&self.filtration, t)
    }

    pub fn predictable(&self, tau: StoppingTime) -> Result<PredictableTime> {
        PredictableTime::new(tau, &self.filtration)
    }

    /// `T_S^p` (or `T_{S+}^p` with `strict`).
    pub fn predictable_after(&self, s: &PredictableTime, strict: bool, budget: usize) -> Result<Vec<PredictableTime>> {
        enumerate_predictable(&self.filtration, s.time(), strict, budget)
    }
}
