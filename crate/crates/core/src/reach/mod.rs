//! Reach backends: answer "how many platform users match this targeting
//! formula", reproducing the platform's 1000-user privacy floor.
//!
//! Two backends exist. [`SyntheticBackend`] queries a seeded synthetic
//! population with known ground truth; [`FixtureBackend`] replays reach
//! estimates recorded from the real platform.

mod fixture;
mod population;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, TargetingSpec};

pub use fixture::{FixtureBackend, FixtureEntry, FixtureMeta, FixtureStore};
pub use population::{
    AgeBin, AttributeModel, CityModel, InclusionModel, Individual, InterestModel, PopulationConfig,
    SyntheticPopulation, ATTRIBUTE_DIMENSIONS,
};
pub use synthetic::SyntheticBackend;

/// Audiences smaller than this are reported as exactly this value.
pub const PRIVACY_FLOOR: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Synthetic,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachEstimate {
    pub spec: TargetingSpec,
    pub count: u64,
    /// The true audience was below the floor and `count` is the floor value.
    pub floor_applied: bool,
    /// A replayed count equal to the floor; it may or may not be censored.
    pub ambiguous_floor: bool,
    pub source: Source,
}

impl ReachEstimate {
    /// Whether this count may have been censored by the privacy floor.
    pub fn floor_tainted(&self) -> bool {
        self.floor_applied || self.ambiguous_floor
    }
}

/// Rounding applied by the synthetic backend to counts above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RoundPolicy {
    #[default]
    Identity,
    /// Round half-up to this many significant digits.
    SignificantDigits(u32),
}

impl RoundPolicy {
    pub fn apply(self, count: u64) -> u64 {
        match self {
            RoundPolicy::Identity => count,
            RoundPolicy::SignificantDigits(0) => count,
            RoundPolicy::SignificantDigits(d) => {
                let digits = count.checked_ilog10().map_or(1, |l| l + 1);
                if digits <= d {
                    return count;
                }
                let unit = 10u64.pow(digits - d);
                (count + unit / 2) / unit * unit
            }
        }
    }
}

/// Applies the floor and rounding policy to a true matched count.
pub fn floored(true_count: u64, round: RoundPolicy) -> (u64, bool) {
    if true_count < PRIVACY_FLOOR {
        (PRIVACY_FLOOR, true)
    } else {
        (round.apply(true_count).max(PRIVACY_FLOOR), false)
    }
}

/// Anything that can size an audience.
pub trait ReachBackend: Send + Sync {
    fn reach(&self, spec: &TargetingSpec) -> Result<ReachEstimate, ReachError>;

    fn source(&self) -> Source;
}

impl<B: ReachBackend + ?Sized> ReachBackend for &B {
    fn reach(&self, spec: &TargetingSpec) -> Result<ReachEstimate, ReachError> {
        (**self).reach(spec)
    }

    fn source(&self) -> Source {
        (**self).source()
    }
}

impl<B: ReachBackend + ?Sized> ReachBackend for Box<B> {
    fn reach(&self, spec: &TargetingSpec) -> Result<ReachEstimate, ReachError> {
        (**self).reach(spec)
    }

    fn source(&self) -> Source {
        (**self).source()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReachError {
    #[error("no recorded reach for `{0}`")]
    FixtureMiss(String),
    #[error("unknown geography `{0}`")]
    GeographyUnknown(String),
    #[error("recorded count {0} is below the privacy floor of {PRIVACY_FLOOR}")]
    FloorViolation(u64),
    #[error("invalid population config: {0}")]
    Config(String),
    #[error("malformed fixture file: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_rounding() {
        let r = RoundPolicy::SignificantDigits(3);
        assert_eq!(r.apply(123_456), 123_000);
        assert_eq!(r.apply(123_500), 124_000);
        assert_eq!(r.apply(999), 999);
        assert_eq!(r.apply(0), 0);
        assert_eq!(RoundPolicy::Identity.apply(123_456), 123_456);
    }

    #[test]
    fn floor_semantics() {
        assert_eq!(floored(0, RoundPolicy::Identity), (1000, true));
        assert_eq!(floored(999, RoundPolicy::Identity), (1000, true));
        assert_eq!(floored(1000, RoundPolicy::Identity), (1000, false));
        assert_eq!(
            floored(1001, RoundPolicy::SignificantDigits(1)),
            (1000, false)
        );
        assert_eq!(
            floored(230_000_000, RoundPolicy::Identity),
            (230_000_000, false)
        );
    }
}
