//! Build a demographic "census" of an ad platform's users from reach
//! estimates, compare it with official baselines, and derive correction
//! factors for post-stratifying platform audience counts.
//!
//! * [`model`]: geographies, dimensions, category mappings, targeting specs
//! * [`reach`]: reach backends (synthetic population, recorded fixtures)
//! * [`census`]: parsing of baseline tables into distributions
//! * [`analysis`]: platform census compilation, correlations, correction factors
//! * [`report`]: delimited and structured report writers
//! * [`cli`]: the `demo-census` command implementations

pub mod analysis;
pub mod census;
pub mod cli;
pub mod model;
pub mod reach;
pub mod report;
