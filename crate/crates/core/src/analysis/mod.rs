//! Platform census compilation and comparison against baselines.

mod baseline;
mod compare;
mod compile;
mod correction;
mod immigrants;
pub mod series;
mod stats;

use crate::model::ModelError;
use crate::reach::ReachError;

pub use baseline::{synthetic_baseline, table_for};
pub use compare::{
    correlate_category, correlate_dimension, shares_by_geo, shifted_bucket_correlation,
    CorrelationReport, CorrelationTable, CoverageRow, CoverageTable,
};
pub use compile::{
    category_spec, compile_cell, compile_platform_census, compile_specs, NativeCell, PlatformCensus,
};
pub use correction::{
    cell_correction_factors, correction_factors, post_stratify, representation_ranking,
    AdjustedStratum, CorrectionFactor, PostStratified,
};
pub use immigrants::{aggregate_regions, RegionRollup, UNASSIGNED_REGION};
pub use stats::{derive_residual_race, pearson, pearson_ci95, Z95};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Backend(#[from] ReachError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("named groups ({named}) exceed the total audience ({total})")]
    NegativeResidual { total: u64, named: u128 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} data points, have {n}")]
    InsufficientData { n: usize, need: usize },
    #[error("zero variance in a correlated series")]
    DegenerateVariance,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{geography} {category}: platform share is zero")]
    ZeroPlatformShare { geography: String, category: String },
    #[error("no correction factor for stratum `{0}`")]
    MissingStratumCF(String),
    #[error("no coverage data for `{0}`")]
    MissingGeography(String),
    #[error("missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("unsupported granularity: {0}")]
    UnsupportedGranularity(String),
}
