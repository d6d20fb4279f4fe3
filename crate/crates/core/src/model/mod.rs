//! Shared vocabulary: geographies, demographic dimensions, category
//! mappings between platform/census/canonical vocabularies, and targeting
//! formulas.

mod dimension;
mod geo;
mod registry;
mod spec;

pub use dimension::{
    map_to_canonical, Category, CategoryMapping, Dimension, DimensionId, Gender, MappingEntry,
    QueryRule, Side, Target,
};
pub use geo::{GeoLevel, GeoScope, DEFAULT_CITY_RADIUS_MILES, MIN_CITY_RADIUS_MILES};
pub use registry::{CityEntry, OriginEntry, PlaceEntry, Registry, EDUCATION_CANONICAL};
pub use spec::{AgeRange, AttributeKey, Constraint, TargetingSpec, MIN_PLATFORM_AGE, OPEN_AGE_CAP};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("conflicting constraint: {0}")]
    ConflictingConstraint(String),
    #[error("{dimension}: no mapping for {side:?} category `{category}`")]
    UnmappedCategory {
        dimension: DimensionId,
        side: Side,
        category: String,
    },
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("unknown geography `{0}`")]
    GeographyUnknown(String),
    #[error("invalid geography: {0}")]
    InvalidGeo(String),
    #[error("invalid targeting spec: {0}")]
    InvalidSpec(String),
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
    #[error("{0}")]
    Io(String),
}
