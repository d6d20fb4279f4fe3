//! Baseline tables and canonical distributions.
//!
//! Official tables arrive in a normalized extract format (see [`extract`])
//! and are folded through the registry's category mappings into
//! [`DemographicDistribution`]s.

pub mod extract;
mod ingest;

use serde::{Deserialize, Serialize};

use crate::model::{DimensionId, Gender, GeoScope, ModelError};

pub use extract::{Baseline, CensusTable, PartyTable, TableId, TableRow, ValueKind, Vocabulary};
pub use ingest::{
    ingest_acs, ingest_immigrants, ingest_party_affiliation, ImmigrantCounts, FULL_TIME_SUBSET,
    UNSPECIFIED_ROW,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CensusError {
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("unsupported granularity: {0}")]
    UnsupportedGranularity(String),
    #[error("unknown table id `{0}`")]
    UnknownTable(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which denominator a share is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ShareBasis {
    /// Over everyone, `unspecified` included.
    #[default]
    Total,
    /// Over classified persons only.
    Classified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub category: String,
    /// Persons; absent for share-only sources such as party affiliation polls.
    pub count: Option<u64>,
    /// Fraction of the total (unspecified included).
    pub share: f64,
    pub floor_tainted: bool,
}

/// Distribution of one geography over one dimension's canonical categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicDistribution {
    pub geography: GeoScope,
    pub dimension: DimensionId,
    /// Restriction to one gender (age pyramids); `All` otherwise.
    #[serde(default)]
    pub gender: Gender,
    pub cells: Vec<Cell>,
    pub unspecified_count: Option<u64>,
    pub unspecified_share: f64,
}

impl DemographicDistribution {
    /// Builds a distribution from person counts. Shares are over the total
    /// including `unspecified`; an empty total yields all-zero shares.
    pub fn from_counts(
        geography: GeoScope,
        dimension: DimensionId,
        cells: impl IntoIterator<Item = (String, u64, bool)>,
        unspecified: u64,
    ) -> Self {
        let cells: Vec<(String, u64, bool)> = cells.into_iter().collect();
        let total = cells.iter().map(|c| c.1).sum::<u64>() + unspecified;
        let frac = |n: u64| {
            if total == 0 {
                0.0
            } else {
                n as f64 / total as f64
            }
        };
        DemographicDistribution {
            geography,
            dimension,
            gender: Gender::All,
            cells: cells
                .into_iter()
                .map(|(category, count, floor_tainted)| Cell {
                    category,
                    count: Some(count),
                    share: frac(count),
                    floor_tainted,
                })
                .collect(),
            unspecified_count: Some(unspecified),
            unspecified_share: frac(unspecified),
        }
    }

    /// Builds a share-only distribution (fractions in `[0, 1]`).
    pub fn from_shares(
        geography: GeoScope,
        dimension: DimensionId,
        cells: impl IntoIterator<Item = (String, f64)>,
        unspecified_share: f64,
    ) -> Self {
        DemographicDistribution {
            geography,
            dimension,
            gender: Gender::All,
            cells: cells
                .into_iter()
                .map(|(category, share)| Cell {
                    category,
                    count: None,
                    share,
                    floor_tainted: false,
                })
                .collect(),
            unspecified_count: None,
            unspecified_share,
        }
    }

    pub fn with_gender(mut self, gender: Gender) -> Self {
        self.gender = gender;
        self
    }

    pub fn cell(&self, category: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.category == category)
    }

    pub fn count(&self, category: &str) -> Option<u64> {
        self.cell(category).and_then(|c| c.count)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.cells.iter().map(|c| c.category.as_str())
    }

    pub fn classified_total(&self) -> Option<u64> {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn total(&self) -> Option<u64> {
        Some(self.classified_total()? + self.unspecified_count?)
    }

    pub fn has_counts(&self) -> bool {
        self.unspecified_count.is_some() && self.cells.iter().all(|c| c.count.is_some())
    }

    pub fn share(&self, category: &str, basis: ShareBasis) -> Option<f64> {
        let cell = self.cell(category)?;
        match basis {
            ShareBasis::Total => Some(cell.share),
            ShareBasis::Classified => match (cell.count, self.classified_total()) {
                (Some(n), Some(t)) if t > 0 => Some(n as f64 / t as f64),
                (Some(_), Some(_)) => Some(0.0),
                _ => {
                    let classified = 1.0 - self.unspecified_share;
                    Some(if classified > 0.0 {
                        cell.share / classified
                    } else {
                        0.0
                    })
                }
            },
        }
    }

    pub fn any_floor_tainted(&self) -> bool {
        self.cells.iter().any(|c| c.floor_tainted)
    }
}
