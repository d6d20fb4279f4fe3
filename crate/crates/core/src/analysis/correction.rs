use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::census::{DemographicDistribution, ShareBasis};
use crate::model::{DimensionId, GeoScope};

/// Multiplier turning a platform share into the baseline share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactor {
    pub geography: GeoScope,
    pub dimension: DimensionId,
    pub category: String,
    pub platform_share: f64,
    pub census_share: f64,
    pub cf: f64,
    pub floor_tainted: bool,
}

impl CorrectionFactor {
    pub fn from_shares(
        geography: GeoScope,
        dimension: DimensionId,
        category: impl Into<String>,
        platform_share: f64,
        census_share: f64,
        floor_tainted: bool,
    ) -> Result<CorrectionFactor, AnalysisError> {
        let category = category.into();
        if !(platform_share > 0.0 && platform_share.is_finite()) {
            return Err(AnalysisError::ZeroPlatformShare {
                geography: geography.to_string(),
                category,
            });
        }
        if !(census_share >= 0.0 && census_share.is_finite()) {
            return Err(AnalysisError::Domain(format!(
                "{geography} {category}: baseline share {census_share} is not a fraction"
            )));
        }
        Ok(CorrectionFactor {
            cf: census_share / platform_share,
            geography,
            dimension,
            category,
            platform_share,
            census_share,
            floor_tainted,
        })
    }
}

/// Per-category factors, one result per category so that a zero platform
/// share does not hide the others.
pub fn cell_correction_factors(
    platform: &DemographicDistribution,
    census: &DemographicDistribution,
    basis: ShareBasis,
) -> Result<Vec<Result<CorrectionFactor, AnalysisError>>, AnalysisError> {
    if platform.dimension != census.dimension || !platform.geography.same_place(&census.geography) {
        return Err(AnalysisError::Mismatch(format!(
            "platform {} {} vs baseline {} {}",
            platform.geography, platform.dimension, census.geography, census.dimension
        )));
    }
    let p: BTreeSet<&str> = platform.categories().collect();
    let c: BTreeSet<&str> = census.categories().collect();
    if p != c {
        return Err(AnalysisError::Mismatch(format!(
            "{} {}: category sets differ",
            platform.geography, platform.dimension
        )));
    }
    Ok(platform
        .cells
        .iter()
        .map(|cell| {
            CorrectionFactor::from_shares(
                platform.geography.clone(),
                platform.dimension,
                &cell.category,
                platform
                    .share(&cell.category, basis)
                    .expect("category present"),
                census
                    .share(&cell.category, basis)
                    .expect("same category set"),
                cell.floor_tainted,
            )
        })
        .collect())
}

pub fn correction_factors(
    platform: &DemographicDistribution,
    census: &DemographicDistribution,
    basis: ShareBasis,
) -> Result<Vec<CorrectionFactor>, AnalysisError> {
    cell_correction_factors(platform, census, basis)?
        .into_iter()
        .collect()
}

/// Ascending by factor: the most over-represented first. Ties go by
/// geography name; equal names keep their input order.
pub fn representation_ranking(cfs: &[CorrectionFactor]) -> Vec<CorrectionFactor> {
    let mut out = cfs.to_vec();
    out.sort_by(|a, b| {
        a.cf.total_cmp(&b.cf)
            .then_with(|| a.geography.name().cmp(b.geography.name()))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedStratum {
    pub category: String,
    pub count: u64,
    pub cf: f64,
    pub adjusted: f64,
    /// Either the audience count or the factor may be floor-censored.
    pub floor_tainted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostStratified {
    pub strata: Vec<AdjustedStratum>,
    pub total: f64,
}

impl PostStratified {
    /// Scales the adjusted total from platform users to residents, using
    /// the totals the factors' shares were taken over.
    pub fn population_estimate(&self, census_total: u64, platform_total: u64) -> f64 {
        self.total * census_total as f64 / platform_total as f64
    }
}

/// Multiplies each audience stratum by its factor. `audience` holds
/// `(category, count, floor_tainted)`; every category needs exactly one
/// factor.
pub fn post_stratify(
    audience: &[(String, u64, bool)],
    cfs: &[CorrectionFactor],
) -> Result<PostStratified, AnalysisError> {
    let mut strata = Vec::with_capacity(audience.len());
    for (category, count, tainted) in audience {
        let mut matches = cfs.iter().filter(|cf| cf.category == *category);
        let cf = matches
            .next()
            .ok_or_else(|| AnalysisError::MissingStratumCF(category.clone()))?;
        if matches.next().is_some() {
            return Err(AnalysisError::Mismatch(format!(
                "stratum `{category}` has factors from more than one geography"
            )));
        }
        strata.push(AdjustedStratum {
            category: category.clone(),
            count: *count,
            cf: cf.cf,
            adjusted: *count as f64 * cf.cf,
            floor_tainted: *tainted || cf.floor_tainted,
        });
    }
    let total = strata.iter().map(|s| s.adjusted).sum();
    Ok(PostStratified { strata, total })
}
