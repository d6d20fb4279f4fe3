//! Plot-ready series; rendering is left to the consumer.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::census::{DemographicDistribution, ShareBasis};
use crate::model::{DimensionId, Gender};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidRow {
    pub bucket: String,
    pub platform_male: f64,
    pub platform_female: f64,
    pub census_male: f64,
    pub census_female: f64,
}

fn halves<'a>(
    dists: &'a [DemographicDistribution],
    side: &str,
) -> Result<(&'a DemographicDistribution, &'a DemographicDistribution), AnalysisError> {
    let find = |g: Gender| {
        dists
            .iter()
            .find(|d| d.dimension == DimensionId::Age && d.gender == g)
            .ok_or_else(|| {
                AnalysisError::MissingCells(vec![format!("{side} {} age distribution", g.as_str())])
            })
    };
    let (m, f) = (find(Gender::Male)?, find(Gender::Female)?);
    if !m.has_counts() || !f.has_counts() {
        return Err(AnalysisError::Domain(format!(
            "{side} age pyramid needs counts"
        )));
    }
    Ok((m, f))
}

/// Age pyramid: each bucket's male and female counts as a fraction of
/// all classified (13+) persons of both genders, per side.
pub fn age_pyramid(
    platform: &[DemographicDistribution],
    census: &[DemographicDistribution],
) -> Result<Vec<PyramidRow>, AnalysisError> {
    let (pm, pf) = halves(platform, "platform")?;
    let (cm, cf) = halves(census, "baseline")?;
    let p_total =
        (pm.classified_total().unwrap_or(0) + pf.classified_total().unwrap_or(0)).max(1) as f64;
    let c_total =
        (cm.classified_total().unwrap_or(0) + cf.classified_total().unwrap_or(0)).max(1) as f64;
    let frac = |d: &DemographicDistribution, b: &str, t: f64| d.count(b).unwrap_or(0) as f64 / t;
    Ok(pm
        .categories()
        .map(|b| PyramidRow {
            bucket: b.to_string(),
            platform_male: frac(pm, b, p_total),
            platform_female: frac(pf, b, p_total),
            census_male: frac(cm, b, c_total),
            census_female: frac(cf, b, c_total),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub geography: String,
    pub platform_share: f64,
    pub census_share: f64,
    pub floor_tainted: bool,
}

/// One point per geography present on both sides.
pub fn share_scatter(
    platform: &[DemographicDistribution],
    census: &[DemographicDistribution],
    dim: DimensionId,
    category: &str,
    basis: ShareBasis,
) -> Vec<ScatterPoint> {
    platform
        .iter()
        .filter(|p| p.dimension == dim)
        .filter_map(|p| {
            let c = census.iter().find(|c| {
                c.dimension == dim && c.gender == p.gender && c.geography.same_place(&p.geography)
            })?;
            Some(ScatterPoint {
                geography: p.geography.name().to_string(),
                platform_share: p.share(category, basis)?,
                census_share: c.share(category, basis)?,
                floor_tainted: p.cell(category)?.floor_tainted,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeoScope;

    fn age(g: Gender, a: u64, b: u64) -> DemographicDistribution {
        DemographicDistribution::from_counts(
            GeoScope::country("US").unwrap(),
            DimensionId::Age,
            [
                ("13-14".to_string(), a, false),
                ("15-19".to_string(), b, false),
            ],
            7,
        )
        .with_gender(g)
    }

    #[test]
    fn pyramid_sums_to_one_per_side() {
        let p = vec![age(Gender::Male, 10, 30), age(Gender::Female, 20, 40)];
        let c = vec![age(Gender::Male, 1, 1), age(Gender::Female, 1, 1)];
        let rows = age_pyramid(&p, &c).unwrap();
        let sum: f64 = rows
            .iter()
            .map(|r| r.platform_male + r.platform_female)
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(rows[0].census_male, 0.25);
        assert!(age_pyramid(&p[..1], &c).is_err());
    }
}
