use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{pearson, pearson_ci95};
use super::AnalysisError;
use crate::census::{DemographicDistribution, ShareBasis};
use crate::model::{DimensionId, GeoLevel, GeoScope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub dimension: DimensionId,
    /// Platform-side category.
    pub category: String,
    /// Baseline category; differs from `category` for shifted comparisons.
    pub census_category: String,
    pub level: GeoLevel,
    pub n: usize,
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Pairs platform and baseline distributions by place. Every platform
/// geography must have a baseline.
fn pair<'a>(
    platform: &'a [DemographicDistribution],
    census: &'a [DemographicDistribution],
    dim: DimensionId,
) -> Result<Vec<(&'a DemographicDistribution, &'a DemographicDistribution)>, AnalysisError> {
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for p in platform.iter().filter(|p| p.dimension == dim) {
        match census.iter().find(|c| {
            c.dimension == dim && c.gender == p.gender && c.geography.same_place(&p.geography)
        }) {
            Some(c) => out.push((p, c)),
            None => missing.push(format!("{} {}", p.geography, dim)),
        }
    }
    if !missing.is_empty() {
        return Err(AnalysisError::MissingCells(missing));
    }
    Ok(out)
}

fn common_level(
    pairs: &[(&DemographicDistribution, &DemographicDistribution)],
) -> Result<GeoLevel, AnalysisError> {
    let level = pairs
        .first()
        .map(|(p, _)| p.geography.level())
        .ok_or(AnalysisError::InsufficientData { n: 0, need: 4 })?;
    if pairs.iter().any(|(p, _)| p.geography.level() != level) {
        return Err(AnalysisError::Mismatch(
            "correlations need geographies of a single level".into(),
        ));
    }
    Ok(level)
}

/// Correlates the platform share of `platform_cat` with the baseline share
/// of `census_cat` across geographies. Floor-tainted platform cells are
/// left out.
pub fn shifted_bucket_correlation(
    platform: &[DemographicDistribution],
    census: &[DemographicDistribution],
    dim: DimensionId,
    platform_cat: &str,
    census_cat: &str,
    basis: ShareBasis,
) -> Result<CorrelationReport, AnalysisError> {
    let pairs = pair(platform, census, dim)?;
    let level = common_level(&pairs)?;
    if dim == DimensionId::PoliticalLeaning && level == GeoLevel::City {
        return Err(AnalysisError::UnsupportedGranularity(
            "no political-leaning baseline exists below the state level".into(),
        ));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (p, c) in pairs {
        let cell = p.cell(platform_cat).ok_or_else(|| {
            AnalysisError::MissingCells(vec![format!("{} {dim}/{platform_cat}", p.geography)])
        })?;
        if cell.floor_tainted {
            continue;
        }
        let y = c.share(census_cat, basis).ok_or_else(|| {
            AnalysisError::MissingCells(vec![format!(
                "baseline {} {dim}/{census_cat}",
                c.geography
            )])
        })?;
        xs.push(p.share(platform_cat, basis).expect("cell exists"));
        ys.push(y);
    }
    if xs.len() < 4 {
        return Err(AnalysisError::InsufficientData {
            n: xs.len(),
            need: 4,
        });
    }
    let r = pearson(&xs, &ys)?;
    let (lo, hi) = pearson_ci95(r, xs.len())?;
    Ok(CorrelationReport {
        dimension: dim,
        category: platform_cat.to_string(),
        census_category: census_cat.to_string(),
        level,
        n: xs.len(),
        r,
        lo,
        hi,
    })
}

pub fn correlate_category(
    platform: &[DemographicDistribution],
    census: &[DemographicDistribution],
    dim: DimensionId,
    category: &str,
    basis: ShareBasis,
) -> Result<CorrelationReport, AnalysisError> {
    shifted_bucket_correlation(platform, census, dim, category, category, basis)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub reports: Vec<CorrelationReport>,
    /// Categories with no usable correlation and the reason.
    pub skipped: Vec<(DimensionId, String, String)>,
}

/// Correlates every canonical category of `dim`. Missing baselines abort;
/// statistical failures (constant shares, too few clean cells) are listed
/// in `skipped`.
pub fn correlate_dimension(
    platform: &[DemographicDistribution],
    census: &[DemographicDistribution],
    dim: DimensionId,
    basis: ShareBasis,
) -> Result<CorrelationTable, AnalysisError> {
    let mut table = CorrelationTable::default();
    let Some(first) = platform.iter().find(|p| p.dimension == dim) else {
        return Ok(table);
    };
    for category in first.categories() {
        match correlate_category(platform, census, dim, category, basis) {
            Ok(rep) => table.reports.push(rep),
            Err(
                e @ (AnalysisError::DegenerateVariance
                | AnalysisError::InsufficientData { .. }
                | AnalysisError::Domain(_)),
            ) => table
                .skipped
                .push((dim, category.to_string(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub geography: GeoScope,
    pub platform_total: u64,
    pub census_total: u64,
    /// Baseline persons aged 13 and over, when known.
    pub census_13_plus: Option<u64>,
}

impl CoverageRow {
    /// Platform users per resident of all ages.
    pub fn ratio(&self) -> f64 {
        self.platform_total as f64 / self.census_total as f64
    }

    pub fn ratio_13_plus(&self) -> Option<f64> {
        self.census_13_plus
            .map(|c| self.platform_total as f64 / c as f64)
    }
}

/// Platform reach relative to the baseline population, per geography.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageTable {
    rows: Vec<CoverageRow>,
}

impl CoverageTable {
    pub fn new() -> Self {
        CoverageTable::default()
    }

    pub fn insert(
        &mut self,
        geography: GeoScope,
        platform_total: u64,
        census_total: u64,
        census_13_plus: Option<u64>,
    ) -> Result<(), AnalysisError> {
        if platform_total == 0 || census_total == 0 {
            return Err(AnalysisError::Domain(format!(
                "{geography}: coverage needs positive totals"
            )));
        }
        self.rows.retain(|r| !r.geography.same_place(&geography));
        self.rows.push(CoverageRow {
            geography,
            platform_total,
            census_total,
            census_13_plus,
        });
        Ok(())
    }

    /// Builds the table from platform totals and baseline age
    /// distributions, whose classified part is the 13+ population.
    pub fn from_age_baselines(
        platform_totals: &[(GeoScope, u64)],
        census_age: &[DemographicDistribution],
    ) -> Result<CoverageTable, AnalysisError> {
        let mut table = CoverageTable::new();
        let mut missing = Vec::new();
        for (geo, total) in platform_totals {
            let base = census_age.iter().find(|d| {
                d.dimension == DimensionId::Age
                    && d.gender == crate::model::Gender::All
                    && d.geography.same_place(geo)
            });
            match base.and_then(|d| Some((d.total()?, d.classified_total()?))) {
                Some((all, plus)) => table.insert(geo.clone(), *total, all, Some(plus))?,
                None => missing.push(geo.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(AnalysisError::MissingCells(missing));
        }
        Ok(table)
    }

    pub fn rows(&self) -> &[CoverageRow] {
        &self.rows
    }

    pub fn row(&self, geo: &GeoScope) -> Result<&CoverageRow, AnalysisError> {
        self.rows
            .iter()
            .find(|r| r.geography.same_place(geo))
            .ok_or_else(|| AnalysisError::MissingGeography(geo.to_string()))
    }

    /// `platform_total / census_total` with the all-ages denominator.
    pub fn coverage_ratio(&self, geo: &GeoScope) -> Result<f64, AnalysisError> {
        Ok(self.row(geo)?.ratio())
    }

    /// Pearson correlation of platform and baseline totals across rows.
    pub fn total_correlation(&self) -> Result<f64, AnalysisError> {
        let x: Vec<f64> = self.rows.iter().map(|r| r.platform_total as f64).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.census_total as f64).collect();
        pearson(&x, &y)
    }

    /// Rows by decreasing all-ages coverage.
    pub fn ranked(&self) -> Vec<&CoverageRow> {
        let mut rows: Vec<&CoverageRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            b.ratio()
                .total_cmp(&a.ratio())
                .then_with(|| a.geography.name().cmp(b.geography.name()))
        });
        rows
    }
}

/// Convenience: per-geography share of one category, keyed by place name.
pub fn shares_by_geo(
    dists: &[DemographicDistribution],
    dim: DimensionId,
    category: &str,
    basis: ShareBasis,
) -> BTreeMap<String, f64> {
    dists
        .iter()
        .filter(|d| d.dimension == dim)
        .filter_map(|d| Some((d.geography.name().to_string(), d.share(category, basis)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(
        state: &str,
        dim: DimensionId,
        cells: &[(&str, u64)],
        tainted: &[&str],
    ) -> DemographicDistribution {
        DemographicDistribution::from_counts(
            GeoScope::state(state).unwrap(),
            dim,
            cells
                .iter()
                .map(|(c, n)| (c.to_string(), *n, tainted.contains(c))),
            0,
        )
    }

    #[test]
    fn coverage_examples() {
        let mut t = CoverageTable::new();
        t.insert(GeoScope::state("NY").unwrap(), 15_000_000, 19_798_228, None)
            .unwrap();
        t.insert(GeoScope::state("NM").unwrap(), 1_340_000, 2_084_828, None)
            .unwrap();
        t.insert(GeoScope::state("DC").unwrap(), 1_000_000, 672_391, None)
            .unwrap();
        let pct =
            |s: &str| (t.coverage_ratio(&GeoScope::state(s).unwrap()).unwrap() * 100.0).round();
        assert_eq!(pct("NY"), 76.0);
        assert_eq!(pct("NM"), 64.0);
        assert!(t.coverage_ratio(&GeoScope::state("DC").unwrap()).unwrap() > 1.0);
        assert!(matches!(
            t.coverage_ratio(&GeoScope::state("WV").unwrap()),
            Err(AnalysisError::MissingGeography(_))
        ));
        assert_eq!(t.ranked()[0].geography.name(), "DC");
    }

    #[test]
    fn tainted_cells_dropped_and_missing_reported() {
        let dim = DimensionId::Gender;
        let states = ["AL", "AK", "AZ", "AR", "CA"];
        let platform: Vec<_> = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                dist(
                    s,
                    dim,
                    &[("Male", 40 + i as u64 * 3), ("Female", 60)],
                    if i == 4 { &["Male"] } else { &[] },
                )
            })
            .collect();
        let census: Vec<_> = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                dist(
                    s,
                    dim,
                    &[("Male", 45 + i as u64 * i as u64), ("Female", 55)],
                    &[],
                )
            })
            .collect();
        let rep = correlate_category(&platform, &census, dim, "Male", ShareBasis::Total).unwrap();
        assert_eq!(rep.n, 4);
        assert!(rep.lo <= rep.r && rep.r <= rep.hi);

        let err = correlate_category(&platform, &census[..4], dim, "Male", ShareBasis::Total)
            .unwrap_err();
        assert!(
            matches!(err, AnalysisError::MissingCells(ref m) if m.len() == 1),
            "{err}"
        );
    }

    #[test]
    fn city_political_comparison_disallowed() {
        let dim = DimensionId::PoliticalLeaning;
        let city = |c: &str| {
            DemographicDistribution::from_shares(
                GeoScope::city(c, 30).unwrap(),
                dim,
                [
                    ("Left".to_string(), 0.3),
                    ("Moderate".to_string(), 0.3),
                    ("Right".to_string(), 0.4),
                ],
                0.0,
            )
        };
        let d = vec![city("a"), city("b"), city("c"), city("d")];
        let err = correlate_category(&d, &d, dim, "Left", ShareBasis::Total).unwrap_err();
        assert!(matches!(err, AnalysisError::UnsupportedGranularity(_)));
    }
}
