//! Ground-truth baselines drawn from a synthetic population.

use super::AnalysisError;
use crate::census::{
    Baseline, CensusTable, PartyTable, TableId, TableRow, ValueKind, Vocabulary, UNSPECIFIED_ROW,
};
use crate::model::{DimensionId, Gender, GeoLevel, GeoScope, Registry, Side, Target};
use crate::reach::SyntheticPopulation;

/// The table id a baseline for `dim` is published under.
pub fn table_for(dim: DimensionId) -> TableId {
    match dim {
        DimensionId::Age | DimensionId::Gender => TableId::S0101,
        DimensionId::Race => TableId::DP05,
        DimensionId::Income => TableId::S2001,
        DimensionId::Education => TableId::S1501,
        DimensionId::CountryOfOrigin => TableId::B05006,
        DimensionId::PoliticalLeaning => TableId::Gallup,
    }
}

/// Baseline table of every resident of `geo` (not only platform members),
/// in canonical vocabulary. Political leaning comes out as a party table
/// with percentages, like the survey it stands in for.
pub fn synthetic_baseline(
    population: &SyntheticPopulation,
    registry: &Registry,
    geo: &GeoScope,
    dim: DimensionId,
    gender: Gender,
) -> Result<Baseline, AnalysisError> {
    let (cells, unspecified) = population.truth_counts(geo, dim, gender)?;
    let vintage = format!("synthetic seed {}", population.seed());
    if dim == DimensionId::PoliticalLeaning {
        if geo.level() == GeoLevel::City {
            return Err(AnalysisError::UnsupportedGranularity(
                "party-affiliation baselines exist only for countries and states".into(),
            ));
        }
        if gender != Gender::All {
            return Err(AnalysisError::Domain(
                "party-affiliation baselines are not split by gender".into(),
            ));
        }
        let mapping = registry.mapping(dim)?;
        let total = (cells.iter().map(|c| c.1).sum::<u64>() + unspecified).max(1) as f64;
        let mut categories = Vec::new();
        let mut pcts = Vec::new();
        for (canonical, n) in &cells {
            let source = mapping
                .entries_on(Side::Census)
                .find(|e| e.target == Target::Canonical(canonical.clone()))
                .ok_or_else(|| {
                    AnalysisError::Mismatch(format!("no baseline category maps to {canonical}"))
                })?;
            categories.push(source.source.clone());
            pcts.push(*n as f64 / total * 100.0);
        }
        let scope = registry
            .countries()
            .first()
            .map(|c| GeoScope::country(&c.id))
            .transpose()?
            .unwrap_or_else(|| geo.clone());
        return Ok(Baseline::Party(PartyTable {
            geography: scope,
            vintage,
            row_level: geo.level(),
            categories,
            rows: vec![(geo.name().to_string(), pcts)],
        }));
    }
    let row = |category: String, count: u64| TableRow {
        category,
        count,
        percent: None,
        subset: None,
    };
    let mut rows: Vec<TableRow> = cells.into_iter().map(|(c, n)| row(c, n)).collect();
    rows.push(row(UNSPECIFIED_ROW.to_string(), unspecified));
    Ok(Baseline::Acs(CensusTable {
        table_id: table_for(dim),
        geography: geo.clone(),
        vintage,
        dimension: dim,
        gender,
        values: ValueKind::Count,
        vocabulary: Vocabulary::Canonical,
        universe: None,
        rows,
    }))
}
