use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::extract::{CensusTable, PartyTable, TableId, TableRow, Vocabulary};
use super::{CensusError, DemographicDistribution};
use crate::model::{DimensionId, GeoLevel, GeoScope, ModelError, Registry, Side, Target};

/// Income baselines count only this S2001 worker population.
pub const FULL_TIME_SUBSET: &str = "Full-time, year-round workers with earnings";

/// Row label for persons outside every canonical category in tables that
/// use the canonical vocabulary.
pub const UNSPECIFIED_ROW: &str = "(unspecified)";

fn malformed(msg: impl Into<String>) -> CensusError {
    CensusError::MalformedTable(msg.into())
}

impl CensusTable {
    /// Rows that take part in ingestion. S2001 tables with a subset column
    /// are restricted to full-time, year-round workers.
    pub fn ingested_rows(&self) -> Result<Vec<&TableRow>, CensusError> {
        if self.table_id == TableId::S2001 && self.rows.iter().any(|r| r.subset.is_some()) {
            let rows: Vec<&TableRow> = self
                .rows
                .iter()
                .filter(|r| r.subset.as_deref() == Some(FULL_TIME_SUBSET))
                .collect();
            if rows.is_empty() {
                return Err(malformed(format!(
                    "S2001 table has no `{FULL_TIME_SUBSET}` rows"
                )));
            }
            return Ok(rows);
        }
        Ok(self.rows.iter().collect())
    }

    /// Sum of the rows that ingestion accounts for.
    pub fn source_total(&self) -> Result<u64, CensusError> {
        Ok(self.ingested_rows()?.iter().map(|r| r.count).sum())
    }
}

/// Folds an ACS-shaped table into the canonical categories of its
/// dimension. Every ingested person lands in exactly one canonical cell or
/// in `unspecified`.
pub fn ingest_acs(
    table: &CensusTable,
    registry: &Registry,
) -> Result<DemographicDistribution, CensusError> {
    let dim = registry.dimension(table.dimension)?;
    let mapping = registry.mapping(table.dimension)?;
    let rows = table.ingested_rows()?;

    let mut counts: BTreeMap<&str, u64> = dim.canonical_ids().map(|c| (c, 0)).collect();
    let mut unspecified = 0u64;
    match table.vocabulary {
        Vocabulary::Canonical => {
            for row in rows {
                if row.category == UNSPECIFIED_ROW {
                    unspecified += row.count;
                } else if let Some(slot) = counts.get_mut(row.category.as_str()) {
                    *slot += row.count;
                } else {
                    return Err(ModelError::UnmappedCategory {
                        dimension: table.dimension,
                        side: Side::Canonical,
                        category: row.category.clone(),
                    }
                    .into());
                }
            }
        }
        Vocabulary::Source => {
            let required: BTreeSet<&str> = mapping
                .entries_on(Side::Census)
                .filter_map(|e| e.group.as_deref())
                .collect();
            let mut present: BTreeSet<&str> = BTreeSet::new();
            for row in rows {
                let entry = mapping.entry(Side::Census, &row.category).ok_or_else(|| {
                    ModelError::UnmappedCategory {
                        dimension: table.dimension,
                        side: Side::Census,
                        category: row.category.clone(),
                    }
                })?;
                if let Some(g) = entry.group.as_deref() {
                    present.insert(g);
                }
                let credited = match entry.share {
                    // Round half up; the remainder goes to unspecified.
                    Some((num, den)) => {
                        ((row.count as u128 * num as u128 * 2 + den as u128) / (2 * den as u128))
                            as u64
                    }
                    None => row.count,
                };
                match &entry.target {
                    Target::Canonical(c) => {
                        *counts
                            .get_mut(c.as_str())
                            .expect("registry validated targets") += credited;
                        unspecified += row.count - credited;
                    }
                    Target::Unspecified => unspecified += row.count,
                }
            }
            if let Some(missing) = required.difference(&present).next() {
                return Err(malformed(format!(
                    "{} table lacks the `{missing}` age-group rows",
                    table.table_id
                )));
            }
        }
    }

    let cells = dim
        .canonical_ids()
        .map(|c| (c.to_string(), counts[c], false))
        .collect::<Vec<_>>();
    Ok(DemographicDistribution::from_counts(
        table.geography.clone(),
        table.dimension,
        cells,
        unspecified,
    )
    .with_gender(table.gender))
}

/// One political-leaning distribution per table row. Percentages that fall
/// short of 100 (no lean, don't know) go to `unspecified`.
pub fn ingest_party_affiliation(
    table: &PartyTable,
    registry: &Registry,
) -> Result<Vec<DemographicDistribution>, CensusError> {
    if table.row_level == GeoLevel::City || table.geography.level() == GeoLevel::City {
        return Err(CensusError::UnsupportedGranularity(
            "party affiliation is only available for countries and states".into(),
        ));
    }
    let dim = registry.dimension(DimensionId::PoliticalLeaning)?;
    let mapping = registry.mapping(DimensionId::PoliticalLeaning)?;
    let targets = table
        .categories
        .iter()
        .map(|c| {
            mapping
                .entry(Side::Census, c)
                .map(|e| &e.target)
                .ok_or_else(|| ModelError::UnmappedCategory {
                    dimension: DimensionId::PoliticalLeaning,
                    side: Side::Census,
                    category: c.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Vec::with_capacity(table.rows.len());
    for (geo, pcts) in &table.rows {
        let geo = GeoScope::new(table.row_level, geo.clone(), None)?;
        registry.check_geo(&geo)?;
        let mut by_canonical: BTreeMap<&str, f64> = dim.canonical_ids().map(|c| (c, 0.0)).collect();
        let mut unspecified = 100.0 - pcts.iter().sum::<f64>();
        for (p, target) in pcts.iter().zip(&targets) {
            match target {
                Target::Canonical(c) => *by_canonical.get_mut(c.as_str()).expect("validated") += p,
                Target::Unspecified => unspecified += p,
            }
        }
        let cells = dim
            .canonical_ids()
            .map(|c| (c.to_string(), by_canonical[c] / 100.0))
            .collect::<Vec<_>>();
        out.push(DemographicDistribution::from_shares(
            geo,
            DimensionId::PoliticalLeaning,
            cells,
            unspecified.max(0.0) / 100.0,
        ));
    }
    Ok(out)
}

/// Foreign-born persons by country of birth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmigrantCounts {
    pub geography: GeoScope,
    /// Registry origin id → persons.
    pub counts: BTreeMap<String, u64>,
    /// Row labels that matched no registered country, in file order.
    pub skipped: Vec<String>,
}

impl ImmigrantCounts {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Resolves B05006 country rows to registry origins. Unknown names are
/// skipped and reported; two rows resolving to the same origin are an error.
pub fn ingest_immigrants(
    table: &CensusTable,
    registry: &Registry,
) -> Result<ImmigrantCounts, CensusError> {
    if table.table_id != TableId::B05006 {
        return Err(malformed(format!(
            "immigrant counts come from B05006 tables, not {}",
            table.table_id
        )));
    }
    let mut counts = BTreeMap::new();
    let mut skipped = Vec::new();
    for row in &table.rows {
        if table.vocabulary == Vocabulary::Canonical && row.category == UNSPECIFIED_ROW {
            continue;
        }
        match registry.resolve_origin(&row.category) {
            Some(origin) => {
                if counts.insert(origin.id.clone(), row.count).is_some() {
                    return Err(malformed(format!(
                        "duplicate row for country `{}`",
                        origin.id
                    )));
                }
            }
            None => skipped.push(row.category.clone()),
        }
    }
    Ok(ImmigrantCounts {
        geography: table.geography.clone(),
        counts,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::ShareBasis;

    fn reg() -> Registry {
        Registry::builtin()
    }

    fn wv() -> GeoScope {
        GeoScope::state("WV").unwrap()
    }

    fn table(id: TableId, rows: &[(&str, u64)]) -> CensusTable {
        CensusTable::from_counts(
            id,
            wv(),
            "2016",
            rows.iter().map(|(c, n)| (c.to_string(), *n)),
        )
    }

    const EDU_25: [&str; 7] = [
        "Less than 9th grade",
        "9th to 12th grade, no diploma",
        "High school graduate (includes equivalency)",
        "Some college, no degree",
        "Associate's degree",
        "Bachelor's degree",
        "Graduate or professional degree",
    ];

    #[test]
    fn incomplete_hs_groups_three_rows() {
        let (a, b, c) = (41_000, 98_000, 12_000);
        let mut rows = vec![
            ("Less than 9th grade", a),
            ("9th to 12th grade, no diploma", b),
            ("Less than high school graduate (18-24)", c),
        ];
        rows.extend(EDU_25[2..].iter().map(|r| (*r, 0)));
        let d = ingest_acs(&table(TableId::S1501, &rows), &reg()).unwrap();
        assert_eq!(d.count("IncompleteHS"), Some(a + b + c));
    }

    #[test]
    fn education_needs_both_age_groups() {
        let rows: Vec<(&str, u64)> = EDU_25.iter().map(|r| (*r, 10)).collect();
        let err = ingest_acs(&table(TableId::S1501, &rows), &reg()).unwrap_err();
        assert!(matches!(err, CensusError::MalformedTable(_)), "{err}");
    }

    #[test]
    fn unmapped_row_is_an_error() {
        let err = ingest_acs(&table(TableId::DP05, &[("Martian", 5)]), &reg()).unwrap_err();
        assert!(matches!(
            err,
            CensusError::Model(ModelError::UnmappedCategory {
                side: Side::Census,
                ..
            })
        ));
    }

    #[test]
    fn ten_to_fourteen_prorated() {
        let d = ingest_acs(
            &table(
                TableId::S0101,
                &[("10 to 14 years", 1001), ("15 to 19 years", 7)],
            ),
            &reg(),
        )
        .unwrap();
        // 2/5 of 1001 = 400.4, rounded to 400; the other 601 are unspecified.
        assert_eq!(d.count("13-14"), Some(400));
        assert_eq!(d.count("15-19"), Some(7));
        assert_eq!(d.unspecified_count, Some(601));
    }

    #[test]
    fn income_restricted_to_full_time() {
        let text = format!(
            "#table_id=S2001\n#geography=state:WV\n#vintage=2016\ncategory,value,subset\n\
             \"$25,000 to $34,999\",100,\"{FULL_TIME_SUBSET}\"\n\
             \"$25,000 to $34,999\",900,All workers\n\
             \"$100,000 or more\",50,\"{FULL_TIME_SUBSET}\"\n"
        );
        let t = CensusTable::parse(&text).unwrap();
        let d = ingest_acs(&t, &reg()).unwrap();
        assert_eq!(d.count("25k-50k"), Some(100));
        assert_eq!(d.count("100k+"), Some(50));
        assert_eq!(t.source_total().unwrap(), 150);
    }

    #[test]
    fn canonical_vocabulary_identity() {
        let text = "#table_id=DP05\n#geography=state:WV\n#vintage=2016\n#vocabulary=canonical\n\
                    category,value\nHispanic,1\nAfricanAmerican,2\nAsianAmerican,3\nWhite,4\n(unspecified),5\n";
        let d = ingest_acs(&CensusTable::parse(text).unwrap(), &reg()).unwrap();
        assert_eq!(d.count("AsianAmerican"), Some(3));
        assert_eq!(d.unspecified_count, Some(5));
        assert_eq!(d.total(), Some(15));
    }

    #[test]
    fn gallup_residual_goes_to_unspecified() {
        let text = "#table_id=GALLUP\n#geography=country:US\n#vintage=2017\nstate,left,moderate,right\nWV,20,30,42\nMA,45,20,35\n";
        let ds = ingest_party_affiliation(&PartyTable::parse(text).unwrap(), &reg()).unwrap();
        assert_eq!(ds.len(), 2);
        assert!((ds[0].unspecified_share - 0.08).abs() < 1e-12);
        assert!((ds[1].share("Left", ShareBasis::Total).unwrap() - 0.45).abs() < 1e-12);
        assert!((ds[1].share("Moderate", ShareBasis::Total).unwrap() - 0.20).abs() < 1e-12);
        assert!((ds[1].share("Right", ShareBasis::Total).unwrap() - 0.35).abs() < 1e-12);
        assert_eq!(ds[1].unspecified_share, 0.0);
    }

    #[test]
    fn gallup_city_rows_rejected() {
        let text = "#table_id=GALLUP\n#geography=country:US\n#vintage=2017\ncity,left,moderate,right\nnew_york_ny,45,20,35\n";
        let err = ingest_party_affiliation(&PartyTable::parse(text).unwrap(), &reg()).unwrap_err();
        assert!(matches!(err, CensusError::UnsupportedGranularity(_)));
    }

    #[test]
    fn immigrants() {
        let t = CensusTable::from_counts(
            TableId::B05006,
            GeoScope::country("US").unwrap(),
            "2016",
            [
                ("China".to_string(), 2_640_000),
                ("Belize".to_string(), 0),
                ("Atlantis".to_string(), 7),
            ],
        );
        let got = ingest_immigrants(&t, &reg()).unwrap();
        assert_eq!(got.counts.get("China"), Some(&2_640_000));
        assert_eq!(got.counts.get("Belize"), Some(&0));
        assert_eq!(got.skipped, vec!["Atlantis".to_string()]);

        let dup = CensusTable::from_counts(
            TableId::B05006,
            GeoScope::country("US").unwrap(),
            "2016",
            [("China".to_string(), 1), ("china".to_string(), 2)],
        );
        assert!(matches!(
            ingest_immigrants(&dup, &reg()),
            Err(CensusError::MalformedTable(_))
        ));
    }
}
