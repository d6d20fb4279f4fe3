use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Region assigned to baseline countries missing from the region map.
pub const UNASSIGNED_REGION: &str = "(unassigned)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRollup {
    pub region: String,
    /// Sum over countries targetable on the platform.
    pub platform_total: u64,
    /// Baseline sum over the same countries.
    pub census_total: u64,
    /// Baseline countries of the region.
    pub census_countries: usize,
    /// Baseline countries the platform does not offer, sorted.
    pub missing_countries: Vec<String>,
    pub missing_country_fraction: f64,
}

/// Rolls per-country immigrant counts up to regions. Only countries
/// present on both sides enter the totals; countries the platform lacks
/// are counted as missing, never imputed.
pub fn aggregate_regions(
    platform: &BTreeMap<String, u64>,
    census: &BTreeMap<String, u64>,
    region_map: &BTreeMap<String, String>,
) -> Vec<RegionRollup> {
    let mut regions: BTreeMap<&str, RegionRollup> = BTreeMap::new();
    for (country, census_count) in census {
        let region = region_map
            .get(country)
            .map_or(UNASSIGNED_REGION, String::as_str);
        let roll = regions.entry(region).or_insert_with(|| RegionRollup {
            region: region.to_string(),
            platform_total: 0,
            census_total: 0,
            census_countries: 0,
            missing_countries: Vec::new(),
            missing_country_fraction: 0.0,
        });
        roll.census_countries += 1;
        match platform.get(country) {
            Some(p) => {
                roll.platform_total += p;
                roll.census_total += census_count;
            }
            None => roll.missing_countries.push(country.clone()),
        }
    }
    regions
        .into_values()
        .map(|mut r| {
            r.missing_country_fraction =
                r.missing_countries.len() as f64 / r.census_countries as f64;
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn two_country_region_one_missing() {
        let regions: BTreeMap<String, String> = [("A", "R"), ("B", "R")]
            .iter()
            .map(|(c, r)| (c.to_string(), r.to_string()))
            .collect();
        let out = aggregate_regions(&map(&[("A", 70)]), &map(&[("A", 100), ("B", 50)]), &regions);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].platform_total, 70);
        assert_eq!(out[0].census_total, 100);
        assert_eq!(out[0].missing_country_fraction, 0.5);
        assert_eq!(out[0].missing_countries, vec!["B".to_string()]);
    }

    #[test]
    fn complete_region_and_unassigned() {
        let regions: BTreeMap<String, String> = [("A".to_string(), "R".to_string())].into();
        let out = aggregate_regions(
            &map(&[("A", 1), ("Z", 2)]),
            &map(&[("A", 3), ("Z", 4)]),
            &regions,
        );
        assert_eq!(out[0].region, "(unassigned)");
        assert_eq!(out[1].missing_country_fraction, 0.0);
    }
}
