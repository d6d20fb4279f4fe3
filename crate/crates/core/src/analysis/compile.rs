use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::census::DemographicDistribution;
use crate::model::{
    AttributeKey, DimensionId, Gender, GeoScope, MappingEntry, QueryRule, Registry, Target,
    TargetingSpec,
};
use crate::reach::ReachBackend;

/// Reach of one platform-native category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeCell {
    pub category: String,
    pub canonical: Option<String>,
    pub count: u64,
    pub floor_tainted: bool,
    /// The key of the spec that was queried; absent when the category
    /// cannot intersect the base spec (its count is then zero).
    pub spec: Option<String>,
}

/// Platform-side distribution of one geography over one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformCensus {
    pub geography: GeoScope,
    pub dimension: DimensionId,
    /// Reach of the base spec (the whole geography unless restricted).
    pub total: u64,
    pub total_floor_tainted: bool,
    pub native: Vec<NativeCell>,
    pub distribution: DemographicDistribution,
}

/// The spec counting platform category `entry` within `base`, or `None`
/// when the two cannot overlap (an age bucket outside the base range).
pub fn category_spec(
    registry: &Registry,
    base: &TargetingSpec,
    dim: DimensionId,
    entry: &MappingEntry,
) -> Result<Option<TargetingSpec>, AnalysisError> {
    Ok(match &entry.query {
        QueryRule::Include => {
            Some(base.with_include(AttributeKey::Demographic(dim), &entry.source)?)
        }
        QueryRule::Age(lo, hi) => {
            let (lo, hi) = ((*lo).max(base.age().lo()), (*hi).min(base.age().hi()));
            if lo > hi {
                None
            } else {
                Some(base.with_age(lo, hi)?)
            }
        }
        QueryRule::Gender(g) => match base.gender() {
            Gender::All => Some(base.with_gender(*g)),
            same if same == *g => Some(base.clone()),
            _ => None,
        },
        QueryRule::Residual => {
            let mut spec = base.clone();
            for other in registry.mapping(dim)?.platform_includes() {
                spec = spec.with_exclude(AttributeKey::Demographic(dim), &other.source)?;
            }
            Some(spec)
        }
    })
}

/// Compiles one cell: a total query for `base`, then one query per
/// platform category of `dim`. Canonical counts sum their native
/// categories; whatever the total leaves over is `unspecified`.
pub fn compile_cell<B: ReachBackend + ?Sized>(
    backend: &B,
    registry: &Registry,
    base: &TargetingSpec,
    dim: DimensionId,
) -> Result<PlatformCensus, AnalysisError> {
    let dimension = registry.dimension(dim)?;
    let mapping = registry.mapping(dim)?;
    let total = backend.reach(base)?;

    let mut native = Vec::new();
    for entry in mapping.entries_on(crate::model::Side::Platform) {
        let cell = match category_spec(registry, base, dim, entry)? {
            Some(spec) => {
                let est = backend.reach(&spec)?;
                NativeCell {
                    category: entry.source.clone(),
                    canonical: entry.target.canonical().map(str::to_string),
                    count: est.count,
                    floor_tainted: est.floor_tainted(),
                    spec: Some(spec.key()),
                }
            }
            None => NativeCell {
                category: entry.source.clone(),
                canonical: entry.target.canonical().map(str::to_string),
                count: 0,
                floor_tainted: false,
                spec: None,
            },
        };
        native.push(cell);
    }

    let mut by_canonical: BTreeMap<&str, (u64, bool)> =
        dimension.canonical_ids().map(|c| (c, (0, false))).collect();
    for cell in &native {
        if let Some(Target::Canonical(c)) = mapping
            .entry(crate::model::Side::Platform, &cell.category)
            .map(|e| &e.target)
        {
            let slot = by_canonical
                .get_mut(c.as_str())
                .expect("registry validated targets");
            slot.0 += cell.count;
            slot.1 |= cell.floor_tainted;
        }
    }
    let classified: u64 = by_canonical.values().map(|v| v.0).sum();
    let cells = dimension
        .canonical_ids()
        .map(|c| (c.to_string(), by_canonical[c].0, by_canonical[c].1))
        .collect::<Vec<_>>();
    let distribution = DemographicDistribution::from_counts(
        base.geo().clone(),
        dim,
        cells,
        total.count.saturating_sub(classified),
    )
    .with_gender(base.gender());
    Ok(PlatformCensus {
        geography: base.geo().clone(),
        dimension: dim,
        total: total.count,
        total_floor_tainted: total.floor_tainted(),
        native,
        distribution,
    })
}

/// Compiles every `geo × dimension` cell. Cells are queried in parallel;
/// the result is ordered geography-major, in input order.
pub fn compile_platform_census<B: ReachBackend + ?Sized>(
    backend: &B,
    registry: &Registry,
    geos: &[GeoScope],
    dims: &[DimensionId],
) -> Result<Vec<PlatformCensus>, AnalysisError> {
    let bases: Vec<TargetingSpec> = geos.iter().cloned().map(TargetingSpec::new).collect();
    compile_specs(backend, registry, &bases, dims)
}

/// Like [`compile_platform_census`] but over arbitrary base specs, e.g. a
/// geography restricted to one gender for age pyramids.
pub fn compile_specs<B: ReachBackend + ?Sized>(
    backend: &B,
    registry: &Registry,
    bases: &[TargetingSpec],
    dims: &[DimensionId],
) -> Result<Vec<PlatformCensus>, AnalysisError> {
    let jobs: Vec<(&TargetingSpec, DimensionId)> = bases
        .iter()
        .flat_map(|b| dims.iter().map(move |d| (b, *d)))
        .collect();
    jobs.par_iter()
        .map(|(base, dim)| compile_cell(backend, registry, base, *dim))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::ShareBasis;
    use crate::reach::{FixtureBackend, FixtureStore};

    fn us() -> TargetingSpec {
        TargetingSpec::new(GeoScope::country("US").unwrap())
    }

    #[test]
    fn political_leaning_from_fixtures() {
        let mut store = FixtureStore::default();
        store.record(&us(), 230_000_000, None).unwrap();
        for (cat, n) in [
            ("conservative", 39),
            ("liberal", 47),
            ("very_liberal", 35),
            ("very_conservative", 26),
            ("moderate", 45),
        ] {
            let spec = us()
                .with_include(DimensionId::PoliticalLeaning, cat)
                .unwrap();
            store.record(&spec, n * 1_000_000, None).unwrap();
        }
        let reg = Registry::builtin();
        let got = compile_cell(
            &FixtureBackend::new(store),
            &reg,
            &us(),
            DimensionId::PoliticalLeaning,
        )
        .unwrap();
        let d = &got.distribution;
        assert_eq!(d.count("Right"), Some(65_000_000));
        assert_eq!(d.count("Left"), Some(82_000_000));
        assert_eq!(d.count("Moderate"), Some(45_000_000));
        assert_eq!(d.classified_total(), Some(192_000_000));
        assert_eq!(d.unspecified_count, Some(38_000_000));
        assert!((d.share("Left", ShareBasis::Classified).unwrap() - 82.0 / 192.0).abs() < 1e-15);
    }

    #[test]
    fn residual_query_excludes_every_named_race() {
        let reg = Registry::builtin();
        let entry = reg
            .mapping(DimensionId::Race)
            .unwrap()
            .entries
            .iter()
            .find(|e| e.query == QueryRule::Residual)
            .unwrap()
            .clone();
        let spec = category_spec(&reg, &us(), DimensionId::Race, &entry)
            .unwrap()
            .unwrap();
        assert_eq!(spec.excludes().len(), 3);
        assert!(spec.includes().is_empty());
    }

    #[test]
    fn age_bucket_outside_base_is_skipped() {
        let reg = Registry::builtin();
        let base = us().with_age(18, 24).unwrap();
        let mapping = reg.mapping(DimensionId::Age).unwrap();
        let teen = mapping
            .entries
            .iter()
            .find(|e| e.query == QueryRule::Age(13, 14))
            .unwrap();
        assert_eq!(
            category_spec(&reg, &base, DimensionId::Age, teen).unwrap(),
            None
        );
    }

    #[test]
    fn backend_errors_propagate() {
        let reg = Registry::builtin();
        let err = compile_cell(
            &FixtureBackend::new(FixtureStore::default()),
            &reg,
            &us(),
            DimensionId::Gender,
        );
        assert!(matches!(err, Err(AnalysisError::Backend(_))));
    }
}
