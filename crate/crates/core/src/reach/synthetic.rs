use std::ops::Range;
use std::sync::Arc;

use super::population::{slot, Individual, SyntheticPopulation, ATTRIBUTE_DIMENSIONS};
use super::{floored, ReachBackend, ReachError, ReachEstimate, RoundPolicy, Source};
use crate::model::{
    AgeRange, AttributeKey, DimensionId, Gender, GeoLevel, GeoScope, TargetingSpec, OPEN_AGE_CAP,
};

/// Reach oracle over a [`SyntheticPopulation`].
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    population: Arc<SyntheticPopulation>,
    floor: bool,
    round: RoundPolicy,
}

impl SyntheticBackend {
    pub fn new(population: Arc<SyntheticPopulation>) -> Self {
        SyntheticBackend {
            population,
            floor: true,
            round: RoundPolicy::Identity,
        }
    }

    /// Disabling the floor exposes raw matched counts; such estimates no
    /// longer behave like the platform and exist for oracle comparisons.
    pub fn with_floor(mut self, enabled: bool) -> Self {
        self.floor = enabled;
        self
    }

    pub fn with_round_policy(mut self, round: RoundPolicy) -> Self {
        self.round = round;
        self
    }

    pub fn population(&self) -> &SyntheticPopulation {
        &self.population
    }
}

impl ReachBackend for SyntheticBackend {
    fn reach(&self, spec: &TargetingSpec) -> Result<ReachEstimate, ReachError> {
        let raw = self.population.true_count(spec)?;
        let (count, floor_applied) = if self.floor {
            floored(raw, self.round)
        } else {
            (self.round.apply(raw), false)
        };
        Ok(ReachEstimate {
            spec: spec.clone(),
            count,
            floor_applied,
            ambiguous_floor: false,
            source: Source::Synthetic,
        })
    }

    fn source(&self) -> Source {
        Source::Synthetic
    }
}

/// A spec resolved against the population's vocabularies.
struct Query {
    range: Range<usize>,
    disc: Option<Disc>,
    age: AgeRange,
    gender: Gender,
    /// Per attribute slot, allowed native indices (union). `Some(empty)`
    /// matches nobody.
    include: [Option<Vec<u16>>; 5],
    exclude: [Vec<u16>; 5],
    /// Extra includes: every bit must be set. `None` when an include names
    /// an interest the population does not model.
    interest_all: Option<u64>,
    interest_none: u64,
    /// Age/gender given as native include categories.
    age_sets: Option<Vec<(u8, u8)>>,
    gender_sets: Option<Vec<Gender>>,
    age_excl: Vec<(u8, u8)>,
    gender_excl: Vec<Gender>,
}

fn in_disc(ind: &Individual, disc: Option<Disc>) -> bool {
    match disc {
        None => true,
        Some(((cx, cy), r)) => {
            let (dx, dy) = (ind.position.0 - cx, ind.position.1 - cy);
            dx * dx + dy * dy <= r * r
        }
    }
}

fn in_range(age: u8, (lo, hi): (u8, u8)) -> bool {
    age >= lo && (age <= hi || hi == OPEN_AGE_CAP)
}

/// Center and radius in miles.
type Disc = ((f64, f64), f64);

/// Category index of an individual, `None` for unspecified.
type Classifier<'a> = Box<dyn Fn(&Individual) -> Option<usize> + 'a>;

impl SyntheticPopulation {
    /// Storage range and optional disc `(center, radius)` covering `geo`.
    fn locate(&self, geo: &GeoScope) -> Result<(Range<usize>, Option<Disc>), ReachError> {
        let unknown = || ReachError::GeographyUnknown(geo.to_string());
        Ok(match geo.level() {
            GeoLevel::Country => {
                if !self.countries.iter().any(|c| c == geo.name()) {
                    return Err(unknown());
                }
                (0..self.individuals().len(), None)
            }
            GeoLevel::State => {
                let s = self.state_index(geo.name()).ok_or_else(unknown)?;
                (self.state_range(s), None)
            }
            GeoLevel::City => {
                let c = self.city_index(geo.name()).ok_or_else(unknown)?;
                let radius = geo.radius_miles().expect("cities carry a radius") as f64;
                (
                    self.state_range(self.city_state(c)),
                    Some((self.city_center(c), radius)),
                )
            }
        })
    }

    /// Everyone living in `geo`, platform members or not. Cities use the
    /// same closed disc as targeting.
    pub fn residents<'a>(
        &'a self,
        geo: &GeoScope,
    ) -> Result<impl Iterator<Item = &'a Individual> + 'a, ReachError> {
        let (range, disc) = self.locate(geo)?;
        Ok(self.individuals()[range]
            .iter()
            .filter(move |ind| in_disc(ind, disc)))
    }

    /// Ground-truth distribution of all residents of `geo` over the
    /// canonical categories of `dim`: `(category, persons)` in registry
    /// order, plus the unclassified count (ages under 13, races outside
    /// the canonical set, and so on). `gender` restricts the residents
    /// counted unless it is `All`.
    pub fn truth_counts(
        &self,
        geo: &GeoScope,
        dim: DimensionId,
        gender: Gender,
    ) -> Result<(Vec<(String, u64)>, u64), ReachError> {
        let (labels, index): (Vec<String>, Classifier) = match dim {
            DimensionId::Age => (
                self.age_buckets().map(str::to_string).collect(),
                Box::new(|ind: &Individual| self.age_bucket(ind.age)),
            ),
            DimensionId::Gender => (
                vec!["Male".to_string(), "Female".to_string()],
                Box::new(|ind: &Individual| match ind.gender {
                    Gender::Male => Some(0),
                    Gender::Female => Some(1),
                    Gender::All => None,
                }),
            ),
            other => {
                let k = slot(other).expect("attribute dimension");
                (
                    self.canonical_categories(other).to_vec(),
                    Box::new(move |ind: &Individual| ind.truth[k].map(usize::from)),
                )
            }
        };
        let mut counts = vec![0u64; labels.len()];
        let mut unspecified = 0u64;
        for ind in self
            .residents(geo)?
            .filter(|i| gender == Gender::All || i.gender == gender)
        {
            match index(ind) {
                Some(i) => counts[i] += 1,
                None => unspecified += 1,
            }
        }
        Ok((labels.into_iter().zip(counts).collect(), unspecified))
    }

    fn resolve(&self, spec: &TargetingSpec) -> Result<Query, ReachError> {
        let (range, disc) = self.locate(spec.geo())?;

        let mut q = Query {
            range,
            disc,
            age: spec.age(),
            gender: spec.gender(),
            include: Default::default(),
            exclude: Default::default(),
            interest_all: Some(0),
            interest_none: 0,
            age_sets: None,
            gender_sets: None,
            age_excl: Vec::new(),
            gender_excl: Vec::new(),
        };

        for c in spec.includes() {
            match &c.key {
                AttributeKey::Extra(name) => match self.interest_index(name) {
                    Some(i) => q.interest_all = q.interest_all.map(|m| m | (1 << i)),
                    None => q.interest_all = None,
                },
                AttributeKey::Demographic(DimensionId::Age) => {
                    let set = q.age_sets.get_or_insert_with(Vec::new);
                    if let Some((_, lo, hi)) =
                        self.age_natives.iter().find(|(id, _, _)| *id == c.category)
                    {
                        set.push((*lo, *hi));
                    }
                }
                AttributeKey::Demographic(DimensionId::Gender) => {
                    let set = q.gender_sets.get_or_insert_with(Vec::new);
                    if let Some((_, g)) =
                        self.gender_natives.iter().find(|(id, _)| *id == c.category)
                    {
                        set.push(*g);
                    }
                }
                AttributeKey::Demographic(dim) => {
                    let k = slot(*dim).expect("attribute dimension");
                    let set = q.include[k].get_or_insert_with(Vec::new);
                    if let Some(i) = self.natives[k].iter().position(|n| n.id == c.category) {
                        set.push(i as u16);
                    }
                }
            }
        }
        for c in spec.excludes() {
            match &c.key {
                AttributeKey::Extra(name) => {
                    if let Some(i) = self.interest_index(name) {
                        q.interest_none |= 1 << i;
                    }
                }
                AttributeKey::Demographic(DimensionId::Age) => {
                    if let Some((_, lo, hi)) =
                        self.age_natives.iter().find(|(id, _, _)| *id == c.category)
                    {
                        q.age_excl.push((*lo, *hi));
                    }
                }
                AttributeKey::Demographic(DimensionId::Gender) => {
                    if let Some((_, g)) =
                        self.gender_natives.iter().find(|(id, _)| *id == c.category)
                    {
                        q.gender_excl.push(*g);
                    }
                }
                AttributeKey::Demographic(dim) => {
                    let k = slot(*dim).expect("attribute dimension");
                    if let Some(i) = self.natives[k].iter().position(|n| n.id == c.category) {
                        q.exclude[k].push(i as u16);
                    }
                }
            }
        }
        Ok(q)
    }

    /// Exact number of platform members matching `spec`, before any floor.
    ///
    /// City membership is the closed disc of the spec's radius around the
    /// registered city center, regardless of official residence.
    pub fn true_count(&self, spec: &TargetingSpec) -> Result<u64, ReachError> {
        let q = self.resolve(spec)?;
        let Some(interest_all) = q.interest_all else {
            return Ok(0);
        };
        let slots = ATTRIBUTE_DIMENSIONS.len();
        let count = self.individuals()[q.range.clone()]
            .iter()
            .filter(|ind| {
                if !ind.on_platform || !q.age.contains(ind.age) {
                    return false;
                }
                if q.gender != Gender::All && ind.gender != q.gender {
                    return false;
                }
                if !in_disc(ind, q.disc) {
                    return false;
                }
                if ind.interests & interest_all != interest_all
                    || ind.interests & q.interest_none != 0
                {
                    return false;
                }
                if let Some(sets) = &q.age_sets {
                    if !sets.iter().any(|r| in_range(ind.age, *r)) {
                        return false;
                    }
                }
                if q.age_excl.iter().any(|r| in_range(ind.age, *r)) {
                    return false;
                }
                if let Some(sets) = &q.gender_sets {
                    if !sets.contains(&ind.gender) {
                        return false;
                    }
                }
                if q.gender_excl.contains(&ind.gender) {
                    return false;
                }
                (0..slots).all(|k| {
                    let obs = ind.observed[k];
                    let included = match &q.include[k] {
                        None => true,
                        Some(set) => obs.is_some_and(|o| set.contains(&o)),
                    };
                    included && !obs.is_some_and(|o| q.exclude[k].contains(&o))
                })
            })
            .count();
        Ok(count as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Registry;
    use crate::reach::{PopulationConfig, PRIVACY_FLOOR};

    fn backend(size: usize) -> SyntheticBackend {
        let mut config = PopulationConfig::builtin();
        config.size = size;
        let pop = SyntheticPopulation::generate(&config, &Registry::builtin()).unwrap();
        SyntheticBackend::new(Arc::new(pop))
    }

    fn us() -> TargetingSpec {
        TargetingSpec::new(GeoScope::country("US").unwrap())
    }

    #[test]
    fn empty_audience_is_floored() {
        let b = backend(20_000);
        let spec = us()
            .with_include(AttributeKey::Extra("nonexistent".into()), "yes")
            .unwrap();
        let est = b.reach(&spec).unwrap();
        assert_eq!(est.count, PRIVACY_FLOOR);
        assert!(est.floor_applied);
    }

    #[test]
    fn whole_population_is_not_floored() {
        let b = backend(20_000);
        let members = b
            .population()
            .individuals()
            .iter()
            .filter(|i| i.on_platform)
            .count() as u64;
        let est = b.reach(&us()).unwrap();
        assert_eq!(est.count, members);
        assert!(!est.floor_applied);
    }

    #[test]
    fn unknown_geography() {
        let b = backend(2_000);
        let spec = TargetingSpec::new(GeoScope::state("Atlantis").unwrap());
        assert!(matches!(
            b.reach(&spec),
            Err(ReachError::GeographyUnknown(_))
        ));
    }

    #[test]
    fn floor_disabled_reports_raw() {
        let b = backend(2_000).with_floor(false);
        let spec = TargetingSpec::new(GeoScope::state("WY").unwrap());
        let est = b.reach(&spec).unwrap();
        assert!(est.count < PRIVACY_FLOOR);
        assert!(!est.floor_applied);
    }

    #[test]
    fn truth_counts_cover_every_resident() {
        let b = backend(20_000);
        let pop = b.population();
        let us = GeoScope::country("US").unwrap();
        for dim in DimensionId::ALL {
            let (cells, unspecified) = pop.truth_counts(&us, dim, Gender::All).unwrap();
            let sum: u64 = cells.iter().map(|c| c.1).sum::<u64>() + unspecified;
            assert_eq!(sum, 20_000, "{dim}");
        }
        let (age, under_13) = pop
            .truth_counts(&us, DimensionId::Age, Gender::All)
            .unwrap();
        assert_eq!(age[0].0, "13-14");
        assert_eq!(
            under_13,
            pop.individuals().iter().filter(|i| i.age < 13).count() as u64
        );
    }

    #[test]
    fn bigger_radius_contains_smaller() {
        let b = backend(200_000).with_floor(false);
        for city in [
            "fort_worth_tx",
            "arlington_tx",
            "new_york_ny",
            "minneapolis_mn",
        ] {
            let small = b
                .reach(&TargetingSpec::new(GeoScope::city(city, 10).unwrap()))
                .unwrap();
            let big = b
                .reach(&TargetingSpec::new(GeoScope::city(city, 30).unwrap()))
                .unwrap();
            assert!(small.count <= big.count, "{city}");
        }
    }
}
