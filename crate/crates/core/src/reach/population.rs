//! Seeded synthetic population with ground truth.
//!
//! Every individual has true (census-side) attributes. Individuals aged 13+
//! join the platform with a probability given by the bias model; platform
//! members carry *observed* attributes expressed in the platform's native
//! categories, which may be unknown or shifted relative to the truth.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ReachError;
use crate::model::{DimensionId, Gender, QueryRule, Registry, Side, Target, MIN_PLATFORM_AGE};

/// Dimensions stored per individual as category indices. Age and gender are
/// first-class fields.
pub const ATTRIBUTE_DIMENSIONS: [DimensionId; 5] = [
    DimensionId::Race,
    DimensionId::Income,
    DimensionId::Education,
    DimensionId::PoliticalLeaning,
    DimensionId::CountryOfOrigin,
];

const UNSPECIFIED_KEY: &str = "unspecified";
const MAX_INTERESTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub seed: u64,
    /// Number of ground-truth individuals across all states.
    pub size: usize,
    /// Relative state sizes; unlisted states weigh 1.0.
    #[serde(default)]
    pub state_weights: BTreeMap<String, f64>,
    /// Side of the square planar frame each state occupies, in miles.
    #[serde(default = "default_extent")]
    pub state_extent_miles: f64,
    /// Log-normal spread applied per state to attribute category weights,
    /// so that states differ from one another.
    #[serde(default)]
    pub state_variation: f64,
    pub age_bins: Vec<AgeBin>,
    pub gender: BTreeMap<String, f64>,
    #[serde(default)]
    pub attributes: BTreeMap<DimensionId, AttributeModel>,
    /// Official residents of each city; unlisted cities use the defaults.
    #[serde(default)]
    pub cities: BTreeMap<String, CityModel>,
    pub inclusion: InclusionModel,
    #[serde(default)]
    pub interests: Vec<InterestModel>,
}

fn default_extent() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBin {
    pub lo: u8,
    pub hi: u8,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeModel {
    /// Canonical category → relative weight.
    pub weights: BTreeMap<String, f64>,
    /// Weight of people with no canonical category (children's income,
    /// races outside the four tracked groups, native-born for origin).
    #[serde(default)]
    pub unspecified: f64,
    /// Probability a platform member's value is unknown to the platform.
    #[serde(default)]
    pub unknown_rate: f64,
    /// Probability the platform reports the next canonical bucket up.
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityModel {
    /// Fraction of the state's population living inside official borders.
    pub share: f64,
    /// Official borders are modeled as a disc of this radius.
    pub radius_miles: f64,
}

impl Default for CityModel {
    fn default() -> Self {
        CityModel {
            share: 0.08,
            radius_miles: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionModel {
    pub base: f64,
    /// Multiplicative factors keyed by dimension then category. Attribute
    /// dimensions use canonical ids (or `unspecified`), Age uses canonical
    /// age buckets, Gender uses `Male`/`Female`.
    #[serde(default)]
    pub factors: BTreeMap<DimensionId, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterestModel {
    pub name: String,
    pub rate: f64,
    /// Optional multipliers keyed like inclusion factors.
    #[serde(default)]
    pub by: BTreeMap<DimensionId, BTreeMap<String, f64>>,
}

impl PopulationConfig {
    pub fn builtin() -> PopulationConfig {
        serde_json::from_str(include_str!("../../data/population.json"))
            .expect("bundled population config is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PopulationConfig, ReachError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReachError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ReachError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub age: u8,
    pub gender: Gender,
    /// Index into the registry's state list.
    pub state: u16,
    /// Official city of residence (index into the population's city list).
    pub city: Option<u16>,
    /// Position in miles within the state's planar frame.
    pub position: (f64, f64),
    pub on_platform: bool,
    /// True canonical category per [`ATTRIBUTE_DIMENSIONS`] slot.
    pub truth: [Option<u16>; 5],
    /// Native platform category per slot as seen by the platform; `None`
    /// is unknown. Always `None` for non-members.
    pub observed: [Option<u16>; 5],
    /// Bit `i` set when interested in the population's `i`th interest.
    pub interests: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NativeCategory {
    pub id: String,
    pub canonical: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CityInfo {
    pub id: String,
    pub state: u16,
    pub center: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    config: PopulationConfig,
    individuals: Vec<Individual>,
    pub(crate) countries: Vec<String>,
    pub(crate) state_ids: Vec<String>,
    state_ranges: Vec<Range<usize>>,
    pub(crate) cities: Vec<CityInfo>,
    canonical: [Vec<String>; 5],
    pub(crate) natives: [Vec<NativeCategory>; 5],
    /// Native age categories with their targeting ranges.
    pub(crate) age_natives: Vec<(String, u8, u8)>,
    pub(crate) gender_natives: Vec<(String, Gender)>,
    /// Canonical age buckets (13+) with bounds; 65 means open-ended.
    age_buckets: Vec<(String, u8, u8)>,
    interests: Vec<String>,
}

pub(crate) fn slot(dim: DimensionId) -> Option<usize> {
    ATTRIBUTE_DIMENSIONS.iter().position(|d| *d == dim)
}

fn check_prob(what: &str, p: f64) -> Result<(), ReachError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ReachError::Config(format!(
            "{what} = {p} is not a probability"
        )))
    }
}

fn check_weight(what: &str, w: f64) -> Result<(), ReachError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(ReachError::Config(format!(
            "{what} = {w} must be a finite nonnegative weight"
        )))
    }
}

/// Resolved multiplier table: per dimension, factor by category index.
#[derive(Debug, Clone, Default)]
struct FactorTable {
    gender: [f64; 2],
    age: Vec<f64>,
    /// Per slot: canonical factors followed by the unspecified factor.
    attrs: [Vec<f64>; 5],
}

impl SyntheticPopulation {
    pub fn generate(
        config: &PopulationConfig,
        registry: &Registry,
    ) -> Result<SyntheticPopulation, ReachError> {
        let mut pop = SyntheticPopulation::skeleton(config, registry)?;
        pop.populate()?;
        Ok(pop)
    }

    /// Resolves vocabularies from the registry without generating anyone.
    fn skeleton(
        config: &PopulationConfig,
        registry: &Registry,
    ) -> Result<SyntheticPopulation, ReachError> {
        if registry.states().is_empty() {
            return Err(ReachError::Config("registry declares no states".into()));
        }
        if registry.states().len() > u16::MAX as usize
            || registry.cities().len() > u16::MAX as usize
        {
            return Err(ReachError::Config(
                "too many places for the synthetic backend".into(),
            ));
        }
        let state_ids: Vec<String> = registry.states().iter().map(|s| s.id.clone()).collect();
        let cities = registry
            .cities()
            .iter()
            .map(|c| CityInfo {
                id: c.id.clone(),
                state: registry.state_index(&c.state).expect("validated registry") as u16,
                center: c.center,
            })
            .collect();

        let mut canonical: [Vec<String>; 5] = Default::default();
        let mut natives: [Vec<NativeCategory>; 5] = Default::default();
        for (k, dim) in ATTRIBUTE_DIMENSIONS.into_iter().enumerate() {
            let Ok(d) = registry.dimension(dim) else {
                continue;
            };
            canonical[k] = d.canonical_ids().map(str::to_string).collect();
            let mapping = registry.mapping(dim)?;
            for e in mapping.platform_includes() {
                if let Target::Canonical(c) = &e.target {
                    let idx = d.position(c).expect("validated registry") as u16;
                    natives[k].push(NativeCategory {
                        id: e.source.clone(),
                        canonical: idx,
                    });
                }
            }
        }

        let mut age_natives = Vec::new();
        let mut age_buckets = Vec::new();
        if let Ok(mapping) = registry.mapping(DimensionId::Age) {
            for e in mapping.entries_on(Side::Platform) {
                if let QueryRule::Age(lo, hi) = e.query {
                    age_natives.push((e.source.clone(), lo, hi));
                    if let Target::Canonical(c) = &e.target {
                        age_buckets.push((c.clone(), lo, hi));
                    }
                }
            }
        }
        let mut gender_natives = Vec::new();
        if let Ok(mapping) = registry.mapping(DimensionId::Gender) {
            for e in mapping.entries_on(Side::Platform) {
                if let QueryRule::Gender(g) = e.query {
                    gender_natives.push((e.source.clone(), g));
                }
            }
        }

        if config.interests.len() > MAX_INTERESTS {
            return Err(ReachError::Config(format!(
                "at most {MAX_INTERESTS} interests are supported"
            )));
        }
        let interests = config.interests.iter().map(|i| i.name.clone()).collect();

        Ok(SyntheticPopulation {
            config: config.clone(),
            individuals: Vec::new(),
            countries: registry.countries().iter().map(|c| c.id.clone()).collect(),
            state_ids,
            state_ranges: Vec::new(),
            cities,
            canonical,
            natives,
            age_natives,
            gender_natives,
            age_buckets,
            interests,
        })
    }

    fn resolve_factors(
        &self,
        what: &str,
        table: &BTreeMap<DimensionId, BTreeMap<String, f64>>,
    ) -> Result<FactorTable, ReachError> {
        let mut out = FactorTable {
            gender: [1.0; 2],
            age: vec![1.0; self.age_buckets.len()],
            attrs: std::array::from_fn(|k| vec![1.0; self.canonical[k].len() + 1]),
        };
        for (dim, factors) in table {
            for (key, &f) in factors {
                check_weight(&format!("{what}.{dim}.{key}"), f)?;
                let unknown =
                    || ReachError::Config(format!("{what}: unknown {dim} category `{key}`"));
                match dim {
                    DimensionId::Gender => match key.as_str() {
                        "Male" => out.gender[0] = f,
                        "Female" => out.gender[1] = f,
                        _ => return Err(unknown()),
                    },
                    DimensionId::Age => {
                        let i = self
                            .age_buckets
                            .iter()
                            .position(|(c, _, _)| c == key)
                            .ok_or_else(unknown)?;
                        out.age[i] = f;
                    }
                    _ => {
                        let k = slot(*dim).expect("attribute dimension");
                        let i = if key == UNSPECIFIED_KEY {
                            self.canonical[k].len()
                        } else {
                            self.canonical[k]
                                .iter()
                                .position(|c| c == key)
                                .ok_or_else(unknown)?
                        };
                        out.attrs[k][i] = f;
                    }
                }
            }
        }
        Ok(out)
    }

    fn factor(&self, table: &FactorTable, ind: &Individual) -> f64 {
        let mut f = table.gender[(ind.gender == Gender::Female) as usize];
        if let Some(b) = self.age_bucket(ind.age) {
            f *= table.age[b];
        }
        for (k, t) in ind.truth.iter().enumerate() {
            let i = t.map_or(self.canonical[k].len(), |c| c as usize);
            f *= table.attrs[k][i];
        }
        f
    }

    fn populate(&mut self) -> Result<(), ReachError> {
        let config = self.config.clone();
        check_prob("inclusion.base", config.inclusion.base)?;
        if !(config.state_extent_miles.is_finite() && config.state_extent_miles > 0.0) {
            return Err(ReachError::Config(
                "state_extent_miles must be positive".into(),
            ));
        }
        check_weight("state_variation", config.state_variation)?;
        for key in config.state_weights.keys() {
            if !self.state_ids.contains(key) {
                return Err(ReachError::Config(format!(
                    "state_weights: unknown state `{key}`"
                )));
            }
        }
        for key in config.cities.keys() {
            if !self.cities.iter().any(|c| &c.id == key) {
                return Err(ReachError::Config(format!("cities: unknown city `{key}`")));
            }
        }

        if config.age_bins.is_empty() {
            return Err(ReachError::Config("age_bins is empty".into()));
        }
        for b in &config.age_bins {
            check_weight("age_bins.weight", b.weight)?;
            if b.lo > b.hi {
                return Err(ReachError::Config(format!(
                    "age bin {}-{} is empty",
                    b.lo, b.hi
                )));
            }
        }
        let age_dist = WeightedIndex::new(config.age_bins.iter().map(|b| b.weight))
            .map_err(|e| ReachError::Config(format!("age_bins: {e}")))?;

        let gender_w = [
            config.gender.get("Male").copied().unwrap_or(0.0),
            config.gender.get("Female").copied().unwrap_or(0.0),
        ];
        if config.gender.keys().any(|k| k != "Male" && k != "Female") {
            return Err(ReachError::Config(
                "gender weights must be keyed Male/Female".into(),
            ));
        }
        let gender_dist =
            WeightedIndex::new(gender_w).map_err(|e| ReachError::Config(format!("gender: {e}")))?;

        // Per slot: base weights over canonical categories + unspecified.
        let mut base_weights: [Vec<f64>; 5] = Default::default();
        let mut models: [AttributeModel; 5] = Default::default();
        for (dim, model) in &config.attributes {
            let k = slot(*dim).ok_or_else(|| {
                ReachError::Config(format!("attributes: {dim} is not an attribute dimension"))
            })?;
            check_prob(&format!("{dim}.unknown_rate"), model.unknown_rate)?;
            check_prob(&format!("{dim}.shift"), model.shift)?;
            check_weight(&format!("{dim}.unspecified"), model.unspecified)?;
            for (key, w) in &model.weights {
                check_weight(&format!("{dim}.{key}"), *w)?;
                if !self.canonical[k].contains(key) {
                    return Err(ReachError::Config(format!(
                        "{dim}: unknown canonical category `{key}`"
                    )));
                }
            }
            models[k] = model.clone();
        }
        for k in 0..ATTRIBUTE_DIMENSIONS.len() {
            let mut w: Vec<f64> = self.canonical[k]
                .iter()
                .map(|c| models[k].weights.get(c).copied().unwrap_or(0.0))
                .collect();
            // Dimensions without a model: everyone unspecified.
            let unspecified = if config.attributes.contains_key(&ATTRIBUTE_DIMENSIONS[k]) {
                models[k].unspecified
            } else {
                1.0
            };
            w.push(unspecified);
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(ReachError::Config(format!(
                    "{}: weights sum to zero",
                    ATTRIBUTE_DIMENSIONS[k]
                )));
            }
            base_weights[k] = w;
        }

        let inclusion = self.resolve_factors("inclusion", &config.inclusion.factors)?;
        let mut interest_tables = Vec::new();
        for i in &config.interests {
            check_prob(&format!("interest {}.rate", i.name), i.rate)?;
            interest_tables.push(self.resolve_factors(&format!("interest {}", i.name), &i.by)?);
        }

        // Largest-remainder apportionment of `size` over states.
        let weights: Vec<f64> = self
            .state_ids
            .iter()
            .map(|s| config.state_weights.get(s).copied().unwrap_or(1.0))
            .collect();
        for (s, w) in self.state_ids.iter().zip(&weights) {
            check_weight(&format!("state_weights.{s}"), *w)?;
        }
        let total_w: f64 = weights.iter().sum();
        if total_w <= 0.0 {
            return Err(ReachError::Config("state weights sum to zero".into()));
        }
        let quotas: Vec<f64> = weights
            .iter()
            .map(|w| config.size as f64 * w / total_w)
            .collect();
        let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - sizes[a] as f64;
            let rb = quotas[b] - sizes[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let assigned: usize = sizes.iter().sum();
        for &i in order.iter().take(config.size - assigned) {
            sizes[i] += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut individuals = Vec::with_capacity(config.size);
        let mut ranges = Vec::with_capacity(sizes.len());
        let extent = config.state_extent_miles;

        for (s, &n) in sizes.iter().enumerate() {
            let start = individuals.len();
            let mut dists = Vec::with_capacity(ATTRIBUTE_DIMENSIONS.len());
            for w in &base_weights {
                let varied: Vec<f64> = w
                    .iter()
                    .map(|x| {
                        let z: f64 = rng.sample(StandardNormal);
                        x * (config.state_variation * z).exp()
                    })
                    .collect();
                dists.push(WeightedIndex::new(varied).expect("positive weights"));
            }
            let state_cities: Vec<(u16, CityModel)> = self
                .cities
                .iter()
                .enumerate()
                .filter(|(_, c)| c.state as usize == s)
                .map(|(i, c)| {
                    (
                        i as u16,
                        config.cities.get(&c.id).copied().unwrap_or_default(),
                    )
                })
                .collect();
            let city_share: f64 = state_cities.iter().map(|(_, m)| m.share).sum();
            if city_share > 1.0 {
                return Err(ReachError::Config(format!(
                    "city shares in state {} sum to {city_share} > 1",
                    self.state_ids[s]
                )));
            }

            for _ in 0..n {
                let bin = &config.age_bins[age_dist.sample(&mut rng)];
                let age = rng.random_range(bin.lo..=bin.hi);
                let gender = if gender_dist.sample(&mut rng) == 0 {
                    Gender::Male
                } else {
                    Gender::Female
                };

                let mut truth = [None; 5];
                for (k, d) in dists.iter().enumerate() {
                    let i = d.sample(&mut rng);
                    if i < self.canonical[k].len() {
                        truth[k] = Some(i as u16);
                    }
                }

                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut city = None;
                for (ci, m) in &state_cities {
                    acc += m.share;
                    if u < acc {
                        city = Some((*ci, m.radius_miles));
                        break;
                    }
                }
                let position = match city {
                    Some((ci, r)) => {
                        let (cx, cy) = self.cities[ci as usize].center;
                        let rad = r * rng.random::<f64>().sqrt();
                        let theta = rng.random::<f64>() * std::f64::consts::TAU;
                        (cx + rad * theta.cos(), cy + rad * theta.sin())
                    }
                    None => (rng.random::<f64>() * extent, rng.random::<f64>() * extent),
                };

                let mut ind = Individual {
                    age,
                    gender,
                    state: s as u16,
                    city: city.map(|(ci, _)| ci),
                    position,
                    on_platform: false,
                    truth,
                    observed: [None; 5],
                    interests: 0,
                };

                for (bit, (model, table)) in
                    config.interests.iter().zip(&interest_tables).enumerate()
                {
                    let p = model.rate * self.factor(table, &ind);
                    if rng.random::<f64>() < p {
                        ind.interests |= 1 << bit;
                    }
                }

                if age >= MIN_PLATFORM_AGE {
                    let p = config.inclusion.base * self.factor(&inclusion, &ind);
                    ind.on_platform = rng.random::<f64>() < p;
                }
                if ind.on_platform {
                    for (k, model) in models.iter().enumerate() {
                        let Some(c) = ind.truth[k] else { continue };
                        if rng.random::<f64>() < model.unknown_rate {
                            continue;
                        }
                        let mut c = c;
                        if rng.random::<f64>() < model.shift
                            && (c as usize + 1) < self.canonical[k].len()
                        {
                            c += 1;
                        }
                        let candidates: Vec<u16> = self.natives[k]
                            .iter()
                            .enumerate()
                            .filter(|(_, n)| n.canonical == c)
                            .map(|(i, _)| i as u16)
                            .collect();
                        if !candidates.is_empty() {
                            ind.observed[k] =
                                Some(candidates[rng.random_range(0..candidates.len())]);
                        }
                    }
                }
                individuals.push(ind);
            }
            ranges.push(start..individuals.len());
        }

        self.individuals = individuals;
        self.state_ranges = ranges;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn config(&self) -> &PopulationConfig {
        &self.config
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn state_ids(&self) -> &[String] {
        &self.state_ids
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.state_ids.iter().position(|s| s == id)
    }

    /// Individuals of state `idx` are stored contiguously.
    pub fn state_range(&self, idx: usize) -> Range<usize> {
        self.state_ranges[idx].clone()
    }

    pub fn city_index(&self, id: &str) -> Option<usize> {
        self.cities.iter().position(|c| c.id == id)
    }

    pub fn city_center(&self, idx: usize) -> (f64, f64) {
        self.cities[idx].center
    }

    pub fn city_state(&self, idx: usize) -> usize {
        self.cities[idx].state as usize
    }

    pub fn canonical_categories(&self, dim: DimensionId) -> &[String] {
        slot(dim).map_or(&[], |k| &self.canonical[k])
    }

    /// Native platform category ids for an attribute dimension, in the
    /// order used by [`Individual::observed`].
    pub fn native_categories(&self, dim: DimensionId) -> Vec<&str> {
        slot(dim).map_or_else(Vec::new, |k| {
            self.natives[k].iter().map(|n| n.id.as_str()).collect()
        })
    }

    /// Canonical age bucket index for an age, if 13+.
    pub fn age_bucket(&self, age: u8) -> Option<usize> {
        self.age_buckets
            .iter()
            .position(|&(_, lo, hi)| age >= lo && (age <= hi || hi == crate::model::OPEN_AGE_CAP))
    }

    pub fn age_buckets(&self) -> impl Iterator<Item = &str> {
        self.age_buckets.iter().map(|(c, _, _)| c.as_str())
    }

    pub fn interests(&self) -> &[String] {
        &self.interests
    }

    pub fn interest_index(&self, name: &str) -> Option<usize> {
        self.interests.iter().position(|i| i == name)
    }

    /// Dumps every individual as CSV; identical configs give identical bytes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReachError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| ReachError::Io(e.to_string());
        let mut header = vec![
            "state".to_string(),
            "age".into(),
            "gender".into(),
            "city".into(),
            "x".into(),
            "y".into(),
            "on_platform".into(),
        ];
        for d in ATTRIBUTE_DIMENSIONS {
            header.push(format!("{d}.truth"));
            header.push(format!("{d}.observed"));
        }
        header.push("interests".into());
        w.write_record(&header).map_err(io)?;
        for ind in &self.individuals {
            let mut rec = vec![
                self.state_ids[ind.state as usize].clone(),
                ind.age.to_string(),
                ind.gender.as_str().to_string(),
                ind.city
                    .map_or_else(String::new, |c| self.cities[c as usize].id.clone()),
                format!("{:.6}", ind.position.0),
                format!("{:.6}", ind.position.1),
                ind.on_platform.to_string(),
            ];
            for k in 0..ATTRIBUTE_DIMENSIONS.len() {
                rec.push(
                    ind.truth[k]
                        .map_or_else(String::new, |c| self.canonical[k][c as usize].clone()),
                );
                rec.push(
                    ind.observed[k]
                        .map_or_else(String::new, |c| self.natives[k][c as usize].id.clone()),
                );
            }
            rec.push(format!("{:x}", ind.interests));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| ReachError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, size: usize) -> SyntheticPopulation {
        let mut config = PopulationConfig::builtin();
        config.seed = seed;
        config.size = size;
        SyntheticPopulation::generate(&config, &Registry::builtin()).unwrap()
    }

    #[test]
    fn sizes_and_state_layout() {
        let pop = small(1, 5_100);
        assert_eq!(pop.individuals().len(), 5_100);
        let covered: usize = (0..pop.state_ids().len())
            .map(|s| pop.state_range(s).len())
            .sum();
        assert_eq!(covered, 5_100);
        for s in 0..pop.state_ids().len() {
            for ind in &pop.individuals()[pop.state_range(s)] {
                assert_eq!(ind.state as usize, s);
            }
        }
    }

    #[test]
    fn platform_members_are_13_plus() {
        let pop = small(2, 20_000);
        assert!(pop.individuals().iter().any(|i| i.age < 13));
        for ind in pop.individuals() {
            if ind.on_platform {
                assert!(ind.age >= 13);
            } else {
                assert!(ind.observed.iter().all(Option::is_none));
            }
        }
    }

    #[test]
    fn regeneration_is_byte_stable() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        small(9, 3_000).write_csv(&mut a).unwrap();
        small(9, 3_000).write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        small(10, 3_000).write_csv(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_config_rejected() {
        let reg = Registry::builtin();
        let mut config = PopulationConfig::builtin();
        config.inclusion.base = 1.5;
        assert!(matches!(
            SyntheticPopulation::generate(&config, &reg),
            Err(ReachError::Config(_))
        ));

        let mut config = PopulationConfig::builtin();
        config
            .attributes
            .get_mut(&DimensionId::Race)
            .unwrap()
            .weights
            .insert("Martian".into(), 1.0);
        assert!(matches!(
            SyntheticPopulation::generate(&config, &reg),
            Err(ReachError::Config(_))
        ));

        let mut config = PopulationConfig::builtin();
        config.state_weights.insert("ZZ".into(), 1.0);
        assert!(SyntheticPopulation::generate(&config, &reg).is_err());
    }

    #[test]
    fn white_has_no_native_category() {
        let pop = small(3, 10_000);
        let k = slot(DimensionId::Race).unwrap();
        let white = pop
            .canonical_categories(DimensionId::Race)
            .iter()
            .position(|c| c == "White")
            .unwrap() as u16;
        for ind in pop.individuals() {
            if ind.truth[k] == Some(white) {
                assert_eq!(ind.observed[k], None);
            }
        }
    }
}
