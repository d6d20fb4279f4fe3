//! Versioned vocabulary registry.
//!
//! The registry is a JSON-lines file: one record per line, discriminated by
//! `kind`. Blank lines and lines starting with `//` are ignored. The first
//! record must be `{"kind":"registry","version":"..."}`.
//!
//! ```text
//! {"kind":"registry","version":"2018.1"}
//! {"kind":"dimension","id":"Education","exhaustive":false}
//! {"kind":"canonical","dimension":"Education","id":"HighSchool","label":"High School"}
//! {"kind":"category","dimension":"Education","side":"Platform","id":"High school grad","canonical":"HighSchool"}
//! {"kind":"category","dimension":"Education","side":"Census","id":"High school graduate (includes equivalency)","canonical":"HighSchool","group":"25+"}
//! {"kind":"state","id":"WV","name":"West Virginia"}
//! {"kind":"city","id":"arlington_tx","name":"Arlington","state":"TX","center":[120.0,80.0]}
//! {"kind":"origin","id":"China","region":"South and East Asia"}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dimension::{
    Category, CategoryMapping, Dimension, DimensionId, MappingEntry, QueryRule, Side, Target,
};
use super::geo::{GeoLevel, GeoScope};
use super::ModelError;

const BUILTIN: &str = include_str!("../../data/registry.jsonl");

/// Canonical education categories; every registry must declare exactly these.
pub const EDUCATION_CANONICAL: [&str; 5] = [
    "IncompleteHS",
    "HighSchool",
    "SomeCollege",
    "College",
    "GradDegree",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Registry {
        version: String,
    },
    Dimension {
        id: DimensionId,
        exhaustive: bool,
        /// Require every canonical category to be covered on both sides.
        #[serde(default)]
        total: bool,
    },
    Canonical {
        dimension: DimensionId,
        id: String,
        #[serde(default)]
        label: Option<String>,
    },
    Category {
        dimension: DimensionId,
        side: Side,
        id: String,
        /// `null` routes the category into `unspecified`.
        canonical: Option<String>,
        #[serde(default)]
        share: Option<[u64; 2]>,
        #[serde(default)]
        group: Option<String>,
        #[serde(default)]
        query: Option<QueryRule>,
        #[serde(default)]
        label: Option<String>,
    },
    Country {
        id: String,
        name: String,
    },
    State {
        id: String,
        name: String,
    },
    City {
        id: String,
        name: String,
        state: String,
        center: [f64; 2],
    },
    Origin {
        id: String,
        region: String,
        #[serde(default)]
        aliases: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceEntry {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityEntry {
    pub id: String,
    pub name: String,
    pub state: String,
    /// Planar position in miles within the state's coordinate frame.
    pub center: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginEntry {
    pub id: String,
    pub region: String,
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Registry {
    version: String,
    dimensions: BTreeMap<DimensionId, Dimension>,
    mappings: BTreeMap<DimensionId, CategoryMapping>,
    countries: Vec<PlaceEntry>,
    states: Vec<PlaceEntry>,
    cities: Vec<CityEntry>,
    origins: Vec<OriginEntry>,
}

impl Registry {
    /// The registry shipped with the crate (US geography, 2018 vocabularies).
    pub fn builtin() -> Registry {
        Registry::parse(BUILTIN).expect("bundled registry is valid")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Registry, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Registry::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Registry, ModelError> {
        let mut version = None;
        let mut dimensions: BTreeMap<DimensionId, Dimension> = BTreeMap::new();
        let mut totals: BTreeSet<DimensionId> = BTreeSet::new();
        let mut mappings: BTreeMap<DimensionId, CategoryMapping> = BTreeMap::new();
        let mut countries = Vec::new();
        let mut states = Vec::new();
        let mut cities = Vec::new();
        let mut origins: Vec<OriginEntry> = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let record: Record = serde_json::from_str(line)
                .map_err(|e| ModelError::InvalidRegistry(format!("line {}: {e}", lineno + 1)))?;
            let at =
                |msg: String| ModelError::InvalidRegistry(format!("line {}: {msg}", lineno + 1));
            if version.is_none() && !matches!(record, Record::Registry { .. }) {
                return Err(at("first record must declare the registry version".into()));
            }
            match record {
                Record::Registry { version: v } => {
                    if version.replace(v).is_some() {
                        return Err(at("registry version declared twice".into()));
                    }
                }
                Record::Dimension {
                    id,
                    exhaustive,
                    total,
                } => {
                    if dimensions.contains_key(&id) {
                        return Err(at(format!("dimension {id} declared twice")));
                    }
                    dimensions.insert(
                        id,
                        Dimension {
                            id,
                            categories: Vec::new(),
                            exhaustive,
                        },
                    );
                    if total {
                        totals.insert(id);
                    }
                }
                Record::Canonical {
                    dimension,
                    id,
                    label,
                } => {
                    let dim = dimensions
                        .get_mut(&dimension)
                        .ok_or_else(|| at(format!("dimension {dimension} not declared")))?;
                    if dim.has_canonical(&id) {
                        return Err(at(format!("{dimension}: canonical `{id}` declared twice")));
                    }
                    dim.categories.push(Category {
                        id,
                        side: Side::Canonical,
                        labels: label.into_iter().collect(),
                    });
                }
                Record::Category {
                    dimension,
                    side,
                    id,
                    canonical,
                    share,
                    group,
                    query,
                    label: _,
                } => {
                    if !dimensions.contains_key(&dimension) {
                        return Err(at(format!("dimension {dimension} not declared")));
                    }
                    if side == Side::Platform && id.contains([';', '=']) {
                        return Err(at(format!("platform category `{id}` contains `;` or `=`")));
                    }
                    mappings
                        .entry(dimension)
                        .or_insert_with(|| CategoryMapping::new(dimension))
                        .entries
                        .push(MappingEntry {
                            source: id,
                            side,
                            target: canonical.map_or(Target::Unspecified, Target::Canonical),
                            share: share.map(|[n, d]| (n, d)),
                            group,
                            query: query.unwrap_or(QueryRule::Include),
                        });
                }
                Record::Country { id, name } => countries.push(PlaceEntry { id, name }),
                Record::State { id, name } => states.push(PlaceEntry { id, name }),
                Record::City {
                    id,
                    name,
                    state,
                    center,
                } => cities.push(CityEntry {
                    id,
                    name,
                    state,
                    center: (center[0], center[1]),
                }),
                Record::Origin {
                    id,
                    region,
                    aliases,
                } => {
                    if origins.iter().any(|o| o.id == id) {
                        return Err(at(format!("origin `{id}` declared twice")));
                    }
                    origins.push(OriginEntry {
                        id,
                        region,
                        aliases,
                    })
                }
            }
        }

        let version =
            version.ok_or_else(|| ModelError::InvalidRegistry("empty registry".into()))?;

        if !origins.is_empty() {
            let dim = dimensions
                .entry(DimensionId::CountryOfOrigin)
                .or_insert_with(|| Dimension {
                    id: DimensionId::CountryOfOrigin,
                    categories: Vec::new(),
                    exhaustive: false,
                });
            let mapping = mappings
                .entry(DimensionId::CountryOfOrigin)
                .or_insert_with(|| CategoryMapping::new(DimensionId::CountryOfOrigin));
            for o in &origins {
                if !dim.has_canonical(&o.id) {
                    dim.categories.push(Category {
                        id: o.id.clone(),
                        side: Side::Canonical,
                        labels: vec![o.region.clone()],
                    });
                }
                for side in [Side::Platform, Side::Census] {
                    if mapping.entry(side, &o.id).is_none() {
                        mapping.entries.push(MappingEntry {
                            source: o.id.clone(),
                            side,
                            target: Target::Canonical(o.id.clone()),
                            share: None,
                            group: None,
                            query: QueryRule::Include,
                        });
                    }
                }
            }
        }

        let registry = Registry {
            version,
            dimensions,
            mappings,
            countries,
            states,
            cities,
            origins,
        };
        registry.validate(&totals)?;
        Ok(registry)
    }

    fn validate(&self, totals: &BTreeSet<DimensionId>) -> Result<(), ModelError> {
        let mut place_ids = BTreeSet::new();
        for p in self.countries.iter().chain(&self.states) {
            if !place_ids.insert(p.id.as_str()) {
                return Err(ModelError::InvalidRegistry(format!(
                    "place `{}` declared twice",
                    p.id
                )));
            }
        }
        for c in &self.cities {
            if !place_ids.insert(c.id.as_str()) {
                return Err(ModelError::InvalidRegistry(format!(
                    "place `{}` declared twice",
                    c.id
                )));
            }
            if !self.states.iter().any(|s| s.id == c.state) {
                return Err(ModelError::InvalidRegistry(format!(
                    "city `{}` references unknown state `{}`",
                    c.id, c.state
                )));
            }
        }
        for (id, dim) in &self.dimensions {
            if dim.categories.is_empty() {
                return Err(ModelError::InvalidRegistry(format!(
                    "dimension {id} has no canonical categories"
                )));
            }
            let Some(mapping) = self.mappings.get(id) else {
                return Err(ModelError::InvalidRegistry(format!(
                    "dimension {id} has no mapping"
                )));
            };
            mapping.validate(dim)?;

            let must_be_total = totals.contains(id) || *id == DimensionId::Education;
            if must_be_total {
                for side in [Side::Platform, Side::Census] {
                    let missing = mapping.uncovered(dim, side);
                    if !missing.is_empty() {
                        return Err(ModelError::InvalidRegistry(format!(
                            "{id}: canonical categories {missing:?} have no {side:?} source"
                        )));
                    }
                }
            }

            let residuals = mapping
                .entries_on(Side::Platform)
                .filter(|e| e.query == QueryRule::Residual)
                .count();
            if residuals > 1 {
                return Err(ModelError::InvalidRegistry(format!(
                    "{id}: at most one residual platform category is allowed"
                )));
            }
            for e in mapping.entries_on(Side::Platform) {
                let ok = match e.query {
                    QueryRule::Include | QueryRule::Residual => true,
                    QueryRule::Age(lo, hi) => {
                        *id == DimensionId::Age && lo >= 13 && lo <= hi && hi <= 65
                    }
                    QueryRule::Gender(_) => *id == DimensionId::Gender,
                };
                if !ok {
                    return Err(ModelError::InvalidRegistry(format!(
                        "{id}: platform category `{}` has an invalid query rule {:?}",
                        e.source, e.query
                    )));
                }
            }
        }
        if let Some(edu) = self.dimensions.get(&DimensionId::Education) {
            let declared: BTreeSet<&str> = edu.canonical_ids().collect();
            let expected: BTreeSet<&str> = EDUCATION_CANONICAL.into_iter().collect();
            if declared != expected {
                return Err(ModelError::InvalidRegistry(format!(
                    "Education canonical set must be {expected:?}, found {declared:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn dimension(&self, id: DimensionId) -> Result<&Dimension, ModelError> {
        self.dimensions
            .get(&id)
            .ok_or_else(|| ModelError::UnknownDimension(id.to_string()))
    }

    pub fn mapping(&self, id: DimensionId) -> Result<&CategoryMapping, ModelError> {
        self.mappings
            .get(&id)
            .ok_or_else(|| ModelError::UnknownDimension(id.to_string()))
    }

    pub fn dimensions(&self) -> impl Iterator<Item = &Dimension> {
        self.dimensions.values()
    }

    pub fn countries(&self) -> &[PlaceEntry] {
        &self.countries
    }

    pub fn states(&self) -> &[PlaceEntry] {
        &self.states
    }

    pub fn cities(&self) -> &[CityEntry] {
        &self.cities
    }

    pub fn origins(&self) -> &[OriginEntry] {
        &self.origins
    }

    pub fn city(&self, id: &str) -> Option<&CityEntry> {
        self.cities.iter().find(|c| c.id == id)
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    /// Resolves a country-of-origin name (id, or any alias, case-insensitive).
    pub fn resolve_origin(&self, name: &str) -> Option<&OriginEntry> {
        let name = name.trim();
        self.origins.iter().find(|o| {
            o.id.eq_ignore_ascii_case(name)
                || o.aliases.iter().any(|a| a.eq_ignore_ascii_case(name))
        })
    }

    /// Country of origin → region, for regional roll-ups.
    pub fn region_map(&self) -> BTreeMap<String, String> {
        self.origins
            .iter()
            .map(|o| (o.id.clone(), o.region.clone()))
            .collect()
    }

    pub fn check_geo(&self, geo: &GeoScope) -> Result<(), ModelError> {
        let known = match geo.level() {
            GeoLevel::Country => self.countries.iter().any(|c| c.id == geo.name()),
            GeoLevel::State => self.states.iter().any(|s| s.id == geo.name()),
            GeoLevel::City => self.cities.iter().any(|c| c.id == geo.name()),
        };
        if known {
            Ok(())
        } else {
            Err(ModelError::GeographyUnknown(geo.to_string()))
        }
    }

    /// Every registered place at `level`; cities get `radius_miles`.
    pub fn geos_at(&self, level: GeoLevel, radius_miles: u32) -> Result<Vec<GeoScope>, ModelError> {
        match level {
            GeoLevel::Country => self
                .countries
                .iter()
                .map(|c| GeoScope::country(&c.id))
                .collect(),
            GeoLevel::State => self.states.iter().map(|s| GeoScope::state(&s.id)).collect(),
            GeoLevel::City => self
                .cities
                .iter()
                .map(|c| GeoScope::city(&c.id, radius_miles))
                .collect(),
        }
    }

    /// One-line-per-dimension summary for the `validate-registry` command.
    pub fn summary(&self) -> Vec<String> {
        let mut out = vec![format!(
            "registry {}: {} countries, {} states, {} cities, {} origins",
            self.version,
            self.countries.len(),
            self.states.len(),
            self.cities.len(),
            self.origins.len()
        )];
        for dim in self.dimensions.values() {
            let mapping = &self.mappings[&dim.id];
            out.push(format!(
                "{}: {} canonical, {} platform, {} census, exhaustive={}",
                dim.id,
                dim.categories.len(),
                mapping.entries_on(Side::Platform).count(),
                mapping.entries_on(Side::Census).count(),
                dim.exhaustive
            ));
        }
        out
    }
}
