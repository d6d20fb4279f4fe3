//! Targeting formulas.
//!
//! A [`TargetingSpec`] is a conjunctive audience definition: a geography, an
//! age range, a gender, and sets of included and excluded attributes.
//! Includes within one dimension are a union; different dimensions intersect.
//! Excludes remove only positively classified users.
//!
//! Specs have a canonical textual key used to address recorded fixtures:
//!
//! ```text
//! state:WV;age=13-65;gender=all;+Race=hispanic;-Race=asian_american;+x.coffee=yes
//! ```
//!
//! Constraints are rendered sorted, so the key does not depend on the order
//! in which constraints were added.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dimension::{DimensionId, Gender};
use super::geo::GeoScope;
use super::ModelError;

/// The platform does not admit users under this age.
pub const MIN_PLATFORM_AGE: u8 = 13;
/// Upper age bound; as a maximum it means "this age and over".
pub const OPEN_AGE_CAP: u8 = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgeRange {
    lo: u8,
    hi: u8,
}

impl AgeRange {
    pub fn new(lo: u8, hi: u8) -> Result<Self, ModelError> {
        if lo < MIN_PLATFORM_AGE {
            return Err(ModelError::InvalidSpec(format!(
                "minimum age {lo} is below the platform floor of {MIN_PLATFORM_AGE}"
            )));
        }
        if hi > OPEN_AGE_CAP {
            return Err(ModelError::InvalidSpec(format!(
                "maximum age {hi} exceeds the open-ended cap {OPEN_AGE_CAP}"
            )));
        }
        if lo > hi {
            return Err(ModelError::InvalidSpec(format!(
                "empty age range {lo}-{hi}"
            )));
        }
        Ok(AgeRange { lo, hi })
    }

    pub fn all() -> Self {
        AgeRange {
            lo: MIN_PLATFORM_AGE,
            hi: OPEN_AGE_CAP,
        }
    }

    pub fn lo(&self) -> u8 {
        self.lo
    }

    pub fn hi(&self) -> u8 {
        self.hi
    }

    pub fn contains(&self, age: u8) -> bool {
        age >= self.lo && (age <= self.hi || self.hi == OPEN_AGE_CAP)
    }
}

/// Which attribute a constraint refers to. `Extra` carries any of the
/// platform's many interest/behavior attributes; the model does not
/// interpret them, backends may.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeKey {
    Demographic(DimensionId),
    Extra(String),
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeKey::Demographic(d) => write!(f, "{d}"),
            AttributeKey::Extra(name) => write!(f, "x.{name}"),
        }
    }
}

impl FromStr for AttributeKey {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("x.") {
            Some(name) if !name.is_empty() => Ok(AttributeKey::Extra(name.to_string())),
            Some(_) => Err(ModelError::InvalidSpec("empty extra attribute name".into())),
            None => Ok(AttributeKey::Demographic(s.parse()?)),
        }
    }
}

impl From<DimensionId> for AttributeKey {
    fn from(value: DimensionId) -> Self {
        AttributeKey::Demographic(value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub key: AttributeKey,
    pub category: String,
}

impl Constraint {
    pub fn new(
        key: impl Into<AttributeKey>,
        category: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let key = key.into();
        let category = category.into();
        if category.is_empty() || category.contains([';', '=']) {
            return Err(ModelError::InvalidSpec(format!(
                "category `{category}` must be nonempty and free of `;` and `=`"
            )));
        }
        if let AttributeKey::Extra(name) = &key {
            if name.contains([';', '=']) {
                return Err(ModelError::InvalidSpec(format!(
                    "attribute `{name}` contains `;` or `=`"
                )));
            }
        }
        Ok(Constraint { key, category })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetingSpec {
    geo: GeoScope,
    age: AgeRange,
    gender: Gender,
    includes: BTreeSet<Constraint>,
    excludes: BTreeSet<Constraint>,
}

impl TargetingSpec {
    /// Everyone aged 13+ of either gender in `geo`.
    pub fn new(geo: GeoScope) -> Self {
        TargetingSpec {
            geo,
            age: AgeRange::all(),
            gender: Gender::All,
            includes: BTreeSet::new(),
            excludes: BTreeSet::new(),
        }
    }

    pub fn geo(&self) -> &GeoScope {
        &self.geo
    }

    pub fn age(&self) -> AgeRange {
        self.age
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn includes(&self) -> &BTreeSet<Constraint> {
        &self.includes
    }

    pub fn excludes(&self) -> &BTreeSet<Constraint> {
        &self.excludes
    }

    pub fn with_age(&self, lo: u8, hi: u8) -> Result<Self, ModelError> {
        Ok(TargetingSpec {
            age: AgeRange::new(lo, hi)?,
            ..self.clone()
        })
    }

    pub fn with_gender(&self, gender: Gender) -> Self {
        TargetingSpec {
            gender,
            ..self.clone()
        }
    }

    pub fn with_geo(&self, geo: GeoScope) -> Self {
        TargetingSpec {
            geo,
            ..self.clone()
        }
    }

    /// Narrows the audience to users positively classified as `category`.
    ///
    /// Rejected if the same attribute already carries an exclusion: the
    /// platform's behavior for users matching both is undocumented.
    pub fn with_include(
        &self,
        key: impl Into<AttributeKey>,
        category: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let c = Constraint::new(key, category)?;
        if let Some(clash) = self.excludes.iter().find(|e| e.key == c.key) {
            return Err(ModelError::ConflictingConstraint(format!(
                "cannot include {c}: {} already excludes {clash}",
                c.key
            )));
        }
        let mut out = self.clone();
        out.includes.insert(c);
        Ok(out)
    }

    /// Removes users positively classified as `category`; users with an
    /// unknown value stay in the audience.
    pub fn with_exclude(
        &self,
        key: impl Into<AttributeKey>,
        category: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let c = Constraint::new(key, category)?;
        if let Some(clash) = self.includes.iter().find(|i| i.key == c.key) {
            return Err(ModelError::ConflictingConstraint(format!(
                "cannot exclude {c}: {} already includes {clash}",
                c.key
            )));
        }
        let mut out = self.clone();
        out.excludes.insert(c);
        Ok(out)
    }

    /// Canonical, order-insensitive key.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TargetingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{};age={}-{};gender={}",
            self.geo,
            self.age.lo,
            self.age.hi,
            self.gender.as_str()
        )?;
        for c in &self.includes {
            write!(f, ";+{c}")?;
        }
        for c in &self.excludes {
            write!(f, ";-{c}")?;
        }
        Ok(())
    }
}

impl FromStr for TargetingSpec {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(';').map(str::trim).filter(|p| !p.is_empty());
        let geo: GeoScope = parts
            .next()
            .ok_or_else(|| ModelError::InvalidSpec("empty spec key".into()))?
            .parse()?;
        let mut spec = TargetingSpec::new(geo);
        for part in parts {
            let bad = || ModelError::InvalidSpec(format!("bad spec segment `{part}`"));
            if let Some(rest) = part.strip_prefix('+').or_else(|| part.strip_prefix('-')) {
                let (key, cat) = rest.split_once('=').ok_or_else(bad)?;
                let key: AttributeKey = key.trim().parse()?;
                spec = if part.starts_with('+') {
                    spec.with_include(key, cat.trim())?
                } else {
                    spec.with_exclude(key, cat.trim())?
                };
            } else if let Some(range) = part.strip_prefix("age=") {
                let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
                let lo = lo.trim().parse().map_err(|_| bad())?;
                let hi = hi.trim().parse().map_err(|_| bad())?;
                spec = spec.with_age(lo, hi)?;
            } else if let Some(g) = part.strip_prefix("gender=") {
                spec = spec.with_gender(g.parse()?);
            } else {
                return Err(bad());
            }
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn us() -> TargetingSpec {
        TargetingSpec::new(GeoScope::country("US").unwrap())
    }

    #[test]
    fn include_conservatives() {
        let s = us()
            .with_include(DimensionId::PoliticalLeaning, "conservative")
            .unwrap();
        assert!(s
            .includes()
            .contains(&Constraint::new(DimensionId::PoliticalLeaning, "conservative").unwrap()));
        assert_eq!(
            s.key(),
            "country:US;age=13-65;gender=all;+PoliticalLeaning=conservative"
        );
    }

    #[test]
    fn include_is_idempotent_and_pure() {
        let base = us();
        let a = base.with_include(DimensionId::Race, "hispanic").unwrap();
        let b = a.with_include(DimensionId::Race, "hispanic").unwrap();
        assert_eq!(a, b);
        assert!(base.includes().is_empty());
    }

    #[test]
    fn white_proxy_spec() {
        let s = us()
            .with_exclude(DimensionId::Race, "hispanic")
            .and_then(|s| s.with_exclude(DimensionId::Race, "african_american"))
            .and_then(|s| s.with_exclude(DimensionId::Race, "asian_american"))
            .unwrap();
        assert_eq!(s.excludes().len(), 3);
        assert!(s.includes().is_empty());
    }

    #[test]
    fn conflicting_constraints_rejected() {
        let s = us().with_exclude(DimensionId::Race, "hispanic").unwrap();
        assert!(matches!(
            s.with_include(DimensionId::Race, "hispanic"),
            Err(ModelError::ConflictingConstraint(_))
        ));
        // Same dimension, different category: also rejected.
        assert!(matches!(
            s.with_include(DimensionId::Race, "asian_american"),
            Err(ModelError::ConflictingConstraint(_))
        ));
        let t = us().with_include(DimensionId::Income, "50k-75k").unwrap();
        assert!(matches!(
            t.with_exclude(DimensionId::Income, "50k-75k"),
            Err(ModelError::ConflictingConstraint(_))
        ));
    }

    #[test]
    fn age_floor_enforced() {
        assert!(AgeRange::new(12, 20).is_err());
        assert!(AgeRange::new(13, 66).is_err());
        assert!(AgeRange::new(30, 20).is_err());
        assert!(us().with_age(10, 65).is_err());
        let open = AgeRange::new(65, 65).unwrap();
        assert!(open.contains(90));
        assert!(!AgeRange::new(20, 24).unwrap().contains(25));
    }

    #[test]
    fn key_round_trips_through_parser() {
        let s = us()
            .with_age(18, 24)
            .unwrap()
            .with_gender(Gender::Female)
            .with_include(AttributeKey::Extra("coffee".into()), "yes")
            .unwrap()
            .with_exclude(DimensionId::Race, "hispanic")
            .unwrap();
        let parsed: TargetingSpec = s.key().parse().unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn parser_accepts_any_segment_order() {
        let a: TargetingSpec = "state:WV;-Race=hispanic;gender=male;+Income=50k-75k"
            .parse()
            .unwrap();
        let b: TargetingSpec = "state:WV;+Income=50k-75k;gender=male;-Race=hispanic;age=13-65"
            .parse()
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.key(), b.key());
        assert!("state:WV;bogus".parse::<TargetingSpec>().is_err());
    }

    fn arb_constraint() -> impl Strategy<Value = (bool, DimensionId, String)> {
        (
            any::<bool>(),
            prop::sample::select(vec![
                DimensionId::Race,
                DimensionId::Income,
                DimensionId::Education,
            ]),
            prop::sample::select(vec!["a", "b", "c"]).prop_map(str::to_string),
        )
    }

    proptest! {
        #[test]
        fn constraint_order_does_not_matter(
            (ops, shuffled) in prop::collection::vec(arb_constraint(), 0..8)
                // Keep includes and excludes in disjoint dimensions so every op succeeds.
                .prop_map(|v| v.into_iter().filter(|(inc, d, _)| (*d == DimensionId::Race) != *inc).collect::<Vec<_>>())
                .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
        ) {
            let apply = |ops: &[(bool, DimensionId, String)]| {
                ops.iter().fold(us(), |s, (inc, d, c)| {
                    if *inc { s.with_include(*d, c.clone()).unwrap() } else { s.with_exclude(*d, c.clone()).unwrap() }
                })
            };
            prop_assert_eq!(apply(&ops), apply(&shuffled));
        }
    }
}
