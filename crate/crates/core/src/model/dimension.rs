use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// The seven demographic dimensions the platform exposes for targeting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DimensionId {
    Gender,
    Age,
    Race,
    Income,
    Education,
    PoliticalLeaning,
    CountryOfOrigin,
}

impl DimensionId {
    pub const ALL: [DimensionId; 7] = [
        DimensionId::Gender,
        DimensionId::Age,
        DimensionId::Race,
        DimensionId::Income,
        DimensionId::Education,
        DimensionId::PoliticalLeaning,
        DimensionId::CountryOfOrigin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DimensionId::Gender => "Gender",
            DimensionId::Age => "Age",
            DimensionId::Race => "Race",
            DimensionId::Income => "Income",
            DimensionId::Education => "Education",
            DimensionId::PoliticalLeaning => "PoliticalLeaning",
            DimensionId::CountryOfOrigin => "CountryOfOrigin",
        }
    }
}

impl fmt::Display for DimensionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts the canonical spelling case-insensitively, with or without
/// underscores (`political_leaning`, `PoliticalLeaning`).
impl FromStr for DimensionId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squashed: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        DimensionId::ALL
            .into_iter()
            .find(|d| d.as_str().to_ascii_lowercase() == squashed)
            .ok_or_else(|| ModelError::UnknownDimension(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Platform,
    Census,
    Canonical,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum Gender {
    #[default]
    All,
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::All => "all",
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl FromStr for Gender {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Gender::All),
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(ModelError::InvalidSpec(format!("unknown gender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub side: Side,
    #[serde(default)]
    pub labels: Vec<String>,
}

/// A dimension with its ordered canonical categories.
///
/// `exhaustive` describes the platform side: whether the native categories
/// partition the platform population. Race is not exhaustive (white is a
/// residual), nor is income (only incomes above 30k are inferred).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub id: DimensionId,
    pub categories: Vec<Category>,
    pub exhaustive: bool,
}

impl Dimension {
    pub fn canonical_ids(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.id.as_str())
    }

    pub fn has_canonical(&self, id: &str) -> bool {
        self.categories.iter().any(|c| c.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.id == id)
    }
}

/// Where a source category lands in the canonical vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Canonical(String),
    /// Counted toward the dimension's `unspecified` bucket (e.g. census
    /// incomes below the platform's inference floor, children under 13).
    Unspecified,
}

impl Target {
    pub fn canonical(&self) -> Option<&str> {
        match self {
            Target::Canonical(c) => Some(c),
            Target::Unspecified => None,
        }
    }
}

/// How a platform category is turned into a reach query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRule {
    /// Positive include of `(dimension, category)`; the default.
    Include,
    /// Age range targeting; 65 as upper bound means "65 and over".
    Age(u8, u8),
    Gender(Gender),
    /// Everyone in the geography minus every other included category of the
    /// dimension (the white proxy for race).
    Residual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingEntry {
    pub source: String,
    pub side: Side,
    pub target: Target,
    /// Fraction of the source row credited to `target`; the rest is
    /// unspecified. Used to prorate a census 10-14 bin down to ages 13-14.
    pub share: Option<(u64, u64)>,
    /// Census age group qualifier (e.g. `18-24`, `25+`) on education rows.
    pub group: Option<String>,
    pub query: QueryRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMapping {
    pub dimension: DimensionId,
    pub entries: Vec<MappingEntry>,
}

impl CategoryMapping {
    pub fn new(dimension: DimensionId) -> Self {
        CategoryMapping {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn entry(&self, side: Side, category: &str) -> Option<&MappingEntry> {
        self.entries
            .iter()
            .find(|e| e.side == side && e.source == category)
    }

    pub fn entries_on(&self, side: Side) -> impl Iterator<Item = &MappingEntry> {
        self.entries.iter().filter(move |e| e.side == side)
    }

    /// Platform categories reachable by a positive include.
    pub fn platform_includes(&self) -> impl Iterator<Item = &MappingEntry> {
        self.entries_on(Side::Platform)
            .filter(|e| e.query == QueryRule::Include)
    }

    /// Checks injectivity (each source listed once per side) and that every
    /// target names a declared canonical category.
    pub fn validate(&self, dimension: &Dimension) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.side == Side::Canonical {
                return Err(ModelError::InvalidRegistry(format!(
                    "{}: mapping source `{}` cannot be on the canonical side",
                    self.dimension, e.source
                )));
            }
            if !seen.insert((e.side, e.source.as_str())) {
                return Err(ModelError::InvalidRegistry(format!(
                    "{}: {:?} category `{}` mapped more than once",
                    self.dimension, e.side, e.source
                )));
            }
            if let Target::Canonical(c) = &e.target {
                if !dimension.has_canonical(c) {
                    return Err(ModelError::InvalidRegistry(format!(
                        "{}: `{}` maps to undeclared canonical category `{c}`",
                        self.dimension, e.source
                    )));
                }
            }
            if let Some((num, den)) = e.share {
                if den == 0 || num > den {
                    return Err(ModelError::InvalidRegistry(format!(
                        "{}: `{}` has invalid share {num}/{den}",
                        self.dimension, e.source
                    )));
                }
            }
            if e.side == Side::Census && e.query != QueryRule::Include {
                return Err(ModelError::InvalidRegistry(format!(
                    "{}: census category `{}` cannot carry a query rule",
                    self.dimension, e.source
                )));
            }
        }
        Ok(())
    }

    /// Canonical categories not hit by any source on `side`.
    pub fn uncovered(&self, dimension: &Dimension, side: Side) -> Vec<String> {
        let hit: BTreeSet<&str> = self
            .entries_on(side)
            .filter_map(|e| e.target.canonical())
            .collect();
        dimension
            .canonical_ids()
            .filter(|c| !hit.contains(c))
            .map(str::to_string)
            .collect()
    }

    /// Source categories grouped by canonical target, in insertion order.
    pub fn sources_by_target(&self, side: Side) -> BTreeMap<Target, Vec<&str>> {
        let mut out: BTreeMap<Target, Vec<&str>> = BTreeMap::new();
        for e in self.entries_on(side) {
            out.entry(e.target.clone()).or_default().push(&e.source);
        }
        out
    }
}

impl PartialOrd for Target {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Target {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Target::Canonical(a), Target::Canonical(b)) => a.cmp(b),
            (Target::Canonical(_), Target::Unspecified) => std::cmp::Ordering::Less,
            (Target::Unspecified, Target::Canonical(_)) => std::cmp::Ordering::Greater,
            (Target::Unspecified, Target::Unspecified) => std::cmp::Ordering::Equal,
        }
    }
}

/// Looks up the canonical target for `(side, category)`.
pub fn map_to_canonical<'a>(
    mapping: &'a CategoryMapping,
    side: Side,
    category: &str,
) -> Result<&'a Target, ModelError> {
    mapping
        .entry(side, category)
        .map(|e| &e.target)
        .ok_or_else(|| ModelError::UnmappedCategory {
            dimension: mapping.dimension,
            side,
            category: category.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_parse_is_lenient() {
        assert_eq!(
            "political_leaning".parse::<DimensionId>().unwrap(),
            DimensionId::PoliticalLeaning
        );
        assert_eq!("RACE".parse::<DimensionId>().unwrap(), DimensionId::Race);
        assert_eq!(
            "country-of-origin".parse::<DimensionId>().unwrap(),
            DimensionId::CountryOfOrigin
        );
        assert!("religion".parse::<DimensionId>().is_err());
    }

    #[test]
    fn unmapped_category_errors() {
        let m = CategoryMapping::new(DimensionId::Education);
        let err = map_to_canonical(&m, Side::Census, "nope").unwrap_err();
        assert!(matches!(err, ModelError::UnmappedCategory { .. }));
    }
}
