use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Smallest radius the ads platform accepts around a city.
pub const MIN_CITY_RADIUS_MILES: u32 = 10;
/// Radius the platform applies when none is chosen.
pub const DEFAULT_CITY_RADIUS_MILES: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeoLevel {
    Country,
    State,
    City,
}

impl GeoLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            GeoLevel::Country => "country",
            GeoLevel::State => "state",
            GeoLevel::City => "city",
        }
    }
}

impl fmt::Display for GeoLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeoLevel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "country" => Ok(GeoLevel::Country),
            "state" => Ok(GeoLevel::State),
            "city" => Ok(GeoLevel::City),
            other => Err(ModelError::InvalidGeo(format!(
                "unknown geography level `{other}`"
            ))),
        }
    }
}

/// A targeted geography. Cities always carry the disc radius used by the
/// platform, which never coincides with official city borders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeoScope {
    level: GeoLevel,
    name: String,
    radius_miles: Option<u32>,
}

impl GeoScope {
    pub fn country(name: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(GeoLevel::Country, name, None)
    }

    pub fn state(name: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(GeoLevel::State, name, None)
    }

    pub fn city(name: impl Into<String>, radius_miles: u32) -> Result<Self, ModelError> {
        Self::new(GeoLevel::City, name, Some(radius_miles))
    }

    pub fn new(
        level: GeoLevel,
        name: impl Into<String>,
        radius_miles: Option<u32>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(ModelError::InvalidGeo("geography name is empty".into()));
        }
        if name.contains([';', '@', ':']) {
            return Err(ModelError::InvalidGeo(format!(
                "geography name `{name}` contains a reserved character"
            )));
        }
        match (level, radius_miles) {
            (GeoLevel::City, Some(r))
                if (MIN_CITY_RADIUS_MILES..=DEFAULT_CITY_RADIUS_MILES).contains(&r) => {}
            (GeoLevel::City, Some(r)) => {
                return Err(ModelError::InvalidGeo(format!(
                    "city radius {r} outside {MIN_CITY_RADIUS_MILES}..={DEFAULT_CITY_RADIUS_MILES} miles"
                )))
            }
            (GeoLevel::City, None) => {
                return Err(ModelError::InvalidGeo("city scope requires a radius".into()))
            }
            (_, Some(_)) => {
                return Err(ModelError::InvalidGeo(format!(
                    "radius is only meaningful for cities, not {level}"
                )))
            }
            (_, None) => {}
        }
        Ok(GeoScope {
            level,
            name,
            radius_miles,
        })
    }

    pub fn level(&self) -> GeoLevel {
        self.level
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius_miles(&self) -> Option<u32> {
        self.radius_miles
    }

    /// Identity of the place regardless of the targeting radius.
    pub fn same_place(&self, other: &GeoScope) -> bool {
        self.level == other.level && self.name == other.name
    }

    /// Short filesystem-safe token, e.g. `state-WV` or `city-arlington_tx-10mi`.
    pub fn file_token(&self) -> String {
        let name: String = self
            .name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        match self.radius_miles {
            Some(r) => format!("{}-{name}-{r}mi", self.level),
            None => format!("{}-{name}", self.level),
        }
    }
}

impl fmt::Display for GeoScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.level, self.name)?;
        if let Some(r) = self.radius_miles {
            write!(f, "@{r}")?;
        }
        Ok(())
    }
}

/// Parses `LEVEL:NAME` with an optional `@RADIUS` suffix for cities
/// (`city:arlington_tx@10`). A city without a radius gets the platform default.
impl FromStr for GeoScope {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (level, rest) = s
            .split_once(':')
            .ok_or_else(|| ModelError::InvalidGeo(format!("expected LEVEL:NAME, got `{s}`")))?;
        let level: GeoLevel = level.parse()?;
        let (name, radius) = match rest.rsplit_once('@') {
            Some((name, r)) => {
                let r = r
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| ModelError::InvalidGeo(format!("bad radius in `{s}`")))?;
                (name, Some(r))
            }
            None => (rest, None),
        };
        let radius = match level {
            GeoLevel::City => Some(radius.unwrap_or(DEFAULT_CITY_RADIUS_MILES)),
            _ => radius,
        };
        GeoScope::new(level, name.trim(), radius)
    }
}

impl TryFrom<String> for GeoScope {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<GeoScope> for String {
    fn from(value: GeoScope) -> Self {
        value.to_string()
    }
}
