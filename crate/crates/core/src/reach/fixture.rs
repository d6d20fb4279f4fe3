//! Recorded reach estimates.
//!
//! Fixture files are JSON lines. An optional `meta` record carries
//! collection notes; every `reach` record maps a spec key to the count the
//! platform reported:
//!
//! ```text
//! {"kind":"meta","collected":"2018-07","notes":"Facebook + Instagram"}
//! {"kind":"reach","key":"country:US;age=13-65;gender=all","count":230000000,"date":"2018-07"}
//! ```
//!
//! Keys are re-parsed and re-rendered on load, so constraint order in the
//! file does not matter.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReachBackend, ReachError, ReachEstimate, Source, PRIVACY_FLOOR};
use crate::model::{Registry, TargetingSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FixtureMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Meta(FixtureMeta),
    Reach {
        key: String,
        count: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        date: Option<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureStore {
    entries: BTreeMap<String, FixtureEntry>,
    meta: FixtureMeta,
}

impl FixtureStore {
    pub fn new(meta: FixtureMeta) -> Self {
        FixtureStore {
            entries: BTreeMap::new(),
            meta,
        }
    }

    pub fn meta(&self) -> &FixtureMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records a reported count; a later record for the same spec wins.
    pub fn record(
        &mut self,
        spec: &TargetingSpec,
        count: u64,
        date: Option<String>,
    ) -> Result<(), ReachError> {
        if count < PRIVACY_FLOOR {
            return Err(ReachError::FloorViolation(count));
        }
        self.entries
            .insert(spec.key(), FixtureEntry { count, date });
        Ok(())
    }

    pub fn lookup(&self, spec: &TargetingSpec) -> Option<&FixtureEntry> {
        self.entries.get(&spec.key())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FixtureEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn parse(text: &str) -> Result<FixtureStore, ReachError> {
        let mut store = FixtureStore::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let at = |msg: String| ReachError::Parse(format!("line {}: {msg}", lineno + 1));
            match serde_json::from_str::<Line>(line).map_err(|e| at(e.to_string()))? {
                Line::Meta(meta) => store.meta = meta,
                Line::Reach { key, count, date } => {
                    let spec: TargetingSpec = key.parse().map_err(|e| at(format!("{e}")))?;
                    store
                        .record(&spec, count, date)
                        .map_err(|e| at(e.to_string()))?;
                }
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FixtureStore, ReachError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReachError::Io(format!("{}: {e}", path.display())))?;
        FixtureStore::parse(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if self.meta != FixtureMeta::default() {
            out.push_str(
                &serde_json::to_string(&Line::Meta(self.meta.clone())).expect("serializable"),
            );
            out.push('\n');
        }
        for (key, e) in &self.entries {
            let line = Line::Reach {
                key: key.clone(),
                count: e.count,
                date: e.date.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

/// Replays a [`FixtureStore`]. A stored count equal to the floor is
/// reported with `ambiguous_floor` set.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    store: FixtureStore,
    registry: Option<Registry>,
}

impl FixtureBackend {
    pub fn new(store: FixtureStore) -> Self {
        FixtureBackend {
            store,
            registry: None,
        }
    }

    /// Validate spec geographies against `registry` before lookup.
    pub fn with_registry(mut self, registry: Registry) -> Self {
        self.registry = Some(registry);
        self
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl ReachBackend for FixtureBackend {
    fn reach(&self, spec: &TargetingSpec) -> Result<ReachEstimate, ReachError> {
        if let Some(reg) = &self.registry {
            reg.check_geo(spec.geo())
                .map_err(|_| ReachError::GeographyUnknown(spec.geo().to_string()))?;
        }
        let entry = self
            .store
            .lookup(spec)
            .ok_or_else(|| ReachError::FixtureMiss(spec.key()))?;
        let at_floor = entry.count == PRIVACY_FLOOR;
        Ok(ReachEstimate {
            spec: spec.clone(),
            count: entry.count,
            floor_applied: at_floor,
            ambiguous_floor: at_floor,
            source: Source::Fixture,
        })
    }

    fn source(&self) -> Source {
        Source::Fixture
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DimensionId, GeoScope};

    fn us() -> TargetingSpec {
        TargetingSpec::new(GeoScope::country("US").unwrap())
    }

    #[test]
    fn record_and_replay_us_total() {
        let mut store = FixtureStore::default();
        store
            .record(&us(), 230_000_000, Some("2018-07".into()))
            .unwrap();
        let est = FixtureBackend::new(store).reach(&us()).unwrap();
        assert_eq!(est.count, 230_000_000);
        assert!(!est.floor_tainted());
        assert_eq!(est.source, Source::Fixture);
    }

    #[test]
    fn last_write_wins() {
        let mut store = FixtureStore::default();
        store.record(&us(), 5_000, None).unwrap();
        store.record(&us(), 7_000, None).unwrap();
        assert_eq!(store.lookup(&us()).unwrap().count, 7_000);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn below_floor_rejected() {
        let mut store = FixtureStore::default();
        assert_eq!(
            store.record(&us(), 999, None),
            Err(ReachError::FloorViolation(999))
        );
    }

    #[test]
    fn lookup_is_order_insensitive() {
        let a = us()
            .with_exclude(DimensionId::Race, "hispanic")
            .and_then(|s| s.with_exclude(DimensionId::Race, "asian_american"))
            .unwrap();
        let b = us()
            .with_exclude(DimensionId::Race, "asian_american")
            .and_then(|s| s.with_exclude(DimensionId::Race, "hispanic"))
            .unwrap();
        let mut store = FixtureStore::default();
        store.record(&a, 123_456, None).unwrap();
        assert_eq!(store.lookup(&b).unwrap().count, 123_456);

        // Keys written in a different order in the file normalize on load.
        let text = "{\"kind\":\"reach\",\"key\":\"country:US;-Race=hispanic;-Race=asian_american\",\"count\":5000}";
        let loaded = FixtureStore::parse(text).unwrap();
        assert_eq!(loaded.lookup(&a).unwrap().count, 5000);
    }

    #[test]
    fn miss_and_floor_ambiguity() {
        let mut store = FixtureStore::default();
        let wv = TargetingSpec::new(GeoScope::state("WV").unwrap());
        store.record(&wv, PRIVACY_FLOOR, None).unwrap();
        let backend = FixtureBackend::new(store);
        let est = backend.reach(&wv).unwrap();
        assert!(est.ambiguous_floor && est.floor_tainted());
        assert!(matches!(
            backend.reach(&us()),
            Err(ReachError::FixtureMiss(_))
        ));
    }

    #[test]
    fn registry_rejects_unknown_geo() {
        let backend =
            FixtureBackend::new(FixtureStore::default()).with_registry(Registry::builtin());
        let spec = TargetingSpec::new(GeoScope::state("Atlantis").unwrap());
        assert!(matches!(
            backend.reach(&spec),
            Err(ReachError::GeographyUnknown(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut store = FixtureStore::new(FixtureMeta {
            collected: Some("2018-07".into()),
            notes: None,
        });
        store
            .record(&us(), 230_000_000, Some("2018-07".into()))
            .unwrap();
        let again = FixtureStore::parse(&store.to_jsonl()).unwrap();
        assert_eq!(store, again);
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = FixtureStore::parse("\n{\"kind\":\"reach\",\"key\":\"country:US\",\"count\":10}")
            .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
