//! Normalized extract format for baseline tables.
//!
//! A file is UTF-8 text. It starts with `#key=value` preamble lines,
//! followed by a delimited body whose first line is the header:
//!
//! ```text
//! #table_id=S1501
//! #geography=state:WV
//! #vintage=ACS 2016 5-year
//! category,value
//! Less than 9th grade,41234
//! 9th to 12th grade; no diploma,98765
//! ```
//!
//! Preamble keys:
//!
//! | key          | required | values |
//! |--------------|----------|--------|
//! | `table_id`   | yes      | `S0101`, `DP05`, `S2001`, `S1501`, `B05006`, `GALLUP` |
//! | `geography`  | yes      | `LEVEL:NAME[@R]` |
//! | `vintage`    | yes      | free text |
//! | `delimiter`  | no       | `,` (default), `|`, `;`, `tab` |
//! | `values`     | no       | `count` (default; `percent` for `GALLUP`) |
//! | `universe`   | no       | row holding the base population (default `Total`) |
//! | `dimension`  | no       | overrides the table's default dimension |
//! | `gender`     | no       | `male` / `female` restriction (age-by-sex tables) |
//! | `vocabulary` | no       | `source` (default) or `canonical` |
//!
//! ACS-shaped tables have the header `category,value` with an optional
//! third `subset` column (S2001 uses it to tag worker populations). Percent
//! tables must carry the universe row as a count; every other row is
//! converted with it. `GALLUP` tables have the header
//! `state,<category>,...` with one percentage row per geography.
//!
//! Empty value cells read as zero.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CensusError;
use crate::model::{DimensionId, Gender, GeoLevel, GeoScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableId {
    S0101,
    DP05,
    S2001,
    S1501,
    B05006,
    Gallup,
}

impl TableId {
    pub const ALL: [TableId; 6] = [
        TableId::S0101,
        TableId::DP05,
        TableId::S2001,
        TableId::S1501,
        TableId::B05006,
        TableId::Gallup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::S0101 => "S0101",
            TableId::DP05 => "DP05",
            TableId::S2001 => "S2001",
            TableId::S1501 => "S1501",
            TableId::B05006 => "B05006",
            TableId::Gallup => "GALLUP",
        }
    }

    pub fn default_dimension(self) -> DimensionId {
        match self {
            TableId::S0101 => DimensionId::Age,
            TableId::DP05 => DimensionId::Race,
            TableId::S2001 => DimensionId::Income,
            TableId::S1501 => DimensionId::Education,
            TableId::B05006 => DimensionId::CountryOfOrigin,
            TableId::Gallup => DimensionId::PoliticalLeaning,
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = CensusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CensusError::UnknownTable(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Count,
    Percent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Vocabulary {
    /// Row labels are the official table's category names.
    #[default]
    Source,
    /// Row labels are canonical ids plus an optional `(unspecified)` row.
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub category: String,
    pub count: u64,
    /// The original percentage for percent tables.
    pub percent: Option<f64>,
    pub subset: Option<String>,
}

/// An ACS-shaped table: one value per category row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusTable {
    pub table_id: TableId,
    pub geography: GeoScope,
    pub vintage: String,
    pub dimension: DimensionId,
    pub gender: Gender,
    pub values: ValueKind,
    pub vocabulary: Vocabulary,
    /// The universe row's count: required for percent tables, optional
    /// for count tables. Never part of `rows`.
    pub universe: Option<u64>,
    pub rows: Vec<TableRow>,
}

/// Party-affiliation percentages, one row per geography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyTable {
    pub geography: GeoScope,
    pub vintage: String,
    pub row_level: GeoLevel,
    pub categories: Vec<String>,
    /// `(geography id, percentages in category order)`
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    Acs(CensusTable),
    Party(PartyTable),
}

impl Baseline {
    pub fn parse(text: &str) -> Result<Baseline, CensusError> {
        let raw = RawExtract::parse(text)?;
        if raw.table_id == TableId::Gallup {
            PartyTable::from_raw(raw).map(Baseline::Party)
        } else {
            CensusTable::from_raw(raw).map(Baseline::Acs)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Baseline, CensusError> {
        Baseline::parse(&read(path.as_ref())?)
    }

    pub fn table_id(&self) -> TableId {
        match self {
            Baseline::Acs(t) => t.table_id,
            Baseline::Party(_) => TableId::Gallup,
        }
    }

    pub fn geography(&self) -> &GeoScope {
        match self {
            Baseline::Acs(t) => &t.geography,
            Baseline::Party(t) => &t.geography,
        }
    }
}

fn read(path: &Path) -> Result<String, CensusError> {
    let bytes =
        std::fs::read(path).map_err(|e| CensusError::Io(format!("{}: {e}", path.display())))?;
    String::from_utf8(bytes)
        .map_err(|_| CensusError::MalformedTable(format!("{}: not valid UTF-8", path.display())))
}

fn malformed(msg: impl Into<String>) -> CensusError {
    CensusError::MalformedTable(msg.into())
}

struct RawExtract {
    table_id: TableId,
    geography: GeoScope,
    vintage: String,
    values: Option<ValueKind>,
    universe: Option<String>,
    dimension: Option<DimensionId>,
    gender: Gender,
    vocabulary: Vocabulary,
    header: Vec<String>,
    records: Vec<Vec<String>>,
}

const PREAMBLE_KEYS: [&str; 9] = [
    "table_id",
    "geography",
    "vintage",
    "delimiter",
    "values",
    "universe",
    "dimension",
    "gender",
    "vocabulary",
];

impl RawExtract {
    fn parse(text: &str) -> Result<RawExtract, CensusError> {
        if text.starts_with('\u{feff}') {
            return Err(malformed("byte-order mark not allowed"));
        }
        let mut pre: BTreeMap<&str, &str> = BTreeMap::new();
        let mut body_start = text.len();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim_end_matches(['\n', '\r']);
            let Some(kv) = trimmed.strip_prefix('#') else {
                body_start = offset;
                break;
            };
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| malformed(format!("preamble line `{trimmed}` is not key=value")))?;
            let k = k.trim();
            if !PREAMBLE_KEYS.contains(&k) {
                return Err(malformed(format!("unknown preamble key `{k}`")));
            }
            if pre.insert(k, v.trim()).is_some() {
                return Err(malformed(format!("preamble key `{k}` repeated")));
            }
            offset += line.len();
        }
        let require = |k: &str| {
            pre.get(k)
                .copied()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| malformed(format!("missing preamble key `{k}`")))
        };
        let table_id: TableId = require("table_id")?.parse()?;
        let geography: GeoScope = require("geography")?
            .parse()
            .map_err(|e| malformed(format!("geography: {e}")))?;
        let vintage = require("vintage")?.to_string();
        let delimiter = match pre.get("delimiter").copied().unwrap_or(",") {
            "," => b',',
            "|" => b'|',
            ";" => b';',
            "tab" | "\\t" => b'\t',
            other => return Err(malformed(format!("unsupported delimiter `{other}`"))),
        };
        let values = match pre.get("values").copied() {
            None => None,
            Some("count") => Some(ValueKind::Count),
            Some("percent") => Some(ValueKind::Percent),
            Some(other) => {
                return Err(malformed(format!(
                    "values must be count or percent, got `{other}`"
                )))
            }
        };
        let dimension = pre
            .get("dimension")
            .map(|d| d.parse::<DimensionId>())
            .transpose()
            .map_err(CensusError::Model)?;
        let gender = match pre.get("gender") {
            None => Gender::All,
            Some(g) => g.parse().map_err(CensusError::Model)?,
        };
        let vocabulary = match pre.get("vocabulary").copied() {
            None | Some("source") => Vocabulary::Source,
            Some("canonical") => Vocabulary::Canonical,
            Some(other) => {
                return Err(malformed(format!(
                    "vocabulary must be source or canonical, got `{other}`"
                )))
            }
        };

        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(&text.as_bytes()[body_start..]);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| malformed(format!("header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(malformed("missing header line"));
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| malformed(e.to_string()))?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            records.push(rec.iter().map(str::to_string).collect());
        }
        if records.is_empty() {
            return Err(malformed("table has no data rows"));
        }
        Ok(RawExtract {
            table_id,
            geography,
            vintage,
            values,
            universe: pre.get("universe").map(|s| s.to_string()),
            dimension,
            gender,
            vocabulary,
            header,
            records,
        })
    }
}

/// Parses a numeric cell; empty reads as zero. Thousands separators are
/// tolerated inside quoted cells.
fn number(cell: &str, what: &str) -> Result<f64, CensusError> {
    if cell.is_empty() {
        return Ok(0.0);
    }
    let cleaned: String = cell.chars().filter(|c| *c != ',' && *c != '_').collect();
    let v: f64 = cleaned
        .parse()
        .map_err(|_| malformed(format!("{what}: `{cell}` is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(malformed(format!(
            "{what}: `{cell}` must be a nonnegative number"
        )));
    }
    Ok(v)
}

fn count(cell: &str, what: &str) -> Result<u64, CensusError> {
    let v = number(cell, what)?;
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(malformed(format!(
            "{what}: count `{cell}` is not a whole number"
        )));
    }
    Ok(v as u64)
}

fn percent(cell: &str, what: &str) -> Result<f64, CensusError> {
    let v = number(cell, what)?;
    if v > 100.0 {
        return Err(malformed(format!(
            "{what}: percentage `{cell}` exceeds 100"
        )));
    }
    Ok(v)
}

impl CensusTable {
    pub fn parse(text: &str) -> Result<CensusTable, CensusError> {
        match Baseline::parse(text)? {
            Baseline::Acs(t) => Ok(t),
            Baseline::Party(_) => Err(malformed("GALLUP tables are party-affiliation tables")),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CensusTable, CensusError> {
        CensusTable::parse(&read(path.as_ref())?)
    }

    fn from_raw(raw: RawExtract) -> Result<CensusTable, CensusError> {
        let has_subset = match raw.header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["category", "value"] => false,
            ["category", "value", "subset"] => true,
            _ => {
                return Err(malformed(format!(
                    "{} header must be `category,value[,subset]`, got `{}`",
                    raw.table_id,
                    raw.header.join(",")
                )))
            }
        };
        let values = raw.values.unwrap_or(ValueKind::Count);
        let universe_label = raw.universe.clone().unwrap_or_else(|| "Total".to_string());

        let mut universe = None;
        let mut pending: Vec<(String, &str, Option<String>)> = Vec::new();
        for rec in &raw.records {
            let category = rec[0].clone();
            if category.is_empty() {
                return Err(malformed("row with empty category"));
            }
            let subset = if has_subset && !rec[2].is_empty() {
                Some(rec[2].clone())
            } else {
                None
            };
            if category == universe_label {
                if universe.is_some() {
                    return Err(malformed(format!("universe row `{category}` repeated")));
                }
                universe = Some(count(&rec[1], &category)?);
                continue;
            }
            if pending
                .iter()
                .any(|(c, _, s)| *c == category && *s == subset)
            {
                return Err(malformed(format!("duplicate row `{category}`")));
            }
            pending.push((category, rec[1].as_str(), subset));
        }

        let rows = match values {
            ValueKind::Count => pending
                .into_iter()
                .map(|(category, cell, subset)| {
                    Ok(TableRow {
                        count: count(cell, &category)?,
                        category,
                        percent: None,
                        subset,
                    })
                })
                .collect::<Result<Vec<_>, CensusError>>()?,
            ValueKind::Percent => {
                let base = universe.ok_or_else(|| {
                    malformed(format!(
                        "percent table has no universe row `{universe_label}` to convert with"
                    ))
                })?;
                pending
                    .into_iter()
                    .map(|(category, cell, subset)| {
                        let p = percent(cell, &category)?;
                        Ok(TableRow {
                            count: (p / 100.0 * base as f64).round() as u64,
                            category,
                            percent: Some(p),
                            subset,
                        })
                    })
                    .collect::<Result<Vec<_>, CensusError>>()?
            }
        };
        if rows.is_empty() {
            return Err(malformed("table has only a universe row"));
        }
        Ok(CensusTable {
            table_id: raw.table_id,
            geography: raw.geography,
            vintage: raw.vintage,
            dimension: raw.dimension.unwrap_or(raw.table_id.default_dimension()),
            gender: raw.gender,
            values,
            vocabulary: raw.vocabulary,
            universe,
            rows,
        })
    }

    /// A count table with no universe row and source vocabulary.
    pub fn from_counts(
        table_id: TableId,
        geography: GeoScope,
        vintage: impl Into<String>,
        rows: impl IntoIterator<Item = (String, u64)>,
    ) -> CensusTable {
        CensusTable {
            table_id,
            geography,
            vintage: vintage.into(),
            dimension: table_id.default_dimension(),
            gender: Gender::All,
            values: ValueKind::Count,
            vocabulary: Vocabulary::Source,
            universe: None,
            rows: rows
                .into_iter()
                .map(|(category, count)| TableRow {
                    category,
                    count,
                    percent: None,
                    subset: None,
                })
                .collect(),
        }
    }

    /// Renders the table in the extract format. Percent tables are written
    /// with their original percentages.
    pub fn to_extract(&self) -> String {
        let mut out = format!(
            "#table_id={}\n#geography={}\n#vintage={}\n",
            self.table_id, self.geography, self.vintage
        );
        if self.dimension != self.table_id.default_dimension() {
            out.push_str(&format!("#dimension={}\n", self.dimension.as_str()));
        }
        if self.gender != Gender::All {
            out.push_str(&format!("#gender={}\n", self.gender.as_str()));
        }
        if self.values == ValueKind::Percent {
            out.push_str("#values=percent\n");
        }
        if self.vocabulary == Vocabulary::Canonical {
            out.push_str("#vocabulary=canonical\n");
        }
        let has_subset = self.rows.iter().any(|r| r.subset.is_some());
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: &[&str] = if has_subset {
            &["category", "value", "subset"]
        } else {
            &["category", "value"]
        };
        w.write_record(header).expect("in-memory write");
        if let Some(u) = self.universe {
            let mut rec = vec!["Total".to_string(), u.to_string()];
            if has_subset {
                rec.push(String::new());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        for r in &self.rows {
            let value = match r.percent {
                Some(p) => p.to_string(),
                None => r.count.to_string(),
            };
            let mut rec = vec![r.category.clone(), value];
            if has_subset {
                rec.push(r.subset.clone().unwrap_or_default());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
        out
    }
}

impl PartyTable {
    pub fn parse(text: &str) -> Result<PartyTable, CensusError> {
        match Baseline::parse(text)? {
            Baseline::Party(t) => Ok(t),
            Baseline::Acs(t) => Err(malformed(format!(
                "{} is not a party-affiliation table",
                t.table_id
            ))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PartyTable, CensusError> {
        PartyTable::parse(&read(path.as_ref())?)
    }

    fn from_raw(raw: RawExtract) -> Result<PartyTable, CensusError> {
        if raw.values == Some(ValueKind::Count) {
            return Err(malformed("GALLUP tables hold percentages"));
        }
        if raw.vocabulary != Vocabulary::Source
            || raw.universe.is_some()
            || raw.gender != Gender::All
        {
            return Err(malformed(
                "GALLUP tables take no vocabulary, universe or gender keys",
            ));
        }
        if let Some(d) = raw
            .dimension
            .filter(|d| *d != DimensionId::PoliticalLeaning)
        {
            return Err(malformed(format!("GALLUP tables cannot describe {d}")));
        }
        let row_level: GeoLevel = raw.header[0].parse().map_err(|_| {
            malformed(format!(
                "first GALLUP column must be a geography level, got `{}`",
                raw.header[0]
            ))
        })?;
        let categories: Vec<String> = raw.header[1..].to_vec();
        if categories.is_empty() {
            return Err(malformed("GALLUP table has no category columns"));
        }
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        for rec in &raw.records {
            let geo = rec[0].clone();
            if geo.is_empty() {
                return Err(malformed("row with empty geography"));
            }
            if rows.iter().any(|(g, _)| *g == geo) {
                return Err(malformed(format!("duplicate row for `{geo}`")));
            }
            let pcts = rec[1..]
                .iter()
                .zip(&categories)
                .map(|(cell, cat)| percent(cell, &format!("{geo}/{cat}")))
                .collect::<Result<Vec<_>, _>>()?;
            let sum: f64 = pcts.iter().sum();
            if sum > 100.0 + 1e-9 {
                return Err(malformed(format!("`{geo}` percentages sum to {sum}")));
            }
            rows.push((geo, pcts));
        }
        Ok(PartyTable {
            geography: raw.geography,
            vintage: raw.vintage,
            row_level,
            categories,
            rows,
        })
    }

    pub fn to_extract(&self) -> String {
        let mut out = format!(
            "#table_id=GALLUP\n#geography={}\n#vintage={}\n",
            self.geography, self.vintage
        );
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec![self.row_level.as_str().to_string()];
        header.extend(self.categories.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (geo, pcts) in &self.rows {
            let mut rec = vec![geo.clone()];
            rec.extend(pcts.iter().map(f64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
        out
    }
}
