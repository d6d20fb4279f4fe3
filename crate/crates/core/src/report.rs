//! Delimited and structured report writers.
//!
//! Delimited reports are comma-separated with a header row; shares are
//! printed as percentages with three decimals and correction factors with
//! five. Structured reports are pretty-printed JSON at full precision.
//! Files are written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::series::{PyramidRow, ScatterPoint};
use crate::analysis::{
    CorrectionFactor, CorrelationReport, CoverageTable, PlatformCensus, PostStratified,
    RegionRollup,
};
use crate::census::DemographicDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Format {
    #[default]
    Delimited,
    Structured,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Delimited => "csv",
            Format::Structured => "json",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
}

/// Writes `contents` to `path` via a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn delimited(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

fn structured<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn pct(share: f64) -> String {
    format!("{:.3}", share * 100.0)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// A compiled cell: native platform counts followed by canonical counts
/// and shares (over the geography's total reach).
pub fn platform_census(cell: &PlatformCensus, format: Format) -> String {
    if format == Format::Structured {
        return structured(cell);
    }
    let d = &cell.distribution;
    let prefix = || {
        vec![
            d.geography.to_string(),
            d.dimension.as_str().to_string(),
            d.gender.as_str().to_string(),
        ]
    };
    let frac = |n: u64| {
        if cell.total == 0 {
            0.0
        } else {
            n as f64 / cell.total as f64
        }
    };
    let mut rows = vec![[
        prefix(),
        vec![
            "total".into(),
            String::new(),
            String::new(),
            cell.total.to_string(),
            pct(1.0),
            cell.total_floor_tainted.to_string(),
        ],
    ]
    .concat()];
    for n in &cell.native {
        rows.push(
            [
                prefix(),
                vec![
                    "native".into(),
                    n.category.clone(),
                    n.canonical.clone().unwrap_or_default(),
                    n.count.to_string(),
                    pct(frac(n.count)),
                    n.floor_tainted.to_string(),
                ],
            ]
            .concat(),
        );
    }
    for c in &d.cells {
        rows.push(
            [
                prefix(),
                vec![
                    "canonical".into(),
                    c.category.clone(),
                    c.category.clone(),
                    opt(c.count),
                    pct(c.share),
                    c.floor_tainted.to_string(),
                ],
            ]
            .concat(),
        );
    }
    rows.push(
        [
            prefix(),
            vec![
                "unspecified".into(),
                String::new(),
                String::new(),
                opt(d.unspecified_count),
                pct(d.unspecified_share),
                "false".into(),
            ],
        ]
        .concat(),
    );
    delimited(
        &[
            "geography",
            "dimension",
            "gender",
            "kind",
            "category",
            "canonical",
            "count",
            "share_pct",
            "floor_tainted",
        ],
        rows,
    )
}

pub fn distribution(d: &DemographicDistribution, format: Format) -> String {
    if format == Format::Structured {
        return structured(d);
    }
    let mut rows: Vec<Vec<String>> = d
        .cells
        .iter()
        .map(|c| {
            vec![
                d.geography.to_string(),
                d.dimension.as_str().to_string(),
                d.gender.as_str().to_string(),
                c.category.clone(),
                opt(c.count),
                pct(c.share),
                c.floor_tainted.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        d.geography.to_string(),
        d.dimension.as_str().to_string(),
        d.gender.as_str().to_string(),
        "(unspecified)".into(),
        opt(d.unspecified_count),
        pct(d.unspecified_share),
        "false".into(),
    ]);
    delimited(
        &[
            "geography",
            "dimension",
            "gender",
            "category",
            "count",
            "share_pct",
            "floor_tainted",
        ],
        rows,
    )
}

pub fn correlations(reports: &[CorrelationReport], format: Format) -> String {
    if format == Format::Structured {
        return structured(reports);
    }
    delimited(
        &[
            "dimension",
            "category",
            "census_category",
            "level",
            "n",
            "r",
            "lo",
            "hi",
        ],
        reports.iter().map(|r| {
            vec![
                r.dimension.as_str().to_string(),
                r.category.clone(),
                r.census_category.clone(),
                r.level.as_str().to_string(),
                r.n.to_string(),
                format!("{:.4}", r.r),
                format!("{:.4}", r.lo),
                format!("{:.4}", r.hi),
            ]
        }),
    )
}

pub fn coverage(table: &CoverageTable, format: Format) -> String {
    if format == Format::Structured {
        return structured(table);
    }
    delimited(
        &[
            "geography",
            "platform_total",
            "census_total",
            "census_13_plus",
            "ratio",
            "ratio_13_plus",
        ],
        table.rows().iter().map(|r| {
            vec![
                r.geography.to_string(),
                r.platform_total.to_string(),
                r.census_total.to_string(),
                opt(r.census_13_plus),
                format!("{:.4}", r.ratio()),
                opt(r.ratio_13_plus().map(|v| format!("{v:.4}"))),
            ]
        }),
    )
}

const CF_HEADER: [&str; 7] = [
    "geography",
    "dimension",
    "category",
    "platform_pct",
    "census_pct",
    "cf",
    "floor_tainted",
];

pub fn correction_factors(cfs: &[CorrectionFactor], format: Format) -> String {
    if format == Format::Structured {
        return structured(cfs);
    }
    delimited(
        &CF_HEADER,
        cfs.iter().map(|c| {
            vec![
                c.geography.to_string(),
                c.dimension.as_str().to_string(),
                c.category.clone(),
                pct(c.platform_share),
                pct(c.census_share),
                format!("{:.5}", c.cf),
                c.floor_tainted.to_string(),
            ]
        }),
    )
}

/// Reads a correction-factor table written by [`correction_factors`] in
/// either format. Delimited tables carry five-decimal factors and
/// three-decimal percentages.
pub fn parse_correction_factors(text: &str) -> Result<Vec<CorrectionFactor>, ReportError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| ReportError::Parse(e.to_string()));
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| ReportError::Parse(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CF_HEADER {
        return Err(ReportError::Parse(format!(
            "correction-factor header must be `{}`",
            CF_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ReportError::Parse(e.to_string()))?;
        let at = |what: &str| ReportError::Parse(format!("row {}: bad {what}", i + 1));
        let num = |k: usize, what: &str| rec[k].parse::<f64>().map_err(|_| at(what));
        out.push(CorrectionFactor {
            geography: rec[0].parse().map_err(|_| at("geography"))?,
            dimension: rec[1].parse().map_err(|_| at("dimension"))?,
            category: rec[2].to_string(),
            platform_share: num(3, "platform_pct")? / 100.0,
            census_share: num(4, "census_pct")? / 100.0,
            cf: num(5, "cf")?,
            floor_tainted: rec[6].parse().map_err(|_| at("floor_tainted"))?,
        });
    }
    Ok(out)
}

pub fn ranking(ranked: &[CorrectionFactor], format: Format) -> String {
    if format == Format::Structured {
        return structured(ranked);
    }
    delimited(
        &[
            "rank",
            "geography",
            "dimension",
            "category",
            "cf",
            "floor_tainted",
        ],
        ranked.iter().enumerate().map(|(i, c)| {
            vec![
                (i + 1).to_string(),
                c.geography.name().to_string(),
                c.dimension.as_str().to_string(),
                c.category.clone(),
                format!("{:.5}", c.cf),
                c.floor_tainted.to_string(),
            ]
        }),
    )
}

pub fn adjusted(result: &PostStratified, format: Format) -> String {
    if format == Format::Structured {
        return structured(result);
    }
    let mut rows: Vec<Vec<String>> = result
        .strata
        .iter()
        .map(|s| {
            vec![
                s.category.clone(),
                s.count.to_string(),
                format!("{:.5}", s.cf),
                format!("{:.1}", s.adjusted),
                s.floor_tainted.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "(total)".into(),
        result
            .strata
            .iter()
            .map(|s| s.count)
            .sum::<u64>()
            .to_string(),
        String::new(),
        format!("{:.1}", result.total),
        result.strata.iter().any(|s| s.floor_tainted).to_string(),
    ]);
    delimited(
        &["category", "count", "cf", "adjusted", "floor_tainted"],
        rows,
    )
}

/// Reads an audience file: `category,count[,floor_tainted]`.
pub fn parse_audience(text: &str) -> Result<Vec<(String, u64, bool)>, ReportError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| ReportError::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let tainted_col = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["category", "count"] => false,
        ["category", "count", "floor_tainted"] => true,
        _ => {
            return Err(ReportError::Parse(
                "audience header must be `category,count[,floor_tainted]`".into(),
            ))
        }
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ReportError::Parse(e.to_string()))?;
        let count = rec[1].parse().map_err(|_| {
            ReportError::Parse(format!("row {}: `{}` is not a count", i + 1, &rec[1]))
        })?;
        let tainted = if tainted_col {
            rec[2].parse().map_err(|_| {
                ReportError::Parse(format!(
                    "row {}: floor_tainted must be true or false",
                    i + 1
                ))
            })?
        } else {
            false
        };
        out.push((rec[0].to_string(), count, tainted));
    }
    Ok(out)
}

pub fn regions(rollups: &[RegionRollup], format: Format) -> String {
    if format == Format::Structured {
        return structured(rollups);
    }
    delimited(
        &[
            "region",
            "platform_total",
            "census_total",
            "census_countries",
            "missing_countries",
            "missing_pct",
        ],
        rollups.iter().map(|r| {
            vec![
                r.region.clone(),
                r.platform_total.to_string(),
                r.census_total.to_string(),
                r.census_countries.to_string(),
                r.missing_countries.join(";"),
                pct(r.missing_country_fraction),
            ]
        }),
    )
}

pub fn pyramid(rows: &[PyramidRow], format: Format) -> String {
    if format == Format::Structured {
        return structured(rows);
    }
    delimited(
        &[
            "bucket",
            "platform_male_pct",
            "platform_female_pct",
            "census_male_pct",
            "census_female_pct",
        ],
        rows.iter().map(|r| {
            vec![
                r.bucket.clone(),
                pct(r.platform_male),
                pct(r.platform_female),
                pct(r.census_male),
                pct(r.census_female),
            ]
        }),
    )
}

pub fn scatter(points: &[ScatterPoint], format: Format) -> String {
    if format == Format::Structured {
        return structured(points);
    }
    delimited(
        &["geography", "platform_pct", "census_pct", "floor_tainted"],
        points.iter().map(|p| {
            vec![
                p.geography.clone(),
                pct(p.platform_share),
                pct(p.census_share),
                p.floor_tainted.to_string(),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DimensionId, GeoScope};

    fn cf() -> CorrectionFactor {
        CorrectionFactor::from_shares(
            GeoScope::state("WV").unwrap(),
            DimensionId::Race,
            "AfricanAmerican",
            0.14061,
            0.03507,
            false,
        )
        .unwrap()
    }

    #[test]
    fn cf_rounded_only_in_delimited_output() {
        let text = correction_factors(&[cf()], Format::Delimited);
        assert!(
            text.contains("WV") && text.contains(",14.061,3.507,0.24941,false"),
            "{text}"
        );
        let json = correction_factors(&[cf()], Format::Structured);
        let back = parse_correction_factors(&json).unwrap();
        assert_eq!(back, vec![cf()]);
        let back = parse_correction_factors(&text).unwrap();
        assert_eq!(back[0].cf, 0.24941);
    }

    #[test]
    fn audience_parsing() {
        let a = parse_audience("category,count\nMale,5000\nFemale,7000\n").unwrap();
        assert_eq!(a[1], ("Female".to_string(), 7000, false));
        assert!(parse_audience("cat,n\nx,1\n").is_err());
        assert!(parse_audience("category,count\nx,-1\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
