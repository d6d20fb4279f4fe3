//! The `demo-census` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (including "nothing requested") |
//! | 1 | I/O failure |
//! | 2 | configuration or input error |
//! | 3 | reach backend error |
//! | 4 | baseline cells missing for requested comparisons |
//! | 5 | audience strata do not match the correction-factor table |
//!
//! Every command is a pure function of its flags and input files; no
//! environment variables are read.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    self, aggregate_regions, cell_correction_factors, compile_platform_census, compile_specs,
    correlate_dimension, post_stratify, representation_ranking, series, synthetic_baseline,
    AnalysisError, CoverageTable, PlatformCensus,
};
use crate::census::{
    ingest_acs, ingest_immigrants, ingest_party_affiliation, Baseline, CensusError,
    DemographicDistribution, ImmigrantCounts, ShareBasis, TableId, UNSPECIFIED_ROW,
};
use crate::model::{
    DimensionId, Gender, GeoLevel, GeoScope, ModelError, Registry, TargetingSpec,
    DEFAULT_CITY_RADIUS_MILES,
};
use crate::reach::{
    FixtureBackend, FixtureStore, PopulationConfig, ReachBackend, ReachError, SyntheticBackend,
    SyntheticPopulation,
};
use crate::report::{self, Format, ReportError};

#[derive(Debug, Parser)]
#[command(
    name = "demo-census",
    version,
    about = "Platform demographic census and bias correction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a category registry and print a summary.
    ValidateRegistry(RegistryArgs),
    /// Parse baseline tables into canonical distributions.
    Ingest(IngestArgs),
    /// Compile the platform census for geographies × dimensions.
    Compile(RunArgs),
    /// Correlate the platform census with baselines; report coverage.
    Compare(RunArgs),
    /// Compute correction factors and a representation ranking.
    Correct(RunArgs),
    /// Post-stratify an audience with a correction-factor table.
    Adjust(AdjustArgs),
    /// Write ground-truth baseline tables from a synthetic population.
    SynthBaseline(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RegistryArgs {
    /// Registry file (JSON lines); the bundled US registry when omitted.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Synthetic,
    Fixtures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Delim,
    Struct,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Delim => Format::Delimited,
            FormatArg::Struct => Format::Structured,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Total,
    Classified,
}

impl From<BasisArg> for ShareBasis {
    fn from(b: BasisArg) -> ShareBasis {
        match b {
            BasisArg::Total => ShareBasis::Total,
            BasisArg::Classified => ShareBasis::Classified,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    pub backend: BackendKind,
    /// Overrides the population config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population config (JSON); the bundled config when omitted.
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Overrides the population config's size.
    #[arg(long)]
    pub size: Option<usize>,
    /// Recorded reach estimates (JSON lines).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "delim")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub registry: RegistryArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Baseline tables in the extract format.
    #[arg(long, num_args = 1..)]
    pub baseline: Vec<PathBuf>,
    /// `LEVEL[:NAME][@RADIUS]`; a bare level means every registered place.
    #[arg(long, num_args = 1..)]
    pub geo: Vec<String>,
    #[arg(long, num_args = 1..)]
    pub dimension: Vec<String>,
    /// Share denominator for correlations (default classified) or factors
    /// (default total).
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub registry: RegistryArgs,
    #[arg(long, required = true, num_args = 1..)]
    pub table: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AdjustArgs {
    /// `category,count[,floor_tainted]` audience strata.
    #[arg(long)]
    pub audience: PathBuf,
    /// Correction-factor table written by `correct`.
    #[arg(long)]
    pub cf: PathBuf,
    /// Geography whose factors apply, when the table holds several.
    #[arg(long)]
    pub geo: Option<String>,
    #[arg(long)]
    pub dimension: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub registry: RegistryArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, num_args = 1..)]
    pub geo: Vec<String>,
    #[arg(long, num_args = 1..)]
    pub dimension: Vec<String>,
    /// Also write male and female age tables (for age pyramids).
    #[arg(long)]
    pub by_gender: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
    #[error("missing baseline cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("{0}")]
    StratumMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::MissingCells(_) => 4,
            CliError::StratumMismatch(_) => 5,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CensusError> for CliError {
    fn from(e: CensusError) -> Self {
        match e {
            CensusError::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ReachError> for CliError {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::Io(m) => CliError::Io(m),
            ReachError::Config(_) | ReachError::Parse(_) | ReachError::Model(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Backend(b) => b.into(),
            AnalysisError::MissingCells(m) => CliError::MissingCells(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => CliError::Io(e.to_string()),
            ReportError::Parse(m) => CliError::Config(m),
        }
    }
}

/// Which reach backend a run uses.
#[derive(Debug, Clone)]
pub enum BackendChoice {
    Synthetic(PopulationConfig),
    Fixtures(PathBuf),
}

/// Fully resolved flags of a compile/compare/correct run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub registry: Registry,
    pub backend: BackendChoice,
    pub baselines: Vec<PathBuf>,
    pub geos: Vec<GeoScope>,
    pub dimensions: Vec<DimensionId>,
    pub basis: Option<ShareBasis>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn load_registry(args: &RegistryArgs) -> Result<Registry, CliError> {
    match &args.registry {
        Some(p) => Ok(Registry::load(p)?),
        None => Ok(Registry::builtin()),
    }
}

fn population_config(
    population: Option<&Path>,
    seed: Option<u64>,
    size: Option<usize>,
) -> Result<PopulationConfig, CliError> {
    let mut config = match population {
        Some(p) => PopulationConfig::load(p)?,
        None => PopulationConfig::builtin(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = size {
        config.size = n;
    }
    Ok(config)
}

/// Expands `LEVEL[:NAME][@RADIUS]` into geographies.
pub fn parse_geos(registry: &Registry, specs: &[String]) -> Result<Vec<GeoScope>, CliError> {
    let mut out = Vec::new();
    for spec in specs {
        let (body, radius) = match spec.split_once('@') {
            Some((b, r)) => (
                b,
                Some(
                    r.parse::<u32>()
                        .map_err(|_| CliError::Config(format!("bad radius in `{spec}`")))?,
                ),
            ),
            None => (spec.as_str(), None),
        };
        match body.split_once(':') {
            Some((level, name)) => {
                let level: GeoLevel = level.parse()?;
                let radius =
                    (level == GeoLevel::City).then(|| radius.unwrap_or(DEFAULT_CITY_RADIUS_MILES));
                let geo = GeoScope::new(level, name, radius)?;
                registry.check_geo(&geo)?;
                out.push(geo);
            }
            None => {
                let level: GeoLevel = body.parse()?;
                out.extend(registry.geos_at(level, radius.unwrap_or(DEFAULT_CITY_RADIUS_MILES))?);
            }
        }
    }
    Ok(out)
}

pub fn parse_dimensions(
    registry: &Registry,
    names: &[String],
) -> Result<Vec<DimensionId>, CliError> {
    let mut out = Vec::new();
    for n in names {
        let d: DimensionId = n.parse()?;
        registry.dimension(d)?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<RunConfig, CliError> {
        let registry = load_registry(&args.registry)?;
        let b = &args.backend;
        let backend = match b.backend {
            BackendKind::Synthetic => {
                if b.fixtures.is_some() {
                    return Err(CliError::Config(
                        "--fixtures needs --backend fixtures".into(),
                    ));
                }
                BackendChoice::Synthetic(population_config(
                    b.population.as_deref(),
                    b.seed,
                    b.size,
                )?)
            }
            BackendKind::Fixtures => {
                if b.seed.is_some() || b.population.is_some() || b.size.is_some() {
                    return Err(CliError::Config(
                        "--seed, --population and --size apply to the synthetic backend only"
                            .into(),
                    ));
                }
                BackendChoice::Fixtures(b.fixtures.clone().ok_or_else(|| {
                    CliError::Config("--backend fixtures needs --fixtures PATH".into())
                })?)
            }
        };
        Ok(RunConfig {
            geos: parse_geos(&registry, &args.geo)?,
            dimensions: parse_dimensions(&registry, &args.dimension)?,
            registry,
            backend,
            baselines: args.baseline.clone(),
            basis: args.basis.map(Into::into),
            out: args.output.out.clone(),
            format: args.output.format.into(),
        })
    }

    pub fn build_backend(&self) -> Result<Box<dyn ReachBackend>, CliError> {
        Ok(match &self.backend {
            BackendChoice::Synthetic(config) => {
                let pop = SyntheticPopulation::generate(config, &self.registry)?;
                Box::new(SyntheticBackend::new(Arc::new(pop)))
            }
            BackendChoice::Fixtures(path) => Box::new(
                FixtureBackend::new(FixtureStore::load(path)?).with_registry(self.registry.clone()),
            ),
        })
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| CliError::Config("--out DIR is required".into()))?;
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Baselines folded into distributions, plus immigrant counts.
struct Baselines {
    distributions: Vec<DemographicDistribution>,
    immigrants: Vec<ImmigrantCounts>,
}

fn load_baselines(
    registry: &Registry,
    paths: &[PathBuf],
    warn: &mut dyn Write,
) -> Result<Baselines, CliError> {
    let mut out = Baselines {
        distributions: Vec::new(),
        immigrants: Vec::new(),
    };
    for path in paths {
        let ctx = |e: CliError| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        };
        match Baseline::load(path).map_err(|e| ctx(e.into()))? {
            Baseline::Party(t) => {
                out.distributions
                    .extend(ingest_party_affiliation(&t, registry).map_err(|e| ctx(e.into()))?);
            }
            Baseline::Acs(t) if t.table_id == TableId::B05006 => {
                let counts = ingest_immigrants(&t, registry).map_err(|e| ctx(e.into()))?;
                for s in &counts.skipped {
                    let _ = writeln!(
                        warn,
                        "warning: {}: unknown country `{s}` skipped",
                        path.display()
                    );
                }
                let unspecified = t
                    .rows
                    .iter()
                    .filter(|r| {
                        r.category == UNSPECIFIED_ROW
                            || registry.resolve_origin(&r.category).is_none()
                    })
                    .map(|r| r.count)
                    .sum();
                let dim = registry.dimension(DimensionId::CountryOfOrigin)?;
                let cells = dim
                    .canonical_ids()
                    .map(|c| {
                        (
                            c.to_string(),
                            counts.counts.get(c).copied().unwrap_or(0),
                            false,
                        )
                    })
                    .collect::<Vec<_>>();
                out.distributions.push(DemographicDistribution::from_counts(
                    t.geography.clone(),
                    DimensionId::CountryOfOrigin,
                    cells,
                    unspecified,
                ));
                out.immigrants.push(counts);
            }
            Baseline::Acs(t) => out
                .distributions
                .push(ingest_acs(&t, registry).map_err(|e| ctx(e.into()))?),
        }
    }
    Ok(out)
}

fn find_baseline<'a>(
    baselines: &'a [DemographicDistribution],
    geo: &GeoScope,
    dim: DimensionId,
    gender: Gender,
) -> Option<&'a DemographicDistribution> {
    baselines
        .iter()
        .find(|d| d.dimension == dim && d.gender == gender && d.geography.same_place(geo))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    report::write_atomic(&dir.join(name), contents.as_bytes())?;
    Ok(())
}

fn dim_token(d: DimensionId) -> String {
    d.as_str().to_ascii_lowercase()
}

fn compile_all(config: &RunConfig) -> Result<Vec<PlatformCensus>, CliError> {
    let backend = config.build_backend()?;
    Ok(compile_platform_census(
        &backend,
        &config.registry,
        &config.geos,
        &config.dimensions,
    )?)
}

fn nothing_requested(config: &RunConfig, warn: &mut dyn Write) -> bool {
    if config.dimensions.is_empty() || config.geos.is_empty() {
        let _ = writeln!(
            warn,
            "warning: no dimensions or geographies requested; nothing to do"
        );
        true
    } else {
        false
    }
}

fn check_baselines(config: &RunConfig, baselines: &Baselines) -> Result<(), CliError> {
    let mut missing = Vec::new();
    for geo in &config.geos {
        for &dim in &config.dimensions {
            if dim == DimensionId::PoliticalLeaning && geo.level() == GeoLevel::City {
                return Err(CliError::Config(format!(
                    "{geo}: no political-leaning baseline exists below the state level"
                )));
            }
            if find_baseline(&baselines.distributions, geo, dim, Gender::All).is_none() {
                missing.push(format!("{geo} {dim}"));
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingCells(missing))
    }
}

pub fn cmd_validate_registry(args: &RegistryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let registry = load_registry(args)?;
    for line in registry.summary() {
        writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn cmd_ingest(
    args: &IngestArgs,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<(), CliError> {
    let registry = load_registry(&args.registry)?;
    let format: Format = args.output.format.into();
    let baselines = load_baselines(&registry, &args.table, warn)?;
    let mut files = Vec::new();
    for d in &baselines.distributions {
        let gender = if d.gender == Gender::All {
            String::new()
        } else {
            format!("_{}", d.gender.as_str())
        };
        files.push((
            format!(
                "baseline_{}_{}{gender}.{}",
                d.geography.file_token(),
                dim_token(d.dimension),
                format.extension()
            ),
            report::distribution(d, format),
        ));
    }
    match &args.output.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for (name, text) in files {
                write_file(dir, &name, &text)?;
            }
        }
        None => {
            for (_, text) in files {
                out.write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_compile(config: &RunConfig, warn: &mut dyn Write) -> Result<(), CliError> {
    if nothing_requested(config, warn) {
        return Ok(());
    }
    let dir = config.out_dir()?.to_path_buf();
    let cells = compile_all(config)?;
    for cell in &cells {
        let name = format!(
            "platform_{}_{}.{}",
            cell.geography.file_token(),
            dim_token(cell.dimension),
            config.format.extension()
        );
        write_file(&dir, &name, &report::platform_census(cell, config.format))?;
    }
    Ok(())
}

pub fn cmd_compare(config: &RunConfig, warn: &mut dyn Write) -> Result<(), CliError> {
    if nothing_requested(config, warn) {
        return Ok(());
    }
    let baselines = load_baselines(&config.registry, &config.baselines, warn)?;
    check_baselines(config, &baselines)?;
    let dir = config.out_dir()?.to_path_buf();
    let fmt = config.format;
    let ext = fmt.extension();
    let basis = config.basis.unwrap_or(ShareBasis::Classified);
    let backend = config.build_backend()?;
    let cells =
        compile_platform_census(&backend, &config.registry, &config.geos, &config.dimensions)?;
    let platform: Vec<DemographicDistribution> =
        cells.iter().map(|c| c.distribution.clone()).collect();

    let mut reports = Vec::new();
    for level in [GeoLevel::State, GeoLevel::City] {
        let at_level: Vec<DemographicDistribution> = platform
            .iter()
            .filter(|d| d.geography.level() == level)
            .cloned()
            .collect();
        if at_level.is_empty() {
            continue;
        }
        for &dim in &config.dimensions {
            let table = correlate_dimension(&at_level, &baselines.distributions, dim, basis)?;
            for (d, cat, why) in &table.skipped {
                let _ = writeln!(warn, "warning: {level} {d}/{cat}: no correlation ({why})");
            }
            reports.extend(table.reports);
            if let Some(first) = at_level.iter().find(|d| d.dimension == dim) {
                for cat in first.categories() {
                    let points =
                        series::share_scatter(&at_level, &baselines.distributions, dim, cat, basis);
                    let name = format!(
                        "scatter_{level}_{}_{}.{ext}",
                        dim_token(dim),
                        file_safe(cat)
                    );
                    write_file(&dir, &name, &report::scatter(&points, fmt))?;
                }
            }
        }
    }
    write_file(
        &dir,
        &format!("correlations.{ext}"),
        &report::correlations(&reports, fmt),
    )?;

    // Coverage against all-ages baselines wherever an age table exists.
    let mut totals: Vec<(GeoScope, u64)> = Vec::new();
    for c in &cells {
        if !totals.iter().any(|(g, _)| g.same_place(&c.geography)) {
            totals.push((c.geography.clone(), c.total));
        }
    }
    totals.retain(|(g, _)| {
        find_baseline(&baselines.distributions, g, DimensionId::Age, Gender::All).is_some()
    });
    if !totals.is_empty() {
        let coverage = CoverageTable::from_age_baselines(&totals, &baselines.distributions)?;
        if coverage.rows().len() >= 2 {
            if let Ok(r) = coverage.total_correlation() {
                let _ = writeln!(
                    warn,
                    "note: correlation of platform and baseline totals r = {r:.4}"
                );
            }
        }
        write_file(
            &dir,
            &format!("coverage.{ext}"),
            &report::coverage(&coverage, fmt),
        )?;
    }

    // Age pyramids where gender-split age baselines exist.
    let pyramid_geos: Vec<&GeoScope> = config
        .geos
        .iter()
        .filter(|g| {
            find_baseline(&baselines.distributions, g, DimensionId::Age, Gender::Male).is_some()
                && find_baseline(
                    &baselines.distributions,
                    g,
                    DimensionId::Age,
                    Gender::Female,
                )
                .is_some()
        })
        .collect();
    for geo in pyramid_geos {
        let bases =
            [Gender::Male, Gender::Female].map(|g| TargetingSpec::new(geo.clone()).with_gender(g));
        let p = compile_specs(&backend, &config.registry, &bases, &[DimensionId::Age])?;
        let p: Vec<DemographicDistribution> = p.into_iter().map(|c| c.distribution).collect();
        let c: Vec<DemographicDistribution> = [Gender::Male, Gender::Female]
            .iter()
            .filter_map(|g| {
                find_baseline(&baselines.distributions, geo, DimensionId::Age, *g).cloned()
            })
            .collect();
        let rows = series::age_pyramid(&p, &c)?;
        write_file(
            &dir,
            &format!("pyramid_{}.{ext}", geo.file_token()),
            &report::pyramid(&rows, fmt),
        )?;
    }

    // Immigrant regions where origin counts exist on both sides.
    for counts in &baselines.immigrants {
        let Some(cell) = cells.iter().find(|c| {
            c.dimension == DimensionId::CountryOfOrigin && c.geography.same_place(&counts.geography)
        }) else {
            continue;
        };
        let platform: BTreeMap<String, u64> = cell
            .native
            .iter()
            .filter_map(|n| Some((n.canonical.clone()?, n.count)))
            .collect();
        let rollups = aggregate_regions(&platform, &counts.counts, &config.registry.region_map());
        write_file(
            &dir,
            &format!("regions_{}.{ext}", counts.geography.file_token()),
            &report::regions(&rollups, fmt),
        )?;
    }
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_correct(config: &RunConfig, warn: &mut dyn Write) -> Result<(), CliError> {
    if nothing_requested(config, warn) {
        return Ok(());
    }
    let baselines = load_baselines(&config.registry, &config.baselines, warn)?;
    check_baselines(config, &baselines)?;
    let dir = config.out_dir()?.to_path_buf();
    let fmt = config.format;
    let basis = config.basis.unwrap_or(ShareBasis::Total);
    let cells = compile_all(config)?;

    let mut by_table: BTreeMap<(GeoLevel, DimensionId), Vec<analysis::CorrectionFactor>> =
        BTreeMap::new();
    for cell in &cells {
        let census = find_baseline(
            &baselines.distributions,
            &cell.geography,
            cell.dimension,
            Gender::All,
        )
        .expect("checked above");
        for cf in cell_correction_factors(&cell.distribution, census, basis)? {
            match cf {
                Ok(cf) => by_table
                    .entry((cell.geography.level(), cell.dimension))
                    .or_default()
                    .push(cf),
                Err(e) => {
                    let _ = writeln!(warn, "warning: {e}");
                }
            }
        }
    }
    for ((level, dim), cfs) in &by_table {
        let stem = format!("{level}_{}", dim_token(*dim));
        write_file(
            &dir,
            &format!("cf_{stem}.{}", fmt.extension()),
            &report::correction_factors(cfs, fmt),
        )?;
        let mut ranked = Vec::new();
        let mut categories: Vec<&str> = Vec::new();
        for cf in cfs {
            if !categories.contains(&cf.category.as_str()) {
                categories.push(&cf.category);
            }
        }
        for cat in categories {
            let subset: Vec<_> = cfs.iter().filter(|c| c.category == cat).cloned().collect();
            ranked.extend(representation_ranking(&subset));
        }
        write_file(
            &dir,
            &format!("ranking_{stem}.{}", fmt.extension()),
            &report::ranking(&ranked, fmt),
        )?;
    }
    Ok(())
}

pub fn cmd_adjust(args: &AdjustArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    let audience = report::parse_audience(&read(&args.audience)?)?;
    let mut cfs = report::parse_correction_factors(&read(&args.cf)?)?;
    if let Some(g) = &args.geo {
        let geo: GeoScope = g.parse()?;
        cfs.retain(|c| c.geography.same_place(&geo));
    }
    if let Some(d) = &args.dimension {
        let dim: DimensionId = d.parse()?;
        cfs.retain(|c| c.dimension == dim);
    }
    let result =
        post_stratify(&audience, &cfs).map_err(|e| CliError::StratumMismatch(e.to_string()))?;
    let text = report::adjusted(&result, args.output.format.into());
    match &args.output.out {
        Some(path) => report::write_atomic(path, text.as_bytes())?,
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(())
}

pub fn cmd_synth_baseline(args: &SynthArgs, warn: &mut dyn Write) -> Result<(), CliError> {
    let registry = load_registry(&args.registry)?;
    let geos = parse_geos(&registry, &args.geo)?;
    let dims = parse_dimensions(&registry, &args.dimension)?;
    if geos.is_empty() || dims.is_empty() {
        let _ = writeln!(
            warn,
            "warning: no dimensions or geographies requested; nothing to do"
        );
        return Ok(());
    }
    let config = population_config(args.population.as_deref(), args.seed, args.size)?;
    let pop = SyntheticPopulation::generate(&config, &registry)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    for geo in &geos {
        for &dim in &dims {
            if dim == DimensionId::PoliticalLeaning && geo.level() == GeoLevel::City {
                let _ = writeln!(
                    warn,
                    "warning: {geo}: no party-affiliation baseline for cities; skipped"
                );
                continue;
            }
            let mut genders = vec![Gender::All];
            if args.by_gender && dim == DimensionId::Age {
                genders.extend([Gender::Male, Gender::Female]);
            }
            for g in genders {
                let table = synthetic_baseline(&pop, &registry, geo, dim, g)?;
                let text = match &table {
                    Baseline::Acs(t) => t.to_extract(),
                    Baseline::Party(t) => t.to_extract(),
                };
                let suffix = if g == Gender::All {
                    String::new()
                } else {
                    format!("_{}", g.as_str())
                };
                let name = format!(
                    "{}_{}_{}{suffix}.csv",
                    table.table_id().as_str().to_ascii_lowercase(),
                    geo.file_token(),
                    dim_token(dim)
                );
                write_file(&args.out, &name, &text)?;
            }
        }
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write, warn: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::ValidateRegistry(a) => cmd_validate_registry(a, out),
        Command::Ingest(a) => cmd_ingest(a, out, warn),
        Command::Compile(a) => cmd_compile(&RunConfig::from_args(a)?, warn),
        Command::Compare(a) => cmd_compare(&RunConfig::from_args(a)?, warn),
        Command::Correct(a) => cmd_correct(&RunConfig::from_args(a)?, warn),
        Command::Adjust(a) => cmd_adjust(a, out),
        Command::SynthBaseline(a) => cmd_synth_baseline(a, warn),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (stdout, stderr) = (std::io::stdout(), std::io::stderr());
    match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
