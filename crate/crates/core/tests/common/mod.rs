//! Properties shared by the proptest suite and the acceptance harness.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use demo_census::analysis::table_for;
use demo_census::analysis::{derive_residual_race, pearson, AnalysisError};
use demo_census::census::{ingest_acs, CensusTable};
use demo_census::model::{
    map_to_canonical, AttributeKey, DimensionId, Gender, GeoScope, ModelError, Registry, Side,
    TargetingSpec,
};
use demo_census::reach::{
    floored, PopulationConfig, ReachBackend, RoundPolicy, SyntheticBackend, SyntheticPopulation,
    PRIVACY_FLOOR,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub fn registry() -> &'static Registry {
    static R: OnceLock<Registry> = OnceLock::new();
    R.get_or_init(Registry::builtin)
}

/// A small shared population for properties that query a backend.
pub fn small_population() -> Arc<SyntheticPopulation> {
    static P: OnceLock<Arc<SyntheticPopulation>> = OnceLock::new();
    P.get_or_init(|| {
        let mut config = PopulationConfig::builtin();
        config.size = 40_000;
        config.seed = 7;
        Arc::new(SyntheticPopulation::generate(&config, registry()).unwrap())
    })
    .clone()
}

const ATTRS: [DimensionId; 4] = [
    DimensionId::Race,
    DimensionId::Income,
    DimensionId::Education,
    DimensionId::PoliticalLeaning,
];

// ---- Pearson -------------------------------------------------------------

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-1000.0f64..1000.0, n),
            prop::collection::vec(-1000.0f64..1000.0, n),
        )
    })
}

fn scale() -> impl Strategy<Value = f64> {
    prop_oneof![-20.0f64..-0.05, 0.05f64..20.0]
}

/// Two series and the affine maps `a*x + b`, `c*y + d`.
pub type AffineCase = ((Vec<f64>, Vec<f64>), (f64, f64, f64, f64));

pub fn affine_case() -> impl Strategy<Value = AffineCase> {
    (
        series(),
        (scale(), -500.0f64..500.0, scale(), -500.0f64..500.0),
    )
}

pub fn pearson_affine_symmetric(((x, y), (a, b, c, d)): AffineCase) -> Result<(), TestCaseError> {
    let Ok(r) = pearson(&x, &y) else {
        return Ok(());
    };
    let r_yx = pearson(&y, &x).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(r, r_yx, 1e-12), "r(x,y)={r} r(y,x)={r_yx}");
    prop_assert!((-1.0..=1.0).contains(&r));

    let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
    let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
    let rt = pearson(&xt, &yt).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let expect = if a * c > 0.0 { r } else { -r };
    prop_assert!(close(rt, expect, 1e-9), "affine r={rt} expected {expect}");

    let rxx = pearson(&x, &x).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(rxx, 1.0, 1e-12), "r(x,x)={rxx}");
    Ok(())
}

// ---- Reach anti-monotonicity and floor --------------------------------------

#[derive(Debug, Clone)]
pub struct SpecPlan {
    state: usize,
    age: (u8, u8),
    gender: u8,
    includes: Vec<(usize, usize)>,
    narrowing: Narrowing,
}

#[derive(Debug, Clone)]
pub enum Narrowing {
    Include(usize, usize),
    Exclude(usize, usize),
    Interest(usize, bool),
    Age(u8, u8),
    Gender(bool),
}

pub fn spec_plan() -> impl Strategy<Value = SpecPlan> {
    let pick = (0usize..ATTRS.len(), 0usize..16);
    let narrowing = prop_oneof![
        pick.clone().prop_map(|(d, c)| Narrowing::Include(d, c)),
        pick.clone().prop_map(|(d, c)| Narrowing::Exclude(d, c)),
        (0usize..3, any::<bool>()).prop_map(|(i, yes)| Narrowing::Interest(i, yes)),
        (0u8..30, 0u8..30).prop_map(|(a, b)| Narrowing::Age(a, b)),
        any::<bool>().prop_map(Narrowing::Gender),
    ];
    (
        0usize..51,
        (13u8..=65, 13u8..=65),
        0u8..3,
        prop::collection::vec(pick, 0..3),
        narrowing,
    )
        .prop_map(|(state, (a, b), gender, includes, narrowing)| SpecPlan {
            state,
            age: (a.min(b), a.max(b)),
            gender,
            includes,
            narrowing,
        })
}

fn native(pop: &SyntheticPopulation, d: usize, c: usize) -> (DimensionId, String) {
    let dim = ATTRS[d];
    let cats = pop.native_categories(dim);
    (dim, cats[c % cats.len()].to_string())
}

fn build(pop: &SyntheticPopulation, plan: &SpecPlan) -> Result<TargetingSpec, ModelError> {
    let geo = GeoScope::state(pop.state_ids()[plan.state % pop.state_ids().len()].clone())?;
    let gender = [Gender::All, Gender::Male, Gender::Female][plan.gender as usize];
    let mut spec = TargetingSpec::new(geo)
        .with_age(plan.age.0, plan.age.1)?
        .with_gender(gender);
    for &(d, c) in &plan.includes {
        let (dim, cat) = native(pop, d, c);
        spec = spec.with_include(dim, cat)?;
    }
    Ok(spec)
}

fn narrow(pop: &SyntheticPopulation, spec: &TargetingSpec, n: &Narrowing) -> Option<TargetingSpec> {
    let constrained = |dim: DimensionId| {
        spec.includes()
            .iter()
            .chain(spec.excludes())
            .any(|c| c.key == AttributeKey::Demographic(dim))
    };
    match *n {
        // A further include on an unconstrained dimension intersects.
        Narrowing::Include(d, c) => {
            let (dim, cat) = native(pop, d, c);
            (!constrained(dim))
                .then(|| spec.with_include(dim, cat).ok())
                .flatten()
        }
        Narrowing::Exclude(d, c) => {
            let (dim, cat) = native(pop, d, c);
            let included = spec
                .includes()
                .iter()
                .any(|k| k.key == AttributeKey::Demographic(dim));
            (!included)
                .then(|| spec.with_exclude(dim, cat).ok())
                .flatten()
        }
        Narrowing::Interest(i, yes) => {
            let name = pop.interests()[i % pop.interests().len()].clone();
            let key = AttributeKey::Extra(name);
            if yes {
                spec.with_include(key, "yes").ok()
            } else {
                spec.with_exclude(key, "yes").ok()
            }
        }
        Narrowing::Age(up, down) => {
            let (lo, hi) = (spec.age().lo(), spec.age().hi());
            let lo2 = lo.saturating_add(up).min(hi);
            let hi2 = hi.saturating_sub(down).max(lo2);
            spec.with_age(lo2, hi2).ok()
        }
        Narrowing::Gender(male) => (spec.gender() == Gender::All)
            .then(|| spec.with_gender(if male { Gender::Male } else { Gender::Female })),
    }
}

pub fn reach_anti_monotone(plan: SpecPlan) -> Result<(), TestCaseError> {
    let pop = small_population();
    let Ok(spec) = build(&pop, &plan) else {
        return Ok(());
    };
    let Some(narrower) = narrow(&pop, &spec, &plan.narrowing) else {
        return Ok(());
    };
    let backend = SyntheticBackend::new(pop).with_floor(false);
    let wide = backend
        .reach(&spec)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let tight = backend
        .reach(&narrower)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(
        tight.count <= wide.count,
        "{} = {} > {} = {}",
        narrower.key(),
        tight.count,
        spec.key(),
        wide.count
    );
    Ok(())
}

pub fn floor_case() -> impl Strategy<Value = (SpecPlan, u64, u32)> {
    (spec_plan(), 0u64..5_000_000, 0u32..5)
}

pub fn floor_sound((plan, raw, digits): (SpecPlan, u64, u32)) -> Result<(), TestCaseError> {
    let policy = RoundPolicy::SignificantDigits(digits);
    let (count, tainted) = floored(raw, policy);
    prop_assert!(count >= PRIVACY_FLOOR);
    prop_assert_eq!(tainted, raw < PRIVACY_FLOOR);
    if tainted {
        prop_assert_eq!(count, PRIVACY_FLOOR);
    } else if digits == 0 {
        prop_assert_eq!(count, raw);
    } else {
        let d = raw.checked_ilog10().map_or(1, |l| l + 1);
        let unit = if d > digits { 10u64.pow(d - digits) } else { 1 };
        prop_assert!(
            count.abs_diff(raw) * 2 <= unit,
            "{raw} -> {count} at {digits} digits"
        );
    }

    let pop = small_population();
    let Ok(spec) = build(&pop, &plan) else {
        return Ok(());
    };
    let exact = SyntheticBackend::new(pop.clone()).with_floor(false);
    let public = SyntheticBackend::new(pop);
    let truth = exact
        .reach(&spec)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let shown = public
        .reach(&spec)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(!truth.floor_applied);
    if truth.count < PRIVACY_FLOOR {
        prop_assert_eq!(shown.count, PRIVACY_FLOOR);
        prop_assert!(shown.floor_applied);
    } else {
        prop_assert_eq!(shown.count, truth.count);
        prop_assert!(!shown.floor_tainted());
    }
    Ok(())
}

// ---- Ingestion ----------------------------------------------------------------

pub fn ingest_case() -> impl Strategy<Value = (usize, Vec<u64>)> {
    (0usize..4, prop::collection::vec(0u64..50_000_000, 40))
}

/// Every person in an ingested table lands in exactly one canonical cell or
/// in `unspecified`.
pub fn ingest_conserves((which, counts): (usize, Vec<u64>)) -> Result<(), TestCaseError> {
    let dim = [
        DimensionId::Age,
        DimensionId::Race,
        DimensionId::Income,
        DimensionId::Education,
    ][which];
    let reg = registry();
    let rows: Vec<(String, u64)> = reg
        .mapping(dim)
        .unwrap()
        .entries_on(Side::Census)
        .zip(counts.iter().cycle())
        .map(|(e, n)| (e.source.clone(), *n))
        .collect();
    let table =
        CensusTable::from_counts(table_for(dim), GeoScope::state("OH").unwrap(), "test", rows);
    prop_assert_eq!(table.dimension, dim);
    let d = ingest_acs(&table, reg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let classified: u64 = d.cells.iter().map(|c| c.count.unwrap()).sum();
    prop_assert_eq!(
        classified + d.unspecified_count.unwrap(),
        table.source_total().unwrap()
    );
    prop_assert_eq!(d.total(), Some(table.source_total().unwrap()));
    Ok(())
}

// ---- Mapping totality ---------------------------------------------------------

pub fn mapping_case() -> impl Strategy<Value = (usize, bool, usize, String)> {
    (
        0usize..DimensionId::ALL.len(),
        any::<bool>(),
        0usize..200,
        "[a-z]{1,12}",
    )
}

/// Every registered source category maps into its dimension's canonical
/// set (or to unspecified); anything else is rejected.
pub fn mapping_total(
    (d, platform, i, junk): (usize, bool, usize, String),
) -> Result<(), TestCaseError> {
    let reg = registry();
    let dim_id = DimensionId::ALL[d];
    let dim = reg.dimension(dim_id).unwrap();
    let mapping = reg.mapping(dim_id).unwrap();
    let side = if platform {
        Side::Platform
    } else {
        Side::Census
    };
    let entries: Vec<_> = mapping.entries_on(side).collect();
    if !entries.is_empty() {
        let e = entries[i % entries.len()];
        let target = map_to_canonical(mapping, side, &e.source)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        if let Some(c) = target.canonical() {
            prop_assert!(dim.has_canonical(c), "{dim_id} {} -> {c}", e.source);
        }
    }
    let junk = format!("zz {junk}");
    let rejected = matches!(
        map_to_canonical(mapping, side, &junk),
        Err(ModelError::UnmappedCategory { .. })
    );
    prop_assert!(rejected, "{junk} accepted");
    // Every canonical category is reachable from both sides.
    for c in dim.canonical_ids() {
        for s in [Side::Platform, Side::Census] {
            prop_assert!(
                mapping
                    .entries_on(s)
                    .any(|e| e.target.canonical() == Some(c)),
                "{dim_id} {c} unreachable from {s:?}"
            );
        }
    }
    Ok(())
}

// ---- Residual race --------------------------------------------------------

pub fn residual_case() -> impl Strategy<Value = (u64, u64, u64, u64)> {
    (
        0u64..u64::MAX / 2,
        0u64..u64::MAX / 4,
        0u64..u64::MAX / 4,
        0u64..u64::MAX / 4,
    )
        .prop_map(|(t, h, a, s)| (t, h % (t / 2 + 1), a % (t / 3 + 2), s % (t / 4 + 3)))
}

pub fn residual_conserves((total, h, a, s): (u64, u64, u64, u64)) -> Result<(), TestCaseError> {
    let named = h as u128 + a as u128 + s as u128;
    match derive_residual_race(total, h, a, s) {
        Ok(white) => {
            prop_assert!(named <= total as u128);
            prop_assert_eq!(white as u128 + named, total as u128);
        }
        Err(AnalysisError::NegativeResidual { total: t, named: n }) => {
            prop_assert_eq!(t, total);
            prop_assert_eq!(n, named);
            prop_assert!(named > total as u128);
        }
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    }
    Ok(())
}

// ---- Runner for the acceptance harness -----------------------------------------

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Runs every property once with a fixed case budget.
pub fn run_all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "pearson affine invariance, symmetry, r(x,x)=1",
            run(512, affine_case(), pearson_affine_symmetric),
        ),
        (
            "reach anti-monotone under narrowing",
            run(256, spec_plan(), reach_anti_monotone),
        ),
        (
            "privacy floor soundness",
            run(256, floor_case(), floor_sound),
        ),
        (
            "ingestion loses no one",
            run(256, ingest_case(), ingest_conserves),
        ),
        (
            "category mapping totality",
            run(256, mapping_case(), mapping_total),
        ),
        (
            "residual race conservation",
            run(1024, residual_case(), residual_conserves),
        ),
    ]
}
