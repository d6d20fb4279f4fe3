//! C interface to `demo_census`.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`DcStatus`]; results go through out
//!   pointers, which are written only on success.
//! * On failure a message is kept per thread; read it with
//!   [`dc_last_error`] before the next call on the same thread.
//! * Handles are opaque and owned by the caller, who releases them with the
//!   matching `*_free` function. Passing NULL to a free function is a no-op.
//! * Strings are NUL-terminated UTF-8. Functions that produce strings copy
//!   into a caller buffer and report the needed size (excluding the NUL)
//!   through `out_len`; a too-small buffer yields `DC_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use demo_census::analysis::{self, AnalysisError, CorrectionFactor};
use demo_census::model::{
    map_to_canonical, AttributeKey, DimensionId, Gender, ModelError, Registry, Side, TargetingSpec,
};
use demo_census::reach::{
    FixtureBackend, FixtureStore, PopulationConfig, ReachBackend, ReachError, SyntheticBackend,
    SyntheticPopulation,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnmappedCategory = 4,
    ConflictingConstraint = 5,
    UnknownGeography = 6,
    BackendError = 7,
    Io = 8,
    Domain = 9,
    NegativeResidual = 10,
    ZeroPlatformShare = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcSide {
    Platform = 0,
    Census = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcGender {
    All = 0,
    Male = 1,
    Female = 2,
}

/// One reach estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DcReach {
    pub count: u64,
    /// The true audience was under the privacy floor.
    pub floor_applied: bool,
    /// A recorded count equal to the floor, possibly censored.
    pub ambiguous_floor: bool,
}

/// Category registry handle.
pub struct DcRegistry(Registry);

/// Targeting spec handle.
pub struct DcSpec(TargetingSpec);

/// Reach backend handle.
pub struct DcBackend(Box<dyn ReachBackend>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DcStatus, String);

type Res<T> = Result<T, Failure>;

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::UnmappedCategory { .. } => DcStatus::UnmappedCategory,
            ModelError::ConflictingConstraint(_) => DcStatus::ConflictingConstraint,
            ModelError::GeographyUnknown(_) => DcStatus::UnknownGeography,
            ModelError::Io(_) => DcStatus::Io,
            _ => DcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ReachError> for Failure {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::Model(m) => m.into(),
            ReachError::Io(m) => Failure(DcStatus::Io, m),
            ReachError::GeographyUnknown(_) => Failure(DcStatus::UnknownGeography, e.to_string()),
            ReachError::Config(_) | ReachError::Parse(_) => {
                Failure(DcStatus::InvalidArgument, e.to_string())
            }
            other => Failure(DcStatus::BackendError, other.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let status = match &e {
            AnalysisError::NegativeResidual { .. } => DcStatus::NegativeResidual,
            AnalysisError::ZeroPlatformShare { .. } => DcStatus::ZeroPlatformShare,
            AnalysisError::Backend(_) => DcStatus::BackendError,
            AnalysisError::Model(m) => return m.clone().into(),
            _ => DcStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Res<()>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DcStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Res<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Res<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into `*out`; nothing is allocated when `out` is NULL.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Res<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn copy_str(s: &str, buf: *mut c_char, buf_len: usize, out_len: *mut usize) -> Res<()> {
    if !out_len.is_null() {
        out_len.write(s.len());
    }
    if buf.is_null() || buf_len < s.len() + 1 {
        return Err(Failure(
            DcStatus::BufferTooSmall,
            format!("need {} bytes, buffer holds {buf_len}", s.len() + 1),
        ));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

fn parse_dimension(s: &str) -> Res<DimensionId> {
    Ok(s.parse::<DimensionId>()?)
}

/// The thread's most recent error message, or NULL when the last call
/// succeeded. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn dc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- registry ------------------------------------------------------------------

/// The bundled US registry.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_registry_builtin(out: *mut *mut DcRegistry) -> DcStatus {
    guard(|| write_handle(out, DcRegistry(Registry::builtin())))
}

/// Loads a registry file (JSON lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_registry_load(
    path: *const c_char,
    out: *mut *mut DcRegistry,
) -> DcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let reg = Registry::load(Path::new(path))?;
        write_handle(out, DcRegistry(reg))
    })
}

/// # Safety
/// `registry` must come from a `dc_registry_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_registry_free(registry: *mut DcRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

/// Maps a platform or baseline category to its canonical category. An
/// empty string means the category counts as unspecified.
///
/// # Safety
/// Pointers must be valid; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dc_map_to_canonical(
    registry: *const DcRegistry,
    dimension: *const c_char,
    side: DcSide,
    category: *const c_char,
    buf: *mut c_char,
    buf_len: usize,
    out_len: *mut usize,
) -> DcStatus {
    guard(|| {
        let reg = &deref(registry, "registry")?.0;
        let dim = parse_dimension(str_arg(dimension, "dimension")?)?;
        let category = str_arg(category, "category")?;
        let side = match side {
            DcSide::Platform => Side::Platform,
            DcSide::Census => Side::Census,
        };
        let target = map_to_canonical(reg.mapping(dim)?, side, category)?;
        copy_str(target.canonical().unwrap_or(""), buf, buf_len, out_len)
    })
}

// ---- specs ---------------------------------------------------------------------

/// A spec over `geo` (`country:US`, `state:WV`, `city:austin_tx@25`), all
/// ages 13+, all genders.
///
/// # Safety
/// `geo` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_new(geo: *const c_char, out: *mut *mut DcSpec) -> DcStatus {
    guard(|| {
        let geo = str_arg(geo, "geo")?.parse()?;
        write_handle(out, DcSpec(TargetingSpec::new(geo)))
    })
}

/// # Safety
/// `spec` must come from `dc_spec_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_free(spec: *mut DcSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Age range 13..=65; 65 as maximum means 65 and over.
///
/// # Safety
/// `spec` must be a live spec handle.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_set_age(spec: *mut DcSpec, min_age: u8, max_age: u8) -> DcStatus {
    guard(|| {
        let s = deref_mut(spec, "spec")?;
        s.0 = s.0.with_age(min_age, max_age)?;
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live spec handle.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_set_gender(spec: *mut DcSpec, gender: DcGender) -> DcStatus {
    guard(|| {
        let s = deref_mut(spec, "spec")?;
        let g = match gender {
            DcGender::All => Gender::All,
            DcGender::Male => Gender::Male,
            DcGender::Female => Gender::Female,
        };
        s.0 = s.0.with_gender(g);
        Ok(())
    })
}

unsafe fn constrain(
    spec: *mut DcSpec,
    key: *const c_char,
    category: *const c_char,
    include: bool,
) -> DcStatus {
    guard(|| {
        let s = deref_mut(spec, "spec")?;
        let key: AttributeKey = str_arg(key, "key")?.parse()?;
        let category = str_arg(category, "category")?;
        s.0 = if include {
            s.0.with_include(key, category)?
        } else {
            s.0.with_exclude(key, category)?
        };
        Ok(())
    })
}

/// Adds an include. `key` is a dimension name or `x.<attribute>`.
/// Includes on one key are a union; different keys intersect.
///
/// # Safety
/// `spec` must be a live spec handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_include(
    spec: *mut DcSpec,
    key: *const c_char,
    category: *const c_char,
) -> DcStatus {
    constrain(spec, key, category, true)
}

/// Adds an exclude. Mixing includes and excludes on one key is rejected
/// with `DC_STATUS_CONFLICTING_CONSTRAINT`.
///
/// # Safety
/// `spec` must be a live spec handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_exclude(
    spec: *mut DcSpec,
    key: *const c_char,
    category: *const c_char,
) -> DcStatus {
    constrain(spec, key, category, false)
}

/// The spec's canonical key.
///
/// # Safety
/// `spec` must be a live spec handle; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_key(
    spec: *const DcSpec,
    buf: *mut c_char,
    buf_len: usize,
    out_len: *mut usize,
) -> DcStatus {
    guard(|| copy_str(&deref(spec, "spec")?.0.key(), buf, buf_len, out_len))
}

// ---- backends ------------------------------------------------------------------

/// Generates a synthetic population of `size` people from the bundled
/// config and wraps it as a backend with the privacy floor on.
///
/// # Safety
/// `registry` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_backend_synthetic(
    registry: *const DcRegistry,
    size: u64,
    seed: u64,
    out: *mut *mut DcBackend,
) -> DcStatus {
    guard(|| {
        let reg = &deref(registry, "registry")?.0;
        let mut config = PopulationConfig::builtin();
        config.size = usize::try_from(size)
            .map_err(|_| Failure(DcStatus::InvalidArgument, "size too large".into()))?;
        config.seed = seed;
        let pop = SyntheticPopulation::generate(&config, reg)?;
        let backend: Box<dyn ReachBackend> = Box::new(SyntheticBackend::new(Arc::new(pop)));
        write_handle(out, DcBackend(backend))
    })
}

/// Replays recorded reach estimates from a fixture file.
///
/// # Safety
/// `registry` must be a live handle; `path` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dc_backend_fixtures(
    registry: *const DcRegistry,
    path: *const c_char,
    out: *mut *mut DcBackend,
) -> DcStatus {
    guard(|| {
        let reg = &deref(registry, "registry")?.0;
        let store = FixtureStore::load(Path::new(str_arg(path, "path")?))?;
        let backend: Box<dyn ReachBackend> =
            Box::new(FixtureBackend::new(store).with_registry(reg.clone()));
        write_handle(out, DcBackend(backend))
    })
}

/// # Safety
/// `backend` must come from a `dc_backend_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_backend_free(backend: *mut DcBackend) {
    if !backend.is_null() {
        drop(Box::from_raw(backend));
    }
}

/// # Safety
/// Handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_reach(
    backend: *const DcBackend,
    spec: *const DcSpec,
    out: *mut DcReach,
) -> DcStatus {
    guard(|| {
        let est = deref(backend, "backend")?
            .0
            .reach(&deref(spec, "spec")?.0)?;
        write_out(
            out,
            DcReach {
                count: est.count,
                floor_applied: est.floor_applied,
                ambiguous_floor: est.ambiguous_floor,
            },
        )
    })
}

// ---- statistics ----------------------------------------------------------------

/// Pearson correlation of two series of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_pearson(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("series"));
        }
        let (xs, ys) = (
            std::slice::from_raw_parts(x, n),
            std::slice::from_raw_parts(y, n),
        );
        write_out(out, analysis::pearson(xs, ys)?)
    })
}

/// 95% interval of a correlation `r` over `n` points (Fisher transform).
///
/// # Safety
/// `lo` and `hi` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_pearson_ci95(r: f64, n: usize, lo: *mut f64, hi: *mut f64) -> DcStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() {
            return Err(null("output pointer"));
        }
        let (a, b) = analysis::pearson_ci95(r, n)?;
        write_out(lo, a)?;
        write_out(hi, b)
    })
}

/// Correction factor `census_share / platform_share`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_correction_factor(
    platform_share: f64,
    census_share: f64,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        let geo = "country:US".parse().expect("static geography");
        let cf = CorrectionFactor::from_shares(
            geo,
            DimensionId::Race,
            "-",
            platform_share,
            census_share,
            false,
        )?;
        write_out(out, cf.cf)
    })
}

/// Audience outside the three named race groups.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dc_residual_race(
    total: u64,
    hispanic: u64,
    african_american: u64,
    asian_american: u64,
    out: *mut u64,
) -> DcStatus {
    guard(|| {
        write_out(
            out,
            analysis::derive_residual_race(total, hispanic, african_american, asian_american)?,
        )
    })
}
