use std::ffi::{c_char, CStr, CString};
use std::ptr;

use demo_census_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = dc_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn registry() -> *mut DcRegistry {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dc_registry_builtin(&mut r) }, DcStatus::Ok);
    r
}

fn map(reg: *const DcRegistry, dim: &str, side: DcSide, cat: &str) -> Result<String, DcStatus> {
    let mut buf = [0 as c_char; 64];
    let mut len = 0usize;
    let st = unsafe {
        dc_map_to_canonical(
            reg,
            c(dim).as_ptr(),
            side,
            c(cat).as_ptr(),
            buf.as_mut_ptr(),
            buf.len(),
            &mut len,
        )
    };
    if st != DcStatus::Ok {
        return Err(st);
    }
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_string();
    assert_eq!(s.len(), len);
    Ok(s)
}

#[test]
fn mapping_through_the_abi() {
    let reg = registry();
    assert_eq!(
        map(reg, "PoliticalLeaning", DcSide::Platform, "very_liberal").unwrap(),
        "Left"
    );
    assert_eq!(
        map(reg, "Income", DcSide::Census, "$75,000 to $99,999").unwrap(),
        "75k-100k"
    );
    // Census incomes below the platform's lowest bucket are unspecified.
    assert_eq!(
        map(reg, "Income", DcSide::Census, "$10,000 to $14,999").unwrap(),
        ""
    );
    assert_eq!(
        map(reg, "Race", DcSide::Platform, "klingon"),
        Err(DcStatus::UnmappedCategory)
    );
    assert!(last_error().contains("klingon"));
    assert_eq!(
        map(reg, "Religion", DcSide::Platform, "x"),
        Err(DcStatus::InvalidArgument)
    );
    unsafe { dc_registry_free(reg) };
}

#[test]
fn small_buffer_reports_needed_length() {
    let reg = registry();
    let mut buf = [0 as c_char; 3];
    let mut len = 0usize;
    let st = unsafe {
        dc_map_to_canonical(
            reg,
            c("Age").as_ptr(),
            DcSide::Platform,
            c("20-24").as_ptr(),
            buf.as_mut_ptr(),
            buf.len(),
            &mut len,
        )
    };
    assert_eq!(st, DcStatus::BufferTooSmall);
    assert_eq!(len, 5);
    unsafe { dc_registry_free(reg) };
}

#[test]
fn spec_building_and_conflicts() {
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(dc_spec_new(c("state:WV").as_ptr(), &mut spec), DcStatus::Ok);
        assert_eq!(dc_spec_set_age(spec, 18, 65), DcStatus::Ok);
        assert_eq!(dc_spec_set_gender(spec, DcGender::Female), DcStatus::Ok);
        assert_eq!(
            dc_spec_include(spec, c("Race").as_ptr(), c("hispanic").as_ptr()),
            DcStatus::Ok
        );
        assert_eq!(
            dc_spec_include(spec, c("x.coffee").as_ptr(), c("yes").as_ptr()),
            DcStatus::Ok
        );
        assert_eq!(
            dc_spec_exclude(spec, c("Race").as_ptr(), c("asian_american").as_ptr()),
            DcStatus::ConflictingConstraint
        );
        assert!(last_error().contains("conflicting"));
        assert_eq!(dc_spec_set_age(spec, 10, 20), DcStatus::InvalidArgument);

        let mut buf = [0 as c_char; 128];
        let mut len = 0;
        assert_eq!(
            dc_spec_key(spec, buf.as_mut_ptr(), buf.len(), &mut len),
            DcStatus::Ok
        );
        let key = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(
            key,
            "state:WV;age=18-65;gender=female;+Race=hispanic;+x.coffee=yes"
        );
        assert!(dc_last_error().is_null());
        dc_spec_free(spec);

        assert_eq!(
            dc_spec_new(c("planet:Mars").as_ptr(), &mut spec),
            DcStatus::InvalidArgument
        );
        assert_eq!(dc_spec_new(ptr::null(), &mut spec), DcStatus::NullPointer);
    }
}

#[test]
fn synthetic_reach_respects_the_floor() {
    let reg = registry();
    let mut backend = ptr::null_mut();
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(
            dc_backend_synthetic(reg, 50_000, 3, &mut backend),
            DcStatus::Ok
        );
        assert_eq!(dc_spec_new(c("state:CA").as_ptr(), &mut spec), DcStatus::Ok);
        let mut all = DcReach::default();
        assert_eq!(dc_reach(backend, spec, &mut all), DcStatus::Ok);
        assert!(all.count > 1000 && !all.floor_applied);

        assert_eq!(
            dc_spec_include(spec, c("Race").as_ptr(), c("asian_american").as_ptr()),
            DcStatus::Ok
        );
        assert_eq!(dc_spec_set_age(spec, 64, 64), DcStatus::Ok);
        let mut few = DcReach::default();
        assert_eq!(dc_reach(backend, spec, &mut few), DcStatus::Ok);
        assert_eq!(few.count, 1000);
        assert!(few.floor_applied);

        let mut dc = ptr::null_mut();
        assert_eq!(dc_spec_new(c("state:ZZ").as_ptr(), &mut dc), DcStatus::Ok);
        assert_eq!(dc_reach(backend, dc, &mut few), DcStatus::UnknownGeography);
        dc_spec_free(dc);
        dc_spec_free(spec);
        dc_backend_free(backend);
        dc_registry_free(reg);
    }
}

#[test]
fn fixture_backend() {
    let reg = registry();
    let path = c(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/data/fixtures_us_2018.jsonl"
    ));
    let mut backend = ptr::null_mut();
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(
            dc_backend_fixtures(reg, path.as_ptr(), &mut backend),
            DcStatus::Ok
        );
        assert_eq!(
            dc_spec_new(c("country:US").as_ptr(), &mut spec),
            DcStatus::Ok
        );
        assert_eq!(
            dc_spec_include(spec, c("PoliticalLeaning").as_ptr(), c("liberal").as_ptr()),
            DcStatus::Ok
        );
        let mut r = DcReach::default();
        assert_eq!(dc_reach(backend, spec, &mut r), DcStatus::Ok);
        assert_eq!(r.count, 47_000_000);
        assert_eq!(dc_spec_set_gender(spec, DcGender::Male), DcStatus::Ok);
        assert_eq!(dc_reach(backend, spec, &mut r), DcStatus::BackendError);
        dc_spec_free(spec);
        dc_backend_free(backend);
        let mut none = ptr::null_mut();
        assert_eq!(
            dc_backend_fixtures(reg, c("/nonexistent.jsonl").as_ptr(), &mut none),
            DcStatus::Io
        );
        assert!(none.is_null());
        dc_registry_free(reg);
    }
}

#[test]
fn statistics() {
    let (x, y) = ([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]);
    let mut r = 0.0;
    unsafe {
        assert_eq!(dc_pearson(x.as_ptr(), y.as_ptr(), 3, &mut r), DcStatus::Ok);
        assert!((r - 3.0 / (2.0f64 * 42.0 / 9.0).sqrt()).abs() < 1e-12);
        assert_eq!(
            dc_pearson(x.as_ptr(), [5.0; 3].as_ptr(), 3, &mut r),
            DcStatus::Domain
        );

        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(dc_pearson_ci95(0.83, 51, &mut lo, &mut hi), DcStatus::Ok);
        assert_eq!(((lo * 100.0).round(), (hi * 100.0).round()), (72.0, 90.0));
        assert_eq!(dc_pearson_ci95(0.5, 3, &mut lo, &mut hi), DcStatus::Domain);

        let mut cf = 0.0;
        assert_eq!(
            dc_correction_factor(0.14061, 0.03507, &mut cf),
            DcStatus::Ok
        );
        assert!((cf - 0.24939).abs() < 5e-4);
        assert_eq!(
            dc_correction_factor(0.0, 0.1, &mut cf),
            DcStatus::ZeroPlatformShare
        );

        let mut white = 0;
        assert_eq!(dc_residual_race(100, 20, 15, 5, &mut white), DcStatus::Ok);
        assert_eq!(white, 60);
        assert_eq!(
            dc_residual_race(10, 5, 5, 1, &mut white),
            DcStatus::NegativeResidual
        );
        assert_eq!(white, 60, "out pointer untouched on failure");
        assert_eq!(
            dc_residual_race(10, 5, 5, 0, ptr::null_mut()),
            DcStatus::NullPointer
        );
    }
}

#[test]
fn errors_are_per_thread() {
    let mut out = 0u64;
    assert_eq!(
        unsafe { dc_residual_race(1, 1, 1, 1, &mut out) },
        DcStatus::NegativeResidual
    );
    std::thread::spawn(|| assert!(dc_last_error().is_null()))
        .join()
        .unwrap();
    assert!(!dc_last_error().is_null());
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
