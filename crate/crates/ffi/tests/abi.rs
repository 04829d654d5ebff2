//! Exercises the C ABI the way a foreign binding would: through the
//! exported extern "C" functions and raw pointers only.

use perfloop_ffi::*;
use std::ffi::{CStr, CString};

fn last_error() -> String {
    let ptr = pl_last_error_message();
    if ptr.is_null() {
        return String::new();
    }
    let msg = unsafe { CStr::from_ptr(ptr) }.to_string_lossy().to_string();
    unsafe { pl_string_free(ptr) };
    msg
}

fn tiny_config() -> *mut PlConfig {
    let toml = CString::new(
        r#"
[data]
n = 6000
prevalence = 0.03
d = 4
months = 8

[learner]
algorithm = "gbdt"

[learner.gbdt]
rounds = [10, 20]

[run]
trials = 2
seeds = [0]
"#,
    )
    .unwrap();
    let cfg = unsafe { pl_config_from_toml(toml.as_ptr()) };
    assert!(!cfg.is_null(), "config parse failed: {}", last_error());
    cfg
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(pl_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn bad_toml_reports_an_error() {
    let toml = CString::new("[data]\nbogus = 1\n").unwrap();
    let cfg = unsafe { pl_config_from_toml(toml.as_ptr()) };
    assert!(cfg.is_null());
    assert!(last_error().contains("bogus"));
}

#[test]
fn null_arguments_are_rejected_not_crashed() {
    assert_eq!(
        unsafe { pl_config_set_trials(std::ptr::null_mut(), 5) },
        PlStatus::NullArgument
    );
    let cfg = tiny_config();
    assert_eq!(
        unsafe { pl_config_set_policy(cfg, std::ptr::null()) },
        PlStatus::NullArgument
    );
    unsafe { pl_config_free(cfg) };
}

#[test]
fn policy_setter_validates() {
    let cfg = tiny_config();
    let bad = CString::new("sideways").unwrap();
    assert_eq!(
        unsafe { pl_config_set_policy(cfg, bad.as_ptr()) },
        PlStatus::InvalidConfig
    );
    let good = CString::new("groupwise").unwrap();
    assert_eq!(
        unsafe { pl_config_set_policy(cfg, good.as_ptr()) },
        PlStatus::Ok
    );
    unsafe { pl_config_free(cfg) };
}

#[test]
fn dataset_generation_writes_a_csv() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.csv");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let status = unsafe { pl_generate_dataset_csv(cfg, 7, c_path.as_ptr()) };
    assert_eq!(status, PlStatus::Ok, "{}", last_error());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,month,group,true_label,observed_label,f0"));
    assert_eq!(text.lines().count(), 6001);
    unsafe { pl_config_free(cfg) };
}

#[test]
fn scenario2_report_matches_direct_library_run() {
    let cfg = tiny_config();
    let report = unsafe { pl_run_scenario2(cfg, 11) };
    assert!(!report.is_null(), "{}", last_error());
    assert_eq!(unsafe { pl_scenario2_iterations(report) }, 4);

    // Same numbers as a direct library call.
    let direct_cfg = perfloop::runner::ExperimentConfig::from_toml(
        r#"
[data]
n = 6000
prevalence = 0.03
d = 4
months = 8

[learner]
algorithm = "gbdt"

[learner.gbdt]
rounds = [10, 20]

[run]
trials = 2
seeds = [0]
"#,
    )
    .unwrap();
    let (direct, _) =
        perfloop::scenarios::run_scenario2(&direct_cfg.scenario2_setup().unwrap(), 11).unwrap();
    for t in 0..4u32 {
        let real = unsafe { pl_scenario2_fpr(report, t, PlView::Real, PlGroup::Global) };
        let expect = direct.iterations[t as usize].real.global_fpr.unwrap();
        assert_eq!(real, expect, "iteration {t}");
        let perceived = unsafe { pl_scenario2_fpr(report, t, PlView::Perceived, PlGroup::Global) };
        let expect = direct.iterations[t as usize].perceived.global_fpr.unwrap();
        assert_eq!(perceived, expect, "iteration {t}");
    }
    // Out-of-range indices come back NaN, not UB.
    assert!(unsafe { pl_scenario2_fpr(report, 99, PlView::Real, PlGroup::Global) }.is_nan());
    unsafe { pl_scenario2_free(report) };
    unsafe { pl_config_free(cfg) };
}

#[test]
fn scenario1_accessors_cover_all_worlds() {
    let cfg = tiny_config();
    let report = unsafe { pl_run_scenario1(cfg, 5) };
    assert!(!report.is_null(), "{}", last_error());
    assert_eq!(unsafe { pl_scenario1_trials(report) }, 2);
    for world in [
        PlWorld::PerformanceIdeal,
        PlWorld::Adaptation,
        PlWorld::UnbiasedBaseline,
    ] {
        for trial in 0..2 {
            let tpr = unsafe { pl_scenario1_tpr(report, world, trial) };
            assert!((0.0..=1.0).contains(&tpr));
        }
        assert!(unsafe { pl_scenario1_top5(report, world, 0) } >= 0);
    }
    assert!(unsafe { pl_scenario1_tpr(report, PlWorld::Adaptation, 99) }.is_nan());
    unsafe { pl_scenario1_free(report) };
    unsafe { pl_config_free(cfg) };
}

#[test]
fn generated_header_exists_and_names_the_api() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("perfloop.h");
    let text = std::fs::read_to_string(header).expect("cbindgen header present");
    for symbol in [
        "pl_version",
        "pl_config_from_toml",
        "pl_run_scenario1",
        "pl_run_scenario2",
        "pl_scenario2_fpr",
        "PlStatus",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
