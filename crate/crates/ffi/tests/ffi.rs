use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use sbt_ffi::*;

fn last_error() -> String {
    let p = sbt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn builtin_evaluation_matches_known_outcomes() {
    let mut e = SbtEvaluation::default();
    // ego at 20.5 m/s meets a pedestrian walking at 2 m/s triggered at 30 m
    assert_eq!(unsafe { sbt_builtin_evaluate(2.0, 20.5, 30.0, &mut e) }, SbtStatus::Ok);
    assert!(e.collision && e.critical);
    assert_eq!(e.min_distance, 0.0);
    assert!(e.velocity_at_min_distance > 0.0);
    assert!(e.collision_time.is_finite());

    // never triggered: no collision, pedestrian stays off the lane
    assert_eq!(unsafe { sbt_builtin_evaluate(1.0, 10.0, 0.0, &mut e) }, SbtStatus::Ok);
    assert!(!e.collision && !e.critical);
    assert!(e.collision_time.is_nan());
    assert!(e.steps > 1);
}

#[test]
fn builtin_evaluation_rejects_bad_input() {
    let mut e = SbtEvaluation::default();
    assert_eq!(unsafe { sbt_builtin_evaluate(9.0, 10.0, 10.0, &mut e) }, SbtStatus::InvalidArgument);
    assert!(last_error().contains("upper bound"), "{}", last_error());
    assert_eq!(unsafe { sbt_builtin_evaluate(1.0, 10.0, 10.0, ptr::null_mut()) }, SbtStatus::NullPointer);
}

#[test]
fn registry_listing_and_unknown_experiment() {
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { sbt_registry_builtin(&mut reg) }, SbtStatus::Ok);
    let n = unsafe { sbt_registry_len(reg) };
    assert_eq!(n, 2);
    let first = unsafe { CStr::from_ptr(sbt_registry_name(reg, 0)) }.to_str().unwrap().to_owned();
    assert_eq!(first, "1");
    assert!(unsafe { sbt_registry_name(reg, 5) }.is_null());

    let root = tempfile::tempdir().unwrap();
    let root_c = c(root.path().to_str().unwrap());
    let mut run = ptr::null_mut();
    let status = unsafe { sbt_run_experiment(reg, c("nope").as_ptr(), root_c.as_ptr(), ptr::null(), ptr::null(), &mut run) };
    assert_eq!(status, SbtStatus::UnknownExperiment);
    assert!(last_error().contains("available"));
    assert!(run.is_null());
    unsafe { sbt_registry_free(reg) };
}

#[test]
fn registry_load_errors() {
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { sbt_registry_load(c("/nonexistent/exp.toml").as_ptr(), &mut reg) }, SbtStatus::Io);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[[experiment]]\nname = 1\n").unwrap();
    let path_c = c(path.to_str().unwrap());
    assert_eq!(unsafe { sbt_registry_load(path_c.as_ptr(), &mut reg) }, SbtStatus::Config);
    assert_eq!(unsafe { sbt_registry_load(ptr::null(), &mut reg) }, SbtStatus::NullPointer);
}

#[test]
fn run_experiment_and_read_results() {
    let mut reg = ptr::null_mut();
    unsafe { sbt_registry_builtin(&mut reg) };
    let root = tempfile::tempdir().unwrap();
    let root_c = c(root.path().to_str().unwrap());
    let opts = SbtRunOptions { population_size: 10, max_generations: 3, seed: 7, override_seed: true, workers: 2, ..Default::default() };
    let mut run = ptr::null_mut();
    let status = unsafe { sbt_run_experiment(reg, c("1").as_ptr(), root_c.as_ptr(), c("ffi").as_ptr(), &opts, &mut run) };
    assert_eq!(status, SbtStatus::Ok, "{}", last_error());

    unsafe {
        assert_eq!(sbt_run_evaluations(run), 40);
        assert_eq!(CStr::from_ptr(sbt_run_algorithm(run)).to_str().unwrap(), "NSGA2");
        let dir = CStr::from_ptr(sbt_run_result_dir(run)).to_str().unwrap().to_owned();
        assert_eq!(Path::new(&dir), root.path().join("1").join("ffi"));
        assert!(Path::new(&dir).join("all_evaluations.csv").is_file());

        let mut inputs = [0.0; 3];
        let mut objectives = [0.0; 2];
        let mut critical = false;
        let mut critical_seen = 0;
        for i in 0..sbt_run_evaluations(run) {
            let s = sbt_run_record(run, i, inputs.as_mut_ptr(), 3, objectives.as_mut_ptr(), 2, &mut critical);
            assert_eq!(s, SbtStatus::Ok);
            assert!((0.5..=3.0).contains(&inputs[0]));
            critical_seen += critical as usize;
        }
        assert_eq!(critical_seen, sbt_run_critical_count(run));
        assert_eq!(sbt_run_record(run, 0, inputs.as_mut_ptr(), 2, ptr::null_mut(), 0, ptr::null_mut()), SbtStatus::InvalidArgument);
        assert_eq!(sbt_run_record(run, 10_000, ptr::null_mut(), 0, ptr::null_mut(), 0, ptr::null_mut()), SbtStatus::OutOfRange);

        assert!(sbt_run_pareto_count(run) >= 1);
        let mut idx = usize::MAX;
        assert_eq!(sbt_run_pareto_index(run, 0, &mut idx), SbtStatus::Ok);
        assert!(idx < 40);
        for i in 0..sbt_run_region_count(run) {
            assert!(!sbt_run_region_condition(run, i).is_null());
        }
        sbt_run_free(run);
        sbt_registry_free(reg);
    }
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        assert_eq!(sbt_run_evaluations(ptr::null()), 0);
        assert!(sbt_run_result_dir(ptr::null()).is_null());
        sbt_run_free(ptr::null_mut());
        sbt_registry_free(ptr::null_mut());
        assert_eq!(sbt_registry_len(ptr::null()), 0);
    }
    assert!(!sbt_version().is_null());
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sbt.h")
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libsbt_ffi.a");
    lib.is_file().then_some(lib)
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "sbt.h"

int main(void) {
    SbtEvaluation e;
    if (sbt_builtin_evaluate(2.0, 20.5, 30.0, &e) != SBT_STATUS_OK) return 1;
    if (!e.collision || !e.critical) return 2;
    if (sbt_builtin_evaluate(9.0, 20.5, 30.0, &e) != SBT_STATUS_INVALID_ARGUMENT) return 3;
    if (sbt_last_error_message() == NULL) return 4;
    SbtRegistry *reg = NULL;
    if (sbt_registry_builtin(&reg) != SBT_STATUS_OK) return 5;
    printf("%zu %s\n", sbt_registry_len(reg), sbt_registry_name(reg, 1));
    sbt_registry_free(reg);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = header().parent().unwrap().to_owned();
    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(syntax.status.success(), "{}", String::from_utf8_lossy(&syntax.stderr));

    let Some(lib) = static_lib() else {
        eprintln!("static library not built; link step skipped");
        return;
    };
    let exe = dir.path().join("main");
    let link = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(link.status.success(), "{}", String::from_utf8_lossy(&link.stderr));
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "2 2\n");
}
