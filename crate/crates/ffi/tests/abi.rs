//! Calls through the exported C ABI, plus a C program built against the
//! generated header and the static library.

use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use inkeval_ffi::*;

const REFERENCE: &str = "画面描述: 远山近水\n题材: 这是一幅山水画\n感兴趣区域:\n\
{\"width\": 100, \"height\": 100, \"num_regions\": 1, \"regions_of_interest\": \
[{\"label\": \"山\", \"description\": \"主峰\", \"bounding_box\": [10, 10, 60, 60]}]}\n\
题材评价: 构图完整\n笔墨分析: 线条沉稳\n气韵分析: 气脉贯通\n意境分析: 清远\n最终分数: 4";

fn last_error() -> String {
    let p = inkeval_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn scalar_functions_and_errors() {
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(inkeval_accuracy_reward(3, 5, &mut v), InkevalStatus::Ok);
        assert_eq!(v, 0.6);
        assert_eq!(inkeval_accuracy_reward(-1, 5, &mut v), InkevalStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(inkeval_accuracy_reward(6, 5, &mut v), InkevalStatus::InvalidArgument);
        assert!(last_error().contains("predicted"));
        assert_eq!(inkeval_accuracy_reward(3, -1, &mut v), InkevalStatus::InvalidArgument);
        assert_eq!(inkeval_accuracy_reward(3, 3, ptr::null_mut()), InkevalStatus::NullPointer);
        assert!(last_error().contains("out_value"));

        let a = [0.0, 0.0, 0.5, 0.5];
        let b = [0.25, 0.25, 0.75, 0.75];
        assert_eq!(inkeval_iou(a.as_ptr(), b.as_ptr(), &mut v), InkevalStatus::Ok);
        assert!((v - 0.0625 / 0.4375).abs() < 1e-12);
        let bad = [0.6, 0.0, 0.5, 0.5];
        assert_eq!(inkeval_iou(bad.as_ptr(), b.as_ptr(), &mut v), InkevalStatus::InvalidArgument);
        assert_eq!(inkeval_iou(ptr::null(), b.as_ptr(), &mut v), InkevalStatus::NullPointer);

        let adv = [1.0, -1.0];
        let ratios = [2.0, 2.0];
        assert_eq!(inkeval_clipped_surrogate(adv.as_ptr(), ratios.as_ptr(), 2, 0.2, &mut v), InkevalStatus::Ok);
        // min(2, 1.2) * 1 and min(-2, -1.2) averaged
        assert!((v - (1.2 - 2.0) / 2.0).abs() < 1e-12);
        assert_eq!(inkeval_clipped_surrogate(adv.as_ptr(), ratios.as_ptr(), 0, 0.2, &mut v), InkevalStatus::Rejected);
    }
}

#[test]
fn scorer_lifecycle_and_reward() {
    let reference = CString::new(REFERENCE).unwrap();
    let partial = CString::new("画面描述: 远山近水\n最终分数: 3").unwrap();
    unsafe {
        let mut scorer = ptr::null_mut();
        assert_eq!(inkeval_scorer_new(&mut scorer), InkevalStatus::Ok);
        let mut r = InkevalReward::default();
        assert_eq!(
            inkeval_final_reward(scorer, reference.as_ptr(), reference.as_ptr(), 100, 100, &mut r),
            InkevalStatus::Ok
        );
        assert_eq!(r, InkevalReward { r_acc: 1.0, r_bert: 1.0, r_miou: 2.0, r_format: 1.0, total: 17.0 });

        assert_eq!(
            inkeval_final_reward(scorer, partial.as_ptr(), reference.as_ptr(), 100, 100, &mut r),
            InkevalStatus::Ok
        );
        assert_eq!((r.r_acc, r.r_format, r.r_miou), (0.8, 0.0, 0.0));
        // Only the caption matches; the score part "3" differs from "4".
        assert!((r.r_bert - 1.0 / 6.0).abs() < 1e-12, "{}", r.r_bert);

        assert_eq!(
            inkeval_final_reward(scorer, reference.as_ptr(), partial.as_ptr().add(0), 100, 100, ptr::null_mut()),
            InkevalStatus::NullPointer
        );
        let unscored = CString::new("画面描述: 远山").unwrap();
        assert_eq!(
            inkeval_final_reward(scorer, reference.as_ptr(), unscored.as_ptr(), 100, 100, &mut r),
            InkevalStatus::InvalidArgument
        );
        let invalid: [u8; 3] = [0xFF, 0xFE, 0];
        assert_eq!(
            inkeval_final_reward(scorer, invalid.as_ptr().cast(), reference.as_ptr(), 100, 100, &mut r),
            InkevalStatus::InvalidUtf8
        );
        inkeval_scorer_free(scorer);
        inkeval_scorer_free(ptr::null_mut());

        let url = CString::new("http://127.0.0.1:9").unwrap();
        let mut remote = ptr::null_mut();
        assert_eq!(inkeval_scorer_new_remote(url.as_ptr(), 200, &mut remote), InkevalStatus::Ok);
        // Unreachable service: falls back to the built-in measure.
        assert_eq!(
            inkeval_final_reward(remote, reference.as_ptr(), reference.as_ptr(), 100, 100, &mut r),
            InkevalStatus::Ok
        );
        assert_eq!(r.total, 17.0);
        inkeval_scorer_free(remote);
    }
}

#[test]
fn arrays_rankings_and_labels() {
    unsafe {
        let rewards = [0.0, 1.0];
        let mut adv = [0.0; 2];
        assert_eq!(inkeval_group_advantages(rewards.as_ptr(), 2, 0.0, adv.as_mut_ptr()), InkevalStatus::Ok);
        assert_eq!(adv, [-1.0, 1.0]);
        assert_eq!(inkeval_group_advantages(rewards.as_ptr(), 2, 0.0, ptr::null_mut()), InkevalStatus::NullPointer);

        let a = [1usize, 2, 3, 4];
        let b = [4usize, 3, 2, 1];
        let mut rep = InkevalRankReport::default();
        assert_eq!(inkeval_rank_correlations(a.as_ptr(), b.as_ptr(), 4, &mut rep), InkevalStatus::Ok);
        assert_eq!((rep.kendall_tau, rep.spearman_rho, rep.top1_accuracy, rep.tau_variant), (-1.0, -1.0, 0.0, 0));
        let dup = [1usize, 1, 3, 4];
        assert_eq!(inkeval_rank_correlations(a.as_ptr(), dup.as_ptr(), 4, &mut rep), InkevalStatus::Rejected);
        assert!(last_error().starts_with("NotAPermutation"));

        let sa = [1.0, 1.0, 2.0];
        let sb = [1.0, 2.0, 3.0];
        assert_eq!(inkeval_rank_correlations_tied(sa.as_ptr(), sb.as_ptr(), 3, &mut rep), InkevalStatus::Ok);
        assert_eq!(rep.tau_variant, 1);
        assert!((rep.kendall_tau - 2.0 / 6f64.sqrt()).abs() < 1e-12);

        let vals: Vec<f64> = (1..=10).map(|v| v as f64 * 100.0).collect();
        let mut tiers = [0u8; 10];
        assert_eq!(inkeval_scale_auction_labels(vals.as_ptr(), 10, tiers.as_mut_ptr()), InkevalStatus::Ok);
        assert_eq!(tiers, [3, 3, 3, 3, 4, 4, 4, 4, 4, 5]);
        let bad = [1.0, -2.0];
        assert_eq!(inkeval_scale_auction_labels(bad.as_ptr(), 2, tiers.as_mut_ptr()), InkevalStatus::Rejected);
        assert_eq!(inkeval_scale_auction_labels(bad.as_ptr(), 0, tiers.as_mut_ptr()), InkevalStatus::Rejected);
    }
}

#[test]
fn parse_report_json() {
    let text = CString::new(REFERENCE).unwrap();
    unsafe {
        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(inkeval_parse_response(text.as_ptr(), 100, 100, &mut json), InkevalStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        inkeval_string_free(json);
        assert_eq!(report["complete"], true);
        assert_eq!(report["response"]["final_score"], 4);
        assert_eq!(report["response"]["rois"][0]["bounding_box"]["x_max"], 0.6);
        inkeval_string_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(inkeval_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/inkeval.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source.split("extern \"C\" fn ").skip(1).map(|s| s.split('(').next().unwrap()).collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct InkevalScorer InkevalScorer;"));
}

/// Directory holding the library artifacts for this profile.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = artifact_dir().join("libinkeval_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    // `cargo test` only builds the rlib; produce the static library with the same profile.
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "--quiet", "-p", "inkeval-ffi", "--lib"]).current_dir(crate_dir);
    // Per-crate variables inherited from the test harness would dirty build-script fingerprints.
    for (key, _) in std::env::vars_os() {
        let key = key.to_string_lossy().into_owned();
        let keep = matches!(key.as_str(), "CARGO_HOME" | "CARGO_TARGET_DIR") || key.starts_with("CARGO_BUILD_");
        if (key.starts_with("CARGO_") && !keep) || key == "OUT_DIR" {
            build.env_remove(key);
        }
    }
    if !cfg!(debug_assertions) {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success(), "building the static library failed");
    assert!(lib.exists(), "{} not built", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
