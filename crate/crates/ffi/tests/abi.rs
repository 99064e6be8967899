use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use coordetect_ffi::*;

fn last_error() -> String {
    let p = cd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn violation_dataset() -> *mut CdDataset {
    let probes = [1.0, 0.5, 0.5, 1.0];
    let responses = [1.0, 0.2, 0.2, 1.0];
    let mut ds = ptr::null_mut();
    let st = unsafe { cd_dataset_new(2, 1, 2, probes.as_ptr(), responses.as_ptr(), 0, &mut ds) };
    assert_eq!(st, CdStatus::Ok);
    ds
}

#[test]
fn violation_instance_through_the_abi() {
    let ds = violation_dataset();
    let mut consistent = -1;
    assert_eq!(
        unsafe { cd_test_rationalizable(ds, &mut consistent) },
        CdStatus::Ok
    );
    assert_eq!(consistent, 0);
    let mut phi = f64::NAN;
    assert_eq!(unsafe { cd_phi_star(ds, &mut phi) }, CdStatus::Ok);
    assert!((phi - 0.4).abs() <= 1e-9);

    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { cd_detect(ds, 0.001, 0.05, 200, 3, &mut report) },
        CdStatus::Ok
    );
    assert_eq!(unsafe { cd_report_hypothesis(report) }, 1);
    assert_eq!(unsafe { cd_report_statistic(report) }, 0.0);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { cd_report_json(report, &mut json) }, CdStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"hypothesis\":\"H1\""), "{text}");
    unsafe {
        cd_string_free(json);
        cd_report_free(report);
        cd_dataset_free(ds);
    }
}

#[test]
fn coordinated_data_is_consistent() {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { cd_generate(0, 10, 11, &mut ds) }, CdStatus::Ok);
    let (mut t, mut m, mut n) = (0, 0, 0);
    assert_eq!(
        unsafe { cd_dataset_shape(ds, &mut t, &mut m, &mut n) },
        CdStatus::Ok
    );
    assert_eq!((t, m, n), (10, 3, 2));
    let mut consistent = 0;
    assert_eq!(
        unsafe { cd_test_rationalizable(ds, &mut consistent) },
        CdStatus::Ok
    );
    assert_eq!(consistent, 1);

    let mut noisy = ptr::null_mut();
    assert_eq!(
        unsafe { cd_dataset_add_noise(ds, 0.05, 11, &mut noisy) },
        CdStatus::Ok
    );
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { cd_detect(noisy, 0.05, 0.05, 200, 11, &mut report) },
        CdStatus::Ok
    );
    assert_eq!(unsafe { cd_report_hypothesis(report) }, 0);
    unsafe {
        cd_report_free(report);
        cd_dataset_free(noisy);
        cd_dataset_free(ds);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    let mut ds = ptr::null_mut();
    let path = CString::new("/nonexistent/data.csv").unwrap();
    assert_eq!(
        unsafe { cd_dataset_read(path.as_ptr(), &mut ds) },
        CdStatus::Io
    );
    assert!(ds.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { cd_dataset_read(ptr::null(), &mut ds) },
        CdStatus::NullPointer
    );
    assert_eq!(
        unsafe { cd_generate(7, 10, 0, &mut ds) },
        CdStatus::InvalidArgument
    );
    assert!(last_error().contains("regime"));

    let v = violation_dataset();
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { cd_detect(v, 0.01, 1.5, 10, 0, &mut report) },
        CdStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { cd_dataset_add_noise(v, -1.0, 0, &mut ds) },
        CdStatus::InvalidArgument
    );
    let mut phi = 0.0;
    assert_eq!(unsafe { cd_phi_star(v, &mut phi) }, CdStatus::Ok);
    assert!(cd_last_error().is_null());
    unsafe { cd_dataset_free(v) };

    let bad = [1.0, -0.5];
    let resp = [1.0, 1.0];
    assert_eq!(
        unsafe { cd_dataset_new(1, 1, 2, bad.as_ptr(), resp.as_ptr(), 0, &mut ds) },
        CdStatus::Ok
    );
    unsafe { cd_dataset_free(ds) };
    assert_eq!(
        unsafe { cd_dataset_new(0, 1, 2, bad.as_ptr(), resp.as_ptr(), 0, &mut ds) },
        CdStatus::Dimension
    );
    assert_eq!(unsafe { cd_report_hypothesis(ptr::null()) }, -1);
    assert!(unsafe { cd_report_statistic(ptr::null()) }.is_nan());
    unsafe {
        cd_dataset_free(ptr::null_mut());
        cd_report_free(ptr::null_mut());
    }
}

#[test]
fn dataset_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("v.csv").to_str().unwrap()).unwrap();
    let v = violation_dataset();
    assert_eq!(unsafe { cd_dataset_write(v, path.as_ptr()) }, CdStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { cd_dataset_read(path.as_ptr(), &mut back) },
        CdStatus::Ok
    );
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        cd_phi_star(v, &mut a);
        cd_phi_star(back, &mut b);
        cd_dataset_free(v);
        cd_dataset_free(back);
    }
    assert_eq!(a, b);
}

fn target_dir() -> PathBuf {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    // .../target/<profile>/deps/abi-<hash>
    exe.parent()
        .and_then(|d| d.parent())
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("../../target/debug"))
}

#[test]
fn c_program_links_against_the_header() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let lib = target_dir().join("libcoordetect_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("detect");
    let out = Command::new(&cc)
        .arg(manifest.join("examples/detect.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = dir.path().join("v.csv");
    std::fs::write(&csv, "2,1,2,false\n1,1,1,0.5,1,0.2\n2,1,0.5,1,0.2,1\n").unwrap();
    let run = Command::new(&exe).arg(&csv).arg("0.001").output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(3), "{stdout}");
    assert!(stdout.contains("decision H1"));
    let missing = Command::new(&exe)
        .arg(dir.path().join("none.csv"))
        .arg("0.1")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
