use std::ffi::{c_char, c_int, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gsm_ffi::*;

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    gsm_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = gsm_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_owned()
}

fn build(m: u32, k_max: u32) -> *mut GsmCoeffTable {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { gsm_table_build(m, k_max, &mut t) }, GsmStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn table_round_trip() {
    let t = build(3, 4);
    unsafe {
        let mut len = 0usize;
        assert_eq!(gsm_table_row_len(t, 4, &mut len), GsmStatus::Ok);
        assert_eq!(len, 3);
        let mut out = ptr::null_mut();
        assert_eq!(gsm_table_coeff(t, 4, 2, &mut out), GsmStatus::Ok);
        assert_eq!(take_string(out), "20");
        let mut m = 0;
        let mut k_max = 0;
        assert_eq!(gsm_table_m(t, &mut m), GsmStatus::Ok);
        assert_eq!(gsm_table_k_max(t, &mut k_max), GsmStatus::Ok);
        assert_eq!((m, k_max), (3, 4));

        let mut json = ptr::null_mut();
        assert_eq!(gsm_table_to_json(t, &mut json), GsmStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        // Rows start at k = 1.
        assert_eq!(doc["rows"][3], serde_json::json!(["1", "12", "20"]));

        let mut certified: c_int = 0;
        let mut bad = 99u64;
        assert_eq!(gsm_table_certify(t, &mut certified, &mut bad), GsmStatus::Ok);
        assert_eq!((certified, bad), (1, 0));
        gsm_table_free(t);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(gsm_table_build(1, 4, &mut t), GsmStatus::DegreeTooSmall);
        assert!(t.is_null());
        assert!(last_error().contains("at least 2"));
        assert_eq!(gsm_table_build(2, 4, ptr::null_mut()), GsmStatus::NullPointer);

        let t = build(2, 3);
        let mut out = ptr::null_mut();
        assert_eq!(gsm_table_coeff(t, 9, 0, &mut out), GsmStatus::OutOfRange);
        assert_eq!(gsm_table_coeff(t, 3, 5, &mut out), GsmStatus::OutOfRange);
        let mut len = 0usize;
        assert_eq!(gsm_table_row_len(ptr::null(), 0, &mut len), GsmStatus::NullPointer);
        let x = CString::new("2").unwrap();
        assert_eq!(gsm_log_magnitude(t, 2, 1, x.as_ptr(), 32, &mut out), GsmStatus::Precision);
        assert_eq!(gsm_log_magnitude(t, 2, 0, x.as_ptr(), 128, &mut out), GsmStatus::InvalidArgument);
        let mut kj = 0;
        assert_eq!(gsm_kj(2, 0, &mut kj), GsmStatus::InvalidArgument);
        gsm_table_free(t);
        gsm_table_free(ptr::null_mut());
        gsm_string_free(ptr::null_mut());
    }
}

#[test]
fn log_magnitude_and_kj() {
    let t = build(2, 2);
    unsafe {
        // p_2 = λ²x² + λ at λ = 2i, x = 2: -16 + 2i, |p|² = 260.
        let x = CString::new("2").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(gsm_log_magnitude(t, 2, 1, x.as_ptr(), 128, &mut out), GsmStatus::Ok);
        let v: f64 = take_string(out).parse().unwrap();
        assert!((v - 0.5 * 260f64.ln()).abs() < 1e-12);
        let mut kj = 0;
        assert_eq!(gsm_kj(2, 1, &mut kj), GsmStatus::Ok);
        assert_eq!(kj, 8);
        assert_eq!(gsm_kj(4, 2, &mut kj), GsmStatus::Ok);
        assert_eq!(kj, 11);
        gsm_table_free(t);
    }
}

#[test]
fn wedge_codes() {
    let c = |s: &str| CString::new(s).unwrap();
    unsafe {
        let mut v = GsmVerdict::Unknown;
        let mut excl: c_int = 0;
        let (two, one, half) = (c("2"), c("1"), c("1/2"));
        assert_eq!(
            gsm_wedge_classify(two.as_ptr(), one.as_ptr(), 2, GsmSpace::Roumieu as c_int, 1, 0, 0, 0, &mut v, &mut excl),
            GsmStatus::Ok
        );
        assert_eq!(v, GsmVerdict::NotContinuous);
        assert_eq!(
            gsm_wedge_classify(half.as_ptr(), one.as_ptr(), 3, GsmSpace::Beurling as c_int, 1, 0, 0, 0, &mut v, &mut excl),
            GsmStatus::Ok
        );
        assert_eq!((v, excl), (GsmVerdict::Unknown, 1));
        assert_eq!(
            gsm_wedge_classify(one.as_ptr(), two.as_ptr(), 2, GsmSpace::Roumieu as c_int, 1, 0, 1, 1, &mut v, ptr::null_mut()),
            GsmStatus::Ok
        );
        assert_eq!(v, GsmVerdict::NotContinuous);
        assert_eq!(
            gsm_wedge_classify(one.as_ptr(), one.as_ptr(), 2, 7, 1, 0, 0, 0, &mut v, ptr::null_mut()),
            GsmStatus::InvalidArgument
        );
        assert_eq!(
            gsm_wedge_classify(ptr::null(), one.as_ptr(), 2, 0, 1, 0, 0, 0, &mut v, ptr::null_mut()),
            GsmStatus::NullPointer
        );
    }
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(gsm_table_build(0, 1, &mut t), GsmStatus::DegreeTooSmall);
    }
    let other = std::thread::spawn(|| gsm_last_error().is_null()).join().unwrap();
    assert!(other);
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("gsm.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct GsmCoeffTable GsmCoeffTable",
        "GSM_STATUS_OK = 0",
        "GSM_VERDICT_UNKNOWN = 3",
        "gsm_table_build(",
        "gsm_table_free(",
        "gsm_table_coeff(",
        "gsm_table_certify(",
        "gsm_log_magnitude(",
        "gsm_kj(",
        "gsm_wedge_classify(",
        "gsm_last_error(",
        "gsm_string_free(",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(cc.status.success());
    for lang in ["c", "c++"] {
        let status = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .status()
            .unwrap();
        assert!(status.success(), "header does not compile as {lang}");
    }
}
