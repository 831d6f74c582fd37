use std::ffi::{CStr, CString};
use std::ptr;

use nlqw_ffi::*;

fn last_error() -> String {
    let p = nlqw_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn walk(name: &str, l: usize, c: f64) -> *mut NlqwWalk {
    let name = CString::new(name).unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { nlqw_walk_preset(name.as_ptr(), l, c, 3, &mut w) }, NlqwStatus::Ok);
    w
}

#[test]
fn evolution_preserves_the_norm() {
    unsafe {
        let w = walk("kls-origin", 64, 1.0);
        let mut values = vec![0.0; 4 * 128];
        values[4 * 64] = 0.3;
        values[4 * 64 + 3] = -0.4;
        let mut f = ptr::null_mut();
        assert_eq!(nlqw_field_from_values(64, values.as_ptr(), values.len(), &mut f), NlqwStatus::Ok);
        assert_eq!(nlqw_walk_double_steps(w, f, 20), NlqwStatus::Ok);
        assert_eq!(nlqw_walk_step(w, f), NlqwStatus::Ok);
        let mut n = 0.0;
        assert_eq!(nlqw_field_norm(f, &mut n), NlqwStatus::Ok);
        assert!((n - 0.5).abs() < 1e-14, "{n}");
        let mut len = 0;
        assert_eq!(nlqw_field_len(f, &mut len), NlqwStatus::Ok);
        let mut out = vec![0.0; len];
        assert_eq!(nlqw_field_values(f, out.as_mut_ptr(), len), NlqwStatus::Ok);
        let sum: f64 = out.iter().map(|v| v * v).sum();
        assert!((sum - 0.25).abs() < 1e-14);
        nlqw_field_free(f);
        nlqw_walk_free(w);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let bad = CString::new("no-such-preset").unwrap();
        let mut w = ptr::null_mut();
        assert_eq!(nlqw_walk_preset(bad.as_ptr(), 8, 1.0, 3, &mut w), NlqwStatus::InvalidArgument);
        assert!(w.is_null());
        assert!(last_error().contains("no-such-preset"), "{}", last_error());
        assert_eq!(nlqw_walk_preset(ptr::null(), 8, 1.0, 3, &mut w), NlqwStatus::NullPointer);
        let mut f = ptr::null_mut();
        let v = [0.0; 3];
        assert_eq!(nlqw_field_from_values(8, v.as_ptr(), 3, &mut f), NlqwStatus::InvalidArgument);
        let w = walk("free", 8, 0.0);
        assert_eq!(nlqw_field_zeros(4, &mut f), NlqwStatus::Ok);
        assert_eq!(nlqw_walk_step(w, f), NlqwStatus::GridMismatch);
        let mut n = 0.0;
        assert_eq!(nlqw_field_norm(ptr::null(), &mut n), NlqwStatus::NullPointer);
        nlqw_field_free(f);
        nlqw_walk_free(w);
        nlqw_walk_free(ptr::null_mut());
    }
}

#[test]
fn family_point_is_a_fixed_point() {
    unsafe {
        let name = CString::new("kls-origin").unwrap();
        let mut fam = ptr::null_mut();
        assert_eq!(nlqw_family_new(name.as_ptr(), 48, 1.0, 3, &mut fam), NlqwStatus::Ok);
        let mut zmax = 0.0;
        assert_eq!(nlqw_family_z_max(fam, &mut zmax), NlqwStatus::Ok);
        assert!(zmax > 0.05);
        let (mut phi, mut lambda, mut res) = (ptr::null_mut(), 0.0, 1.0);
        assert_eq!(nlqw_family_eval(fam, 0.05, 0.01, &mut phi, &mut lambda, &mut res), NlqwStatus::Ok);
        assert!(res < 2e-9, "{res}");
        // evolving Phi on the window's walk multiplies it by e^{i Lambda}
        let w = walk("kls-origin", 48, 1.0);
        let mut before = 0.0;
        nlqw_field_norm(phi, &mut before);
        assert_eq!(nlqw_walk_step(w, phi), NlqwStatus::Ok);
        let mut after = 0.0;
        nlqw_field_norm(phi, &mut after);
        assert!((before - after).abs() < 1e-15);
        let mut none = ptr::null_mut();
        assert_eq!(
            nlqw_family_eval(fam, 10.0, 0.0, &mut none, ptr::null_mut(), ptr::null_mut()),
            NlqwStatus::Precondition
        );
        nlqw_field_free(phi);
        nlqw_walk_free(w);
        nlqw_family_free(fam);
    }
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.nlqw").to_str().unwrap()).unwrap();
    unsafe {
        let values: Vec<f64> = (0..4 * 20).map(|k| k as f64 * 0.25 - 3.0).collect();
        let mut f = ptr::null_mut();
        assert_eq!(nlqw_field_from_values(10, values.as_ptr(), values.len(), &mut f), NlqwStatus::Ok);
        assert_eq!(nlqw_snapshot_save(f, path.as_ptr()), NlqwStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(nlqw_snapshot_load(path.as_ptr(), &mut g), NlqwStatus::Ok);
        let mut back = vec![0.0; values.len()];
        assert_eq!(nlqw_field_values(g, back.as_mut_ptr(), back.len()), NlqwStatus::Ok);
        assert_eq!(back, values);
        let missing = CString::new(dir.path().join("missing").to_str().unwrap()).unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(nlqw_snapshot_load(missing.as_ptr(), &mut h), NlqwStatus::Io);
        nlqw_field_free(f);
        nlqw_field_free(g);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nlqw.h")).unwrap();
    for name in [
        "typedef struct NlqwWalk NlqwWalk",
        "NLQW_STATUS_OK = 0",
        "nlqw_walk_preset",
        "nlqw_walk_double_steps",
        "nlqw_field_from_values",
        "nlqw_family_eval",
        "nlqw_snapshot_load",
        "nlqw_last_error_message",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let version = unsafe { CStr::from_ptr(nlqw_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
