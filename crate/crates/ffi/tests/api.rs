use std::ffi::{CStr, CString};
use std::ptr;

use cylmodes_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 1024];
    unsafe {
        assert_eq!(cyl_last_error(buf.as_mut_ptr(), buf.len(), ptr::null_mut()), CylStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn config_errors_name_every_key() {
    let text = CString::new("[grid]\nnr = 2\n[modes]\nK = 0\n").unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { cyl_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_eq!(st, CylStatus::Config);
    assert!(cfg.is_null());
    let msg = last_error();
    assert!(msg.contains("grid.nr") && msg.contains("modes.K"), "{msg}");
}

#[test]
fn rejected_override_leaves_config_intact() {
    let text = CString::new("[grid]\nnr = 24\nnz = 24\nrmax = 3.0\nlz = 3.0\n[init]\nr0 = 1.5\nsigma = 0.4\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(cyl_config_from_toml(text.as_ptr(), &mut cfg), CylStatus::Ok);
        let bad = CString::new("grid.nr=1").unwrap();
        assert_eq!(cyl_config_set(cfg, bad.as_ptr()), CylStatus::Config);
        let mut state = ptr::null_mut();
        assert_eq!(cyl_state_from_config(cfg, &mut state), CylStatus::Ok);
        let mut nr = 0;
        assert_eq!(cyl_state_dims(state, &mut nr, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), CylStatus::Ok);
        assert_eq!(nr, 24);
        cyl_state_free(state);
        cyl_config_free(cfg);
    }
}

#[test]
fn null_handles_are_reported() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(cyl_state_time(ptr::null(), &mut out), CylStatus::NullPointer);
        assert_eq!(cyl_run_advance(ptr::null_mut(), 1, ptr::null_mut()), CylStatus::NullPointer);
        assert_eq!(cyl_config_from_toml(ptr::null(), ptr::null_mut()), CylStatus::NullPointer);
    }
    assert!(last_error().contains("null"));
}

#[test]
fn errors_are_per_thread() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(cyl_kernel_fm(3, 0.0, &mut out), CylStatus::Numerical);
    }
    let msg = last_error();
    assert!(msg.contains("s = 0"), "{msg}");
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
}
