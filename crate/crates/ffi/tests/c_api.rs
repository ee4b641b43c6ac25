use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use coolchain_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        cc_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn chain_frequencies_round_trip() {
    unsafe {
        let mut chain = ptr::null_mut();
        assert_eq!(cc_chain_new(3, 0.25, &mut chain), CcStatus::Ok);
        let mut n = 0usize;
        assert_eq!(cc_chain_n_modes(chain, &mut n), CcStatus::Ok);
        assert_eq!(n, 3);
        let mut freqs = [0.0; 3];
        assert_eq!(cc_chain_frequencies(chain, freqs.as_mut_ptr(), 3), CcStatus::Ok);
        for (got, want) in freqs.iter().zip([1.0, 1.7321, 2.4083]) {
            assert!((got - want).abs() < 1e-4);
        }
        let mut short = [0.0; 2];
        assert_eq!(cc_chain_frequencies(chain, short.as_mut_ptr(), 2), CcStatus::BufferTooSmall);
        let mut eta = [0.0; 9];
        assert_eq!(cc_chain_lamb_dicke(chain, 1.0, eta.as_mut_ptr(), 9), CcStatus::Ok);
        let row: f64 = (0..3).map(|a| eta[a] * eta[a] * freqs[a]).sum();
        assert!((row - 0.25).abs() < 1e-12);
        cc_chain_free(chain);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut chain = ptr::null_mut();
        assert_eq!(cc_chain_new(0, 0.25, &mut chain), CcStatus::InvalidParameter);
        assert!(chain.is_null());
        assert!(last_error().starts_with("invalid_parameter:"));
        assert_eq!(cc_chain_n_modes(ptr::null(), ptr::null_mut()), CcStatus::NullPointer);
        assert!(last_error().starts_with("null_pointer:"));

        let mut params = ptr::null_mut();
        assert_eq!(cc_params_new(2, 50.0, 5.0, 0.25, &mut params), CcStatus::Ok);
        assert_eq!(cc_params_set_m_driven(params, 3), CcStatus::InvalidParameter);
        let bad = CString::new("sideways").unwrap();
        assert_eq!(cc_params_set_pattern(params, bad.as_ptr()), CcStatus::InvalidParameter);
        let c = [-1.0, 1.0];
        let d = [1.0, 1.0];
        assert_eq!(cc_params_set_pattern_table(params, c.as_ptr(), d.as_ptr(), 2), CcStatus::UnnormalizedPattern);
        assert_eq!(cc_params_set_detuning(params, 10.0), CcStatus::Ok);
        let mut e = 0.0;
        assert_eq!(cc_steady_energy(params, &mut e), CcStatus::NoSteadyState);
        cc_params_free(params);
    }
}

#[test]
fn cooling_quantities() {
    unsafe {
        let mut params = ptr::null_mut();
        assert_eq!(cc_params_new(2, 50.0, 5.0, 0.25, &mut params), CcStatus::Ok);
        let (mut e, mut rate) = (0.0, 0.0);
        assert_eq!(cc_steady_energy(params, &mut e), CcStatus::Ok);
        assert_eq!(cc_cooling_rate(params, &mut rate), CcStatus::Ok);
        assert!((e - 2.0 * 50.0 / 3.0).abs() < 1e-9);
        assert!((rate - 2.0 * 0.25 * 25.0 / 2500.0).abs() < 1e-12);
        assert_eq!(cc_params_set_m_driven(params, 1), CcStatus::Ok);
        let mut half = 0.0;
        assert_eq!(cc_cooling_rate(params, &mut half), CcStatus::Ok);
        assert!((2.0 * half - rate).abs() < 1e-15);

        let (mut norm, mut shift, mut var) = (0.0, 0.0, 0.0);
        assert_eq!(cc_kernel_moments(30.0, 0.25, 3, &mut norm, &mut shift, &mut var), CcStatus::Ok);
        assert!((norm - 1.0).abs() < 1e-10 && (shift - 0.25).abs() < 1e-9 && (var - 5.0).abs() < 1e-8);

        let mut p = 0.0;
        assert_eq!(cc_fc_probability(0, 1, 0.3, &mut p), CcStatus::Ok);
        assert!((p - 0.09 * (-0.09f64).exp()).abs() < 1e-15);
        cc_params_free(params);
    }
}

#[test]
fn ergodic_run_cools_and_rejects_unstable_step() {
    unsafe {
        let mut chain = ptr::null_mut();
        let mut params = ptr::null_mut();
        assert_eq!(cc_chain_new(1, 0.25, &mut chain), CcStatus::Ok);
        assert_eq!(cc_params_new(1, 20.0, 2.0, 0.25, &mut params), CcStatus::Ok);
        let mut e_ss = 0.0;
        cc_steady_energy(params, &mut e_ss);
        let mut e = 0.0;
        assert_eq!(cc_evolve_ergodic(chain, params, 0.5, 80.0, 2.0 * e_ss, 200.0, 0.0, &mut e), CcStatus::Ok);
        assert!(e < 2.0 * e_ss && e > 0.5 * e_ss, "{e} vs {e_ss}");
        assert_eq!(
            cc_evolve_ergodic(chain, params, 0.5, 80.0, 2.0 * e_ss, 200.0, 50.0, &mut e),
            CcStatus::CflViolation
        );
        assert!(last_error().starts_with("cfl_violation:"));
        cc_params_free(params);
        cc_chain_free(chain);
    }
}

fn profile_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = profile_dir().join("libcoolchain_ffi.a");
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "coolchain.h"
int main(void) {
    CcChain *chain = NULL;
    double f[3];
    char msg[128];
    if (cc_chain_new(3, 0.25, &chain) != CC_STATUS_OK) return 1;
    if (cc_chain_frequencies(chain, f, 3) != CC_STATUS_OK) return 2;
    cc_chain_free(chain);
    if (cc_chain_new(0, 0.25, &chain) != CC_STATUS_INVALID_PARAMETER) return 3;
    cc_last_error_message(msg, sizeof msg);
    printf("%.6f %.6f %.6f|%s\n", f[0], f[1], f[2], msg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&compiler)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("1.000000 1.732051 2.408319|invalid_parameter:"), "{text}");
}
