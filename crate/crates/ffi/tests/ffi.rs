use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ucgm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { ucgm_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn tiny_model(dim: usize) -> *mut UcgmModel {
    let hidden = [8usize, 8];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ucgm_model_init(dim, hidden.as_ptr(), hidden.len(), 0, 1, &mut m) }, UcgmStatus::Ok);
    m
}

#[test]
fn version_and_coefficients() {
    let v = unsafe { CStr::from_ptr(ucgm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    let mut c = UcgmCoefficients::default();
    let edm = CString::new("edm").unwrap();
    assert_eq!(unsafe { ucgm_transport_coefficients(edm.as_ptr(), 0.3, &mut c) }, UcgmStatus::Ok);
    assert!((c.alpha * c.gamma_hat - c.alpha_hat * c.gamma - 2.0).abs() < 1e-12);
    assert!((c.denom - 2.0).abs() < 1e-12);

    let bad = CString::new("nope").unwrap();
    assert_ne!(unsafe { ucgm_transport_coefficients(bad.as_ptr(), 0.3, &mut c) }, UcgmStatus::Ok);
    assert!(!last_error().is_empty());
    let lin = CString::new("linear").unwrap();
    assert_eq!(unsafe { ucgm_transport_coefficients(lin.as_ptr(), 1.5, &mut c) }, UcgmStatus::InvalidArgument);
    assert_eq!(unsafe { ucgm_transport_coefficients(ptr::null(), 0.5, &mut c) }, UcgmStatus::NullPointer);
    assert_eq!(unsafe { ucgm_transport_coefficients(lin.as_ptr(), 0.5, ptr::null_mut()) }, UcgmStatus::NullPointer);
}

#[test]
fn error_message_truncates_and_reports_size() {
    let lin = CString::new("linear").unwrap();
    let mut c = UcgmCoefficients::default();
    unsafe { ucgm_transport_coefficients(lin.as_ptr(), -1.0, &mut c) };
    let need = unsafe { ucgm_last_error(ptr::null_mut(), 0) };
    assert!(need > 5);
    let mut small = [1 as c_char; 4];
    assert_eq!(unsafe { ucgm_last_error(small.as_mut_ptr(), small.len()) }, need);
    assert_eq!(small[3], 0);
    // A successful call clears the message.
    unsafe { ucgm_transport_coefficients(lin.as_ptr(), 0.5, &mut c) };
    assert_eq!(last_error(), "");
}

#[test]
fn model_round_trip_forward_and_sample() {
    let m = tiny_model(2);
    assert_eq!(unsafe { ucgm_model_dim(m) }, 2);
    assert_eq!(unsafe { ucgm_model_dim(ptr::null()) }, 0);
    let x = [0.3, -0.2];
    let mut f = [0.0; 2];
    assert_eq!(unsafe { ucgm_model_forward(m, x.as_ptr(), 2, 0.5, -1, f.as_mut_ptr(), 2) }, UcgmStatus::Ok);
    assert_eq!(unsafe { ucgm_model_forward(m, x.as_ptr(), 1, 0.5, -1, f.as_mut_ptr(), 2) }, UcgmStatus::DimensionMismatch);
    assert_eq!(unsafe { ucgm_model_forward(m, x.as_ptr(), 2, 0.5, -1, f.as_mut_ptr(), 1) }, UcgmStatus::BufferTooSmall);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ucgm").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ucgm_model_save(m, path.as_ptr()) }, UcgmStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { ucgm_model_load(path.as_ptr(), ptr::null(), &mut loaded) }, UcgmStatus::Ok);
    let mut g = [0.0; 2];
    unsafe { ucgm_model_forward(loaded, x.as_ptr(), 2, 0.5, -1, g.as_mut_ptr(), 2) };
    assert_eq!(f, g);
    let missing = CString::new(dir.path().join("absent").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { ucgm_model_load(missing.as_ptr(), ptr::null(), &mut none) }, UcgmStatus::Io);
    assert!(none.is_null());

    let cfg = UcgmSamplerConfig { steps: 8, ..ucgm_sampler_config_default() };
    let lin = CString::new("linear").unwrap();
    let mut a = vec![0.0; 20];
    let mut b = vec![0.0; 20];
    assert_eq!(unsafe { ucgm_sample(m, lin.as_ptr(), &cfg, 10, 3, -1, a.as_mut_ptr(), a.len()) }, UcgmStatus::Ok);
    assert_eq!(unsafe { ucgm_sample(loaded, lin.as_ptr(), &cfg, 10, 3, -1, b.as_mut_ptr(), b.len()) }, UcgmStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(unsafe { ucgm_sample(m, lin.as_ptr(), &cfg, 11, 3, -1, a.as_mut_ptr(), a.len()) }, UcgmStatus::BufferTooSmall);
    let bad = UcgmSamplerConfig { order: 3, ..cfg };
    assert_eq!(unsafe { ucgm_sample(m, lin.as_ptr(), &bad, 10, 3, -1, a.as_mut_ptr(), a.len()) }, UcgmStatus::InvalidArgument);

    unsafe {
        ucgm_model_free(m);
        ucgm_model_free(loaded);
        ucgm_model_free(ptr::null_mut());
    }
}

#[test]
fn metrics_and_oracle() {
    let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
    let mut w = 0.0;
    assert_eq!(unsafe { ucgm_wasserstein1(a.as_ptr(), a.len(), b.as_ptr(), b.len(), 0, &mut w) }, UcgmStatus::Ok);
    assert!((w - 0.5).abs() < 1e-9);
    let mut e = -1.0;
    assert_eq!(unsafe { ucgm_energy_distance(a.as_ptr(), 500, a.as_ptr(), 500, 2, 0, &mut e) }, UcgmStatus::Ok);
    assert!(e.abs() < 1e-12);
    assert_eq!(unsafe { ucgm_energy_distance(a.as_ptr(), 500, a.as_ptr(), 500, 0, 0, &mut e) }, UcgmStatus::InvalidArgument);
    let mut q = 1.0;
    assert_eq!(unsafe { ucgm_bimodal_quantile_transport(2.0, 0.3, 0.0, &mut q) }, UcgmStatus::Ok);
    assert!(q.abs() < 1e-9);
    assert_eq!(unsafe { ucgm_bimodal_quantile_transport(2.0, -0.3, 0.0, &mut q) }, UcgmStatus::InvalidArgument);
}

#[test]
fn train_from_config_text() {
    let cfg = CString::new(
        "seed = 2\ndataset = bimodal:2,0.3\ndataset.size = 500\ntrainer.steps = 20\ntrainer.batch_size = 32\ntrainer.hidden = 8\n",
    )
    .unwrap();
    let (mut shift, mut scale) = ([9.0], [9.0]);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ucgm_train(cfg.as_ptr(), &mut m, shift.as_mut_ptr(), scale.as_mut_ptr(), 1) }, UcgmStatus::Ok);
    assert_eq!(unsafe { ucgm_model_dim(m) }, 1);
    assert!(shift[0].abs() < 0.2 && (scale[0] - 2.0).abs() < 0.2);
    unsafe { ucgm_model_free(m) };

    let bad = CString::new("trainer.lamda = 1\n").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { ucgm_train(bad.as_ptr(), &mut none, ptr::null_mut(), ptr::null_mut(), 0) }, UcgmStatus::Config);
    assert!(none.is_null());
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include "ucgm.h"

int main(void) {
    UcgmCoefficients c;
    if (ucgm_transport_coefficients("trigflow", 0.5, &c) != UCGM_STATUS_OK) return 1;
    size_t hidden[2] = {8, 8};
    UcgmModel *m = NULL;
    if (ucgm_model_init(1, hidden, 2, 0, 7, &m) != UCGM_STATUS_OK) return 2;
    UcgmSamplerConfig cfg = ucgm_sampler_config_default();
    cfg.steps = 4;
    double out[16];
    if (ucgm_sample(m, "linear", &cfg, 16, 1, -1, out, 16) != UCGM_STATUS_OK) return 3;
    if (ucgm_sample(m, "linear", &cfg, 17, 1, -1, out, 16) != UCGM_STATUS_BUFFER_TOO_SMALL) return 4;
    char msg[128];
    if (ucgm_last_error(msg, sizeof msg) < 2) return 5;
    ucgm_model_free(m);
    printf("%s %.6f\n", ucgm_version(), c.denom);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    // Test builds leave the library in deps/ next to the test binary; plain builds uplift it one level.
    let deps: PathBuf = exe.parent().unwrap().to_path_buf();
    let lib = [deps.join("libucgm_ffi.a"), deps.parent().unwrap().join("libucgm_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| panic!("static library not built under {}", deps.display()));
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), format!("{} -1.000000", env!("CARGO_PKG_VERSION")));
}
