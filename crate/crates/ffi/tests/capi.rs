use std::ffi::{CStr, CString};
use std::ptr;

use stochmesh_ffi::*;

const SMALL: &str = r#"
[grid]
nx = 21
ny = 21

[subdomains]
m = 2
n = 2

[time]
dt = 0.001
t_end = 0.003

[stochastic]
n_sub = 10
n_paths = 200
points_per_interface = 4
seed = 7

[output]
snapshot_times = [0.003]
"#;

fn create(text: &str) -> (StochmeshStatus, *mut StochmeshSimulation) {
    let text = CString::new(text).unwrap();
    let mut sim = ptr::null_mut();
    let status = unsafe { stochmesh_simulation_from_toml(text.as_ptr(), &mut sim) };
    (status, sim)
}

fn last_error() -> String {
    let p = stochmesh_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn lifecycle_steps_and_reads_back_fields() {
    let (status, sim) = create(SMALL);
    assert_eq!(status, StochmeshStatus::Ok, "{}", last_error());
    assert!(!sim.is_null());

    let (mut nx, mut ny) = (0usize, 0usize);
    assert_eq!(unsafe { stochmesh_simulation_grid_size(sim, &mut nx, &mut ny) }, StochmeshStatus::Ok);
    assert_eq!((nx, ny), (21, 21));

    assert_eq!(unsafe { stochmesh_simulation_step(sim) }, StochmeshStatus::Ok);
    assert!((unsafe { stochmesh_simulation_time(sim) } - 0.001).abs() < 1e-12);
    assert_eq!(unsafe { stochmesh_simulation_advance(sim, 0.003) }, StochmeshStatus::Ok);
    assert!((unsafe { stochmesh_simulation_time(sim) } - 0.003).abs() < 1e-12);

    let mut xi = vec![0.0; nx * ny];
    let mut eta = vec![0.0; nx * ny];
    let status = unsafe { stochmesh_simulation_copy_fields(sim, xi.as_mut_ptr(), eta.as_mut_ptr(), xi.len()) };
    assert_eq!(status, StochmeshStatus::Ok);
    assert_eq!(xi[0], 0.0);
    assert_eq!(xi[nx - 1], 1.0);
    assert_eq!(eta[nx * ny - 1], 1.0);
    assert!(xi.iter().chain(&eta).all(|v| (0.0..=1.0).contains(v)));

    let mut q = StochmeshQuality::default();
    assert_eq!(unsafe { stochmesh_simulation_quality(sim, &mut q) }, StochmeshStatus::Ok);
    assert!(q.fold_free);
    assert!(q.min_jacobian > 0.0);

    unsafe { stochmesh_simulation_free(sim) };
}

#[test]
fn small_buffers_are_rejected() {
    let (_, sim) = create(SMALL);
    let mut xi = vec![0.0; 10];
    let mut eta = vec![0.0; 10];
    let status = unsafe { stochmesh_simulation_copy_fields(sim, xi.as_mut_ptr(), eta.as_mut_ptr(), 10) };
    assert_eq!(status, StochmeshStatus::BufferTooSmall);
    assert!(last_error().contains("441"));
    unsafe { stochmesh_simulation_free(sim) };
}

#[test]
fn invalid_config_reports_the_key() {
    let (status, sim) = create("[time]\ndt = 0.0\n");
    assert_eq!(status, StochmeshStatus::InvalidConfig);
    assert!(sim.is_null());
    assert!(last_error().contains("dt"));
}

#[test]
fn null_and_non_utf8_arguments() {
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { stochmesh_simulation_from_toml(ptr::null(), &mut sim) },
        StochmeshStatus::NullPointer
    );
    assert_eq!(unsafe { stochmesh_simulation_step(ptr::null_mut()) }, StochmeshStatus::NullPointer);
    assert!(unsafe { stochmesh_simulation_time(ptr::null()) }.is_nan());
    unsafe { stochmesh_simulation_free(ptr::null_mut()) };

    let bad = [0xffu8, 0xfe, 0];
    let status = unsafe { stochmesh_simulation_from_toml(bad.as_ptr().cast(), &mut sim) };
    assert_eq!(status, StochmeshStatus::InvalidUtf8);
}

#[test]
fn csv_export_matches_grid() {
    let (_, sim) = create(SMALL);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.csv");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { stochmesh_simulation_write_csv(sim, c_path.as_ptr()) }, StochmeshStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 21 * 21);

    let missing = CString::new(dir.path().join("no/such/dir/mesh.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { stochmesh_simulation_write_csv(sim, missing.as_ptr()) }, StochmeshStatus::Io);
    unsafe { stochmesh_simulation_free(sim) };
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(stochmesh_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/stochmesh.h");
    for name in [
        "stochmesh_simulation_from_toml",
        "stochmesh_simulation_free",
        "stochmesh_simulation_step",
        "stochmesh_simulation_advance",
        "stochmesh_simulation_copy_fields",
        "stochmesh_simulation_quality",
        "stochmesh_simulation_write_csv",
        "stochmesh_last_error",
        "STOCHMESH_STATUS_BUFFER_TOO_SMALL",
        "typedef struct StochmeshSimulation StochmeshSimulation",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
