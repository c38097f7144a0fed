use std::ffi::{CStr, CString};
use std::ptr;

use wiener_topo_ffi::*;

fn last_error() -> String {
    let p = wt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { wt_string_free(p) };
    s
}

struct Fixture {
    net: *mut WtNetwork,
    cov: *mut WtCovariance,
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            wt_covariance_free(self.cov);
            wt_network_free(self.net);
        }
    }
}

fn fixture(n: usize, steps: usize, seed: u64) -> Fixture {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { wt_network_random(n, 2, 3, seed, &mut net) }, WtStatus::Ok);
    let mut data = vec![0.0; n * steps];
    let mut snr = vec![0.0; n];
    let status = unsafe { wt_network_simulate(net, steps, 6.0, data.as_mut_ptr(), data.len(), snr.as_mut_ptr()) };
    assert_eq!(status, WtStatus::Ok);
    let mut cov = ptr::null_mut();
    assert_eq!(unsafe { wt_covariance_estimate(data.as_ptr(), n, steps, 20, &mut cov) }, WtStatus::Ok);
    Fixture { net, cov }
}

#[test]
fn identify_and_score_through_the_abi() {
    let f = fixture(8, 4000, 3);
    let mut config = wt_config_default();
    config.m = 2;
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { wt_identify(f.cov, &config, &mut est) }, WtStatus::Ok);
    assert_eq!(unsafe { wt_topology_nodes(est) }, 8);
    let edges = unsafe { wt_topology_edge_count(est) };
    let mut indegree = [0usize; 8];
    for k in 0..edges {
        let (mut from, mut to, mut w) = (0, 0, 0.0);
        assert_eq!(unsafe { wt_topology_edge(est, k, &mut from, &mut to, &mut w) }, WtStatus::Ok);
        assert!(w >= 0.0 && from != to);
        indegree[to] += 1;
    }
    assert!(indegree.iter().all(|&d| d <= 2));

    let mut truth = ptr::null_mut();
    assert_eq!(unsafe { wt_network_topology(f.net, &mut truth) }, WtStatus::Ok);
    let mut report = WtComparison::default();
    assert_eq!(unsafe { wt_topology_compare(truth, truth, &mut report) }, WtStatus::Ok);
    assert_eq!(report.f1, 1.0);
    assert_eq!(unsafe { wt_topology_compare(truth, est, &mut report) }, WtStatus::Ok);
    assert!((0.0..=1.0).contains(&report.recall));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { wt_topology_to_json(est, &mut json) }, WtStatus::Ok);
    let text = CString::new(take_string(json)).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { wt_topology_from_json(text.as_ptr(), &mut back) }, WtStatus::Ok);
    assert_eq!(unsafe { wt_topology_edge_count(back) }, edges);

    let mut dot = ptr::null_mut();
    assert_eq!(unsafe { wt_topology_to_dot(est, &mut dot) }, WtStatus::Ok);
    assert!(take_string(dot).starts_with("digraph"));

    let mut thin = ptr::null_mut();
    assert_eq!(unsafe { wt_topology_threshold(est, 0.5, &mut thin) }, WtStatus::Ok);
    assert!(unsafe { wt_topology_edge_count(thin) } <= edges);

    config.auto_degree = true;
    config.method = WtMethod::Rwls;
    let mut auto = ptr::null_mut();
    assert_eq!(unsafe { wt_identify(f.cov, &config, &mut auto) }, WtStatus::Ok);

    unsafe {
        for t in [est, truth, back, thin, auto] {
            wt_topology_free(t);
        }
    }
}

#[test]
fn projection_matches_the_library() {
    let f = fixture(4, 2000, 5);
    let inputs = [1usize, 3];
    let half = 3;
    let mut taps = vec![0.0; inputs.len() * (2 * half + 1)];
    let mut residual = 0.0;
    let status = unsafe {
        wt_project(f.cov, 0, inputs.as_ptr(), inputs.len(), half, 1e-8, taps.as_mut_ptr(), taps.len(), &mut residual)
    };
    assert_eq!(status, WtStatus::Ok);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { wt_covariance_to_json(f.cov, &mut json) }, WtStatus::Ok);
    let model = wiener_topo::CovarianceModel::from_json(&take_string(json)).unwrap();
    let req = wiener_topo::ProjectionRequest::new(0, inputs.to_vec()).with_half_width(half);
    let sol = wiener_topo::project(&model, &req).unwrap();
    assert_eq!(residual, sol.residual_variance);
    assert_eq!(taps, sol.taps.concat());

    let mut v = 0.0;
    assert_eq!(unsafe { wt_covariance_get(f.cov, 2, 1, -4, &mut v) }, WtStatus::Ok);
    assert_eq!(v, model.get(2, 1, -4));
    assert_eq!(unsafe { wt_covariance_nodes(f.cov) }, 4);
    assert_eq!(unsafe { wt_covariance_max_lag(f.cov) }, 20);
}

#[test]
fn errors_map_to_status_codes() {
    let f = fixture(3, 500, 1);
    let mut taps = [0.0; 3];
    let mut residual = 0.0;
    let inputs = [1usize];
    let status = unsafe { wt_project(f.cov, 0, inputs.as_ptr(), 1, 2, 0.0, taps.as_mut_ptr(), taps.len(), &mut residual) };
    assert_eq!(status, WtStatus::BufferTooSmall);
    assert!(last_error().contains("taps"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { wt_identify(ptr::null(), &wt_config_default(), &mut out) }, WtStatus::NullArgument);
    assert!(out.is_null());

    let mut config = wt_config_default();
    config.half_width = 15;
    assert_eq!(unsafe { wt_identify(f.cov, &config, &mut out) }, WtStatus::Config);
    assert!(last_error().contains("half-width"));

    let bad = CString::new("{not json").unwrap();
    let mut cov = ptr::null_mut();
    assert_eq!(unsafe { wt_covariance_from_json(bad.as_ptr(), &mut cov) }, WtStatus::Config);

    let invalid = [0xffu8, 0xfe, 0];
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { wt_network_from_json(invalid.as_ptr().cast(), &mut net) },
        WtStatus::InvalidUtf8
    );

    let mut v = 0.0;
    assert_eq!(unsafe { wt_covariance_get(f.cov, 0, 7, 0, &mut v) }, WtStatus::Config);
    assert_eq!(unsafe { wt_covariance_get(f.cov, 0, 0, 99, &mut v) }, WtStatus::Config);

    // A successful call clears the message.
    assert_eq!(unsafe { wt_covariance_get(f.cov, 0, 0, 0, &mut v) }, WtStatus::Ok);
    assert!(wt_last_error().is_null());
}

#[test]
fn network_json_round_trip_and_null_handles() {
    let f = fixture(5, 300, 2);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { wt_network_to_json(f.net, &mut json) }, WtStatus::Ok);
    let text = CString::new(take_string(json)).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { wt_network_from_json(text.as_ptr(), &mut net) }, WtStatus::Ok);
    assert_eq!(unsafe { wt_network_nodes(net) }, 5);

    let mut a = vec![0.0; 5 * 200];
    let mut b = vec![0.0; 5 * 200];
    unsafe {
        assert_eq!(wt_network_simulate(net, 200, 0.0, a.as_mut_ptr(), a.len(), ptr::null_mut()), WtStatus::Ok);
        assert_eq!(wt_network_simulate(net, 200, 0.0, b.as_mut_ptr(), b.len(), ptr::null_mut()), WtStatus::Ok);
    }
    assert_eq!(a, b);
    assert!(a.iter().any(|&v| v != 0.0));

    unsafe {
        wt_network_free(net);
        wt_network_free(ptr::null_mut());
        wt_topology_free(ptr::null_mut());
        wt_covariance_free(ptr::null_mut());
        wt_string_free(ptr::null_mut());
        assert_eq!(wt_topology_nodes(ptr::null()), 0);
    }
    let version = unsafe { CStr::from_ptr(wt_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
