//! C ABI over `wiener_topo`.
//!
//! Every fallible call returns a [`WtStatus`]; on failure a message is kept
//! per thread and can be read with [`wt_last_error`]. Objects are handed out
//! as opaque pointers and must be released with the matching `*_free`.
//! Strings returned through `char **` are owned by the caller and released
//! with [`wt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wiener_topo::error::ErrorKind;
use wiener_topo::graphio::{compare, default_node_ids, threshold_edges};
use wiener_topo::netsim::{random_spec, simulate, EdgeRule, NetworkSpec, SimulationOptions};
use wiener_topo::sparsifiers::{identify_all, Degree, Method, SparsifierConfig};
use wiener_topo::wiener::{project, ProjectionRequest, Ridge};
use wiener_topo::{estimate_covariances, CovarianceModel, TimeSeriesSet, Topology};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WtStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Invalid configuration, dimensions or input data.
    Config = 2,
    /// Singular system, divergence or another numerical failure.
    Numerical = 3,
    Io = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// An output buffer was too small.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Solver selector for [`WtConfig`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WtMethod {
    Exhaustive = 0,
    Cols = 1,
    Rwls = 2,
}

/// Identification settings. Obtain defaults from [`wt_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WtConfig {
    pub method: WtMethod,
    /// In-degree bound; ignored when `auto_degree` is set.
    pub m: usize,
    /// Pick each node's degree with the residual-improvement rule.
    pub auto_degree: bool,
    /// Filter half-width; each channel has `2L + 1` taps.
    pub half_width: usize,
    /// Relative diagonal loading.
    pub ridge: f64,
    pub rwls_iterations: usize,
    pub auto_threshold: f64,
    pub enumeration_budget: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WtComparison {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Cross-covariance sequences of a set of series.
pub struct WtCovariance {
    model: CovarianceModel,
}

/// Directed weighted graph over named nodes.
pub struct WtTopology {
    topology: Topology,
}

/// Ground-truth FIR network used for simulation.
pub struct WtNetwork {
    spec: NetworkSpec,
}

struct Failure {
    status: WtStatus,
    message: String,
}

impl From<wiener_topo::Error> for Failure {
    fn from(e: wiener_topo::Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Config => WtStatus::Config,
            ErrorKind::Numerical => WtStatus::Numerical,
            ErrorKind::Io => WtStatus::Io,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: WtStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            WtStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal error: panic caught at the C boundary");
            WtStatus::Internal
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers obtained from this library or valid
    // caller-owned memory; null is rejected here.
    unsafe { p.as_ref() }.ok_or_else(|| fail(WtStatus::NullArgument, format!("`{name}` is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as for `non_null`.
    unsafe { p.as_mut() }.ok_or_else(|| fail(WtStatus::NullArgument, format!("`{name}` is null")))
}

fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(WtStatus::NullArgument, format!("`{name}` is null")));
    }
    // SAFETY: non-null and, per the API contract, NUL-terminated.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| fail(WtStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(WtStatus::NullArgument, format!("`{name}` is null")));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(WtStatus::NullArgument, format!("`{name}` is null")));
    }
    // SAFETY: the caller guarantees `len` writable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn give_string(text: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let out = out_ptr(out, "out")?;
    let c = CString::new(text).map_err(|_| fail(WtStatus::Internal, "string contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

fn give<T>(value: T, out: *mut *mut T) -> Result<(), Failure> {
    *out_ptr(out, "out")? = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `p` must be null or a pointer from the matching constructor, not yet freed.
unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: guaranteed by the caller.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn wt_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned through a `char **` out-parameter
/// of this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wt_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: guaranteed by the caller.
        drop(unsafe { CString::from_raw(s) });
    }
}

#[no_mangle]
pub extern "C" fn wt_config_default() -> WtConfig {
    let d = SparsifierConfig::default();
    WtConfig {
        method: WtMethod::Cols,
        m: 2,
        auto_degree: false,
        half_width: d.half_width,
        ridge: match d.ridge {
            Ridge::Relative(r) | Ridge::Absolute(r) => r,
        },
        rwls_iterations: d.rwls_iterations,
        auto_threshold: d.auto_threshold,
        enumeration_budget: d.enumeration_budget.min(u64::MAX as u128) as u64,
        workers: 0,
    }
}

impl WtConfig {
    fn to_core(self) -> (Method, SparsifierConfig) {
        let method = match self.method {
            WtMethod::Exhaustive => Method::Exhaustive,
            WtMethod::Cols => Method::Cols,
            WtMethod::Rwls => Method::Rwls,
        };
        let config = SparsifierConfig {
            m: if self.auto_degree {
                Degree::Auto
            } else {
                Degree::Fixed(self.m)
            },
            half_width: self.half_width,
            ridge: Ridge::Relative(self.ridge),
            rwls_iterations: self.rwls_iterations,
            auto_threshold: self.auto_threshold,
            enumeration_budget: self.enumeration_budget.into(),
            workers: (self.workers > 0).then_some(self.workers),
            ..Default::default()
        };
        (method, config)
    }
}

/// Estimates covariances up to `max_lag` from a row-major `n × t` matrix
/// (one row per node). Rows are mean-removed first.
///
/// # Safety
/// `data` must point to `n * t` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_estimate(
    data: *const f64,
    n: usize,
    t: usize,
    max_lag: usize,
    out: *mut *mut WtCovariance,
) -> WtStatus {
    guard(|| {
        let len = n
            .checked_mul(t)
            .ok_or_else(|| fail(WtStatus::Config, "n * t overflows"))?;
        let data = slice(data, len, "data")?;
        let rows: Vec<Vec<f64>> = if t == 0 {
            vec![Vec::new(); n]
        } else {
            data.chunks(t).map(<[f64]>::to_vec).collect()
        };
        let ts = TimeSeriesSet::from_rows(default_node_ids(n), rows)?.centered();
        let model = estimate_covariances(&ts, max_lag)?;
        give(WtCovariance { model }, out)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_from_json(json: *const c_char, out: *mut *mut WtCovariance) -> WtStatus {
    guard(|| {
        let model = CovarianceModel::from_json(read_str(json, "json")?)?;
        give(WtCovariance { model }, out)
    })
}

/// # Safety
/// `cov` must be a live covariance handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_to_json(cov: *const WtCovariance, out: *mut *mut c_char) -> WtStatus {
    guard(|| give_string(non_null(cov, "cov")?.model.to_json()?, out))
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `cov` must be null or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_nodes(cov: *const WtCovariance) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { cov.as_ref() }.map_or(0, |c| c.model.n())
}

/// Maximum lag, or 0 for a null handle.
///
/// # Safety
/// `cov` must be null or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_max_lag(cov: *const WtCovariance) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { cov.as_ref() }.map_or(0, |c| c.model.max_lag())
}

/// Writes `R(i, j, tau)` to `out`.
///
/// # Safety
/// `cov` must be a live covariance handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_get(
    cov: *const WtCovariance,
    i: usize,
    j: usize,
    tau: i64,
    out: *mut f64,
) -> WtStatus {
    guard(|| {
        let model = &non_null(cov, "cov")?.model;
        model.check_index(i)?;
        model.check_index(j)?;
        if tau.unsigned_abs() > model.max_lag() as u64 {
            return Err(fail(
                WtStatus::Config,
                format!("lag {tau} beyond the model's maximum {}", model.max_lag()),
            ));
        }
        *out_ptr(out, "out")? = model.get(i, j, tau);
        Ok(())
    })
}

/// # Safety
/// `cov` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wt_covariance_free(cov: *mut WtCovariance) {
    // SAFETY: guaranteed by the caller.
    unsafe { drop_handle(cov) }
}

/// Projects node `target` onto `inputs`. `taps` receives
/// `n_inputs * (2 * half_width + 1)` doubles, channel-major with lags
/// ascending from `-half_width`; `taps_len` is its capacity.
///
/// # Safety
/// `inputs` must hold `n_inputs` entries, `taps` `taps_len` writable
/// doubles, and `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_project(
    cov: *const WtCovariance,
    target: usize,
    inputs: *const usize,
    n_inputs: usize,
    half_width: usize,
    ridge: f64,
    taps: *mut f64,
    taps_len: usize,
    residual: *mut f64,
) -> WtStatus {
    guard(|| {
        let model = &non_null(cov, "cov")?.model;
        let inputs = slice(inputs, n_inputs, "inputs")?.to_vec();
        let need = n_inputs * (2 * half_width + 1);
        if taps_len < need {
            return Err(fail(
                WtStatus::BufferTooSmall,
                format!("taps buffer holds {taps_len} values, {need} needed"),
            ));
        }
        let residual = out_ptr(residual, "residual")?;
        let req = ProjectionRequest::new(target, inputs)
            .with_half_width(half_width)
            .with_ridge(Ridge::Relative(ridge));
        let sol = project(model, &req)?;
        let taps = slice_mut(taps, need, "taps")?;
        for (dst, src) in taps.iter_mut().zip(sol.taps.iter().flatten()) {
            *dst = *src;
        }
        *residual = sol.residual_variance;
        Ok(())
    })
}

/// Identifies the sparse topology of every node.
///
/// # Safety
/// `cov` must be a live covariance handle, `config` readable and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wt_identify(
    cov: *const WtCovariance,
    config: *const WtConfig,
    out: *mut *mut WtTopology,
) -> WtStatus {
    guard(|| {
        let model = &non_null(cov, "cov")?.model;
        let (method, config) = non_null(config, "config")?.to_core();
        let topology = identify_all(model, &default_node_ids(model.n()), &config, method)?;
        give(WtTopology { topology }, out)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_from_json(json: *const c_char, out: *mut *mut WtTopology) -> WtStatus {
    guard(|| {
        let topology = Topology::from_json(read_str(json, "json")?)?;
        give(WtTopology { topology }, out)
    })
}

/// # Safety
/// `topo` must be a live topology handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_to_json(topo: *const WtTopology, out: *mut *mut c_char) -> WtStatus {
    guard(|| give_string(non_null(topo, "topo")?.topology.to_json()?, out))
}

/// # Safety
/// `topo` must be a live topology handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_to_dot(topo: *const WtTopology, out: *mut *mut c_char) -> WtStatus {
    guard(|| give_string(non_null(topo, "topo")?.topology.to_dot(), out))
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `topo` must be null or a live topology handle.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_nodes(topo: *const WtTopology) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { topo.as_ref() }.map_or(0, |t| t.topology.n())
}

/// Edge count, or 0 for a null handle.
///
/// # Safety
/// `topo` must be null or a live topology handle.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_edge_count(topo: *const WtTopology) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { topo.as_ref() }.map_or(0, |t| t.topology.edges().len())
}

/// Edge `k` in `(from, to)` order.
///
/// # Safety
/// `topo` must be a live topology handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_edge(
    topo: *const WtTopology,
    k: usize,
    from: *mut usize,
    to: *mut usize,
    weight: *mut f64,
) -> WtStatus {
    guard(|| {
        let edges = non_null(topo, "topo")?.topology.edges();
        let e = edges.get(k).ok_or_else(|| {
            fail(WtStatus::Config, format!("edge {k} out of range for {} edges", edges.len()))
        })?;
        *out_ptr(from, "from")? = e.from;
        *out_ptr(to, "to")? = e.to;
        *out_ptr(weight, "weight")? = e.weight;
        Ok(())
    })
}

/// Residual variance of node `i`.
///
/// # Safety
/// `topo` must be a live topology handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_residual(topo: *const WtTopology, i: usize, out: *mut f64) -> WtStatus {
    guard(|| {
        let residuals = non_null(topo, "topo")?.topology.residuals();
        let r = residuals.get(i).ok_or_else(|| {
            fail(WtStatus::Config, format!("node {i} out of range for {} nodes", residuals.len()))
        })?;
        *out_ptr(out, "out")? = *r;
        Ok(())
    })
}

/// Copy of `topo` without edges lighter than `delta_rel` times the
/// heaviest edge.
///
/// # Safety
/// `topo` must be a live topology handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_threshold(
    topo: *const WtTopology,
    delta_rel: f64,
    out: *mut *mut WtTopology,
) -> WtStatus {
    guard(|| {
        let topology = threshold_edges(&non_null(topo, "topo")?.topology, delta_rel)?;
        give(WtTopology { topology }, out)
    })
}

/// Scores `estimated` against `truth` by exact directed edge matches.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_compare(
    truth: *const WtTopology,
    estimated: *const WtTopology,
    out: *mut WtComparison,
) -> WtStatus {
    guard(|| {
        let r = compare(&non_null(truth, "truth")?.topology, &non_null(estimated, "estimated")?.topology)?;
        *out_ptr(out, "out")? = WtComparison {
            true_positives: r.true_positives,
            false_positives: r.false_positives,
            false_negatives: r.false_negatives,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        };
        Ok(())
    })
}

/// # Safety
/// `topo` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wt_topology_free(topo: *mut WtTopology) {
    // SAFETY: guaranteed by the caller.
    unsafe { drop_handle(topo) }
}

/// Random acyclic network where each node draws between 0 and
/// `max_in_degree` parents, with FIR filters of the given order.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_network_random(
    n: usize,
    max_in_degree: usize,
    order: usize,
    seed: u64,
    out: *mut *mut WtNetwork,
) -> WtStatus {
    guard(|| {
        let spec = random_spec(n, EdgeRule::MaxInDegree(max_in_degree), order, seed)?;
        give(WtNetwork { spec }, out)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_network_from_json(json: *const c_char, out: *mut *mut WtNetwork) -> WtStatus {
    guard(|| {
        let spec = NetworkSpec::from_json(read_str(json, "json")?)?;
        give(WtNetwork { spec }, out)
    })
}

/// # Safety
/// `net` must be a live network handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_network_to_json(net: *const WtNetwork, out: *mut *mut c_char) -> WtStatus {
    guard(|| give_string(non_null(net, "net")?.spec.to_json()?, out))
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn wt_network_nodes(net: *const WtNetwork) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { net.as_ref() }.map_or(0, |s| s.spec.n())
}

/// Simulates `steps` samples into the row-major `n × steps` buffer `data`
/// (capacity `data_len`). A positive `snr` calibrates node noise to that
/// target; 0 keeps the spec's noise levels. `achieved_snr`, when not null,
/// receives `n` values.
///
/// # Safety
/// `net` must be a live network handle, `data` must hold `data_len`
/// writable doubles and `achieved_snr` must be null or hold `n`.
#[no_mangle]
pub unsafe extern "C" fn wt_network_simulate(
    net: *const WtNetwork,
    steps: usize,
    snr: f64,
    data: *mut f64,
    data_len: usize,
    achieved_snr: *mut f64,
) -> WtStatus {
    guard(|| {
        let spec = &non_null(net, "net")?.spec;
        let need = spec.n() * steps;
        if data_len < need {
            return Err(fail(
                WtStatus::BufferTooSmall,
                format!("data buffer holds {data_len} values, {need} needed"),
            ));
        }
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(fail(WtStatus::Config, format!("snr must be nonnegative, got {snr}")));
        }
        let mut options = SimulationOptions::new(steps);
        if snr > 0.0 {
            options = options.with_snr(snr);
        }
        let sim = simulate(spec, options)?;
        let data = slice_mut(data, need, "data")?;
        for (dst, row) in data.chunks_mut(steps.max(1)).zip(sim.data.rows()) {
            dst.copy_from_slice(row);
        }
        if !achieved_snr.is_null() {
            slice_mut(achieved_snr, spec.n(), "achieved_snr")?.copy_from_slice(&sim.achieved_snr);
        }
        Ok(())
    })
}

/// Ground-truth topology of `net`; edge weights are filter energies.
///
/// # Safety
/// `net` must be a live network handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wt_network_topology(net: *const WtNetwork, out: *mut *mut WtTopology) -> WtStatus {
    guard(|| {
        let spec = &non_null(net, "net")?.spec;
        let topology = Topology::from_spec(spec, default_node_ids(spec.n()))?;
        give(WtTopology { topology }, out)
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wt_network_free(net: *mut WtNetwork) {
    // SAFETY: guaranteed by the caller.
    unsafe { drop_handle(net) }
}
