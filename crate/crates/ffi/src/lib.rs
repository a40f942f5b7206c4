//! C ABI over `peer-contracts`.
//!
//! Networks are opaque handles created by `pc_network_*` and released with
//! `pc_network_free`. Every fallible call returns a `PcStatus`; on failure
//! `pc_last_error_message` describes the most recent error on the calling
//! thread. Output pointers may be null, in which case that output is skipped.
//! Vector outputs must have room for `pc_network_size` entries.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use peer_contracts::analysis::spectral_profit;
use peer_contracts::coarse::{optimal_coarse, Partition};
use peer_contracts::contracts::{first_best, optimal_granular};
use peer_contracts::modular::{optimal_modular, ModuleAssignment};
use peer_contracts::nalgebra::{DMatrix, DVector};
use peer_contracts::{Direction, Error, ModelParams, Network};

/// Opaque network handle.
pub struct PcNetwork {
    inner: Network,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    InvalidInput = 1,
    InvalidRegime = 2,
    NonDiagonalizable = 3,
    IndefiniteObjective = 4,
    NonConcave = 5,
    Parse = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Model parameters. `v` is the effort-cost scale; the solvers exposed here
/// require `v = 1`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcParams {
    pub lambda: f64,
    pub r: f64,
    pub sigma2: f64,
    pub v: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PcStatus {
    match err {
        Error::InvalidInput(_) => PcStatus::InvalidInput,
        Error::InvalidRegime { .. } => PcStatus::InvalidRegime,
        Error::NonDiagonalizable { .. } => PcStatus::NonDiagonalizable,
        Error::IndefiniteObjective(_) => PcStatus::IndefiniteObjective,
        Error::NonConcave(_) => PcStatus::NonConcave,
        Error::Parse { .. } => PcStatus::Parse,
        Error::Io(_) => PcStatus::Io,
    }
}

enum Failure {
    Model(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard<F>(body: F) -> PcStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(Failure::Model(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            PcStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PcStatus::Panic
        }
    }
}

unsafe fn network_ref<'a>(net: *const PcNetwork) -> Result<&'a Network, Failure> {
    net.as_ref().map(|h| &h.inner).ok_or(Failure::Null("network"))
}

fn model_params(p: &PcParams) -> Result<ModelParams, Failure> {
    Ok(ModelParams::new(p.lambda, p.r, p.sigma2)?.with_v(p.v)?)
}

unsafe fn params_ref(p: *const PcParams) -> Result<ModelParams, Failure> {
    model_params(p.as_ref().ok_or(Failure::Null("params"))?)
}

unsafe fn write_vec(dst: *mut f64, v: &DVector<f64>) {
    if !dst.is_null() {
        std::ptr::copy_nonoverlapping(v.as_ptr(), dst, v.len());
    }
}

unsafe fn write_scalar(dst: *mut f64, x: f64) {
    if !dst.is_null() {
        *dst = x;
    }
}

unsafe fn read_ids(ids: *const usize, n: usize) -> Result<Vec<usize>, Failure> {
    if ids.is_null() {
        return Err(Failure::Null("group ids"));
    }
    Ok(std::slice::from_raw_parts(ids, n).to_vec())
}

unsafe fn store(out: *mut *mut PcNetwork, net: Network) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(PcNetwork { inner: net }));
    Ok(())
}

/// Builds a network from a row-major `n x n` adjacency matrix. Entry
/// `(i, j)` is how much worker `j`'s effort lowers worker `i`'s cost.
///
/// # Safety
/// `adjacency` must point to `n * n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pc_network_from_adjacency(
    n: usize,
    adjacency: *const f64,
    directed: c_int,
    out: *mut *mut PcNetwork,
) -> PcStatus {
    guard(|| {
        if adjacency.is_null() {
            return Err(Failure::Null("adjacency"));
        }
        let values = std::slice::from_raw_parts(adjacency, n * n);
        let g = DMatrix::from_row_slice(n, n, values);
        store(out, Network::new(g, directed != 0)?)
    })
}

/// Samples a symmetric Erdos-Renyi network.
///
/// # Safety
/// `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pc_network_erdos_renyi(n: usize, p: f64, seed: u64, out: *mut *mut PcNetwork) -> PcStatus {
    guard(|| store(out, Network::erdos_renyi(n, p, seed)?))
}

/// Reads an edge-list file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_network_read_edge_list(path: *const c_char, out: *mut *mut PcNetwork) -> PcStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Error::InvalidInput(format!("path is not UTF-8: {e}")))?;
        store(out, Network::read_edge_list(Path::new(path))?)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `net` must come from a `pc_network_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_network_free(net: *mut PcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of workers, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_network_size(net: *const PcNetwork) -> usize {
    net.as_ref().map_or(0, |h| h.inner.size())
}

/// # Safety
/// `net` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pc_spectral_radius(net: *const PcNetwork, out: *mut f64) -> PcStatus {
    guard(|| {
        let net = network_ref(net)?;
        write_scalar(out, net.spectral_radius());
        Ok(())
    })
}

/// Bonacich centralities: `C1` when `outgoing` is 0, `C'1` otherwise.
///
/// # Safety
/// `net` must be a live handle; `out` null or room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_bonacich(net: *const PcNetwork, lambda: f64, outgoing: c_int, out: *mut f64) -> PcStatus {
    guard(|| {
        let net = network_ref(net)?;
        let direction = if outgoing != 0 { Direction::Outgoing } else { Direction::Incoming };
        write_vec(out, &net.bonacich(lambda, direction)?);
        Ok(())
    })
}

/// First-best contract and efforts.
///
/// # Safety
/// Vector outputs must be null or hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_first_best(
    net: *const PcNetwork,
    params: *const PcParams,
    alpha: *mut f64,
    beta: *mut f64,
    efforts: *mut f64,
    profit: *mut f64,
) -> PcStatus {
    guard(|| {
        let sol = first_best(network_ref(net)?, &params_ref(params)?)?;
        write_vec(alpha, &sol.contract.alpha);
        write_vec(beta, &sol.contract.beta);
        write_vec(efforts, &sol.efforts);
        write_scalar(profit, sol.expected_profit);
        Ok(())
    })
}

/// Optimal per-worker contract.
///
/// # Safety
/// Vector outputs must be null or hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_granular(
    net: *const PcNetwork,
    params: *const PcParams,
    alpha: *mut f64,
    beta: *mut f64,
    efforts: *mut f64,
    profit: *mut f64,
) -> PcStatus {
    guard(|| {
        let sol = optimal_granular(network_ref(net)?, &params_ref(params)?)?;
        write_vec(alpha, &sol.contract.alpha);
        write_vec(beta, &sol.contract.beta);
        write_vec(efforts, &sol.efforts);
        write_scalar(profit, sol.expected_profit);
        Ok(())
    })
}

/// Optimal group-level contract. `groups[i]` is worker `i`'s group id; ids
/// must cover `0..k` without gaps.
///
/// # Safety
/// `groups` must hold `n` entries; vector outputs null or `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_coarse(
    net: *const PcNetwork,
    params: *const PcParams,
    groups: *const usize,
    alpha: *mut f64,
    beta: *mut f64,
    rents: *mut f64,
    profit: *mut f64,
) -> PcStatus {
    guard(|| {
        let net = network_ref(net)?;
        let partition = Partition::new(read_ids(groups, net.size())?)?;
        let sol = optimal_coarse(net, &params_ref(params)?, &partition)?;
        write_vec(alpha, &sol.contract.alpha);
        write_vec(beta, &sol.contract.beta);
        write_vec(rents, &sol.rents);
        write_scalar(profit, sol.expected_profit);
        Ok(())
    })
}

/// Optimal contract when output is the minimum over modules.
///
/// # Safety
/// `modules` must hold `n` entries; vector outputs null or `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_modular(
    net: *const PcNetwork,
    params: *const PcParams,
    modules: *const usize,
    alpha: *mut f64,
    beta: *mut f64,
    efforts: *mut f64,
    profit: *mut f64,
) -> PcStatus {
    guard(|| {
        let net = network_ref(net)?;
        let modules = ModuleAssignment::new(read_ids(modules, net.size())?)?;
        let sol = optimal_modular(net, &params_ref(params)?, &modules)?;
        write_vec(alpha, &sol.contract.alpha);
        write_vec(beta, &sol.contract.beta);
        write_vec(efforts, &sol.efforts);
        write_scalar(profit, sol.expected_profit);
        Ok(())
    })
}

/// Optimal profit from the network spectrum, with the direct solver value.
///
/// # Safety
/// `net` and `params` must be live; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn pc_spectral_profit(
    net: *const PcNetwork,
    params: *const PcParams,
    spectral: *mut f64,
    direct: *mut f64,
) -> PcStatus {
    guard(|| {
        let rep = spectral_profit(network_ref(net)?, &params_ref(params)?)?;
        write_scalar(spectral, rep.total);
        write_scalar(direct, rep.direct_total);
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let k = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, k);
                *buf.add(k - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
