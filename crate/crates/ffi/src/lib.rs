//! C ABI over the `ihrrp` library.
//!
//! Specifications live behind an opaque `IhrrpSpec` handle. Every fallible
//! call returns an `IhrrpStatus`; on failure the message is kept per thread
//! and can be copied out with `ihrrp_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ihrrp::instances::{self, GridOptions};
use ihrrp::optimizer::{optimize, AdamConfig, OptimizeConfig};
use ihrrp::oracle::product_graph_value;
use ihrrp::{eval_schedule, Error, SampleConfig, ServiceSpec};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IhrrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSpec = 3,
    Parse = 4,
    SizeCap = 5,
    NoCycle = 6,
    Mismatch = 7,
    Numeric = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque service specification.
pub struct IhrrpSpec {
    inner: ServiceSpec,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct IhrrpOptimizeOptions {
    pub memory_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub restart: u64,
    pub learning_rate: f64,
    pub determinize_each_step: bool,
    pub samples: usize,
    pub max_cycle: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct IhrrpOptimizeResult {
    pub best_rfm_value: f64,
    /// NaN when no periodic schedule was sampled.
    pub best_periodic_value: f64,
    pub best_step: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IhrrpStatus {
    match e {
        Error::InvalidArgument(_) | Error::NodeOutOfRange(_) | Error::WaitVertex(_) => IhrrpStatus::InvalidArgument,
        Error::InvalidSpec(_) => IhrrpStatus::InvalidSpec,
        Error::Parse { .. } | Error::Json(_) => IhrrpStatus::Parse,
        Error::SizeCap(_) => IhrrpStatus::SizeCap,
        Error::NoCycleFound => IhrrpStatus::NoCycle,
        Error::Mismatch(_) => IhrrpStatus::Mismatch,
        Error::SingularSystem => IhrrpStatus::Numeric,
        Error::Io(_) => IhrrpStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IhrrpStatus, String)>) -> IhrrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IhrrpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the library".into());
            IhrrpStatus::Panic
        }
    }
}

fn lib<T>(r: ihrrp::Result<T>) -> Result<T, (IhrrpStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (IhrrpStatus, String) {
    (IhrrpStatus::NullPointer, format!("{what} is null"))
}

fn spec_ref<'a>(spec: *const IhrrpSpec) -> Result<&'a ServiceSpec, (IhrrpStatus, String)> {
    // SAFETY: non-null handles come from this library and are alive per the API contract.
    unsafe { spec.as_ref() }.map(|s| &s.inner).ok_or_else(|| null("spec"))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (IhrrpStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { out.write(value) };
    Ok(())
}

fn boxed(out: *mut *mut IhrrpSpec, spec: ServiceSpec) -> Result<(), (IhrrpStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    let handle = Box::into_raw(Box::new(IhrrpSpec { inner: spec }));
    // SAFETY: checked non-null.
    unsafe { out.write(handle) };
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (nul
/// terminated, truncated to `len`). Returns the full message length without
/// the terminator, or 0 when there is no message.
#[no_mangle]
pub extern "C" fn ihrrp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller guarantees `buf` holds `len` bytes.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Parses an instance JSON document.
///
/// # Safety
/// `json` must be a valid nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihrrp_spec_from_json(json: *const c_char, out: *mut *mut IhrrpSpec) -> IhrrpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (IhrrpStatus::Parse, format!("instance is not UTF-8: {e}")))?;
        boxed(out, lib(instances::from_json(text))?)
    })
}

/// The two-node example instance.
#[no_mangle]
pub extern "C" fn ihrrp_spec_fig1(out: *mut *mut IhrrpSpec) -> IhrrpStatus {
    guard(|| boxed(out, instances::fig1_instance()))
}

/// Grid instance with `k` long-maintenance nodes.
#[no_mangle]
pub extern "C" fn ihrrp_spec_grid(k: usize, seed: u64, waits: bool, out: *mut *mut IhrrpSpec) -> IhrrpStatus {
    guard(|| boxed(out, lib(instances::generate_grid_instance(k, seed, &GridOptions { waits }))?))
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `spec` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ihrrp_spec_free(spec: *mut IhrrpSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

#[no_mangle]
pub extern "C" fn ihrrp_spec_node_count(spec: *const IhrrpSpec, out: *mut usize) -> IhrrpStatus {
    guard(|| write_out(out, spec_ref(spec)?.node_count()))
}

/// Serializes the instance; free the string with `ihrrp_string_free`.
#[no_mangle]
pub extern "C" fn ihrrp_spec_to_json(spec: *const IhrrpSpec, out: *mut *mut c_char) -> IhrrpStatus {
    guard(|| {
        let text = lib(instances::to_json(spec_ref(spec)?))?;
        let c = CString::new(text).map_err(|e| (IhrrpStatus::Parse, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ihrrp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Value of the periodic schedule `nodes[0], times[0], ..., nodes[moves]`;
/// `nodes` holds `moves + 1` entries and `times` holds `moves`.
///
/// # Safety
/// The arrays must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn ihrrp_eval_schedule(
    spec: *const IhrrpSpec,
    nodes: *const usize,
    times: *const u64,
    moves: usize,
    out: *mut f64,
) -> IhrrpStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        if nodes.is_null() || times.is_null() {
            return Err(null("schedule array"));
        }
        let nodes = std::slice::from_raw_parts(nodes, moves + 1);
        let times = std::slice::from_raw_parts(times, moves);
        write_out(out, lib(eval_schedule(spec, nodes, times, 0, moves))?)
    })
}

#[no_mangle]
pub extern "C" fn ihrrp_optimize_options_default() -> IhrrpOptimizeOptions {
    let d = OptimizeConfig::default();
    IhrrpOptimizeOptions {
        memory_size: d.memory_size,
        steps: d.steps,
        seed: d.seed,
        restart: d.restart,
        learning_rate: d.adam.lr,
        determinize_each_step: d.determinize_each_step,
        samples: d.sample.samples,
        max_cycle: d.sample.max_cycle,
    }
}

/// Runs one optimization restart.
///
/// # Safety
/// `options` must point to a valid options struct.
#[no_mangle]
pub unsafe extern "C" fn ihrrp_optimize(
    spec: *const IhrrpSpec,
    options: *const IhrrpOptimizeOptions,
    out: *mut IhrrpOptimizeResult,
) -> IhrrpStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let cfg = OptimizeConfig {
            memory_size: o.memory_size,
            steps: o.steps,
            seed: o.seed,
            restart: o.restart,
            adam: AdamConfig {
                lr: o.learning_rate,
                ..AdamConfig::default()
            },
            determinize_each_step: o.determinize_each_step,
            sample: SampleConfig {
                samples: o.samples,
                max_cycle: o.max_cycle,
                start: None,
            },
            ..OptimizeConfig::default()
        };
        let trace = lib(optimize(spec, &cfg))?;
        write_out(
            out,
            IhrrpOptimizeResult {
                best_rfm_value: trace.best_value,
                best_periodic_value: trace.best_periodic().unwrap_or(f64::NAN),
                best_step: trace.best_step,
            },
        )
    })
}

/// Optimal periodic value of a tiny instance with waits up to `wait_cap`.
#[no_mangle]
pub extern "C" fn ihrrp_oracle_value(spec: *const IhrrpSpec, wait_cap: u64, out: *mut f64) -> IhrrpStatus {
    guard(|| write_out(out, lib(product_graph_value(spec_ref(spec)?, wait_cap))?.value))
}
