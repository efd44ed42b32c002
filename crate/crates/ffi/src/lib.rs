//! C ABI over `duplex-sim`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns a [`DsStatus`] and, on
//! failure, records a message readable through [`ds_last_error`] on the
//! same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use duplex_sim::config::parse_config;
use duplex_sim::frames::Scheme;
use duplex_sim::harness::report::write_rates_csv;
use duplex_sim::harness::{run_scheme, Depth, Metric, RateReport};
use duplex_sim::{load_config, Error, RunSpec, SystemConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Config = 5,
    Simulation = 6,
    NotAvailable = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsDepth {
    ClosedForm = 0,
    Predictors = 1,
    Full = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsMetric {
    RateMonteCarlo = 0,
    RateClosed = 1,
}

/// System parameters plus trial count and seed.
pub struct DsConfig {
    system: SystemConfig,
    run: RunSpec,
}

/// Result of one scheme at one velocity.
pub struct DsReport {
    inner: RateReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DsStatus {
    match e {
        Error::Io(_) => DsStatus::Io,
        Error::Config(_) => DsStatus::Config,
        Error::InvalidParameter { .. } | Error::UnknownScheme(_) | Error::UnknownDirection(_) => {
            DsStatus::InvalidArgument
        }
        _ => DsStatus::Simulation,
    }
}

/// Run `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DsStatus, String)>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            DsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DsStatus, String) {
    (DsStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DsStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn config_ref<'a>(cfg: *const DsConfig) -> Result<&'a DsConfig, (DsStatus, String)> {
    cfg.as_ref().ok_or_else(|| null("config"))
}

unsafe fn report_ref<'a>(r: *const DsReport) -> Result<&'a DsReport, (DsStatus, String)> {
    r.as_ref().ok_or_else(|| null("report"))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (DsStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration. Never NULL.
#[no_mangle]
pub extern "C" fn ds_config_default() -> *mut DsConfig {
    Box::into_raw(Box::new(DsConfig {
        system: SystemConfig::default(),
        run: RunSpec::default(),
    }))
}

/// Load a TOML configuration file.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_config_load(path: *const c_char, out: *mut *mut DsConfig) -> DsStatus {
    guard(|| {
        let path = PathBuf::from(read_str(path, "path")?);
        let (system, run) = load_config(path).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(DsConfig { system, run })))
    })
}

/// Parse a TOML configuration from text.
///
/// # Safety
/// `text` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_config_parse(text: *const c_char, out: *mut *mut DsConfig) -> DsStatus {
    guard(|| {
        let (system, run) = parse_config(read_str(text, "text")?).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(DsConfig { system, run })))
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_config_free(cfg: *mut DsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_config_set_trials(cfg: *mut DsConfig, trials: usize) -> DsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        if trials == 0 {
            return Err((DsStatus::InvalidArgument, "trials must be at least 1".into()));
        }
        cfg.run.trials = trials;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_config_set_seed(cfg: *mut DsConfig, seed: u64) -> DsStatus {
    guard(|| {
        cfg.as_mut().ok_or_else(|| null("config"))?.run.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_config_set_frame_length(cfg: *mut DsConfig, frame_length: usize) -> DsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        let mut next = cfg.system.clone();
        next.frame_length = frame_length;
        next.validate().map_err(lib_err)?;
        cfg.system = next;
        Ok(())
    })
}

/// Simulate `scheme` (e.g. `"MDD-1(7)"`) at `velocity_kmh` with the
/// configuration's trial count and seed.
///
/// # Safety
/// `cfg` must be NULL or a live handle, `scheme` NULL or NUL-terminated,
/// `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_run(
    cfg: *const DsConfig,
    scheme: *const c_char,
    velocity_kmh: f64,
    depth: DsDepth,
    out: *mut *mut DsReport,
) -> DsStatus {
    guard(|| {
        let cfg = config_ref(cfg)?;
        let scheme: Scheme = read_str(scheme, "scheme")?.parse().map_err(lib_err)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let depth = match depth {
            DsDepth::ClosedForm => Depth::ClosedForm,
            DsDepth::Predictors => Depth::Predictors,
            DsDepth::Full => Depth::Full,
        };
        let inner =
            run_scheme(&cfg.system, scheme, velocity_kmh, cfg.run.trials, cfg.run.seed, depth).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(DsReport { inner })))
    })
}

/// # Safety
/// `report` must be NULL or a handle from [`ds_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_report_free(report: *mut DsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of symbols in the report's frame.
///
/// # Safety
/// `report` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_report_frame_length(report: *const DsReport, out: *mut usize) -> DsStatus {
    guard(|| write_out(out, report_ref(report)?.inner.frame_length))
}

fn metric_of(m: DsMetric) -> Metric {
    match m {
        DsMetric::RateMonteCarlo => Metric::RateMc,
        DsMetric::RateClosed => Metric::RateClosed,
    }
}

/// Frame-average rate in bit/s/Hz per subcarrier.
/// `DS_STATUS_NOT_AVAILABLE` when the metric was not computed.
///
/// # Safety
/// `report` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_report_frame_average(report: *const DsReport, metric: DsMetric, out: *mut f64) -> DsStatus {
    guard(|| {
        let v = report_ref(report)?.inner.frame_average(metric_of(metric)).ok_or((
            DsStatus::NotAvailable,
            "metric not computed for this report".to_string(),
        ))?;
        write_out(out, v)
    })
}

/// Sum-rate over users and both directions at 1-based `symbol`.
///
/// # Safety
/// `report` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_report_symbol_rate(
    report: *const DsReport,
    symbol: usize,
    metric: DsMetric,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let v = report_ref(report)?
            .inner
            .symbol_rate(symbol, metric_of(metric))
            .ok_or((DsStatus::NotAvailable, format!("no rate at symbol {symbol}")))?;
        write_out(out, v)
    })
}

/// Pooled prediction NMSE at 1-based `symbol`.
///
/// # Safety
/// `report` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_report_nmse(report: *const DsReport, symbol: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        let v = report_ref(report)?
            .inner
            .nmse(symbol)
            .ok_or((DsStatus::NotAvailable, format!("no NMSE at symbol {symbol}")))?;
        write_out(out, v)
    })
}

/// Write the report's per-symbol rows as CSV.
///
/// # Safety
/// `report` must be NULL or a live handle; `path` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ds_report_write_csv(report: *const DsReport, path: *const c_char) -> DsStatus {
    guard(|| {
        let report = report_ref(report)?;
        let path = read_str(path, "path")?;
        let file = File::create(path).map_err(|e| lib_err(e.into()))?;
        write_rates_csv(std::slice::from_ref(&report.inner), BufWriter::new(file)).map_err(lib_err)
    })
}

/// AR(1) coefficient `J0(2π f_D T_s)` for the given mobility.
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_fading_alpha(
    carrier_frequency_hz: f64,
    symbol_duration_s: f64,
    velocity_kmh: f64,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let p = duplex_sim::channel::FadingParams::from_kmh(carrier_frequency_hz, symbol_duration_s, velocity_kmh)
            .map_err(lib_err)?;
        write_out(out, p.alpha())
    })
}
