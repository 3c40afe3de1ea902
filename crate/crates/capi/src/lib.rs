//! C ABI for the qrck simulator: opaque handles, integer error codes, and a
//! thread-local last-error message. The header `include/qrck.h` is generated
//! by cbindgen at build time.
//!
//! Conventions:
//! - Every fallible call returns a `QrckStatus` code; 0 is success.
//! - Out-parameters are written only on success.
//! - Handles own their data and must be released with the matching
//!   `*_free` function; `*_free` accepts NULL.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::path::PathBuf;

use qrck::experiment::{run_and_emit, ExperimentConfig};
use qrck::training::TrainedReadout;

/// Status codes mirroring the library's error classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrckStatus {
    /// Success.
    Ok = 0,
    /// A NULL pointer or invalid argument was passed.
    NullArgument = 1,
    /// Configuration or input text failed to parse/validate.
    InvalidConfig = 2,
    /// An I/O operation failed.
    IoError = 3,
    /// A data file had the wrong format.
    DataFormat = 4,
    /// A numerical routine failed (non-Hermitian input, singular solve, ...).
    NumericalError = 5,
    /// A string did not fit in the caller-provided buffer.
    BufferTooSmall = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed");
    });
}

fn status_of(err: &qrck::Error) -> QrckStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        2 => QrckStatus::InvalidConfig,
        3 => QrckStatus::IoError,
        4 => QrckStatus::DataFormat,
        _ => QrckStatus::NumericalError,
    }
}

/// Opaque experiment-configuration handle.
pub struct QrckConfig {
    inner: ExperimentConfig,
}

/// Opaque trained-readout handle.
pub struct QrckReadout {
    inner: TrainedReadout,
}

/// Copy of the thread-local message describing the most recent error.
/// Returns the number of bytes the full message needs (including the
/// terminating NUL); writes at most `len` bytes.
#[no_mangle]
pub extern "C" fn qrck_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                // Always NUL-terminate what we wrote.
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qrck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, QrckStatus> {
    if ptr.is_null() {
        set_error("NULL string argument");
        return Err(QrckStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        QrckStatus::InvalidConfig
    })
}

fn write_string(text: &str, buf: *mut c_char, len: usize) -> QrckStatus {
    let c = match CString::new(text) {
        Ok(c) => c,
        Err(_) => {
            set_error("output contains interior NUL");
            return QrckStatus::NumericalError;
        }
    };
    let bytes = c.as_bytes_with_nul();
    if buf.is_null() || len < bytes.len() {
        set_error(&format!("buffer of {len} bytes, need {}", bytes.len()));
        return QrckStatus::BufferTooSmall;
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
    }
    QrckStatus::Ok
}

/// Parse an experiment configuration from NUL-terminated text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_parse(
    text: *const c_char,
    out: *mut *mut QrckConfig,
) -> QrckStatus {
    if out.is_null() {
        set_error("NULL output pointer");
        return QrckStatus::NullArgument;
    }
    let text = match str_arg(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match ExperimentConfig::from_str(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(QrckConfig { inner }));
            QrckStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Load an experiment configuration from a file path.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_load(
    path: *const c_char,
    out: *mut *mut QrckConfig,
) -> QrckStatus {
    if out.is_null() {
        set_error("NULL output pointer");
        return QrckStatus::NullArgument;
    }
    let path = match str_arg(path) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match ExperimentConfig::load(std::path::Path::new(path)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(QrckConfig { inner }));
            QrckStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Release a configuration handle (NULL is a no-op).
///
/// # Safety
/// `config` must come from `qrck_config_parse`/`qrck_config_load` and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_free(config: *mut QrckConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Write the fully resolved configuration (defaults included) into `buf`.
///
/// # Safety
/// `config` must be a live handle; `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_echo(
    config: *const QrckConfig,
    buf: *mut c_char,
    len: usize,
) -> QrckStatus {
    let Some(config) = config.as_ref() else {
        set_error("NULL config handle");
        return QrckStatus::NullArgument;
    };
    write_string(&config.inner.echo(), buf, len)
}

/// Override the configured output directory.
///
/// # Safety
/// `config` must be a live handle; `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_set_output_dir(
    config: *mut QrckConfig,
    dir: *const c_char,
) -> QrckStatus {
    let Some(config) = config.as_mut() else {
        set_error("NULL config handle");
        return QrckStatus::NullArgument;
    };
    let dir = match str_arg(dir) {
        Ok(d) => d,
        Err(s) => return s,
    };
    config.inner.output_dir = PathBuf::from(dir);
    QrckStatus::Ok
}

/// Add an offset to the configured base seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrck_config_seed_offset(
    config: *mut QrckConfig,
    offset: u64,
) -> QrckStatus {
    let Some(config) = config.as_mut() else {
        set_error("NULL config handle");
        return QrckStatus::NullArgument;
    };
    config.inner.seed += offset;
    QrckStatus::Ok
}

/// Run the configured experiment and write the result table and manifest to
/// the configured output directory.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrck_run(config: *const QrckConfig) -> QrckStatus {
    let Some(config) = config.as_ref() else {
        set_error("NULL config handle");
        return QrckStatus::NullArgument;
    };
    match run_and_emit(&config.inner) {
        Ok(_) => QrckStatus::Ok,
        Err(e) => status_of(&e),
    }
}

/// Generate a Lorenz-63 series into a caller-provided buffer of
/// `n_samples * 3` doubles (row-major x, y, z per sample).
///
/// # Safety
/// `x0` must point to 3 doubles and `out` to `n_samples * 3` doubles.
#[no_mangle]
pub unsafe extern "C" fn qrck_gen_lorenz(
    x0: *const c_double,
    n_samples: usize,
    dt_sample: c_double,
    seed: u64,
    out: *mut c_double,
) -> QrckStatus {
    if x0.is_null() || out.is_null() {
        set_error("NULL buffer argument");
        return QrckStatus::NullArgument;
    }
    if dt_sample <= 0.0 {
        set_error("dt_sample must be positive");
        return QrckStatus::InvalidConfig;
    }
    let x0 = [*x0, *x0.add(1), *x0.add(2)];
    let ds = qrck::tasks::gen_lorenz(x0, n_samples, dt_sample, seed);
    std::ptr::copy_nonoverlapping(ds.samples.data().as_ptr(), out, n_samples * 3);
    QrckStatus::Ok
}

/// Load a trained readout from a file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrck_readout_load(
    path: *const c_char,
    out: *mut *mut QrckReadout,
) -> QrckStatus {
    if out.is_null() {
        set_error("NULL output pointer");
        return QrckStatus::NullArgument;
    }
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match TrainedReadout::load(std::path::Path::new(path)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(QrckReadout { inner }));
            QrckStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Number of qubits the readout was trained on.
///
/// # Safety
/// `readout` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrck_readout_n_qubits(
    readout: *const QrckReadout,
    out: *mut usize,
) -> QrckStatus {
    let Some(readout) = readout.as_ref() else {
        set_error("NULL readout handle");
        return QrckStatus::NullArgument;
    };
    if out.is_null() {
        set_error("NULL output pointer");
        return QrckStatus::NullArgument;
    }
    *out = readout.inner.n_qubits;
    QrckStatus::Ok
}

/// Release a readout handle (NULL is a no-op).
///
/// # Safety
/// `readout` must come from `qrck_readout_load` and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrck_readout_free(readout: *mut QrckReadout) {
    if !readout.is_null() {
        drop(Box::from_raw(readout));
    }
}
