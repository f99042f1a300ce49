use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use walkclip::Error;

/// Result code of every fallible call. On anything but `WC_STATUS_OK` the
/// message is available from `wc_last_error_message` on the same thread.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Dimension = 5,
    Degenerate = 6,
    ZeroNorm = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

pub(crate) fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

pub(crate) fn status_of(err: &Error) -> WcStatus {
    match err {
        Error::Io { .. } => WcStatus::Io,
        Error::Parse { .. } | Error::Record { .. } | Error::Group { .. } => WcStatus::Parse,
        Error::Dimension(_) => WcStatus::Dimension,
        Error::Config(_) => WcStatus::InvalidArgument,
        Error::ZeroNorm(_) => WcStatus::ZeroNorm,
        Error::Degenerate(_) => WcStatus::Degenerate,
    }
}

/// Failure inside an FFI body, carrying its status and message.
pub(crate) struct Fail(pub WcStatus, pub String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

pub(crate) fn fail<T>(status: WcStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, translating errors and panics into a status code.
pub(crate) fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WcStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            WcStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn wc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}
