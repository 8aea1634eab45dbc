//! Process-wide opt-in switch for multithreaded sparse kernels.
//!
//! Off by default. When on, sparse products split work by output column on the
//! rayon pool; callers that need bitwise reproducibility across runs should
//! leave it off.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(false);

pub fn set_enabled(on: bool) {
    PARALLEL.store(on, Ordering::Relaxed);
}

pub fn enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}
