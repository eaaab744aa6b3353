//! Order-preserving map over replicate indices, parallel when `std` is on.

use alloc::vec::Vec;

use crate::error::Result;

pub(crate) fn map_indices<T, F>(count: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "std")]
    if parallel && count > 1 {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..count).map(f).collect()
}

#[cfg(feature = "std")]
pub(crate) struct Timer(std::time::Instant);

#[cfg(feature = "std")]
impl Timer {
    pub(crate) fn start() -> Self {
        Timer(std::time::Instant::now())
    }
    pub(crate) fn elapsed(&self) -> core::time::Duration {
        self.0.elapsed()
    }
}

#[cfg(not(feature = "std"))]
pub(crate) struct Timer;

#[cfg(not(feature = "std"))]
impl Timer {
    pub(crate) fn start() -> Self {
        Timer
    }
    pub(crate) fn elapsed(&self) -> core::time::Duration {
        core::time::Duration::ZERO
    }
}
