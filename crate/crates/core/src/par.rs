//! Data-parallel helpers with a sequential fallback. Work is always split
//! over independent items or fixed-size chunks with results written to
//! disjoint, index-addressed slots, so outputs do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Maps items to results, preserving order. Parallel when the `parallel`
/// feature is enabled.
pub fn map_indexed<T, U, F>(items: Vec<T>, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn((usize, T)) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().enumerate().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().enumerate().map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], kept available for benchmarks that
/// compare the two paths within one build.
pub fn map_indexed_seq<T, U, F>(items: Vec<T>, f: F) -> Result<Vec<U>>
where
    F: Fn((usize, T)) -> Result<U>,
{
    items.into_iter().enumerate().map(f).collect()
}

/// Row-chunk size for parallel GEMM; fixed so chunk boundaries (and
/// therefore results) are independent of the thread count.
pub const GEMM_ROW_CHUNK: usize = 128;
