//! Sequential/parallel execution helpers with schedule-independent results.
//!
//! Work is cut into blocks of [`BLOCK`] items whose boundaries depend only on
//! the problem size. Each block produces a partial result and partials are
//! combined in block order, so thread count never affects the output.

use alloc::vec::Vec;

pub(crate) const BLOCK: usize = 4096;

/// Maps each block `[start, end)` of `0..len` to a partial result, in block order.
pub(crate) fn map_blocks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let nblocks = len.div_ceil(BLOCK);
    let run = |b: usize| {
        let start = b * BLOCK;
        f(start, (start + BLOCK).min(len))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..nblocks).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..nblocks).map(run).collect()
    }
}

/// Runs `f(item_index, chunk)` over consecutive chunks of `stride` elements.
pub(crate) fn for_each_row<T, F>(data: &mut [T], stride: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if stride == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(stride)
            .enumerate()
            .with_min_len(64)
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(stride).enumerate().for_each(|(i, row)| f(i, row));
    }
}
