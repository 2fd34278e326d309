//! Execution policy for the data-parallel inner loops.
//!
//! Every hot loop in the crate (distance enumeration, amplitude sweeps,
//! predicate masks, attack trials, code search) goes through the helpers in
//! this module. With the `parallel` feature they run on the rayon pool; without
//! it, or with [`Exec::Sequential`], they run on the calling thread. Results
//! are identical either way: reductions are order-independent or merged in
//! index order.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chooses between the sequential and the rayon-backed path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential execution when built without `parallel`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `range`, preserving index order in the output.
    pub fn map_range<T, F>(self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }

    /// Returns the smallest index in `range` for which `f` yields `Some`.
    pub fn find_first<T, F>(self, range: Range<usize>, f: F) -> Option<(usize, T)>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return range
                .into_par_iter()
                .map(|i| f(i).map(|t| (i, t)))
                .find_first(|r| r.is_some())
                .flatten();
        }
        range.into_iter().find_map(|i| f(i).map(|t| (i, t)))
    }

    /// Minimum of `f` over `range`, or `None` for an empty range.
    pub fn min_over<F>(self, range: Range<usize>, f: F) -> Option<u32>
    where
        F: Fn(usize) -> u32 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return range.into_par_iter().map(f).min();
        }
        range.map(f).min()
    }

    /// Applies `f(chunk_index, chunk)` to consecutive chunks of `data`.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Applies `f` to matching chunks of two equally long slices.
    pub fn for_each_zip_chunk_mut<T, F>(self, a: &mut [T], b: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(&mut [T], &mut [T]) + Sync + Send,
    {
        assert_eq!(a.len(), b.len());
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            a.par_chunks_mut(chunk)
                .zip(b.par_chunks_mut(chunk))
                .for_each(|(x, y)| f(x, y));
            return;
        }
        a.chunks_mut(chunk)
            .zip(b.chunks_mut(chunk))
            .for_each(|(x, y)| f(x, y));
    }

    /// Sum of `f` over `range` in f64.
    pub fn sum_f64<F>(self, range: Range<usize>, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        // Fixed-size blocks summed in order keep the result independent of
        // the thread count.
        const BLOCK: usize = 1024;
        let start = range.start;
        let len = range.len();
        let blocks = len.div_ceil(BLOCK);
        let partial = self.map_range(0..blocks, |b| {
            let lo = start + b * BLOCK;
            let hi = (lo + BLOCK).min(start + len);
            (lo..hi).map(&f).sum::<f64>()
        });
        partial.into_iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(exec.map_range(0..5, |i| i * i), vec![0, 1, 4, 9, 16]);
            assert_eq!(
                exec.find_first(0..1000, |i| (i % 97 == 96).then_some(i)),
                Some((96, 96))
            );
            assert_eq!(exec.find_first(0..10, |_| None::<u8>), None);
            assert_eq!(exec.min_over(3..9, |i| (i as u32) * 2), Some(6));
            assert_eq!(exec.min_over(0..0, |_| 0), None);
            let mut v = vec![0usize; 10];
            exec.for_each_chunk_mut(&mut v, 3, |ci, c| c.iter_mut().for_each(|x| *x = ci));
            assert_eq!(v, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3]);
        }
        let a = Exec::Sequential.sum_f64(0..5000, |i| (i as f64).sqrt());
        let b = Exec::Parallel.sum_f64(0..5000, |i| (i as f64).sqrt());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
