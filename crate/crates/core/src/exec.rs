//! Execution mode for the data-parallel inner loops.
//!
//! With the `parallel` feature the loops fan out on the rayon pool; without it
//! every mode runs sequentially. The mode is a runtime value so benchmarks can
//! compare both paths inside one build.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether work actually runs on the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..len` and folds the results with `combine`.
    ///
    /// `combine` must be associative; `identity` must be its neutral element.
    pub fn map_reduce<T, F, C>(self, len: usize, identity: T, f: F, combine: C) -> T
    where
        T: Send + Sync + Clone,
        F: Fn(usize) -> T + Sync + Send,
        C: Fn(T, T) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && len >= PARALLEL_MIN_LEN {
            use rayon::prelude::*;
            return (0..len)
                .into_par_iter()
                .with_min_len(PARALLEL_MIN_LEN / 4)
                .map(&f)
                .reduce(|| identity.clone(), &combine);
        }
        (0..len).map(f).fold(identity, combine)
    }

    /// Returns the first index in `0..len` (by position) for which `f` yields
    /// `Some`, together with its value.
    pub fn find_map_first<T, F>(self, len: usize, f: F) -> Option<T>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && len >= 2 {
            use rayon::prelude::*;
            return (0..len).into_par_iter().find_map_first(f);
        }
        (0..len).find_map(f)
    }

    /// Order-preserving map over `0..len` for cheap per-item work.
    pub fn map_collect<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && len >= PARALLEL_MIN_LEN {
            use rayon::prelude::*;
            return (0..len)
                .into_par_iter()
                .with_min_len(PARALLEL_MIN_LEN / 4)
                .map(f)
                .collect();
        }
        (0..len).map(f).collect()
    }

    /// Order-preserving map over `0..len` where every item is expensive.
    pub fn map_each<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && len >= 2 {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }
}

/// Below this many items the thread-pool overhead dominates.
pub const PARALLEL_MIN_LEN: usize = 2048;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        for mode in [Execution::Sequential, Execution::Parallel] {
            let s = mode.map_reduce(10_000, 0u64, |i| i as u64, |a, b| a + b);
            assert_eq!(s, 49_995_000);
            let first = mode.find_map_first(10_000, |i| (i % 777 == 776).then_some(i));
            assert_eq!(first, Some(776));
            let v = mode.map_collect(5, |i| i * i);
            assert_eq!(v, vec![0, 1, 4, 9, 16]);
            assert_eq!(mode.map_each(5, |i| i * i), v);
            assert_eq!(mode.map_collect(5000, |i| i)[4999], 4999);
        }
    }
}
