//! Data-parallel execution of independent Monte Carlo draws.
//!
//! With the `parallel` feature (default) draws are spread over a rayon pool;
//! without it everything runs on the calling thread. Results always come back
//! in draw order, so reductions are bit-identical for any worker count.

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;
use crate::stats::Accumulator;

/// Draws handed to the pool per batch. Bounds memory for large `n_outer`.
const BATCH: usize = 4096;

#[derive(Clone)]
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<std::sync::Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Executor with `workers` threads. `0` means one per available core.
    /// Falls back to sequential when the `parallel` feature is off.
    pub fn with_workers(workers: usize) -> Result<Self> {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            workers
        };
        if workers == 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(Self {
                workers,
                pool: Some(std::sync::Arc::new(pool)),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(Self { workers: 1 })
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// `[f(0), f(1), ..., f(n-1)]`, computed in parallel when possible.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Runs `draw(i)` for `i in 0..n` and folds each returned vector of
    /// per-draw terms into one accumulator per term, in draw order.
    ///
    /// The first error in draw order is returned.
    pub fn accumulate<F>(&self, n: usize, terms: usize, draw: F) -> Result<Vec<Accumulator>>
    where
        F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
    {
        let mut accs = vec![Accumulator::new(); terms];
        let mut start = 0;
        while start < n {
            let len = BATCH.min(n - start);
            let batch = self.map(len, |k| draw(start + k));
            for values in batch {
                let values = values?;
                debug_assert_eq!(values.len(), terms);
                for (acc, v) in accs.iter_mut().zip(values) {
                    acc.push(v);
                }
            }
            start += len;
        }
        Ok(accs)
    }
}
