//! Data-parallel execution with a sequential fallback.
//!
//! Work items are grouped into fixed-size blocks. Each block is folded
//! sequentially in index order and block results are merged in block order,
//! so floating-point aggregates are bit-identical for any worker count.

use std::sync::Arc;

use crate::error::Result;

/// Items per block. Fixed so that merge order never depends on threading.
pub const BLOCK: usize = 512;

/// Associative merge of sufficient statistics.
pub trait Merge: Send {
    fn merge(&mut self, other: Self);
}

impl<T: Send> Merge for Vec<T> {
    fn merge(&mut self, other: Self) {
        self.extend(other);
    }
}

#[derive(Clone, Default)]
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
    #[cfg(feature = "parallel")]
    parallel: bool,
    #[cfg(not(feature = "parallel"))]
    _p: std::marker::PhantomData<Arc<()>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Executor(workers={})", self.workers())
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Executor::default()
    }

    /// Parallel executor with `workers` threads, or the global pool when `None`.
    /// Without the `parallel` feature this is the sequential executor.
    #[cfg(feature = "parallel")]
    pub fn parallel(workers: Option<usize>) -> Self {
        let pool = workers.map(|n| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .expect("thread pool construction"),
            )
        });
        Executor { pool, parallel: true }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn parallel(_workers: Option<usize>) -> Self {
        Executor::default()
    }

    pub fn workers(&self) -> usize {
        #[cfg(feature = "parallel")]
        {
            if !self.parallel {
                return 1;
            }
            match &self.pool {
                Some(p) => p.current_num_threads(),
                None => rayon::current_num_threads(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            1
        }
    }

    /// Folds `item` over `0..n` with `init` per block and merges block results
    /// in order.
    pub fn fold<S, I, F>(&self, n: usize, init: I, item: F) -> Result<S>
    where
        S: Merge,
        I: Fn() -> S + Sync,
        F: Fn(usize, &mut S) -> Result<()> + Sync,
    {
        let n_blocks = n.div_ceil(BLOCK);
        let run_block = |b: usize| -> Result<S> {
            let mut acc = init();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                item(i, &mut acc)?;
            }
            Ok(acc)
        };
        let blocks: Vec<Result<S>> = self.map_blocks(n_blocks, &run_block);
        let mut total = init();
        for b in blocks {
            total.merge(b?);
        }
        Ok(total)
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        self.fold(n, Vec::new, |i, acc: &mut Vec<T>| {
            acc.push(f(i)?);
            Ok(())
        })
    }

    #[cfg(feature = "parallel")]
    fn map_blocks<S: Send>(&self, n_blocks: usize, f: &(dyn Fn(usize) -> S + Sync)) -> Vec<S> {
        use rayon::prelude::*;
        if !self.parallel {
            return (0..n_blocks).map(f).collect();
        }
        let go = || (0..n_blocks).into_par_iter().map(f).collect();
        match &self.pool {
            Some(p) => p.install(go),
            None => go(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn map_blocks<S: Send>(&self, n_blocks: usize, f: &(dyn Fn(usize) -> S + Sync)) -> Vec<S> {
        (0..n_blocks).map(f).collect()
    }
}
