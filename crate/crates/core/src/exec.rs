//! Order-preserving data-parallel map with a sequential fallback.

/// How batch work is scheduled.
///
/// `Parallel` runs on rayon when the `parallel` feature is compiled in and
/// falls back to sequential iteration otherwise, so callers never need to
/// branch on the feature themselves. Results always come back in input order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `workers: None` uses the global pool.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: None }
    }
}

impl Execution {
    pub fn parallel() -> Self {
        Execution::default()
    }

    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel {
                workers: Some(workers),
            }
        }
    }

    /// True when work will actually be spread over threads.
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Execution::Parallel { .. })
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel { workers } => par_map(items, *workers, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    match workers {
        None => items.par_iter().map(f).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(err) => {
                log::warn!("falling back to sequential execution: {err}");
                items.iter().map(f).collect()
            }
        },
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], _workers: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
