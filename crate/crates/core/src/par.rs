//! Trial-level execution: rayon data parallelism when the `parallel` feature
//! is on, a plain loop otherwise. Results always come back in index order.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `threads = None` uses rayon's global pool.
    Parallel { threads: Option<usize> },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { threads: None }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `--threads 1` means sequential; anything else asks for a pool.
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Execution::Sequential,
            Some(0) | None => Execution::default(),
            Some(n) => Execution::Parallel { threads: Some(n) },
        }
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => Ok((0..n).map(f).collect()),
            Execution::Parallel { threads } => parallel_map(threads, n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match threads {
        None => Ok((0..n).into_par_iter().map(f).collect()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| crate::Error::Config(format!("cannot start {t} worker threads: {e}")))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok((0..n).map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for exec in [Execution::Sequential, Execution::Parallel { threads: Some(3) }, Execution::default()] {
            assert_eq!(exec.map(100, |i| i * i).unwrap(), (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
