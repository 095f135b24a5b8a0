//! Sequential / data-parallel execution switch.
//!
//! Every parallel map in the crate goes through [`Execution::map_range`]. Each
//! item is computed independently and the results are collected in index
//! order, so reductions done afterwards are bit-identical between modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` only when the `parallel` feature is compiled in.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    /// `(0..n).map(f).collect()`, possibly across threads; order is preserved.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self.effective() {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel => par_map_range(n, f),
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }
}

#[cfg(feature = "parallel")]
fn par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Run `f` on a pool with the given number of worker threads (`None`: rayon's
/// default). Without the `parallel` feature this just calls `f`.
pub fn with_threads<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, String> {
    #[cfg(feature = "parallel")]
    {
        match threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| e.to_string())?;
                Ok(pool.install(f))
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + i as f64;
        let a = Execution::Sequential.map_range(1000, f);
        let b = Execution::Parallel.map_range(1000, f);
        assert_eq!(a, b);
        assert_eq!(a[7], f(7));
    }

    #[test]
    fn thread_pool_runs() {
        let v = with_threads(Some(2), || Execution::Parallel.map_range(10, |i| i * i)).unwrap();
        assert_eq!(v[3], 9);
    }
}
