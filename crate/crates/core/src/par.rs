//! Execution strategy for the data-parallel inner loops.
//!
//! Every parallel loop in the crate is an order-preserving map, so the output
//! is bit-identical for any thread count and for either strategy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Runs on the global rayon pool; identical to `Sequential` when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run loops in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Maps `f` over `0..len`, preserving order.
    pub fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
            _ => (0..len).map(f).collect(),
        }
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map_slice(&xs, |x| x * x + 1);
        let b = Execution::Parallel.map_slice(&xs, |x| x * x + 1);
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range(17, |i| i * 3);
        assert_eq!(c, (0..17).map(|i| i * 3).collect::<Vec<_>>());
    }
}
