//! Batch execution over seeds.
//!
//! With the `parallel` feature (on by default) batches fan out over the rayon
//! thread pool. Without it, or with [`Execution::Sequential`], they run in
//! order on the calling thread. Results come back in input order either way.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            _ => items.into_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Execution::Sequential.map((0..100u64).collect(), |x| x * x);
        let par = Execution::Parallel.map((0..100u64).collect(), |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }
}
