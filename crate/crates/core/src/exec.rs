//! Data-parallel helpers with a sequential fallback.
//!
//! Only order-preserving maps go through here. Reductions are always done
//! sequentially afterwards so results do not depend on thread scheduling.

/// How per-element work is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise
    /// identical to [`Exec::Sequential`].
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

// Below this many elements the rayon split overhead dominates.
const MIN_PARALLEL_LEN: usize = 2048;

pub fn map_collect<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel if items.len() >= MIN_PARALLEL_LEN => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..10_000).map(|i| i as f64 * 0.37).collect();
        let a = map_collect(Exec::Sequential, &xs, |x| x.sin());
        let b = map_collect(Exec::Parallel, &xs, |x| x.sin());
        assert_eq!(a, b);
    }
}
