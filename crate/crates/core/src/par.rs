//! Data-parallel helpers. With the `parallel` feature these run on rayon;
//! without it they are plain sequential loops with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `f` applied to every element, order preserved.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// `f(i)` for `i` in `range`, order preserved.
pub fn map_range<U, F>(range: std::ops::Range<usize>, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

/// Flattening variant of [`map_range`].
pub fn flat_map_range<U, F>(range: std::ops::Range<usize>, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> Vec<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().flat_map_iter(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.flat_map(f).collect()
    }
}

/// Runs `op` on a pool bounded to `threads` workers (`None` keeps the global
/// pool). A no-op wrapper in sequential builds.
pub fn with_threads<R, OP>(threads: Option<usize>, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(op),
                Err(_) => op(),
            },
            _ => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
