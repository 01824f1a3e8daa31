//! Data-parallel mapping with a sequential fallback.
//!
//! Batch operations (oracle sweeps, exhaustive history enumeration, the
//! property suites) funnel through [`map`]; with the default `parallel`
//! feature they fan out over rayon, without it they run sequentially.
//! [`map_seq`] is always sequential and exists so benchmarks can compare the
//! two paths within one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

pub fn map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// True when any item satisfies the predicate.
pub fn any<T, F>(items: Vec<T>, f: F) -> bool
where
    T: Send,
    F: Fn(T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().any(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().any(f)
    }
}
