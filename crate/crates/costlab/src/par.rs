//! Data-parallel helpers. With the `parallel` feature these run on the rayon
//! pool; without it they are plain sequential loops with identical results.

/// Maps `f` over `lo..hi`, preserving order.
pub fn map_range<T, F>(lo: u64, hi: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (lo..hi).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (lo..hi).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential reference for [`map_range`], used by benches and tests.
pub fn map_range_seq<T, F>(lo: u64, hi: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (lo..hi).map(f).collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let a = map_range(3, 40, |i| i * i);
        let b = map_range_seq(3, 40, |i| i * i);
        assert_eq!(a, b);
        let v: Vec<u64> = (0..17).collect();
        assert_eq!(map_slice(&v, |&i| i + 1), (1..18).collect::<Vec<_>>());
    }
}
