//! Order-preserving fan-out over independent jobs (seeds, graphs, games).
//!
//! With the `parallel` feature jobs run on the rayon pool; results always
//! come back in input order, so sweeps are deterministic either way.

/// Sequential map.
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Data-parallel map on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// [`map_par`] when built with `parallel`, otherwise [`map_seq`].
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let seeds: Vec<u64> = (0..257).collect();
        let f = |s: &u64| s.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 7;
        assert_eq!(map(&seeds, f), map_seq(&seeds, f));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let seeds: Vec<u64> = (0..64).collect();
        let f = |s: &u64| (0..1000u64).fold(*s, |a, b| a.rotate_left(5) ^ b);
        assert_eq!(map_par(&seeds, f), map_seq(&seeds, f));
    }
}
