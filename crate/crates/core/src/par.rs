//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these run on the current rayon pool;
//! without it they are plain iterator loops. Every helper returns results in
//! index order so callers can reduce sequentially and get bit-identical output
//! regardless of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of Monte Carlo trials handled by one generator stream.
pub const TRIAL_CHUNK: usize = 1024;

/// Generator for stream `stream` of the master `seed`.
///
/// Streams are independent, so work split by stream index gives the same
/// numbers no matter how the streams are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// First (lowest index) item for which `f` returns `Some`.
pub(crate) fn find_map_first<T, R, F>(items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().find_map_first(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().find_map(f)
    }
}

/// Splits `trials` into fixed-size chunks, one generator stream per chunk,
/// and returns the per-chunk results in chunk order.
pub(crate) fn map_trial_chunks<R, F>(trials: usize, seed: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> R + Sync + Send,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    map_range(chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let len = TRIAL_CHUNK.min(trials - c * TRIAL_CHUNK);
        f(&mut rng, len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, 0).gen();
        let b: u64 = stream_rng(7, 0).gen();
        let c: u64 = stream_rng(7, 1).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn chunks_cover_every_trial() {
        let lens = map_trial_chunks(2500, 1, |_, len| len);
        assert_eq!(lens, vec![1024, 1024, 452]);
        assert_eq!(map_trial_chunks(0, 1, |_, len| len), Vec::<usize>::new());
    }

    #[test]
    fn find_first_is_ordered() {
        let v: Vec<usize> = (0..1000).collect();
        let hit = find_map_first(&v, |&x| (x % 97 == 96).then_some(x));
        assert_eq!(hit, Some(96));
    }
}
