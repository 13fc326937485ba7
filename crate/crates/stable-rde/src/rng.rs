//! Deterministic randomness: a counter-based generator plus the stream-splitting
//! rule every recursive construction in this crate uses.
//!
//! The generator is SplitMix64 (Steele, Lea & Vigna): a 64-bit Weyl counter
//! finalized by an avalanching mix, so the k-th output is a pure function of
//! (seed, k). Recursive structures never share one stream; instead each node of
//! a recursion gets its own stream, seeded by [`child_seed`] from the parent's
//! seed and the child's position. Folding [`child_seed`] along a node's address
//! word therefore pins every draw to the node that makes it, independent of
//! traversal order and thread schedule. That is what makes cross-mode couplings
//! possible: two algorithms that visit the same node draw the same numbers.
//!
//! Reproducibility is promised within a build (same seed, same binary, same
//! output bytes). Cross-version or cross-language bit-exactness is not a goal.

use rand::RngCore;

/// Weyl increment of SplitMix64 (the 64-bit golden ratio).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer: a bijective avalanching mix on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based 64-bit generator; output k is `mix64(seed + (k+1)·GOLDEN_GAMMA)`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    counter: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { counter: seed }
    }

    #[inline]
    pub fn next_raw(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN_GAMMA);
        mix64(self.counter)
    }
}

impl RngCore for SplitMix64 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_raw() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next_raw()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_raw().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Seed of the `index`-th child stream of a stream seeded `parent`.
///
/// The rule is fixed and documented so runs can be dissected: mix the parent
/// seed, add `index` scaled by the Weyl constant plus one, and mix again. The
/// trailing `+1` keeps the all-zero fixed point of the mix out of the chain
/// (otherwise seed 0, child 0 would reproduce seed 0 forever).
#[inline]
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix64(
        mix64(parent)
            .wrapping_add(index.wrapping_mul(GOLDEN_GAMMA))
            .wrapping_add(1),
    )
}

/// Convenience: the child stream itself.
#[inline]
pub fn child_stream(parent: u64, index: u64) -> SplitMix64 {
    SplitMix64::new(child_seed(parent, index))
}

/// Runs `reps` independent replicates, replicate r drawing from
/// `child_stream(seed, r)`, and returns results in replicate order.
///
/// The seed assignment is independent of `threads`, so thread count never
/// changes results, only wall time. Worker threads each take a contiguous
/// block of replicate indices.
pub fn run_replicates<T, F>(reps: usize, threads: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SplitMix64) -> T + Sync,
{
    if threads <= 1 || reps <= 1 {
        return (0..reps)
            .map(|r| f(r, &mut child_stream(seed, r as u64)))
            .collect();
    }
    let workers = threads.min(reps);
    let chunk = reps.div_ceil(workers);
    let mut parts: Vec<Vec<T>> = Vec::with_capacity(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|t| {
                let f = &f;
                scope.spawn(move || {
                    let lo = t * chunk;
                    let hi = ((t + 1) * chunk).min(reps);
                    (lo..hi)
                        .map(|r| f(r, &mut child_stream(seed, r as u64)))
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        for h in handles {
            parts.push(h.join().expect("replicate worker panicked"));
        }
    });
    parts.into_iter().flatten().collect()
}

/// Default worker count: the `RDE_THREADS` environment variable, else 1.
pub fn default_threads() -> usize {
    std::env::var("RDE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
