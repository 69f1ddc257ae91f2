//! Reproducible random streams.
//!
//! Every replicate, fold or split owns an [`RngStream`] identified by a
//! `(seed, stream_id)` pair. The generator is ChaCha8 with the stream id
//! placed in the cipher's stream parameter, so distinct ids give
//! non-overlapping keystreams and results do not depend on how work is
//! scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream keyed on this stream's identity plus `tag`.
    ///
    /// Independent of how many draws have already been taken from `self`.
    pub fn child(&self, tag: u64) -> RngStream {
        let key = mix64(mix64(self.seed ^ 0x6a09_e667_f3bc_c909) ^ self.stream_id);
        RngStream::new(key, tag)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..len`; `len` must be positive.
    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        scaled_index(self.uniform(), len)
    }
}

/// Maps `u` in `[0, 1)` to an index in `0..len`.
#[inline]
pub(crate) fn scaled_index(u: f64, len: usize) -> usize {
    debug_assert!(len > 0);
    ((u * len as f64) as usize).min(len - 1)
}

// splitmix64 finalizer, used only to derive child seeds
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
