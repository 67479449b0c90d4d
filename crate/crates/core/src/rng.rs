//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit seed and selected by a
//! 64-bit stream id, so `(seed, stream_id)` fully determines the draw sequence
//! regardless of thread scheduling. Logical consumers (a machine, an adversary
//! round, a verification check) obtain their own stream with [`RngStream::derive`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose tags mixed into derived stream ids.
pub mod tags {
    pub const MACHINE: u64 = 0x4d41_4348;
    pub const ADVERSARY_ROUND: u64 = 0x4144_5652;
    pub const ADVERSARY_SETUP: u64 = 0x4144_5653;
    pub const COMPARATOR: u64 = 0x434f_4d50;
    pub const VERIFY: u64 = 0x5645_5249;
}

#[derive(Clone, Debug)]
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

    /// Stream whose id is a hash of `path`, e.g. `[tags::MACHINE, m]`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        Self::new(seed, stream_id_for(path))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Rademacher draw, `+1.0` or `-1.0`.
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.gaussian();
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_id_for(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &p| splitmix(acc ^ splitmix(p)))
}
