//! Counter-based pseudo-random streams.
//!
//! Every Monte Carlo replicate draws from its own substream, keyed by
//! `(seed, context, replicate index)` through an invertible 64-bit mix.
//! Substreams are independent of evaluation order, so replicates can be
//! distributed over any number of workers and still reproduce bit-identical
//! draws.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. Full 64-bit avalanche.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for a family of substreams, derived from a user seed and a context
/// word (scenario hash, operation tag, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    key: u64,
}

impl StreamKey {
    pub fn new(seed: u64, context: u64) -> Self {
        StreamKey {
            key: mix64(seed ^ mix64(context ^ GOLDEN_GAMMA)),
        }
    }

    /// The `index`-th substream under this key.
    #[inline]
    pub fn stream(&self, index: u64) -> Stream {
        Stream {
            state: mix64(self.key ^ mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1))),
        }
    }

    /// A derived key for a sub-experiment (one n of a grid, one grid cell
    /// of a sweep).
    pub fn child(&self, salt: u64) -> StreamKey {
        StreamKey {
            key: mix64(self.key.rotate_left(17) ^ mix64(salt.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn raw(&self) -> u64 {
        self.key
    }

    /// Rebuild a key from its raw value (sample provenance carries these).
    pub fn from_raw(key: u64) -> StreamKey {
        StreamKey { key }
    }
}

/// A SplitMix64 generator. The state advances by a fixed odd constant, so
/// the k-th output is a pure function of `(initial state, k)`.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn from_state(state: u64) -> Self {
        Stream { state: mix64(state) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1, so logs
    /// of draws are always finite.
    #[inline]
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
    }

    /// Standard normal via Box-Muller (cosine branch). Two uniforms per
    /// draw, no rejection, so the consumption pattern is fixed.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open01();
        let u2 = self.uniform_open01();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Unit-rate exponential.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform_open01().ln()
    }

    /// Fair sign.
    #[inline]
    pub fn rademacher(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// FNV-1a over bytes; used to key scenario substreams off a canonical
/// serialized form.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}
