use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Environment variable that overrides the default master seed.
pub const SEED_ENV: &str = "SIP_SEED";

pub const DEFAULT_SEED: u64 = 0x5eed_0f51_9c0d_e5a1;

/// Master seed from [`SEED_ENV`], falling back to [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

const CHILD_BIT: u64 = 1 << 63;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8 in counter mode: the seed fixes the key, the stream
/// index selects the nonce, and the word position is the counter. Splitting
/// therefore needs no coordination between replicas.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Master stream for `seed` (stream index 0).
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Child stream `index`. Children of the master share its key and occupy
    /// the upper half of the nonce space; deeper levels re-key from the
    /// parent's identity.
    ///
    /// # Panics
    ///
    /// If `index >= 2^63`.
    pub fn split(&self, index: u64) -> RngStream {
        assert!(index < CHILD_BIT, "stream index must be below 2^63");
        let key = if self.stream == 0 {
            self.seed
        } else {
            splitmix64(self.seed ^ splitmix64(self.stream))
        };
        Self::with_stream(key, CHILD_BIT | index)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential holding time with the given total rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open0().ln() / rate
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Sub-stream `index` of `master`.
pub fn split_stream(master: &RngStream, index: u64) -> RngStream {
    master.split(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn draws(s: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_index_reproduces() {
        let m = RngStream::new(42);
        assert_eq!(draws(&mut m.split(3), 1000), draws(&mut m.split(3), 1000));
    }

    #[test]
    fn different_indices_differ() {
        let m = RngStream::new(42);
        let a = draws(&mut m.split(0), 1000);
        let b = draws(&mut m.split(1), 1000);
        assert_ne!(a, b);
        assert!(a.iter().zip(&b).filter(|(x, y)| x == y).count() == 0);
        let master = draws(&mut RngStream::new(42), 1000);
        assert_ne!(master, a);
    }

    #[test]
    fn nested_splits_are_deterministic_and_distinct() {
        let m = RngStream::new(7);
        let c = m.split(5);
        assert_eq!(draws(&mut c.split(2), 10), draws(&mut m.split(5).split(2), 10));
        assert_ne!(draws(&mut c.split(2), 10), draws(&mut m.split(2), 10));
    }

    #[test]
    fn counter_advances() {
        let mut s = RngStream::new(1).split(9);
        assert_eq!(s.counter(), 0);
        s.next_u64();
        assert_eq!(s.counter(), 2);
    }

    #[test]
    fn uniform_chi_square() {
        let mut s = RngStream::new(2024).split(17);
        let bins = 100;
        let n = 1_000_000;
        let mut hist = vec![0u64; bins];
        for _ in 0..n {
            hist[(s.uniform() * bins as f64) as usize] += 1;
        }
        let expected = n as f64 / bins as f64;
        let stat: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.001, "chi-square p = {p}, stat = {stat}");
    }

    #[test]
    fn open_uniform_never_zero() {
        let mut s = RngStream::new(3);
        for _ in 0..10_000 {
            let u = s.uniform_open0();
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
