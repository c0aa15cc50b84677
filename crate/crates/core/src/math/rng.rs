//! Seeded, platform-stable PRNG.
//!
//! Algorithm: xoshiro256++ 1.0 (Blackman & Vigna), state expanded from a
//! 64-bit seed with SplitMix64. Integer-only arithmetic, so the stream for a
//! given seed is byte-identical on every platform.
//!
//! Seed discipline: experiments use one root seed and derive one independent
//! seed per purpose via [`derive_seed`], which hashes the purpose string with
//! FNV-1a, XORs it into the root, and mixes once with SplitMix64. Consumers
//! that draw from differently-derived streams do not perturb each other
//! (e.g. changing the epoch count does not change the corpus).

/// Identifier of the generator backing [`Rng`].
pub const RNG_ALGORITHM: &str = "xoshiro256++ 1.0";

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derives an independent seed for `purpose` from a root seed.
pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut s = root ^ fnv1a64(purpose.as_bytes());
    splitmix64(&mut s)
}

/// xoshiro256++ generator. Single-owner: clone or derive per task, never share.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut st = seed;
        let s = [
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
        ];
        Rng { s }
    }

    /// `Rng::from_seed(derive_seed(root, purpose))`.
    pub fn for_purpose(root: u64, purpose: &str) -> Self {
        Rng::from_seed(derive_seed(root, purpose))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n), unbiased via rejection. Panics if n == 0.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return (x % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Golden stream values computed with an independent Python implementation
    // of the reference algorithm (SplitMix64 expansion + xoshiro256++ 1.0).
    #[test]
    fn golden_stream_seed_0() {
        let mut r = Rng::from_seed(0);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                0x53175d61490b23df,
                0x61da6f3dc380d507,
                0x5c0fdf91ec9a7bfc,
                0x02eebf8c3bbe5e1a,
                0x7eca04ebaf4a5eea,
            ]
        );
    }

    #[test]
    fn golden_stream_seed_42() {
        let mut r = Rng::from_seed(42);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                0xd0764d4f4476689f,
                0x519e4174576f3791,
                0xfbe07cfb0c24ed8c,
                0xb37d9f600cd835b8,
                0xcb231c3874846a73,
            ]
        );
    }

    #[test]
    fn golden_derived_seeds() {
        assert_eq!(derive_seed(7, "corpus"), 0x0ba145d3089b2780);
        assert_eq!(derive_seed(7, "init"), 0xf8401492cf9a1e6e);
        assert_eq!(derive_seed(1234, "synth.background"), 0x1170602aaec79723);
    }

    #[test]
    fn identical_seed_identical_stream() {
        let mut a = Rng::from_seed(0xDEADBEEF);
        let mut b = Rng::from_seed(0xDEADBEEF);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_purposes_distinct_streams() {
        let mut a = Rng::for_purpose(5, "corpus");
        let mut b = Rng::for_purpose(5, "init");
        // not a proof, but any overlap here would be a bug in practice
        let av: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let bv: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(av, bv);
    }

    #[test]
    fn next_f64_in_unit_interval() {
        let mut r = Rng::from_seed(1);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn below_bounds_and_reaches_all_residues() {
        let mut r = Rng::from_seed(2);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let x = r.below(7);
            assert!(x < 7);
            seen[x] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::from_seed(3);
        let mut xs: Vec<usize> = (0..50).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
