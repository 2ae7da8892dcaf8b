//! Reproducible random streams.
//!
//! Every Monte Carlo draw is keyed by `(seed, index)`. The stream is a
//! ChaCha8 generator seeded from the master seed with the index selecting
//! the ChaCha stream, so draw `i` is the same no matter which worker
//! produces it or how many workers there are.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator handed to samplers.
pub type StreamRng = ChaCha8Rng;

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }

    /// Deterministically derived sub-stream, e.g. the inner draws that belong
    /// to outer draw `self`.
    pub fn child(&self, tag: u64) -> RngStream {
        let a = splitmix64(self.index ^ 0x6a09_e667_f3bc_c909);
        RngStream {
            seed: self.seed,
            index: splitmix64(a ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One standard normal draw.
#[inline]
pub fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_reproduces() {
        let s = RngStream::new(42, 7);
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        let mut r = s.rng();
        let b: Vec<u64> = (0..8).map(|_| r.random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(42, 7).rng();
        let mut b = RngStream::new(42, 8).rng();
        let mut c = RngStream::new(43, 7).rng();
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }

    #[test]
    fn children_are_distinct_from_parent_and_each_other() {
        let s = RngStream::new(1, 3);
        assert_ne!(s.child(0), s.child(1));
        assert_ne!(s.child(0).index(), s.index());
        assert_eq!(s.child(5), s.child(5));
        assert_ne!(RngStream::new(1, 4).child(0), s.child(0));
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut a = RngStream::new(9, 0).rng();
        let mut b = RngStream::new(9, 1).rng();
        let n = 20_000;
        let mut sxy = 0.0;
        for _ in 0..n {
            sxy += normal(&mut a) * normal(&mut b);
        }
        // sample correlation of independent normals has sd 1/sqrt(n)
        assert!((sxy / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }
}
