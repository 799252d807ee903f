//! Uniform sampling on spheres of `F_k` by non-backtracking random walks, and Monte
//! Carlo estimates of annular densities.
//!
//! Randomness comes from ChaCha8 with a 64-bit seed. Work is cut into fixed blocks and
//! block `b` of sphere `s` reads its own ChaCha stream `(s << 48) | b`, so results depend
//! on the seed only, never on the number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::is_test_element_rank2;
use crate::error::{Error, Result};
use crate::lattice::{gcd_class, GcdClassSet};
use crate::words::{Letter, Word};

const BLOCK: u64 = 1 << 14;

/// Uniform word on the sphere of radius `n`: a uniform first letter, then each next
/// letter uniform among the `2k − 1` that do not cancel.
pub fn sample_sphere<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Word {
    let mut letters = Vec::with_capacity(n);
    if n > 0 {
        let mut last = rng.random_range(0..2 * k as u8);
        letters.push(Letter::from_code(last));
        for _ in 1..n {
            last = step_code(last, rng.random_range(0..2 * k as u8 - 1));
            letters.push(Letter::from_code(last));
        }
    }
    Word::from_reduced(k, letters)
}

/// The `d`-th letter code other than the inverse of `last`.
#[inline]
fn step_code(last: u8, d: u8) -> u8 {
    let inv = last ^ 1;
    if d < inv {
        d
    } else {
        d + 1
    }
}

/// Length `m` uniform in `0..=n`, then a uniform word of length `m`; a word of length `m`
/// is drawn with probability `1/((n+1)·|S(m)|)`. This is not the uniform law on the ball.
pub fn sample_ball_experiment<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Word {
    let m = rng.random_range(0..=n);
    sample_sphere(k, m, rng)
}

/// Byte-at-a-time transition tables for the abelianized walk: one byte drives `chunk`
/// steps at once.
struct AbelianWalker {
    k: usize,
    base: u8,
    chunk: usize,
    blocks: usize,
    accept_below: u16,
    single_accept_below: u16,
    end_state: Vec<u8>,
    delta: Vec<i8>,
}

impl AbelianWalker {
    fn new(k: usize) -> Self {
        let base = (2 * k - 1) as u8;
        let mut chunk = 1;
        while (base as usize).pow(chunk as u32 + 1) <= 256 {
            chunk += 1;
        }
        let blocks = (base as usize).pow(chunk as u32);
        let states = 2 * k;
        let mut end_state = vec![0u8; states * blocks];
        let mut delta = vec![0i8; states * blocks * k];
        for s in 0..states {
            for v in 0..blocks {
                let mut state = s as u8;
                let mut digits = v;
                let row = s * blocks + v;
                for _ in 0..chunk {
                    state = step_code(state, (digits % base as usize) as u8);
                    digits /= base as usize;
                    let l = Letter::from_code(state);
                    delta[row * k + l.generator() - 1] += l.sign() as i8;
                }
                end_state[row] = state;
            }
        }
        AbelianWalker {
            k,
            base,
            chunk,
            blocks,
            accept_below: ((256 / blocks) * blocks) as u16,
            single_accept_below: ((256 / base as usize) * base as usize) as u16,
            end_state,
            delta,
        }
    }

    /// Writes the image of a uniform word of length `n ≥ 1` into `z`.
    fn walk(&self, n: usize, rng: &mut ChaCha8Rng, bytes: &mut ByteSource, z: &mut [i64]) {
        z.fill(0);
        let mut state = rng.random_range(0..2 * self.k as u8);
        let l = Letter::from_code(state);
        z[l.generator() - 1] += l.sign();
        let mut left = n - 1;
        while left >= self.chunk {
            let b = bytes.next_below(rng, self.accept_below) as usize % self.blocks;
            let row = state as usize * self.blocks + b;
            for (zi, &d) in z.iter_mut().zip(&self.delta[row * self.k..(row + 1) * self.k]) {
                *zi += d as i64;
            }
            state = self.end_state[row];
            left -= self.chunk;
        }
        for _ in 0..left {
            let d = bytes.next_below(rng, self.single_accept_below) % self.base as u16;
            state = step_code(state, d as u8);
            let l = Letter::from_code(state);
            z[l.generator() - 1] += l.sign();
        }
    }
}

/// Uniform bytes by rejection, eight per `u64` draw.
struct ByteSource {
    buf: u64,
    left: u32,
}

impl ByteSource {
    fn new() -> Self {
        ByteSource { buf: 0, left: 0 }
    }

    /// A byte uniform on `0..limit`.
    #[inline]
    fn next_below(&mut self, rng: &mut ChaCha8Rng, limit: u16) -> u16 {
        loop {
            if self.left == 0 {
                self.buf = rng.next_u64();
                self.left = 8;
            }
            let b = (self.buf & 0xff) as u16;
            self.buf >>= 8;
            self.left -= 1;
            if b < limit {
                return b;
            }
        }
    }
}

/// The set whose annular density is being estimated.
pub enum AnnularTarget<'a> {
    /// Words whose image has gcd class in the set. Sampled without building words.
    Lattice(GcdClassSet),
    /// Rank-two test elements.
    TestElements,
    /// Any word predicate.
    Words {
        name: String,
        pred: &'a (dyn Fn(&Word) -> bool + Sync),
    },
}

impl AnnularTarget<'_> {
    pub fn describe(&self) -> String {
        match self {
            AnnularTarget::Lattice(set) => format!("gcd class in {set}"),
            AnnularTarget::TestElements => "test elements".to_string(),
            AnnularTarget::Words { name, .. } => name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEstimate {
    pub n: usize,
    pub samples: u64,
    pub estimate: f64,
    /// `sqrt(p̂(1 − p̂)/samples)`
    pub se: f64,
    pub seed: u64,
    pub predicate: String,
}

fn block_rng(seed: u64, sphere: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sphere << 48 | block);
    rng
}

fn count_hits(k: usize, len: usize, count: u64, sphere: u64, seed: u64, target: &AnnularTarget) -> u64 {
    let blocks = count.div_ceil(BLOCK);
    let walker = matches!(target, AnnularTarget::Lattice(_)).then(|| AbelianWalker::new(k));
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, sphere, b);
            let here = BLOCK.min(count - b * BLOCK);
            let mut hits = 0u64;
            match target {
                AnnularTarget::Lattice(set) => {
                    let walker = walker.as_ref().expect("built for lattice targets");
                    let mut bytes = ByteSource::new();
                    let mut z = vec![0i64; k];
                    for _ in 0..here {
                        walker.walk(len, &mut rng, &mut bytes, &mut z);
                        hits += u64::from(set.contains(gcd_class(&z)));
                    }
                }
                AnnularTarget::TestElements => {
                    for _ in 0..here {
                        let w = sample_sphere(k, len, &mut rng);
                        hits += u64::from(is_test_element_rank2(&w).expect("rank 2").is_test);
                    }
                }
                AnnularTarget::Words { pred, .. } => {
                    for _ in 0..here {
                        hits += u64::from(pred(&sample_sphere(k, len, &mut rng)));
                    }
                }
            }
            hits
        })
        .sum()
}

/// Estimates `Q(n)`: half the samples come from sphere `n − 1`, half from sphere `n`.
pub fn mc_annular_estimate(
    k: usize,
    n: usize,
    target: &AnnularTarget,
    samples: u64,
    seed: u64,
) -> Result<SampleEstimate> {
    if k < 2 {
        return Err(Error::invalid(format!("rank must be at least 2, got {k}")));
    }
    if n < 2 {
        return Err(Error::invalid(format!("annular estimates need n ≥ 2, got {n}")));
    }
    if samples == 0 || samples % 2 == 1 {
        return Err(Error::invalid(format!("samples must be positive and even, got {samples}")));
    }
    if matches!(target, AnnularTarget::TestElements) && k != 2 {
        return Err(Error::invalid("test elements are classified only in rank 2"));
    }
    let half = samples / 2;
    let hits = count_hits(k, n - 1, half, 0, seed, target) + count_hits(k, n, half, 1, seed, target);
    let p = hits as f64 / samples as f64;
    Ok(SampleEstimate {
        n,
        samples,
        estimate: p,
        se: (p * (1.0 - p) / samples as f64).sqrt(),
        seed,
        predicate: target.describe(),
    })
}
