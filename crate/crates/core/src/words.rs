//! Free-group words over a fixed basis `a_1, …, a_k`.
//!
//! Letters are packed into a byte: `code = 2 * (generator - 1) + negative`, so the
//! inverse of a letter is `code ^ 1`. Words are always kept freely reduced.

use std::fmt;
use std::ops::{Add, Index};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

impl Letter {
    /// `generator` is 1-based.
    pub fn new(generator: usize, positive: bool) -> Letter {
        assert!((1..=127).contains(&generator), "generator index {generator} out of range");
        Letter(((generator - 1) as u8) << 1 | u8::from(!positive))
    }

    pub fn from_code(code: u8) -> Letter {
        Letter(code)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn generator(self) -> usize {
        (self.0 >> 1) as usize + 1
    }

    pub fn sign(self) -> i64 {
        if self.0 & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.generator();
        if g <= 26 {
            let c = (b'a' + (g - 1) as u8) as char;
            if self.sign() > 0 {
                write!(f, "{c}")
            } else {
                write!(f, "{}", c.to_ascii_uppercase())
            }
        } else if self.sign() > 0 {
            write!(f, "[x{g}]")
        } else {
            write!(f, "[X{g}]")
        }
    }
}

/// A freely reduced word in `F_k`. The empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

fn check_rank(rank: usize) -> Result<()> {
    if !(2..=127).contains(&rank) {
        return Err(Error::invalid(format!("rank must be in 2..=127, got {rank}")));
    }
    Ok(())
}

impl Word {
    pub fn identity(rank: usize) -> Word {
        Word {
            rank,
            letters: Vec::new(),
        }
    }

    /// Caller guarantees `letters` is reduced and within the rank.
    pub(crate) fn from_reduced(rank: usize, letters: Vec<Letter>) -> Word {
        debug_assert!(letters.windows(2).all(|p| p[0] != p[1].inverse()));
        Word { rank, letters }
    }

    /// Parses `a`, `b`, … as generators and `A`, `B`, … as their inverses.
    /// Whitespace and `1` (identity) are ignored. The result is freely reduced.
    pub fn parse(rank: usize, s: &str) -> Result<Word> {
        check_rank(rank)?;
        let mut raw = Vec::with_capacity(s.len());
        for ch in s.chars() {
            if ch.is_whitespace() || ch == '1' {
                continue;
            }
            if !ch.is_ascii_alphabetic() {
                return Err(Error::invalid(format!("unexpected character {ch:?} in word {s:?}")));
            }
            let g = (ch.to_ascii_lowercase() as u8 - b'a') as usize + 1;
            if g > rank {
                return Err(Error::invalid(format!(
                    "letter {ch:?} is not in the rank-{rank} alphabet"
                )));
            }
            raw.push(Letter::new(g, ch.is_ascii_lowercase()));
        }
        reduce(rank, raw)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        debug_assert_eq!(self.rank, other.rank);
        let mut out = self.letters.clone();
        push_reduced(&mut out, other.letters.iter().copied());
        Word {
            rank: self.rank,
            letters: out,
        }
    }

    pub fn pow(&self, exponent: u32) -> Word {
        let mut out = Word::identity(self.rank);
        for _ in 0..exponent {
            out = out.concat(self);
        }
        out
    }

    /// `g · self · g⁻¹`
    pub fn conjugate_by(&self, g: &Word) -> Word {
        g.concat(self).concat(&g.inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

fn push_reduced(stack: &mut Vec<Letter>, letters: impl IntoIterator<Item = Letter>) {
    for l in letters {
        if stack.last() == Some(&l.inverse()) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
}

/// Freely reduces a raw letter sequence.
pub fn reduce(rank: usize, letters: impl IntoIterator<Item = Letter>) -> Result<Word> {
    check_rank(rank)?;
    let mut stack = Vec::new();
    for l in letters {
        if l.generator() > rank {
            return Err(Error::invalid(format!(
                "generator {} exceeds rank {rank}",
                l.generator()
            )));
        }
        push_reduced(&mut stack, [l]);
    }
    Ok(Word {
        rank,
        letters: stack,
    })
}

/// A point of `ℤ^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentVector(pub Vec<i64>);

impl ExponentVector {
    pub fn zero(rank: usize) -> Self {
        ExponentVector(vec![0; rank])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn norm2_sq(&self) -> u128 {
        self.0.iter().map(|&c| (c as i128 * c as i128) as u128).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Parity of the L1 norm: `0` or `1`.
    pub fn parity(&self) -> u64 {
        self.l1_norm() & 1
    }
}

impl Index<usize> for ExponentVector {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl Add for &ExponentVector {
    type Output = ExponentVector;
    fn add(self, rhs: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<i64>> for ExponentVector {
    fn from(v: Vec<i64>) -> Self {
        ExponentVector(v)
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Exponent sums of each generator.
pub fn abelianize(w: &Word) -> ExponentVector {
    let mut z = vec![0i64; w.rank];
    for l in &w.letters {
        z[l.generator() - 1] += l.sign();
    }
    ExponentVector(z)
}

/// Splits `w = g · c · g⁻¹` with `c` cyclically reduced and `g` as short as possible.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    let n = w.letters.len();
    let mut i = 0;
    while i + 1 < n - i && w.letters[i] == w.letters[n - 1 - i].inverse() {
        i += 1;
    }
    (
        Word::from_reduced(w.rank, w.letters[..i].to_vec()),
        Word::from_reduced(w.rank, w.letters[i..n - i].to_vec()),
    )
}

/// Returns `(u, t)` with `w = u^t` and `t` maximal.
pub fn primitive_root(w: &Word) -> Result<(Word, u32)> {
    if w.is_identity() {
        return Err(Error::invalid("the identity has no primitive root"));
    }
    let (g, core) = cyclic_reduce(w);
    let c = core.letters();
    let len = c.len();
    // The smallest period dividing the core length gives the root.
    let period = (1..=len)
        .filter(|d| len % d == 0)
        .find(|&d| (d..len).all(|i| c[i] == c[i - d]))
        .expect("the full length is always a period");
    let root_core = Word::from_reduced(w.rank, c[..period].to_vec());
    let root = if g.is_identity() {
        root_core
    } else {
        let mut letters = g.letters.clone();
        letters.extend_from_slice(root_core.letters());
        letters.extend(g.letters.iter().rev().map(|l| l.inverse()));
        Word::from_reduced(w.rank, letters)
    };
    Ok((root, (len / period) as u32))
}

pub fn is_proper_power(w: &Word) -> bool {
    primitive_root(w).map(|(_, t)| t >= 2).unwrap_or(false)
}

/// Number of reduced words of length exactly `n`: `1` for `n = 0`, else `2k(2k−1)^(n−1)`.
pub fn sphere_size(k: usize, n: usize) -> BigUint {
    if n == 0 {
        return BigUint::one();
    }
    BigUint::from(2 * k) * num_traits::pow(BigUint::from(2 * k - 1), n - 1)
}

pub fn ball_size(k: usize, n: usize) -> BigUint {
    let mut total = BigUint::zero();
    for m in 0..=n {
        total += sphere_size(k, m);
    }
    total
}

/// Depth-first enumeration of a sphere, in lexicographic order of letter codes.
pub struct SphereIter {
    rank: usize,
    codes: Vec<u8>,
    fixed_first: bool,
    started: bool,
    done: bool,
}

/// Every reduced word of length `n`, each exactly once.
pub fn enumerate_sphere(k: usize, n: usize) -> SphereIter {
    SphereIter {
        rank: k,
        codes: Vec::with_capacity(n),
        fixed_first: false,
        started: false,
        done: false,
    }
    .init(n, None)
}

/// The part of the sphere whose words start with `first`.
pub fn enumerate_sphere_from(k: usize, n: usize, first: Letter) -> SphereIter {
    assert!(n >= 1);
    SphereIter {
        rank: k,
        codes: Vec::with_capacity(n),
        fixed_first: true,
        started: false,
        done: false,
    }
    .init(n, Some(first))
}

impl SphereIter {
    fn init(mut self, n: usize, first: Option<Letter>) -> Self {
        for i in 0..n {
            let c = if i == 0 {
                first.map_or(0, |l| l.code())
            } else {
                smallest_after(self.codes[i - 1])
            };
            self.codes.push(c);
        }
        self
    }

    fn advance(&mut self) -> bool {
        let limit = (2 * self.rank) as u8;
        let lowest = usize::from(self.fixed_first);
        let mut i = self.codes.len();
        while i > lowest {
            i -= 1;
            let forbidden = if i == 0 { None } else { Some(self.codes[i - 1] ^ 1) };
            let mut c = self.codes[i] + 1;
            if Some(c) == forbidden {
                c += 1;
            }
            if c < limit {
                self.codes[i] = c;
                for j in i + 1..self.codes.len() {
                    self.codes[j] = smallest_after(self.codes[j - 1]);
                }
                return true;
            }
        }
        false
    }
}

fn smallest_after(prev: u8) -> u8 {
    if prev ^ 1 == 0 {
        1
    } else {
        0
    }
}

impl Iterator for SphereIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if self.started {
            if !self.advance() {
                self.done = true;
                return None;
            }
        } else {
            self.started = true;
        }
        if self.codes.is_empty() {
            self.done = true;
        }
        Some(Word::from_reduced(
            self.rank,
            self.codes.iter().map(|&c| Letter::from_code(c)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        Word::parse(2, s).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let a = Letter::new(1, true);
        let b = Letter::new(2, true);
        let r = reduce(2, [a, b, b.inverse(), a]).unwrap();
        assert_eq!(r, w("aa"));
        assert!(reduce(2, []).unwrap().is_identity());
        assert!(reduce(2, [a, a.inverse()]).unwrap().is_identity());
        assert!(reduce(2, [Letter::new(3, true)]).is_err());
    }

    #[test]
    fn abelianize_examples() {
        assert_eq!(abelianize(&w("ab")).0, vec![1, 1]);
        assert_eq!(abelianize(&w("abAB")).0, vec![0, 0]);
        assert_eq!(abelianize(&w("aabb")).0, vec![2, 2]);
    }

    #[test]
    fn cyclic_reduce_examples() {
        assert_eq!(cyclic_reduce(&w("abbA")), (w("a"), w("bb")));
        assert_eq!(cyclic_reduce(&w("ab")), (w(""), w("ab")));
        assert_eq!(cyclic_reduce(&w("abA")), (w("a"), w("b")));
        assert_eq!(cyclic_reduce(&w("a")), (w(""), w("a")));
    }

    #[test]
    fn primitive_root_examples() {
        assert_eq!(primitive_root(&w("abab")).unwrap(), (w("ab"), 2));
        assert_eq!(primitive_root(&w("abbA")).unwrap(), (w("abA"), 2));
        assert!(primitive_root(&w("")).is_err());
    }

    #[test]
    fn commutator_is_its_own_root() {
        let c = w("abAB");
        // brute force: no word of length 1 or 2 has a power equal to c
        for len in 1..=2 {
            for u in enumerate_sphere(2, len) {
                for t in 2..=4 {
                    assert_ne!(u.pow(t), c);
                }
            }
        }
        assert_eq!(primitive_root(&c).unwrap(), (c, 1));
    }

    #[test]
    fn sphere_and_ball_sizes() {
        assert_eq!(sphere_size(2, 1), BigUint::from(4u32));
        assert_eq!(sphere_size(2, 3), BigUint::from(36u32));
        assert_eq!(sphere_size(3, 2), BigUint::from(30u32));
        assert_eq!(sphere_size(2, 0), BigUint::from(1u32));
        assert_eq!(ball_size(2, 2), BigUint::from(17u32));
        assert_eq!(ball_size(2, 0), BigUint::from(1u32));
        assert_eq!(ball_size(3, 1), BigUint::from(7u32));
    }

    #[test]
    fn enumeration_small_spheres() {
        let s1: Vec<String> = enumerate_sphere(2, 1).map(|w| w.to_string()).collect();
        assert_eq!(s1, vec!["a", "A", "b", "B"]);
        let s2: Vec<Word> = enumerate_sphere(2, 2).collect();
        assert_eq!(s2.len(), 12);
        assert!(s2.iter().all(|w| w.len() == 2));
        assert_eq!(enumerate_sphere(2, 4).count(), 108);
        let s0: Vec<Word> = enumerate_sphere(3, 0).collect();
        assert_eq!(s0, vec![Word::identity(3)]);
    }

    #[test]
    fn enumeration_matches_sphere_size_and_is_distinct() {
        for k in 2..=3 {
            let n_max = if k == 2 { 10 } else { 7 };
            for n in 0..=n_max {
                let mut seen = std::collections::HashSet::new();
                for word in enumerate_sphere(k, n) {
                    assert_eq!(word.len(), n);
                    assert!(word.letters().windows(2).all(|p| p[0] != p[1].inverse()));
                    assert!(seen.insert(word));
                }
                assert_eq!(BigUint::from(seen.len()), sphere_size(k, n), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn prefixed_enumeration_partitions_the_sphere() {
        let total: usize = (0..4u8)
            .map(|c| enumerate_sphere_from(2, 5, Letter::from_code(c)).count())
            .sum();
        assert_eq!(total, 324);
        assert!(enumerate_sphere_from(2, 5, Letter::from_code(2))
            .all(|w| w.letters()[0] == Letter::from_code(2)));
    }

    #[test]
    fn parity_and_root_invariants_over_spheres() {
        for n in 1..=10 {
            for word in enumerate_sphere(2, n) {
                let z = abelianize(&word);
                assert_eq!(z.parity(), (n as u64) & 1);
                let (root, t) = primitive_root(&word).unwrap();
                assert_eq!(root.pow(t), word);
                assert_eq!(primitive_root(&root).unwrap().1, 1);
            }
        }
    }

    fn arb_word(rank: usize, max_len: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec(0..(2 * rank) as u8, 0..max_len).prop_map(move |codes| {
            reduce(rank, codes.into_iter().map(Letter::from_code)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(w in arb_word(3, 30)) {
            let again = reduce(3, w.letters().iter().copied()).unwrap();
            prop_assert_eq!(again, w);
        }

        #[test]
        fn concat_length_and_homomorphism(u in arb_word(2, 20), v in arb_word(2, 20)) {
            let uv = u.concat(&v);
            prop_assert!(uv.len() <= u.len() + v.len());
            let cancels = !u.is_empty() && !v.is_empty()
                && *u.letters().last().unwrap() == v.letters()[0].inverse();
            prop_assert_eq!(uv.len() == u.len() + v.len(), !cancels);
            prop_assert_eq!(abelianize(&uv), &abelianize(&u) + &abelianize(&v));
        }

        #[test]
        fn cyclic_reduce_reassembles(w in arb_word(2, 30)) {
            prop_assume!(!w.is_identity());
            let (g, c) = cyclic_reduce(&w);
            prop_assert_eq!(c.conjugate_by(&g), w.clone());
            let cl = c.letters();
            prop_assert!(cl.len() == 1 || cl[0] != cl[cl.len() - 1].inverse());
        }
    }
}
