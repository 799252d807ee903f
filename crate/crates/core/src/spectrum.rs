//! Exact distribution of the abelianization over spheres of `F_k`.
//!
//! `N_n(z)` is the number of reduced words of length `n` whose image in `ℤ^k` is `z`.
//! It is computed by a transfer recurrence over states `(z, last letter)`:
//!
//! ```text
//! N_n(z, x) = Σ_{y ≠ x⁻¹} N_{n−1}(z − e(x), y) = M_{n−1}(z − e(x)) − N_{n−1}(z − e(x), x⁻¹)
//! ```
//!
//! where `M` is the marginal over last letters. The working levels live in a dense box
//! of fixed-width limbs; the finished marginals are kept only on the fundamental domain
//! of the signed-permutation symmetry (`z_1 ≥ … ≥ z_k ≥ 0`) as big integers.

use std::collections::HashMap;
use std::io::{self, Write};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Budget, Error, Result};
use crate::limbs;
use crate::words::{abelianize, enumerate_sphere, sphere_size, ExponentVector, Letter};

/// Dense DP state for one level of the non-backtracking walk.
pub(crate) struct WalkLevels {
    k: usize,
    n_max: usize,
    radius: i64,
    strides: Vec<usize>,
    limbs: usize,
    level: usize,
    layers: Vec<Vec<u64>>,
    scratch: Vec<Vec<u64>>,
    marginal: Vec<u64>,
}

impl WalkLevels {
    pub(crate) fn memory_estimate(k: usize, n_max: usize) -> Option<u128> {
        let width = 2 * (n_max as u128 + 1) + 1;
        let cells = width.checked_pow(k as u32)?;
        let limbs = limbs::limbs_for_bits(sphere_size(k, n_max).bits()) as u128;
        cells.checked_mul(limbs * 8 * (4 * k as u128 + 1))
    }

    /// State at level 1. With `start = Some(x)` only walks beginning with `x` are counted.
    pub(crate) fn new(k: usize, n_max: usize, start: Option<Letter>, budget: Budget) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("rank must be at least 2, got {k}")));
        }
        if n_max < 1 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        let needed = Self::memory_estimate(k, n_max).unwrap_or(u128::MAX);
        budget.check(&format!("count table for k={k}, n_max={n_max}"), needed)?;

        let radius = n_max as i64 + 1;
        let width = 2 * radius as usize + 1;
        let mut strides = vec![1usize; k];
        for i in (0..k - 1).rev() {
            strides[i] = strides[i + 1] * width;
        }
        let cells = strides[0] * width;
        let limbs = limbs::limbs_for_bits(sphere_size(k, n_max).bits());

        let mut walk = WalkLevels {
            k,
            n_max,
            radius,
            strides,
            limbs,
            level: 1,
            layers: vec![vec![0u64; cells * limbs]; 2 * k],
            scratch: vec![vec![0u64; cells * limbs]; 2 * k],
            marginal: vec![0u64; cells * limbs],
        };
        for code in 0..2 * k as u8 {
            if start.is_some_and(|s| s.code() != code) {
                continue;
            }
            let l = Letter::from_code(code);
            let mut z = vec![0i64; k];
            z[l.generator() - 1] = l.sign();
            let c = walk.cell(&z);
            walk.layers[code as usize][c * limbs] = 1;
            walk.marginal[c * limbs] = 1;
        }
        Ok(walk)
    }

    pub(crate) fn level(&self) -> usize {
        self.level
    }

    pub(crate) fn cell(&self, z: &[i64]) -> usize {
        z.iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c + self.radius) as usize * s)
            .sum()
    }

    fn offset(&self, code: usize) -> isize {
        let l = Letter::from_code(code as u8);
        l.sign() as isize * self.strides[l.generator() - 1] as isize
    }

    /// Flat cell range holding every cell with `|z_1| ≤ n`.
    fn active_range(&self, n: usize) -> std::ops::Range<usize> {
        let lo = (self.radius as usize - n) * self.strides[0];
        let hi = (self.radius as usize + n + 1) * self.strides[0];
        lo..hi
    }

    pub(crate) fn step(&mut self) {
        assert!(self.level < self.n_max, "walk already at n_max");
        let n = self.level + 1;
        let range = self.active_range(n);
        let limbs = self.limbs;
        let offsets: Vec<isize> = (0..2 * self.k).map(|c| self.offset(c)).collect();
        let marginal = &self.marginal;
        let layers = &self.layers;

        self.scratch
            .par_iter_mut()
            .enumerate()
            .for_each(|(code, out)| {
                let off = offsets[code];
                let back = &layers[code ^ 1];
                for i in range.clone() {
                    let src = (i as isize - off) as usize;
                    let s = src * limbs;
                    limbs::sub_into(
                        &mut out[i * limbs..(i + 1) * limbs],
                        &marginal[s..s + limbs],
                        &back[s..s + limbs],
                    );
                }
            });
        std::mem::swap(&mut self.layers, &mut self.scratch);

        let layers = &self.layers;
        let chunk_cells = 4096;
        self.marginal[range.start * limbs..range.end * limbs]
            .par_chunks_mut(chunk_cells * limbs)
            .enumerate()
            .for_each(|(ci, chunk)| {
                chunk.fill(0);
                let base = range.start + ci * chunk_cells;
                for (j, acc) in chunk.chunks_mut(limbs).enumerate() {
                    let s = (base + j) * limbs;
                    for layer in layers {
                        limbs::add_assign(acc, &layer[s..s + limbs]);
                    }
                }
            });
        self.level = n;
    }

    pub(crate) fn marginal_at(&self, cell: usize) -> &[u64] {
        &self.marginal[cell * self.limbs..(cell + 1) * self.limbs]
    }

    pub(crate) fn layer_at(&self, code: u8, cell: usize) -> &[u64] {
        &self.layers[code as usize][cell * self.limbs..(cell + 1) * self.limbs]
    }

    /// Visits every lattice point of `[−r, r]^k` with its flat cell index.
    pub(crate) fn for_each_point(&self, r: usize, mut f: impl FnMut(&[i64], usize)) {
        let r = r as i64;
        let mut z = vec![-r; self.k];
        loop {
            f(&z, self.cell(&z));
            let mut i = self.k;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if z[i] < r {
                    z[i] += 1;
                    break;
                }
                z[i] = -r;
            }
        }
    }
}

/// Sorted absolute values, largest first.
pub(crate) fn canonical(z: &[i64]) -> Vec<u32> {
    let mut a: Vec<u32> = z.iter().map(|c| c.unsigned_abs() as u32).collect();
    a.sort_unstable_by(|x, y| y.cmp(x));
    a
}

/// Number of distinct signed permutations of a canonical point.
pub(crate) fn orbit_size(a: &[u32]) -> u64 {
    let k = a.len() as u64;
    let mut size: u64 = (1..=k).product();
    let mut i = 0;
    while i < a.len() {
        let mut j = i;
        while j < a.len() && a[j] == a[i] {
            j += 1;
        }
        size /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    let nonzero = a.iter().filter(|&&c| c != 0).count() as u32;
    size << nonzero
}

/// Every point of `ℤ^k` in the signed-permutation orbit of `a`.
pub(crate) fn expand_orbit(a: &[u32]) -> Vec<Vec<i64>> {
    let mut perm: Vec<u32> = a.to_vec();
    perm.sort_unstable();
    let mut out = Vec::new();
    loop {
        let nonzero: Vec<usize> = (0..perm.len()).filter(|&i| perm[i] != 0).collect();
        for mask in 0u64..(1u64 << nonzero.len()) {
            let mut z: Vec<i64> = perm.iter().map(|&c| c as i64).collect();
            for (bit, &i) in nonzero.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    z[i] = -z[i];
                }
            }
            out.push(z);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out
}

fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Canonical points with coordinate sum at most `max_sum`, in lexicographic order.
/// With `parity = Some(p)` only sums congruent to `p` mod 2 are kept.
pub(crate) fn canonical_points(k: usize, max_sum: usize, parity: Option<usize>) -> Vec<Vec<u32>> {
    fn rec(
        prefix: &mut Vec<u32>,
        k: usize,
        cap: u32,
        left: u32,
        parity: Option<usize>,
        max_sum: u32,
        out: &mut Vec<Vec<u32>>,
    ) {
        if prefix.len() == k {
            let sum = max_sum - left;
            if parity.is_none_or(|p| sum as usize % 2 == p) {
                out.push(prefix.clone());
            }
            return;
        }
        for v in 0..=cap.min(left) {
            prefix.push(v);
            rec(prefix, k, v, left - v, parity, max_sum, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let m = max_sum as u32;
    rec(&mut Vec::with_capacity(k), k, m, m, parity, m, &mut out);
    out
}

/// One retained point of a level: a canonical representative and its count.
#[derive(Debug, Clone)]
pub struct SupportPoint {
    pub point: Vec<u32>,
    pub orbit: u64,
    pub count: BigUint,
}

/// Exact counts `N_n(z)` for every `n ≤ n_max`.
#[derive(Debug, Clone)]
pub struct CountTable {
    rank: usize,
    n_max: usize,
    levels: Vec<Vec<SupportPoint>>,
    spheres: Vec<BigUint>,
}

pub fn build_count_table(k: usize, n_max: usize) -> Result<CountTable> {
    build_count_table_with_budget(k, n_max, Budget::default())
}

pub fn build_count_table_with_budget(k: usize, n_max: usize, budget: Budget) -> Result<CountTable> {
    let mut walk = WalkLevels::new(k, n_max, None, budget)?;
    let mut levels = Vec::with_capacity(n_max + 1);
    levels.push(vec![SupportPoint {
        point: vec![0; k],
        orbit: 1,
        count: BigUint::from(1u32),
    }]);
    loop {
        let n = walk.level();
        let retained: Vec<SupportPoint> = canonical_points(k, n, Some(n % 2))
            .into_iter()
            .filter_map(|point| {
                let z: Vec<i64> = point.iter().map(|&c| c as i64).collect();
                let raw = walk.marginal_at(walk.cell(&z));
                (!limbs::is_zero(raw)).then(|| SupportPoint {
                    orbit: orbit_size(&point),
                    count: limbs::to_biguint(raw),
                    point,
                })
            })
            .collect();
        levels.push(retained);
        if n == n_max {
            break;
        }
        walk.step();
    }
    Ok(CountTable {
        rank: k,
        n_max,
        levels,
        spheres: (0..=n_max).map(|n| sphere_size(k, n)).collect(),
    })
}

impl CountTable {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn check_level(&self, n: usize, lo: usize) -> Result<()> {
        if n < lo || n > self.n_max {
            return Err(Error::OutOfRange {
                n,
                lo,
                hi: self.n_max,
            });
        }
        Ok(())
    }

    pub fn sphere(&self, n: usize) -> &BigUint {
        &self.spheres[n]
    }

    /// `N_n(z)`; zero off the support.
    pub fn count(&self, n: usize, z: &ExponentVector) -> Result<BigUint> {
        self.check_level(n, 0)?;
        if z.rank() != self.rank {
            return Err(Error::invalid(format!(
                "point {z} does not have rank {}",
                self.rank
            )));
        }
        let a = canonical(z.coords());
        let level = &self.levels[n];
        Ok(level
            .binary_search_by(|p| p.point.cmp(&a))
            .map(|i| level[i].count.clone())
            .unwrap_or_default())
    }

    /// Nonzero counts of level `n`, one representative per symmetry orbit.
    pub fn support(&self, n: usize) -> &[SupportPoint] {
        &self.levels[n]
    }

    /// Every nonzero `(z, N_n(z))`, orbits expanded.
    pub fn entries(&self, n: usize) -> Vec<(ExponentVector, BigUint)> {
        let mut out: Vec<(ExponentVector, BigUint)> = self.levels[n]
            .iter()
            .flat_map(|p| {
                expand_orbit(&p.point)
                    .into_iter()
                    .map(move |z| (ExponentVector(z), p.count.clone()))
            })
            .collect();
        out.sort();
        out
    }

    /// `Σ_z N_n(z)`, which must equal the sphere size.
    pub fn level_total(&self, n: usize) -> BigUint {
        self.levels[n]
            .iter()
            .map(|p| &p.count * BigUint::from(p.orbit))
            .sum()
    }

    /// CSV rows `n,z_1,…,z_k,count` for level `n`.
    pub fn write_csv<W: Write>(&self, n: usize, mut out: W, header: bool) -> io::Result<()> {
        if header {
            let cols: Vec<String> = (1..=self.rank).map(|i| format!("z_{i}")).collect();
            writeln!(out, "n,{},count", cols.join(","))?;
        }
        for (z, c) in self.entries(n) {
            let coords: Vec<String> = z.coords().iter().map(|c| c.to_string()).collect();
            writeln!(out, "{n},{},{c}", coords.join(","))?;
        }
        Ok(())
    }
}

/// Histogram of the abelianization over the enumerated sphere.
pub fn enumerated_histogram(k: usize, n: usize) -> HashMap<ExponentVector, u64> {
    let mut hist = HashMap::new();
    for w in enumerate_sphere(k, n) {
        *hist.entry(abelianize(&w)).or_insert(0) += 1;
    }
    hist
}

/// First disagreement between the table and the enumeration oracle at level `n`, if any.
pub fn first_oracle_mismatch(table: &CountTable, n: usize) -> Option<(ExponentVector, BigUint, u64)> {
    let hist = enumerated_histogram(table.rank(), n);
    let entries = table.entries(n);
    for (z, c) in &entries {
        let want = hist.get(z).copied().unwrap_or(0);
        if *c != BigUint::from(want) {
            return Some((z.clone(), c.clone(), want));
        }
    }
    if entries.len() != hist.len() {
        let (z, &want) = hist
            .iter()
            .find(|(z, _)| entries.binary_search_by(|(e, _)| e.cmp(z)).is_err())
            .expect("size mismatch implies a missing point");
        return Some((z.clone(), BigUint::zero(), want));
    }
    None
}

fn ratio(num: BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den.clone()))
}

/// `p_n` at the lattice point `z`: the average of the sphere-`(n−1)` and sphere-`n` laws.
pub fn pn_value(table: &CountTable, n: usize, z: &ExponentVector) -> Result<BigRational> {
    table.check_level(n, 2)?;
    let two = BigUint::from(2u32);
    let a = ratio(table.count(n - 1, z)?, &(table.sphere(n - 1) * &two));
    let b = ratio(table.count(n, z)?, &(table.sphere(n) * &two));
    Ok(a + b)
}

fn pn_f64(table: &CountTable, n: usize, point: &[u32]) -> f64 {
    let level_frac = |m: usize| -> f64 {
        let level = &table.levels[m];
        match level.binary_search_by(|p| p.point.as_slice().cmp(point)) {
            Ok(i) => big_ratio_f64(&level[i].count, table.sphere(m)),
            Err(_) => 0.0,
        }
    };
    0.5 * level_frac(n - 1) + 0.5 * level_frac(n)
}

fn big_ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    // Shift both into f64 range before dividing; counts can exceed 1e308 for large tables.
    let shift = den.bits().saturating_sub(900);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// `E‖z‖²` under the uniform law on the sphere of radius `n`.
pub fn second_moment(table: &CountTable, n: usize) -> Result<BigRational> {
    table.check_level(n, 1)?;
    let num: BigUint = table.levels[n]
        .iter()
        .map(|p| {
            let sq: u64 = p.point.iter().map(|&c| c as u64 * c as u64).sum();
            &p.count * BigUint::from(p.orbit) * BigUint::from(sq)
        })
        .sum();
    Ok(ratio(num, table.sphere(n)))
}

/// Limit of `second_moment(n) / (k n)` per coordinate: `1/(k−1)`.
pub fn default_sigma2(k: usize) -> f64 {
    1.0 / (k as f64 - 1.0)
}

/// Isotropic centred Gaussian density with per-coordinate variance `sigma2`.
pub fn normal_density(k: usize, x: &[f64], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    if x.len() != k {
        return Err(Error::invalid(format!("point has {} coordinates, expected {k}", x.len())));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * std::f64::consts::PI * sigma2).powf(-(k as f64) / 2.0) * (-r2 / (2.0 * sigma2)).exp())
}

/// `max_z |n^{k/2} p_n(z) − 𝔫(z/√n)|` over `‖z‖₁ ≤ n`.
pub fn llt_sup_error(table: &CountTable, n: usize, sigma2: f64) -> Result<f64> {
    table.check_level(n, 2)?;
    let k = table.rank();
    let scale = (n as f64).powf(k as f64 / 2.0);
    let root_n = (n as f64).sqrt();
    let mut worst = 0.0f64;
    for point in canonical_points(k, n, None) {
        let x: Vec<f64> = point.iter().map(|&c| c as f64 / root_n).collect();
        let gauss = normal_density(k, &x, sigma2)?;
        let err = (scale * pn_f64(table, n, &point) - gauss).abs();
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `Σ { p_n(z) : ‖z/√n‖₂ ≥ c }`.
pub fn tail_mass(table: &CountTable, n: usize, c: f64) -> Result<BigRational> {
    table.check_level(n, 2)?;
    if !(c >= 0.0) {
        return Err(Error::invalid(format!("c must be nonnegative, got {c}")));
    }
    let threshold = c * c * n as f64;
    let two = BigUint::from(2u32);
    let mut total = BigRational::zero();
    for m in [n - 1, n] {
        let num: BigUint = table.levels[m]
            .iter()
            .filter(|p| {
                let sq: u64 = p.point.iter().map(|&v| v as u64 * v as u64).sum();
                sq as f64 >= threshold
            })
            .map(|p| &p.count * BigUint::from(p.orbit))
            .sum();
        total += ratio(num, &(table.sphere(m) * &two));
    }
    Ok(total)
}
