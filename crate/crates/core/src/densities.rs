//! Lattice sets pulled back to `F_k` through the abelianization.
//!
//! For a set `X ⊆ F_k` the series here record the spherical fraction `s(n)` of words of
//! length `n` in `X`, the annular value `Q(n) = (s(n−1) + s(n))/2`, and the ball fraction
//! over lengths `1..=n`. The identity (length 0) is left out of every series.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Budget, Error, Result};
use crate::lattice::{gcd_class, mobius_table, GcdClass, GcdClassSet};
use crate::limbs;
use crate::spectrum::{CountTable, WalkLevels};
use crate::words::{
    abelianize, cyclic_reduce, enumerate_sphere, enumerate_sphere_from, primitive_root,
    sphere_size, Letter, Word,
};

/// Largest sphere the enumeration-based routines will walk.
pub const ENUMERATION_LIMIT: u64 = 20_000_000;

pub fn is_visible_word(w: &Word) -> bool {
    gcd_class(abelianize(w).coords()) == GcdClass::Finite(1)
}

pub fn is_t_visible_word(w: &Word, t: u64) -> bool {
    gcd_class(abelianize(w).coords()) == GcdClass::Finite(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    /// The primitive root maps to a visible point, so `w` lies in a proper retract.
    VisibleRoot,
    /// The primitive root maps to a point with gcd ≥ 2, or to zero.
    NonUnitGcdRoot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestElementVerdict {
    pub is_test: bool,
    pub reason: VerdictReason,
    pub root: Word,
    pub exponent: u32,
    pub root_class: GcdClass,
}

/// Test-element classifier for `F(a, b)`: `w = u^t` is a test element exactly when the
/// abelianized primitive root `u` is not visible.
pub fn is_test_element_rank2(w: &Word) -> Result<TestElementVerdict> {
    if w.rank() != 2 {
        return Err(Error::invalid(format!(
            "test elements are classified only in rank 2, got rank {}",
            w.rank()
        )));
    }
    let (root, exponent) = primitive_root(w)?;
    let root_class = gcd_class(abelianize(&root).coords());
    let is_test = root_class != GcdClass::Finite(1);
    Ok(TestElementVerdict {
        is_test,
        reason: if is_test {
            VerdictReason::NonUnitGcdRoot
        } else {
            VerdictReason::VisibleRoot
        },
        root,
        exponent,
        root_class,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub n: usize,
    /// Words of length `n` in the set.
    pub hits: BigUint,
    pub sphere: BigUint,
    /// `s(n)`
    pub spherical: BigRational,
    /// `Q(n)`, from `n = 2` on.
    pub annular: Option<BigRational>,
    /// Fraction of words of length `1..=n` in the set.
    pub ball: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySeries {
    pub rank: usize,
    pub target: String,
    pub points: Vec<SeriesPoint>,
}

fn frac(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

impl DensitySeries {
    /// `hits[i]` is the number of words of length `i + 1` in the set.
    pub fn from_hits(rank: usize, target: impl Into<String>, hits: Vec<BigUint>) -> DensitySeries {
        let half = BigRational::new(1.into(), 2.into());
        let mut points: Vec<SeriesPoint> = Vec::with_capacity(hits.len());
        let mut ball_hits = BigUint::zero();
        let mut ball_total = BigUint::zero();
        for (i, h) in hits.into_iter().enumerate() {
            let n = i + 1;
            let sphere = sphere_size(rank, n);
            ball_hits += &h;
            ball_total += &sphere;
            let spherical = frac(&h, &sphere);
            let annular = points
                .last()
                .map(|p| (&p.spherical + &spherical) * &half);
            points.push(SeriesPoint {
                n,
                hits: h,
                sphere,
                spherical,
                annular,
                ball: frac(&ball_hits, &ball_total),
            });
        }
        DensitySeries {
            rank,
            target: target.into(),
            points,
        }
    }

    pub fn point(&self, n: usize) -> Option<&SeriesPoint> {
        n.checked_sub(1).and_then(|i| self.points.get(i))
    }

    pub fn n_max(&self) -> usize {
        self.points.len()
    }
}

fn check_table(table: &CountTable, n_max: usize) -> Result<()> {
    if n_max < 1 {
        return Err(Error::invalid("series need n_max ≥ 1"));
    }
    if table.n_max() < n_max {
        return Err(Error::OutOfRange {
            n: n_max,
            lo: 1,
            hi: table.n_max(),
        });
    }
    Ok(())
}

/// Words of length `n` whose image has gcd class in `set`.
fn level_hits(table: &CountTable, n: usize, set: &GcdClassSet) -> BigUint {
    table
        .support(n)
        .iter()
        .filter(|p| {
            let z: Vec<i64> = p.point.iter().map(|&c| c as i64).collect();
            set.contains(gcd_class(&z))
        })
        .map(|p| &p.count * BigUint::from(p.orbit))
        .sum()
}

/// Exact series for the pullback of `∪_{t∈I} U_t`.
pub fn spherical_series(table: &CountTable, set: &GcdClassSet, n_max: usize) -> Result<DensitySeries> {
    check_table(table, n_max)?;
    let hits = (1..=n_max)
        .into_par_iter()
        .map(|n| level_hits(table, n, set))
        .collect();
    Ok(DensitySeries::from_hits(
        table.rank(),
        format!("gcd class in {set}"),
        hits,
    ))
}

fn check_enumeration(k: usize, n: usize) -> Result<()> {
    let size = sphere_size(k, n);
    if size > BigUint::from(ENUMERATION_LIMIT) {
        return Err(Error::Budget {
            what: format!("enumerating the sphere k={k}, n={n}"),
            needed: u128::try_from(size).unwrap_or(u128::MAX),
            budget: ENUMERATION_LIMIT as u128,
            unit: "words",
        });
    }
    Ok(())
}

/// Counts words of the sphere satisfying `pred`, split over first letters.
fn count_sphere<F>(k: usize, n: usize, pred: F) -> u64
where
    F: Fn(&Word) -> bool + Sync,
{
    if n == 0 {
        return enumerate_sphere(k, 0).filter(|w| pred(w)).count() as u64;
    }
    (0..2 * k as u8)
        .into_par_iter()
        .map(|c| {
            enumerate_sphere_from(k, n, Letter::from_code(c))
                .filter(|w| pred(w))
                .count() as u64
        })
        .sum()
}

/// Test-element series by classifying every word of every sphere.
pub fn test_element_series_exact(n_max: usize) -> Result<DensitySeries> {
    if n_max < 1 {
        return Err(Error::invalid("series need n_max ≥ 1"));
    }
    check_enumeration(2, n_max)?;
    let hits = (1..=n_max)
        .map(|n| {
            BigUint::from(count_sphere(2, n, |w| {
                is_test_element_rank2(w).expect("rank 2, nonempty").is_test
            }))
        })
        .collect();
    Ok(DensitySeries::from_hits(2, "test elements (enumerated)", hits))
}

/// Test-element series from the count table: words whose image has gcd ≠ 1, minus the
/// proper powers with a visible primitive root (which are not test elements).
pub fn test_element_series_hybrid(table: &CountTable, n_max: usize, budget: Budget) -> Result<DensitySeries> {
    if table.rank() != 2 {
        return Err(Error::invalid("test elements are classified only in rank 2"));
    }
    check_table(table, n_max)?;
    let cv = cyclically_reduced_visible_counts(2, n_max / 2, budget)?;
    let non_unit = GcdClassSet::non_unit();
    let hits = (1..=n_max)
        .into_par_iter()
        .map(|n| level_hits(table, n, &non_unit) - powers_over_cores(2, n, |l| cv[l].clone()))
        .collect();
    Ok(DensitySeries::from_hits(2, "test elements (hybrid)", hits))
}

/// `CV(L)` for `L = 0..=l_max`: cyclically reduced words of length `L` with visible image.
/// Index 0 is zero.
pub fn cyclically_reduced_visible_counts(k: usize, l_max: usize, budget: Budget) -> Result<Vec<BigUint>> {
    let mut out = vec![BigUint::zero()];
    if l_max == 0 {
        return Ok(out);
    }
    // Signed generator permutations act transitively on first letters, so count
    // words starting with a_1 and multiply by 2k.
    let first = Letter::new(1, true);
    let mut walk = WalkLevels::new(k, l_max, Some(first), budget)?;
    let closing = first.inverse().code();
    let mult = BigUint::from(2 * k);
    loop {
        let l = walk.level();
        let mut acc = BigUint::zero();
        walk.for_each_point(l, |z, cell| {
            if gcd_class(z) != GcdClass::Finite(1) {
                return;
            }
            let all = walk.marginal_at(cell);
            if limbs::is_zero(all) {
                return;
            }
            acc += limbs::to_biguint(all) - limbs::to_biguint(walk.layer_at(closing, cell));
        });
        out.push(acc * &mult);
        if l == l_max {
            break;
        }
        walk.step();
    }
    Ok(out)
}

/// `(2k−1)^L + (k−1)(−1)^L + k`: the trace of the `L`-th power of the transfer matrix.
pub fn cyclically_reduced_count(k: usize, l: usize) -> BigUint {
    if l == 0 {
        return BigUint::one();
    }
    let base = BigInt::from(num_traits::pow(BigUint::from(2 * k - 1), l));
    let sign = if l.is_multiple_of(2) { 1 } else { -1 };
    let v = base + BigInt::from(sign * (k as i64 - 1)) + BigInt::from(k);
    v.to_biguint().expect("positive")
}

/// Cyclically reduced words of length `L` that are not proper powers (Möbius inversion).
pub fn primitive_cyclic_count(k: usize, l: usize) -> BigUint {
    let mu = mobius_table(l);
    let mut total = BigInt::zero();
    for d in (1..=l).filter(|&d| l.is_multiple_of(d)) {
        let term = BigInt::from(cyclically_reduced_count(k, l / d));
        match mu[d] {
            1 => total += term,
            -1 => total -= term,
            _ => {}
        }
    }
    debug_assert!(!total.is_negative());
    total.to_biguint().expect("nonnegative")
}

/// Reduced conjugators `g` of length `m` that keep `g c^t g⁻¹` reduced for a fixed
/// cyclically reduced `c`: the last letter of `g` avoids `c_first⁻¹` and `c_last`.
fn conjugator_count(k: usize, m: usize) -> BigUint {
    if m == 0 {
        BigUint::one()
    } else {
        BigUint::from(2 * k - 2) * num_traits::pow(BigUint::from(2 * k - 1), m - 1)
    }
}

/// `Σ_{t≥2} Σ_{2m + tL = n} conjugators(m) · cores(L)`: words `g c^t g⁻¹` of length `n`
/// with `c` drawn from the per-length core counts.
fn powers_over_cores(k: usize, n: usize, cores: impl Fn(usize) -> BigUint) -> BigUint {
    let mut total = BigUint::zero();
    for t in 2..=n {
        for l in 1..=n / t {
            let rest = n - t * l;
            if rest.is_multiple_of(2) {
                total += conjugator_count(k, rest / 2) * cores(l);
            }
        }
    }
    total
}

/// Proper powers of length `n`, counted structurally from primitive cyclic cores.
pub fn proper_power_count(k: usize, n: usize) -> BigUint {
    powers_over_cores(k, n, |l| primitive_cyclic_count(k, l))
}

/// Proper powers of length `n` by enumerating the sphere.
pub fn proper_power_count_enumerated(k: usize, n: usize) -> Result<u64> {
    check_enumeration(k, n)?;
    if n == 0 {
        return Ok(0);
    }
    Ok(count_sphere(k, n, |w| {
        primitive_root(w).map(|(_, t)| t >= 2).unwrap_or(false)
    }))
}

/// Cyclically reduced, visible words of length `l`, by enumeration.
pub fn cyclically_reduced_visible_enumerated(k: usize, l: usize) -> Result<u64> {
    check_enumeration(k, l)?;
    if l == 0 {
        return Ok(0);
    }
    Ok(count_sphere(k, l, |w| {
        cyclic_reduce(w).0.is_identity() && is_visible_word(w)
    }))
}

/// Liminf/limsup bounds on the ball density of a set whose annular density is `delta`.
pub fn compare_bounds(k: usize, delta: f64) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::invalid(format!("rank must be at least 2, got {k}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    let c = (4.0 * k as f64 - 4.0) / (2.0 * k as f64 - 1.0).powi(2);
    Ok((c * delta, 1.0 - c * (1.0 - delta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedGcd {
    pub n: usize,
    /// `T'_n`: mean gcd over the sphere, with the zero image contributing 0.
    pub sphere_mean: BigRational,
    /// `T_n = (T'_{n−1} + T'_n)/2`, from `n = 2` on.
    pub annular: Option<BigRational>,
}

pub fn expected_gcd_series(table: &CountTable, n_max: usize) -> Result<Vec<ExpectedGcd>> {
    check_table(table, n_max)?;
    let half = BigRational::new(1.into(), 2.into());
    let means: Vec<BigRational> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let num: BigUint = table
                .support(n)
                .iter()
                .map(|p| {
                    let z: Vec<i64> = p.point.iter().map(|&c| c as i64).collect();
                    let t = match gcd_class(&z) {
                        GcdClass::Finite(t) => t,
                        GcdClass::Infinity => 0,
                    };
                    &p.count * BigUint::from(p.orbit) * BigUint::from(t)
                })
                .sum();
            frac(&num, table.sphere(n))
        })
        .collect();
    Ok(means
        .iter()
        .enumerate()
        .map(|(i, m)| ExpectedGcd {
            n: i + 1,
            sphere_mean: m.clone(),
            annular: (i > 0).then(|| (&means[i - 1] + m) * &half),
        })
        .collect())
}
