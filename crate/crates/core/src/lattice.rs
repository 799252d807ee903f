//! The `ℤ^k` side: gcd classes, lattice-point censuses over balls and boxes, `ζ(k)`,
//! and the limiting densities `1/(t^k ζ(k))` of the `t`-visible points.
//!
//! All counts come from a direct scan of the bounding box. For `L∞` balls there is also
//! a Möbius-inversion count which must agree with the scan wherever both are run.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of lattice points a single scan may visit.
pub const MAX_SCAN_POINTS: u128 = 1 << 34;

/// `ζ(2) = π²/6`.
pub const ZETA_2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// gcd of the coordinates; the zero vector has class `Infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum GcdClass {
    Finite(u64),
    Infinity,
}

impl fmt::Display for GcdClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GcdClass::Finite(t) => write!(f, "{t}"),
            GcdClass::Infinity => write!(f, "inf"),
        }
    }
}

pub fn gcd_class(z: &[i64]) -> GcdClass {
    match z.iter().fold(0u64, |g, c| g.gcd(&c.unsigned_abs())) {
        0 => GcdClass::Infinity,
        g => GcdClass::Finite(g),
    }
}

pub fn is_t_visible(z: &[i64], t: u64) -> bool {
    gcd_class(z) == GcdClass::Finite(t)
}

/// A set `I` of gcd classes: a union of integer intervals, optionally with `Infinity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcdClassSet {
    /// Disjoint, sorted, inclusive; `None` as upper end means unbounded.
    intervals: Vec<(u64, Option<u64>)>,
    infinity: bool,
}

impl GcdClassSet {
    pub fn empty() -> Self {
        GcdClassSet {
            intervals: Vec::new(),
            infinity: false,
        }
    }

    pub fn visible() -> Self {
        Self::exactly(1)
    }

    pub fn exactly(t: u64) -> Self {
        Self::from_intervals(vec![(t, Some(t))], false)
    }

    pub fn listed(ts: impl IntoIterator<Item = u64>) -> Self {
        let set: BTreeSet<u64> = ts.into_iter().collect();
        Self::from_intervals(set.into_iter().map(|t| (t, Some(t))).collect(), false)
    }

    pub fn range(lo: u64, hi: u64) -> Self {
        Self::from_intervals(vec![(lo, Some(hi))], false)
    }

    pub fn at_least(lo: u64) -> Self {
        Self::from_intervals(vec![(lo, None)], false)
    }

    pub fn all_finite() -> Self {
        Self::at_least(1)
    }

    /// Images of the rank-two test elements that are not proper powers: gcd ≥ 2 or zero.
    pub fn non_unit() -> Self {
        Self::at_least(2).with_infinity()
    }

    pub fn with_infinity(mut self) -> Self {
        self.infinity = true;
        self
    }

    fn from_intervals(mut raw: Vec<(u64, Option<u64>)>, infinity: bool) -> Self {
        raw.retain(|&(lo, hi)| lo >= 1 && hi.is_none_or(|h| h >= lo));
        raw.sort();
        let mut merged: Vec<(u64, Option<u64>)> = Vec::new();
        for (lo, hi) in raw {
            if let Some(last) = merged.last_mut() {
                match last.1 {
                    None => continue,
                    Some(h) if lo <= h.saturating_add(1) => {
                        last.1 = hi.map(|x| x.max(h));
                        continue;
                    }
                    _ => {}
                }
            }
            merged.push((lo, hi));
        }
        GcdClassSet {
            intervals: merged,
            infinity,
        }
    }

    pub fn union(&self, other: &GcdClassSet) -> GcdClassSet {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all, self.infinity || other.infinity)
    }

    pub fn contains_finite(&self, t: u64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| t >= lo && hi.is_none_or(|h| t <= h))
    }

    pub fn contains(&self, class: GcdClass) -> bool {
        match class {
            GcdClass::Finite(t) => self.contains_finite(t),
            GcdClass::Infinity => self.infinity,
        }
    }

    pub fn includes_infinity(&self) -> bool {
        self.infinity
    }

    pub fn intervals(&self) -> &[(u64, Option<u64>)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty() && !self.infinity
    }

    pub fn is_finite(&self) -> bool {
        self.intervals.iter().all(|i| i.1.is_some())
    }
}

impl fmt::Display for GcdClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .intervals
            .iter()
            .map(|&(lo, hi)| match hi {
                Some(h) if h == lo => lo.to_string(),
                Some(h) => format!("{lo}..={h}"),
                None => format!("{lo}.."),
            })
            .collect();
        if self.infinity {
            parts.push("inf".into());
        }
        if parts.is_empty() {
            write!(f, "{{}}")
        } else {
            write!(f, "{{{}}}", parts.join(","))
        }
    }
}

impl FromStr for GcdClassSet {
    type Err = Error;

    /// Comma-separated terms: `visible`, `all`, `inf`, `t`, `lo..hi`, `lo..=hi`, `lo..`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |tok: &str| Error::invalid(format!("bad gcd-class term {tok:?} in {s:?}"));
        let num = |tok: &str, part: &str| part.trim().parse::<u64>().map_err(|_| bad(tok));
        let mut intervals = Vec::new();
        let mut infinity = false;
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "visible" => intervals.push((1, Some(1))),
                "all" => intervals.push((1, None)),
                "inf" | "infinity" => infinity = true,
                _ => {
                    if let Some((lo, hi)) = tok.split_once("..=") {
                        intervals.push((num(tok, lo)?, Some(num(tok, hi)?)));
                    } else if let Some((lo, hi)) = tok.split_once("..") {
                        let lo = num(tok, lo)?;
                        if hi.trim().is_empty() {
                            intervals.push((lo, None));
                        } else {
                            let hi = num(tok, hi)?;
                            if hi == 0 {
                                return Err(bad(tok));
                            }
                            intervals.push((lo, Some(hi - 1)));
                        }
                    } else {
                        let t = num(tok, tok)?;
                        intervals.push((t, Some(t)));
                    }
                }
            }
        }
        if intervals.iter().any(|&(lo, _)| lo == 0) {
            return Err(Error::invalid(format!("gcd classes start at 1: {s:?}")));
        }
        let set = GcdClassSet::from_intervals(intervals, infinity);
        if set.is_empty() && !s.trim().is_empty() && s.trim() != "{}" {
            return Err(Error::invalid(format!("gcd-class set {s:?} is empty")));
        }
        Ok(set)
    }
}

/// `ζ(k)` to within `eps`: partial sum plus the mean of the two integral tail bounds.
pub fn zeta(k: u32, eps: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("zeta needs k ≥ 2, got {k}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let eps = eps.max(1e-15);
    let kf = k as f64;
    // The tail error is at most N^{-k}/2.
    let terms = (1.0 / (2.0 * eps)).powf(1.0 / kf).ceil().max(1.0) as u64;
    let mut sum = 0.0f64;
    for n in (1..=terms).rev() {
        sum += (n as f64).powf(-kf);
    }
    let nf = terms as f64;
    let tail = (nf.powf(1.0 - kf) + (nf + 1.0).powf(1.0 - kf)) / (2.0 * (kf - 1.0));
    Ok(sum + tail)
}

/// `Σ_{t≥m} t^{-k}` for `k ≥ 2`, `m ≥ 1`: a direct sum up to 1000, then Euler–Maclaurin,
/// whose first omitted term is below `10^{-20}`.
fn power_tail(k: usize, m: u64) -> f64 {
    const N0: u64 = 1000;
    let kf = k as f64;
    let n = m.max(N0);
    let direct: f64 = (m..n).rev().map(|t| (t as f64).powf(-kf)).sum();
    let nf = n as f64;
    let em = nf.powf(1.0 - kf) / (kf - 1.0) + nf.powf(-kf) / 2.0 + kf * nf.powf(-kf - 1.0) / 12.0
        - kf * (kf + 1.0) * (kf + 2.0) * nf.powf(-kf - 3.0) / 720.0;
    direct + em
}

fn zeta_precise(k: usize) -> f64 {
    static CACHE: [OnceLock<f64>; 64] = [const { OnceLock::new() }; 64];
    match k {
        2 => ZETA_2,
        _ if k < CACHE.len() => *CACHE[k].get_or_init(|| power_tail(k, 1)),
        _ => power_tail(k, 1),
    }
}

/// `ρ_∞(U_t) = 1/(t^k ζ(k))`.
pub fn theoretical_density_ut(k: usize, t: u64) -> Result<f64> {
    if k < 2 || t < 1 {
        return Err(Error::invalid(format!("need k ≥ 2 and t ≥ 1, got k={k}, t={t}")));
    }
    Ok(1.0 / ((t as f64).powi(k as i32) * zeta_precise(k)))
}

/// Smallest `T` with `Σ_{t>T} t^{-k} ≤ T^{1−k}/(k−1) ≤ eps`.
pub fn truncation_bound(k: usize, eps: f64) -> u64 {
    let kf = k as f64;
    (1.0 / (eps * (kf - 1.0))).powf(1.0 / (kf - 1.0)).ceil().max(1.0) as u64
}

/// `Σ_{t∈I} 1/(t^k ζ(k))`, accurate to `eps` (in practice to rounding error).
pub fn gcd_class_set_density(k: usize, set: &GcdClassSet, eps: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("rank must be at least 2, got {k}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let zeta_k = zeta_precise(k);
    let kf = k as f64;
    let mut total = 0.0;
    for &(lo, hi) in set.intervals() {
        total += match hi {
            Some(h) if h - lo < 1000 => (lo..=h).rev().map(|t| (t as f64).powf(-kf)).sum(),
            Some(h) => power_tail(k, lo) - power_tail(k, h.saturating_add(1)),
            None => power_tail(k, lo),
        };
    }
    Ok(total / zeta_k)
}

/// Selector for the `L_p` norm, `1 ≤ p ≤ ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L1,
    L2,
    Lp(f64),
    LInf,
}

impl Norm {
    pub fn from_p(p: f64) -> Result<Norm> {
        if p.is_infinite() && p > 0.0 {
            Ok(Norm::LInf)
        } else if p == 1.0 {
            Ok(Norm::L1)
        } else if p == 2.0 {
            Ok(Norm::L2)
        } else if p > 1.0 && p.is_finite() {
            Ok(Norm::Lp(p))
        } else {
            Err(Error::invalid(format!("norm exponent must lie in [1, ∞], got {p}")))
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
            Norm::Lp(p) => p,
            Norm::LInf => f64::INFINITY,
        }
    }

    /// Lebesgue measure of the unit ball in `ℝ^k`.
    pub fn unit_ball_volume(&self, k: usize) -> f64 {
        use statrs::function::gamma::gamma;
        match *self {
            Norm::LInf => 2f64.powi(k as i32),
            _ => {
                let p = self.p();
                (2.0 * gamma(1.0 + 1.0 / p)).powi(k as i32) / gamma(1.0 + k as f64 / p)
            }
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::LInf => write!(f, "inf"),
            n => write!(f, "{}", n.p()),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Norm> {
        match s.trim() {
            "inf" | "infinity" | "max" => Ok(Norm::LInf),
            other => Norm::from_p(
                other
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad norm {other:?}")))?,
            ),
        }
    }
}

/// Integer lattice region to census: a norm ball or an integer box.
#[derive(Debug, Clone)]
enum Shape {
    /// Points with `Σ cost(z_i) ≤ budget`; `cap` bounds `|z_i|` for `L∞`.
    Ball { norm: Norm, budget: f64, cap: i64 },
    Box { lo: Vec<i64>, hi: Vec<i64> },
}

impl Shape {
    fn closed_ball(norm: Norm, r: f64) -> Shape {
        let (budget, cap) = match norm {
            Norm::LInf => (0.0, r.floor() as i64),
            Norm::L1 => (r.floor(), r.floor() as i64),
            Norm::L2 => ((r * r).floor(), r.floor() as i64),
            Norm::Lp(p) => (r.powf(p) * (1.0 + 1e-12), r.floor() as i64),
        };
        Shape::Ball { norm, budget, cap }
    }

    fn open_ball(norm: Norm, r: f64) -> Shape {
        let below = |x: f64| x.ceil() - 1.0;
        let (budget, cap) = match norm {
            Norm::LInf => (0.0, below(r) as i64),
            Norm::L1 => (below(r), below(r) as i64),
            Norm::L2 => (below(r * r), below(r) as i64),
            Norm::Lp(p) => (r.powf(p) * (1.0 - 1e-12), below(r) as i64),
        };
        Shape::Ball { norm, budget, cap }
    }

    fn point_bound(&self, k: usize) -> u128 {
        match self {
            Shape::Ball { cap, .. } => (2 * (*cap).max(0) as u128 + 1).saturating_pow(k as u32),
            Shape::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l + 1).max(0) as u128)
                .product(),
        }
    }

    fn max_abs(&self) -> u64 {
        match self {
            Shape::Ball { cap, .. } => (*cap).max(0) as u64,
            Shape::Box { lo, hi } => lo
                .iter()
                .chain(hi)
                .map(|c| c.unsigned_abs())
                .max()
                .unwrap_or(0),
        }
    }
}

fn cost(norm: Norm, z: i64) -> f64 {
    let a = z.unsigned_abs() as f64;
    match norm {
        Norm::LInf => 0.0,
        Norm::L1 => a,
        Norm::L2 => a * a,
        Norm::Lp(p) => a.powf(p),
    }
}

/// Largest `|z|` whose cost fits in `left`.
fn coord_cap(norm: Norm, left: f64, cap: i64) -> i64 {
    if left < 0.0 {
        return -1;
    }
    let c = match norm {
        Norm::LInf => cap,
        Norm::L1 => left.floor() as i64,
        Norm::L2 => {
            let mut c = left.sqrt().floor() as i64;
            while (c as f64) * (c as f64) > left {
                c -= 1;
            }
            while ((c + 1) as f64) * ((c + 1) as f64) <= left {
                c += 1;
            }
            c
        }
        Norm::Lp(p) => {
            let mut c = left.powf(1.0 / p).floor() as i64;
            while c > 0 && (c as f64).powf(p) > left {
                c -= 1;
            }
            while ((c + 1) as f64).powf(p) <= left {
                c += 1;
            }
            c
        }
    };
    c.min(cap)
}

/// Histogram of gcd classes over the shape: index `g` counts points with gcd `g`,
/// index 0 counts the origin.
fn census(k: usize, shape: &Shape, max_points: u128) -> Result<Vec<u64>> {
    if k < 1 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let points = shape.point_bound(k);
    if points > max_points {
        return Err(Error::Budget {
            what: format!("lattice scan in dimension {k}"),
            needed: points,
            budget: max_points,
            unit: "points",
        });
    }
    let len = shape.max_abs() as usize + 1;

    fn rec(
        k: usize,
        depth: usize,
        g: u64,
        left: f64,
        shape: &Shape,
        hist: &mut [u64],
    ) {
        let (lo, hi) = match shape {
            Shape::Ball { norm, cap, .. } => {
                let c = coord_cap(*norm, left, *cap);
                (-c, c)
            }
            Shape::Box { lo, hi } => (lo[depth], hi[depth]),
        };
        if lo > hi {
            return;
        }
        if depth + 1 == k {
            for z in lo..=hi {
                hist[g.gcd(&z.unsigned_abs()) as usize] += 1;
            }
            return;
        }
        for z in lo..=hi {
            let next_left = match shape {
                Shape::Ball { norm, .. } => left - cost(*norm, z),
                Shape::Box { .. } => 0.0,
            };
            rec(k, depth + 1, g.gcd(&z.unsigned_abs()), next_left, shape, hist);
        }
    }

    let (lo0, hi0, budget0) = match shape {
        Shape::Ball { norm, budget, cap } => {
            let c = coord_cap(*norm, *budget, *cap);
            (-c, c, *budget)
        }
        Shape::Box { lo, hi } => (lo[0], hi[0], 0.0),
    };
    if lo0 > hi0 {
        return Ok(vec![0; len]);
    }
    let hist = (lo0..=hi0)
        .into_par_iter()
        .fold(
            || vec![0u64; len],
            |mut hist, z0| {
                let z0_abs = z0.unsigned_abs();
                if k == 1 {
                    hist[z0_abs as usize] += 1;
                } else {
                    let left = match shape {
                        Shape::Ball { norm, .. } => budget0 - cost(*norm, z0),
                        Shape::Box { .. } => 0.0,
                    };
                    rec(k, 1, z0_abs, left, shape, &mut hist);
                }
                hist
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(hist)
}

fn class_of_index(g: usize) -> GcdClass {
    if g == 0 {
        GcdClass::Infinity
    } else {
        GcdClass::Finite(g as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BallCount {
    pub hits: u64,
    pub total: u64,
}

impl BallCount {
    pub fn density(&self) -> BigRational {
        BigRational::new(BigInt::from(self.hits), BigInt::from(self.total))
    }

    pub fn density_f64(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

fn tally(hist: &[u64], set: &GcdClassSet) -> BallCount {
    let mut hits = 0;
    for (g, &c) in hist.iter().enumerate() {
        if set.contains(class_of_index(g)) {
            hits += c;
        }
    }
    BallCount {
        hits,
        total: hist.iter().sum(),
    }
}

/// Points of the closed ball `‖z‖_p ≤ r` by gcd class, including the origin under `Infinity`.
pub fn gcd_census_in_ball(k: usize, norm: Norm, r: f64) -> Result<Vec<(GcdClass, u64)>> {
    let hist = census(k, &Shape::closed_ball(norm, check_radius(r)?), MAX_SCAN_POINTS)?;
    Ok(hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(g, &c)| (class_of_index(g), c))
        .collect())
}

fn check_radius(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be finite and nonnegative, got {r}")));
    }
    Ok(r)
}

/// Exact counts over the closed ball `‖z‖_p ≤ r` by direct scan.
pub fn count_in_ball(k: usize, norm: Norm, r: f64, set: &GcdClassSet) -> Result<BallCount> {
    count_in_ball_limited(k, norm, r, set, MAX_SCAN_POINTS)
}

pub fn count_in_ball_limited(
    k: usize,
    norm: Norm,
    r: f64,
    set: &GcdClassSet,
    max_points: u128,
) -> Result<BallCount> {
    let hist = census(k, &Shape::closed_ball(norm, check_radius(r)?), max_points)?;
    Ok(tally(&hist, set))
}

/// Möbius function on `0..=n` by a linear sieve.
pub fn mobius_table(n: usize) -> Vec<i8> {
    let mut mu = vec![0i8; n + 1];
    if n >= 1 {
        mu[1] = 1;
    }
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            if i * p > n {
                break;
            }
            composite[i * p] = true;
            if i % p == 0 {
                mu[i * p] = 0;
                break;
            }
            mu[i * p] = -mu[i];
        }
    }
    mu
}

/// Same counts as [`count_in_ball`] for `L∞` balls, via
/// `#{gcd = t} = Σ_d μ(d) ((2⌊r/(td)⌋+1)^k − 1)`. Runs in `O(r log r)`.
pub fn count_in_linf_ball_mobius(k: usize, r: u64, set: &GcdClassSet) -> Result<BallCount> {
    if k < 1 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let side = 2 * r as u128 + 1;
    let total = side
        .checked_pow(k as u32)
        .filter(|&t| t <= u64::MAX as u128)
        .ok_or_else(|| Error::invalid(format!("(2r+1)^k overflows for r={r}, k={k}")))?;
    let mu = mobius_table(r as usize);
    let class_count = |t: u64| -> i128 {
        let mut s: i128 = 0;
        let mut d = 1u64;
        while t * d <= r {
            let m = mu[d as usize];
            if m != 0 {
                let q = r / (t * d);
                s += m as i128 * ((2 * q as i128 + 1).pow(k as u32) - 1);
            }
            d += 1;
        }
        s
    };
    let mut hits: i128 = 0;
    for &(lo, hi) in set.intervals() {
        let hi = hi.unwrap_or(u64::MAX).min(r);
        for t in lo..=hi {
            hits += class_count(t);
        }
    }
    if set.includes_infinity() {
        hits += 1;
    }
    Ok(BallCount {
        hits: hits as u64,
        total: total as u64,
    })
}

/// Even visible points (`‖z‖₁` even, gcd 1) in the `L∞` ball of radius `r`, `k = 2`.
/// Returns the exact fraction and its limit `1/(3ζ(2)) = 2/π²`.
pub fn even_visible_density(k: usize, r: f64) -> Result<(BallCount, f64)> {
    if k != 2 {
        return Err(Error::invalid(format!("even visible density is defined for k = 2, got {k}")));
    }
    let r = check_radius(r)?.floor() as i64;
    if r < 1 {
        return Err(Error::invalid("radius must be at least 1"));
    }
    let hits: u64 = (-r..=r)
        .into_par_iter()
        .map(|x| {
            let xa = x.unsigned_abs();
            // y must have the same parity as x for an even L1 norm
            let start = if (x - (-r)) % 2 == 0 { -r } else { -r + 1 };
            (start..=r)
                .step_by(2)
                .filter(|y| xa.gcd(&y.unsigned_abs()) == 1)
                .count() as u64
        })
        .sum();
    let side = (2 * r + 1) as u64;
    Ok((
        BallCount {
            hits,
            total: side * side,
        },
        2.0 / (std::f64::consts::PI * std::f64::consts::PI),
    ))
}

/// A bounded open region `Ω` of `ℝ^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Open axis-aligned box `Π (lower_i, upper_i)`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Open unit ball of the given norm.
    Ball(Norm),
}

impl Region {
    pub fn volume(&self, k: usize) -> f64 {
        match self {
            Region::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
            Region::Ball(norm) => norm.unit_ball_volume(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCount {
    /// `#(S ∩ rΩ)`
    pub count: u64,
    /// `#(S ∩ rΩ) / r^k`
    pub scaled: f64,
    /// `δ(S) · λ(Ω)`, the limit of `scaled`.
    pub expected: f64,
}

/// Counts points of `S` strictly inside `rΩ`.
pub fn region_count(k: usize, set: &GcdClassSet, r: f64, region: &Region) -> Result<RegionCount> {
    let r = check_radius(r)?;
    if r <= 0.0 {
        return Err(Error::invalid("radius must be positive"));
    }
    let shape = match region {
        Region::Box { lower, upper } => {
            if lower.len() != k || upper.len() != k {
                return Err(Error::invalid(format!("box must have {k} coordinates per corner")));
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
            {
                return Err(Error::invalid("box corners must satisfy lower < upper"));
            }
            Shape::Box {
                lo: lower.iter().map(|l| (l * r).floor() as i64 + 1).collect(),
                hi: upper.iter().map(|u| (u * r).ceil() as i64 - 1).collect(),
            }
        }
        Region::Ball(norm) => Shape::open_ball(*norm, r),
    };
    let hist = census(k, &shape, MAX_SCAN_POINTS)?;
    let count = tally(&hist, set).hits;
    Ok(RegionCount {
        count,
        scaled: count as f64 / r.powi(k as i32),
        expected: gcd_class_set_density(k, set, 1e-12)? * region.volume(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gcd_class_examples() {
        assert_eq!(gcd_class(&[3, 6]), GcdClass::Finite(3));
        assert_eq!(gcd_class(&[1, 0]), GcdClass::Finite(1));
        assert_eq!(gcd_class(&[0, 0]), GcdClass::Infinity);
        assert_eq!(gcd_class(&[-4, 0, 6]), GcdClass::Finite(2));
        assert!(is_t_visible(&[2, 4], 2));
        assert!(!is_t_visible(&[2, 4], 1));
        for t in 1..50 {
            assert!(!is_t_visible(&[0, 0], t));
        }
    }

    #[test]
    fn set_parsing_and_membership() {
        let s: GcdClassSet = "1,2".parse().unwrap();
        assert_eq!(s, GcdClassSet::listed([1, 2]));
        assert_eq!(s, GcdClassSet::range(1, 2));
        let s: GcdClassSet = "2..,inf".parse().unwrap();
        assert_eq!(s, GcdClassSet::non_unit());
        assert!(s.contains(GcdClass::Infinity) && !s.contains(GcdClass::Finite(1)));
        let s: GcdClassSet = "1..=50".parse().unwrap();
        assert!(s.contains_finite(50) && !s.contains_finite(51));
        let s: GcdClassSet = "3..5".parse().unwrap();
        assert_eq!(s, GcdClassSet::range(3, 4));
        assert_eq!("visible".parse::<GcdClassSet>().unwrap(), GcdClassSet::visible());
        assert!("0".parse::<GcdClassSet>().is_err());
        assert!("x".parse::<GcdClassSet>().is_err());
        assert_eq!(GcdClassSet::non_unit().to_string(), "{2..,inf}");
        assert_eq!(
            GcdClassSet::listed([1, 2, 3, 7]).union(&GcdClassSet::at_least(8)),
            GcdClassSet::listed([1, 2, 3]).union(&GcdClassSet::at_least(7))
        );
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2, 1e-9).unwrap() - 1.644934067).abs() < 1e-9);
        assert!((zeta(2, 1e-9).unwrap() - ZETA_2).abs() < 1e-9);
        assert!((zeta(3, 1e-9).unwrap() - 1.202056903).abs() < 1e-9);
        for k in 2..12 {
            assert!(zeta(k, 1e-6).unwrap() >= 1.0);
        }
        assert!(zeta(1, 1e-6).is_err());
        assert!(zeta(2, 0.0).is_err());
    }

    #[test]
    fn zeta_against_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((zeta(4, 1e-12).unwrap() - pi.powi(4) / 90.0).abs() < 1e-12);
        assert!((zeta(6, 1e-12).unwrap() - pi.powi(6) / 945.0).abs() < 1e-12);
    }

    #[test]
    fn ut_densities() {
        let six_over_pi2 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((theoretical_density_ut(2, 1).unwrap() - six_over_pi2).abs() < 1e-15);
        assert!((theoretical_density_ut(2, 2).unwrap() - 0.151982).abs() < 1e-6);
        for k in 2..5 {
            let s: f64 = (1..200_000).map(|t| theoretical_density_ut(k, t).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-5, "k={k}: {s}");
        }
        let apery = 1.202_056_903_159_594_3;
        assert!((theoretical_density_ut(3, 1).unwrap() - 1.0 / apery).abs() < 1e-15);
    }

    #[test]
    fn class_set_densities() {
        let d = gcd_class_set_density(2, &GcdClassSet::listed([1, 2]), 1e-12).unwrap();
        assert!((d - 1.25 / ZETA_2).abs() < 1e-12);
        assert!((d - 0.759908).abs() < 1e-6);
        let all = gcd_class_set_density(3, &GcdClassSet::all_finite(), 1e-12).unwrap();
        assert!((all - 1.0).abs() < 1e-12);
        assert_eq!(gcd_class_set_density(2, &GcdClassSet::empty(), 1e-9).unwrap(), 0.0);
        let big = gcd_class_set_density(2, &GcdClassSet::range(1, u64::MAX / 2), 1e-9).unwrap();
        assert!((big - 1.0).abs() < 1e-9);
        let head = gcd_class_set_density(2, &GcdClassSet::range(1, 50), 1e-12).unwrap();
        let tail = gcd_class_set_density(2, &GcdClassSet::at_least(51), 1e-12).unwrap();
        assert!((head + tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_ball_counts() {
        let c = count_in_ball(2, Norm::LInf, 2.0, &GcdClassSet::visible()).unwrap();
        assert_eq!(c, BallCount { hits: 16, total: 25 });
        for r in [1.0, 3.0, 7.5, 20.0] {
            for norm in [Norm::L1, Norm::L2, Norm::Lp(3.0), Norm::LInf] {
                let c = count_in_ball(2, norm, r, &GcdClassSet::all_finite()).unwrap();
                assert_eq!(c.hits, c.total - 1);
            }
        }
        let l1 = count_in_ball(2, Norm::L1, 2.0, &GcdClassSet::all_finite()).unwrap();
        assert_eq!(l1.total, 13);
        let l2 = count_in_ball(2, Norm::L2, 5.0, &GcdClassSet::all_finite()).unwrap();
        assert_eq!(l2.total, 81);
        assert!(matches!(
            count_in_ball_limited(2, Norm::LInf, 100.0, &GcdClassSet::visible(), 1000),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn census_matches_pointwise_classification() {
        for (k, norm, r) in [(2, Norm::L2, 9.3), (3, Norm::L1, 6.0), (3, Norm::Lp(1.5), 5.0)] {
            let mut brute = std::collections::BTreeMap::new();
            let ri = r as i64;
            let mut z = vec![-ri; k];
            loop {
                let inside = match norm {
                    Norm::L1 => z.iter().map(|c: &i64| c.abs() as f64).sum::<f64>() <= r,
                    Norm::L2 => z.iter().map(|c| (c * c) as f64).sum::<f64>() <= r * r,
                    Norm::Lp(p) => {
                        z.iter().map(|c| (c.abs() as f64).powf(p)).sum::<f64>() <= r.powf(p) + 1e-9
                    }
                    Norm::LInf => true,
                };
                if inside {
                    *brute.entry(gcd_class(&z)).or_insert(0u64) += 1;
                }
                let mut i = 0;
                while i < k {
                    if z[i] < ri {
                        z[i] += 1;
                        break;
                    }
                    z[i] = -ri;
                    i += 1;
                }
                if i == k {
                    break;
                }
            }
            let census: std::collections::BTreeMap<_, _> =
                gcd_census_in_ball(k, norm, r).unwrap().into_iter().collect();
            assert_eq!(census, brute, "k={k} norm={norm:?}");
        }
    }

    #[test]
    fn mobius_matches_scan() {
        assert_eq!(&mobius_table(10)[1..], &[1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
        let sets = [
            GcdClassSet::visible(),
            GcdClassSet::exactly(2),
            GcdClassSet::listed([1, 2]),
            GcdClassSet::range(1, 50),
            GcdClassSet::non_unit(),
        ];
        for (k, r) in [(2usize, 1u64), (2, 57), (2, 300), (3, 40)] {
            for s in &sets {
                let scan = count_in_ball(k, Norm::LInf, r as f64, s).unwrap();
                let fast = count_in_linf_ball_mobius(k, r, s).unwrap();
                assert_eq!(scan, fast, "k={k} r={r} set={s}");
            }
        }
    }

    #[test]
    fn region_examples() {
        let unit = Region::Ball(Norm::LInf);
        let c = region_count(2, &GcdClassSet::visible(), 2.0, &unit).unwrap();
        assert_eq!(c.count, 8);
        assert_eq!(c.scaled, 2.0);
        let expected = 4.0 * 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((c.expected - expected).abs() < 1e-12);
        let empty = Region::Box {
            lower: vec![0.1, 0.1],
            upper: vec![0.2, 0.2],
        };
        assert_eq!(region_count(2, &GcdClassSet::all_finite(), 3.0, &empty).unwrap().count, 0);
        let bad = Region::Box {
            lower: vec![0.0, 1.0],
            upper: vec![1.0, 0.5],
        };
        assert!(region_count(2, &GcdClassSet::visible(), 3.0, &bad).is_err());
        assert!((Norm::L2.unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((Norm::L1.unit_ball_volume(3) - 8.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn open_ball_excludes_boundary() {
        // r = 5: (3,4) and (5,0) lie on the L2 circle
        let open = region_count(2, &GcdClassSet::all_finite(), 5.0, &Region::Ball(Norm::L2)).unwrap();
        let closed = count_in_ball(2, Norm::L2, 5.0, &GcdClassSet::all_finite()).unwrap();
        assert_eq!(closed.hits - open.count, 12);
    }

    #[test]
    fn even_visible_small() {
        // only (±1, ±1): both-even points are never visible
        let (c, theory) = even_visible_density(2, 2.0).unwrap();
        assert_eq!(c.hits, 4);
        assert_eq!(c.total, 25);
        assert!((theory - 0.202642).abs() < 1e-6);
        assert!(even_visible_density(3, 2.0).is_err());
    }

    #[test]
    fn sl2_generators_preserve_gcd_class() {
        for x in -30i64..=30 {
            for y in -30i64..=30 {
                let g = gcd_class(&[x, y]);
                for (a, b) in [(x + y, y), (x, x + y), (x - y, y), (-y, x)] {
                    assert_eq!(gcd_class(&[a, b]), g);
                }
            }
        }
    }

    #[test]
    fn census_partitions_the_box() {
        for k in 1..=3 {
            let census = gcd_census_in_ball(k, Norm::LInf, 9.0).unwrap();
            let total: u64 = census.iter().map(|(_, c)| c).sum();
            assert_eq!(total, 19u64.pow(k as u32));
        }
    }

    proptest! {
        #[test]
        fn scaling_moves_between_classes(x in -500i64..500, y in -500i64..500, t in 1i64..20) {
            prop_assume!(x != 0 || y != 0);
            prop_assert_eq!(is_t_visible(&[t * x, t * y], t as u64), is_t_visible(&[x, y], 1));
        }
    }
}
