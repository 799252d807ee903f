//! Fixed-width unsigned integers stored as little-endian `u64` limbs inside flat
//! arrays. The count tables only ever add and subtract, and every value is bounded
//! by the sphere size, so the width is chosen once per table.

use num_bigint::BigUint;

pub(crate) fn limbs_for_bits(bits: u64) -> usize {
    (bits.max(1) as usize).div_ceil(64)
}

#[inline]
pub(crate) fn add_assign(acc: &mut [u64], x: &[u64]) {
    let mut carry = false;
    for (a, &b) in acc.iter_mut().zip(x) {
        let (s1, c1) = a.overflowing_add(b);
        let (s2, c2) = s1.overflowing_add(u64::from(carry));
        *a = s2;
        carry = c1 | c2;
    }
    debug_assert!(!carry, "limb overflow");
}

/// `out = a - b`; requires `a >= b`.
#[inline]
pub(crate) fn sub_into(out: &mut [u64], a: &[u64], b: &[u64]) {
    let mut borrow = false;
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        let (d1, b1) = x.overflowing_sub(y);
        let (d2, b2) = d1.overflowing_sub(u64::from(borrow));
        *o = d2;
        borrow = b1 | b2;
    }
    debug_assert!(!borrow, "limb underflow");
}

#[inline]
pub(crate) fn is_zero(x: &[u64]) -> bool {
    x.iter().all(|&l| l == 0)
}

pub(crate) fn to_biguint(x: &[u64]) -> BigUint {
    let digits: Vec<u32> = x
        .iter()
        .flat_map(|&l| [l as u32, (l >> 32) as u32])
        .collect();
    BigUint::new(digits)
}
