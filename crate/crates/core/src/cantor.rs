//! Middle-thirds Cantor sets `C_n` and their normalised measures.

use num_bigint::BigUint;

use crate::interval::Interval;

/// Decides `x ∈ C_n` exactly from the binary expansion of `x`.
///
/// Points with two ternary expansions are members if either survives, so the
/// endpoints of kept intervals belong to every level. A point within two ulps
/// of such an endpoint is treated as the endpoint, which makes `2.0 / 3.0`
/// (whose nearest double sits just inside the removed gap) a member.
pub fn membership(x: f64, n: u32) -> bool {
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    if x == 1.0 || x == 0.0 {
        return true;
    }
    let tol = 2.0 * ulp(x);
    let (mant, shift) = decompose(x);
    if shift <= 120 {
        digits_u128(mant as u128, shift, n, tol)
    } else {
        digits_big(BigUint::from(mant), shift, n, tol)
    }
}

fn ulp(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1) - x
}

/// `x = mant · 2^{-shift}` with `mant` odd.
fn decompose(x: f64) -> (u64, u32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    while mant & 1 == 0 {
        mant >>= 1;
        e += 1;
    }
    (mant, (-e) as u32)
}

fn digits_u128(mut r: u128, shift: u32, n: u32, tol: f64) -> bool {
    let one = 1u128 << shift;
    let mut scale = 1.0;
    for _ in 0..n {
        scale /= 3.0;
        r *= 3;
        let d = r >> shift;
        r &= one - 1;
        if d == 1 {
            let frac = r as f64 / one as f64;
            return r == 0 || frac.min(1.0 - frac) * scale <= tol;
        }
        if r == 0 {
            return true;
        }
    }
    true
}

fn digits_big(mut r: BigUint, shift: u32, n: u32, tol: f64) -> bool {
    let one = BigUint::from(1u8) << shift;
    let three = BigUint::from(3u8);
    let mut scale = 1.0;
    for _ in 0..n {
        scale /= 3.0;
        r *= &three;
        let d = &r >> shift;
        r %= &one;
        if d == BigUint::from(1u8) {
            if r == BigUint::ZERO {
                return true;
            }
            // Anything this small relative to 2^shift is far below the tolerance
            // unless the remainder is almost exactly 0 or 1.
            let bits = r.bits() as i64 - shift as i64;
            let frac = 2f64.powi(bits.max(-1074) as i32);
            let near_one = (&one - &r).bits() as i64 - shift as i64;
            let gap = 2f64.powi(near_one.max(-1074) as i32);
            return frac.min(gap) * scale <= tol;
        }
        if r == BigUint::ZERO {
            return true;
        }
    }
    true
}

/// The `2^n` intervals of `C_n`, left to right.
pub fn level_intervals(n: u32) -> Vec<Interval> {
    assert!(n <= 40, "Cantor level {n} is too deep to enumerate");
    let len = 3f64.powi(-(n as i32));
    let count = 1usize << n;
    let pow3 = 3u64.pow(n.min(40));
    (0..count)
        .map(|i| {
            // Binary digits of i select ternary digit 0 or 2, most significant first.
            let mut num = 0u64;
            for k in 0..n {
                if (i >> (n - 1 - k)) & 1 == 1 {
                    num += 2 * 3u64.pow(n - 1 - k);
                }
            }
            let lo = num as f64 / pow3 as f64;
            Interval::new(lo, lo + len)
        })
        .collect()
}

/// Midpoints of the level-`depth` cells.
pub fn cell_midpoints(depth: u32) -> Vec<f64> {
    let half = 0.5 * 3f64.powi(-(depth as i32));
    level_intervals(depth).iter().map(|iv| iv.lo + half).collect()
}

/// CDF of the normalised measure on `C_n`.
pub fn level_cdf(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut y = x;
    let mut acc = 0.0;
    let mut w = 1.0;
    for _ in 0..n {
        let y3 = 3.0 * y;
        w *= 0.5;
        if y3 < 1.0 {
            y = y3;
        } else if y3 < 2.0 {
            return acc + w;
        } else {
            acc += w;
            y = y3 - 2.0;
        }
    }
    acc + w * y.clamp(0.0, 1.0)
}

/// The Cantor function.
pub fn limit_cdf(x: f64) -> f64 {
    level_cdf(x, 60)
}
