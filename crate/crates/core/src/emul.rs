//! Binary32 arithmetic carried in binary64 registers.
//!
//! Every binary32 value, subnormals included, is a normal binary64 value, and
//! the product of two binary32 values is exact in binary64. An fma is then
//! the exact sum of that product and the addend, recovered with TwoSum, rounded
//! once onto the binary32 grid in integer arithmetic. The results are
//! bit-identical to the hardware, but no binary32 subnormal ever passes
//! through the floating-point unit, where it can cost a hundred cycles.

/// Exact binary64 image of a binary32 value, decoded from its bits.
#[inline]
pub fn widen(x: f32) -> f64 {
    let bits = x.to_bits();
    if bits & 0x7f80_0000 != 0 {
        return x as f64;
    }
    let m = (bits & 0x007f_ffff) as f64 * f64::from_bits((1023u64 - 149) << 52);
    if bits >> 31 != 0 {
        -m
    } else {
        m
    }
}

/// Rounds `hi + lo` to the binary32 grid, where `hi` is the binary64
/// rounding of the exact value and `lo` the remainder. The result is returned
/// in binary64 and is infinite on overflow.
#[inline]
fn round_grid(hi: f64, lo: f64) -> f64 {
    let bits = hi.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    if exp == 0 {
        // only zero can get here: binary32 operands never produce binary64 subnormals
        return hi;
    }
    let m = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let e = exp - 1023;
    // quantum of the binary32 grid around |hi|
    let q = (e - 23).max(-149);
    let shift = q - (e - 52);
    let (kept, up) = if shift >= 54 {
        (0, false)
    } else {
        let kept = m >> shift;
        let rem = m & ((1u64 << shift) - 1);
        let half = 1u64 << (shift - 1);
        let up = if rem != half {
            rem > half
        } else if lo != 0.0 {
            (lo > 0.0) == (hi > 0.0)
        } else {
            kept & 1 == 1
        };
        (kept, up)
    };
    let kept = kept + up as u64;
    let mag = kept as i64 as f64 * f64::from_bits(((q + 1023) as u64) << 52);
    let mag = if mag > f32::MAX as f64 {
        f64::INFINITY
    } else {
        mag
    };
    if hi < 0.0 {
        -mag
    } else {
        mag
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Binary32 product of two widened binary32 values.
#[inline]
pub fn mul(a: f64, b: f64) -> f64 {
    round_grid(a * b, 0.0)
}

/// Binary32 fused multiply-add of widened binary32 values.
#[inline]
pub fn fma(a: f64, b: f64, c: f64) -> f64 {
    let p = a * b;
    if c != 0.0 {
        // a product below a quarter ulp of `c` cannot move it
        let ec = (((c.to_bits() >> 52) & 0x7ff) as i64 - 1023).max(-126);
        if p.abs() < f64::from_bits(((ec - 25 + 1023) as u64) << 52) {
            return c;
        }
    }
    if p == 0.0 {
        // exact zero product: the sign rules of an ordinary addition apply
        return round_grid(p + c, 0.0);
    }
    let (s, e) = two_sum(p, c);
    round_grid(s, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn same(x: f32, y: f64) -> bool {
        let y = y as f32;
        x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())
    }

    fn interesting(rng: &mut ChaCha8Rng) -> f32 {
        let bits: u32 = match rng.gen_range(0..4) {
            0 => rng.gen(),
            1 => rng.gen::<u32>() & 0x807f_ffff,
            2 => (rng.gen::<u32>() & 0x80ff_ffff) | (rng.gen_range(0..8u32) << 24),
            _ => rng.gen::<u32>() & 0x8fff_ffff | 0x3000_0000,
        };
        f32::from_bits(bits)
    }

    #[test]
    fn matches_hardware_on_mixed_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1_000_000 {
            let (a, b, c) = (
                interesting(&mut rng),
                interesting(&mut rng),
                interesting(&mut rng),
            );
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                continue;
            }
            let hw = a.mul_add(b, c);
            assert!(
                same(hw, fma(widen(a), widen(b), widen(c))),
                "fma({a:e}, {b:e}, {c:e})"
            );
            assert!(same(a * b, mul(widen(a), widen(b))), "{a:e} * {b:e}");
        }
    }

    #[test]
    fn ties_and_signed_zeros() {
        let tiny = f32::from_bits(1);
        let cases = [
            (1.0f32, 1.0, f32::EPSILON / 2.0),
            (1.0, 1.0 + f32::EPSILON, f32::EPSILON / 2.0),
            (tiny, 0.5, 0.0),
            (tiny, 1.5, 0.0),
            (tiny, -0.5, -0.0),
            (0.0, -1.0, 0.0),
            (-0.0, 1.0, -0.0),
            (1.0, -1.0, 1.0),
            (f32::MAX, 2.0, -f32::MAX),
            (f32::MAX, 1.0 + f32::EPSILON, 0.0),
        ];
        for (a, b, c) in cases {
            assert!(
                same(a.mul_add(b, c), fma(widen(a), widen(b), widen(c))),
                "fma({a:e}, {b:e}, {c:e})"
            );
        }
        for x in [tiny, -tiny, f32::MIN_POSITIVE, 1.0, -0.0] {
            assert_eq!(widen(x), x as f64);
        }
    }
}
