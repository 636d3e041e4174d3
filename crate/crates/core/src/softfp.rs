//! Bit-exact binary32 kernel.
//!
//! Every machine number handled by the crate is an [`F32`], a binary32 value
//! identified with its bit pattern. Arithmetic is round-to-nearest-even and is
//! delegated to the platform's fused multiply-add (`f32::mul_add`), which Rust
//! guarantees to be a single correctly rounded operation. The test suite checks
//! it against an exact rational oracle.
//!
//! Finite values are also indexed by an *ordinal*: a signed integer that is
//! strictly increasing in the total order of bit patterns, with `-0.0` placed
//! immediately below `+0.0`. Ordinals make binary search over floats and
//! exhaustive enumeration of an interval straightforward.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rational::{self, BigRational};

/// A binary32 value, compared and hashed by bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F32(u32);

const SIGN_MASK: u32 = 0x8000_0000;
const ABS_MASK: u32 = 0x7fff_ffff;
const EXP_MASK: u32 = 0x7f80_0000;
const MANT_MASK: u32 = 0x007f_ffff;

/// Ordinal of the most negative finite value.
pub const MIN_ORDINAL: i64 = -(0x7f7f_ffff_i64) - 1;
/// Ordinal of the largest finite value.
pub const MAX_ORDINAL: i64 = 0x7f7f_ffff;

impl F32 {
    pub const ZERO: F32 = F32(0);
    pub const NEG_ZERO: F32 = F32(SIGN_MASK);
    pub const ONE: F32 = F32(0x3f80_0000);
    pub const MAX: F32 = F32(0x7f7f_ffff);
    pub const MIN: F32 = F32(0xff7f_ffff);
    pub const MIN_SUBNORMAL: F32 = F32(1);

    pub const fn from_bits(bits: u32) -> F32 {
        F32(bits)
    }

    pub const fn to_bits(self) -> u32 {
        self.0
    }

    pub fn from_f32(x: f32) -> F32 {
        F32(x.to_bits())
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub fn is_finite(self) -> bool {
        self.0 & EXP_MASK != EXP_MASK
    }

    pub fn is_zero(self) -> bool {
        self.0 & ABS_MASK == 0
    }

    pub fn is_sign_negative(self) -> bool {
        self.0 & SIGN_MASK != 0
    }

    pub fn abs(self) -> F32 {
        F32(self.0 & ABS_MASK)
    }

    /// Raw biased exponent field.
    pub fn exponent_field(self) -> u32 {
        (self.0 & EXP_MASK) >> 23
    }

    pub fn mantissa_field(self) -> u32 {
        self.0 & MANT_MASK
    }

    /// Position of `self` in the ordered sequence of finite binary32 values.
    ///
    /// `+0.0` has ordinal 0 and `-0.0` has ordinal -1.
    pub fn ordinal(self) -> i64 {
        debug_assert!(self.is_finite(), "ordinal of non-finite value");
        let mag = i64::from(self.0 & ABS_MASK);
        if self.is_sign_negative() {
            -mag - 1
        } else {
            mag
        }
    }

    /// Inverse of [`F32::ordinal`]; `None` outside the finite range.
    pub fn from_ordinal(n: i64) -> Option<F32> {
        if !(MIN_ORDINAL..=MAX_ORDINAL).contains(&n) {
            return None;
        }
        Some(if n >= 0 {
            F32(n as u32)
        } else {
            F32(((-n - 1) as u32) | SIGN_MASK)
        })
    }

    /// Successor in ordinal order (so `next_up(-0.0) == +0.0`).
    pub fn next_up(self) -> Option<F32> {
        F32::from_ordinal(self.ordinal() + 1)
    }

    pub fn next_down(self) -> Option<F32> {
        F32::from_ordinal(self.ordinal() - 1)
    }

    /// Numeric comparison: `-0.0` and `+0.0` compare equal.
    pub fn value_cmp(self, other: F32) -> Ordering {
        self.to_f32()
            .partial_cmp(&other.to_f32())
            .expect("value_cmp on NaN")
    }

    pub fn value_eq(self, other: F32) -> bool {
        self.value_cmp(other) == Ordering::Equal
    }

    pub fn to_rational(self) -> BigRational {
        rational::rational_of_f32(self)
    }

    /// C99 hexadecimal literal without the `f` suffix, e.g. `-0x1.5554d8p-2`.
    pub fn to_hex(self) -> String {
        format_hex(self)
    }
}

impl std::ops::Neg for F32 {
    type Output = F32;

    fn neg(self) -> F32 {
        F32(self.0 ^ SIGN_MASK)
    }
}

impl fmt::Display for F32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_hex(*self))
    }
}

impl fmt::Debug for F32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_hex(*self))
    }
}

impl FromStr for F32 {
    type Err = Error;

    /// Parses a hexadecimal or decimal literal that must be exactly
    /// representable. A trailing `f`/`F` suffix is accepted.
    fn from_str(s: &str) -> Result<F32> {
        let t = s.trim();
        let q = rational::parse_rational(t)?;
        let x = rational::round_to_f32(&q).map_err(|_| Error::NotRepresentable(t.to_string()))?;
        if x.to_rational() != q {
            return Err(Error::NotRepresentable(t.to_string()));
        }
        // A zero literal keeps its written sign.
        if x.is_zero() && t.starts_with('-') {
            return Ok(F32::NEG_ZERO);
        }
        Ok(if x.is_zero() { F32::ZERO } else { x })
    }
}

impl From<f32> for F32 {
    fn from(x: f32) -> F32 {
        F32::from_f32(x)
    }
}

fn format_hex(x: F32) -> String {
    if !x.is_finite() {
        return match (x.mantissa_field(), x.is_sign_negative()) {
            (0, false) => "inf".into(),
            (0, true) => "-inf".into(),
            _ => "nan".into(),
        };
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_zero() {
        return format!("{sign}0x0p+0");
    }
    let (mut mant, exp) = if x.exponent_field() == 0 {
        let m = x.mantissa_field();
        let top = 31 - m.leading_zeros() as i32;
        let shift = 23 - top;
        ((m << shift) & MANT_MASK, -126 - shift)
    } else {
        (x.mantissa_field(), x.exponent_field() as i32 - 127)
    };
    mant <<= 1;
    let mut digits = format!("{mant:06x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x1p{exp:+}")
    } else {
        format!("{sign}0x1.{digits}p{exp:+}")
    }
}

/// Inclusive interval of finite binary32 values, `lo <= hi` numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct F32Interval {
    pub lo: F32,
    pub hi: F32,
}

impl F32Interval {
    pub fn new(lo: F32, hi: F32) -> Result<F32Interval> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite);
        }
        if lo.value_cmp(hi) == Ordering::Greater {
            return Err(Error::Config(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(F32Interval { lo, hi })
    }

    pub fn point(x: F32) -> F32Interval {
        F32Interval { lo: x, hi: x }
    }

    /// Every finite value, zeros of both signs included.
    pub fn full() -> F32Interval {
        F32Interval {
            lo: F32::MIN,
            hi: F32::MAX,
        }
    }

    /// Membership by value.
    pub fn contains(&self, x: F32) -> bool {
        x.is_finite()
            && self.lo.value_cmp(x) != Ordering::Greater
            && x.value_cmp(self.hi) != Ordering::Greater
    }

    pub fn contains_f32(&self, x: f32) -> bool {
        self.lo.to_f32() <= x && x <= self.hi.to_f32()
    }

    pub fn intersect(&self, other: &F32Interval) -> Option<F32Interval> {
        let lo = if self.lo.value_cmp(other.lo) == Ordering::Less {
            other.lo
        } else {
            self.lo
        };
        let hi = if self.hi.value_cmp(other.hi) == Ordering::Greater {
            other.hi
        } else {
            self.hi
        };
        (lo.value_cmp(hi) != Ordering::Greater).then_some(F32Interval { lo, hi })
    }

    /// Smallest ordinal that lies in the interval (a `+0.0` lower endpoint
    /// also admits `-0.0`).
    pub fn first_ordinal(&self) -> i64 {
        if self.lo.is_zero() {
            F32::NEG_ZERO.ordinal()
        } else {
            self.lo.ordinal()
        }
    }

    pub fn last_ordinal(&self) -> i64 {
        if self.hi.is_zero() {
            F32::ZERO.ordinal()
        } else {
            self.hi.ordinal()
        }
    }

    /// Number of bit patterns with value in the interval.
    pub fn count(&self) -> u64 {
        (self.last_ordinal() - self.first_ordinal() + 1) as u64
    }

    pub fn iter(&self) -> impl Iterator<Item = F32> {
        (self.first_ordinal()..=self.last_ordinal()).map(|n| F32::from_ordinal(n).unwrap())
    }

    pub fn to_rational_pair(&self) -> (BigRational, BigRational) {
        (self.lo.to_rational(), self.hi.to_rational())
    }
}

impl fmt::Display for F32Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn check_result(r: f32) -> Result<F32> {
    if r.is_finite() {
        Ok(F32::from_f32(r))
    } else {
        Err(Error::Overflow)
    }
}

/// Correctly rounded product.
pub fn f32_mul(a: F32, b: F32) -> Result<F32> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite);
    }
    check_result(a.to_f32() * b.to_f32())
}

/// Correctly rounded `a*b + c` with a single rounding.
pub fn f32_fma(a: F32, b: F32, c: F32) -> Result<F32> {
    if !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::NonFinite);
    }
    check_result(a.to_f32().mul_add(b.to_f32(), c.to_f32()))
}

/// Gap between the largest binary32 value `<= x` and the smallest one `> x`.
///
/// Above the largest finite value the binade spacing `2^104` is returned.
pub fn ulp_of_real(x: &BigRational) -> Result<BigRational> {
    let below = rational::floor_f32(x)?;
    let below = if below.is_zero() { F32::ZERO } else { below };
    match below.next_up() {
        Some(above) => Ok(above.to_rational() - below.to_rational()),
        None => Ok(rational::pow2(104)),
    }
}

/// Half of [`ulp_of_real`].
pub fn half_ulp(x: &BigRational) -> Result<BigRational> {
    Ok(ulp_of_real(x)? / BigRational::from_integer(2.into()))
}

/// Which operand of `fma(a, b, c)` varies in [`invert_fma_monotone`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operand {
    First,
    Second,
    Third,
}

fn fma_with(varying: Operand, fixed: [f32; 2], v: f32) -> f32 {
    match varying {
        Operand::First => v.mul_add(fixed[0], fixed[1]),
        Operand::Second => fixed[0].mul_add(v, fixed[1]),
        Operand::Third => fixed[0].mul_add(fixed[1], v),
    }
}

/// Smallest ordinal in `[lo, hi]` at which the monotone predicate turns true,
/// or `hi + 1` if it never does.
pub(crate) fn partition_point(mut lo: i64, mut hi: i64, pred: impl Fn(i64) -> bool) -> i64 {
    hi += 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

fn ord_f32(n: i64) -> f32 {
    F32::from_ordinal(n).expect("ordinal in range").to_f32()
}

/// Exact set of finite `v` for which the fma with `v` in position `varying`
/// lands in `target`, found by binary search over ordinals.
///
/// `fixed` holds the two remaining operands in their natural order. Returns
/// `None` when no finite `v` qualifies. When `v` multiplies a zero the fma is
/// constant and the result is either every finite value or `None`.
pub fn invert_fma_monotone(
    varying: Operand,
    fixed: [F32; 2],
    target: F32Interval,
) -> Option<F32Interval> {
    let fx = [fixed[0].to_f32(), fixed[1].to_f32()];
    let (tlo, thi) = (target.lo.to_f32(), target.hi.to_f32());
    let increasing = match varying {
        Operand::First | Operand::Second => {
            let m = fx[0];
            if m == 0.0 {
                let r = fx[1];
                return (tlo <= r && r <= thi).then(F32Interval::full);
            }
            m > 0.0
        }
        Operand::Third => true,
    };
    let g = |n: i64| fma_with(varying, fx, ord_f32(n));
    let (first, last) = if increasing {
        (
            partition_point(MIN_ORDINAL, MAX_ORDINAL, |n| g(n) >= tlo),
            partition_point(MIN_ORDINAL, MAX_ORDINAL, |n| g(n) > thi) - 1,
        )
    } else {
        (
            partition_point(MIN_ORDINAL, MAX_ORDINAL, |n| g(n) <= thi),
            partition_point(MIN_ORDINAL, MAX_ORDINAL, |n| g(n) < tlo) - 1,
        )
    };
    if first > last {
        return None;
    }
    Some(F32Interval {
        lo: F32::from_ordinal(first).unwrap(),
        hi: F32::from_ordinal(last).unwrap(),
    })
}

/// `2^e` for small `e`, as an `F32`.
pub fn f32_pow2(e: i32) -> F32 {
    rational::round_to_f32(&rational::pow2(e as i64)).expect("power of two in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> F32 {
        s.parse().unwrap()
    }

    #[test]
    fn hex_round_trip_examples() {
        for s in [
            "0x1.6d2026p-9",
            "-0x1.03f2d4p-6",
            "0x1p+0",
            "0x1.fffffep+127",
            "0x1p-149",
            "-0x0p+0",
        ] {
            assert_eq!(f(s).to_hex(), s);
        }
        assert_eq!(f("0x1.0p-1f"), F32::from_f32(0.5));
        assert_eq!(f("0x1.aee9d6p+0f").to_hex(), "0x1.aee9d6p+0");
        assert!("0x1.abcdefp+0".parse::<F32>().is_err());
    }

    #[test]
    fn ordinal_conventions() {
        assert_eq!(F32::ZERO.ordinal(), 0);
        assert_eq!(F32::NEG_ZERO.ordinal(), -1);
        assert_eq!((-F32::MIN_SUBNORMAL).ordinal(), -2);
        assert_eq!(F32::MAX.ordinal(), MAX_ORDINAL);
        assert_eq!(F32::MIN.ordinal(), MIN_ORDINAL);
        assert_eq!(F32::MAX.next_up(), None);
        assert_eq!(F32::NEG_ZERO.next_up(), Some(F32::ZERO));
        let one_two = F32Interval::new(F32::ONE, f("0x1p+1")).unwrap();
        assert_eq!(one_two.count(), (1 << 23) + 1);
    }

    #[test]
    fn mul_and_fma_basics() {
        let half = f("0x1p-1");
        assert_eq!(f32_mul(half, half).unwrap(), f("0x1p-2"));
        assert_eq!(f32_fma(F32::ONE, F32::ONE, F32::ZERO).unwrap(), F32::ONE);
        assert_eq!(f32_mul(F32::MAX, f("0x1p+1")), Err(Error::Overflow));
        let r = f32_fma(half, f("-0x1.511790p-5"), half).unwrap();
        let bracket = F32Interval::new(f("0x1.eaee86p-2"), f("0x1.eaee88p-2")).unwrap();
        assert!(bracket.contains(r));
    }

    #[test]
    fn ulp_values() {
        let q = |x: &str| f(x).to_rational();
        assert_eq!(ulp_of_real(&q("0x1p+0")).unwrap(), rational::pow2(-23));
        assert_eq!(ulp_of_real(&q("0x1.4p+0")).unwrap(), rational::pow2(-23));
        // sin(1/2) lies in [1/4, 1/2)
        assert_eq!(
            ulp_of_real(&q("0x1.eaee86p-2")).unwrap(),
            rational::pow2(-25)
        );
        assert_eq!(
            ulp_of_real(&rational::int(0)).unwrap(),
            rational::pow2(-149)
        );
        assert_eq!(ulp_of_real(&q("-0x1p+0")).unwrap(), rational::pow2(-24));
        assert_eq!(
            ulp_of_real(&q("0x1.fffffep+127")).unwrap(),
            rational::pow2(104)
        );
    }

    #[test]
    fn worked_example_inversion() {
        let half = f("0x1p-1");
        let target = F32Interval::new(f("0x1.eaee86p-2"), f("0x1.eaee88p-2")).unwrap();
        let r2 = invert_fma_monotone(Operand::Second, [half, half], target).unwrap();
        assert_eq!(r2.lo, f("-0x1.5117aep-5"));
        // exact sum 0x1.eaee89p-2 ties to the even upper endpoint
        assert_eq!(r2.hi, f("-0x1.511770p-5"));
        for (inside, v) in [
            (true, r2.lo),
            (true, r2.hi),
            (false, r2.lo.next_down().unwrap()),
            (false, r2.hi.next_up().unwrap()),
        ] {
            assert_eq!(
                target.contains(f32_fma(half, v, half).unwrap()),
                inside,
                "{v}"
            );
        }
    }

    #[test]
    fn inversion_identity_and_degenerate() {
        let t = f("0x1.234p-3");
        let r = invert_fma_monotone(Operand::First, [F32::ONE, F32::ZERO], F32Interval::point(t))
            .unwrap();
        assert_eq!(r, F32Interval::point(t));
        let full =
            invert_fma_monotone(Operand::Second, [F32::ZERO, t], F32Interval::point(t)).unwrap();
        assert_eq!(full, F32Interval::full());
        assert!(invert_fma_monotone(
            Operand::Second,
            [F32::ZERO, t],
            F32Interval::point(F32::ONE)
        )
        .is_none());
        // decreasing in the varying multiplicand
        let r = invert_fma_monotone(
            Operand::First,
            [f("-0x1p+0"), F32::ZERO],
            F32Interval::point(t),
        )
        .unwrap();
        assert_eq!(r, F32Interval::point(-t));
    }
}
