//! Exact rationals and the conversions between them and binary32.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::softfp::F32;

/// `2^e`.
pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new_raw(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn abs(q: &BigRational) -> BigRational {
    if q.is_negative() {
        -q.clone()
    } else {
        q.clone()
    }
}

/// Exact value of a finite binary32.
pub fn rational_of_f32(x: F32) -> BigRational {
    assert!(x.is_finite(), "rational_of_f32 of non-finite value");
    let (mant, exp) = if x.exponent_field() == 0 {
        (x.mantissa_field(), -149)
    } else {
        (
            x.mantissa_field() | 0x0080_0000,
            x.exponent_field() as i64 - 150,
        )
    };
    let m = BigRational::from_integer(BigInt::from(mant));
    let q = m * pow2(exp);
    if x.is_sign_negative() {
        -q
    } else {
        q
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Nearest,
    TowardZero,
    AwayFromZero,
}

/// `floor(log2(q))` for positive `q`.
fn ilog2(num: &BigInt, den: &BigInt) -> i64 {
    let e0 = num.bits() as i64 - den.bits() as i64;
    let ge = if e0 >= 0 {
        num >= &(den << e0 as usize)
    } else {
        (num << (-e0) as usize) >= *den
    };
    if ge {
        e0
    } else {
        e0 - 1
    }
}

/// Encodes `m * 2^qe` (m < 2^25) as binary32 bits, or `None` on overflow.
fn encode(mut m: u64, mut qe: i64) -> Option<u32> {
    if m == 0 {
        return Some(0);
    }
    while m >= 1 << 24 {
        debug_assert!(m & 1 == 0);
        m >>= 1;
        qe += 1;
    }
    if m < 1 << 23 {
        debug_assert_eq!(qe, -149);
        return Some(m as u32);
    }
    let field = qe + 23 + 127;
    if field >= 255 {
        return None;
    }
    Some(((field as u32) << 23) | (m as u32 & 0x007f_ffff))
}

/// Rounds a nonnegative rational to a binary32 magnitude.
fn round_magnitude(num: &BigInt, den: &BigInt, mode: Mode) -> Option<u32> {
    if num.is_zero() {
        return Some(0);
    }
    let e = ilog2(num, den);
    let qe = e.max(-126) - 23;
    // Values far above the range overflow in every mode but toward-zero.
    if e > 128 {
        return if mode == Mode::TowardZero {
            Some(0x7f7f_ffff)
        } else {
            None
        };
    }
    let (n, d) = if qe < 0 {
        (num << (-qe) as usize, den.clone())
    } else {
        (num.clone(), den << qe as usize)
    };
    let (q, r) = n.div_rem(&d);
    let mut m = q.to_u64().expect("significand fits");
    if !r.is_zero() {
        match mode {
            Mode::TowardZero => {}
            Mode::AwayFromZero => m += 1,
            Mode::Nearest => {
                let twice = &r << 1usize;
                if twice > d || (twice == d && m & 1 == 1) {
                    m += 1;
                }
            }
        }
    }
    match encode(m, qe) {
        Some(bits) => Some(bits),
        None if mode == Mode::TowardZero => Some(0x7f7f_ffff),
        None => None,
    }
}

fn round_signed(q: &BigRational, mode_for_positive: Mode, mode_for_negative: Mode) -> Result<F32> {
    let negative = q.is_negative();
    let mode = if negative {
        mode_for_negative
    } else {
        mode_for_positive
    };
    let num = q.numer().abs();
    let bits = round_magnitude(&num, q.denom(), mode).ok_or(Error::OutOfRange)?;
    Ok(F32::from_bits(if negative {
        bits | 0x8000_0000
    } else {
        bits
    }))
}

/// Nearest binary32, ties to even. Fails if the result would be infinite.
pub fn round_to_f32(q: &BigRational) -> Result<F32> {
    round_signed(q, Mode::Nearest, Mode::Nearest)
}

/// Largest binary32 `<= q`.
pub fn floor_f32(q: &BigRational) -> Result<F32> {
    round_signed(q, Mode::TowardZero, Mode::AwayFromZero)
}

/// Smallest binary32 `>= q`.
pub fn ceil_f32(q: &BigRational) -> Result<F32> {
    round_signed(q, Mode::AwayFromZero, Mode::TowardZero)
}

/// Is `q` exactly a binary32 value?
pub fn is_representable(q: &BigRational) -> bool {
    round_to_f32(q)
        .map(|x| x.to_rational() == *q)
        .unwrap_or(false)
}

/// Parses a C-style hexadecimal (`0x1.8p-3`) or decimal (`1.5e-3`) literal
/// into an exact rational. An `f`/`F` suffix is ignored; a plain `n/d`
/// fraction is accepted as well.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(s.to_string());
    let t = s.trim();
    let (negative, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    if body.is_empty() {
        return Err(bad());
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        BigRational::new(n, d)
    } else if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        let hex = hex
            .strip_suffix(['f', 'F'])
            .filter(|h| h.contains(['p', 'P']))
            .unwrap_or(hex);
        let (mant, exp) = match hex.split_once(['p', 'P']) {
            Some((m, e)) => (m, e.parse::<i64>().map_err(|_| bad())?),
            None => (hex, 0),
        };
        parse_digits(mant, 16, exp, 2).ok_or_else(bad)?
    } else {
        let dec = body.strip_suffix(['f', 'F']).unwrap_or(body);
        let (mant, exp) = match dec.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i64>().map_err(|_| bad())?),
            None => (dec, 0),
        };
        parse_digits(mant, 10, exp, 10).ok_or_else(bad)?
    };
    Ok(if negative { -value } else { value })
}

/// `digits * exp_base^exp`, where `digits` may contain one radix point.
fn parse_digits(mant: &str, radix: u32, exp: i64, exp_base: i64) -> Option<BigRational> {
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut n = BigInt::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        n = n * radix + c.to_digit(radix)?;
    }
    let frac_len = frac_part.len() as u32;
    let den = BigInt::from(radix).pow(frac_len);
    let mut q = BigRational::new(n, den);
    let scale = BigRational::from_integer(BigInt::from(exp_base).pow(exp.unsigned_abs() as u32));
    if exp >= 0 {
        q *= scale;
    } else {
        q /= scale;
    }
    Some(q)
}

fn is_power_of_two(n: &BigInt) -> bool {
    n.sign() == Sign::Plus && (n & (n - BigInt::one())).is_zero()
}

/// Exact textual form: a terminating decimal when the denominator allows it,
/// otherwise `n/d`.
pub fn to_exact_string(q: &BigRational) -> String {
    let mut d = q.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let places = twos.max(fives);
    let scaled = q * BigRational::from_integer(BigInt::from(10).pow(places));
    let digits = scaled.to_integer().abs().to_string();
    let sign = if q.is_negative() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let places = places as usize;
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (ip, fp) = padded.split_at(padded.len() - places);
    format!("{sign}{ip}.{fp}")
}

/// Hexadecimal form `[-]0x1.hhhp±e` of a dyadic rational (any length), or
/// `None` if the denominator is not a power of two.
pub fn to_hex_string(q: &BigRational) -> Option<String> {
    if !is_power_of_two(q.denom()) {
        return None;
    }
    if q.is_zero() {
        return Some("0x0p+0".into());
    }
    let sign = if q.is_negative() { "-" } else { "" };
    let num = q.numer().abs();
    let e = ilog2(&num, q.denom());
    // q = 1.f * 2^e; fraction bits = bits below the leading one.
    let frac_bits = num.bits() as i64 - 1;
    let mut frac = &num - (BigInt::one() << frac_bits as usize);
    let mut nbits = frac_bits;
    while nbits % 4 != 0 {
        frac <<= 1usize;
        nbits += 1;
    }
    let mut digits = if nbits == 0 {
        String::new()
    } else {
        format!("{:0>w$x}", frac, w = (nbits / 4) as usize)
    };
    while digits.ends_with('0') {
        digits.pop();
    }
    Some(if digits.is_empty() {
        format!("{sign}0x1p{e:+}")
    } else {
        format!("{sign}0x1.{digits}p{e:+}")
    })
}

/// Nearest `f64`, for logs and screens only.
pub fn to_f64(q: &BigRational) -> f64 {
    let n = q.numer();
    let d = q.denom();
    if n.is_zero() {
        return 0.0;
    }
    let shift = n.bits() as i64 - d.bits() as i64 - 60;
    let scaled = if shift >= 0 {
        n / (d << shift as usize)
    } else {
        (n << (-shift) as usize) / d
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}
