//! Reference functions and acceptance oracles.
//!
//! Reference values are certified enclosures computed with outward-rounded
//! interval arithmetic. An acceptance oracle maps an abscissa to the interval
//! of binary32 outputs a program may return there; the k-ulp bracket decides
//! that interval exactly, raising the working precision until the enclosure
//! is narrow enough.

use std::sync::Mutex;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::interval::{Dyadic, Interval};
use crate::rational::{self, BigRational};
use crate::softfp::{
    invert_fma_monotone, partition_point, ulp_of_real, F32Interval, Operand, F32, MAX_ORDINAL,
};

/// Starting precision of the escalation loop, in bits.
pub const START_PRECISION: u32 = 96;
/// Precision at which escalation gives up.
pub const PRECISION_CEILING: u32 = 1024;

/// First constant of the arctangent reconstruction `fma(C1, C2, -r)`.
pub const JUFFA_C1: F32 = F32::from_bits(0x3f6e_e581);
/// Second constant; `C1 * C2` stands in for `pi/2`.
pub const JUFFA_C2: F32 = F32::from_bits(0x3fd7_74eb);

/// Guaranteed enclosure `lo <= f(a) <= hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedReal {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl CertifiedReal {
    pub fn exact(q: BigRational) -> CertifiedReal {
        CertifiedReal {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, q: &BigRational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    fn from_interval(iv: &Interval) -> CertifiedReal {
        CertifiedReal {
            lo: iv.lo_rational(),
            hi: iv.hi_rational(),
        }
    }

    fn neg(self) -> CertifiedReal {
        CertifiedReal {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

fn working_precision(prec: u32) -> u64 {
    prec as u64 + 32
}

/// `atan(y)` for `|y| <= 1/2` by the alternating Taylor series; the first
/// omitted term bounds the remainder.
fn atan_series(y: &Interval) -> Interval {
    let y2 = y.square();
    let stop = y.mag().ilog2() - y.prec as i64 - 4;
    let mut term = y.clone();
    let mut sum = y.clone();
    let mut n = 1i64;
    loop {
        term = term.mul(&y2);
        if term.mag_below_pow2(stop) {
            return sum.widen(&term.mag());
        }
        let t = term.div_int(2 * n + 1);
        sum = if n % 2 == 1 { sum.sub(&t) } else { sum.add(&t) };
        n += 1;
    }
}

/// `atan(x)` for an interval of positive values at most 1.
fn atan_small(x: &Interval) -> Interval {
    let one = Interval::from_int(1, x.prec);
    let mut y = x.clone();
    let mut halvings = 0;
    while !y.mag_below_pow2(-8) {
        let denom = one.add(&one.add(&y.square()).sqrt());
        y = y.div(&denom);
        halvings += 1;
    }
    atan_series(&y).scale2(halvings)
}

fn atan_series_rational(q: &BigRational, prec: u64) -> Interval {
    atan_series(&Interval::from_rational(q, prec))
}

fn compute_pi(prec: u64) -> Interval {
    // pi/4 = 4 atan(1/5) - atan(1/239)
    let a = atan_series_rational(&BigRational::new(1.into(), 5.into()), prec);
    let b = atan_series_rational(&BigRational::new(1.into(), 239.into()), prec);
    a.scale2(2).sub(&b).scale2(2)
}

static PI_CACHE: Mutex<Option<Interval>> = Mutex::new(None);

/// Enclosure of `pi` with at least `prec` bits.
pub fn pi(prec: u64) -> Interval {
    let mut cache = PI_CACHE.lock().unwrap();
    match &*cache {
        Some(p) if p.prec >= prec => p.with_prec(prec),
        _ => {
            let p = compute_pi(prec.max(256) + 16);
            let out = p.with_prec(prec);
            *cache = Some(p);
            out
        }
    }
}

fn f32_interval(a: F32, prec: u64) -> Interval {
    Interval::point(
        Dyadic::from_rational(&a.to_rational()).expect("binary32 is dyadic"),
        prec,
    )
}

/// Certified `atan(a)`.
pub fn ref_atan(a: F32, prec: u32) -> CertifiedReal {
    if a.is_zero() {
        return CertifiedReal::exact(rational::int(0));
    }
    let w = working_precision(prec);
    let x = f32_interval(a.abs(), w);
    let r = if a.abs().value_cmp(F32::ONE) == std::cmp::Ordering::Greater {
        let inv = Interval::from_int(1, w).div(&x);
        pi(w).scale2(-1).sub(&atan_small(&inv))
    } else {
        atan_small(&x)
    };
    let c = CertifiedReal::from_interval(&r);
    if a.is_sign_negative() {
        c.neg()
    } else {
        c
    }
}

/// `sin(r)` (or `cos(r)`) for `|r| <= 2` by Taylor series.
fn sin_cos_series(r: &Interval, cosine: bool) -> Interval {
    let r2 = r.square();
    let scale = r.mag();
    let base = if scale.m.is_zero() {
        0
    } else {
        scale.ilog2().min(0)
    };
    let stop = base - r.prec as i64 - 4;
    let mut term = if cosine {
        Interval::from_int(1, r.prec)
    } else {
        r.clone()
    };
    let mut sum = term.clone();
    let mut k = if cosine { 0i64 } else { 1 };
    let mut n = 1;
    loop {
        term = term.mul(&r2).div_int((k + 1) * (k + 2));
        k += 2;
        if term.mag_below_pow2(stop) {
            return sum.widen(&term.mag());
        }
        sum = if n % 2 == 1 {
            sum.sub(&term)
        } else {
            sum.add(&term)
        };
        n += 1;
    }
}

/// Certified `sin(a)`.
pub fn ref_sin(a: F32, prec: u32) -> CertifiedReal {
    if a.is_zero() {
        return CertifiedReal::exact(rational::int(0));
    }
    let x = a.abs();
    let r = if x.to_f32() <= 2.0 {
        sin_cos_series(&f32_interval(x, working_precision(prec)), false)
    } else {
        let w = working_precision(prec) + x.to_rational().to_integer().bits() + 8;
        let xi = f32_interval(x, w);
        let half_pi = pi(w).scale2(-1);
        let q = xi.div(&half_pi);
        let mid = (q.lo_rational() + q.hi_rational()) / rational::int(2);
        let k = (mid + BigRational::new(1.into(), 2.into()))
            .floor()
            .to_integer();
        let kr = Interval::from_rational(&BigRational::from_integer(k.clone()), w);
        let red = xi.sub(&kr.mul(&half_pi));
        let quadrant: i64 = (&k % 4u32).try_into().expect("small remainder");
        let v = sin_cos_series(&red, quadrant % 2 == 1);
        if quadrant >= 2 {
            v.neg()
        } else {
            v
        }
    };
    let c = CertifiedReal::from_interval(&r);
    if a.is_sign_negative() {
        c.neg()
    } else {
        c
    }
}

/// The built-in reference functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RefFn {
    Sin,
    Atan,
    /// `f(a) = a`, useful for checking the machinery itself.
    Identity,
}

impl RefFn {
    pub fn from_name(name: &str) -> Result<RefFn> {
        match name {
            "sin" => Ok(RefFn::Sin),
            "atan" => Ok(RefFn::Atan),
            "identity" => Ok(RefFn::Identity),
            other => Err(Error::Config(format!("unknown function `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RefFn::Sin => "sin",
            RefFn::Atan => "atan",
            RefFn::Identity => "identity",
        }
    }

    pub fn enclose(self, a: F32, prec: u32) -> CertifiedReal {
        match self {
            RefFn::Sin => ref_sin(a, prec),
            RefFn::Atan => ref_atan(a, prec),
            RefFn::Identity => CertifiedReal::exact(a.to_rational()),
        }
    }

    /// Double-precision value from the platform libm, assumed accurate to
    /// [`LIBM_REL_ERR`].
    #[inline]
    pub fn approx(self, a: f64) -> f64 {
        match self {
            RefFn::Sin => a.sin(),
            RefFn::Atan => a.atan(),
            RefFn::Identity => a,
        }
    }

    pub fn is_odd(self) -> bool {
        true
    }
}

/// Relative error bound assumed for libm's double `sin` and `atan`.
pub const LIBM_REL_ERR: f64 = 1.0 / (1u64 << 50) as f64;

/// Smallest binary32 strictly above `q`.
fn float_above(q: &BigRational) -> Result<F32> {
    let c = rational::ceil_f32(q)?;
    if c.to_rational() == *q {
        c.next_up().ok_or(Error::OutOfRange)
    } else {
        Ok(c)
    }
}

/// Largest binary32 strictly below `q`.
fn float_below(q: &BigRational) -> Result<F32> {
    let f = rational::floor_f32(q)?;
    if f.to_rational() == *q {
        f.next_down().ok_or(Error::OutOfRange)
    } else {
        Ok(f)
    }
}

/// Decides the k-ulp bracket from one enclosure, or `None` if it is too wide.
fn decide_bracket(enc: &CertifiedReal, k: &BigRational, at: F32) -> Result<Option<F32Interval>> {
    if enc.lo != enc.hi && enc.lo.signum() != enc.hi.signum() {
        return Ok(None);
    }
    let u = ulp_of_real(&enc.lo)?;
    if ulp_of_real(&enc.hi)? != u {
        return Ok(None);
    }
    let ku = k * &u;
    let lo = float_above(&(&enc.lo - &ku))?;
    if float_above(&(&enc.hi - &ku))? != lo {
        return Ok(None);
    }
    let hi = float_below(&(&enc.hi + &ku))?;
    if float_below(&(&enc.lo + &ku))? != hi {
        return Ok(None);
    }
    F32Interval::new(lo, hi)
        .map(Some)
        .map_err(|_| Error::EmptyBracket(at))
}

/// Every binary32 `x` with `|x - f(a)| < k ulp(f(a))`, from a producer of
/// enclosures at a requested precision.
pub fn ulp_bracket_with(
    producer: impl Fn(u32) -> CertifiedReal,
    k: &BigRational,
    at: F32,
) -> Result<F32Interval> {
    assert!(k.is_positive(), "ulp tolerance must be positive");
    let mut prec = START_PRECISION;
    loop {
        if let Some(b) = decide_bracket(&producer(prec), k, at)? {
            return Ok(b);
        }
        if prec >= PRECISION_CEILING {
            return Err(Error::PrecisionCeiling { bits: prec, at });
        }
        prec *= 2;
    }
}

pub fn ulp_bracket(f: RefFn, k: &BigRational, a: F32) -> Result<F32Interval> {
    ulp_bracket_with(|p| f.enclose(a, p), k, a)
}

/// All `y > 1` whose correctly rounded reciprocal is `x`, for `x` in `(0, 1]`.
pub fn reciprocal_preimage(x: F32) -> Option<F32Interval> {
    assert!(
        x.to_f32() > 0.0 && x.to_f32() <= 1.0,
        "reciprocal preimage needs x in (0, 1]"
    );
    let xf = x.to_f32();
    let lo = F32::ONE.ordinal() + 1;
    let inv = |n: i64| 1.0f32 / F32::from_ordinal(n).expect("ordinal in range").to_f32();
    let first = partition_point(lo, MAX_ORDINAL, |n| inv(n) <= xf);
    let last = partition_point(lo, MAX_ORDINAL, |n| inv(n) < xf) - 1;
    (first <= last).then(|| {
        F32Interval::new(
            F32::from_ordinal(first).unwrap(),
            F32::from_ordinal(last).unwrap(),
        )
        .unwrap()
    })
}

/// Values of `r` for which the reconstruction `fma(C1, C2, -r)` lies in `target`.
fn reconstruction_preimage(target: F32Interval) -> Option<F32Interval> {
    let neg_r = invert_fma_monotone(Operand::Third, [JUFFA_C1, JUFFA_C2], target)?;
    Some(F32Interval::new(-neg_r.hi, -neg_r.lo).expect("negation keeps order"))
}

fn juffa_intersect(
    x: F32,
    k: &BigRational,
    ys: impl Iterator<Item = F32>,
) -> Result<Option<F32Interval>> {
    let mut acc = ulp_bracket(RefFn::Atan, k, x)?;
    for y in ys {
        let by = ulp_bracket(RefFn::Atan, k, y)?;
        let Some(allowed) = reconstruction_preimage(by) else {
            return Ok(None);
        };
        match acc.intersect(&allowed) {
            Some(i) => acc = i,
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

/// Acceptable polynomial outputs at `x` in `[0, 1]` for the arctangent with
/// reciprocal reduction: within `k` ulp of `atan(x)`, and, for every `y > 1`
/// whose reciprocal rounds to `x`, reconstructed to within `k` ulp of
/// `atan(y)`. Every such `y` is examined. `None` means no output works.
pub fn juffa_oracle(x: F32, k: &BigRational) -> Result<Option<F32Interval>> {
    assert!(
        !x.is_sign_negative() || x.is_zero(),
        "juffa oracle needs x in [0, 1]"
    );
    match (x.to_f32() > 0.0).then(|| reciprocal_preimage(x)).flatten() {
        Some(pre) => juffa_intersect(x, k, pre.iter()),
        None => juffa_intersect(x, k, std::iter::empty()),
    }
}

/// Variant of [`juffa_oracle`] that only examines the two ends of the
/// reciprocal preimage.
pub fn juffa_oracle_endpoints(x: F32, k: &BigRational) -> Result<Option<F32Interval>> {
    match (x.to_f32() > 0.0).then(|| reciprocal_preimage(x)).flatten() {
        Some(pre) => juffa_intersect(x, k, [pre.lo, pre.hi].into_iter()),
        None => juffa_intersect(x, k, std::iter::empty()),
    }
}

/// Binary32 ulp at the real `v`, from its double approximation. `None` when
/// `v` is within `err` of a binade boundary, where the choice is unclear.
#[inline]
pub(crate) fn f32_ulp_near(v: f64, err: f64) -> Option<f64> {
    let m = v.abs();
    let exp = ((m.to_bits() >> 52) as i32) - 1023;
    let p = f64::from_bits(((exp + 1023) as u64) << 52);
    if m - p <= err || 2.0 * p - m <= err {
        return None;
    }
    Some(if exp < -126 {
        f64::from_bits(((-149 + 1023) as u64) << 52)
    } else {
        p * f64::from_bits(((-23 + 1023) as u64) << 52)
    })
}

/// Map from abscissa to acceptable binary32 program outputs.
pub trait AcceptanceOracle: Send + Sync {
    fn domain(&self) -> F32Interval;

    /// Exact acceptable-output interval at `a`.
    fn bracket(&self, a: F32) -> Result<F32Interval>;

    /// Cheap conservative membership test of output `r` at `a`: `Some`
    /// answers are guaranteed, `None` means the exact bracket must decide.
    fn screen(&self, _a: f32, _r: f32) -> Option<bool> {
        None
    }

    fn describe(&self) -> String;

    fn accepts(&self, a: F32, r: F32) -> Result<bool> {
        match self.screen(a.to_f32(), r.to_f32()) {
            Some(v) => Ok(v),
            None => Ok(self.bracket(a)?.contains(r)),
        }
    }
}

/// Within `k` ulp of a reference function.
#[derive(Clone, Debug)]
pub struct UlpOracle {
    pub f: RefFn,
    pub k: BigRational,
    pub domain: F32Interval,
    k_f64: f64,
}

impl UlpOracle {
    pub fn new(f: RefFn, k: BigRational, domain: F32Interval) -> UlpOracle {
        let k_f64 = rational::to_f64(&k);
        UlpOracle {
            f,
            k,
            domain,
            k_f64,
        }
    }
}

/// Screen for `|r - f| < k ulp(f)` given a double approximation `fa`.
#[inline]
fn ulp_screen(fa: f64, k: f64, r: f32) -> Option<bool> {
    if fa == 0.0 {
        return None;
    }
    let err = fa.abs() * LIBM_REL_ERR;
    let u = f32_ulp_near(fa, err)?;
    let tol = k * u;
    let margin = err + tol * 1e-9;
    let d = (r as f64 - fa).abs();
    if d + margin < tol {
        Some(true)
    } else if d - margin > tol {
        Some(false)
    } else {
        None
    }
}

impl AcceptanceOracle for UlpOracle {
    fn domain(&self) -> F32Interval {
        self.domain
    }

    fn bracket(&self, a: F32) -> Result<F32Interval> {
        ulp_bracket(self.f, &self.k, a)
    }

    #[inline]
    fn screen(&self, a: f32, r: f32) -> Option<bool> {
        if self.f == RefFn::Identity {
            return None;
        }
        ulp_screen(self.f.approx(a as f64), self.k_f64, r)
    }

    fn describe(&self) -> String {
        format!(
            "{} within {} ulp on {}",
            self.f.name(),
            rational::to_exact_string(&self.k),
            self.domain
        )
    }
}

/// The arctangent-with-reciprocal-reduction oracle on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct JuffaOracle {
    pub k: BigRational,
    pub domain: F32Interval,
    k_f64: f64,
}

impl JuffaOracle {
    pub fn new(k: BigRational, domain: F32Interval) -> JuffaOracle {
        let k_f64 = rational::to_f64(&k);
        JuffaOracle { k, domain, k_f64 }
    }
}

impl AcceptanceOracle for JuffaOracle {
    fn domain(&self) -> F32Interval {
        self.domain
    }

    fn bracket(&self, a: F32) -> Result<F32Interval> {
        juffa_oracle(a, &self.k)?.ok_or(Error::EmptyBracket(a))
    }

    fn screen(&self, a: f32, r: f32) -> Option<bool> {
        match ulp_screen((a as f64).atan(), self.k_f64, r) {
            Some(true) => {}
            other => return other,
        }
        if a <= 0.0 {
            return Some(true);
        }
        let (x, fx) = (a as f64, F32::from_f32(a));
        let up = fx.next_up()?.to_f32() as f64 - x;
        let down = x - fx.next_down()?.to_f32() as f64;
        let y_lo = (1.0 / (x + up / 2.0)) * (1.0 - 1e-15);
        let y_hi = (1.0 / (x - down / 2.0)) * (1.0 + 1e-15);
        if y_hi <= 1.0 || y_lo > f32::MAX as f64 {
            return Some(true);
        }
        let out = JUFFA_C1.to_f32().mul_add(JUFFA_C2.to_f32(), -r) as f64;
        let (t_lo, t_hi) = (y_lo.max(1.0).atan(), y_hi.min(f32::MAX as f64).atan());
        let err = 4.0 * LIBM_REL_ERR;
        let u = f32_ulp_near(t_lo, err)?;
        if f32_ulp_near(t_hi, err)? != u {
            return None;
        }
        let tol = self.k_f64 * u;
        let margin = err + tol * 1e-9;
        ((out - t_lo).abs() + margin < tol && (t_hi - out).abs() + margin < tol).then_some(true)
    }

    fn describe(&self) -> String {
        format!(
            "atan with reciprocal reconstruction within {} ulp on {}",
            rational::to_exact_string(&self.k),
            self.domain
        )
    }
}

/// Accepts every finite output.
#[derive(Clone, Debug)]
pub struct EverythingOracle {
    pub domain: F32Interval,
}

impl AcceptanceOracle for EverythingOracle {
    fn domain(&self) -> F32Interval {
        self.domain
    }

    fn bracket(&self, _a: F32) -> Result<F32Interval> {
        Ok(F32Interval::full())
    }

    fn screen(&self, _a: f32, r: f32) -> Option<bool> {
        Some(r.is_finite())
    }

    fn describe(&self) -> String {
        format!("any finite value on {}", self.domain)
    }
}
