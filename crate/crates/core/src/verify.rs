//! Exhaustive binary32 verification.
//!
//! Every abscissa of a domain is evaluated in hardware binary32 arithmetic.
//! A double-precision screen built on libm bounds each point's ulp error to
//! within a few parts in 10^8 ulp; only points that may beat the running
//! maximum, or that the screen cannot classify, get a certified evaluation.
//! Scans run over disjoint blocks of ordinals on the rayon pool and reduce
//! associatively, so the outcome does not depend on the thread count.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcspec::{
    f32_ulp_near, ulp_bracket, AcceptanceOracle, RefFn, JUFFA_C1, JUFFA_C2, LIBM_REL_ERR,
    PRECISION_CEILING, START_PRECISION,
};
use crate::program::HornerSkeleton;
use crate::rational::{self, BigRational};
use crate::softfp::{ulp_of_real, F32Interval, F32, MAX_ORDINAL, MIN_ORDINAL};

/// Ordinals per work unit.
const BLOCK: i64 = 1 << 16;

/// Points in the pre-scan that seeds the candidate floor.
const SAMPLES: i64 = 1 << 14;

/// Certified enclosures are refined until narrower than this many ulps.
fn target_width() -> BigRational {
    rational::pow2(-64)
}

/// Outcome of an exhaustive error measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub function: String,
    pub domain: F32Interval,
    pub scanned: u64,
    /// The maximum ulp error lies in `[max_error_lo, max_error_hi]`.
    pub max_error_lo: BigRational,
    pub max_error_hi: BigRational,
    /// Smallest ordinal attaining the maximum.
    pub argmax: F32,
    /// Program output at `argmax`.
    pub output: F32,
    /// Points count as violations when their error is at least this.
    pub threshold: Option<BigRational>,
    pub violations: u64,
    pub first_violation: Option<F32>,
    /// Points whose error could not be separated from the maximum before the
    /// precision ceiling; the maximum is still a sound enclosure.
    pub unresolved: Vec<F32>,
    pub wall_time: Duration,
}

impl VerifyReport {
    /// Midpoint of the enclosure, for display.
    pub fn max_error_f64(&self) -> f64 {
        rational::to_f64(&((&self.max_error_lo + &self.max_error_hi) / rational::int(2)))
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function = {}", self.function)?;
        writeln!(f, "domain = {}", self.domain)?;
        writeln!(f, "scanned = {}", self.scanned)?;
        writeln!(f, "max_error_ulps = {:.9}", self.max_error_f64())?;
        writeln!(f, "max_error_lo = {}", self.max_error_lo)?;
        writeln!(f, "max_error_hi = {}", self.max_error_hi)?;
        writeln!(f, "argmax = {}", self.argmax)?;
        writeln!(f, "output = {}", self.output)?;
        if let Some(k) = &self.threshold {
            writeln!(f, "threshold = {}", rational::to_exact_string(k))?;
            writeln!(f, "violations = {}", self.violations)?;
            match self.first_violation {
                Some(v) => writeln!(f, "first_violation = {v}")?,
                None => writeln!(f, "first_violation = none")?,
            }
        }
        for u in &self.unresolved {
            writeln!(f, "unresolved = {u}")?;
        }
        write!(f, "wall_time_s = {:.3}", self.wall_time.as_secs_f64())
    }
}

/// Sound enclosure of `|r - f(a)| / ulp(f(a))` from one enclosure of `f(a)`.
fn error_enclosure(f: RefFn, a: F32, r: F32, prec: u32) -> Result<(BigRational, BigRational)> {
    let enc = f.enclose(a, prec);
    let r = r.to_rational();
    let (dlo, dhi) = {
        let x = rational::abs(&(&r - &enc.lo));
        let y = rational::abs(&(&r - &enc.hi));
        let dmin = if enc.lo <= r && r <= enc.hi {
            BigRational::zero()
        } else {
            x.clone().min(y.clone())
        };
        (dmin, x.max(y))
    };
    // ulp grows with magnitude, so the extremes of |f| give the extremes of ulp
    let (mlo, mhi) = {
        let (x, y) = (rational::abs(&enc.lo), rational::abs(&enc.hi));
        let straddles = enc.lo <= BigRational::zero() && enc.hi >= BigRational::zero();
        let lo = if straddles {
            BigRational::zero()
        } else {
            x.clone().min(y.clone())
        };
        (lo, x.max(y))
    };
    let (ulo, uhi) = (ulp_of_real(&mlo)?, ulp_of_real(&mhi)?);
    Ok((dlo / uhi, dhi / ulo))
}

/// Certified ulp error of output `r` at `a`, refined until narrower than
/// 2^-64 ulp or the precision ceiling is reached.
pub fn ulp_error(f: RefFn, a: F32, r: F32) -> Result<(BigRational, BigRational)> {
    let mut prec = START_PRECISION;
    loop {
        let e = error_enclosure(f, a, r, prec)?;
        if &e.1 - &e.0 < target_width() || prec >= PRECISION_CEILING {
            return Ok(e);
        }
        prec *= 2;
    }
}

/// Bounds on the ulp error from the libm screen, or `None` when the screen
/// cannot pin the ulp.
#[inline]
fn screen_error(fa: f64, r: f32) -> Option<(f64, f64)> {
    if fa == 0.0 {
        return None;
    }
    let err = fa.abs() * LIBM_REL_ERR;
    let u = f32_ulp_near(fa, err)?;
    let d = (r as f64 - fa).abs();
    let margin = err + d * LIBM_REL_ERR;
    Some(((d - margin) / u, (d + margin) / u))
}

#[derive(Default)]
struct Partial {
    scanned: u64,
    /// Largest certified-by-screen lower bound seen.
    floor: f64,
    /// Points whose screened upper bound reaches `floor`.
    candidates: Vec<(i64, f64)>,
    violations: u64,
    first_violation: Option<i64>,
}

impl Partial {
    fn prune(&mut self) {
        let floor = self.floor;
        self.candidates.retain(|&(_, up)| up >= floor);
    }

    fn merge(mut self, mut other: Partial) -> Partial {
        self.scanned += other.scanned;
        self.floor = self.floor.max(other.floor);
        self.candidates.append(&mut other.candidates);
        self.prune();
        self.violations += other.violations;
        self.first_violation = match (self.first_violation, other.first_violation) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        self
    }
}

fn ordinal_f32(n: i64) -> F32 {
    F32::from_ordinal(n).expect("ordinal in range")
}

#[inline(always)]
fn scan_block<P: Fn(f32) -> f32>(
    eval: &P,
    f: RefFn,
    threshold: Option<(&BigRational, f64)>,
    floor: &AtomicU64,
    first: i64,
    last: i64,
) -> Result<Partial> {
    let mut part = Partial {
        floor: f64::from_bits(floor.load(Ordering::Relaxed)),
        ..Partial::default()
    };
    for n in first..=last {
        let a = ordinal_f32(n);
        let af = a.to_f32();
        let r = eval(af);
        if !r.is_finite() {
            return Err(Error::Overflow);
        }
        let bounds = screen_error(f.approx(af as f64), r);
        let (lo, hi) = bounds.unwrap_or((0.0, f64::INFINITY));
        if lo > part.floor {
            part.floor = lo;
            if part.candidates.len() > 64 {
                part.prune();
            }
        }
        if hi >= part.floor {
            part.candidates.push((n, hi));
        }
        if let Some((k, kf)) = threshold {
            let bad = if lo >= kf {
                true
            } else if hi < kf {
                false
            } else {
                !ulp_bracket(f, k, a)?.contains(F32::from_f32(r))
            };
            if bad {
                part.violations += 1;
                part.first_violation.get_or_insert(n);
            }
        }
    }
    part.scanned = (last - first + 1) as u64;
    part.prune();
    // screen bounds are nonnegative, where bit order is numeric order
    floor.fetch_max(part.floor.to_bits(), Ordering::Relaxed);
    Ok(part)
}

/// Largest screened lower bound over an evenly spaced sample of the domain.
/// Seeding every block with it lets the scan discard points that cannot be
/// the maximum, such as the long runs of near-zero errors at tiny abscissae.
fn sampled_floor<P: Fn(f32) -> f32>(eval: &P, f: RefFn, domain: F32Interval) -> f64 {
    let (first, last) = (domain.first_ordinal(), domain.last_ordinal());
    let stride = ((last - first) / SAMPLES).max(1);
    (first..=last)
        .step_by(stride as usize)
        .filter_map(|n| {
            let a = ordinal_f32(n).to_f32();
            let r = eval(a);
            if r.is_finite() {
                screen_error(f.approx(a as f64), r)
            } else {
                None
            }
        })
        .map(|(lo, _)| lo)
        .fold(0.0, f64::max)
}

fn blocks(first: i64, last: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut lo = first;
    while lo <= last {
        let hi = (lo + BLOCK - 1).min(last);
        out.push((lo, hi));
        lo = hi + 1;
    }
    out
}

/// Exhaustive ulp error of an arbitrary binary32 program `eval` against `f`
/// over every value in `domain`, both zeros included.
pub fn max_ulp_error_with<P>(
    eval: P,
    f: RefFn,
    domain: F32Interval,
    threshold: Option<&BigRational>,
) -> Result<VerifyReport>
where
    P: Fn(f32) -> f32 + Sync,
{
    let start = Instant::now();
    let thr = threshold.map(|k| (k, rational::to_f64(k)));
    let floor = AtomicU64::new(sampled_floor(&eval, f, domain).to_bits());
    let total = blocks(domain.first_ordinal(), domain.last_ordinal())
        .into_par_iter()
        .map(|(lo, hi)| scan_block(&eval, f, thr, &floor, lo, hi))
        .try_reduce(Partial::default, |x, y| Ok(x.merge(y)))?;

    // certify the survivors and keep those that can still be the maximum
    let mut certified = Vec::with_capacity(total.candidates.len());
    for &(n, _) in &total.candidates {
        let a = ordinal_f32(n);
        let r = F32::from_f32(eval(a.to_f32()));
        certified.push((n, r, error_enclosure(f, a, r, START_PRECISION)?));
    }
    let best_lo =
        |c: &[(i64, F32, (BigRational, BigRational))]| c.iter().map(|x| x.2 .0.clone()).max();
    let floor = best_lo(&certified).ok_or_else(|| Error::Config("empty domain".into()))?;
    certified.retain(|c| c.2 .1 >= floor);
    for c in certified.iter_mut() {
        c.2 = ulp_error(f, ordinal_f32(c.0), c.1)?;
    }
    let floor = best_lo(&certified).expect("nonempty");
    certified.retain(|c| c.2 .1 >= floor);
    certified.sort_by_key(|c| c.0);
    let winner = certified
        .iter()
        .find(|c| c.2 .0 == floor)
        .or_else(|| certified.first())
        .expect("nonempty")
        .clone();
    let unresolved = if certified.len() > 1 {
        certified
            .iter()
            .filter(|c| c.0 != winner.0)
            .map(|c| ordinal_f32(c.0))
            .collect()
    } else {
        Vec::new()
    };
    let (argmax, output, (lo, hi)) = (ordinal_f32(winner.0), winner.1, winner.2);
    let max_error_hi = certified
        .iter()
        .map(|c| c.2 .1.clone())
        .max()
        .expect("nonempty")
        .max(hi);
    Ok(VerifyReport {
        function: f.name().to_string(),
        domain,
        scanned: total.scanned,
        max_error_lo: lo,
        max_error_hi,
        argmax,
        output,
        threshold: threshold.cloned(),
        violations: total.violations,
        first_violation: total.first_violation.map(ordinal_f32),
        unresolved,
        wall_time: start.elapsed(),
    })
}

/// Exhaustive ulp error of a fully fixed Horner program.
pub fn max_ulp_error(
    skel: &HornerSkeleton,
    coeffs: &[F32],
    f: RefFn,
    domain: F32Interval,
    threshold: Option<&BigRational>,
) -> Result<VerifyReport> {
    let c: Vec<f32> = coeffs.iter().map(|c| c.to_f32()).collect();
    max_ulp_error_with(|a| skel.eval_fast(&c, a), f, domain, threshold)
}

/// The arctangent with reciprocal argument reduction, calling `poly` on the
/// reduced argument.
#[inline]
pub fn juffa_eval(poly: impl Fn(f32) -> f32, a: f32) -> f32 {
    let t = a.abs();
    let mut r = t;
    if t > 1.0 {
        r = 1.0 / r;
    }
    r = poly(r);
    if t > 1.0 {
        r = JUFFA_C1.to_f32().mul_add(JUFFA_C2.to_f32(), -r);
    }
    r.copysign(a)
}

/// Ulp error of the reduced arctangent over every finite binary32 input.
pub fn full_range_error(
    skel: &HornerSkeleton,
    coeffs: &[F32],
    k: Option<&BigRational>,
) -> Result<VerifyReport> {
    let c: Vec<f32> = coeffs.iter().map(|c| c.to_f32()).collect();
    let domain = F32Interval::new(F32::MIN, F32::MAX)?;
    max_ulp_error_with(
        |a| juffa_eval(|x| skel.eval_fast(&c, x), a),
        RefFn::Atan,
        domain,
        k,
    )
}

/// Position of ordinal `n` in the scan that starts at `start` and wraps.
fn wrapped(first: i64, count: i64, start: i64, pos: i64) -> i64 {
    first + (start - first + pos).rem_euclid(count)
}

/// Smallest-ordinal abscissa at or after `start` (wrapping around the
/// domain) where `eval` leaves the oracle's acceptable set.
pub fn first_violation_with<P>(
    eval: P,
    oracle: &dyn AcceptanceOracle,
    domain: F32Interval,
    start: i64,
) -> Result<Option<F32>>
where
    P: Fn(f32) -> f32 + Sync,
{
    let first = domain.first_ordinal();
    let count = domain.last_ordinal() - first + 1;
    let start = if (first..first + count).contains(&start) {
        start
    } else {
        first
    };
    let nblocks = (count + BLOCK - 1) / BLOCK;
    let check = |pos: i64| -> Option<Result<F32>> {
        let a = ordinal_f32(wrapped(first, count, start, pos));
        let r = eval(a.to_f32());
        if !r.is_finite() {
            return Some(Ok(a));
        }
        match oracle.accepts(a, F32::from_f32(r)) {
            Ok(true) => None,
            Ok(false) | Err(Error::EmptyBracket(_)) => Some(Ok(a)),
            Err(e) => Some(Err(e)),
        }
    };
    (0..nblocks)
        .into_par_iter()
        .find_map_first(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(count);
            (lo..hi).find_map(check)
        })
        .transpose()
}

/// [`first_violation_with`] for a fully fixed Horner program.
pub fn first_violation(
    skel: &HornerSkeleton,
    coeffs: &[F32],
    oracle: &dyn AcceptanceOracle,
    domain: F32Interval,
    start: i64,
) -> Result<Option<F32>> {
    let c: Vec<f32> = coeffs.iter().map(|c| c.to_f32()).collect();
    first_violation_with(|a| skel.eval_fast(&c, a), oracle, domain, start)
}

/// Ordinal window `[MIN_ORDINAL, MAX_ORDINAL]` as an interval.
pub fn all_finite() -> F32Interval {
    F32Interval::new(ordinal_f32(MIN_ORDINAL), ordinal_f32(MAX_ORDINAL)).expect("ordered")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspec::{EverythingOracle, UlpOracle};
    use crate::program::Form;
    use crate::rational::int;

    fn f(s: &str) -> F32 {
        s.parse().unwrap()
    }

    fn atan_skel() -> HornerSkeleton {
        let labels = ["c17", "c15", "c13", "c11", "c9", "c7", "c5", "c3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        HornerSkeleton::new(Form::Odd, labels).unwrap()
    }

    #[test]
    fn identity_program_has_zero_error() {
        let skel = atan_skel();
        let dom = F32Interval::new(f("-0x1p-3"), f("0x1p-3")).unwrap();
        let sub = F32Interval::new(f("0x1.8p-4"), f("0x1.802p-4")).unwrap();
        let rep =
            max_ulp_error(&skel, &[F32::ZERO; 8], RefFn::Identity, sub, Some(&int(1))).unwrap();
        assert!(rep.max_error_hi.is_zero());
        assert_eq!(rep.scanned, sub.count());
        assert_eq!(rep.violations, 0);
        assert!(dom.count() > sub.count());
    }

    #[test]
    fn everything_oracle_has_no_violation() {
        let skel = atan_skel();
        let oracle = EverythingOracle {
            domain: F32Interval::new(f("0x1p-1"), f("0x1.1p-1")).unwrap(),
        };
        let c = [F32::ONE; 8];
        assert_eq!(
            first_violation(&skel, &c, &oracle, oracle.domain, 0).unwrap(),
            None
        );
    }

    #[test]
    fn first_violation_wraps_and_returns_minimal_ordinal() {
        // c3 = 1 makes the odd program a + a^3 + ..., far from atan
        let skel = atan_skel();
        let mut c = [F32::ZERO; 8];
        c[7] = F32::ONE;
        let dom = F32Interval::new(f("0x1p-4"), f("0x1.01p-4")).unwrap();
        let oracle = UlpOracle::new(RefFn::Atan, int(1), dom);
        let v = first_violation(&skel, &c, &oracle, dom, dom.first_ordinal()).unwrap();
        assert_eq!(v, Some(dom.lo));
        let late = dom.last_ordinal();
        assert_eq!(
            first_violation(&skel, &c, &oracle, dom, late).unwrap(),
            Some(dom.hi)
        );
    }

    #[test]
    fn report_reproduces_at_argmax() {
        let skel = atan_skel();
        let c: Vec<F32> = [
            "0x1.686c56p-9",
            "-0x1.01dec8p-6",
            "0x1.5a901p-5",
            "-0x1.32b648p-4",
            "0x1.b3f558p-4",
            "-0x1.22f90cp-3",
            "0x1.99782cp-3",
            "-0x1.5554d8p-2",
        ]
        .iter()
        .map(|s| f(s))
        .collect();
        let dom = F32Interval::new(f("0x1.8p-1"), f("0x1.80ap-1")).unwrap();
        let rep = max_ulp_error(&skel, &c, RefFn::Atan, dom, None).unwrap();
        let (lo, hi) = ulp_error(RefFn::Atan, rep.argmax, rep.output).unwrap();
        assert_eq!(
            (lo, hi),
            (rep.max_error_lo.clone(), rep.max_error_hi.clone())
        );
        assert!(rep.max_error_f64() < 1.2);
    }
}
