//! Outward-rounded interval arithmetic on dyadic numbers `m * 2^e`.
//!
//! Every operation rounds its lower endpoint down and its upper endpoint up
//! to `prec` significant bits, so each result encloses the exact one. That is
//! all the certified function evaluations need.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Down,
    Up,
}

/// `m * 2^e`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub m: BigInt,
    pub e: i64,
}

fn shift_right(m: &BigInt, k: u64, dir: Dir) -> BigInt {
    let d = BigInt::one() << k;
    match dir {
        Dir::Down => m.div_floor(&d),
        Dir::Up => -((-m).div_floor(&d)),
    }
}

impl Dyadic {
    pub fn zero() -> Dyadic {
        Dyadic {
            m: BigInt::zero(),
            e: 0,
        }
    }

    pub fn from_int(n: i64) -> Dyadic {
        Dyadic {
            m: BigInt::from(n),
            e: 0,
        }
    }

    /// Exact conversion; `None` unless the denominator is a power of two.
    pub fn from_rational(q: &BigRational) -> Option<Dyadic> {
        let d = q.denom();
        let tz = d.trailing_zeros().unwrap_or(0);
        (d >> tz as usize).is_one().then(|| Dyadic {
            m: q.numer().clone(),
            e: -(tz as i64),
        })
    }

    pub fn to_rational(&self) -> BigRational {
        if self.e >= 0 {
            BigRational::from_integer(&self.m << self.e as usize)
        } else {
            BigRational::new(self.m.clone(), BigInt::one() << (-self.e) as usize)
        }
    }

    fn round(self, prec: u64, dir: Dir) -> Dyadic {
        let bits = self.m.bits();
        if bits <= prec {
            return self;
        }
        let k = bits - prec;
        Dyadic {
            m: shift_right(&self.m, k, dir),
            e: self.e + k as i64,
        }
    }

    fn add(&self, other: &Dyadic) -> Dyadic {
        let e = self.e.min(other.e);
        let a = &self.m << (self.e - e) as usize;
        let b = &other.m << (other.e - e) as usize;
        Dyadic { m: a + b, e }
    }

    fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            m: &self.m * &other.m,
            e: self.e + other.e,
        }
    }

    fn neg(&self) -> Dyadic {
        Dyadic {
            m: -&self.m,
            e: self.e,
        }
    }

    fn scale2(&self, k: i64) -> Dyadic {
        Dyadic {
            m: self.m.clone(),
            e: self.e + k,
        }
    }

    /// Quotient rounded in `dir` to at least `prec` bits; `other` nonzero.
    fn div(&self, other: &Dyadic, prec: u64, dir: Dir) -> Dyadic {
        if self.m.is_zero() {
            return Dyadic::zero();
        }
        let k = (prec + other.m.bits() + 2).saturating_sub(self.m.bits());
        let mut num = &self.m << k as usize;
        let mut den = other.m.clone();
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        let q = match dir {
            Dir::Down => num.div_floor(&den),
            Dir::Up => -((-num).div_floor(&den)),
        };
        Dyadic {
            m: q,
            e: self.e - other.e - k as i64,
        }
        .round(prec, dir)
    }

    /// Square root of a nonnegative value, rounded in `dir`.
    fn sqrt(&self, prec: u64, dir: Dir) -> Dyadic {
        if self.m.is_zero() {
            return Dyadic::zero();
        }
        let mut shift = (2 * prec + 4).saturating_sub(self.m.bits());
        if (self.e - shift as i64).rem_euclid(2) != 0 {
            shift += 1;
        }
        let m = &self.m << shift as usize;
        let mut r = m.sqrt();
        if dir == Dir::Up && &r * &r < m {
            r += 1;
        }
        Dyadic {
            m: r,
            e: (self.e - shift as i64) / 2,
        }
        .round(prec, dir)
    }

    fn cmp_value(&self, other: &Dyadic) -> Ordering {
        let e = self.e.min(other.e);
        let a = &self.m << (self.e - e) as usize;
        let b = &other.m << (other.e - e) as usize;
        a.cmp(&b)
    }

    fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    /// `floor(log2 |x|)` for nonzero `x`.
    pub fn ilog2(&self) -> i64 {
        self.m.bits() as i64 - 1 + self.e
    }
}

fn min_d(a: Dyadic, b: Dyadic) -> Dyadic {
    if a.cmp_value(&b) == Ordering::Greater {
        b
    } else {
        a
    }
}

fn max_d(a: Dyadic, b: Dyadic) -> Dyadic {
    if a.cmp_value(&b) == Ordering::Less {
        b
    } else {
        a
    }
}

/// Closed interval `[lo, hi]` with endpoints kept to `prec` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub prec: u64,
}

impl Interval {
    pub fn point(x: Dyadic, prec: u64) -> Interval {
        Interval {
            lo: x.clone().round(prec, Dir::Down),
            hi: x.round(prec, Dir::Up),
            prec,
        }
    }

    pub fn from_int(n: i64, prec: u64) -> Interval {
        Interval::point(Dyadic::from_int(n), prec)
    }

    /// Encloses an arbitrary rational.
    pub fn from_rational(q: &BigRational, prec: u64) -> Interval {
        match Dyadic::from_rational(q) {
            Some(d) => Interval::point(d, prec),
            None => {
                let n = Dyadic {
                    m: q.numer().clone(),
                    e: 0,
                };
                let d = Dyadic {
                    m: q.denom().clone(),
                    e: 0,
                };
                Interval {
                    lo: n.div(&d, prec, Dir::Down),
                    hi: n.div(&d, prec, Dir::Up),
                    prec,
                }
            }
        }
    }

    fn make(&self, lo: Dyadic, hi: Dyadic) -> Interval {
        Interval {
            lo: lo.round(self.prec, Dir::Down),
            hi: hi.round(self.prec, Dir::Up),
            prec: self.prec,
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        self.make(self.lo.add(&o.lo), self.hi.add(&o.hi))
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        self.make(self.lo.add(&o.hi.neg()), self.hi.add(&o.lo.neg()))
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = [
            self.lo.mul(&o.lo),
            self.lo.mul(&o.hi),
            self.hi.mul(&o.lo),
            self.hi.mul(&o.hi),
        ];
        let lo = p.iter().cloned().reduce(min_d).unwrap();
        let hi = p.into_iter().reduce(max_d).unwrap();
        self.make(lo, hi)
    }

    pub fn square(&self) -> Interval {
        if !self.lo.is_negative() || self.hi.is_negative() || self.hi.m.is_zero() {
            let sq = self.mul(self);
            if !sq.lo.is_negative() {
                return sq;
            }
        }
        let a = self.lo.mul(&self.lo);
        let b = self.hi.mul(&self.hi);
        self.make(Dyadic::zero(), max_d(a, b))
    }

    /// `self / o` for `o` not containing zero.
    pub fn div(&self, o: &Interval) -> Interval {
        assert!(o.lo.is_negative() == o.hi.is_negative() && !o.lo.m.is_zero() && !o.hi.m.is_zero());
        let p = self.prec;
        let cands_lo = [
            self.lo.div(&o.lo, p, Dir::Down),
            self.lo.div(&o.hi, p, Dir::Down),
            self.hi.div(&o.lo, p, Dir::Down),
            self.hi.div(&o.hi, p, Dir::Down),
        ];
        let cands_hi = [
            self.lo.div(&o.lo, p, Dir::Up),
            self.lo.div(&o.hi, p, Dir::Up),
            self.hi.div(&o.lo, p, Dir::Up),
            self.hi.div(&o.hi, p, Dir::Up),
        ];
        let lo = cands_lo.into_iter().reduce(min_d).unwrap();
        let hi = cands_hi.into_iter().reduce(max_d).unwrap();
        self.make(lo, hi)
    }

    pub fn div_int(&self, n: i64) -> Interval {
        self.div(&Interval::from_int(n, self.prec))
    }

    /// Square root of an interval with a nonnegative lower end.
    pub fn sqrt(&self) -> Interval {
        assert!(!self.lo.is_negative(), "sqrt of negative interval");
        Interval {
            lo: self.lo.sqrt(self.prec, Dir::Down),
            hi: self.hi.sqrt(self.prec, Dir::Up),
            prec: self.prec,
        }
    }

    pub fn scale2(&self, k: i64) -> Interval {
        Interval {
            lo: self.lo.scale2(k),
            hi: self.hi.scale2(k),
            prec: self.prec,
        }
    }

    /// `[-r, r]` added to self.
    pub fn widen(&self, r: &Dyadic) -> Interval {
        self.make(self.lo.add(&r.neg()), self.hi.add(r))
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> Dyadic {
        let a = Dyadic {
            m: self.lo.m.abs(),
            e: self.lo.e,
        };
        let b = Dyadic {
            m: self.hi.m.abs(),
            e: self.hi.e,
        };
        max_d(a, b)
    }

    /// Whether every element has absolute value below `2^k`.
    pub fn mag_below_pow2(&self, k: i64) -> bool {
        let m = self.mag();
        m.m.is_zero() || m.ilog2() < k
    }

    pub fn with_prec(&self, prec: u64) -> Interval {
        Interval {
            lo: self.lo.clone().round(prec, Dir::Down),
            hi: self.hi.clone().round(prec, Dir::Up),
            prec,
        }
    }

    pub fn lo_rational(&self) -> BigRational {
        self.lo.to_rational()
    }

    pub fn hi_rational(&self) -> BigRational {
        self.hi.to_rational()
    }

    pub fn contains_rational(&self, q: &BigRational) -> bool {
        &self.lo_rational() <= q && q <= &self.hi_rational()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn arithmetic_encloses_exact_results() {
        let p = 40;
        let third = Interval::from_rational(&BigRational::new(1.into(), 3.into()), p);
        assert!(third.contains_rational(&BigRational::new(1.into(), 3.into())));
        let one = third.add(&third).add(&third);
        assert!(one.contains_rational(&int(1)));
        assert!(third
            .mul(&Interval::from_int(3, p))
            .contains_rational(&int(1)));
        assert!(Interval::from_int(1, p)
            .div_int(7)
            .mul(&Interval::from_int(7, p))
            .contains_rational(&int(1)));
        let two = Interval::from_int(2, p).sqrt();
        let sq = two.mul(&two);
        assert!(sq.contains_rational(&int(2)));
        assert!(two.hi_rational() - two.lo_rational() < crate::rational::pow2(-37));
    }

    #[test]
    fn square_of_straddling_interval_is_nonnegative() {
        let x = Interval {
            lo: Dyadic::from_int(-1),
            hi: Dyadic::from_int(2),
            prec: 10,
        };
        let sq = x.square();
        assert_eq!(sq.lo_rational(), int(0));
        assert_eq!(sq.hi_rational(), int(4));
    }

    #[test]
    fn rounding_is_directed() {
        let x = Dyadic {
            m: BigInt::from(0b1011),
            e: 0,
        };
        assert_eq!(x.clone().round(2, Dir::Down).to_rational(), int(8));
        assert_eq!(x.clone().round(2, Dir::Up).to_rational(), int(12));
        let y = Dyadic {
            m: BigInt::from(-0b1011),
            e: 0,
        };
        assert_eq!(y.clone().round(2, Dir::Down).to_rational(), int(-12));
        assert_eq!(y.round(2, Dir::Up).to_rational(), int(-8));
    }
}
