#![allow(dead_code)]

use hornfit::exactlp::LinearSystem;
use hornfit::rational::{int, BigRational};
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `coeffs . x <= rhs`
#[derive(Clone, Debug)]
struct Le {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
}

fn half_spaces(sys: &LinearSystem) -> Vec<Le> {
    let n = sys.num_vars();
    let mut out = Vec::new();
    let unit = |i: usize, sign: i64| {
        let mut v = vec![int(0); n];
        v[i] = int(sign);
        v
    };
    for (i, (lo, hi)) in sys.boxes.iter().enumerate() {
        out.push(Le {
            coeffs: unit(i, 1),
            rhs: hi.clone(),
        });
        out.push(Le {
            coeffs: unit(i, -1),
            rhs: -lo.clone(),
        });
    }
    for row in &sys.rows {
        if let Some(u) = &row.upper {
            out.push(Le {
                coeffs: row.coeffs.clone(),
                rhs: u.clone(),
            });
        }
        if let Some(l) = &row.lower {
            out.push(Le {
                coeffs: row.coeffs.iter().map(|c| -c.clone()).collect(),
                rhs: -l.clone(),
            });
        }
    }
    out
}

/// Exact range of variable `var` over the system by Fourier-Motzkin
/// elimination of every other variable. `None` when infeasible.
pub fn fm_range(sys: &LinearSystem, var: usize) -> Option<(BigRational, BigRational)> {
    let mut cons = half_spaces(sys);
    for elim in (0..sys.num_vars()).filter(|&k| k != var) {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in cons {
            if c.coeffs[elim].is_positive() {
                pos.push(c);
            } else if c.coeffs[elim].is_negative() {
                neg.push(c);
            } else {
                rest.push(c);
            }
        }
        for p in &pos {
            for q in &neg {
                let wp = -q.coeffs[elim].clone();
                let wq = p.coeffs[elim].clone();
                let coeffs = p
                    .coeffs
                    .iter()
                    .zip(&q.coeffs)
                    .map(|(a, b)| a * &wp + b * &wq)
                    .collect();
                rest.push(Le {
                    coeffs,
                    rhs: &p.rhs * &wp + &q.rhs * &wq,
                });
            }
        }
        cons = rest;
    }
    let mut lo: Option<BigRational> = None;
    let mut hi: Option<BigRational> = None;
    for c in cons {
        let a = &c.coeffs[var];
        if a.is_zero() {
            if c.rhs.is_negative() {
                return None;
            }
        } else if a.is_positive() {
            let b = &c.rhs / a;
            hi = Some(hi.map_or(b.clone(), |h: BigRational| h.min(b)));
        } else {
            let b = &c.rhs / a;
            lo = Some(lo.map_or(b.clone(), |l: BigRational| l.max(b)));
        }
    }
    let (lo, hi) = (lo.expect("boxed"), hi.expect("boxed"));
    (lo <= hi).then_some((lo, hi))
}

fn small_rational(rng: &mut ChaCha8Rng, span: i64) -> BigRational {
    BigRational::new(
        rng.gen_range(-span..=span).into(),
        rng.gen_range(1..=6i64).into(),
    )
}

/// Seeded random system with at most three variables and eight rows. Rows
/// are banded around a hidden point most of the time, so both feasible and
/// infeasible systems occur.
pub fn random_system(rng: &mut ChaCha8Rng) -> LinearSystem {
    let n = rng.gen_range(1..=3);
    let names = (0..n).map(|i| format!("x{i}")).collect();
    let boxes = (0..n)
        .map(|_| {
            let a = small_rational(rng, 8);
            let b = small_rational(rng, 8);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect::<Vec<_>>();
    let hidden: Vec<BigRational> = boxes.iter().map(|(l, h)| (l + h) / int(2)).collect();
    let mut sys = LinearSystem::new(names, boxes);
    for _ in 0..rng.gen_range(0..=8) {
        let coeffs: Vec<BigRational> = (0..n).map(|_| int(rng.gen_range(-4..=4))).collect();
        let center: BigRational = if rng.gen_bool(0.8) {
            coeffs.iter().zip(&hidden).map(|(a, x)| a * x).sum()
        } else {
            small_rational(rng, 20)
        };
        let width = BigRational::new(
            rng.gen_range(0..=6i64).into(),
            rng.gen_range(1..=8i64).into(),
        );
        let lower = (!rng.gen_bool(0.2)).then(|| &center - &width);
        let upper = (!rng.gen_bool(0.2)).then(|| &center + &width);
        sys.add_row(coeffs, lower, upper);
    }
    sys
}
