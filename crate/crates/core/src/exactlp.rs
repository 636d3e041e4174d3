//! Exact rational linear feasibility and single-variable optimisation.
//!
//! Systems here have few variables (one per polynomial coefficient) and many
//! banded rows (one per test point), every variable boxed. The solver is a dual
//! simplex over the *active set*: a vertex is described by `n` active
//! constraints, so every basis is an `n x n` matrix regardless of the number of
//! rows. The box makes a dual-feasible start available for any objective, so no
//! phase 1 is needed; infeasibility shows up as an unbounded dual ray.
//!
//! All arithmetic is on integers. Rows are scaled to integer coefficients once,
//! vertices are solved fraction-free (Bareiss) and kept as numerator vectors
//! over a common positive denominator. Pivoting follows Bland's rule.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, BigRational};

/// One banded row `lower <= coeffs . x <= upper`; a missing bound is infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<BigRational>,
    pub lower: Option<BigRational>,
    pub upper: Option<BigRational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub variables: Vec<String>,
    pub rows: Vec<Row>,
    /// Finite `[lo, hi]` per variable.
    pub boxes: Vec<(BigRational, BigRational)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Optimal {
        value: BigRational,
        witness: Vec<BigRational>,
    },
}

impl LpOutcome {
    pub fn value(&self) -> Option<&BigRational> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            LpOutcome::Infeasible => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<BigRational>),
    Infeasible,
}

impl LinearSystem {
    pub fn new(variables: Vec<String>, boxes: Vec<(BigRational, BigRational)>) -> LinearSystem {
        assert_eq!(variables.len(), boxes.len());
        LinearSystem {
            variables,
            rows: Vec::new(),
            boxes,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn add_row(
        &mut self,
        coeffs: Vec<BigRational>,
        lower: Option<BigRational>,
        upper: Option<BigRational>,
    ) {
        assert_eq!(
            coeffs.len(),
            self.num_vars(),
            "row width must match variables"
        );
        self.rows.push(Row {
            coeffs,
            lower,
            upper,
        });
    }

    /// Collapses the box of `var` to `[value, value]`.
    pub fn fix(&mut self, var: usize, value: BigRational) {
        self.boxes[var] = (value.clone(), value);
    }

    /// Exact membership test for a point.
    pub fn satisfies(&self, x: &[BigRational]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let in_boxes = self
            .boxes
            .iter()
            .zip(x)
            .all(|((lo, hi), v)| lo <= v && v <= hi);
        in_boxes
            && self.rows.iter().all(|row| {
                let v: BigRational = row.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                row.lower.as_ref().is_none_or(|l| l <= &v)
                    && row.upper.as_ref().is_none_or(|u| &v <= u)
            })
    }

    pub fn minimize(&self, var: usize) -> LpOutcome {
        Solver::new(self).minimize(var)
    }

    pub fn maximize(&self, var: usize) -> LpOutcome {
        Solver::new(self).maximize(var)
    }

    pub fn check_feasible(&self) -> Feasibility {
        Solver::new(self).check_feasible()
    }

    /// Plain-text exact dump, readable back with [`LinearSystem::parse_dump`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "vars {}", self.variables.join(" ")).unwrap();
        for (name, (lo, hi)) in self.variables.iter().zip(&self.boxes) {
            writeln!(out, "box {name} {lo} {hi}").unwrap();
        }
        for row in &self.rows {
            let lo = row
                .lower
                .as_ref()
                .map_or("-inf".to_string(), |v| v.to_string());
            let hi = row
                .upper
                .as_ref()
                .map_or("+inf".to_string(), |v| v.to_string());
            let coeffs: Vec<String> = row.coeffs.iter().map(|c| c.to_string()).collect();
            writeln!(out, "row {lo} {hi} : {}", coeffs.join(" ")).unwrap();
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<LinearSystem> {
        let bad = |line: &str| Error::Parse(line.to_string());
        let num = |tok: &str| rational::parse_rational(tok);
        let mut system: Option<LinearSystem> = None;
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("vars") => {
                    let vars: Vec<String> = toks.map(String::from).collect();
                    let boxes = vec![(rational::int(0), rational::int(0)); vars.len()];
                    system = Some(LinearSystem::new(vars, boxes));
                }
                Some("box") => {
                    let sys = system.as_mut().ok_or_else(|| bad(line))?;
                    let name = toks.next().ok_or_else(|| bad(line))?;
                    let idx = sys.var_index(name).ok_or_else(|| bad(line))?;
                    let lo = num(toks.next().ok_or_else(|| bad(line))?)?;
                    let hi = num(toks.next().ok_or_else(|| bad(line))?)?;
                    sys.boxes[idx] = (lo, hi);
                }
                Some("row") => {
                    let sys = system.as_mut().ok_or_else(|| bad(line))?;
                    let bound = |t: Option<&str>| -> Result<Option<BigRational>> {
                        match t {
                            Some("-inf") | Some("+inf") => Ok(None),
                            Some(t) => num(t).map(Some),
                            None => Err(bad(line)),
                        }
                    };
                    let lo = bound(toks.next())?;
                    let hi = bound(toks.next())?;
                    if toks.next() != Some(":") {
                        return Err(bad(line));
                    }
                    let coeffs = toks.map(num).collect::<Result<Vec<_>>>()?;
                    if coeffs.len() != sys.num_vars() {
                        return Err(bad(line));
                    }
                    sys.add_row(coeffs, lo, hi);
                }
                _ => return Err(bad(line)),
            }
        }
        system.ok_or_else(|| Error::Parse("missing `vars` line".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
    Fixed,
}

#[derive(Clone, Debug)]
struct Constraint {
    normal: Vec<BigInt>,
    lower: Option<BigInt>,
    upper: Option<BigInt>,
    /// Approximate `log2` of the largest normal entry.
    log_norm: f64,
}

impl Constraint {
    fn is_equality(&self) -> bool {
        matches!((&self.lower, &self.upper), (Some(l), Some(u)) if l == u)
    }

    fn bound(&self, side: Side) -> &BigInt {
        match side {
            Side::Lower | Side::Fixed => self.lower.as_ref().unwrap(),
            Side::Upper => self.upper.as_ref().unwrap(),
        }
    }
}

/// Active constraint indices (boxes first, then rows) describing a vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis(Vec<(usize, SideTag)>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideTag(Side);

/// Upper limit on pivots per solve; exceeding it means the anti-cycling rule
/// is broken, which is a bug.
pub const PIVOT_CEILING: u64 = 1_000_000;

/// Pivots chosen by largest violation before switching to Bland's rule,
/// which cannot cycle.
const GREEDY_PIVOTS: u64 = 5_000;

/// Integer-scaled form of a [`LinearSystem`], reusable across objectives.
#[derive(Clone, Debug)]
pub struct Solver {
    n: usize,
    cons: Vec<Constraint>,
    /// Total pivots performed by this solver.
    pub pivots: u64,
    /// Pivots of the most recent solve.
    pub last_pivots: u64,
}

fn scale_to_integers(
    coeffs: &[BigRational],
    lower: Option<&BigRational>,
    upper: Option<&BigRational>,
) -> Constraint {
    let mut lcm = BigInt::one();
    for q in coeffs.iter().chain(lower).chain(upper) {
        lcm = lcm.lcm(q.denom());
    }
    let to_int = |q: &BigRational| (q * &lcm).to_integer();
    let mut normal: Vec<BigInt> = coeffs.iter().map(to_int).collect();
    let mut lower = lower.map(to_int);
    let mut upper = upper.map(to_int);
    let mut g = BigInt::zero();
    for v in normal.iter().chain(lower.iter()).chain(upper.iter()) {
        g = g.gcd(v);
    }
    if g > BigInt::one() {
        for v in normal
            .iter_mut()
            .chain(lower.iter_mut())
            .chain(upper.iter_mut())
        {
            *v /= &g;
        }
    }
    let log_norm = normal
        .iter()
        .map(log2_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    Constraint {
        normal,
        lower,
        upper,
        log_norm,
    }
}

/// Approximate `log2 |x|`, for ranking only.
fn log2_abs(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(53);
    let top = (x.magnitude() >> shift)
        .to_f64()
        .expect("53-bit integer fits");
    top.log2() + shift as f64
}

/// Fraction-free solve of `m x = rhs_k` for each right-hand side. Returns the
/// numerators and a positive common denominator, or `None` if singular.
fn bareiss_solve(
    mut m: Vec<Vec<BigInt>>,
    rhs: &[Vec<BigInt>],
) -> Option<(Vec<Vec<BigInt>>, BigInt)> {
    let n = m.len();
    let k = rhs.len();
    for (i, row) in m.iter_mut().enumerate() {
        for r in rhs {
            row.push(r[i].clone());
        }
    }
    let width = n + k;
    let mut prev = BigInt::one();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| m[r][col].bits())?;
        m.swap(col, pivot);
        let (upper, lower) = m.split_at_mut(col + 1);
        let prow = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col].clone();
            for j in col + 1..width {
                let v = &row[j] * &prow[col] - &factor * &prow[j];
                row[j] = if prev.is_one() { v } else { v / &prev };
            }
            row[col] = BigInt::zero();
        }
        prev = m[col][col].clone();
    }
    let det = m[n - 1][n - 1].clone();
    let flip = det.is_negative();
    let mut sols = Vec::with_capacity(k);
    for r in 0..k {
        let mut x = vec![BigInt::zero(); n];
        for i in (0..n).rev() {
            let mut acc = &det * &m[i][n + r];
            for j in i + 1..n {
                acc -= &m[i][j] * &x[j];
            }
            debug_assert!((&acc % &m[i][i]).is_zero());
            x[i] = acc / &m[i][i];
        }
        if flip {
            x.iter_mut().for_each(|v| *v = -&*v);
        }
        sols.push(x);
    }
    let det = if flip { -det } else { det };
    Some((sols, det))
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compares `a/b` with `c/d` for nonzero `b`, `d` of any sign.
fn cmp_ratio(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt) -> Ordering {
    let (a, b) = if b.is_negative() {
        (-a, -b)
    } else {
        (a.clone(), b.clone())
    };
    let (c, d) = if d.is_negative() {
        (-c, -d)
    } else {
        (c.clone(), d.clone())
    };
    (a * d).cmp(&(c * b))
}

impl Solver {
    pub fn new(system: &LinearSystem) -> Solver {
        let n = system.num_vars();
        let mut cons = Vec::with_capacity(n + system.rows.len());
        for (i, (lo, hi)) in system.boxes.iter().enumerate() {
            let mut unit = vec![rational::int(0); n];
            unit[i] = rational::int(1);
            cons.push(scale_to_integers(&unit, Some(lo), Some(hi)));
        }
        for row in &system.rows {
            cons.push(scale_to_integers(
                &row.coeffs,
                row.lower.as_ref(),
                row.upper.as_ref(),
            ));
        }
        Solver {
            n,
            cons,
            pivots: 0,
            last_pivots: 0,
        }
    }

    pub fn minimize(&mut self, var: usize) -> LpOutcome {
        self.solve_var(var, false, None).0
    }

    pub fn maximize(&mut self, var: usize) -> LpOutcome {
        self.solve_var(var, true, None).0
    }

    pub fn check_feasible(&mut self) -> Feasibility {
        let c = vec![BigInt::zero(); self.n];
        match self.solve(&c, None).0 {
            LpOutcome::Infeasible => Feasibility::Infeasible,
            LpOutcome::Optimal { witness, .. } => Feasibility::Feasible(witness),
        }
    }

    /// Optimises one variable, starting from `hint` when it is still a valid
    /// dual-feasible basis. Returns the basis reached for later warm starts.
    pub fn solve_var(
        &mut self,
        var: usize,
        maximize: bool,
        hint: Option<&Basis>,
    ) -> (LpOutcome, Option<Basis>) {
        let mut c = vec![BigInt::zero(); self.n];
        c[var] = if maximize {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let (outcome, basis) = self.solve(&c, hint);
        let outcome = match outcome {
            LpOutcome::Optimal { witness, .. } => LpOutcome::Optimal {
                value: witness[var].clone(),
                witness,
            },
            LpOutcome::Infeasible => LpOutcome::Infeasible,
        };
        (outcome, basis)
    }

    fn initial_basis(&self, c: &[BigInt]) -> Vec<(usize, Side)> {
        (0..self.n)
            .map(|i| {
                let side = if self.cons[i].is_equality() {
                    Side::Fixed
                } else if c[i].is_negative() {
                    Side::Upper
                } else {
                    Side::Lower
                };
                (i, side)
            })
            .collect()
    }

    fn basis_matrix(&self, active: &[(usize, Side)]) -> Vec<Vec<BigInt>> {
        active
            .iter()
            .map(|&(k, _)| self.cons[k].normal.clone())
            .collect()
    }

    fn transpose(m: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
        let n = m.len();
        (0..n)
            .map(|j| (0..n).map(|i| m[i][j].clone()).collect())
            .collect()
    }

    fn dual_feasible(active: &[(usize, Side)], y: &[BigInt]) -> bool {
        active.iter().zip(y).all(|(&(_, side), yk)| match side {
            Side::Lower => !yk.is_negative(),
            Side::Upper => !yk.is_positive(),
            Side::Fixed => true,
        })
    }

    fn hint_usable(&self, hint: &Basis, c: &[BigInt]) -> Option<Vec<(usize, Side)>> {
        if hint.0.len() != self.n {
            return None;
        }
        let mut active = Vec::with_capacity(self.n);
        for &(k, SideTag(side)) in &hint.0 {
            let con = self.cons.get(k)?;
            let side = if con.is_equality() {
                Side::Fixed
            } else {
                match side {
                    Side::Lower if con.lower.is_some() => Side::Lower,
                    Side::Upper if con.upper.is_some() => Side::Upper,
                    _ => return None,
                }
            };
            active.push((k, side));
        }
        let bt = Self::transpose(&self.basis_matrix(&active));
        let (sol, _) = bareiss_solve(bt, &[c.to_vec()])?;
        Self::dual_feasible(&active, &sol[0]).then_some(active)
    }

    /// Minimises `c . x`. The witness is the optimal vertex.
    fn solve(&mut self, c: &[BigInt], hint: Option<&Basis>) -> (LpOutcome, Option<Basis>) {
        self.last_pivots = 0;
        if self
            .cons
            .iter()
            .any(|k| matches!((&k.lower, &k.upper), (Some(l), Some(u)) if l > u))
        {
            return (LpOutcome::Infeasible, None);
        }
        if self.n == 0 {
            let zero = BigInt::zero();
            let ok = self.cons.iter().all(|k| {
                k.lower.as_ref().is_none_or(|l| l <= &zero)
                    && k.upper.as_ref().is_none_or(|u| &zero <= u)
            });
            let outcome = if ok {
                LpOutcome::Optimal {
                    value: rational::int(0),
                    witness: Vec::new(),
                }
            } else {
                LpOutcome::Infeasible
            };
            return (outcome, None);
        }
        let mut active = hint
            .and_then(|h| self.hint_usable(h, c))
            .unwrap_or_else(|| self.initial_basis(c));
        loop {
            let b = self.basis_matrix(&active);
            let rhs: Vec<BigInt> = active
                .iter()
                .map(|&(k, side)| self.cons[k].bound(side).clone())
                .collect();
            let (sol, den) = bareiss_solve(b.clone(), &[rhs]).expect("basis stays nonsingular");
            let x = &sol[0];

            // most violated row first; Bland's lowest index once the budget is spent
            let bland = self.last_pivots >= GREEDY_PIVOTS;
            let mut entering = None;
            let mut best = f64::NEG_INFINITY;
            for (j, con) in self.cons.iter().enumerate() {
                if active.iter().any(|&(k, _)| k == j) {
                    continue;
                }
                let lhs = dot(&con.normal, x);
                let violation = match (&con.lower, &con.upper) {
                    (Some(l), _) if lhs < l * &den => Some((l * &den - &lhs, 1i8)),
                    (_, Some(u)) if lhs > u * &den => Some((&lhs - u * &den, -1i8)),
                    _ => None,
                };
                let Some((amount, sigma)) = violation else {
                    continue;
                };
                if bland {
                    entering = Some((j, sigma));
                    break;
                }
                let score = log2_abs(&amount) - con.log_norm;
                if score > best {
                    best = score;
                    entering = Some((j, sigma));
                }
            }
            let Some((j, sigma)) = entering else {
                let witness = x
                    .iter()
                    .map(|xi| BigRational::new(xi.clone(), den.clone()))
                    .collect::<Vec<_>>();
                let value = c
                    .iter()
                    .zip(&witness)
                    .map(|(ci, wi)| BigRational::from_integer(ci.clone()) * wi)
                    .sum();
                let basis = Basis(active.iter().map(|&(k, s)| (k, SideTag(s))).collect());
                return (LpOutcome::Optimal { value, witness }, Some(basis));
            };

            let bt = Self::transpose(&b);
            let (sol, _) =
                bareiss_solve(bt, &[c.to_vec(), self.cons[j].normal.clone()]).expect("nonsingular");
            let (y, alpha) = (&sol[0], &sol[1]);
            let mut leaving: Option<usize> = None;
            for p in 0..self.n {
                let (k, side) = active[p];
                let sa = if sigma > 0 {
                    alpha[p].clone()
                } else {
                    -alpha[p].clone()
                };
                let blocks = match side {
                    Side::Lower => sa.is_positive(),
                    Side::Upper => sa.is_negative(),
                    Side::Fixed => false,
                };
                if !blocks {
                    continue;
                }
                leaving = match leaving {
                    None => Some(p),
                    Some(q) => {
                        let sq = if sigma > 0 {
                            alpha[q].clone()
                        } else {
                            -alpha[q].clone()
                        };
                        match cmp_ratio(&y[p], &sa, &y[q], &sq) {
                            Ordering::Less => Some(p),
                            Ordering::Equal if k < active[q].0 => Some(p),
                            _ => Some(q),
                        }
                    }
                };
            }
            let Some(p) = leaving else {
                return (LpOutcome::Infeasible, None);
            };
            let side = if self.cons[j].is_equality() {
                Side::Fixed
            } else if sigma > 0 {
                Side::Lower
            } else {
                Side::Upper
            };
            active[p] = (j, side);
            self.pivots += 1;
            self.last_pivots += 1;
            assert!(
                self.last_pivots < PIVOT_CEILING,
                "simplex pivot ceiling exceeded"
            );
        }
    }
}
