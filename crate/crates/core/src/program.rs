//! Horner-like straight-line FMA programs.
//!
//! A program is a square `s = a * a` (when the form needs it) followed by a
//! chain of accumulator steps, each `acc = fma(acc, m, addend)` with `m` one
//! of `s` or `a`. The first step loads the highest-degree coefficient.
//!
//! The exact-arithmetic value of a program at `a` uses the *machine* square
//! `s`; after that every operation is exact, so the value is affine in the
//! coefficients. Rounding deviations are bounded step by step with
//! `|fma(x, m, c) - (X m + C)| <= ulp(|Xm + C| + |m| D)/2 + |m| D`.

use std::fmt;
use std::str::FromStr;

use num_traits::{ToPrimitive, Zero};

use crate::emul;
use crate::error::{Error, Result};
use crate::rational::{self, BigRational};
use crate::softfp::{f32_fma, f32_mul, half_ulp, invert_fma_monotone, F32Interval, Operand, F32};

/// Magnitude below which [`HornerSkeleton::eval_fast`] uses the software path.
const SOFT_BELOW: f32 = 1.0 / (1u64 << 60) as f32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Form {
    /// `s = a*a`, Horner in `s`, `acc *= s`, `fma(acc, a, a)`.
    Odd,
    /// `s = a*a`, Horner in `s`, `fma(acc, s, 1)`.
    EvenPlusOne,
    /// Horner in `a`; the result is the accumulator.
    Plain,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::Odd => "odd",
            Form::EvenPlusOne => "even_plus_one",
            Form::Plain => "plain",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Form> {
        match s {
            "odd" => Ok(Form::Odd),
            "even_plus_one" => Ok(Form::EvenPlusOne),
            "plain" => Ok(Form::Plain),
            other => Err(Error::Skeleton(format!("unknown form `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplier {
    S,
    A,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Addend {
    Coeff(usize),
    Zero,
    A,
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// `acc = c_k`
    Load(usize),
    /// `acc = fma(acc, by, add)`
    Fma { by: Multiplier, add: Addend },
}

impl Step {
    pub fn coefficient(self) -> Option<usize> {
        match self {
            Step::Load(k)
            | Step::Fma {
                add: Addend::Coeff(k),
                ..
            } => Some(k),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornerSkeleton {
    form: Form,
    labels: Vec<String>,
    steps: Vec<Step>,
}

impl HornerSkeleton {
    /// `labels` run from the highest-degree coefficient to the lowest.
    pub fn new(form: Form, labels: Vec<String>) -> Result<HornerSkeleton> {
        if labels.is_empty() {
            return Err(Error::Skeleton(
                "at least one coefficient is required".into(),
            ));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Skeleton(format!("bad coefficient label `{l}`")));
            }
            if labels[..i].contains(l) {
                return Err(Error::Skeleton(format!(
                    "duplicate coefficient label `{l}`"
                )));
            }
        }
        let horner_by = if form == Form::Plain {
            Multiplier::A
        } else {
            Multiplier::S
        };
        let mut steps = vec![Step::Load(0)];
        steps.extend((1..labels.len()).map(|k| Step::Fma {
            by: horner_by,
            add: Addend::Coeff(k),
        }));
        match form {
            Form::Odd => {
                steps.push(Step::Fma {
                    by: Multiplier::S,
                    add: Addend::Zero,
                });
                steps.push(Step::Fma {
                    by: Multiplier::A,
                    add: Addend::A,
                });
            }
            Form::EvenPlusOne => steps.push(Step::Fma {
                by: Multiplier::S,
                add: Addend::One,
            }),
            Form::Plain => {}
        }
        Ok(HornerSkeleton {
            form,
            labels,
            steps,
        })
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn num_coeffs(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownCoefficient(label.to_string()))
    }

    pub fn uses_square(&self) -> bool {
        self.form != Form::Plain
    }

    /// Index of the step that consumes coefficient `k`.
    pub fn step_of(&self, k: usize) -> usize {
        k
    }

    /// Human-readable text of one step, in the C-like notation of the trace.
    pub fn step_text(&self, j: usize) -> String {
        let m = |by| if by == Multiplier::S { "s" } else { "a" };
        match self.steps[j] {
            Step::Load(k) => format!("r = {}", self.labels[k]),
            Step::Fma {
                by,
                add: Addend::Coeff(k),
            } => format!("r = fmaf(r, {}, {})", m(by), self.labels[k]),
            Step::Fma {
                by,
                add: Addend::Zero,
            } => format!("r = r * {}", m(by)),
            Step::Fma { by, add: Addend::A } => format!("r = fmaf(r, {}, a)", m(by)),
            Step::Fma {
                by,
                add: Addend::One,
            } => format!("r = fmaf(r, {}, 1.0f)", m(by)),
        }
    }

    /// Allocation-free binary32 evaluation. Coefficients are in label order.
    /// Overflow shows up as a non-finite result.
    #[inline]
    pub fn eval_fast(&self, c: &[f32], a: f32) -> f32 {
        // below this the square and later products are binary32 subnormals
        if a.abs() < SOFT_BELOW && (self.uses_square() || a.abs() < f32::MIN_POSITIVE) {
            return self.eval_soft(c, a);
        }
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the feature was detected at runtime
            return unsafe { self.eval_hw_fma(c, a) };
        }
        self.eval_body(c, a)
    }

    /// `f32::mul_add` is a libm call unless compiled with the fma feature.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "fma")]
    unsafe fn eval_hw_fma(&self, c: &[f32], a: f32) -> f32 {
        self.eval_body(c, a)
    }

    /// Same results as [`HornerSkeleton::eval_fast`], computed with
    /// [`crate::emul`] so that subnormal intermediates stay cheap.
    pub fn eval_soft(&self, c: &[f32], a: f32) -> f32 {
        let a = emul::widen(a);
        let mut r = emul::widen(c[0]);
        let r = match self.form {
            Form::Odd | Form::EvenPlusOne => {
                let s = emul::mul(a, a);
                for &ck in &c[1..] {
                    r = emul::fma(r, s, emul::widen(ck));
                }
                if self.form == Form::Odd {
                    emul::fma(emul::mul(r, s), a, a)
                } else {
                    emul::fma(r, s, 1.0)
                }
            }
            Form::Plain => {
                for &ck in &c[1..] {
                    r = emul::fma(r, a, emul::widen(ck));
                }
                r
            }
        };
        r as f32
    }

    #[inline(always)]
    fn eval_body(&self, c: &[f32], a: f32) -> f32 {
        match self.form {
            Form::Odd => {
                let s = a * a;
                let mut r = c[0];
                for &ck in &c[1..] {
                    r = r.mul_add(s, ck);
                }
                (r * s).mul_add(a, a)
            }
            Form::EvenPlusOne => {
                let s = a * a;
                let mut r = c[0];
                for &ck in &c[1..] {
                    r = r.mul_add(s, ck);
                }
                r.mul_add(s, 1.0)
            }
            Form::Plain => {
                let mut r = c[0];
                for &ck in &c[1..] {
                    r = r.mul_add(a, ck);
                }
                r
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Fixed(F32),
    Boxed(BigRational, BigRational),
}

/// Per-coefficient state, parallel to the skeleton's labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientAssignment(pub Vec<Coefficient>);

impl CoefficientAssignment {
    pub fn boxed(n: usize, lo: BigRational, hi: BigRational) -> CoefficientAssignment {
        CoefficientAssignment(vec![Coefficient::Boxed(lo, hi); n])
    }

    pub fn fixed(values: &[F32]) -> CoefficientAssignment {
        CoefficientAssignment(values.iter().map(|&v| Coefficient::Fixed(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        matches!(self.0[k], Coefficient::Fixed(_))
    }

    pub fn fix(&mut self, k: usize, v: F32) {
        self.0[k] = Coefficient::Fixed(v);
    }

    /// All values, if every coefficient is fixed.
    pub fn fixed_values(&self) -> Option<Vec<F32>> {
        self.0
            .iter()
            .map(|c| match c {
                Coefficient::Fixed(v) => Some(*v),
                Coefficient::Boxed(..) => None,
            })
            .collect()
    }

    /// Exact `[lo, hi]` range of coefficient `k`.
    pub fn bounds(&self, k: usize) -> (BigRational, BigRational) {
        match &self.0[k] {
            Coefficient::Fixed(v) => (v.to_rational(), v.to_rational()),
            Coefficient::Boxed(lo, hi) => (lo.clone(), hi.clone()),
        }
    }
}

/// Forward rounding-error analysis of one program at one abscissa.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget {
    /// Per step: bound on `|acc_prev * m + addend|` before rounding.
    pub magnitudes: Vec<BigRational>,
    /// Per step: bound on `|computed acc - exact acc|`.
    pub deviations: Vec<BigRational>,
    pub delta_lo: BigRational,
    pub delta_hi: BigRational,
}

/// Values computed by one binary32 run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalTrace {
    pub s: Option<F32>,
    /// Accumulator after each step.
    pub acc: Vec<F32>,
}

impl EvalTrace {
    pub fn result(&self) -> F32 {
        *self.acc.last().expect("nonempty program")
    }

    pub fn dump(&self, skel: &HornerSkeleton) -> String {
        let mut out = String::new();
        if let Some(s) = self.s {
            out.push_str(&format!("s = a * a  -> {s}\n"));
        }
        for (j, v) in self.acc.iter().enumerate() {
            out.push_str(&format!("{}  -> {v}\n", skel.step_text(j)));
        }
        out
    }
}

fn machine_square(skel: &HornerSkeleton, a: F32) -> Result<Option<F32>> {
    skel.uses_square().then(|| f32_mul(a, a)).transpose()
}

fn multiplier(by: Multiplier, a: F32, s: Option<F32>) -> F32 {
    match by {
        Multiplier::A => a,
        Multiplier::S => s.expect("square computed"),
    }
}

fn addend_f32(add: Addend, coeffs: &[F32], a: F32) -> F32 {
    match add {
        Addend::Coeff(k) => coeffs[k],
        Addend::Zero => F32::ZERO,
        Addend::A => a,
        Addend::One => F32::ONE,
    }
}

/// Bit-exact binary32 run of a fully fixed program.
pub fn eval_f32(skel: &HornerSkeleton, coeffs: &[F32], a: F32) -> Result<(F32, EvalTrace)> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let s = machine_square(skel, a)?;
    let mut acc = Vec::with_capacity(skel.steps.len());
    let mut r = F32::ZERO;
    for &step in &skel.steps {
        r = match step {
            Step::Load(k) => coeffs[k],
            Step::Fma { by, add } => f32_fma(r, multiplier(by, a, s), addend_f32(add, coeffs, a))?,
        };
        acc.push(r);
    }
    let trace = EvalTrace { s, acc };
    Ok((trace.result(), trace))
}

/// Runs the steps after `from` with the accumulator forced to `v` at `from`.
pub fn eval_tail(
    skel: &HornerSkeleton,
    coeffs: &[F32],
    a: F32,
    from: usize,
    v: F32,
) -> Result<F32> {
    let s = machine_square(skel, a)?;
    let mut r = v;
    for &step in &skel.steps[from + 1..] {
        r = match step {
            Step::Load(_) => unreachable!("load is always the first step"),
            Step::Fma { by, add } => f32_fma(r, multiplier(by, a, s), addend_f32(add, coeffs, a))?,
        };
    }
    Ok(r)
}

/// `constant + grad . c`
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub grad: Vec<BigRational>,
    pub constant: BigRational,
}

impl AffineForm {
    pub fn eval(&self, c: &[BigRational]) -> BigRational {
        self.grad
            .iter()
            .zip(c)
            .map(|(g, x)| g * x)
            .sum::<BigRational>()
            + &self.constant
    }

    /// Largest absolute value over the coefficient boxes.
    pub fn sup_abs(&self, coeffs: &CoefficientAssignment) -> BigRational {
        let mut lo = self.constant.clone();
        let mut hi = self.constant.clone();
        for (k, g) in self.grad.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let (cl, ch) = coeffs.bounds(k);
            let (x, y) = (g * cl, g * ch);
            if x <= y {
                lo += x;
                hi += y;
            } else {
                lo += y;
                hi += x;
            }
        }
        rational::abs(&lo).max(rational::abs(&hi))
    }
}

/// Exact accumulator value after every step, as affine forms in the
/// coefficients.
pub fn step_rows(skel: &HornerSkeleton, a: F32) -> Result<Vec<AffineForm>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = skel.num_coeffs();
    let s = machine_square(skel, a)?;
    let ar = a.to_rational();
    let mut rows: Vec<AffineForm> = Vec::with_capacity(skel.steps.len());
    for &step in &skel.steps {
        let row = match step {
            Step::Load(k) => {
                let mut grad = vec![rational::int(0); n];
                grad[k] = rational::int(1);
                AffineForm {
                    grad,
                    constant: rational::int(0),
                }
            }
            Step::Fma { by, add } => {
                let m = multiplier(by, a, s).to_rational();
                let prev = rows.last().expect("load comes first");
                let mut grad: Vec<BigRational> = prev.grad.iter().map(|g| g * &m).collect();
                let mut constant = &prev.constant * &m;
                match add {
                    Addend::Coeff(k) => grad[k] += rational::int(1),
                    Addend::Zero => {}
                    Addend::A => constant += &ar,
                    Addend::One => constant += rational::int(1),
                }
                AffineForm { grad, constant }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// The program's exact value as `constant + grad . c`.
pub fn coefficient_row(skel: &HornerSkeleton, a: F32) -> Result<(Vec<BigRational>, BigRational)> {
    let row = step_rows(skel, a)?.pop().expect("nonempty program");
    Ok((row.grad, row.constant))
}

/// Exact Horner value with the machine square and exact arithmetic after it.
pub fn eval_exact(skel: &HornerSkeleton, coeffs: &[BigRational], a: F32) -> Result<BigRational> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let s = machine_square(skel, a)?;
    let mut r = rational::int(0);
    for &step in &skel.steps {
        r = match step {
            Step::Load(k) => coeffs[k].clone(),
            Step::Fma { by, add } => {
                let prod = r * multiplier(by, a, s).to_rational();
                match add {
                    Addend::Coeff(k) => prod + &coeffs[k],
                    Addend::Zero => prod,
                    Addend::A => prod + a.to_rational(),
                    Addend::One => prod + rational::int(1),
                }
            }
        };
    }
    Ok(r)
}

/// Rounding-error bounds valid for every coefficient choice in the boxes.
pub fn forward_error_bounds(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    a: F32,
) -> Result<ErrorBudget> {
    let rows = step_rows(skel, a)?;
    forward_from_rows(skel, coeffs, a, &rows)
}

fn forward_from_rows(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    a: F32,
    rows: &[AffineForm],
) -> Result<ErrorBudget> {
    let s = machine_square(skel, a)?;
    let max = F32::MAX.to_rational();
    let mut magnitudes = Vec::with_capacity(rows.len());
    let mut deviations: Vec<BigRational> = Vec::with_capacity(rows.len());
    for (j, &step) in skel.steps.iter().enumerate() {
        let sup = rows[j].sup_abs(coeffs);
        let (mag, dev) = match step {
            Step::Load(_) => (sup, rational::int(0)),
            Step::Fma { by, .. } => {
                let m = rational::abs(&multiplier(by, a, s).to_rational());
                let carried = m * deviations.last().expect("load comes first");
                let mag = sup + &carried;
                if mag > max {
                    return Err(Error::Overflow);
                }
                let dev = half_ulp(&mag)? + carried;
                (mag, dev)
            }
        };
        magnitudes.push(mag);
        deviations.push(dev);
    }
    let delta_hi = deviations.last().expect("nonempty program").clone();
    Ok(ErrorBudget {
        magnitudes,
        deviations,
        delta_lo: -delta_hi.clone(),
        delta_hi,
    })
}

/// Step rows with every rational widened to an enclosing binary64 interval.
#[derive(Clone, Debug)]
pub(crate) struct RowMagnitudes {
    grad: Vec<Vec<(f64, f64)>>,
    constant: Vec<(f64, f64)>,
}

fn enclose(x: &BigRational) -> (f64, f64) {
    if x.is_zero() {
        return (0.0, 0.0);
    }
    let v = x.to_f64().unwrap_or(f64::NAN);
    (v.next_down().next_down(), v.next_up().next_up())
}

/// Outward-rounded product of two intervals.
fn mul_outward((al, ah): (f64, f64), (bl, bh): (f64, f64)) -> (f64, f64) {
    let p = [al * bl, al * bh, ah * bl, ah * bh];
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo.next_down(), hi.next_up())
}

impl RowMagnitudes {
    pub(crate) fn new(rows: &[AffineForm]) -> RowMagnitudes {
        RowMagnitudes {
            grad: rows
                .iter()
                .map(|r| r.grad.iter().map(enclose).collect())
                .collect(),
            constant: rows.iter().map(|r| enclose(&r.constant)).collect(),
        }
    }
}

/// Half an ulp of the binary32 spacing at magnitude `m`, for `m` below the
/// binary32 overflow threshold. Nondecreasing in `m`.
fn half_ulp_upper(m: f64) -> f64 {
    let e = if m < f64::powi(2.0, -126) {
        -126
    } else {
        ((m.to_bits() >> 52) & 0x7ff) as i32 - 1023
    };
    f64::powi(2.0, e - 24)
}

/// Upper bound on the forward deviation after step `upto`, at least as large
/// as the exact `deviations[upto]` of [`forward_error_bounds`]. Every
/// operation is rounded upward by stepping to the next binary64 value.
pub(crate) fn deviation_upper(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    a: F32,
    mags: &RowMagnitudes,
    upto: usize,
) -> Result<BigRational> {
    let s = machine_square(skel, a)?;
    let max = f64::from(F32::MAX.to_f32());
    let boxes: Vec<(f64, f64)> = (0..coeffs.len())
        .map(|k| {
            let (lo, hi) = coeffs.bounds(k);
            (enclose(&lo).0, enclose(&hi).1)
        })
        .collect();
    let mut dev = 0.0f64;
    for (j, &step) in skel.steps.iter().enumerate().take(upto + 1) {
        let Step::Fma { by, .. } = step else { continue };
        let (mut lo, mut hi) = mags.constant[j];
        for (&g, &b) in mags.grad[j].iter().zip(&boxes) {
            if g != (0.0, 0.0) {
                let (pl, ph) = mul_outward(g, b);
                lo = (lo + pl).next_down();
                hi = (hi + ph).next_up();
            }
        }
        let sup = lo.abs().max(hi.abs());
        let m = f64::from(multiplier(by, a, s).to_f32()).abs();
        let carried = if dev == 0.0 { 0.0 } else { (m * dev).next_up() };
        let mag = (sup + carried).next_up();
        if mag.is_nan() || mag > max {
            return Err(Error::Overflow);
        }
        dev = (half_ulp_upper(mag) + carried).next_up();
    }
    Ok(BigRational::from_float(dev).expect("finite deviation"))
}

/// Allowed accumulator values, propagated backwards from the program output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Backward {
    /// Step whose output `targets[0]` constrains.
    pub split: usize,
    /// `targets[i]` bounds the accumulator after step `split + i`; the last
    /// entry is the acceptable output itself.
    pub targets: Vec<F32Interval>,
}

impl Backward {
    pub fn target(&self) -> F32Interval {
        self.targets[0]
    }
}

/// The step whose output is the deepest accumulator reachable by inversion:
/// the one holding the lowest-degree unfixed coefficient, or the initial load
/// when everything is fixed.
pub fn split_step(skel: &HornerSkeleton, coeffs: &CoefficientAssignment) -> usize {
    (0..skel.num_coeffs())
        .rev()
        .find(|&k| !coeffs.is_fixed(k))
        .map_or(0, |k| skel.step_of(k))
}

/// Exact set of accumulator values after the split step from which the
/// remaining, fully determined steps land in `acceptable`. `None` when no
/// binary32 value works.
pub fn backward_propagate(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    a: F32,
    acceptable: F32Interval,
) -> Result<Option<Backward>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let split = split_step(skel, coeffs);
    let s = machine_square(skel, a)?;
    let mut targets = vec![acceptable];
    let mut t = acceptable;
    for j in (split + 1..skel.steps.len()).rev() {
        let Step::Fma { by, add } = skel.steps[j] else {
            unreachable!("load is always the first step")
        };
        let addend = match add {
            Addend::Coeff(k) => match &coeffs.0[k] {
                Coefficient::Fixed(v) => *v,
                Coefficient::Boxed(..) => {
                    unreachable!("steps after the split use fixed coefficients")
                }
            },
            Addend::Zero => F32::ZERO,
            Addend::A => a,
            Addend::One => F32::ONE,
        };
        match invert_fma_monotone(Operand::First, [multiplier(by, a, s), addend], t) {
            Some(prev) => t = prev,
            None => return Ok(None),
        }
        targets.push(t);
    }
    targets.reverse();
    Ok(Some(Backward { split, targets }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, pow2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(s: &str) -> F32 {
        s.parse().unwrap()
    }

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn sin_skel() -> HornerSkeleton {
        HornerSkeleton::new(Form::Odd, labels(&["c9", "c7", "c5", "c3"])).unwrap()
    }

    fn random_f32(rng: &mut ChaCha8Rng, scale: f32) -> F32 {
        F32::from_f32(rng.gen_range(-1.0f32..1.0) * scale)
    }

    #[test]
    fn skeleton_grammar() {
        let s = sin_skel();
        assert_eq!(s.steps().len(), 6);
        assert_eq!(s.step_text(0), "r = c9");
        assert_eq!(s.step_text(3), "r = fmaf(r, s, c3)");
        assert_eq!(s.step_text(4), "r = r * s");
        assert_eq!(s.step_text(5), "r = fmaf(r, a, a)");
        let e = HornerSkeleton::new(Form::EvenPlusOne, labels(&["c4", "c2"])).unwrap();
        assert_eq!(e.step_text(2), "r = fmaf(r, s, 1.0f)");
        assert!(HornerSkeleton::new(Form::Plain, vec![]).is_err());
        assert!(HornerSkeleton::new(Form::Plain, labels(&["c1", "c1"])).is_err());
        assert_eq!("even_plus_one".parse::<Form>().unwrap(), Form::EvenPlusOne);
    }

    #[test]
    fn zero_coefficients_give_identity() {
        let skel = sin_skel();
        let zeros = [F32::ZERO; 4];
        for a in [
            f("0x1p-1"),
            f("-0x1.921fb4p-1"),
            F32::MIN_SUBNORMAL,
            F32::NEG_ZERO,
        ] {
            let (r, trace) = eval_f32(&skel, &zeros, a).unwrap();
            assert!(r.value_eq(a));
            assert_eq!(trace.acc.len(), 6);
            let exact = eval_exact(&skel, &vec![int(0); 4], a).unwrap();
            assert_eq!(exact, a.to_rational());
        }
    }

    #[test]
    fn odd_gradient_is_a_times_powers_of_s() {
        let a = f("0x1p-1");
        let (grad, constant) = coefficient_row(&sin_skel(), a).unwrap();
        assert_eq!(constant, pow2(-1));
        // labels run c9, c7, c5, c3
        assert_eq!(grad, vec![pow2(-9), pow2(-7), pow2(-5), pow2(-3)]);
        let plain = HornerSkeleton::new(Form::Plain, labels(&["c0"])).unwrap();
        assert_eq!(coefficient_row(&plain, a).unwrap(), (vec![int(1)], int(0)));
        let budget =
            forward_error_bounds(&plain, &CoefficientAssignment::boxed(1, int(-1), int(1)), a)
                .unwrap();
        assert_eq!(budget.delta_hi, int(0));
    }

    #[test]
    fn exact_value_matches_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for form in [Form::Odd, Form::EvenPlusOne, Form::Plain] {
            let skel = HornerSkeleton::new(form, labels(&["p", "q", "r", "t"])).unwrap();
            for _ in 0..200 {
                let a = random_f32(&mut rng, 2.0);
                let c: Vec<BigRational> = (0..4)
                    .map(|_| random_f32(&mut rng, 1.0).to_rational())
                    .collect();
                let ar = a.to_rational();
                let s = f32_mul(a, a).unwrap().to_rational();
                let x = if form == Form::Plain {
                    ar.clone()
                } else {
                    s.clone()
                };
                // sum of c_k x^(3-k), evaluated term by term
                let mut poly = int(0);
                for (k, ck) in c.iter().enumerate() {
                    let mut term = ck.clone();
                    for _ in 0..3 - k {
                        term *= &x;
                    }
                    poly += term;
                }
                let expected = match form {
                    Form::Odd => &ar + &ar * &s * poly,
                    Form::EvenPlusOne => int(1) + &s * poly,
                    Form::Plain => poly,
                };
                assert_eq!(eval_exact(&skel, &c, a).unwrap(), expected);
                let (grad, constant) = coefficient_row(&skel, a).unwrap();
                let via_row: BigRational =
                    grad.iter().zip(&c).map(|(g, x)| g * x).sum::<BigRational>() + constant;
                assert_eq!(via_row, expected);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let skel = HornerSkeleton::new(Form::Odd, labels(&["c7", "c5", "c3"])).unwrap();
        for _ in 0..50 {
            let a = random_f32(&mut rng, 1.0);
            let c: Vec<BigRational> = (0..3)
                .map(|_| random_f32(&mut rng, 1.0).to_rational())
                .collect();
            let (grad, _) = coefficient_row(&skel, a).unwrap();
            let base = eval_exact(&skel, &c, a).unwrap();
            for i in 0..3 {
                let mut bumped = c.clone();
                bumped[i] += int(1);
                assert_eq!(eval_exact(&skel, &bumped, a).unwrap() - &base, grad[i]);
            }
        }
    }

    #[test]
    fn forward_chain_at_one_half() {
        let budget = forward_error_bounds(
            &sin_skel(),
            &CoefficientAssignment::boxed(4, int(-1), int(1)),
            f("0x1p-1"),
        )
        .unwrap();
        // step 1 is r5 = fma(c9, s, c7), step 2 is r4
        assert_eq!(budget.magnitudes[1], BigRational::new(5.into(), 4.into()));
        assert_eq!(budget.deviations[1], pow2(-24));
        assert_eq!(
            budget.magnitudes[2],
            BigRational::new(21.into(), 16.into()) + pow2(-26)
        );
        assert_eq!(budget.deviations[2], pow2(-24) + pow2(-26));
        assert_eq!(budget.delta_lo, -budget.delta_hi.clone());
    }

    #[test]
    fn forward_bounds_contain_sampled_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let skel = sin_skel();
        let boxes = CoefficientAssignment::boxed(4, int(-1), int(1));
        for _ in 0..100 {
            let a = random_f32(&mut rng, 1.0);
            let budget = forward_error_bounds(&skel, &boxes, a).unwrap();
            for _ in 0..100 {
                let c: Vec<F32> = (0..4).map(|_| random_f32(&mut rng, 1.0)).collect();
                let (r, _) = eval_f32(&skel, &c, a).unwrap();
                let exact = eval_exact(
                    &skel,
                    &c.iter().map(|x| x.to_rational()).collect::<Vec<_>>(),
                    a,
                )
                .unwrap();
                let err = r.to_rational() - exact;
                assert!(budget.delta_lo <= err && err <= budget.delta_hi);
            }
        }
    }

    #[test]
    fn fast_deviation_dominates_exact_and_stays_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let skel = sin_skel();
        for _ in 0..200 {
            let a = random_f32(&mut rng, 1.0);
            let mut coeffs = CoefficientAssignment::boxed(4, int(-1), int(1));
            if rng.gen_bool(0.5) {
                coeffs.0[0] = Coefficient::Fixed(random_f32(&mut rng, 1.0));
            }
            let rows = step_rows(&skel, a).unwrap();
            let mags = RowMagnitudes::new(&rows);
            let exact = forward_error_bounds(&skel, &coeffs, a).unwrap();
            for j in 0..skel.steps.len() {
                let fast = deviation_upper(&skel, &coeffs, a, &mags, j).unwrap();
                assert!(fast >= exact.deviations[j]);
                assert!(
                    fast <= &exact.deviations[j] * BigRational::new(1025.into(), 1024.into())
                        + pow2(-149)
                );
            }
        }
    }

    #[test]
    fn worked_example_backward() {
        let acceptable = F32Interval::new(f("0x1.eaee86p-2"), f("0x1.eaee88p-2")).unwrap();
        let bw = backward_propagate(
            &sin_skel(),
            &CoefficientAssignment::boxed(4, int(-1), int(1)),
            f("0x1p-1"),
            acceptable,
        )
        .unwrap()
        .unwrap();
        assert_eq!(bw.split, 3);
        assert_eq!(bw.targets.len(), 3);
        assert_eq!(bw.targets[2], acceptable);
        assert_eq!(
            bw.targets[1],
            F32Interval::new(f("-0x1.5117aep-5"), f("-0x1.511770p-5")).unwrap()
        );
        assert_eq!(
            bw.target(),
            F32Interval::new(f("-0x1.5117aep-3"), f("-0x1.511770p-3")).unwrap()
        );
    }

    #[test]
    fn identity_tail_returns_acceptable() {
        let skel = HornerSkeleton::new(Form::Plain, labels(&["c1", "c0"])).unwrap();
        let acc = F32Interval::new(f("0x1p-3"), f("0x1p-2")).unwrap();
        let bw = backward_propagate(
            &skel,
            &CoefficientAssignment::boxed(2, int(-1), int(1)),
            f("0x1p-1"),
            acc,
        )
        .unwrap()
        .unwrap();
        assert_eq!(bw.split, 1);
        assert_eq!(bw.targets, vec![acc]);
    }

    #[test]
    fn backward_agrees_with_tail_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let skel = sin_skel();
        for _ in 0..100 {
            let a = F32::from_f32(rng.gen_range(0.05f32..0.8));
            let c: Vec<F32> = [-0.16f32, 0.0083, -0.0002, 2.7e-6]
                .iter()
                .rev()
                .map(|&x| F32::from_f32(x))
                .collect();
            let mut coeffs = CoefficientAssignment::boxed(4, int(-1), int(1));
            let fixed = rng.gen_range(0..=4);
            for k in (4 - fixed..4).rev() {
                coeffs.fix(k, c[k]);
            }
            let (r, _) = eval_f32(&skel, &c, a).unwrap();
            let lo = F32::from_ordinal(r.ordinal() - rng.gen_range(0..3)).unwrap();
            let hi = F32::from_ordinal(r.ordinal() + rng.gen_range(0..3)).unwrap();
            let acceptable = F32Interval::new(lo, hi).unwrap();
            let bw = backward_propagate(&skel, &coeffs, a, acceptable)
                .unwrap()
                .unwrap();
            let t = bw.target();
            let fixed_all: Vec<F32> = c.clone();
            let (first, last) = (t.first_ordinal(), t.last_ordinal());
            let window = (first - 40..first + 40).chain(last - 40..last + 40);
            for n in window {
                let v = F32::from_ordinal(n).unwrap();
                let out = eval_tail(&skel, &fixed_all, a, bw.split, v).unwrap();
                assert_eq!(t.contains(v), acceptable.contains(out), "v = {v}");
            }
        }
    }
}
