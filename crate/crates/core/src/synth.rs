//! The coefficient synthesis heuristic.
//!
//! An inner search fixes coefficients one at a time. Before each choice the
//! exact LP over the current test points bounds the coefficient; a value is
//! drawn inside those bounds and the search recurses, trying a few values per
//! level. Once every coefficient is fixed the program is run in binary32 at
//! each test point. The outer loop scans the whole domain for a point where
//! the finished program fails, adds it to the test points, and searches again.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exactlp::{Basis, LinearSystem, LpOutcome, Solver};
use crate::funcspec::AcceptanceOracle;
use crate::program::{
    backward_propagate, deviation_upper, eval_f32, step_rows, AffineForm, Coefficient,
    CoefficientAssignment, HornerSkeleton, RowMagnitudes,
};
use crate::rational::{self, BigRational};
use crate::softfp::{F32Interval, F32};
use crate::verify;

/// How candidate values are drawn inside a coefficient's bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleRule {
    /// Mean of two independent uniform draws, favouring the middle.
    TwoUniformAverage,
    Uniform,
}

impl SampleRule {
    pub fn name(self) -> &'static str {
        match self {
            SampleRule::TwoUniformAverage => "two_uniform_average",
            SampleRule::Uniform => "uniform",
        }
    }

    pub fn from_name(s: &str) -> Result<SampleRule> {
        match s {
            "two_uniform_average" => Ok(SampleRule::TwoUniformAverage),
            "uniform" => Ok(SampleRule::Uniform),
            other => Err(Error::Config(format!("unknown sample rule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Coefficient indices, in the order they get fixed.
    pub fixing_order: Vec<usize>,
    pub branching: usize,
    pub sample_rule: SampleRule,
    pub outer_iteration_limit: usize,
    pub inner_restart_limit: usize,
    pub rng_seed: u64,
    /// Starting test points; `None` picks endpoints, zero and Chebyshev nodes.
    pub initial_test_points: Option<Vec<F32>>,
    /// Starting `[lo, hi]` per coefficient.
    pub boxes: Vec<(BigRational, BigRational)>,
}

impl SynthConfig {
    /// Defaults for `skel`: fix from the lowest degree up, boxes `[-1, 1]`.
    pub fn new(skel: &HornerSkeleton) -> SynthConfig {
        let n = skel.num_coeffs();
        SynthConfig {
            fixing_order: (0..n).rev().collect(),
            branching: 4,
            sample_rule: SampleRule::TwoUniformAverage,
            outer_iteration_limit: 1000,
            inner_restart_limit: 64,
            rng_seed: 1,
            initial_test_points: None,
            boxes: vec![(rational::int(-1), rational::int(1)); n],
        }
    }

    pub fn validate(&self, skel: &HornerSkeleton) -> Result<()> {
        let n = skel.num_coeffs();
        let mut seen = vec![false; n];
        for &k in &self.fixing_order {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Config(
                    "fixing order must be a permutation of the coefficients".into(),
                ));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(
                "fixing order must be a permutation of the coefficients".into(),
            ));
        }
        if self.branching == 0 {
            return Err(Error::Config("branching must be at least 1".into()));
        }
        if self.boxes.len() != n || self.boxes.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::Config(
                "one nonempty box per coefficient is required".into(),
            ));
        }
        Ok(())
    }
}

/// Per-point data that does not depend on the coefficients.
#[derive(Clone, Debug)]
struct PointData {
    a: F32,
    /// `None` when no output is acceptable at `a`.
    bracket: Option<F32Interval>,
    rows: Vec<AffineForm>,
    mags: RowMagnitudes,
}

impl PointData {
    fn new(skel: &HornerSkeleton, oracle: &dyn AcceptanceOracle, a: F32) -> Result<PointData> {
        let bracket = match oracle.bracket(a) {
            Ok(b) => Some(b),
            Err(Error::EmptyBracket(_)) => None,
            Err(e) => return Err(e),
        };
        let rows = step_rows(skel, a)?;
        let mags = RowMagnitudes::new(&rows);
        Ok(PointData {
            a,
            bracket,
            rows,
            mags,
        })
    }
}

/// Heuristic state carried across outer iterations.
#[derive(Clone, Debug)]
pub struct SynthState {
    points: Vec<PointData>,
    pub last_success: Option<Vec<F32>>,
}

impl SynthState {
    pub fn new(
        skel: &HornerSkeleton,
        oracle: &dyn AcceptanceOracle,
        points: &[F32],
    ) -> Result<SynthState> {
        let mut state = SynthState {
            points: Vec::new(),
            last_success: None,
        };
        for &a in points {
            state.add_point(skel, oracle, a)?;
        }
        Ok(state)
    }

    /// Adds `a` unless already present. Returns whether it was new.
    pub fn add_point(
        &mut self,
        skel: &HornerSkeleton,
        oracle: &dyn AcceptanceOracle,
        a: F32,
    ) -> Result<bool> {
        if self.points.iter().any(|p| p.a == a) {
            return Ok(false);
        }
        self.points.push(PointData::new(skel, oracle, a)?);
        Ok(true)
    }

    pub fn test_points(&self) -> Vec<F32> {
        self.points.iter().map(|p| p.a).collect()
    }
}

fn contradiction(sys: &mut LinearSystem) {
    let n = sys.num_vars();
    sys.add_row(
        vec![BigRational::zero(); n],
        Some(rational::int(1)),
        Some(rational::int(0)),
    );
}

fn constraints_from(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    points: &[PointData],
) -> Result<LinearSystem> {
    let free: Vec<usize> = (0..coeffs.len()).filter(|&k| !coeffs.is_fixed(k)).collect();
    let names = free.iter().map(|&k| skel.labels()[k].clone()).collect();
    let boxes = free.iter().map(|&k| coeffs.bounds(k)).collect();
    let mut sys = LinearSystem::new(names, boxes);
    for p in points {
        let Some(bracket) = p.bracket else {
            contradiction(&mut sys);
            continue;
        };
        let Some(back) = backward_propagate(skel, coeffs, p.a, bracket)? else {
            contradiction(&mut sys);
            continue;
        };
        let j = back.split;
        let dev = &deviation_upper(skel, coeffs, p.a, &p.mags, j)?;
        let row = &p.rows[j];
        let mut constant = row.constant.clone();
        for (k, g) in row.grad.iter().enumerate() {
            if let Coefficient::Fixed(v) = coeffs.0[k] {
                constant += g * v.to_rational();
            }
        }
        let target = back.target();
        let lower = (target.lo != F32::MIN).then(|| target.lo.to_rational() - dev - &constant);
        let upper = (target.hi != F32::MAX).then(|| target.hi.to_rational() + dev - &constant);
        let grad = free.iter().map(|&k| row.grad[k].clone()).collect();
        sys.add_row(grad, lower, upper);
    }
    Ok(sys)
}

/// One banded row per test point over the unfixed coefficients: the exact
/// accumulator after the split step must lie within the deviation bound of
/// the values that backward propagation through the fixed tail allows.
pub fn build_constraints(
    skel: &HornerSkeleton,
    coeffs: &CoefficientAssignment,
    oracle: &dyn AcceptanceOracle,
    points: &[F32],
) -> Result<LinearSystem> {
    let data = points
        .iter()
        .map(|&a| PointData::new(skel, oracle, a))
        .collect::<Result<Vec<_>>>()?;
    constraints_from(skel, coeffs, &data)
}

/// Counters and log of a synthesis run. Contains nothing time-dependent, so
/// equal inputs give byte-identical reports.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub iterations: usize,
    pub restarts: usize,
    pub lp_solves: u64,
    pub pivots: u64,
    pub test_points: Vec<F32>,
    pub coefficients: Option<Vec<F32>>,
    pub failure: Option<String>,
    pub log: Vec<String>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "status = {}",
            if self.coefficients.is_some() {
                "success"
            } else {
                "failure"
            }
        )?;
        if let Some(why) = &self.failure {
            writeln!(f, "failure = {why}")?;
        }
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "restarts = {}", self.restarts)?;
        writeln!(f, "lp_solves = {}", self.lp_solves)?;
        writeln!(f, "pivots = {}", self.pivots)?;
        let pts: Vec<String> = self.test_points.iter().map(|p| p.to_string()).collect();
        writeln!(f, "test_points = [{}]", pts.join(", "))?;
        if let Some(c) = &self.coefficients {
            let cs: Vec<String> = c.iter().map(|p| p.to_string()).collect();
            writeln!(f, "coefficients = [{}]", cs.join(", "))?;
        }
        for line in &self.log {
            writeln!(f, "log = {line}")?;
        }
        Ok(())
    }
}

/// Representable values in the exact interval `[lo, hi]`, if any.
fn representable_range(lo: &BigRational, hi: &BigRational) -> Option<(F32, F32)> {
    let l = rational::ceil_f32(lo).ok()?;
    let h = rational::floor_f32(hi).ok()?;
    (l.value_cmp(h) != std::cmp::Ordering::Greater).then_some((l, h))
}

fn uniform_unit(rng: &mut ChaCha8Rng) -> BigRational {
    BigRational::new(BigInt::from(rng.gen::<u64>()), BigInt::from(1u128 << 64))
}

fn sample(
    rule: SampleRule,
    rng: &mut ChaCha8Rng,
    lo: &BigRational,
    hi: &BigRational,
) -> BigRational {
    let t = match rule {
        SampleRule::TwoUniformAverage => (uniform_unit(rng) + uniform_unit(rng)) / rational::int(2),
        SampleRule::Uniform => uniform_unit(rng),
    };
    lo + (hi - lo) * t
}

struct Search<'a> {
    skel: &'a HornerSkeleton,
    config: &'a SynthConfig,
    points: &'a [PointData],
    last_success: Option<&'a [F32]>,
    rng: ChaCha8Rng,
    hints: Vec<[Option<Basis>; 2]>,
    lp_solves: u64,
    pivots: u64,
    log: Vec<String>,
}

impl Search<'_> {
    /// Exact bounds of coefficient `k` under the current constraints.
    fn bounds(
        &mut self,
        coeffs: &CoefficientAssignment,
        k: usize,
        depth: usize,
    ) -> Result<Option<(BigRational, BigRational)>> {
        let sys = constraints_from(self.skel, coeffs, self.points)?;
        let var = sys
            .var_index(&self.skel.labels()[k])
            .expect("unfixed coefficient is a variable");
        let mut solver = Solver::new(&sys);
        let mut out = [BigRational::zero(), BigRational::zero()];
        for (dir, slot) in out.iter_mut().enumerate() {
            let (outcome, basis) = solver.solve_var(var, dir == 1, self.hints[depth][dir].as_ref());
            self.lp_solves += 1;
            match outcome {
                LpOutcome::Infeasible => {
                    self.pivots += solver.pivots;
                    return Ok(None);
                }
                LpOutcome::Optimal { value, .. } => *slot = value,
            }
            self.hints[depth][dir] = basis;
        }
        self.pivots += solver.pivots;
        let [lo, hi] = out;
        Ok(Some((lo, hi)))
    }

    fn accepted_everywhere(&self, values: &[F32]) -> Result<bool> {
        for p in self.points {
            let Some(bracket) = p.bracket else {
                return Ok(false);
            };
            match eval_f32(self.skel, values, p.a) {
                Ok((r, _)) if bracket.contains(r) => {}
                Ok(_) | Err(Error::Overflow) => return Ok(false),
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    fn search(
        &mut self,
        coeffs: &mut CoefficientAssignment,
        depth: usize,
    ) -> Result<Option<Vec<F32>>> {
        if depth == self.config.fixing_order.len() {
            let values = coeffs.fixed_values().expect("every coefficient fixed");
            return Ok(self.accepted_everywhere(&values)?.then_some(values));
        }
        let k = self.config.fixing_order[depth];
        let Some((lo, hi)) = self.bounds(coeffs, k, depth)? else {
            return Ok(None);
        };
        let Some((flo, fhi)) = representable_range(&lo, &hi) else {
            return Ok(None);
        };
        if depth == 0 {
            self.log.push(format!(
                "{} in [{}, {}]",
                self.skel.labels()[k],
                rational::floor_f32(&lo).map_or("?".into(), |v| v.to_string()),
                rational::ceil_f32(&hi).map_or("?".into(), |v| v.to_string())
            ));
        }
        let saved = coeffs.0[k].clone();
        coeffs.0[k] = Coefficient::Boxed(flo.to_rational(), fhi.to_rational());
        let mut tried: Vec<F32> = Vec::with_capacity(self.config.branching);
        let preferred = self.last_success.map(|v| v[k]);
        for attempt in 0..self.config.branching {
            let cand = match preferred {
                Some(p)
                    if attempt == 0
                        && flo.to_rational() <= p.to_rational()
                        && p.to_rational() <= fhi.to_rational() =>
                {
                    p
                }
                _ => {
                    let q = sample(self.config.sample_rule, &mut self.rng, &lo, &hi);
                    let c = rational::round_to_f32(&q)?;
                    if c.to_rational() < flo.to_rational() {
                        flo
                    } else if c.to_rational() > fhi.to_rational() {
                        fhi
                    } else {
                        c
                    }
                }
            };
            if tried.contains(&cand) {
                continue;
            }
            tried.push(cand);
            let mut next = coeffs.clone();
            next.fix(k, cand);
            if let Some(found) = self.search(&mut next, depth + 1)? {
                return Ok(Some(found));
            }
        }
        coeffs.0[k] = saved;
        Ok(None)
    }
}

/// Narrows every coefficient box to the representable values inside its
/// exact LP range. Returns `false` if some box becomes empty.
fn tighten_boxes(
    skel: &HornerSkeleton,
    coeffs: &mut CoefficientAssignment,
    points: &[PointData],
    lp_solves: &mut u64,
    pivots: &mut u64,
) -> Result<bool> {
    let sys = constraints_from(skel, coeffs, points)?;
    let mut solver = Solver::new(&sys);
    let mut tightened = coeffs.clone();
    for k in 0..coeffs.len() {
        if coeffs.is_fixed(k) {
            continue;
        }
        let var = sys
            .var_index(&skel.labels()[k])
            .expect("unfixed coefficient is a variable");
        let lo = solver.minimize(var);
        let hi = solver.maximize(var);
        *lp_solves += 2;
        match (lo, hi) {
            (LpOutcome::Optimal { value: l, .. }, LpOutcome::Optimal { value: h, .. }) => {
                let Some((l, h)) = representable_range(&l, &h) else {
                    *pivots += solver.pivots;
                    return Ok(false);
                };
                tightened.0[k] = Coefficient::Boxed(l.to_rational(), h.to_rational());
            }
            _ => {
                *pivots += solver.pivots;
                return Ok(false);
            }
        }
    }
    *pivots += solver.pivots;
    *coeffs = tightened;
    Ok(true)
}

/// Chooses a value for every coefficient so that the binary32 program is
/// acceptable at every test point, or gives up after the restart budget.
pub fn fix_coefficients(
    skel: &HornerSkeleton,
    state: &SynthState,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    report: &mut RunReport,
) -> Result<Option<Vec<F32>>> {
    let mut root = CoefficientAssignment(
        config
            .boxes
            .iter()
            .map(|(l, h)| Coefficient::Boxed(l.clone(), h.clone()))
            .collect(),
    );
    if !tighten_boxes(
        skel,
        &mut root,
        &state.points,
        &mut report.lp_solves,
        &mut report.pivots,
    )? {
        report.log.push("infeasible at the root".into());
        return Ok(None);
    }
    let mut search = Search {
        skel,
        config,
        points: &state.points,
        last_success: state.last_success.as_deref(),
        rng: ChaCha8Rng::from_rng(&mut *rng).expect("chacha seeding is infallible"),
        hints: vec![[None, None]; config.fixing_order.len()],
        lp_solves: 0,
        pivots: 0,
        log: Vec::new(),
    };
    let mut found = None;
    for restart in 0..config.inner_restart_limit {
        report.restarts += 1;
        let mut coeffs = root.clone();
        if let Some(v) = search.search(&mut coeffs, 0)? {
            found = Some(v);
            break;
        }
        if restart == 0 {
            // the remembered values failed once; draw fresh ones from now on
            search.last_success = None;
        }
    }
    report.lp_solves += search.lp_solves;
    report.pivots += search.pivots;
    report.log.append(&mut search.log);
    Ok(found)
}

/// Endpoints, zero when inside, and `2n` Chebyshev nodes of the domain.
pub fn default_test_points(domain: F32Interval, num_coeffs: usize) -> Vec<F32> {
    let (lo, hi) = (domain.lo.to_f32() as f64, domain.hi.to_f32() as f64);
    let mut pts = vec![domain.lo, domain.hi];
    if domain.contains(F32::ZERO) {
        pts.push(F32::ZERO);
    }
    let m = 2 * num_coeffs.max(1);
    for i in 0..m {
        let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * m) as f64;
        let x = (lo + hi) / 2.0 + (hi - lo) / 2.0 * theta.cos();
        let x = F32::from_f32(x as f32);
        if domain.contains(x) {
            pts.push(x);
        }
    }
    pts.sort_by_key(|p| p.ordinal());
    pts.dedup();
    pts
}

/// The full cutting-plane loop. On success the coefficients are acceptable at
/// every abscissa of the oracle's domain.
pub fn synthesize(
    skel: &HornerSkeleton,
    oracle: &dyn AcceptanceOracle,
    config: &SynthConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<RunReport> {
    config.validate(skel)?;
    let domain = oracle.domain();
    let initial = match &config.initial_test_points {
        Some(p) => p.clone(),
        None => default_test_points(domain, skel.num_coeffs()),
    };
    if initial.is_empty() {
        return Err(Error::Config("at least one test point is required".into()));
    }
    let mut state = SynthState::new(skel, oracle, &initial)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut report = RunReport::default();
    let mut resume = domain.first_ordinal();
    let mut emit = |report: &mut RunReport, line: String| {
        progress(&line);
        report.log.push(line);
    };
    for iteration in 1..=config.outer_iteration_limit {
        report.iterations = iteration;
        let before = report.log.len();
        let solves = report.lp_solves;
        let pivots = report.pivots;
        let found = fix_coefficients(skel, &state, config, &mut rng, &mut report)?;
        let bounds_lines: Vec<String> = report.log.drain(before..).collect();
        let line = format!(
            "iteration {iteration}: {} test points, {} LP solves, {} pivots; {}",
            state.points.len(),
            report.lp_solves - solves,
            report.pivots - pivots,
            bounds_lines.join("; ")
        );
        emit(&mut report, line);
        let Some(values) = found else {
            report.test_points = state.test_points();
            report.failure = Some(format!(
                "no acceptable coefficients after {} restarts",
                config.inner_restart_limit
            ));
            return Ok(report);
        };
        let cs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        emit(&mut report, format!("candidate [{}]", cs.join(", ")));
        match verify::first_violation(skel, &values, oracle, domain, resume)? {
            None => {
                report.test_points = state.test_points();
                report.coefficients = Some(values);
                return Ok(report);
            }
            Some(a) => {
                emit(&mut report, format!("violation at {a}"));
                if !state.add_point(skel, oracle, a)? {
                    return Err(Error::Config(format!(
                        "violation at existing test point {a}"
                    )));
                }
                resume = a.ordinal();
                state.last_success = Some(values);
            }
        }
    }
    report.test_points = state.test_points();
    report.failure = Some(format!(
        "outer iteration limit {} reached",
        config.outer_iteration_limit
    ));
    Ok(report)
}
