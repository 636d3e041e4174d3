use hornfit::program::{
    backward_propagate, coefficient_row, eval_exact, eval_f32, eval_tail, forward_error_bounds,
    Coefficient, CoefficientAssignment, Form, HornerSkeleton,
};
use hornfit::rational::{int, BigRational};
use hornfit::softfp::{F32Interval, F32};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn skeleton(form: Form, n: usize) -> HornerSkeleton {
    HornerSkeleton::new(form, (0..n).map(|i| format!("c{i}")).collect()).unwrap()
}

/// Uniform in [-1, 1] on a binary32 grid of spacing 2^-24.
fn unit(rng: &mut ChaCha8Rng) -> F32 {
    F32::from_f32(rng.gen_range(-(1i32 << 24)..=1 << 24) as f32 / (1 << 24) as f32)
}

fn arb_unit() -> impl Strategy<Value = F32> {
    (-(1i32 << 24)..=1 << 24).prop_map(|n| F32::from_f32(n as f32 / (1 << 24) as f32))
}

#[test]
fn forward_bounds_contain_a_million_evaluations() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let forms = [Form::Odd, Form::EvenPlusOne, Form::Plain];
    let boxes = CoefficientAssignment::boxed(5, int(-1), int(1));
    let mut checked = 0u64;
    for i in 0..1000 {
        let skel = skeleton(forms[i % 3], 5);
        let a = unit(&mut rng);
        let budget = forward_error_bounds(&skel, &boxes, a).unwrap();
        for _ in 0..1000 {
            let c: Vec<F32> = (0..5).map(|_| unit(&mut rng)).collect();
            let (r, _) = eval_f32(&skel, &c, a).unwrap();
            let exact = eval_exact(
                &skel,
                &c.iter().map(|x| x.to_rational()).collect::<Vec<_>>(),
                a,
            )
            .unwrap();
            let err = r.to_rational() - exact;
            assert!(
                budget.delta_lo <= err && err <= budget.delta_hi,
                "a = {a}, c = {c:?}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 1_000_000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exact_value_is_affine_in_the_coefficients(
        form in prop_oneof![Just(Form::Odd), Just(Form::EvenPlusOne), Just(Form::Plain)],
        a in arb_unit(),
        c in prop::collection::vec(arb_unit(), 4),
        d in prop::collection::vec(arb_unit(), 4),
    ) {
        let skel = skeleton(form, 4);
        let (grad, constant) = coefficient_row(&skel, a).unwrap();
        let c: Vec<BigRational> = c.iter().map(|x| x.to_rational()).collect();
        let d: Vec<BigRational> = d.iter().map(|x| x.to_rational()).collect();
        let at = |v: &[BigRational]| eval_exact(&skel, v, a).unwrap();
        let dot = |v: &[BigRational]| grad.iter().zip(v).map(|(g, x)| g * x).sum::<BigRational>() + &constant;
        prop_assert_eq!(at(&c), dot(&c));
        prop_assert_eq!(at(&d), dot(&d));
        let mid: Vec<BigRational> = c.iter().zip(&d).map(|(x, y)| (x + y) / int(2)).collect();
        prop_assert_eq!(at(&mid) * int(2), at(&c) + at(&d));
    }
}

#[test]
fn backward_targets_reproduce_forward_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..100 {
        let form = [Form::Odd, Form::EvenPlusOne, Form::Plain][i % 3];
        let skel = skeleton(form, 4);
        let a = unit(&mut rng);
        let c: Vec<F32> = (0..4).map(|_| unit(&mut rng)).collect();
        let (r, trace) = eval_f32(&skel, &c, a).unwrap();
        // leave the highest-degree coefficient free
        let mut coeffs = CoefficientAssignment::fixed(&c);
        coeffs.0[0] = Coefficient::Boxed(int(-1), int(1));
        let acceptable = F32Interval::point(r);
        let back = backward_propagate(&skel, &coeffs, a, acceptable)
            .unwrap()
            .expect("the run itself is a witness");
        let j = back.split;
        assert!(back.target().contains(trace.acc[j]), "a = {a}");
        for (i, t) in back.targets.iter().enumerate() {
            assert!(t.contains(trace.acc[j + i]));
        }
        let t = back.target();
        for v in [t.lo, t.hi] {
            assert!(eval_tail(&skel, &c, a, j, v).unwrap().value_eq(r));
        }
        if r.is_zero() {
            continue;
        }
        // one step outside the target leaves the acceptable set
        for v in [t.lo.next_down(), t.hi.next_up()].into_iter().flatten() {
            assert_ne!(
                eval_tail(&skel, &c, a, j, v).unwrap().to_bits(),
                r.to_bits()
            );
        }
    }
}
