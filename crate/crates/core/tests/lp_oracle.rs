mod common;

use hornfit::exactlp::{Feasibility, LinearSystem, LpOutcome, Solver};
use hornfit::rational::{int, pow2, BigRational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_against_fm(sys: &LinearSystem) {
    let mut solver = Solver::new(sys);
    for var in 0..sys.num_vars() {
        let expected = common::fm_range(sys, var);
        let lo = solver.minimize(var);
        assert!(
            solver.last_pivots < 500,
            "pivot tripwire: {}",
            solver.last_pivots
        );
        let hi = solver.maximize(var);
        match expected {
            None => {
                assert!(lo.is_infeasible() && hi.is_infeasible(), "{}", sys.dump());
                assert_eq!(solver.check_feasible(), Feasibility::Infeasible);
            }
            Some((l, h)) => {
                assert_eq!(lo.value(), Some(&l), "min x{var}\n{}", sys.dump());
                assert_eq!(hi.value(), Some(&h), "max x{var}\n{}", sys.dump());
                for outcome in [&lo, &hi] {
                    let LpOutcome::Optimal { witness, .. } = outcome else {
                        unreachable!()
                    };
                    assert!(sys.satisfies(witness));
                }
                match solver.check_feasible() {
                    Feasibility::Feasible(w) => assert!(sys.satisfies(&w)),
                    Feasibility::Infeasible => panic!("feasible system reported infeasible"),
                }
            }
        }
    }
}

#[test]
fn random_small_systems_match_fourier_motzkin() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut infeasible = 0;
    for _ in 0..1000 {
        let sys = random_system_checked(&mut rng);
        if common::fm_range(&sys, 0).is_none() {
            infeasible += 1;
        }
        check_against_fm(&sys);
    }
    assert!(
        infeasible > 50 && infeasible < 950,
        "family should mix outcomes: {infeasible}"
    );
}

fn random_system_checked(rng: &mut ChaCha8Rng) -> LinearSystem {
    let sys = common::random_system(rng);
    assert!(sys.num_vars() <= 3 && sys.rows.len() <= 8);
    sys
}

fn banded_stress(matrix: Vec<Vec<BigRational>>, point: &[BigRational]) -> LinearSystem {
    let n = point.len();
    let names = (0..n).map(|i| format!("c{i}")).collect();
    let mut sys = LinearSystem::new(names, vec![(int(-1), int(1)); n]);
    let width = BigRational::new(1.into(), 1_000_000_000_000i64.into());
    for row in matrix {
        let center: BigRational = row.iter().zip(point).map(|(a, x)| a * x).sum();
        sys.add_row(row, Some(&center - &width), Some(&center + &width));
    }
    sys
}

#[test]
fn hilbert_stress_matches_fourier_motzkin() {
    let point = vec![
        BigRational::new(1.into(), 3.into()),
        BigRational::new((-2).into(), 7.into()),
        pow2(-5),
    ];
    let hilbert = (0..6)
        .map(|i| {
            (0..3)
                .map(|j| BigRational::new(1.into(), (i + j + 1).into()))
                .collect()
        })
        .collect();
    let sys = banded_stress(hilbert, &point);
    check_against_fm(&sys);
    assert!(matches!(sys.check_feasible(), Feasibility::Feasible(_)));
}

#[test]
fn vandermonde_stress_matches_fourier_motzkin() {
    let point = vec![
        BigRational::new((-1).into(), 6.into()),
        BigRational::new(1.into(), 120.into()),
        pow2(-13),
    ];
    let xs = [1, 3, 5, 7, 11, 13, 16];
    let vander = xs
        .iter()
        .map(|&k| {
            let s = BigRational::new(k.into(), 16.into());
            vec![s.clone(), &s * &s, &s * &s * &s]
        })
        .collect();
    let mut sys = banded_stress(vander, &point);
    check_against_fm(&sys);
    // shifting one band off the hidden point by more than the width makes it
    // infeasible or strictly smaller, never wrong
    let shift = BigRational::new(1.into(), 1_000_000i64.into());
    let row = &mut sys.rows[3];
    row.lower = row.lower.take().map(|l| l + &shift);
    row.upper = row.upper.take().map(|u| u + &shift);
    check_against_fm(&sys);
}
