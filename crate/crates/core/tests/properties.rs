use nalgebra::DMatrix;
use proptest::prelude::*;

use subfrac_core::fractional_solver::{solve, TimeGrid};
use subfrac_core::{GeneratorModel, LevySpec};

fn spec() -> impl Strategy<Value = LevySpec> {
    prop_oneof![
        (0.1..0.9f64).prop_map(|b| LevySpec::stable(b).unwrap()),
        (0.1..0.9f64, 0.2..5.0f64).prop_map(|(b, m)| LevySpec::tempered_stable(b, m).unwrap()),
        (0.1..0.9f64, 0.5..5.0f64).prop_map(|(b, d)| LevySpec::truncated_stable(b, d).unwrap()),
    ]
}

fn generator(conservative: bool) -> impl Strategy<Value = GeneratorModel> {
    (
        proptest::collection::vec(0.0..2.0f64, 12),
        proptest::collection::vec(0.0..0.5f64, 4),
    )
        .prop_map(move |(off, kill)| {
            let mut l = DMatrix::zeros(4, 4);
            let mut k = 0;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        l[(i, j)] = off[k];
                        k += 1;
                    }
                }
                let leak = if conservative { 0.0 } else { kill[i] };
                l[(i, i)] = -(l.row(i).sum() + leak);
            }
            GeneratorModel::new(l, None).unwrap()
        })
}

fn unit_vec() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, 4)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generator_matches_semigroup_derivative(m in generator(false), f in unit_vec()) {
        let h = 1e-6;
        let moved = m.semigroup_apply(h, &f).unwrap();
        let lf = m.apply_generator(&f).unwrap();
        let scale = lf.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-3);
        for i in 0..4 {
            let fd = (moved[i] - f[i]) / h;
            prop_assert!((fd - lf[i]).abs() <= 1e-4 * scale, "{} vs {}", fd, lf[i]);
        }
    }

    #[test]
    fn solution_stays_in_unit_interval(s in spec(), m in generator(false), f in unit_vec()) {
        let r = solve(&m, &s, &TimeGrid::new(1.0, 64).unwrap(), &f).unwrap();
        for row in &r.states {
            for &v in row {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn conservative_chain_obeys_maximum_principle(s in spec(), m in generator(true), f in unit_vec()) {
        let (lo, hi) = f.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let r = solve(&m, &s, &TimeGrid::new(2.0, 64).unwrap(), &f).unwrap();
        for row in &r.states {
            for &v in row {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn solver_is_linear(s in spec(), m in generator(false), f in unit_vec(), g in unit_vec(), a in -2.0..2.0f64) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let rf = solve(&m, &s, &grid, &f).unwrap();
        let rg = solve(&m, &s, &grid, &g).unwrap();
        let rc = solve(&m, &s, &grid, &combo).unwrap();
        for n in 0..=32 {
            for i in 0..4 {
                let expect = a * rf.states[n][i] + rg.states[n][i];
                prop_assert!((rc.states[n][i] - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn killed_solution_decays(s in spec(), f in unit_vec()) {
        let m = GeneratorModel::dirichlet_laplacian_1d(4, 1.0).unwrap();
        let r = solve(&m, &s, &TimeGrid::new(1.0, 64).unwrap(), &f).unwrap();
        let mass = |row: &Vec<f64>| row.iter().sum::<f64>();
        for w in r.states.windows(2) {
            prop_assert!(mass(&w[1]) <= mass(&w[0]) + 1e-12);
        }
    }
}
