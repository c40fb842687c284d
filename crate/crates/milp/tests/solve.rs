use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surgdro_milp::*;

fn backends() -> Vec<Box<dyn Backend>> {
    let mut v: Vec<Box<dyn Backend>> = vec![Box::new(ReferenceBackend)];
    #[cfg(feature = "highs")]
    v.push(Box::new(HighsBackend));
    v
}

#[test]
fn continuous_lower_bound() {
    let mut m = Model::new("lb");
    let x = m.add_continuous("x", None, None).unwrap();
    m.add_constraint("c", [(x, 1.0)], RowSense::Ge, 3.0).unwrap();
    m.set_objective([(x, 1.0)], 0.0).unwrap();
    for b in backends() {
        let s = b.solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal, "{}", b.name());
        assert!((s.objective - 3.0).abs() < 1e-9, "{}", b.name());
    }
}

#[test]
fn single_binary() {
    let mut m = Model::new("one");
    let y = m.add_binary("y").unwrap();
    m.set_objective([(y, -1.0)], 0.0).unwrap();
    for b in backends() {
        let s = b.solve(&m, &SolveParams::default()).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-9);
        assert_eq!(s.value(&m, "y"), Some(1.0));
    }
}

#[test]
fn two_item_knapsack() {
    // max 3a + 2b s.t. a + b <= 1, in minimize form.
    let mut m = Model::new("knap");
    let a = m.add_binary("a").unwrap();
    let b = m.add_binary("b").unwrap();
    m.add_constraint("cap", [(a, 1.0), (b, 1.0)], RowSense::Le, 1.0).unwrap();
    m.set_objective([(a, -3.0), (b, -2.0)], 0.0).unwrap();
    for be in backends() {
        let s = be.solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(s.objective, -3.0, "{}", be.name());
        assert_eq!(s.values, vec![1.0, 0.0]);
    }
}

/// Assignment of `jobs` jobs to `slots` slots with capacities; `jobs * slots`
/// binaries plus a continuous overflow per slot.
fn random_assignment(seed: u64, jobs: usize, slots: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::new(format!("assign{seed}"));
    let mut y = vec![vec![]; jobs];
    for (j, row) in y.iter_mut().enumerate() {
        for s in 0..slots {
            row.push(m.add_binary(format!("y_{j}_{s}")).unwrap());
        }
    }
    let over: Vec<_> =
        (0..slots).map(|s| m.add_continuous(format!("o_{s}"), Some(0.0), None).unwrap()).collect();
    for row in &y {
        m.add_constraint(format!("one_{}", m.num_constraints()), row.iter().map(|&v| (v, 1.0)), RowSense::Eq, 1.0)
            .unwrap();
    }
    let sizes: Vec<f64> = (0..jobs).map(|_| rng.random_range(1..=9) as f64).collect();
    for s in 0..slots {
        let cap = rng.random_range(4..=12) as f64;
        let mut terms: Vec<_> = (0..jobs).map(|j| (y[j][s], sizes[j])).collect();
        terms.push((over[s], -1.0));
        m.add_constraint(format!("cap_{s}"), terms, RowSense::Le, cap).unwrap();
    }
    let mut obj = Vec::new();
    for row in &y {
        for &v in row {
            obj.push((v, rng.random_range(-5..=20) as f64));
        }
    }
    for &o in &over {
        obj.push((o, rng.random_range(1..=6) as f64));
    }
    m.set_objective(obj, rng.random_range(0..=10) as f64).unwrap();
    m
}

#[test]
fn reference_agrees_with_backend_on_ten_binary_models() {
    for seed in 0..15 {
        let m = random_assignment(seed, 5, 2);
        assert_eq!(m.num_binaries(), 10);
        let r = ReferenceBackend.solve(&m, &SolveParams::default()).unwrap();
        let d = solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - d.objective).abs() <= 1e-6 * (1.0 + r.objective.abs()), "seed {seed}");
    }
}

#[test]
fn reference_certifies_thirty_binaries() {
    let m = random_assignment(99, 10, 3);
    assert_eq!(m.num_binaries(), 30);
    let r = ReferenceBackend.solve(&m, &SolveParams::default()).unwrap();
    let d = solve(&m, &SolveParams::default()).unwrap();
    assert!((r.objective - d.objective).abs() <= 1e-6 * (1.0 + r.objective.abs()));
}

#[test]
fn relaxation_bounds_the_integer_optimum() {
    for seed in 100..120 {
        let m = random_assignment(seed, 4, 3);
        let lp = lp_relaxation_value(&m).unwrap();
        let ip = solve_reference_bnb(&m).unwrap().objective;
        assert!(lp <= ip + 1e-9, "seed {seed}: {lp} > {ip}");
    }
}

#[test]
fn exact_rational_solve_matches_float() {
    for seed in 200..205 {
        let m = random_assignment(seed, 4, 2);
        let exact = m.map_scalar(|v| Rational::from_f64_lossy(*v));
        let q = solve_reference_bnb(&exact).unwrap();
        let f = solve_reference_bnb(&m).unwrap();
        assert!((q.objective.to_f64_lossy() - f.objective).abs() < 1e-9);
        let (viol, _) = exact.max_violation(&q.values);
        assert_eq!(viol, Rational::from_integer(0.into()));
    }
}

#[test]
fn verification_rejects_infeasible_values() {
    let m = random_assignment(7, 3, 2);
    let mut s = ReferenceBackend.solve(&m, &SolveParams::default()).unwrap();
    s.values[0] = 0.5;
    assert!(matches!(verify(&m, &s), Err(SolveError::Verification { .. })));
}

#[test]
fn bad_params_are_rejected() {
    let m = random_assignment(1, 2, 2);
    let p = SolveParams { time_limit: 0.0, ..Default::default() };
    assert!(matches!(ReferenceBackend.solve(&m, &p), Err(SolveError::Params(_))));
}

#[test]
fn unknown_backend_name() {
    assert!(matches!(backend_by_name("cplex"), Err(SolveError::BackendUnavailable(_))));
}

fn arb_model() -> impl Strategy<Value = Model> {
    let coef = prop_oneof![
        (-1000i32..1000).prop_map(|v| v as f64),
        (-1e6f64..1e6),
        Just(1.0 / 3.0),
        Just(-2.5e-7),
    ];
    (1usize..8, proptest::collection::vec(coef, 60), proptest::collection::vec(0u8..4, 8), 0usize..6).prop_map(
        |(nv, c, kinds, nrows)| {
            let mut m = Model::new("prop");
            let mut ids = Vec::new();
            for k in 0..nv {
                let id = match kinds[k] {
                    0 => m.add_binary(format!("b{k}")).unwrap(),
                    1 => m.add_continuous(format!("x{k}"), None, None).unwrap(),
                    2 => m.add_continuous(format!("x{k}"), Some(-c[k].abs()), Some(c[k].abs())).unwrap(),
                    _ => m.add_continuous(format!("x{k}"), None, Some(c[k])).unwrap(),
                };
                ids.push(id);
            }
            let mut it = c.iter().cycle().skip(nv);
            for r in 0..nrows {
                let terms: Vec<_> = ids.iter().map(|&v| (v, *it.next().unwrap())).collect();
                let sense = [RowSense::Le, RowSense::Eq, RowSense::Ge][r % 3];
                m.add_constraint(format!("r{r}"), terms, sense, *it.next().unwrap()).unwrap();
            }
            let obj: Vec<_> = ids.iter().map(|&v| (v, *it.next().unwrap())).collect();
            m.set_objective(obj, *it.next().unwrap()).unwrap();
            m
        },
    )
}

proptest! {
    #[test]
    fn lp_text_round_trip(m in arb_model()) {
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}
