use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surgdro::evaluate::simulate_out_of_sample;
use surgdro::ingest::{sample_scenarios, sample_scenarios_par, DurationSampler, EmergencySampler, SamplerSpec};
use surgdro::instances::random_tiny_instance;
use surgdro::milp::{solve_reference_bnb, Backend, HighsBackend, Scalar, SolveParams, MAX_REFERENCE_BINARIES};
use surgdro::models::{
    build_mdro, build_saa, build_wdro, eta_cut_rows, reject_name, safe_rho_upper, solve_model, y_name, ModelSize,
    ModelSpec, MomentInfo, WdroConfig,
};
use surgdro::oracle::{
    enumerate_schedules, exhaustive_best_schedule, inner_sup_bruteforce, mdro_fixed_y_value, recourse_lp, rho_cap,
    saa_objective_direct, wdro_dual_at, wdro_fixed_y_value,
};
use surgdro::{first_stage_cost, recourse_cost, Instance, Scenario, Schedule, ScenarioSet, Target};

const TOL: f64 = 1e-6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Scenarios drawn uniformly and independently per coordinate inside the
/// supports, rounded to whole minutes.
fn uniform_scenarios(inst: &Instance, n: usize, seed: u64) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| rng.random_range(lo as i64..=hi as i64) as f64;
    let scenarios = (0..n)
        .map(|_| Scenario {
            d: (0..inst.num_surgeries())
                .map(|i| {
                    let (lo, hi) = inst.d_support(i).unwrap();
                    draw(lo, hi)
                })
                .collect(),
            e: inst.blocks.iter().map(|k| draw(k.e_lo, k.e_hi)).collect(),
        })
        .collect();
    ScenarioSet::new(scenarios, "uniform")
}

fn random_schedule(inst: &Instance, seed: u64) -> Schedule {
    let all = enumerate_schedules(inst).unwrap();
    all[(seed as usize) % all.len()].clone()
}

fn params() -> SolveParams {
    SolveParams::default()
}

fn fixed(model: &surgdro::Model, inst: &Instance, y: &Schedule) -> surgdro::Model {
    let mut m = model.clone();
    for (i, t) in y.assignment.iter().enumerate() {
        for b in inst.compatible_blocks(i) {
            let v = m.var(&y_name(i, b)).unwrap();
            let on = if *t == Target::Block(b) { 1.0 } else { 0.0 };
            m = m.with_bounds(v, Some(on), Some(on));
        }
        let r = m.var(&reject_name(i)).unwrap();
        let on = if *t == Target::Reject { 1.0 } else { 0.0 };
        m = m.with_bounds(r, Some(on), Some(on));
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn cut_rows_attain_the_inner_supremum(
        seed in 0u64..1_000_000,
        surgeries in 1usize..=4,
        blocks in 1usize..=2,
        n in 1usize..=5,
        rho_frac in 0.0f64..=1.0,
        ysel in 0u64..1000,
    ) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed ^ 0x5eed);
        let y = random_schedule(&inst, ysel);
        let rho = rho_frac * rho_cap(&inst);
        for nn in 0..n {
            for b in 0..blocks {
                let rows = eta_cut_rows::<f64>(&inst, &scen, nn, b).unwrap();
                let best = rows.iter().map(|r| r.evaluate(&y, b, &rho)).fold(f64::NEG_INFINITY, f64::max);
                let brute = inner_sup_bruteforce(&inst, &scen, nn, b, &y, rho).unwrap();
                prop_assert!((best - brute).abs() <= 1e-9 * (1.0 + brute.abs()), "n={nn} b={b}: {best} vs {brute}");
            }
        }
    }

    #[test]
    fn recourse_matches_its_linear_program(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, ysel in 0u64..1000) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, 1, seed);
        let y = random_schedule(&inst, ysel);
        let closed = recourse_cost(&inst, &y, &scen.scenarios[0]).unwrap();
        let lp = recourse_lp(&inst, &y, &scen.scenarios[0]).unwrap();
        prop_assert!(close(closed, lp, 1e-9), "{closed} vs {lp}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn wasserstein_optimum_matches_enumeration(
        seed in 0u64..1_000_000,
        surgeries in 1usize..=4,
        blocks in 1usize..=2,
        n in 1usize..=5,
        eps in prop::sample::select(vec![0.0, 0.1, 1.0, 10.0, 100.0]),
    ) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let s = solve_model(&inst, &ModelSpec::Wdro(&scen, WdroConfig::new(eps)), &HighsBackend, &params()).unwrap();
        let best = exhaustive_best_schedule(&inst, &scen, eps, false).unwrap();
        prop_assert!(close(s.objective, best.value, TOL), "{} vs {}", s.objective, best.value);
    }

    #[test]
    fn zero_radius_equals_sample_average(seed in 0u64..1_000_000, surgeries in 1usize..=10, blocks in 1usize..=3, n in 1usize..=20) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let w = solve_model(&inst, &ModelSpec::Wdro(&scen, WdroConfig::new(0.0)), &HighsBackend, &params()).unwrap();
        let s = solve_model(&inst, &ModelSpec::Saa(&scen), &HighsBackend, &params()).unwrap();
        prop_assert!(close(w.objective, s.objective, TOL), "{} vs {}", w.objective, s.objective);
    }

    #[test]
    fn radius_is_monotone_and_bounded_below(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, n in 1usize..=10) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let saa = solve_model(&inst, &ModelSpec::Saa(&scen), &HighsBackend, &params()).unwrap().objective;
        let mut prev = f64::NEG_INFINITY;
        for eps in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let z = solve_model(&inst, &ModelSpec::Wdro(&scen, WdroConfig::new(eps)), &HighsBackend, &params()).unwrap().objective;
            prop_assert!(z >= saa - TOL * (1.0 + saa.abs()), "eps {eps}: {z} < saa {saa}");
            prop_assert!(z >= prev - TOL * (1.0 + prev.abs()), "eps {eps}: {z} < {prev}");
            prev = z;
        }
    }

    #[test]
    fn doubling_the_dual_bound_is_harmless(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, n in 1usize..=5, eps in 0.0f64..50.0) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let base = WdroConfig::new(eps);
        let doubled = WdroConfig { rho_upper: Some(2.0 * safe_rho_upper(&inst)), ..base.clone() };
        for cfg in [&base, &doubled] {
            let m = build_wdro::<f64>(&inst, &scen, cfg).unwrap();
            let sol = HighsBackend.solve(&m, &params()).unwrap();
            let rho = sol.value(&m, "rho").unwrap();
            for i in 0..inst.num_surgeries() {
                for b in inst.compatible_blocks(i) {
                    let y = sol.value(&m, &y_name(i, b)).unwrap();
                    let pi = sol.value(&m, &format!("pi_{i}_{b}")).unwrap();
                    prop_assert!((pi - rho * y).abs() <= TOL, "pi_{i}_{b}: {pi} vs {}", rho * y);
                }
            }
        }
        let a = solve_model(&inst, &ModelSpec::Wdro(&scen, base), &HighsBackend, &params()).unwrap().objective;
        let b = solve_model(&inst, &ModelSpec::Wdro(&scen, doubled), &HighsBackend, &params()).unwrap().objective;
        prop_assert!((a - b).abs() <= TOL * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn in_sample_objective_dominates_its_sample_average(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, n in 1usize..=10, eps in 0.0f64..50.0) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let s = solve_model(&inst, &ModelSpec::Wdro(&scen, WdroConfig::new(eps)), &HighsBackend, &params()).unwrap();
        let direct = saa_objective_direct(&inst, &scen, &s.schedule).unwrap();
        prop_assert!(s.objective >= direct - TOL * (1.0 + direct.abs()));
    }

    #[test]
    fn fixed_schedule_models_match_their_oracles(seed in 0u64..1_000_000, surgeries in 1usize..=4, blocks in 1usize..=2, n in 1usize..=5, ysel in 0u64..1000, eps in 0.0f64..50.0) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let y = random_schedule(&inst, ysel);
        let fs = first_stage_cost(&inst, &y).unwrap();

        let w = fixed(&build_wdro::<f64>(&inst, &scen, &WdroConfig::new(eps)).unwrap(), &inst, &y);
        let got = HighsBackend.solve(&w, &params()).unwrap().objective;
        let want = fs + wdro_fixed_y_value(&inst, &scen, eps, &y).unwrap().value;
        prop_assert!(close(got, want, TOL), "wdro {got} vs {want}");

        let m = fixed(&build_mdro::<f64>(&inst, &MomentInfo::from_instance(&inst).unwrap()).unwrap(), &inst, &y);
        let got = HighsBackend.solve(&m, &params()).unwrap().objective;
        let want = fs + mdro_fixed_y_value(&inst, &y).unwrap();
        prop_assert!(close(got, want, TOL), "mdro {got} vs {want}");
    }

    #[test]
    fn dual_objective_is_convex_and_monotone_in_radius(seed in 0u64..1_000_000, surgeries in 1usize..=4, blocks in 1usize..=2, n in 1usize..=5, ysel in 0u64..1000) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let y = random_schedule(&inst, ysel);
        let cap = rho_cap(&inst);
        let vals: Vec<f64> = (0..=100)
            .map(|k| wdro_dual_at(&inst, &scen, 1.0, &y, cap * k as f64 / 100.0).unwrap())
            .collect();
        for w in vals.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9 * (1.0 + w[1].abs()));
        }
        let mut prev = f64::NEG_INFINITY;
        for eps in [0.0, 0.5, 1.0, 5.0, 50.0] {
            let v = wdro_fixed_y_value(&inst, &scen, eps, &y).unwrap().value;
            prop_assert!(v >= prev - 1e-9 * (1.0 + prev.abs()));
            prev = v;
        }
    }

    #[test]
    fn model_sizes_follow_the_instance(seed in 0u64..1_000_000, surgeries in 1usize..=10, blocks in 1usize..=4, n in 1usize..=8) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        let pairs = inst.num_compatible_pairs();
        let m = build_wdro::<f64>(&inst, &scen, &WdroConfig::new(1.0)).unwrap();
        prop_assert_eq!(m.num_binaries(), pairs + surgeries);
        let etas = m.variables.iter().filter(|v| v.name.starts_with("eta_")).count();
        prop_assert_eq!(etas, n * blocks);
        let cuts = m.constraints.iter().filter(|c| c.name.starts_with("cut_")).count();
        prop_assert_eq!(cuts, 10 * n * blocks);
        let saa = ModelSize::of(&build_saa::<f64>(&inst, &scen).unwrap());
        // SAA carries (o, g) per block and scenario; the Wasserstein model
        // carries one eta per block and scenario plus rho and the products.
        prop_assert_eq!(ModelSize::of(&m).variables + n * blocks, saa.variables + pairs + 1);
    }

    #[test]
    fn simulation_is_linear_in_scenario_weights(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, n1 in 1usize..=20, n2 in 1usize..=20, ysel in 0u64..1000) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let y = random_schedule(&inst, ysel);
        let a = uniform_scenarios(&inst, n1, seed);
        let b = uniform_scenarios(&inst, n2, seed + 1);
        let both = ScenarioSet::new(a.scenarios.iter().chain(&b.scenarios).cloned().collect(), "both");
        let (ma, mb, mab) = (
            simulate_out_of_sample(&inst, &y, &a).unwrap(),
            simulate_out_of_sample(&inst, &y, &b).unwrap(),
            simulate_out_of_sample(&inst, &y, &both).unwrap(),
        );
        let w = |x: f64, z: f64| (n1 as f64 * x + n2 as f64 * z) / (n1 + n2) as f64;
        prop_assert!(close(mab.cost.mean, w(ma.cost.mean, mb.cost.mean), 1e-9));
        prop_assert!(close(mab.overtime_hours.mean, w(ma.overtime_hours.mean, mb.overtime_hours.mean), 1e-9));
        prop_assert!(close(mab.utilization_pct.mean, w(ma.utilization_pct.mean, mb.utilization_pct.mean), 1e-9));
        prop_assert!((0.0..=100.0).contains(&mab.utilization_pct.mean));
        prop_assert_eq!(mab.scheduled_count + mab.rejected_count, surgeries);
    }

    #[test]
    fn sampling_is_deterministic_and_thread_independent(seed in 0u64..1_000_000, surgeries in 1usize..=6, blocks in 1usize..=3, n in 1usize..=50) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let spec = SamplerSpec::new(DurationSampler::Lognormal, EmergencySampler::TruncatedExponential, seed, n);
        let a = sample_scenarios(&inst, &spec, None).unwrap();
        let b = sample_scenarios(&inst, &spec, None).unwrap();
        let c = sample_scenarios_par(&inst, &spec, None).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn reference_search_certifies_small_models(seed in 0u64..1_000_000, surgeries in 1usize..=4, blocks in 1usize..=2, n in 1usize..=3, eps in prop::sample::select(vec![0.0, 1.0, 10.0])) {
        let inst = random_tiny_instance(seed, surgeries, blocks);
        let scen = uniform_scenarios(&inst, n, seed);
        for spec in [ModelSpec::Saa(&scen), ModelSpec::Wdro(&scen, WdroConfig::new(eps))] {
            let float = surgdro::models::build::<f64>(&inst, &spec).unwrap();
            prop_assume!(float.num_binaries() <= MAX_REFERENCE_BINARIES.min(30));
            let exact = surgdro::models::build::<surgdro::milp::Rational>(&inst, &spec).unwrap();
            let r = solve_reference_bnb(&exact).unwrap();
            let h = HighsBackend.solve(&float, &params()).unwrap();
            prop_assert!(close(r.objective.to_f64_lossy(), h.objective, TOL), "{} vs {}", r.objective.to_f64_lossy(), h.objective);
        }
    }
}

#[test]
fn tight_cut_rows_pass_the_feasibility_check() {
    let inst = random_tiny_instance(219867, 4, 1);
    let scen = uniform_scenarios(&inst, 1, 219867);
    let s = solve_model(&inst, &ModelSpec::Wdro(&scen, WdroConfig::new(0.0)), &HighsBackend, &params()).unwrap();
    let best = exhaustive_best_schedule(&inst, &scen, 0.0, false).unwrap();
    assert!(close(s.objective, best.value, TOL), "{} vs {}", s.objective, best.value);
}
