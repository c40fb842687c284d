use surgdro::evaluate::{
    compare_policies, radius_sweep, replication_study, simulate_out_of_sample, timing_harness, to_csv, PolicyConfig,
    ReplicationStudy, SamplerPair, StudyContext, TimingConfig,
};
use surgdro::ingest::{DurationSampler, EmergencySampler};
use surgdro::instances::{paper_instance, random_tiny_instance, single_block, CostStructure, SuiteConfig};
use surgdro::milp::{HighsBackend, SolveParams};
use surgdro::models::{solve_model, ModelKind, ModelSpec};
use surgdro::oracle::saa_objective_direct;
use surgdro::{Scenario, ScenarioSet};

fn ctx<'a>(data: Option<&'a surgdro::DurationDataset>) -> StudyContext<'a> {
    StudyContext { backend: &HighsBackend, params: SolveParams::default(), data }
}

fn desk() -> (surgdro::Instance, surgdro::DurationDataset) {
    paper_instance(&SuiteConfig { surgeries: 10, scaled_blocks: true, ..SuiteConfig::default() })
}

fn study(models: Vec<ModelKind>, n_list: Vec<usize>, epsilons: Vec<f64>) -> ReplicationStudy {
    ReplicationStudy {
        models,
        reps: 2,
        n_list,
        n_prime: 200,
        epsilons,
        seed: 7,
        in_sample: SamplerPair::empirical(),
        out_sample: SamplerPair::empirical(),
        rho_upper: None,
    }
}

#[test]
fn studies_replay_exactly() {
    let (inst, ds) = desk();
    let cfg = study(vec![ModelKind::Saa, ModelKind::Wdro, ModelKind::Mdro], vec![5, 10], vec![0.1, 10.0]);
    let a = replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap();
    let b = replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap();
    assert_eq!(to_csv(&a.rows).unwrap(), to_csv(&b.rows).unwrap());
    assert_eq!(a.rows.len(), 2 * 2 * (1 + 2 + 1));
    assert!(a.rows.iter().all(|r| r.status == "ok"), "{:?}", a.rows);
}

#[test]
fn thread_count_does_not_change_results() {
    let (inst, ds) = desk();
    let cfg = study(vec![ModelKind::Wdro], vec![5], vec![1.0, 20.0]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| to_csv(&replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap().rows).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn zero_radius_column_equals_the_saa_column() {
    let (inst, ds) = desk();
    let cfg = study(vec![ModelKind::Saa, ModelKind::Wdro], vec![5], vec![0.0]);
    let r = replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap();
    for rep in 0..2 {
        let get = |m| r.rows.iter().find(|x| x.model == m && x.rep == rep).unwrap();
        let (s, w) = (get(ModelKind::Saa), get(ModelKind::Wdro));
        assert!((s.objective.unwrap() - w.objective.unwrap()).abs() <= 1e-6 * (1.0 + s.objective.unwrap().abs()));
    }
}

#[test]
fn moment_column_is_constant_in_n() {
    let (inst, ds) = desk();
    let cfg = study(vec![ModelKind::Mdro], vec![5, 10, 50], vec![]);
    let r = replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap();
    for rep in 0..2 {
        let costs: Vec<f64> = r.rows.iter().filter(|x| x.rep == rep).map(|x| x.mean_cost.unwrap()).collect();
        assert!(costs.windows(2).all(|w| w[0] == w[1]), "{costs:?}");
    }
}

#[test]
fn out_of_sample_cost_covers_first_stage() {
    let (inst, ds) = desk();
    let cfg = study(vec![ModelKind::Wdro], vec![5], vec![0.5, 50.0]);
    for r in replication_study(&ctx(Some(&ds)), &inst, &cfg).unwrap().rows {
        assert!(r.mean_cost.unwrap() >= r.first_stage.unwrap() - 1e-9);
        assert!(r.cost_q20.unwrap() <= r.cost_q80.unwrap());
    }
}

#[test]
fn in_sample_evaluation_recovers_the_saa_optimum() {
    let inst = random_tiny_instance(3, 4, 2);
    let scen = ScenarioSet::new(
        vec![Scenario {
            d: (0..4).map(|i| inst.surgery_type(i).unwrap().mean_duration).collect(),
            e: inst.blocks.iter().map(|k| k.e_mean).collect(),
        }],
        "one",
    );
    let s = solve_model(&inst, &ModelSpec::Saa(&scen), &HighsBackend, &SolveParams::default()).unwrap();
    let m = simulate_out_of_sample(&inst, &s.schedule, &scen).unwrap();
    assert!((m.cost.mean - s.objective).abs() <= 1e-6 * (1.0 + s.objective.abs()));
    assert!((m.cost.mean - saa_objective_direct(&inst, &scen, &s.schedule).unwrap()).abs() < 1e-9);
}

#[test]
fn point_mass_uncertainty_gives_a_flat_sweep() {
    let inst = single_block();
    let pm = SamplerPair { durations: DurationSampler::PointMass, emergencies: EmergencySampler::PointMass };
    let r = radius_sweep(&ctx(None), &inst, pm, &[0.1, 1.0, 10.0, 100.0], &[3], 1, 5, 1).unwrap();
    let costs: Vec<f64> = r.summary.iter().map(|c| c.mean_cost.unwrap()).collect();
    assert!(costs.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9), "{costs:?}");
}

#[test]
fn sweep_emits_one_row_per_radius_size_and_replication() {
    let (inst, ds) = desk();
    let r = radius_sweep(&ctx(Some(&ds)), &inst, SamplerPair::empirical(), &[0.1, 5.0, 50.0], &[5, 10], 2, 50, 3).unwrap();
    assert_eq!(r.rows.len(), 3 * 2 * 2);
    assert_eq!(r.summary.len(), 3 * 2);
}

#[test]
fn policies_coincide_without_emergencies() {
    let (_, ds) = desk();
    let cfg = PolicyConfig {
        suite: SuiteConfig { surgeries: 10, scaled_blocks: true, ..SuiteConfig::default() },
        reserved_rooms: vec!["9".into()],
        costs: vec![CostStructure::Cost1],
        emergency_rate_mults: vec![0.0],
        epsilon: 1.0,
        n: 5,
        n_prime: 50,
        reps: 1,
        seed: 2,
        sampler: SamplerPair { durations: DurationSampler::EmpiricalResample, emergencies: EmergencySampler::PointMass },
    };
    let rows = compare_policies(&ctx(Some(&ds)), &cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
}

#[test]
fn single_replication_timing_is_degenerate() {
    let (_, ds) = desk();
    let cfg = TimingConfig {
        sizes: vec![10],
        n_list: vec![5],
        costs: vec![CostStructure::Cost1],
        epsilon: 1.0,
        reps: 1,
        seed: 0,
        sampler: SamplerPair::empirical(),
    };
    let (rows, summary) = timing_harness(&ctx(Some(&ds)), &cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(summary[0].min, summary[0].max);
    assert_eq!(summary[0].min, summary[0].avg);
}

#[test]
fn invalid_studies_are_rejected() {
    let (inst, ds) = desk();
    let mut cfg = study(vec![ModelKind::Saa], vec![5], vec![]);
    cfg.reps = 0;
    assert!(replication_study(&ctx(Some(&ds)), &inst, &cfg).is_err());
    cfg.reps = 1;
    cfg.n_prime = 2;
    assert!(replication_study(&ctx(Some(&ds)), &inst, &cfg).is_err());
}
