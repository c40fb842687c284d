use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use surgdro::evaluate::{
    allocation_study, compare_policies, replication_study, simulate_out_of_sample, timing_harness, to_csv,
    AllocationStudy, Policy, PolicyConfig, PolicyRow, ReplicationStudy, SamplerPair, StudyContext, TimingConfig,
    PAPER_EPSILONS,
};
use surgdro::ingest::{load_duration_records, sample_scenarios_par, DurationSampler, SamplerSpec};
use surgdro::instances::{
    minimal_instance, paper_instance, paper_types, random_tiny_instance, AllocationConfig, CostStructure,
    PatientCosts, SuiteConfig, REFERENCE_SURGERIES,
};
use surgdro::milp::{default_backend, write_lp, Backend, SolveParams};
use surgdro::models::{build, dedicated_instance, solve_model, ModelKind, ModelSize, ModelSpec, MomentInfo, WdroConfig};
use surgdro::verify::{run_checks, Check};
use surgdro::{validate_instance, CoreError, DurationDataset, Instance, Schedule, ScenarioSet};

use crate::options::{write_resolved, Options};
use crate::{write, CliError, Experiment};

/// Surgery count of generated instances when none is given.
const DESK_SURGERIES: usize = 10;
const DEFAULT_N_PRIME: usize = 10_000;
const DEFAULT_REPS: usize = 20;

fn params(opts: &mut Options) -> SolveParams {
    let d = SolveParams::default();
    SolveParams {
        time_limit: *opts.time_limit.get_or_insert(d.time_limit),
        rel_gap: *opts.gap.get_or_insert(d.rel_gap),
        ..d
    }
}

fn patient_costs(opts: &mut Options) -> PatientCosts {
    let d = PatientCosts::default();
    PatientCosts {
        factor: *opts.patient_cost_factor.get_or_insert(d.factor),
        kappa: *opts.patient_cost_kappa.get_or_insert(d.kappa),
    }
}

fn suite(opts: &mut Options, default_surgeries: usize) -> Result<SuiteConfig, CliError> {
    let surgeries = opts.surgeries(default_surgeries)?;
    let paper = Options::flag(&mut opts.paper_default);
    Ok(SuiteConfig {
        surgeries,
        cost: opts.cost()?,
        patient_costs: patient_costs(opts),
        emergency_rate_mult: opts.mult()?,
        scaled_blocks: *opts.scaled_blocks.get_or_insert(!paper && surgeries < REFERENCE_SURGERIES),
        seed: opts.seed(),
    })
}

fn check_instance(inst: &Instance) -> Result<(), CliError> {
    let v = validate_instance(inst);
    if v.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Err(CoreError::InvalidInstance(list.join("; ")).into())
    }
}

/// The `--instance` file, or a generated paper-style suite.
fn instance(opts: &mut Options) -> Result<Instance, CliError> {
    let inst = match opts.instance.clone() {
        Some(p) => Instance::load(&p)?,
        None => {
            let default = if Options::flag(&mut opts.paper_default) { REFERENCE_SURGERIES } else { DESK_SURGERIES };
            paper_instance(&suite(opts, default)?).0
        }
    };
    check_instance(&inst)?;
    match *opts.policy.get_or_insert(Policy::Flexible) {
        Policy::Flexible => Ok(inst),
        Policy::Dedicated => Ok(dedicated_instance(&inst, &opts.reserved_rooms())?),
    }
}

fn dataset(opts: &Options) -> Result<DurationDataset, CliError> {
    match &opts.durations {
        Some(p) => {
            let loaded = load_duration_records(p, None)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            Ok(loaded.dataset)
        }
        None => Ok(paper_types().1),
    }
}

fn read_scenarios(path: &PathBuf, inst: &Instance) -> Result<ScenarioSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ScenarioSet::from_csv(&text, &path.display().to_string(), inst.num_surgeries(), inst.num_blocks())?)
}

fn backend() -> Result<Box<dyn Backend>, CliError> {
    Ok(default_backend()?)
}

pub fn gen(opts: &mut Options) -> Result<(), CliError> {
    let custom = opts.types.is_some() || opts.blocks.is_some();
    let (inst, data) = if custom {
        let inst = minimal_instance(*opts.types.get_or_insert(1), *opts.blocks.get_or_insert(1));
        (inst, None)
    } else {
        let default = if Options::flag(&mut opts.paper_default) { REFERENCE_SURGERIES } else { DESK_SURGERIES };
        let (inst, ds) = paper_instance(&suite(opts, default)?);
        (inst, Some(ds))
    };
    check_instance(&inst)?;
    let n = opts.n_single(5)?;
    let sampler = opts.sampler(if custom { DurationSampler::Lognormal } else { DurationSampler::EmpiricalResample });
    let spec = SamplerSpec::new(sampler, opts.emergency_sampler(), opts.seed(), n);
    let data = match (&opts.durations, data) {
        (Some(_), _) => Some(dataset(opts)?),
        (None, d) => d,
    };
    let scen = sample_scenarios_par(&inst, &spec, data.as_ref())?;
    let dir = opts.out_dir("out");
    write_resolved(&dir, "gen", opts)?;
    write(&dir, "instance.json", &(inst.to_json() + "\n"))?;
    write(&dir, "scenarios.csv", &scen.to_csv())?;
    if let (None, Some(ds)) = (&opts.durations, &data) {
        write(&dir, "durations.csv", &ds.to_csv())?;
    }
    println!("instance: {} surgeries, {} blocks; {} scenarios -> {}", inst.num_surgeries(), inst.num_blocks(), scen.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SolveReport<'a> {
    model: ModelKind,
    epsilon: Option<f64>,
    status: String,
    objective: f64,
    first_stage: f64,
    radius_term: f64,
    recourse_term: f64,
    gap: f64,
    runtime_seconds: f64,
    size: ModelSize,
    scheduled: usize,
    rejected: usize,
    warnings: &'a [String],
}

pub fn solve(opts: &mut Options) -> Result<(), CliError> {
    let inst = instance(opts)?;
    let kind = *opts.model.get_or_insert(ModelKind::Wdro);
    let params = params(opts);
    let scen = if kind == ModelKind::Mdro {
        None
    } else if let Some(p) = opts.scenarios.clone() {
        Some(read_scenarios(&p, &inst)?)
    } else {
        let n = opts.n_single(5)?;
        let spec = SamplerSpec::new(opts.sampler(DurationSampler::EmpiricalResample), opts.emergency_sampler(), opts.seed(), n);
        let ds = match spec.kind {
            DurationSampler::EmpiricalResample => Some(dataset(opts)?),
            _ => None,
        };
        Some(sample_scenarios_par(&inst, &spec, ds.as_ref())?)
    };
    let eps = match kind {
        ModelKind::Wdro | ModelKind::Wdsba => Some(opts.epsilon(1.0)?),
        _ => None,
    };
    let wcfg = WdroConfig { epsilon: eps.unwrap_or(0.0), rho_upper: opts.rho_upper };
    let spec = match kind {
        ModelKind::Saa => ModelSpec::Saa(scen.as_ref().expect("sampled above")),
        ModelKind::Wdro => ModelSpec::Wdro(scen.as_ref().expect("sampled above"), wcfg),
        ModelKind::Wdsba => ModelSpec::Wdsba(scen.as_ref().expect("sampled above"), wcfg),
        ModelKind::Mdro => ModelSpec::Mdro(MomentInfo::from_instance(&inst)?),
    };
    let dir = opts.out_dir("out");
    let write_model = Options::flag(&mut opts.write_lp);
    write_resolved(&dir, "solve", opts)?;
    if write_model {
        write(&dir, "model.lp", &write_lp(&build::<f64>(&inst, &spec)?))?;
    }
    let s = solve_model(&inst, &spec, backend()?.as_ref(), &params)?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    let report = SolveReport {
        model: kind,
        epsilon: eps,
        status: format!("{:?}", s.status).to_lowercase(),
        objective: s.objective,
        first_stage: s.breakdown.first_stage,
        radius_term: s.breakdown.radius_term,
        recourse_term: s.breakdown.recourse_term,
        gap: s.gap,
        runtime_seconds: s.runtime,
        size: s.size,
        scheduled: s.schedule.scheduled_count(),
        rejected: s.schedule.rejected_count(),
        warnings: &s.warnings,
    };
    write(&dir, "schedule.json", &(s.schedule.to_json() + "\n"))?;
    write(&dir, "report.json", &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
    println!(
        "{kind} status {} objective {:.6} scheduled {}/{}",
        report.status,
        s.objective,
        report.scheduled,
        inst.num_surgeries()
    );
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow {
    scenarios: usize,
    first_stage: f64,
    scheduled: usize,
    rejected: usize,
    mean_cost: f64,
    cost_q20: f64,
    cost_q75: f64,
    cost_q80: f64,
    cost_q95: f64,
    overtime_hours_mean: f64,
    overtime_hours_q20: f64,
    overtime_hours_q80: f64,
    utilization_pct_mean: f64,
    utilization_pct_q20: f64,
    utilization_pct_q80: f64,
}

pub fn simulate(opts: &mut Options) -> Result<(), CliError> {
    let inst = instance(opts)?;
    let path = opts.schedule.clone().ok_or_else(|| CliError::Usage("simulate needs --schedule".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let sched = Schedule::from_json(&text)?;
    let eval = match opts.scenarios.clone() {
        Some(p) => read_scenarios(&p, &inst)?,
        None => {
            let spec = SamplerSpec::new(
                opts.eval_sampler(DurationSampler::EmpiricalResample),
                opts.emergency_sampler(),
                opts.seed(),
                opts.n_prime(DEFAULT_N_PRIME),
            );
            let ds = match spec.kind {
                DurationSampler::EmpiricalResample => Some(dataset(opts)?),
                _ => None,
            };
            sample_scenarios_par(&inst, &spec, ds.as_ref())?
        }
    };
    let dir = opts.out_dir("out");
    write_resolved(&dir, "simulate", opts)?;
    let m = simulate_out_of_sample(&inst, &sched, &eval)?;
    let row = MetricsRow {
        scenarios: m.scenarios,
        first_stage: m.first_stage,
        scheduled: m.scheduled_count,
        rejected: m.rejected_count,
        mean_cost: m.cost.mean,
        cost_q20: m.cost.q20,
        cost_q75: m.cost.q75,
        cost_q80: m.cost.q80,
        cost_q95: m.cost.q95,
        overtime_hours_mean: m.overtime_hours.mean,
        overtime_hours_q20: m.overtime_hours.q20,
        overtime_hours_q80: m.overtime_hours.q80,
        utilization_pct_mean: m.utilization_pct.mean,
        utilization_pct_q20: m.utilization_pct.q20,
        utilization_pct_q80: m.utilization_pct.q80,
    };
    write(&dir, "metrics.json", &(serde_json::to_string_pretty(&m).expect("json") + "\n"))?;
    write(&dir, "metrics.csv", &to_csv(&[row])?)?;
    println!("mean cost {:.6} over {} scenarios", m.cost.mean, m.scenarios);
    Ok(())
}

#[derive(Serialize)]
struct PolicySummary {
    policy: Policy,
    cost: CostStructure,
    emergency_rate_mult: f64,
    reps_ok: usize,
    scheduled: Option<f64>,
    mean_cost: Option<f64>,
    overtime_hours: Option<f64>,
    utilization_pct: Option<f64>,
}

fn summarize_policies(rows: &[PolicyRow]) -> Vec<PolicySummary> {
    let mut cells: BTreeMap<(CostStructure, u64, Policy), Vec<&PolicyRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.cost, r.emergency_rate_mult.to_bits(), r.policy)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((cost, mult, policy), rs)| {
            let ok: Vec<&&PolicyRow> = rs.iter().filter(|r| r.status == "ok").collect();
            let avg = |f: &dyn Fn(&PolicyRow) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            PolicySummary {
                policy,
                cost,
                emergency_rate_mult: f64::from_bits(mult),
                reps_ok: ok.len(),
                scheduled: avg(&|r| r.scheduled.map(|v| v as f64)),
                mean_cost: avg(&|r| r.mean_cost),
                overtime_hours: avg(&|r| r.overtime_hours),
                utilization_pct: avg(&|r| r.utilization_pct),
            }
        })
        .collect()
}

pub fn experiment(opts: &mut Options, which: Experiment, label: &str) -> Result<(), CliError> {
    let params = params(opts);
    let seed = opts.seed();
    let dir = opts.out_dir("out");
    let backend = backend()?;
    let emergencies = opts.emergency_sampler();
    match which {
        Experiment::RadiusSweep | Experiment::PerfectInfo | Experiment::MisspecifiedLogn => {
            let (models, eps, eval): (&[ModelKind], &[f64], DurationSampler) = match which {
                Experiment::RadiusSweep => (&[ModelKind::Wdro], &PAPER_EPSILONS, DurationSampler::EmpiricalResample),
                Experiment::PerfectInfo => {
                    (&[ModelKind::Saa, ModelKind::Wdro, ModelKind::Mdro], &[10.0], DurationSampler::EmpiricalResample)
                }
                _ => (&[ModelKind::Saa, ModelKind::Wdro, ModelKind::Mdro], &[10.0], DurationSampler::Lognormal),
            };
            let inst = instance(opts)?;
            let cfg = ReplicationStudy {
                models: opts.models.get_or_insert_with(|| models.to_vec()).clone(),
                reps: opts.reps(DEFAULT_REPS),
                n_list: opts.n_list(&[5, 10, 50, 100]),
                n_prime: opts.n_prime(DEFAULT_N_PRIME),
                epsilons: opts.epsilons(eps),
                seed,
                in_sample: SamplerPair { durations: opts.sampler(DurationSampler::EmpiricalResample), emergencies },
                out_sample: SamplerPair { durations: opts.eval_sampler(eval), emergencies },
                rho_upper: opts.rho_upper,
            };
            let ds = dataset(opts)?;
            write_resolved(&dir, label, opts)?;
            let ctx = StudyContext { backend: backend.as_ref(), params, data: Some(&ds) };
            let r = replication_study(&ctx, &inst, &cfg)?;
            write(&dir, "results.csv", &to_csv(&r.rows)?)?;
            write(&dir, "summary.csv", &to_csv(&r.summary)?)?;
            write(&dir, "summary.json", &(serde_json::to_string_pretty(&r.summary).expect("json") + "\n"))?;
            let failed = r.rows.iter().filter(|x| x.status != "ok").count();
            println!("{label}: {} rows ({failed} failed) -> {}", r.rows.len(), dir.display());
        }
        Experiment::PolicyCompare => {
            let surgeries = opts.surgeries(80)?;
            let cfg = PolicyConfig {
                suite: SuiteConfig {
                    surgeries,
                    cost: CostStructure::Cost1,
                    patient_costs: patient_costs(opts),
                    emergency_rate_mult: 1.0,
                    scaled_blocks: *opts.scaled_blocks.get_or_insert(surgeries < REFERENCE_SURGERIES),
                    seed,
                },
                reserved_rooms: opts.reserved_rooms(),
                costs: opts.costs(&[CostStructure::Cost1, CostStructure::Cost2]),
                emergency_rate_mults: opts.mults(&[1.0, 2.0]),
                epsilon: opts.epsilon(1.0)?,
                n: opts.n_single(5)?,
                n_prime: opts.n_prime(DEFAULT_N_PRIME),
                reps: opts.reps(1),
                seed,
                sampler: SamplerPair { durations: opts.sampler(DurationSampler::EmpiricalResample), emergencies },
            };
            let ds = dataset(opts)?;
            write_resolved(&dir, label, opts)?;
            let ctx = StudyContext { backend: backend.as_ref(), params, data: Some(&ds) };
            let rows = compare_policies(&ctx, &cfg)?;
            write(&dir, "results.csv", &to_csv(&rows)?)?;
            write(&dir, "summary.csv", &to_csv(&summarize_policies(&rows))?)?;
            println!("{label}: {} rows -> {}", rows.len(), dir.display());
        }
        Experiment::BlockAllocation => {
            let d = AllocationConfig::default();
            let cfg = AllocationStudy {
                instance: AllocationConfig {
                    blocks: *opts.blocks.get_or_insert(d.blocks),
                    surgeries: opts.surgeries(d.surgeries)?,
                    patient_costs: patient_costs(opts),
                    ..d
                },
                epsilon: opts.epsilon(1.0)?,
                n: opts.n_single(5)?,
                n_prime: opts.n_prime(DEFAULT_N_PRIME),
                reps: opts.reps(1),
                seed,
                sampler: SamplerPair { durations: opts.sampler(DurationSampler::EmpiricalResample), emergencies },
            };
            let ds = opts.durations.is_some().then(|| dataset(opts)).transpose()?;
            write_resolved(&dir, label, opts)?;
            let ctx = StudyContext { backend: backend.as_ref(), params, data: ds.as_ref() };
            let rows = allocation_study(&ctx, &cfg)?;
            write(&dir, "results.csv", &to_csv(&rows)?)?;
            for r in &rows {
                println!(
                    "rep {}: {} open {} scheduled {} gap {:.4}",
                    r.rep,
                    r.status,
                    r.open_blocks.unwrap_or(0),
                    r.scheduled.unwrap_or(0),
                    r.gap.unwrap_or(f64::NAN)
                );
            }
        }
        Experiment::Timing => {
            let cfg = TimingConfig {
                sizes: opts.surgeries_list(&[10, 20, 60]),
                n_list: opts.n_list(&[5, 10, 50, 100]),
                costs: opts.costs(&[CostStructure::Cost1, CostStructure::Cost2]),
                epsilon: opts.epsilon(1.0)?,
                reps: opts.reps(1),
                seed,
                sampler: SamplerPair { durations: opts.sampler(DurationSampler::EmpiricalResample), emergencies },
            };
            let ds = dataset(opts)?;
            write_resolved(&dir, label, opts)?;
            let ctx = StudyContext { backend: backend.as_ref(), params, data: Some(&ds) };
            let (rows, summary) = timing_harness(&ctx, &cfg)?;
            write(&dir, "timing.csv", &to_csv(&rows)?)?;
            write(&dir, "timing_summary.csv", &to_csv(&summary)?)?;
            for s in &summary {
                println!(
                    "I {} N {} {:?}: min {:.2}s avg {:.2}s max {:.2}s censored {}",
                    s.surgeries, s.n, s.cost, s.min, s.avg, s.max, s.censored
                );
            }
        }
    }
    Ok(())
}

pub fn verify(opts: &mut Options) -> Result<(), CliError> {
    let seed = opts.seed();
    let inst = match opts.instance.clone() {
        Some(p) => {
            let inst = Instance::load(&p)?;
            check_instance(&inst)?;
            inst
        }
        None => random_tiny_instance(seed, opts.surgeries(3)?, *opts.blocks.get_or_insert(2)),
    };
    let scen = match opts.scenarios.clone() {
        Some(p) => read_scenarios(&p, &inst)?,
        None => {
            let spec = SamplerSpec::new(opts.sampler(DurationSampler::Lognormal), opts.emergency_sampler(), seed, opts.n_single(3)?);
            let ds = match spec.kind {
                DurationSampler::EmpiricalResample => Some(dataset(opts)?),
                _ => None,
            };
            sample_scenarios_par(&inst, &spec, ds.as_ref())?
        }
    };
    let eps = opts.epsilon(1.0)?;
    let checks = opts.check.get_or_insert_with(|| Check::ALL.to_vec()).clone();
    let params = params(opts);
    let dir = opts.out_dir("out");
    write_resolved(&dir, "verify", opts)?;
    let out = run_checks(&inst, &scen, eps, &checks, backend()?.as_ref(), &params)?;
    write(&dir, "verify.json", &(serde_json::to_string_pretty(&out).expect("json") + "\n"))?;
    let mut failed = 0;
    for c in &out {
        let name = serde_json::to_value(c.check).expect("json");
        let name = name.as_str().unwrap_or_default();
        if c.passed {
            println!("PASS {name} ({} cases)", c.cases);
        } else {
            failed += 1;
            println!("FAIL {name}: {}", c.detail.as_deref().unwrap_or(""));
        }
    }
    if failed > 0 {
        return Err(CliError::Checks(failed));
    }
    Ok(())
}

