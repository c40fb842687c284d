//! Out-of-sample simulation and the replication studies built on it.
//!
//! Every random draw comes from a seed derived from the study seed and the
//! cell coordinates, so results do not depend on scheduling order. Result
//! rows are sorted before they are returned.

use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surgdro_milp::{Backend, SolveParams, SolveStatus};

use crate::domain::{Instance, Schedule};
use crate::error::CoreError;
use crate::ingest::{
    sample_scenarios_par, scenario_rng, DurationDataset, DurationSampler, EmergencySampler, SamplerSpec, ScenarioSet,
};
use crate::instances::{allocation_instance, paper_instance, AllocationConfig, CostStructure, SuiteConfig};
use crate::models::{dedicated_instance, solve_model, ModelKind, ModelSpec, MomentInfo, WdroConfig};
use crate::recourse::{block_outcomes, first_stage_cost};

/// Quantile levels reported for every distribution.
pub const QUANTILE_LEVELS: [f64; 4] = [0.20, 0.75, 0.80, 0.95];

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub q20: f64,
    pub q75: f64,
    pub q80: f64,
    pub q95: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let q = QUANTILE_LEVELS.map(|p| nearest_rank(&v, p));
        Self { mean, q20: q[0], q75: q[1], q80: q[2], q95: q[3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cost: Distribution,
    /// Total overtime per planning cycle, in hours.
    pub overtime_hours: Distribution,
    pub utilization_pct: Distribution,
    pub first_stage: f64,
    pub scheduled_count: usize,
    pub rejected_count: usize,
    pub scenarios: usize,
}

impl Metrics {
    pub fn mean_cost(&self) -> f64 {
        self.cost.mean
    }
}

/// Per-scenario total cost, overtime hours and utilization.
pub fn scenario_outcomes(inst: &Instance, sched: &Schedule, eval: &ScenarioSet) -> Result<Vec<(f64, f64, f64)>, CoreError> {
    let first = first_stage_cost(inst, sched)?;
    eval.scenarios
        .par_iter()
        .map(|s| {
            crate::domain::check_scenario(inst, s)?;
            let mut cost = first;
            let (mut ot, mut idle, mut avail) = (0.0, 0.0, 0.0);
            for (out, k) in block_outcomes(inst, sched, s)?.into_iter().zip(&inst.blocks) {
                if let Some(o) = out {
                    cost += k.overtime_rate * o.overtime + k.idle_rate * o.idle;
                    ot += o.overtime;
                    idle += o.idle;
                    avail += k.length;
                }
            }
            let ut = if avail > 0.0 { ((avail - idle) / avail * 100.0).clamp(0.0, 100.0) } else { 0.0 };
            Ok((cost, ot / 60.0, ut))
        })
        .collect()
}

/// Evaluates a fixed schedule on `eval`. The second stage is re-solved
/// exactly through the closed-form recourse.
pub fn simulate_out_of_sample(inst: &Instance, sched: &Schedule, eval: &ScenarioSet) -> Result<Metrics, CoreError> {
    if eval.is_empty() {
        return Err(CoreError::Config("empty evaluation set".into()));
    }
    let rows = scenario_outcomes(inst, sched, eval)?;
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| [r.0, r.1, r.2][k]).collect() };
    Ok(Metrics {
        cost: Distribution::of(&col(0)),
        overtime_hours: Distribution::of(&col(1)),
        utilization_pct: Distribution::of(&col(2)),
        first_stage: first_stage_cost(inst, sched)?,
        scheduled_count: sched.scheduled_count(),
        rejected_count: sched.rejected_count(),
        scenarios: eval.len(),
    })
}

/// Seed for a study cell: one ChaCha draw per coordinate.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(base, |s, &p| scenario_rng(s, p as usize).next_u64())
}

const IN_SAMPLE: u64 = 1;
const OUT_SAMPLE: u64 = 2;

/// `(in-sample, out-of-sample)` seeds of replication `rep`.
pub fn replication_seeds(seed: u64, rep: usize) -> (u64, u64) {
    (derive_seed(seed, &[IN_SAMPLE, rep as u64]), derive_seed(seed, &[OUT_SAMPLE, rep as u64]))
}

/// Shared inputs of every study.
pub struct StudyContext<'a> {
    pub backend: &'a dyn Backend,
    pub params: SolveParams,
    pub data: Option<&'a DurationDataset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerPair {
    pub durations: DurationSampler,
    pub emergencies: EmergencySampler,
}

impl SamplerPair {
    pub fn empirical() -> Self {
        Self { durations: DurationSampler::EmpiricalResample, emergencies: EmergencySampler::TruncatedExponential }
    }

    pub fn lognormal() -> Self {
        Self { durations: DurationSampler::Lognormal, emergencies: EmergencySampler::TruncatedExponential }
    }

    fn spec(&self, seed: u64, n: usize) -> SamplerSpec {
        SamplerSpec::new(self.durations, self.emergencies, seed, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStudy {
    pub models: Vec<ModelKind>,
    pub reps: usize,
    pub n_list: Vec<usize>,
    pub n_prime: usize,
    /// Radii for the Wasserstein models; ignored by the others.
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub in_sample: SamplerPair,
    pub out_sample: SamplerPair,
    pub rho_upper: Option<f64>,
}

impl ReplicationStudy {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.reps == 0 {
            return Err(CoreError::Config("R must be at least 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(CoreError::Config("N list must be nonempty and positive".into()));
        }
        let n_max = *self.n_list.iter().max().expect("nonempty");
        if self.n_prime < n_max {
            return Err(CoreError::Config(format!("N' = {} is below N = {n_max}", self.n_prime)));
        }
        let needs_eps = self.models.iter().any(|m| matches!(m, ModelKind::Wdro | ModelKind::Wdsba));
        if needs_eps && self.epsilons.is_empty() {
            return Err(CoreError::Config("epsilon list is empty".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(CoreError::Config("epsilons must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// One replication of one cell. Failed solves keep the row with `status`
/// set to the error text and empty metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub model: ModelKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: Option<f64>,
    pub rep: usize,
    pub in_seed: u64,
    pub out_seed: u64,
    pub status: String,
    pub objective: Option<f64>,
    pub first_stage: Option<f64>,
    pub scheduled: Option<usize>,
    pub rejected: Option<usize>,
    pub open_blocks: Option<usize>,
    pub mean_cost: Option<f64>,
    pub cost_q20: Option<f64>,
    pub cost_q75: Option<f64>,
    pub cost_q80: Option<f64>,
    pub cost_q95: Option<f64>,
    pub overtime_hours: Option<f64>,
    pub utilization_pct: Option<f64>,
}

impl StudyRow {
    fn key(&self) -> (ModelKind, usize, u64, usize) {
        (self.model, self.n, self.epsilon.unwrap_or(-1.0).to_bits(), self.rep)
    }

    fn empty(model: ModelKind, n: usize, epsilon: Option<f64>, rep: usize, in_seed: u64, out_seed: u64) -> Self {
        Self {
            model,
            n,
            epsilon,
            rep,
            in_seed,
            out_seed,
            status: String::new(),
            objective: None,
            first_stage: None,
            scheduled: None,
            rejected: None,
            open_blocks: None,
            mean_cost: None,
            cost_q20: None,
            cost_q75: None,
            cost_q80: None,
            cost_q95: None,
            overtime_hours: None,
            utilization_pct: None,
        }
    }

    fn fill(&mut self, objective: f64, sched: &Schedule, inst: &Instance, m: &Metrics) {
        self.status = "ok".into();
        self.objective = Some(objective);
        self.first_stage = Some(m.first_stage);
        self.scheduled = Some(m.scheduled_count);
        self.rejected = Some(m.rejected_count);
        self.open_blocks = Some((0..inst.num_blocks()).filter(|&b| sched.is_open(b)).count());
        self.mean_cost = Some(m.cost.mean);
        self.cost_q20 = Some(m.cost.q20);
        self.cost_q75 = Some(m.cost.q75);
        self.cost_q80 = Some(m.cost.q80);
        self.cost_q95 = Some(m.cost.q95);
        self.overtime_hours = Some(m.overtime_hours.mean);
        self.utilization_pct = Some(m.utilization_pct.mean);
    }
}

/// Sorted per-replication rows plus per-cell aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: ModelKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: Option<f64>,
    pub reps_ok: usize,
    pub reps_failed: usize,
    /// Mean over replications of the out-of-sample mean cost.
    pub mean_cost: Option<f64>,
    /// Replication averages of the out-of-sample 20% and 80% quantiles.
    pub cost_q20: Option<f64>,
    pub cost_q80: Option<f64>,
    pub scheduled: Option<f64>,
}

pub fn summarize(rows: &[StudyRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(ModelKind, usize, u64), Vec<&StudyRow>> = BTreeMap::new();
    for r in rows {
        let (m, n, e, _) = r.key();
        cells.entry((m, n, e)).or_default().push(r);
    }
    cells
        .into_values()
        .map(|mut rs| {
            rs.sort_by_key(|r| r.rep);
            let ok: Vec<&StudyRow> = rs.iter().copied().filter(|r| r.status == "ok").collect();
            let avg = |f: &dyn Fn(&StudyRow) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            CellSummary {
                model: rs[0].model,
                n: rs[0].n,
                epsilon: rs[0].epsilon,
                reps_ok: ok.len(),
                reps_failed: rs.len() - ok.len(),
                mean_cost: avg(&|r| r.mean_cost),
                cost_q20: avg(&|r| r.cost_q20),
                cost_q80: avg(&|r| r.cost_q80),
                scheduled: avg(&|r| r.scheduled.map(|v| v as f64)),
            }
        })
        .collect()
}

struct Cell {
    model: ModelKind,
    n: usize,
    epsilon: Option<f64>,
    rep: usize,
}

/// Runs the protocol: for each replication draw an in-sample set (nested
/// across N) and one out-of-sample set shared by every cell of that
/// replication, solve, then simulate.
pub fn replication_study(ctx: &StudyContext, inst: &Instance, cfg: &ReplicationStudy) -> Result<StudyResult, CoreError> {
    cfg.validate()?;
    let n_max = *cfg.n_list.iter().max().expect("validated");
    let reps: Vec<usize> = (0..cfg.reps).collect();
    let in_seeds: Vec<u64> = reps.iter().map(|&r| derive_seed(cfg.seed, &[IN_SAMPLE, r as u64])).collect();
    let out_seeds: Vec<u64> = reps.iter().map(|&r| derive_seed(cfg.seed, &[OUT_SAMPLE, r as u64])).collect();
    let eval: Vec<ScenarioSet> = out_seeds
        .iter()
        .map(|&s| sample_scenarios_par(inst, &cfg.out_sample.spec(s, cfg.n_prime), ctx.data))
        .collect::<Result<_, _>>()?;
    let pools: Vec<ScenarioSet> = in_seeds
        .iter()
        .map(|&s| sample_scenarios_par(inst, &cfg.in_sample.spec(s, n_max), ctx.data))
        .collect::<Result<_, _>>()?;

    // The moment model ignores the sample; solve it once.
    let mdro = if cfg.models.contains(&ModelKind::Mdro) {
        Some(
            MomentInfo::from_instance(inst)
                .and_then(|m| solve_model(inst, &ModelSpec::Mdro(m), ctx.backend, &ctx.params)),
        )
    } else {
        None
    };

    let mut cells = Vec::new();
    for &rep in &reps {
        for &model in &cfg.models {
            for &n in &cfg.n_list {
                match model {
                    ModelKind::Wdro | ModelKind::Wdsba => {
                        for &e in &cfg.epsilons {
                            cells.push(Cell { model, n, epsilon: Some(e), rep });
                        }
                    }
                    _ => cells.push(Cell { model, n, epsilon: None, rep }),
                }
            }
        }
    }

    let mut rows: Vec<StudyRow> = cells
        .par_iter()
        .map(|c| {
            let mut row = StudyRow::empty(c.model, c.n, c.epsilon, c.rep, in_seeds[c.rep], out_seeds[c.rep]);
            let sample = ScenarioSet {
                scenarios: pools[c.rep].scenarios[..c.n].to_vec(),
                seed: pools[c.rep].seed,
                source: pools[c.rep].source.clone(),
            };
            let wcfg = |e: f64| WdroConfig { epsilon: e, rho_upper: cfg.rho_upper };
            let solved = match c.model {
                ModelKind::Saa => solve_model(inst, &ModelSpec::Saa(&sample), ctx.backend, &ctx.params),
                ModelKind::Wdro => {
                    solve_model(inst, &ModelSpec::Wdro(&sample, wcfg(c.epsilon.unwrap_or(0.0))), ctx.backend, &ctx.params)
                }
                ModelKind::Wdsba => {
                    solve_model(inst, &ModelSpec::Wdsba(&sample, wcfg(c.epsilon.unwrap_or(0.0))), ctx.backend, &ctx.params)
                }
                ModelKind::Mdro => match mdro.as_ref().expect("solved above") {
                    Ok(s) => Ok(s.clone()),
                    Err(e) => Err(CoreError::Config(e.to_string())),
                },
            };
            match solved.and_then(|s| simulate_out_of_sample(inst, &s.schedule, &eval[c.rep]).map(|m| (s, m))) {
                Ok((s, m)) => row.fill(s.objective, &s.schedule, inst, &m),
                Err(e) => row.status = e.to_string(),
            }
            row
        })
        .collect();
    rows.sort_by_key(StudyRow::key);
    let summary = summarize(&rows);
    Ok(StudyResult { rows, summary })
}

/// The paper's radius grid.
pub const PAPER_EPSILONS: [f64; 13] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 75.0, 100.0];

/// W-DRO over a grid of radii; a thin layer over [`replication_study`].
pub fn radius_sweep(
    ctx: &StudyContext,
    inst: &Instance,
    sampler: SamplerPair,
    epsilons: &[f64],
    n_list: &[usize],
    reps: usize,
    n_prime: usize,
    seed: u64,
) -> Result<StudyResult, CoreError> {
    replication_study(
        ctx,
        inst,
        &ReplicationStudy {
            models: vec![ModelKind::Wdro],
            reps,
            n_list: n_list.to_vec(),
            n_prime,
            epsilons: epsilons.to_vec(),
            seed,
            in_sample: sampler,
            out_sample: sampler,
            rho_upper: None,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Flexible,
    Dedicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub suite: SuiteConfig,
    pub reserved_rooms: Vec<String>,
    pub costs: Vec<CostStructure>,
    pub emergency_rate_mults: Vec<f64>,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_prime: usize,
    pub reps: usize,
    pub seed: u64,
    pub sampler: SamplerPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    pub cost: CostStructure,
    pub emergency_rate_mult: f64,
    pub rep: usize,
    pub status: String,
    pub scheduled: Option<usize>,
    pub mean_cost: Option<f64>,
    pub cost_q20: Option<f64>,
    pub cost_q80: Option<f64>,
    pub overtime_hours: Option<f64>,
    pub utilization_pct: Option<f64>,
}

/// Flexible versus dedicated ORs for each cost structure and emergency rate.
/// Both policies see the same duration draws.
pub fn compare_policies(ctx: &StudyContext, cfg: &PolicyConfig) -> Result<Vec<PolicyRow>, CoreError> {
    if cfg.reps == 0 || cfg.n == 0 || cfg.n_prime < cfg.n {
        return Err(CoreError::Config("need R >= 1 and N' >= N >= 1".into()));
    }
    let mut cells = Vec::new();
    for &cost in &cfg.costs {
        for &mult in &cfg.emergency_rate_mults {
            let suite = SuiteConfig { cost, emergency_rate_mult: mult, ..cfg.suite.clone() };
            let (flex, _) = paper_instance(&suite);
            let ded = dedicated_instance(&flex, &cfg.reserved_rooms)?;
            for rep in 0..cfg.reps {
                cells.push((Policy::Flexible, cost, mult, rep, flex.clone()));
                cells.push((Policy::Dedicated, cost, mult, rep, ded.clone()));
            }
        }
    }
    let mut rows: Vec<PolicyRow> = cells
        .par_iter()
        .map(|(policy, cost, mult, rep, inst)| {
            let mut row = PolicyRow {
                policy: *policy,
                cost: *cost,
                emergency_rate_mult: *mult,
                rep: *rep,
                status: "ok".into(),
                scheduled: None,
                mean_cost: None,
                cost_q20: None,
                cost_q80: None,
                overtime_hours: None,
                utilization_pct: None,
            };
            let run = || -> Result<Metrics, CoreError> {
                let (in_seed, out_seed) = replication_seeds(cfg.seed, *rep);
                let sample = sample_scenarios_par(inst, &cfg.sampler.spec(in_seed, cfg.n), ctx.data)?;
                let eval = sample_scenarios_par(inst, &cfg.sampler.spec(out_seed, cfg.n_prime), ctx.data)?;
                let s = solve_model(inst, &ModelSpec::Wdro(&sample, WdroConfig::new(cfg.epsilon)), ctx.backend, &ctx.params)?;
                simulate_out_of_sample(inst, &s.schedule, &eval)
            };
            match run() {
                Ok(m) => {
                    row.scheduled = Some(m.scheduled_count);
                    row.mean_cost = Some(m.cost.mean);
                    row.cost_q20 = Some(m.cost.q20);
                    row.cost_q80 = Some(m.cost.q80);
                    row.overtime_hours = Some(m.overtime_hours.mean);
                    row.utilization_pct = Some(m.utilization_pct.mean);
                }
                Err(e) => row.status = e.to_string(),
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.cost, a.emergency_rate_mult.to_bits(), a.policy, a.rep).cmp(&(b.cost, b.emergency_rate_mult.to_bits(), b.policy, b.rep))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationStudy {
    pub instance: AllocationConfig,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_prime: usize,
    pub reps: usize,
    pub seed: u64,
    pub sampler: SamplerPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub rep: usize,
    pub status: String,
    pub objective: Option<f64>,
    /// Relative gap reported by the solver; nonzero only after a time limit.
    pub gap: Option<f64>,
    pub open_blocks: Option<usize>,
    pub scheduled: Option<usize>,
    pub mean_cost: Option<f64>,
    pub overtime_hours: Option<f64>,
    pub utilization_pct: Option<f64>,
}

/// Block allocation with the Wasserstein model, one solve per replication.
/// Solves run one at a time; a time limit applies to each.
pub fn allocation_study(ctx: &StudyContext, cfg: &AllocationStudy) -> Result<Vec<AllocationRow>, CoreError> {
    if cfg.reps == 0 || cfg.n == 0 || cfg.n_prime < cfg.n {
        return Err(CoreError::Config("need R >= 1 and N' >= N >= 1".into()));
    }
    let (inst, ds) = allocation_instance(&cfg.instance)?;
    let data = ctx.data.unwrap_or(&ds);
    let mut rows = Vec::with_capacity(cfg.reps);
    for rep in 0..cfg.reps {
        let mut row = AllocationRow {
            rep,
            status: String::new(),
            objective: None,
            gap: None,
            open_blocks: None,
            scheduled: None,
            mean_cost: None,
            overtime_hours: None,
            utilization_pct: None,
        };
        let (in_seed, out_seed) = replication_seeds(cfg.seed, rep);
        let run = || -> Result<(crate::models::Solved, Metrics), CoreError> {
            let sample = sample_scenarios_par(&inst, &cfg.sampler.spec(in_seed, cfg.n), Some(data))?;
            let eval = sample_scenarios_par(&inst, &cfg.sampler.spec(out_seed, cfg.n_prime), Some(data))?;
            let s = solve_model(&inst, &ModelSpec::Wdsba(&sample, WdroConfig::new(cfg.epsilon)), ctx.backend, &ctx.params)?;
            let m = simulate_out_of_sample(&inst, &s.schedule, &eval)?;
            Ok((s, m))
        };
        match run() {
            Ok((s, m)) => {
                row.status = format!("{:?}", s.status).to_lowercase();
                row.objective = Some(s.objective);
                row.gap = Some(s.gap);
                row.open_blocks = Some((0..inst.num_blocks()).filter(|&b| s.schedule.is_open(b)).count());
                row.scheduled = Some(m.scheduled_count);
                row.mean_cost = Some(m.cost.mean);
                row.overtime_hours = Some(m.overtime_hours.mean);
                row.utilization_pct = Some(m.utilization_pct.mean);
            }
            Err(e) => row.status = e.to_string(),
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub sizes: Vec<usize>,
    pub n_list: Vec<usize>,
    pub costs: Vec<CostStructure>,
    pub epsilon: f64,
    pub reps: usize,
    pub seed: u64,
    pub sampler: SamplerPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    #[serde(rename = "I")]
    pub surgeries: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub cost: CostStructure,
    pub rep: usize,
    pub status: String,
    /// Hit the time limit before proving optimality.
    pub censored: bool,
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    #[serde(rename = "I")]
    pub surgeries: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub cost: CostStructure,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    pub censored: usize,
}

/// Wall-clock W-DRO solve times on the full paper suite. Solves run one at a
/// time so they do not compete for cores.
pub fn timing_harness(
    ctx: &StudyContext,
    cfg: &TimingConfig,
) -> Result<(Vec<TimingRow>, Vec<TimingSummary>), CoreError> {
    if cfg.reps == 0 {
        return Err(CoreError::Config("R must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &cost in &cfg.costs {
        for &size in &cfg.sizes {
            let suite = SuiteConfig { surgeries: size, cost, ..SuiteConfig::default() };
            let (inst, _) = paper_instance(&suite);
            for &n in &cfg.n_list {
                for rep in 0..cfg.reps {
                    let seed = derive_seed(cfg.seed, &[IN_SAMPLE, rep as u64]);
                    let sample = sample_scenarios_par(&inst, &cfg.sampler.spec(seed, n), ctx.data)?;
                    let spec = ModelSpec::Wdro(&sample, WdroConfig::new(cfg.epsilon));
                    let model = crate::models::build::<f64>(&inst, &spec)?;
                    let size_of = crate::models::ModelSize::of(&model);
                    let (res, secs) = surgdro_milp::timed(|| ctx.backend.solve(&model, &ctx.params));
                    let (status, censored) = match &res {
                        Ok(s) => (format!("{:?}", s.status), s.status == SolveStatus::Limit),
                        Err(e) => (e.to_string(), false),
                    };
                    rows.push(TimingRow {
                        surgeries: size,
                        n,
                        cost,
                        rep,
                        status,
                        censored,
                        variables: size_of.variables,
                        binaries: size_of.binaries,
                        constraints: size_of.constraints,
                        seconds: secs,
                    });
                }
            }
        }
    }
    let mut groups: BTreeMap<(CostStructure, usize, usize), Vec<&TimingRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.cost, r.surgeries, r.n)).or_default().push(r);
    }
    let summary = groups
        .into_iter()
        .map(|((cost, surgeries, n), rs)| {
            let t: Vec<f64> = rs.iter().map(|r| r.seconds).collect();
            TimingSummary {
                surgeries,
                n,
                cost,
                min: t.iter().copied().fold(f64::INFINITY, f64::min),
                avg: t.iter().sum::<f64>() / t.len() as f64,
                max: t.iter().copied().fold(0.0, f64::max),
                censored: rs.iter().filter(|r| r.censored).count(),
            }
        })
        .collect();
    Ok((rows, summary))
}

/// Tidy CSV of serializable rows.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CoreError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CoreError::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CoreError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
