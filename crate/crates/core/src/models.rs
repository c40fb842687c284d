//! Model builders (SAA, Wasserstein DRO, moment DRO, block allocation) and
//! decoding of solver output.
//!
//! Builders are generic over the scalar. Instance data is converted with
//! [`Scalar::from_f64_lossy`], which is exact for rationals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use surgdro_milp::{Backend, MilpModel, MilpSolution, RowSense, Scalar, SolveParams, SolveStatus, VarId};

use crate::domain::{Instance, Schedule, Target};
use crate::error::CoreError;
use crate::ingest::ScenarioSet;
use crate::recourse::first_stage_cost;

/// Integrality slack tolerated when decoding binaries.
pub const DECODE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Saa,
    Wdro,
    Mdro,
    Wdsba,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Saa => "saa",
            ModelKind::Wdro => "wdro",
            ModelKind::Mdro => "mdro",
            ModelKind::Wdsba => "wdsba",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "saa" => Ok(ModelKind::Saa),
            "wdro" => Ok(ModelKind::Wdro),
            "mdro" => Ok(ModelKind::Mdro),
            "wdsba" => Ok(ModelKind::Wdsba),
            other => Err(CoreError::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdroConfig {
    /// Radius of the ℓ1 Wasserstein ball, in minutes.
    pub epsilon: f64,
    /// Upper bound on the dual variable; defaults to [`safe_rho_upper`].
    pub rho_upper: Option<f64>,
}

impl WdroConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, rho_upper: None }
    }
}

/// Largest cost rate over all blocks. Beyond it every corner row is dominated
/// by a sample row, so larger dual values cannot help.
pub fn safe_rho_upper(inst: &Instance) -> f64 {
    inst.blocks.iter().map(|k| k.overtime_rate.max(k.idle_rate)).fold(0.0, f64::max)
}

/// Means for the moment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentInfo {
    pub mu_d: Vec<f64>,
    pub mu_e: Vec<f64>,
}

impl MomentInfo {
    /// Type means for durations and `e_mean` for emergency capacity.
    pub fn from_instance(inst: &Instance) -> Result<Self, CoreError> {
        let mu_d = (0..inst.num_surgeries())
            .map(|i| inst.surgery_type(i).map(|t| t.mean_duration))
            .collect::<Result<_, _>>()?;
        Ok(Self { mu_d, mu_e: inst.blocks.iter().map(|k| k.e_mean).collect() })
    }
}

/// Bound on the moment model's dual variables.
pub fn mdro_rho_bound(inst: &Instance) -> f64 {
    let o = inst.blocks.iter().map(|k| k.overtime_rate).fold(0.0, f64::max);
    let g = inst.blocks.iter().map(|k| k.idle_rate).fold(0.0, f64::max);
    o + g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    Lo,
    Sample,
    Hi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dual {
    /// `beta = c_o`.
    Overtime,
    /// `beta = -c_g`.
    Idle,
}

/// Which candidate a cut row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutKind {
    pub d: Level,
    pub e: Level,
    pub beta: Dual,
}

/// The ten candidates of block `b`, in row order: the eight corners
/// `{hi, lo} x {hi, lo} x {c_o, -c_g}` followed by the sample with each dual
/// extreme.
pub const CUT_KINDS: [CutKind; 10] = {
    use Dual::*;
    use Level::*;
    [
        CutKind { d: Hi, e: Hi, beta: Overtime },
        CutKind { d: Hi, e: Lo, beta: Overtime },
        CutKind { d: Hi, e: Hi, beta: Idle },
        CutKind { d: Hi, e: Lo, beta: Idle },
        CutKind { d: Lo, e: Hi, beta: Overtime },
        CutKind { d: Lo, e: Lo, beta: Overtime },
        CutKind { d: Lo, e: Hi, beta: Idle },
        CutKind { d: Lo, e: Lo, beta: Idle },
        CutKind { d: Sample, e: Sample, beta: Overtime },
        CutKind { d: Sample, e: Sample, beta: Idle },
    ]
};

/// Affine lower bound on `eta_b^n`:
/// `sum_i y_coef[i] y_ib + sum_i pi_coef[i] pi_ib + rho_coef rho + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRow<S> {
    pub kind: CutKind,
    /// Per compatible surgery.
    pub y: Vec<(usize, S)>,
    pub pi: Vec<(usize, S)>,
    pub rho: S,
    pub constant: S,
}

impl<S: Scalar> CutRow<S> {
    /// Row value at a fixed schedule and dual value, with `pi = rho * y`.
    pub fn evaluate(&self, sched: &Schedule, b: usize, rho: &S) -> S {
        let on = |i: usize| sched.assignment[i] == Target::Block(b);
        let mut v = self.constant.clone() + self.rho.clone() * rho.clone();
        for (i, c) in &self.y {
            if on(*i) {
                v = v + c.clone();
            }
        }
        for (i, c) in &self.pi {
            if on(*i) {
                v = v + c.clone() * rho.clone();
            }
        }
        v
    }
}

fn cvt<S: Scalar>(v: f64) -> S {
    S::from_f64_lossy(v)
}

/// The ten rows bounding `eta_b^n` from below.
pub fn eta_cut_rows<S: Scalar>(
    inst: &Instance,
    scen: &ScenarioSet,
    n: usize,
    b: usize,
) -> Result<Vec<CutRow<S>>, CoreError> {
    let s = scen
        .scenarios
        .get(n)
        .ok_or_else(|| CoreError::Shape(format!("no scenario {n}")))?;
    let k = inst
        .blocks
        .get(b)
        .ok_or_else(|| CoreError::Shape(format!("no block {b}")))?;
    let surg = inst.compatible_surgeries(b);
    let mut supports = Vec::with_capacity(surg.len());
    for &i in &surg {
        supports.push(inst.d_support(i)?);
    }
    let pick = |lvl: Level, lo: f64, hat: f64, hi: f64| match lvl {
        Level::Lo => lo,
        Level::Sample => hat,
        Level::Hi => hi,
    };
    let e_hat = cvt::<S>(s.e[b]);
    let len = cvt::<S>(k.length);
    Ok(CUT_KINDS
        .iter()
        .map(|kind| {
            let beta = match kind.beta {
                Dual::Overtime => cvt::<S>(k.overtime_rate),
                Dual::Idle => -cvt::<S>(k.idle_rate),
            };
            let mut y = Vec::with_capacity(surg.len());
            let mut pi = Vec::new();
            for (&i, &(lo, hi)) in surg.iter().zip(&supports) {
                let d_hat = cvt::<S>(s.d[i]);
                let d = cvt::<S>(pick(kind.d, lo, s.d[i], hi));
                y.push((i, beta.clone() * d.clone()));
                if kind.d != Level::Sample {
                    pi.push((i, -(d - d_hat).abs()));
                }
            }
            let e = cvt::<S>(pick(kind.e, k.e_lo, s.e[b], k.e_hi));
            let rho = if kind.e == Level::Sample { S::zero() } else { -(e.clone() - e_hat.clone()).abs() };
            let constant = beta.clone() * e - beta * len.clone();
            CutRow { kind: *kind, y, pi, rho, constant }
        })
        .collect())
}

/// Variable ids of the shared assignment layer.
struct Assign {
    /// Per surgery: `(block, y_ib)` for each compatible block.
    y: Vec<Vec<(usize, VarId)>>,
    x: Option<Vec<VarId>>,
    objective: Vec<(VarId, f64)>,
}

impl Assign {
    fn y_of(&self, i: usize, b: usize) -> Option<VarId> {
        self.y[i].iter().find(|(bb, _)| *bb == b).map(|(_, v)| *v)
    }
}

pub fn y_name(i: usize, b: usize) -> String {
    format!("y_{i}_{b}")
}

pub fn reject_name(i: usize) -> String {
    format!("r_{i}")
}

pub fn open_name(b: usize) -> String {
    format!("x_{b}")
}

fn add_assignment<S: Scalar>(m: &mut MilpModel<S>, inst: &Instance, with_open: bool) -> Result<Assign, CoreError> {
    let mut y = Vec::with_capacity(inst.num_surgeries());
    let mut objective = Vec::new();
    let mut rows = Vec::new();
    for (i, s) in inst.surgeries.iter().enumerate() {
        let mut row = Vec::new();
        let mut terms = Vec::new();
        for b in inst.compatible_blocks(i) {
            let v = m.add_binary(y_name(i, b))?;
            row.push((b, v));
            terms.push((v, S::one()));
            objective.push((v, s.schedule_cost));
        }
        let r = m.add_binary(reject_name(i))?;
        terms.push((r, S::one()));
        objective.push((r, s.reject_cost));
        rows.push(terms);
        y.push(row);
    }
    for (i, terms) in rows.into_iter().enumerate() {
        m.add_constraint(format!("assign_{i}"), terms, RowSense::Eq, S::one())?;
    }
    let x = if with_open {
        let mut xs = Vec::with_capacity(inst.num_blocks());
        for (b, k) in inst.blocks.iter().enumerate() {
            let v = m.add_binary(open_name(b))?;
            objective.push((v, k.open_cost));
            xs.push(v);
        }
        for (i, row) in y.iter().enumerate() {
            for &(b, v) in row {
                m.add_constraint(format!("link_{i}_{b}"), [(v, S::one()), (xs[b], -S::one())], RowSense::Le, S::zero())?;
            }
        }
        Some(xs)
    } else {
        None
    };
    Ok(Assign { y, x, objective })
}

fn check_scenarios(inst: &Instance, scen: &ScenarioSet) -> Result<(), CoreError> {
    if scen.is_empty() {
        return Err(CoreError::Config("empty scenario set".into()));
    }
    for s in &scen.scenarios {
        crate::domain::check_scenario(inst, s)?;
    }
    Ok(())
}

fn finish_objective<S: Scalar>(m: &mut MilpModel<S>, assign: &Assign, extra: Vec<(VarId, S)>) -> Result<(), CoreError> {
    let mut terms: Vec<(VarId, S)> = assign.objective.iter().map(|(v, c)| (*v, cvt::<S>(*c))).collect();
    terms.extend(extra);
    m.set_objective(terms, S::zero())?;
    Ok(())
}

/// Scenario-average model with explicit overtime and idle variables.
pub fn build_saa<S: Scalar>(inst: &Instance, scen: &ScenarioSet) -> Result<MilpModel<S>, CoreError> {
    check_scenarios(inst, scen)?;
    let mut m = MilpModel::new("saa");
    let assign = add_assignment::<S>(&mut m, inst, false)?;
    let inv_n = S::one() / cvt::<S>(scen.len() as f64);
    let mut extra = Vec::new();
    for (b, k) in inst.blocks.iter().enumerate() {
        let surg = inst.compatible_surgeries(b);
        for (n, s) in scen.scenarios.iter().enumerate() {
            let o = m.add_continuous(format!("o_{b}_{n}"), Some(S::zero()), None)?;
            let g = m.add_continuous(format!("g_{b}_{n}"), Some(S::zero()), None)?;
            let mut terms = vec![(o, S::one()), (g, -S::one())];
            for &i in &surg {
                terms.push((assign.y_of(i, b).expect("compatible"), -cvt::<S>(s.d[i])));
            }
            m.add_constraint(format!("bal_{b}_{n}"), terms, RowSense::Eq, cvt::<S>(s.e[b]) - cvt::<S>(k.length))?;
            extra.push((o, inv_n.clone() * cvt::<S>(k.overtime_rate)));
            extra.push((g, inv_n.clone() * cvt::<S>(k.idle_rate)));
        }
    }
    finish_objective(&mut m, &assign, extra)?;
    Ok(m)
}

fn wdro_common<S: Scalar>(
    inst: &Instance,
    cfg: &WdroConfig,
    scen: &ScenarioSet,
    allocation: bool,
) -> Result<MilpModel<S>, CoreError> {
    check_scenarios(inst, scen)?;
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(CoreError::Config(format!("epsilon must be finite and nonnegative, got {}", cfg.epsilon)));
    }
    let safe = safe_rho_upper(inst);
    let rho_up = cfg.rho_upper.unwrap_or(safe);
    if !(rho_up >= safe) || !rho_up.is_finite() {
        return Err(CoreError::Config(format!("rho_upper {rho_up} is below the safe bound {safe}")));
    }
    let rho_up = cvt::<S>(rho_up);

    let mut m = MilpModel::new(if allocation { "wdsba" } else { "wdro" });
    let assign = add_assignment::<S>(&mut m, inst, allocation)?;
    let rho = m.add_continuous("rho", Some(S::zero()), Some(rho_up.clone()))?;

    // pi_ib = rho * y_ib
    let mut pi = vec![Vec::new(); inst.num_surgeries()];
    for (i, row) in assign.y.iter().enumerate() {
        for &(b, y) in row {
            let p = m.add_continuous(format!("pi_{i}_{b}"), Some(S::zero()), Some(rho_up.clone()))?;
            pi[i].push((b, p));
            mccormick(&mut m, &format!("{i}_{b}"), p, rho, y, &rho_up)?;
        }
    }
    let pi_of = |i: usize, b: usize| pi[i].iter().find(|(bb, _)| *bb == b).map(|(_, v)| *v).expect("compatible");

    // tau_b = rho * x_b
    let tau: Option<Vec<VarId>> = match &assign.x {
        Some(xs) => {
            let mut t = Vec::with_capacity(xs.len());
            for (b, &x) in xs.iter().enumerate() {
                let v = m.add_continuous(format!("tau_{b}"), Some(S::zero()), Some(rho_up.clone()))?;
                mccormick(&mut m, &format!("x{b}"), v, rho, x, &rho_up)?;
                t.push(v);
            }
            Some(t)
        }
        None => None,
    };

    let inv_n = S::one() / cvt::<S>(scen.len() as f64);
    let mut extra = vec![(rho, cvt::<S>(cfg.epsilon))];
    for n in 0..scen.len() {
        for b in 0..inst.num_blocks() {
            let eta = m.add_continuous(format!("eta_{n}_{b}"), None, None)?;
            extra.push((eta, inv_n.clone()));
            for (k, row) in eta_cut_rows::<S>(inst, scen, n, b)?.into_iter().enumerate() {
                // eta - y·a - pi·p - rho·r (- constant·x) >= constant (or 0)
                let mut terms = vec![(eta, S::one())];
                for (i, c) in row.y {
                    terms.push((assign.y_of(i, b).expect("compatible"), -c));
                }
                for (i, c) in row.pi {
                    terms.push((pi_of(i, b), -c));
                }
                let rhs = match (&assign.x, &tau) {
                    (Some(xs), Some(ts)) => {
                        terms.push((ts[b], -row.rho));
                        terms.push((xs[b], -row.constant));
                        S::zero()
                    }
                    _ => {
                        terms.push((rho, -row.rho));
                        row.constant
                    }
                };
                m.add_constraint(format!("cut_{n}_{b}_{}", k + 1), terms, RowSense::Ge, rhs)?;
            }
        }
    }
    finish_objective(&mut m, &assign, extra)?;
    Ok(m)
}

/// The four envelope rows of `w = rho * z` for `rho` in `[0, up]` and binary
/// `z`.
fn mccormick<S: Scalar>(m: &mut MilpModel<S>, tag: &str, w: VarId, rho: VarId, z: VarId, up: &S) -> Result<(), CoreError> {
    let one = S::one;
    m.add_constraint(format!("mc1_{tag}"), [(w, one())], RowSense::Ge, S::zero())?;
    m.add_constraint(format!("mc2_{tag}"), [(w, one()), (rho, -one()), (z, -up.clone())], RowSense::Ge, -up.clone())?;
    m.add_constraint(format!("mc3_{tag}"), [(w, one()), (z, -up.clone())], RowSense::Le, S::zero())?;
    m.add_constraint(format!("mc4_{tag}"), [(w, one()), (rho, -one())], RowSense::Le, S::zero())?;
    Ok(())
}

/// Wasserstein model over `scen`.
pub fn build_wdro<S: Scalar>(inst: &Instance, scen: &ScenarioSet, cfg: &WdroConfig) -> Result<MilpModel<S>, CoreError> {
    wdro_common(inst, cfg, scen, false)
}

/// Wasserstein model with block opening decisions.
pub fn build_wdsba<S: Scalar>(inst: &Instance, scen: &ScenarioSet, cfg: &WdroConfig) -> Result<MilpModel<S>, CoreError> {
    wdro_common(inst, cfg, scen, true)
}

/// Mean-support model: eight corner rows per block with dual variables per
/// surgery (`rhoi_i`) and block (`alpha_b`).
pub fn build_mdro<S: Scalar>(inst: &Instance, mom: &MomentInfo) -> Result<MilpModel<S>, CoreError> {
    if mom.mu_d.len() != inst.num_surgeries() || mom.mu_e.len() != inst.num_blocks() {
        return Err(CoreError::Shape("moment vectors do not match the instance".into()));
    }
    for (i, &mu) in mom.mu_d.iter().enumerate() {
        let (lo, hi) = inst.d_support(i)?;
        if !(lo <= mu && mu <= hi) {
            return Err(CoreError::Config(format!("mean of surgery {i} outside its support")));
        }
    }
    for (b, k) in inst.blocks.iter().enumerate() {
        if !(k.e_lo <= mom.mu_e[b] && mom.mu_e[b] <= k.e_hi) {
            return Err(CoreError::Config(format!("emergency mean of block {b} outside its support")));
        }
    }
    let bound = cvt::<S>(mdro_rho_bound(inst));
    let (lo_b, hi_b) = (-bound.clone(), bound.clone());

    let mut m = MilpModel::new("mdro");
    let assign = add_assignment::<S>(&mut m, inst, false)?;
    let rho: Vec<VarId> = (0..inst.num_surgeries())
        .map(|i| m.add_continuous(format!("rhoi_{i}"), Some(lo_b.clone()), Some(hi_b.clone())))
        .collect::<Result<_, _>>()?;
    let alpha: Vec<VarId> = (0..inst.num_blocks())
        .map(|b| m.add_continuous(format!("alpha_{b}"), Some(lo_b.clone()), Some(hi_b.clone())))
        .collect::<Result<_, _>>()?;
    let mut extra = Vec::new();
    let mut kvar = vec![Vec::new(); inst.num_surgeries()];
    for (i, row) in assign.y.iter().enumerate() {
        for &(b, y) in row {
            let k = m.add_continuous(format!("k_{i}_{b}"), Some(lo_b.clone()), Some(hi_b.clone()))?;
            let one = S::one;
            // k >= lo y ; k >= hi (y - 1) + rho ; k <= hi y ; k <= lo (y - 1) + rho
            m.add_constraint(format!("mk1_{i}_{b}"), [(k, one()), (y, -lo_b.clone())], RowSense::Ge, S::zero())?;
            m.add_constraint(format!("mk2_{i}_{b}"), [(k, one()), (y, -hi_b.clone()), (rho[i], -one())], RowSense::Ge, -hi_b.clone())?;
            m.add_constraint(format!("mk3_{i}_{b}"), [(k, one()), (y, -hi_b.clone())], RowSense::Le, S::zero())?;
            m.add_constraint(format!("mk4_{i}_{b}"), [(k, one()), (y, -lo_b.clone()), (rho[i], -one())], RowSense::Le, -lo_b.clone())?;
            extra.push((k, cvt::<S>(mom.mu_d[i])));
            kvar[i].push((b, k));
        }
    }
    for (b, k) in inst.blocks.iter().enumerate() {
        extra.push((alpha[b], cvt::<S>(mom.mu_e[b])));
        let eta = m.add_continuous(format!("eta_{b}"), None, None)?;
        extra.push((eta, S::one()));
        let surg = inst.compatible_surgeries(b);
        for (c, kind) in CUT_KINDS[..8].iter().enumerate() {
            let beta = match kind.beta {
                Dual::Overtime => cvt::<S>(k.overtime_rate),
                Dual::Idle => -cvt::<S>(k.idle_rate),
            };
            let e = cvt::<S>(if kind.e == Level::Hi { k.e_hi } else { k.e_lo });
            // eta - sum beta d y + sum d k + e alpha >= beta (e - L)
            let mut terms = vec![(eta, S::one()), (alpha[b], e.clone())];
            for &i in &surg {
                let (lo, hi) = inst.d_support(i)?;
                let d = cvt::<S>(if kind.d == Level::Hi { hi } else { lo });
                let y = assign.y_of(i, b).expect("compatible");
                let kv = kvar[i].iter().find(|(bb, _)| *bb == b).expect("compatible").1;
                terms.push((y, -(beta.clone() * d.clone())));
                terms.push((kv, d));
            }
            m.add_constraint(format!("corner_{b}_{}", c + 1), terms, RowSense::Ge, beta * (e - cvt::<S>(k.length)))?;
        }
    }
    finish_objective(&mut m, &assign, extra)?;
    Ok(m)
}

/// Dual variables of scheduled surgeries sitting at their bounds in a moment
/// model solution. A nonempty list suggests the bounds are too tight.
pub fn mdro_active_bounds(inst: &Instance, model: &MilpModel<f64>, sol: &MilpSolution<f64>, sched: &Schedule) -> Vec<String> {
    let bound = mdro_rho_bound(inst);
    let mut out = Vec::new();
    for (i, t) in sched.assignment.iter().enumerate() {
        if t.block().is_some() {
            if let Some(v) = sol.value(model, &format!("rhoi_{i}")) {
                if (v.abs() - bound).abs() <= 1e-6 * (1.0 + bound) {
                    out.push(format!("rhoi_{i}"));
                }
            }
        }
    }
    out
}

fn near_binary(name: &str, v: f64) -> Result<bool, CoreError> {
    if (v - v.round()).abs() > DECODE_TOL || !(v.round() == 0.0 || v.round() == 1.0) {
        return Err(CoreError::Fractional { name: name.to_string(), value: v });
    }
    Ok(v >= 0.5)
}

/// Decodes the assignment (and open blocks, when present) from a solution of
/// any builder here, then checks it against the instance and the objective's
/// first-stage part.
pub fn extract_schedule<S: Scalar>(inst: &Instance, model: &MilpModel<S>, sol: &MilpSolution<S>) -> Result<Schedule, CoreError> {
    if !sol.has_values() {
        return Err(CoreError::NotSolved(sol.status));
    }
    let val = |name: &str| -> Option<f64> { sol.value(model, name).map(|v| v.to_f64_lossy()) };
    let mut assignment = Vec::with_capacity(inst.num_surgeries());
    let mut first = 0.0;
    for (i, s) in inst.surgeries.iter().enumerate() {
        let mut chosen = Vec::new();
        for b in inst.compatible_blocks(i) {
            let name = y_name(i, b);
            let v = val(&name).ok_or_else(|| CoreError::Shape(format!("model lacks {name}")))?;
            first += s.schedule_cost * v;
            if near_binary(&name, v)? {
                chosen.push(Target::Block(b));
            }
        }
        let name = reject_name(i);
        let v = val(&name).ok_or_else(|| CoreError::Shape(format!("model lacks {name}")))?;
        first += s.reject_cost * v;
        if near_binary(&name, v)? {
            chosen.push(Target::Reject);
        }
        match chosen.as_slice() {
            [t] => assignment.push(*t),
            _ => return Err(CoreError::Infeasible(format!("surgery {i} has {} targets", chosen.len()))),
        }
    }
    let mut open_blocks = None;
    if model.var(&open_name(0)).is_some() || (inst.num_blocks() == 0 && model.name == "wdsba") {
        let mut open = BTreeSet::new();
        for (b, k) in inst.blocks.iter().enumerate() {
            let name = open_name(b);
            let v = val(&name).ok_or_else(|| CoreError::Shape(format!("model lacks {name}")))?;
            first += k.open_cost * v;
            if near_binary(&name, v)? {
                open.insert(b);
            }
        }
        open_blocks = Some(open);
    }
    let sched = Schedule { assignment, open_blocks };
    sched.check(inst)?;
    let recomputed = first_stage_cost(inst, &sched)?;
    if (recomputed - first).abs() > 1e-6 * (1.0 + first.abs()) {
        return Err(CoreError::Infeasible(format!(
            "first-stage cost {recomputed} differs from the solution's {first}"
        )));
    }
    Ok(sched)
}

/// Split of an optimal objective into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub first_stage: f64,
    /// `epsilon * rho` for the Wasserstein models.
    pub radius_term: f64,
    /// Scenario-averaged recourse (or, for the moment model, the dual terms).
    pub recourse_term: f64,
    pub total: f64,
}

/// Full-size statistics of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSize {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
}

impl ModelSize {
    pub fn of<S: Scalar>(m: &MilpModel<S>) -> Self {
        Self { variables: m.num_vars(), binaries: m.num_binaries(), constraints: m.num_constraints() }
    }
}

/// Everything the CLI and the studies need from one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solved {
    pub kind: ModelKind,
    pub status: SolveStatus,
    pub schedule: Schedule,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
    pub gap: f64,
    pub runtime: f64,
    pub size: ModelSize,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// What to build.
#[derive(Debug, Clone)]
pub enum ModelSpec<'a> {
    Saa(&'a ScenarioSet),
    Wdro(&'a ScenarioSet, WdroConfig),
    Mdro(MomentInfo),
    Wdsba(&'a ScenarioSet, WdroConfig),
}

impl ModelSpec<'_> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Saa(_) => ModelKind::Saa,
            ModelSpec::Wdro(..) => ModelKind::Wdro,
            ModelSpec::Mdro(_) => ModelKind::Mdro,
            ModelSpec::Wdsba(..) => ModelKind::Wdsba,
        }
    }
}

pub fn build<S: Scalar>(inst: &Instance, spec: &ModelSpec) -> Result<MilpModel<S>, CoreError> {
    match spec {
        ModelSpec::Saa(s) => build_saa(inst, s),
        ModelSpec::Wdro(s, c) => build_wdro(inst, s, c),
        ModelSpec::Mdro(m) => build_mdro(inst, m),
        ModelSpec::Wdsba(s, c) => build_wdsba(inst, s, c),
    }
}

/// Builds, solves and decodes. A solve that ends without an incumbent is an
/// error.
pub fn solve_model(
    inst: &Instance,
    spec: &ModelSpec,
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<Solved, CoreError> {
    let model = build::<f64>(inst, spec)?;
    let sol = backend.solve(&model, params)?;
    if !sol.has_values() {
        return Err(CoreError::NotSolved(sol.status));
    }
    let schedule = extract_schedule(inst, &model, &sol)?;
    let first_stage = first_stage_cost(inst, &schedule)?;
    let radius_term = match spec {
        ModelSpec::Wdro(_, c) | ModelSpec::Wdsba(_, c) => c.epsilon * sol.value(&model, "rho").unwrap_or(0.0),
        _ => 0.0,
    };
    let breakdown = ObjectiveBreakdown {
        first_stage,
        radius_term,
        recourse_term: sol.objective - first_stage - radius_term,
        total: sol.objective,
    };
    let mut warnings = Vec::new();
    if matches!(spec, ModelSpec::Mdro(_)) {
        let active = mdro_active_bounds(inst, &model, &sol, &schedule);
        if !active.is_empty() {
            warnings.push(format!("dual bounds active at optimum: {}", active.join(", ")));
        }
    }
    Ok(Solved {
        kind: spec.kind(),
        status: sol.status,
        schedule,
        objective: sol.objective,
        breakdown,
        gap: sol.gap,
        runtime: sol.runtime,
        size: ModelSize::of(&model),
        warnings,
    })
}

/// Dedicated-OR variant: blocks in `reserved_rooms` are dropped from the
/// elective pool and the remaining blocks carry no emergency load.
pub fn dedicated_instance(inst: &Instance, reserved_rooms: &[String]) -> Result<Instance, CoreError> {
    let rooms: BTreeSet<&str> = inst.blocks.iter().map(|k| k.or_room.as_str()).collect();
    if rooms.iter().all(|r| reserved_rooms.iter().any(|x| x == r)) {
        return Err(CoreError::Config("reserved rooms cover every OR".into()));
    }
    let mut out = inst.clone();
    out.blocks = inst
        .blocks
        .iter()
        .filter(|k| !reserved_rooms.iter().any(|r| *r == k.or_room))
        .enumerate()
        .map(|(b, k)| {
            let mut k = k.clone();
            k.id = b;
            k.e_lo = 0.0;
            k.e_hi = 0.0;
            k.e_mean = 0.0;
            k
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Scenario;
    use crate::instances::single_block;

    fn one(d: f64, e: f64) -> ScenarioSet {
        ScenarioSet::new(vec![Scenario { d: vec![d], e: vec![e] }], "test")
    }

    #[test]
    fn cut_row_worked_coefficients() {
        let rows = eta_cut_rows::<f64>(&single_block(), &one(120.0, 60.0), 0, 0).unwrap();
        assert_eq!(rows.len(), 10);
        let c9 = &rows[8];
        assert_eq!(c9.y, vec![(0, 3120.0)]);
        assert!((c9.constant + 10920.0).abs() < 1e-9);
        assert!(c9.pi.is_empty());
        assert_eq!(c9.rho, 0.0);
        let c1 = &rows[0];
        assert_eq!(c1.y, vec![(0, 6240.0)]);
        assert_eq!(c1.pi, vec![(0, -120.0)]);
        assert_eq!(c1.rho, -180.0);
        assert!((c1.constant + 6240.0).abs() < 1e-9);
    }

    #[test]
    fn corner_sample_has_no_deviation_terms() {
        let rows = eta_cut_rows::<f64>(&single_block(), &one(240.0, 240.0), 0, 0).unwrap();
        assert_eq!(rows[0].pi, vec![(0, 0.0)]);
        assert_eq!(rows[0].rho, 0.0);
    }

    #[test]
    fn wdro_sizes() {
        let inst = crate::instances::random_tiny_instance(5, 4, 2);
        let scen = ScenarioSet::new(
            vec![Scenario { d: inst.types.iter().cycle().take(4).map(|_| 0.0).collect(), e: vec![0.0; 2] }; 3],
            "t",
        );
        let scen = ScenarioSet {
            scenarios: scen
                .scenarios
                .iter()
                .map(|_| Scenario {
                    d: (0..4).map(|i| inst.d_support(i).unwrap().0).collect(),
                    e: inst.blocks.iter().map(|k| k.e_lo).collect(),
                })
                .collect(),
            ..scen
        };
        let m = build_wdro::<f64>(&inst, &scen, &WdroConfig::new(1.0)).unwrap();
        assert_eq!(m.num_binaries(), inst.num_compatible_pairs() + 4);
        assert_eq!(m.variables.iter().filter(|v| v.name.starts_with("eta_")).count(), 3 * 2);
        assert_eq!(m.constraints.iter().filter(|c| c.name.starts_with("cut_")).count(), 10 * 3 * 2);
    }

    #[test]
    fn rho_upper_below_safe_bound_is_rejected() {
        let cfg = WdroConfig { epsilon: 1.0, rho_upper: Some(1.0) };
        assert!(build_wdro::<f64>(&single_block(), &one(120.0, 60.0), &cfg).is_err());
    }

    #[test]
    fn decoding_thresholds() {
        let inst = single_block();
        let m = build_saa::<f64>(&inst, &one(120.0, 60.0)).unwrap();
        let mut sol = MilpSolution {
            status: SolveStatus::Optimal,
            objective: 0.0,
            values: vec![0.0; m.num_vars()],
            gap: 0.0,
            runtime: 0.0,
            nodes: 0,
        };
        let y = m.var("y_0_0").unwrap().0;
        let r = m.var("r_0").unwrap().0;
        sol.values[y] = 1.0;
        assert_eq!(extract_schedule(&inst, &m, &sol).unwrap().assignment, vec![Target::Block(0)]);
        sol.values[y] = 0.0;
        sol.values[r] = 1.0;
        assert_eq!(extract_schedule(&inst, &m, &sol).unwrap().assignment, vec![Target::Reject]);
        sol.values[y] = 0.4999;
        sol.values[r] = 0.5001;
        assert!(matches!(extract_schedule(&inst, &m, &sol), Err(CoreError::Fractional { .. })));
    }

    #[test]
    fn dedicated_policy_drops_rooms_and_emergencies() {
        let (inst, _) = crate::instances::paper_instance(&Default::default());
        let d = dedicated_instance(&inst, &["9".into(), "10".into()]).unwrap();
        assert_eq!(d.num_blocks(), 32 - 5);
        assert!(d.blocks.iter().all(|k| k.e_hi == 0.0));
        let all: Vec<String> = (1..=10).map(|r| r.to_string()).collect();
        assert!(dedicated_instance(&inst, &all).is_err());
    }
}
