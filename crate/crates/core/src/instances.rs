//! Instance generators: the reference study's surgical suite, scaled-down
//! variants, the block-allocation case, and small fixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Block, Instance, Surgery, SurgeryType};
use crate::error::CoreError;
use crate::ingest::{empirical_stats, scenario_rng, synthetic_duration_dataset, DurationDataset, PAPER_RECORD_COUNT};

pub const BLOCK_LENGTH: f64 = 480.0;
pub const OVERTIME_RATE: f64 = 26.0;

/// Seed of the synthetic duration records behind the default types.
pub const DATASET_SEED: u64 = 20_220_301;

/// Surgery count the full 32-block suite is sized for.
pub const REFERENCE_SURGERIES: usize = 60;

pub const DAYS: [&str; 5] = ["Mon", "Tue", "Wed", "Thu", "Fri"];

/// Weekly block schedule: one row per OR, one entry per weekday.
pub const PAPER_BLOCK_SCHEDULE: [[Option<&str>; 5]; 10] = [
    [Some("GASTRO"), Some("GASTRO"), Some("GASTRO"), None, None],
    [None, None, Some("GASTRO"), Some("GASTRO"), Some("GASTRO")],
    [Some("CARD"), None, Some("CARD"), None, Some("CARD")],
    [Some("ORTH"), Some("ORTH"), None, Some("ORTH"), Some("ORTH")],
    [None, Some("ORTH"), Some("MED"), None, None],
    [Some("GYN"), Some("GYN"), Some("GYN"), Some("GYN"), None],
    [None, Some("GYN"), Some("GYN"), Some("GYN"), Some("GYN")],
    [Some("URO"), Some("URO"), None, Some("URO"), Some("URO")],
    [Some("CARD"), None, Some("URO"), None, Some("CARD")],
    [Some("URO"), None, Some("ORTH"), None, None],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostStructure {
    /// Idle rate is two thirds of the overtime rate.
    Cost1,
    /// Idle time is free.
    Cost2,
}

impl CostStructure {
    /// `(overtime_rate, idle_rate)` per minute.
    pub fn rates(self) -> (f64, f64) {
        match self {
            CostStructure::Cost1 => (OVERTIME_RATE, OVERTIME_RATE / 1.5),
            CostStructure::Cost2 => (OVERTIME_RATE, 0.0),
        }
    }
}

/// Patient costs. A surgery of mean duration `mu` in a suite with overtime
/// rate `c_o` costs `factor * c_o * mu` to schedule and `kappa` times that to
/// postpone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientCosts {
    pub factor: f64,
    pub kappa: f64,
}

impl Default for PatientCosts {
    fn default() -> Self {
        Self { factor: 0.1, kappa: 5.0 }
    }
}

impl PatientCosts {
    pub fn costs(&self, overtime_rate: f64, mean_duration: f64) -> (f64, f64) {
        let c = self.factor * overtime_rate * mean_duration;
        (c, self.kappa * c)
    }
}

/// Emergency capacity support: `e_lo = 0`, `e_mean` = multiplier times the
/// specialty mean, `e_hi = min(L, 3 * e_mean)`.
pub fn emergency_support(length: f64, specialty_mean: f64, multiplier: f64) -> (f64, f64, f64) {
    let mean = (specialty_mean * multiplier).min(length);
    let hi = length.min(3.0 * mean);
    (0.0, mean, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub surgeries: usize,
    pub cost: CostStructure,
    pub patient_costs: PatientCosts,
    pub emergency_rate_mult: f64,
    /// Scale the block schedule to the surgery count instead of using all 32
    /// blocks.
    pub scaled_blocks: bool,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            surgeries: REFERENCE_SURGERIES,
            cost: CostStructure::Cost1,
            patient_costs: PatientCosts::default(),
            emergency_rate_mult: 1.0,
            scaled_blocks: false,
            seed: 1,
        }
    }
}

/// The six default surgery types, computed from the synthetic records.
pub fn paper_types() -> (Vec<SurgeryType>, DurationDataset) {
    let ds = synthetic_duration_dataset(DATASET_SEED, PAPER_RECORD_COUNT);
    let types = empirical_stats(&ds).expect("every synthetic class has records");
    (types, ds)
}

/// The 32 weekly blocks as `(or_room, day, specialty)`.
pub fn paper_block_slots() -> Vec<(String, &'static str, &'static str)> {
    let mut out = Vec::new();
    for (r, row) in PAPER_BLOCK_SCHEDULE.iter().enumerate() {
        for (d, cell) in row.iter().enumerate() {
            if let Some(s) = cell {
                out.push(((r + 1).to_string(), DAYS[d], *s));
            }
        }
    }
    out
}

/// Blocks kept for `surgeries`: each specialty keeps
/// `max(1, round(count * surgeries / 60))` of its slots, earliest first.
pub fn scaled_block_slots(surgeries: usize) -> Vec<(String, &'static str, &'static str)> {
    let slots = paper_block_slots();
    let scale = surgeries as f64 / REFERENCE_SURGERIES as f64;
    let mut keep = std::collections::BTreeMap::new();
    for (_, _, s) in &slots {
        *keep.entry(*s).or_insert(0usize) += 1;
    }
    for v in keep.values_mut() {
        *v = ((*v as f64 * scale).round() as usize).max(1);
    }
    slots
        .into_iter()
        .filter(|(_, _, s)| {
            let left = keep.get_mut(s).expect("counted above");
            if *left > 0 {
                *left -= 1;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Splits `n` by `weights` with the largest-remainder rule; ties go to the
/// earlier entry.
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        counts[k] += 1;
    }
    counts
}

/// Builds the suite instance and returns it with the records its types were
/// computed from.
pub fn paper_instance(cfg: &SuiteConfig) -> (Instance, DurationDataset) {
    let (types, ds) = paper_types();
    let inst = suite_from_types(&types, cfg);
    (inst, ds)
}

pub fn suite_from_types(types: &[SurgeryType], cfg: &SuiteConfig) -> Instance {
    let (c_o, c_g) = cfg.cost.rates();
    let slots = if cfg.scaled_blocks { scaled_block_slots(cfg.surgeries) } else { paper_block_slots() };
    let mean_of = |name: &str| types.iter().find(|t| t.name == name).map(|t| t.mean_duration);
    let blocks = slots
        .into_iter()
        .filter_map(|(room, day, spec)| mean_of(spec).map(|m| (room, day, spec, m)))
        .enumerate()
        .map(|(b, (room, day, spec, m))| {
            let (e_lo, e_mean, e_hi) = emergency_support(BLOCK_LENGTH, m, cfg.emergency_rate_mult);
            Block {
                id: b,
                or_room: room,
                day: day.to_string(),
                specialty: spec.to_string(),
                length: BLOCK_LENGTH,
                overtime_rate: c_o,
                idle_rate: c_g,
                open_cost: 0.0,
                e_lo,
                e_hi,
                e_mean,
            }
        })
        .collect();
    let counts = apportion(cfg.surgeries, &types.iter().map(|t| t.mix_fraction).collect::<Vec<_>>());
    let mut surgeries = Vec::with_capacity(cfg.surgeries);
    for (t, &k) in types.iter().zip(&counts) {
        let (sc, rc) = cfg.patient_costs.costs(c_o, t.mean_duration);
        for _ in 0..k {
            surgeries.push(Surgery {
                id: surgeries.len(),
                type_name: t.name.clone(),
                schedule_cost: sc,
                reject_cost: rc,
            });
        }
    }
    Instance { types: types.to_vec(), surgeries, blocks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    pub blocks: usize,
    pub surgeries: usize,
    pub open_cost: f64,
    pub overtime_rate: f64,
    pub idle_rate: f64,
    pub patient_costs: PatientCosts,
    pub specialty: String,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            blocks: 10,
            surgeries: 25,
            open_cost: 800.0,
            overtime_rate: 780.0,
            idle_rate: 0.0,
            patient_costs: PatientCosts::default(),
            specialty: "GASTRO".into(),
        }
    }
}

/// Single-specialty block-allocation case: identical blocks that may be
/// opened at a fixed cost.
pub fn allocation_instance(cfg: &AllocationConfig) -> Result<(Instance, DurationDataset), CoreError> {
    let (types, ds) = paper_types();
    let t = types
        .iter()
        .find(|t| t.name == cfg.specialty)
        .ok_or_else(|| CoreError::UnknownType(cfg.specialty.clone()))?
        .clone();
    let t = SurgeryType { mix_fraction: 1.0, ..t };
    let (e_lo, e_mean, e_hi) = emergency_support(BLOCK_LENGTH, t.mean_duration, 1.0);
    let blocks = (0..cfg.blocks)
        .map(|b| Block {
            id: b,
            or_room: (b + 1).to_string(),
            day: "Mon".into(),
            specialty: t.name.clone(),
            length: BLOCK_LENGTH,
            overtime_rate: cfg.overtime_rate,
            idle_rate: cfg.idle_rate,
            open_cost: cfg.open_cost,
            e_lo,
            e_hi,
            e_mean,
        })
        .collect();
    let (sc, rc) = cfg.patient_costs.costs(cfg.overtime_rate, t.mean_duration);
    let surgeries = (0..cfg.surgeries)
        .map(|i| Surgery { id: i, type_name: t.name.clone(), schedule_cost: sc, reject_cost: rc })
        .collect();
    Ok((Instance { types: vec![t], surgeries, blocks }, ds))
}

/// One surgery, one block: `L = 480`, `c_o = 26`, `c_g = 52/3`,
/// `d` in `[60, 240]`, `e` in `[0, 240]`, costs 100 and 500.
pub fn single_block() -> Instance {
    Instance {
        types: vec![SurgeryType {
            name: "GEN".into(),
            mean_duration: 120.0,
            sd_duration: 40.0,
            d_lo: 60.0,
            d_hi: 240.0,
            mix_fraction: 1.0,
        }],
        surgeries: vec![Surgery { id: 0, type_name: "GEN".into(), schedule_cost: 100.0, reject_cost: 500.0 }],
        blocks: vec![Block {
            id: 0,
            or_room: "1".into(),
            day: "Mon".into(),
            specialty: "GEN".into(),
            length: 480.0,
            overtime_rate: 26.0,
            idle_rate: 52.0 / 3.0,
            open_cost: 0.0,
            e_lo: 0.0,
            e_hi: 240.0,
            e_mean: 60.0,
        }],
    }
}

/// `types` specialties with `blocks` blocks spread over them round-robin and
/// one surgery per block.
pub fn minimal_instance(types: usize, blocks: usize) -> Instance {
    let base = single_block();
    let types_v: Vec<SurgeryType> = (0..types.max(1))
        .map(|k| SurgeryType {
            name: format!("T{k}"),
            mix_fraction: 1.0 / types.max(1) as f64,
            ..base.types[0].clone()
        })
        .collect();
    let blocks_v: Vec<Block> = (0..blocks)
        .map(|b| Block {
            id: b,
            or_room: (b + 1).to_string(),
            specialty: types_v[b % types_v.len()].name.clone(),
            ..base.blocks[0].clone()
        })
        .collect();
    let surgeries = (0..blocks.max(1))
        .map(|i| Surgery {
            id: i,
            type_name: types_v[i % types_v.len()].name.clone(),
            ..base.surgeries[0].clone()
        })
        .collect();
    Instance { types: types_v, surgeries, blocks: blocks_v }
}

/// Small random instance with integer-valued data, for oracle comparisons.
/// One or two types, `surgeries` surgeries, `blocks` blocks.
pub fn random_tiny_instance(seed: u64, surgeries: usize, blocks: usize) -> Instance {
    let mut rng = scenario_rng(seed, 0);
    let ntypes = if blocks >= 2 && rng.random_bool(0.5) { 2 } else { 1 };
    let types: Vec<SurgeryType> = (0..ntypes)
        .map(|k| {
            let lo = rng.random_range(10..=90) as f64;
            let hi = lo + rng.random_range(20..=200) as f64;
            let mean = rng.random_range(lo as i64..=hi as i64) as f64;
            SurgeryType {
                name: format!("T{k}"),
                mean_duration: mean,
                sd_duration: (hi - lo) / 4.0,
                d_lo: lo,
                d_hi: hi,
                mix_fraction: 1.0 / ntypes as f64,
            }
        })
        .collect();
    let surgeries_v = (0..surgeries)
        .map(|i| {
            let sc = rng.random_range(0..=300) as f64;
            Surgery {
                id: i,
                type_name: types[rng.random_range(0..ntypes)].name.clone(),
                schedule_cost: sc,
                reject_cost: sc + rng.random_range(1..=3000) as f64,
            }
        })
        .collect();
    let blocks_v = (0..blocks)
        .map(|b| {
            let length = rng.random_range(120..=480) as f64;
            let e_lo = rng.random_range(0..=30) as f64;
            let e_hi = e_lo + rng.random_range(0..=150) as f64;
            Block {
                id: b,
                or_room: (b + 1).to_string(),
                day: "Mon".into(),
                specialty: types[b % ntypes].name.clone(),
                length,
                overtime_rate: rng.random_range(1..=40) as f64,
                idle_rate: rng.random_range(0..=30) as f64,
                open_cost: rng.random_range(0..=500) as f64,
                e_lo,
                e_hi,
                e_mean: rng.random_range(e_lo as i64..=e_hi as i64) as f64,
            }
        })
        .collect();
    Instance { types, surgeries: surgeries_v, blocks: blocks_v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_instance;

    #[test]
    fn suite_has_32_blocks_over_10_rooms() {
        let slots = paper_block_slots();
        assert_eq!(slots.len(), 32);
        let rooms: std::collections::BTreeSet<_> = slots.iter().map(|s| s.0.clone()).collect();
        assert_eq!(rooms.len(), 10);
    }

    #[test]
    fn scaled_schedule_keeps_every_specialty() {
        let slots = scaled_block_slots(10);
        let specs: std::collections::BTreeSet<_> = slots.iter().map(|s| s.2).collect();
        assert_eq!(specs.len(), 6);
        assert_eq!(slots.len(), 6);
        assert_eq!(scaled_block_slots(60).len(), 32);
    }

    #[test]
    fn apportion_sums_to_n() {
        for n in [0, 1, 7, 10, 60, 80] {
            let c = apportion(n, &[14.01, 17.79, 27.81, 4.41, 17.81, 17.98]);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
        assert_eq!(apportion(10, &[1.0, 1.0]), vec![5, 5]);
    }

    #[test]
    fn generated_instances_validate() {
        let (inst, _) = paper_instance(&SuiteConfig::default());
        assert_eq!(validate_instance(&inst), vec![]);
        assert_eq!(inst.num_surgeries(), 60);
        let (inst, _) = allocation_instance(&AllocationConfig::default()).unwrap();
        assert_eq!(validate_instance(&inst), vec![]);
        for seed in 0..20 {
            assert_eq!(validate_instance(&random_tiny_instance(seed, 4, 2)), vec![]);
        }
        assert_eq!(validate_instance(&minimal_instance(1, 1)), vec![]);
    }

    #[test]
    fn doubled_emergency_rate_keeps_mean_in_support() {
        let (lo, mean, hi) = emergency_support(480.0, 142.0, 2.0);
        assert!(lo <= mean && mean <= hi);
        assert_eq!(hi, 480.0);
    }
}
