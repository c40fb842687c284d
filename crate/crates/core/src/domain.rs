//! Instance data: surgery types, surgeries, blocks, scenarios and schedules.
//!
//! Times are minutes and money is dollars throughout.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

/// Tolerance on the sum of mix fractions.
pub const MIX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryType {
    pub name: String,
    pub mean_duration: f64,
    pub sd_duration: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub mix_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surgery {
    pub id: usize,
    #[serde(rename = "type")]
    pub type_name: String,
    /// Cost of scheduling in any compatible block.
    pub schedule_cost: f64,
    /// Cost of postponing.
    pub reject_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: usize,
    pub or_room: String,
    pub day: String,
    pub specialty: String,
    pub length: f64,
    pub overtime_rate: f64,
    pub idle_rate: f64,
    #[serde(default)]
    pub open_cost: f64,
    pub e_lo: f64,
    pub e_hi: f64,
    pub e_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Instance {
    pub types: Vec<SurgeryType>,
    pub surgeries: Vec<Surgery>,
    pub blocks: Vec<Block>,
}

impl Instance {
    pub fn num_surgeries(&self) -> usize {
        self.surgeries.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn type_by_name(&self, name: &str) -> Option<&SurgeryType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn surgery_type(&self, i: usize) -> Result<&SurgeryType, CoreError> {
        let s = &self.surgeries[i];
        self.type_by_name(&s.type_name)
            .ok_or_else(|| CoreError::UnknownType(s.type_name.clone()))
    }

    /// `(i, b)` is compatible when the surgery type equals the block specialty.
    pub fn compatible(&self, i: usize, b: usize) -> bool {
        self.surgeries[i].type_name == self.blocks[b].specialty
    }

    pub fn compatible_blocks(&self, i: usize) -> Vec<usize> {
        (0..self.blocks.len()).filter(|&b| self.compatible(i, b)).collect()
    }

    pub fn compatible_surgeries(&self, b: usize) -> Vec<usize> {
        (0..self.surgeries.len()).filter(|&i| self.compatible(i, b)).collect()
    }

    /// Number of compatible `(i, b)` pairs.
    pub fn num_compatible_pairs(&self) -> usize {
        (0..self.surgeries.len()).map(|i| self.compatible_blocks(i).len()).sum()
    }

    /// Duration support `[d_lo, d_hi]` of surgery `i`.
    pub fn d_support(&self, i: usize) -> Result<(f64, f64), CoreError> {
        let t = self.surgery_type(i)?;
        Ok((t.d_lo, t.d_hi))
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One joint realization of durations and emergency capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Indexed by surgery.
    pub d: Vec<f64>,
    /// Indexed by block.
    pub e: Vec<f64>,
}

/// Where a surgery goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Block(usize),
    Reject,
}

impl Target {
    pub fn block(self) -> Option<usize> {
        match self {
            Target::Block(b) => Some(b),
            Target::Reject => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Block(b) => write!(f, "{b}"),
            Target::Reject => f.write_str("REJECT"),
        }
    }
}

impl Serialize for Target {
    fn serialize<Se: Serializer>(&self, s: Se) -> Result<Se::Ok, Se::Error> {
        match self {
            Target::Block(b) => s.serialize_u64(*b as u64),
            Target::Reject => s.serialize_str("REJECT"),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(b) => Ok(Target::Block(b)),
            Raw::Word(w) if w.eq_ignore_ascii_case("reject") => Ok(Target::Reject),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("unknown target `{w}`"))),
        }
    }
}

/// First-stage decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Indexed by surgery.
    pub assignment: Vec<Target>,
    /// Open blocks; present only for block-allocation solutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_blocks: Option<BTreeSet<usize>>,
}

impl Schedule {
    pub fn new(assignment: Vec<Target>) -> Self {
        Self { assignment, open_blocks: None }
    }

    pub fn all_rejected(n: usize) -> Self {
        Self::new(vec![Target::Reject; n])
    }

    pub fn scheduled_count(&self) -> usize {
        self.assignment.iter().filter(|t| matches!(t, Target::Block(_))).count()
    }

    pub fn rejected_count(&self) -> usize {
        self.assignment.len() - self.scheduled_count()
    }

    pub fn is_open(&self, b: usize) -> bool {
        self.open_blocks.as_ref().is_none_or(|o| o.contains(&b))
    }

    /// Surgeries assigned to `b`.
    pub fn in_block(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t == Target::Block(b))
            .map(|(i, _)| i)
    }

    /// Checks the assignment and open-block structure against `inst`.
    pub fn check(&self, inst: &Instance) -> Result<(), CoreError> {
        if self.assignment.len() != inst.num_surgeries() {
            return Err(CoreError::Infeasible(format!(
                "schedule has {} entries for {} surgeries",
                self.assignment.len(),
                inst.num_surgeries()
            )));
        }
        if let Some(open) = &self.open_blocks {
            if let Some(b) = open.iter().find(|&&b| b >= inst.num_blocks()) {
                return Err(CoreError::Infeasible(format!("open block {b} does not exist")));
            }
        }
        for (i, t) in self.assignment.iter().enumerate() {
            if let Target::Block(b) = *t {
                if b >= inst.num_blocks() || !inst.compatible(i, b) {
                    return Err(CoreError::Incompatible { surgery: i, block: b });
                }
                if !self.is_open(b) {
                    return Err(CoreError::Infeasible(format!(
                        "surgery {i} assigned to closed block {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Load and canonical overtime/idle of one block in one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub load: f64,
    pub overtime: f64,
    pub idle: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Every broken data invariant of `inst`. Empty means valid.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: &str| out.push(Violation { entity, rule: rule.to_string() });

    let mut names = BTreeSet::new();
    for t in &inst.types {
        let who = format!("type {}", t.name);
        if !names.insert(t.name.as_str()) {
            push(who.clone(), "duplicate type name");
        }
        let vals = [t.mean_duration, t.sd_duration, t.d_lo, t.d_hi, t.mix_fraction];
        if vals.iter().any(|v| !v.is_finite()) {
            push(who, "all numbers must be finite");
            continue;
        }
        if !(0.0 <= t.d_lo && t.d_lo <= t.mean_duration && t.mean_duration <= t.d_hi) {
            push(who.clone(), "requires 0 <= d_lo <= mean_duration <= d_hi");
        }
        if t.sd_duration < 0.0 {
            push(who.clone(), "sd_duration must be nonnegative");
        }
        if !(0.0..=1.0).contains(&t.mix_fraction) {
            push(who, "mix_fraction must lie in [0, 1]");
        }
    }
    if !inst.types.is_empty() {
        let total: f64 = inst.types.iter().map(|t| t.mix_fraction).sum();
        if (total - 1.0).abs() > MIX_TOL {
            push("types".into(), "mix fractions must sum to 1");
        }
    }

    for (i, s) in inst.surgeries.iter().enumerate() {
        let who = format!("surgery {i}");
        if s.id != i {
            push(who.clone(), "id must equal its position");
        }
        if inst.type_by_name(&s.type_name).is_none() {
            push(who.clone(), "references an unknown type");
        }
        if !(s.schedule_cost.is_finite() && s.reject_cost.is_finite()) {
            push(who, "costs must be finite");
        } else if s.reject_cost <= s.schedule_cost {
            push(who, "reject_cost must exceed schedule_cost");
        }
    }

    for (b, k) in inst.blocks.iter().enumerate() {
        let who = format!("block {b}");
        if k.id != b {
            push(who.clone(), "id must equal its position");
        }
        if inst.type_by_name(&k.specialty).is_none() {
            push(who.clone(), "references an unknown specialty");
        }
        let vals = [k.length, k.overtime_rate, k.idle_rate, k.open_cost, k.e_lo, k.e_hi, k.e_mean];
        if vals.iter().any(|v| !v.is_finite()) {
            push(who, "all numbers must be finite");
            continue;
        }
        if k.length <= 0.0 {
            push(who.clone(), "length must be positive");
        }
        if k.overtime_rate < 0.0 {
            push(who.clone(), "overtime_rate must be nonnegative");
        }
        if k.idle_rate < 0.0 {
            push(who.clone(), "idle_rate must be nonnegative");
        }
        if k.open_cost < 0.0 {
            push(who.clone(), "open_cost must be nonnegative");
        }
        if k.e_lo > k.e_hi {
            push(who, "e_lo exceeds e_hi");
        } else if !(0.0 <= k.e_lo && k.e_lo <= k.e_mean && k.e_mean <= k.e_hi) {
            push(who, "requires 0 <= e_lo <= e_mean <= e_hi");
        }
    }
    out
}

/// Surgeries with no compatible block. They are valid data but can only be
/// rejected.
pub fn forced_rejections(inst: &Instance) -> Vec<usize> {
    (0..inst.num_surgeries()).filter(|&i| inst.compatible_blocks(i).is_empty()).collect()
}

/// Checks that `scen` matches the instance dimensions and supports.
pub fn check_scenario(inst: &Instance, scen: &Scenario) -> Result<(), CoreError> {
    if scen.d.len() != inst.num_surgeries() || scen.e.len() != inst.num_blocks() {
        return Err(CoreError::Shape(format!(
            "scenario has {} durations and {} emergency values for {} surgeries and {} blocks",
            scen.d.len(),
            scen.e.len(),
            inst.num_surgeries(),
            inst.num_blocks()
        )));
    }
    for (i, &d) in scen.d.iter().enumerate() {
        let (lo, hi) = inst.d_support(i)?;
        if !(lo - SUPPORT_TOL..=hi + SUPPORT_TOL).contains(&d) {
            return Err(CoreError::OutOfSupport(format!("d[{i}] = {d} outside [{lo}, {hi}]")));
        }
    }
    for (b, &e) in scen.e.iter().enumerate() {
        let k = &inst.blocks[b];
        if !(k.e_lo - SUPPORT_TOL..=k.e_hi + SUPPORT_TOL).contains(&e) {
            return Err(CoreError::OutOfSupport(format!(
                "e[{b}] = {e} outside [{}, {}]",
                k.e_lo, k.e_hi
            )));
        }
    }
    Ok(())
}

/// Slack allowed when checking that values read from text lie in a support.
pub const SUPPORT_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Instance {
        crate::instances::single_block()
    }

    #[test]
    fn valid_instance_has_no_violations() {
        assert_eq!(validate_instance(&tiny()), vec![]);
    }

    #[test]
    fn equal_costs_violate_strictness() {
        let mut inst = tiny();
        inst.surgeries[0].reject_cost = 100.0;
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "reject_cost must exceed schedule_cost");
    }

    #[test]
    fn inverted_emergency_bounds_name_the_block() {
        let mut inst = tiny();
        inst.blocks[0].e_lo = 300.0;
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].entity, "block 0");
    }

    #[test]
    fn target_json_uses_reject_sentinel() {
        let s = Schedule::new(vec![Target::Block(3), Target::Reject]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"assignment":[3,"REJECT"]}"#);
        assert_eq!(Schedule::from_json(&text).unwrap(), s);
    }

    #[test]
    fn instance_json_uses_spec_field_names() {
        let text = tiny().to_json();
        assert!(text.contains("\"type\": \"GEN\""));
        assert!(text.contains("\"e_mean\""));
        assert_eq!(Instance::from_json(&text).unwrap(), tiny());
    }
}
