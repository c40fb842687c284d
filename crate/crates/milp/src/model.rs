//! Solver-agnostic mixed-integer linear program.
//!
//! Every model is a minimization. Variables are continuous or binary, bounds
//! are optional on either side (`None` means unbounded), and constraints are
//! single-sided linear rows.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<S> {
    pub name: String,
    pub lower: Option<S>,
    pub upper: Option<S>,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub name: String,
    pub terms: Vec<(VarId, S)>,
    pub sense: RowSense,
    pub rhs: S,
}

impl<S: Scalar> Constraint<S> {
    pub fn activity(&self, values: &[S]) -> S {
        self.terms
            .iter()
            .fold(S::zero(), |acc, (v, c)| acc + c.clone() * values[v.0].clone())
    }

    /// Amount by which `values` violates this row; zero when satisfied.
    pub fn violation(&self, values: &[S]) -> S {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => S::max_of(lhs - self.rhs.clone(), S::zero()),
            RowSense::Ge => S::max_of(self.rhs.clone() - lhs, S::zero()),
            RowSense::Eq => (lhs - self.rhs.clone()).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective<S> {
    pub terms: Vec<(VarId, S)>,
    pub constant: S,
}

#[derive(Debug, Clone)]
pub struct MilpModel<S> {
    pub name: String,
    pub variables: Vec<Variable<S>>,
    pub constraints: Vec<Constraint<S>>,
    pub objective: Objective<S>,
    index: HashMap<String, VarId>,
}

impl<S: PartialEq> PartialEq for MilpModel<S> {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
    }
}

impl<S: Scalar> MilpModel<S> {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { terms: Vec::new(), constant: S::zero() },
            index: HashMap::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<S>,
        upper: Option<S>,
        kind: VarKind,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if self.index.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if let (Some(l), Some(u)) = (&lower, &upper) {
            if l > u {
                return Err(ModelError::InvertedBounds(name));
            }
        }
        let id = VarId(self.variables.len());
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, lower, upper, kind });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_var(name, Some(S::zero()), Some(S::one()), VarKind::Binary)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: Option<S>,
        upper: Option<S>,
    ) -> Result<VarId, ModelError> {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    /// Adds a row. Repeated references to one variable are merged and zero
    /// coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, S)>,
        sense: RowSense,
        rhs: S,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        let terms = self.normalize_terms(terms)?;
        self.constraints.push(Constraint { name, terms, sense, rhs });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, S)>,
        constant: S,
    ) -> Result<(), ModelError> {
        self.objective = Objective { terms: self.normalize_terms(terms)?, constant };
        Ok(())
    }

    fn normalize_terms(
        &self,
        terms: impl IntoIterator<Item = (VarId, S)>,
    ) -> Result<Vec<(VarId, S)>, ModelError> {
        let mut out: Vec<(VarId, S)> = Vec::new();
        let mut slot: HashMap<VarId, usize> = HashMap::new();
        for (v, c) in terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable(v.0));
            }
            match slot.get(&v) {
                Some(&k) => out[k].1 = out[k].1.clone() + c,
                None => {
                    slot.insert(v, out.len());
                    out.push((v, c));
                }
            }
        }
        out.retain(|(_, c)| !num_traits::Zero::is_zero(c));
        Ok(out)
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn variable(&self, id: VarId) -> &Variable<S> {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn objective_value(&self, values: &[S]) -> S {
        self.objective
            .terms
            .iter()
            .fold(self.objective.constant.clone(), |acc, (v, c)| {
                acc + c.clone() * values[v.0].clone()
            })
    }

    /// Structural checks: unique names, terms referencing declared variables,
    /// finite `[0, 1]` bounds on binaries.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.index.len() != self.variables.len() {
            return Err(ModelError::Malformed("name index out of sync".into()));
        }
        for v in &self.variables {
            if v.kind == VarKind::Binary {
                let ok = matches!((&v.lower, &v.upper), (Some(l), Some(u))
                    if *l >= S::zero() && *u <= S::one() && l <= u);
                if !ok {
                    return Err(ModelError::BinaryBounds(v.name.clone()));
                }
            }
        }
        let n = self.variables.len();
        let check = |terms: &[(VarId, S)]| terms.iter().all(|(v, _)| v.0 < n);
        if !check(&self.objective.terms) {
            return Err(ModelError::Malformed("objective references undeclared variable".into()));
        }
        for c in &self.constraints {
            if !check(&c.terms) {
                return Err(ModelError::Malformed(format!(
                    "row {} references undeclared variable",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Largest bound, row or integrality violation of `values`, with the
    /// offending item's name.
    pub fn max_violation(&self, values: &[S]) -> (S, Option<String>) {
        let mut worst = S::zero();
        let mut who = None;
        let mut bump = |amount: S, name: &str| {
            if amount > worst {
                worst = amount;
                who = Some(name.to_string());
            }
        };
        for (v, x) in self.variables.iter().zip(values) {
            if let Some(l) = &v.lower {
                bump(l.clone() - x.clone(), &v.name);
            }
            if let Some(u) = &v.upper {
                bump(x.clone() - u.clone(), &v.name);
            }
            if v.kind == VarKind::Binary {
                bump(crate::scalar::fractionality(x), &v.name);
            }
        }
        for c in &self.constraints {
            bump(c.violation(values), &c.name);
        }
        (worst, who)
    }

    /// Copy of the model with every coefficient mapped through `f`.
    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> MilpModel<T> {
        let terms = |ts: &[(VarId, S)]| ts.iter().map(|(v, c)| (*v, f(c))).collect::<Vec<_>>();
        MilpModel {
            name: self.name.clone(),
            variables: self
                .variables
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    lower: v.lower.as_ref().map(&f),
                    upper: v.upper.as_ref().map(&f),
                    kind: v.kind,
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    name: c.name.clone(),
                    terms: terms(&c.terms),
                    sense: c.sense,
                    rhs: f(&c.rhs),
                })
                .collect(),
            objective: Objective {
                terms: terms(&self.objective.terms),
                constant: f(&self.objective.constant),
            },
            index: self.index.clone(),
        }
    }

    /// Same model with one variable's bounds replaced.
    pub fn with_bounds(&self, id: VarId, lower: Option<S>, upper: Option<S>) -> Self {
        let mut m = self.clone();
        m.variables[id.0].lower = lower;
        m.variables[id.0].upper = upper;
        m
    }

    /// The continuous relaxation.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

/// LP-file compatible identifier: starts with a letter, then letters, digits
/// or `_ . # $ ( ) ,`-free subset that every common reader accepts.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    name.len() <= 255 && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_and_invalid_names_rejected() {
        let mut m = MilpModel::<f64>::new("t");
        m.add_binary("y_1").unwrap();
        assert!(matches!(m.add_binary("y_1"), Err(ModelError::DuplicateName(_))));
        assert!(matches!(m.add_binary("1y"), Err(ModelError::InvalidName(_))));
        assert!(matches!(m.add_binary("y[1]"), Err(ModelError::InvalidName(_))));
    }

    #[test]
    fn terms_are_merged_and_zeros_dropped() {
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", Some(0.0), None).unwrap();
        let y = m.add_continuous("y", Some(0.0), None).unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 2.0), (x, 2.0), (y, -2.0)], RowSense::Le, 4.0)
            .unwrap();
        assert_eq!(m.constraints[0].terms, vec![(x, 3.0)]);
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut m = MilpModel::<f64>::new("t");
        let r = m.add_constraint("c", [(VarId(3), 1.0)], RowSense::Le, 0.0);
        assert!(matches!(r, Err(ModelError::UnknownVariable(3))));
    }

    #[test]
    fn violation_reports_offender() {
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", Some(0.0), Some(10.0)).unwrap();
        let b = m.add_binary("b").unwrap();
        m.add_constraint("cap", [(x, 1.0), (b, 5.0)], RowSense::Le, 6.0).unwrap();
        let (v, who) = m.max_violation(&[3.0, 1.0]);
        assert_eq!(v, 2.0);
        assert_eq!(who.as_deref(), Some("cap"));
        let (v, who) = m.max_violation(&[0.0, 0.4]);
        assert!((v - 0.4).abs() < 1e-12);
        assert_eq!(who.as_deref(), Some("b"));
    }

    #[test]
    fn binary_bounds_validated() {
        let mut m = MilpModel::<f64>::new("t");
        m.add_var("z", Some(0.0), Some(2.0), VarKind::Binary).unwrap();
        assert!(matches!(m.validate(), Err(ModelError::BinaryBounds(_))));
    }
}
