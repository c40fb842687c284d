//! Dense two-phase tableau simplex, generic over [`Scalar`].
//!
//! Sized for the reference solver's test corpus (a few hundred rows), not for
//! production models. Pricing is Dantzig's rule with a switch to Bland's rule
//! after a run of degenerate pivots, which guarantees termination under exact
//! arithmetic.

use crate::model::{MilpModel, RowSense};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpOutcome<S> {
    pub status: LpStatus,
    /// Objective including the model constant; meaningful only when optimal.
    pub objective: S,
    pub values: Vec<S>,
    pub pivots: usize,
}

const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 40;

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone)]
enum ColMap<S> {
    Fixed(S),
    Shift { col: usize, lower: S },
    Mirror { col: usize, upper: S },
    Split { pos: usize, neg: usize },
}

/// Solves the continuous relaxation of `model`.
pub fn solve_lp<S: Scalar>(model: &MilpModel<S>) -> LpOutcome<S> {
    let bounds: Vec<_> = model
        .variables
        .iter()
        .map(|v| (v.lower.clone(), v.upper.clone()))
        .collect();
    solve_lp_with_bounds(model, &bounds)
}

/// Solves the continuous relaxation of `model` with per-variable bounds
/// replaced by `bounds`.
pub fn solve_lp_with_bounds<S: Scalar>(
    model: &MilpModel<S>,
    bounds: &[(Option<S>, Option<S>)],
) -> LpOutcome<S> {
    let n_orig = model.num_vars();
    assert_eq!(bounds.len(), n_orig, "one bound pair per variable");

    let infeasible = || LpOutcome {
        status: LpStatus::Infeasible,
        objective: S::zero(),
        values: vec![S::zero(); n_orig],
        pivots: 0,
    };

    // Column mapping.
    let mut maps = Vec::with_capacity(n_orig);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, S)> = Vec::new();
    for (lower, upper) in bounds {
        let m = match (lower, upper) {
            (Some(l), Some(u)) if l > u => return infeasible(),
            (Some(l), Some(u)) if l == u => ColMap::Fixed(l.clone()),
            (Some(l), u) => {
                let col = ncols;
                ncols += 1;
                if let Some(u) = u {
                    bound_rows.push((col, u.clone() - l.clone()));
                }
                ColMap::Shift { col, lower: l.clone() }
            }
            (None, Some(u)) => {
                let col = ncols;
                ncols += 1;
                ColMap::Mirror { col, upper: u.clone() }
            }
            (None, None) => {
                let pos = ncols;
                ncols += 2;
                ColMap::Split { pos, neg: pos + 1 }
            }
        };
        maps.push(m);
    }
    let n_struct = ncols;

    // Structural rows as dense vectors.
    let mut rows: Vec<(Vec<S>, RowSense, S)> = Vec::new();
    for c in &model.constraints {
        let mut a = vec![S::zero(); n_struct];
        let mut rhs = c.rhs.clone();
        for (v, coef) in &c.terms {
            match &maps[v.0] {
                ColMap::Fixed(x) => rhs = rhs - coef.clone() * x.clone(),
                ColMap::Shift { col, lower } => {
                    a[*col] = a[*col].clone() + coef.clone();
                    rhs = rhs - coef.clone() * lower.clone();
                }
                ColMap::Mirror { col, upper } => {
                    a[*col] = a[*col].clone() - coef.clone();
                    rhs = rhs - coef.clone() * upper.clone();
                }
                ColMap::Split { pos, neg } => {
                    a[*pos] = a[*pos].clone() + coef.clone();
                    a[*neg] = a[*neg].clone() - coef.clone();
                }
            }
        }
        if a.iter().all(|x| x.is_near_zero()) {
            // Row reduced to a constant test.
            let ok = match c.sense {
                RowSense::Le => rhs >= -S::zero_tol(),
                RowSense::Ge => rhs <= S::zero_tol(),
                RowSense::Eq => rhs.is_near_zero(),
            };
            if !ok {
                return infeasible();
            }
            continue;
        }
        rows.push((a, c.sense, rhs));
    }
    for (col, width) in bound_rows {
        let mut a = vec![S::zero(); n_struct];
        a[col] = S::one();
        rows.push((a, RowSense::Le, width));
    }

    // Objective over structural columns.
    let mut cost = vec![S::zero(); n_struct];
    let mut offset = model.objective.constant.clone();
    for (v, coef) in &model.objective.terms {
        match &maps[v.0] {
            ColMap::Fixed(x) => offset = offset + coef.clone() * x.clone(),
            ColMap::Shift { col, lower } => {
                cost[*col] = cost[*col].clone() + coef.clone();
                offset = offset + coef.clone() * lower.clone();
            }
            ColMap::Mirror { col, upper } => {
                cost[*col] = cost[*col].clone() - coef.clone();
                offset = offset + coef.clone() * upper.clone();
            }
            ColMap::Split { pos, neg } => {
                cost[*pos] = cost[*pos].clone() + coef.clone();
                cost[*neg] = cost[*neg].clone() - coef.clone();
            }
        }
    }

    let mut tab = Tableau::build(rows, n_struct);
    let outcome = tab.run(&cost);
    let pivots = tab.pivots;
    match outcome {
        LpStatus::Optimal => {}
        status => {
            return LpOutcome { status, objective: S::zero(), values: vec![S::zero(); n_orig], pivots }
        }
    }

    let col_values = tab.primal(n_struct);
    let values: Vec<S> = maps
        .iter()
        .map(|m| match m {
            ColMap::Fixed(x) => x.clone(),
            ColMap::Shift { col, lower } => lower.clone() + col_values[*col].clone(),
            ColMap::Mirror { col, upper } => upper.clone() - col_values[*col].clone(),
            ColMap::Split { pos, neg } => col_values[*pos].clone() - col_values[*neg].clone(),
        })
        .collect();
    let objective = model.objective_value(&values);
    LpOutcome { status: LpStatus::Optimal, objective, values, pivots }
}

struct Tableau<S> {
    /// `m` rows of `ncols + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<S>>,
    basis: Vec<usize>,
    ncols: usize,
    artificial_start: usize,
    pivots: usize,
}

impl<S: Scalar> Tableau<S> {
    fn build(rows: Vec<(Vec<S>, RowSense, S)>, n_struct: usize) -> Self {
        let m = rows.len();
        let n_slack = rows.iter().filter(|(_, s, _)| *s != RowSense::Eq).count();
        let mut n_art = 0;
        for (_, sense, rhs) in &rows {
            let flipped = *rhs < S::zero();
            let effective = match (sense, flipped) {
                (RowSense::Le, false) | (RowSense::Ge, true) => RowSense::Le,
                (RowSense::Ge, false) | (RowSense::Le, true) => RowSense::Ge,
                (RowSense::Eq, _) => RowSense::Eq,
            };
            if effective != RowSense::Le {
                n_art += 1;
            }
        }
        let artificial_start = n_struct + n_slack;
        let ncols = artificial_start + n_art;
        let mut t = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n_struct;
        let mut art = artificial_start;
        for (a, sense, rhs) in rows {
            let flip = rhs < S::zero();
            let mut row = vec![S::zero(); ncols + 1];
            for (j, v) in a.into_iter().enumerate() {
                row[j] = if flip { -v } else { v };
            }
            row[ncols] = if flip { -rhs } else { rhs };
            let effective = match (sense, flip) {
                (RowSense::Le, false) | (RowSense::Ge, true) => RowSense::Le,
                (RowSense::Ge, false) | (RowSense::Le, true) => RowSense::Ge,
                (RowSense::Eq, _) => RowSense::Eq,
            };
            match effective {
                RowSense::Le => {
                    row[slack] = S::one();
                    basis.push(slack);
                    slack += 1;
                }
                RowSense::Ge => {
                    row[slack] = -S::one();
                    slack += 1;
                    row[art] = S::one();
                    basis.push(art);
                    art += 1;
                }
                RowSense::Eq => {
                    row[art] = S::one();
                    basis.push(art);
                    art += 1;
                }
            }
            t.push(row);
        }
        Tableau { t, basis, ncols, artificial_start, pivots: 0 }
    }

    fn run(&mut self, cost: &[S]) -> LpStatus {
        // Phase 1.
        if self.artificial_start < self.ncols {
            let mut c1 = vec![S::zero(); self.ncols];
            for c in c1.iter_mut().skip(self.artificial_start) {
                *c = S::one();
            }
            match self.optimize(&c1, self.ncols) {
                LpStatus::Optimal => {}
                LpStatus::Unbounded => unreachable!("phase one is bounded below by zero"),
                other => return other,
            }
            let infeas = self
                .basis
                .iter()
                .zip(&self.t)
                .filter(|(b, _)| **b >= self.artificial_start)
                .fold(S::zero(), |acc, (_, row)| acc + row[self.ncols].clone());
            let scale = self
                .t
                .iter()
                .fold(S::one(), |acc, r| S::max_of(acc, r[self.ncols].abs()));
            if infeas > S::zero_tol() * scale * S::from_f64_lossy(100.0) {
                return LpStatus::Infeasible;
            }
            self.evict_artificials();
        }
        let mut c2 = vec![S::zero(); self.ncols];
        for (j, c) in cost.iter().enumerate() {
            c2[j] = c.clone();
        }
        self.optimize(&c2, self.artificial_start)
    }

    /// Pivots basic artificials out at zero level; drops redundant rows.
    fn evict_artificials(&mut self) {
        let mut r = 0;
        while r < self.t.len() {
            if self.basis[r] >= self.artificial_start {
                let entering = (0..self.artificial_start)
                    .filter(|&j| self.t[r][j].abs() > S::zero_tol())
                    .max_by(|&a, &b| {
                        self.t[r][a]
                            .abs()
                            .partial_cmp(&self.t[r][b].abs())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                match entering {
                    Some(j) => self.pivot(r, j),
                    None => {
                        self.t.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    /// Minimizes `cost` over columns `< allowed`.
    fn optimize(&mut self, cost: &[S], allowed: usize) -> LpStatus {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return LpStatus::IterationLimit;
            }
            let reduced = self.reduced_costs(cost, allowed);
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let neg_tol = -S::zero_tol();
            let entering = if bland {
                (0..allowed).find(|&j| reduced[j] < neg_tol)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..allowed {
                    if reduced[j] < neg_tol && best.is_none_or(|b| reduced[j] < reduced[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(j) = entering else { return LpStatus::Optimal };

            // Ratio test; ties to the smallest basic index.
            let mut leave: Option<(usize, S)> = None;
            for (r, row) in self.t.iter().enumerate() {
                let a = &row[j];
                if *a > S::zero_tol() {
                    let ratio = row[self.ncols].clone() / a.clone();
                    let better = match &leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < *lratio
                                || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return LpStatus::Unbounded };
            if ratio.is_near_zero() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, j);
        }
    }

    fn reduced_costs(&self, cost: &[S], allowed: usize) -> Vec<S> {
        let mut d: Vec<S> = cost[..allowed].to_vec();
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = &cost[b];
            if num_traits::Zero::is_zero(cb) {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(row.iter()) {
                *dj = dj.clone() - cb.clone() * a.clone();
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        self.pivots += 1;
        let p = self.t[r][j].clone();
        for v in self.t[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j].clone();
            if num_traits::Zero::is_zero(&f) {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&prow) {
                if !num_traits::Zero::is_zero(pv) {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            row[j] = S::zero();
        }
        self.basis[r] = j;
    }

    fn primal(&self, n_struct: usize) -> Vec<S> {
        let mut x = vec![S::zero(); n_struct];
        for (row, &b) in self.t.iter().zip(&self.basis) {
            if b < n_struct {
                // Clamp float noise below zero.
                x[b] = S::max_of(row[self.ncols].clone(), S::zero());
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use num_traits::FromPrimitive;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn textbook_lp() {
        // max x + 2y + z s.t. 3x + y <= 6, y + 2z <= 7 -> x=0, y=6, z=0.5, value 12.5
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", Some(0.0), None).unwrap();
        let y = m.add_continuous("y", Some(0.0), None).unwrap();
        let z = m.add_continuous("z", Some(0.0), None).unwrap();
        m.add_constraint("c1", [(x, 3.0), (y, 1.0)], RowSense::Le, 6.0).unwrap();
        m.add_constraint("c2", [(y, 1.0), (z, 2.0)], RowSense::Le, 7.0).unwrap();
        m.set_objective([(x, -1.0), (y, -2.0), (z, -1.0)], 0.0).unwrap();
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 12.5).abs() < 1e-9);
        assert!((out.values[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn exact_rational_solution() {
        // min x + y s.t. 3x + y >= 2, x + 3y >= 2 -> x = y = 1/2, value 1
        let mut m = MilpModel::<Rational>::new("t");
        let x = m.add_continuous("x", Some(q(0, 1)), None).unwrap();
        let y = m.add_continuous("y", Some(q(0, 1)), None).unwrap();
        m.add_constraint("a", [(x, q(3, 1)), (y, q(1, 1))], RowSense::Ge, q(2, 1)).unwrap();
        m.add_constraint("b", [(x, q(1, 1)), (y, q(3, 1))], RowSense::Ge, q(2, 1)).unwrap();
        m.set_objective([(x, q(1, 1)), (y, q(1, 1))], q(0, 1)).unwrap();
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective, q(1, 1));
        assert_eq!(out.values, vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min -x + z, x <= 4 (no lower), z free, z >= x - 10 -> x = 4, z = -6, value -10
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", None, Some(4.0)).unwrap();
        let z = m.add_continuous("z", None, None).unwrap();
        m.add_constraint("c", [(z, 1.0), (x, -1.0)], RowSense::Ge, -10.0).unwrap();
        m.set_objective([(x, -1.0), (z, 1.0)], 0.0).unwrap();
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 10.0).abs() < 1e-9, "{}", out.objective);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", Some(0.0), Some(1.0)).unwrap();
        m.add_constraint("c", [(x, 1.0)], RowSense::Ge, 2.0).unwrap();
        assert_eq!(solve_lp(&m).status, LpStatus::Infeasible);

        let mut m = MilpModel::<f64>::new("t");
        let x = m.add_continuous("x", Some(0.0), None).unwrap();
        m.set_objective([(x, -1.0)], 0.0).unwrap();
        assert_eq!(solve_lp(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_constant() {
        let mut m = MilpModel::<Rational>::new("t");
        let x = m.add_continuous("x", Some(q(0, 1)), None).unwrap();
        let y = m.add_continuous("y", Some(q(0, 1)), None).unwrap();
        m.add_constraint("e", [(x, q(1, 1)), (y, q(1, 1))], RowSense::Eq, q(3, 1)).unwrap();
        m.add_constraint("dup", [(x, q(2, 1)), (y, q(2, 1))], RowSense::Eq, q(6, 1)).unwrap();
        m.set_objective([(x, q(2, 1)), (y, q(1, 1))], Rational::from_i64(7).unwrap()).unwrap();
        let out = solve_lp(&m);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective, q(10, 1));
    }
}
