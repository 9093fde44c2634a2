//! Dense two-phase simplex.
//!
//! All variables are nonnegative. Constraints are `coeffs . x <= bound` and
//! `coeffs . x == value`. Pivoting follows Bland's rule (lowest-index
//! entering column, ratio ties broken by lowest-index basic variable), so the
//! solver cannot cycle and the returned vertex depends only on the input.

use crate::error::{invalid_input, Error, Result};

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    num_vars: usize,
    inequalities: Vec<Constraint>,
    equalities: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    fn check(&self, coeffs: &[f64], rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(invalid_input(format!(
                "constraint has {} coefficients, system has {} variables",
                coeffs.len(),
                self.num_vars
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid_input("constraint has a non-finite entry"));
        }
        Ok(())
    }

    /// Adds `coeffs . x <= bound`.
    pub fn add_inequality(&mut self, coeffs: Vec<f64>, bound: f64) -> Result<()> {
        self.check(&coeffs, bound)?;
        self.inequalities.push(Constraint { coeffs, rhs: bound });
        Ok(())
    }

    /// Adds `coeffs . x == value`.
    pub fn add_equality(&mut self, coeffs: Vec<f64>, value: f64) -> Result<()> {
        self.check(&coeffs, value)?;
        self.equalities.push(Constraint { coeffs, rhs: value });
        Ok(())
    }

    /// Largest violation of any constraint (including nonnegativity) at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |c: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut worst = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        for c in &self.inequalities {
            worst = worst.max(dot(&c.coeffs) - c.rhs);
        }
        for c in &self.equalities {
            worst = worst.max((dot(&c.coeffs) - c.rhs).abs());
        }
        worst
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.num_vars && self.max_violation(x) <= tol
    }

    /// The same constraints embedded in a larger variable space; the
    /// original variables keep their positions and new ones get zero
    /// coefficients.
    pub fn widened(&self, num_vars: usize) -> Self {
        assert!(num_vars >= self.num_vars);
        let pad = |c: &Constraint| {
            let mut coeffs = c.coeffs.clone();
            coeffs.resize(num_vars, 0.0);
            Constraint { coeffs, rhs: c.rhs }
        };
        Self {
            num_vars,
            inequalities: self.inequalities.iter().map(pad).collect(),
            equalities: self.equalities.iter().map(pad).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs; the last entry holds minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    num_cols: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.num_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Sets the reduced-cost row for minimizing `c . x` under the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let mut cost = c.to_vec();
        cost.resize(self.num_cols + 1, 0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (v, rv) in cost.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * rv;
                }
            }
        }
        self.cost = cost;
    }

    /// Runs Bland's-rule simplex with entering columns restricted to
    /// `0..allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<Phase> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| self.cost[j] < -OPTIMALITY_TOL);
            let Some(c) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][c];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[r] < self.basis[best] {
                            Some((r, ratio))
                        } else {
                            Some((best, br))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(Phase::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::Internal("simplex exceeded its pivot limit".into()))
    }
}

/// Optimizes `objective . x` over `system` with `x >= 0`.
///
/// Infeasibility and unboundedness are outcomes, not errors; an error is
/// returned only for malformed input.
pub fn lp_solve(objective: &[f64], direction: Direction, system: &LinearSystem) -> Result<LpOutcome> {
    let n = system.num_vars;
    if objective.len() != n {
        return Err(invalid_input(format!(
            "objective has {} coefficients, system has {} variables",
            objective.len(),
            n
        )));
    }
    let num_ineq = system.inequalities.len();
    let num_rows = num_ineq + system.equalities.len();

    // Columns: original | slacks | artificials.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(num_rows);
    let mut needs_artificial = Vec::with_capacity(num_rows);
    for (i, c) in system.inequalities.iter().enumerate() {
        let mut row = c.coeffs.clone();
        row.resize(n + num_ineq, 0.0);
        row[n + i] = 1.0;
        let mut rhs = c.rhs;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        needs_artificial.push(c.rhs < 0.0);
        row.push(rhs);
        rows.push(row);
    }
    for c in &system.equalities {
        let mut row = c.coeffs.clone();
        row.resize(n + num_ineq, 0.0);
        let mut rhs = c.rhs;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        needs_artificial.push(true);
        row.push(rhs);
        rows.push(row);
    }
    let first_artificial = n + num_ineq;
    let num_artificial = needs_artificial.iter().filter(|&&b| b).count();
    let num_cols = first_artificial + num_artificial;
    let mut basis = Vec::with_capacity(num_rows);
    let mut next_art = first_artificial;
    for (r, row) in rows.iter_mut().enumerate() {
        let rhs = row.pop().expect("rhs");
        row.resize(num_cols, 0.0);
        if needs_artificial[r] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + r);
        }
        row.push(rhs);
    }

    let mut t = Tableau {
        rows,
        cost: Vec::new(),
        basis,
        num_cols,
    };

    if num_artificial > 0 {
        let mut phase1 = vec![0.0; num_cols];
        phase1[first_artificial..].iter_mut().for_each(|v| *v = 1.0);
        t.set_objective(&phase1);
        t.optimize(num_cols)?;
        let infeasibility = -t.cost[num_cols];
        let scale = 1.0
            + system
                .inequalities
                .iter()
                .chain(&system.equalities)
                .fold(0.0_f64, |m, c| m.max(c.rhs.abs()));
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining (zero-level) artificials out of the basis.
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= first_artificial {
                match (0..first_artificial).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                    Some(j) => {
                        t.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        // Redundant row.
                        t.rows.remove(r);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let sign = match direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let phase2: Vec<f64> = objective.iter().map(|c| sign * c).collect();
    t.set_objective(&phase2);
    match t.optimize(first_artificial)? {
        Phase::Unbounded => Ok(LpOutcome::Unbounded),
        Phase::Optimal => {
            let mut point = vec![0.0; n];
            for (r, &b) in t.basis.iter().enumerate() {
                if b < n {
                    point[b] = t.rhs(r).max(0.0);
                }
            }
            let value = objective.iter().zip(&point).map(|(c, x)| c * x).sum();
            Ok(LpOutcome::Optimal(LpSolution { value, point }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> LpSolution {
        outcome.optimal().expect("expected an optimal solution")
    }

    #[test]
    fn maximize_single_bounded_variable() {
        let mut s = LinearSystem::new(1);
        s.add_inequality(vec![1.0], 3.0).unwrap();
        let sol = optimal(lp_solve(&[1.0], Direction::Maximize, &s).unwrap());
        assert_eq!(sol.value, 3.0);
        assert_eq!(sol.point, vec![3.0]);
    }

    #[test]
    fn simplex_min_is_the_smallest_coefficient() {
        let mut s = LinearSystem::new(4);
        s.add_equality(vec![1.0; 4], 1.0).unwrap();
        let c = [0.5, -2.0, 3.0, -1.0];
        let sol = optimal(lp_solve(&c, Direction::Minimize, &s).unwrap());
        assert!((sol.value + 2.0).abs() < 1e-12);
        assert!((sol.point[1] - 1.0).abs() < 1e-12);
        let max = optimal(lp_solve(&c, Direction::Maximize, &s).unwrap());
        assert!((max.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut s = LinearSystem::new(1);
        s.add_inequality(vec![1.0], -1.0).unwrap();
        assert_eq!(
            lp_solve(&[1.0], Direction::Minimize, &s).unwrap(),
            LpOutcome::Infeasible
        );
        let free = LinearSystem::new(2);
        assert_eq!(
            lp_solve(&[1.0, 0.0], Direction::Maximize, &free).unwrap(),
            LpOutcome::Unbounded
        );
        let mut eq = LinearSystem::new(2);
        eq.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        eq.add_equality(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(
            lp_solve(&[0.0, 0.0], Direction::Minimize, &eq).unwrap(),
            LpOutcome::Infeasible
        );
    }

    #[test]
    fn negative_bounds_and_redundant_equalities() {
        // x + y >= 2 (as -x - y <= -2), x <= 5, duplicate equality x - y = 0
        let mut s = LinearSystem::new(2);
        s.add_inequality(vec![-1.0, -1.0], -2.0).unwrap();
        s.add_inequality(vec![1.0, 0.0], 5.0).unwrap();
        s.add_equality(vec![1.0, -1.0], 0.0).unwrap();
        s.add_equality(vec![2.0, -2.0], 0.0).unwrap();
        let sol = optimal(lp_solve(&[1.0, 1.0], Direction::Minimize, &s).unwrap());
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!((sol.point[0] - 1.0).abs() < 1e-12);
        let sol = optimal(lp_solve(&[1.0, 1.0], Direction::Maximize, &s).unwrap());
        assert!((sol.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example for the textbook pivot rule.
        let mut s = LinearSystem::new(4);
        s.add_inequality(vec![0.25, -60.0, -0.04, 9.0], 0.0).unwrap();
        s.add_inequality(vec![0.5, -90.0, -0.02, 3.0], 0.0).unwrap();
        s.add_inequality(vec![0.0, 0.0, 1.0, 0.0], 1.0).unwrap();
        let sol = optimal(
            lp_solve(&[0.75, -150.0, 0.02, -6.0], Direction::Maximize, &s).unwrap(),
        );
        assert!((sol.value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn rejects_malformed_input() {
        let mut s = LinearSystem::new(2);
        assert!(s.add_inequality(vec![1.0], 1.0).is_err());
        assert!(lp_solve(&[1.0], Direction::Minimize, &s).is_err());
    }
}
