//! Dense two-phase simplex method with Bland's pivoting rule.
//!
//! Every feasibility and membership program in the crate goes through this
//! routine. Over `BigRational` the pivoting is exact; over `f64` entries whose
//! magnitude is below `Scalar::tolerance()` are treated as zero.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `maximize c·x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    n_vars: usize,
    objective: Vec<T>,
    constraints: Vec<(Vec<T>, Relation, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn optimal(self) -> Option<(Vec<T>, T)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

const MAX_PIVOTS: usize = 50_000;

impl<T: Scalar> LinearProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![T::zero(); n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn maximize(mut self, objective: Vec<T>) -> Self {
        assert_eq!(objective.len(), self.n_vars);
        self.objective = objective;
        self
    }

    pub fn constraint(&mut self, coeffs: Vec<T>, rel: Relation, rhs: T) -> &mut Self {
        assert_eq!(coeffs.len(), self.n_vars);
        self.constraints.push((coeffs, rel, rhs));
        self
    }

    pub fn solve(&self) -> LpOutcome<T> {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau<T> {
    n_orig: usize,
    n_cols: usize,
    artificial_from: usize,
    rows: Vec<Vec<T>>, // each row: n_cols coefficients followed by the rhs
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.n_vars;
        let mut normalized: Vec<(Vec<T>, Relation, T)> = lp
            .constraints
            .iter()
            .map(|(a, rel, b)| {
                if *b < T::zero() {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v.clone()).collect(), flipped, -b.clone())
                } else {
                    (a.clone(), *rel, b.clone())
                }
            })
            .collect();
        let n_slack = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_art = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let artificial_from = n + n_slack;
        let n_cols = artificial_from + n_art;

        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut slack, mut art) = (n, artificial_from);
        for (a, rel, b) in normalized.drain(..) {
            let mut row = a;
            row.resize(n_cols + 1, T::zero());
            match rel {
                Relation::Le => {
                    row[slack] = T::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -T::one();
                    slack += 1;
                    row[art] = T::one();
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = T::one();
                    basis.push(art);
                    art += 1;
                }
            }
            row[n_cols] = b;
            rows.push(row);
        }
        Tableau {
            n_orig: n,
            n_cols,
            artificial_from,
            rows,
            basis,
        }
    }

    fn run(mut self, objective: &[T]) -> LpOutcome<T> {
        if self.n_cols > self.artificial_from {
            let mut phase1 = vec![T::zero(); self.n_cols];
            for c in phase1.iter_mut().skip(self.artificial_from) {
                *c = -T::one();
            }
            if self.optimize(&phase1, self.n_cols).is_err() {
                return LpOutcome::Infeasible;
            }
            let infeasibility = self
                .basis
                .iter()
                .zip(&self.rows)
                .filter(|(b, _)| **b >= self.artificial_from)
                .fold(T::zero(), |acc, (_, row)| acc + row[self.n_cols].clone());
            if infeasibility.is_pos_tol() {
                return LpOutcome::Infeasible;
            }
            self.expel_artificials();
        }
        let mut costs = objective.to_vec();
        costs.resize(self.n_cols, T::zero());
        match self.optimize(&costs, self.artificial_from) {
            Ok(()) => {
                let mut x = vec![T::zero(); self.n_orig];
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if b < self.n_orig {
                        x[b] = row[self.n_cols].clone();
                    }
                }
                let value = x
                    .iter()
                    .zip(objective)
                    .fold(T::zero(), |acc, (a, c)| acc + a.clone() * c.clone());
                LpOutcome::Optimal { x, value }
            }
            Err(()) => LpOutcome::Unbounded,
        }
    }

    /// Primal simplex on the current basis; only columns `< allowed` may enter.
    fn optimize(&mut self, costs: &[T], allowed: usize) -> Result<(), ()> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| self.reduced_cost(costs, j).is_pos_tol())
            else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[enter];
                if !a.is_pos_tol() {
                    continue;
                }
                let ratio = row[self.n_cols].clone() / a.clone();
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        let diff = ratio.clone() - lr.clone();
                        diff.is_neg_tol() || (diff.is_zero_tol() && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let (row, _) = leave.ok_or(())?;
            self.pivot(row, enter);
        }
        // Bland's rule cannot cycle in exact arithmetic; hitting the cap means
        // floating-point drift, and the current basis is the best available.
        Ok(())
    }

    fn reduced_cost(&self, costs: &[T], j: usize) -> T {
        if self.basis.contains(&j) {
            return T::zero();
        }
        self.rows
            .iter()
            .zip(&self.basis)
            .fold(costs[j].clone(), |acc, (row, &b)| {
                acc - costs[b].clone() * row[j].clone()
            })
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f == T::zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            row[c] = T::zero();
        }
        self.basis[r] = c;
    }

    fn expel_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.artificial_from {
                let col = (0..self.artificial_from).find(|&j| !self.rows[i][j].is_zero_tol());
                match col {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        // redundant equality
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}
