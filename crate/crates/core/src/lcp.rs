//! Linear complementarity problems in simplex form.
//!
//! Given columns `r^1, …, r^n` (the matrix `R`) and `q`, find `w >= 0` and a
//! probability vector `z = (z_0, …, z_n)` with `w = z_0 q + R z_{1..n}` and
//! `z_i w_i = 0` for `i >= 1`.
//!
//! The solver enumerates complementary index sets `α` (the indices with
//! `w_i = 0`, the only ones allowed `z_i > 0`) and decides each one with a
//! small linear program. Enumeration is complete, so absence of a solution is
//! a certificate. Sets are visited in lexicographic order of their sorted
//! index lists and, within a set, the smallest feasible `z_0` is returned.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::simplex::{LinearProgram, Relation};

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcpSolution<T = f64> {
    pub w: Vec<T>,
    /// `z[0]` is the weight on `q`; `z[i]` the weight on column `i - 1`.
    pub z: Vec<T>,
}

impl<T: Scalar> LcpSolution<T> {
    pub fn to_f64(&self) -> LcpSolution<f64> {
        LcpSolution {
            w: self.w.iter().map(Scalar::to_f64).collect(),
            z: self.z.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// `Σ_{i>=1} z_i`.
    pub fn column_mass(&self) -> T {
        self.z[1..].iter().cloned().fold(T::zero(), |a, b| a + b)
    }
}

impl LcpSolution<f64> {
    /// Indices `i` (0-based over columns) with `z_{i+1} > 0`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.w.len())
            .filter(|&i| self.z[i + 1] > SUPPORT_TOLERANCE)
            .collect()
    }
}

/// Which members of the solution family to look for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Any solution (`z_0 = 1, w = q` included).
    Any,
    /// Solutions with `z_0 < 1`.
    Nontrivial,
    /// Solutions with `z_0 > 0`, i.e. solutions of the textbook form `w = q + R z`.
    Standard,
}

/// All subsets of `0..n` as sorted lists, in lexicographic order (`[]`, `[0]`, `[0, 1]`, …).
pub fn complementary_sets(n: usize) -> Vec<Vec<usize>> {
    fn walk(n: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(prefix.clone());
        for i in start..n {
            prefix.push(i);
            walk(n, i + 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(1 << n);
    walk(n, 0, &mut Vec::new(), &mut out);
    out
}

/// Solves the problem restricted to complementary set `alpha`.
fn solve_on_set<T: Scalar>(r: &Matrix<T>, q: &[T], alpha: &[usize], kind: SolutionKind) -> Option<LcpSolution<T>> {
    let n = r.rows();
    let k = alpha.len();
    // variables: z_0, then z_{alpha[0]}, …
    let mut objective = vec![T::zero(); k + 1];
    objective[0] = match kind {
        SolutionKind::Standard => T::one(),
        _ => -T::one(),
    };
    let mut lp = LinearProgram::new(k + 1).maximize(objective);
    lp.constraint(vec![T::one(); k + 1], Relation::Eq, T::one());
    for i in 0..n {
        let mut row = Vec::with_capacity(k + 1);
        row.push(q[i].clone());
        row.extend(alpha.iter().map(|&j| r[(i, j)].clone()));
        let rel = if alpha.contains(&i) { Relation::Eq } else { Relation::Ge };
        lp.constraint(row, rel, T::zero());
    }
    let (x, _) = lp.solve().optimal()?;
    let z0 = x[0].clone();
    let accept = match kind {
        SolutionKind::Any => true,
        SolutionKind::Nontrivial => (T::one() - z0.clone()).is_pos_tol(),
        SolutionKind::Standard => z0.is_pos_tol(),
    };
    if !accept {
        return None;
    }
    let mut z = vec![T::zero(); n + 1];
    z[0] = z0.clone();
    for (a, &j) in alpha.iter().enumerate() {
        z[j + 1] = x[a + 1].clone();
    }
    let mut w: Vec<T> = r.mul_vec(&z[1..]);
    for (wi, qi) in w.iter_mut().zip(q) {
        *wi = wi.clone() + z0.clone() * qi.clone();
    }
    for &i in alpha {
        w[i] = T::zero();
    }
    Some(LcpSolution { w, z })
}

fn check_dims<T: Scalar>(r: &Matrix<T>, q: &[T]) -> Result<()> {
    if !r.is_square() || r.rows() != q.len() {
        return Err(Error::Dimension(format!(
            "LCP needs a square matrix matching q: matrix {}x{}, q has {} entries",
            r.rows(),
            r.cols(),
            q.len()
        )));
    }
    Ok(())
}

/// First solution of the requested kind in the canonical order, if any.
pub fn solve_lcp_kind<T: Scalar>(r: &Matrix<T>, q: &[T], kind: SolutionKind) -> Result<Option<LcpSolution<T>>> {
    check_dims(r, q)?;
    Ok(complementary_sets(r.rows())
        .iter()
        .filter(|a| kind != SolutionKind::Nontrivial || !a.is_empty())
        .find_map(|a| solve_on_set(r, q, a, kind)))
}

/// First solution in the canonical order, if any.
pub fn solve_lcp<T: Scalar>(r: &Matrix<T>, q: &[T]) -> Result<Option<LcpSolution<T>>> {
    solve_lcp_kind(r, q, SolutionKind::Any)
}

/// A solution of `LCP(R, 0)` with `z_0 < 1`, normalized to `z_0 = 0`.
pub fn nontrivial_zero_solution<T: Scalar>(r: &Matrix<T>) -> Result<Option<LcpSolution<T>>> {
    let q = vec![T::zero(); r.rows()];
    solve_lcp_kind(r, &q, SolutionKind::Nontrivial)
}

/// Solvability of the textbook problem `w = q + R z, w, z >= 0, z·w = 0`.
pub fn standard_form_solvable<T: Scalar>(r: &Matrix<T>, q: &[T]) -> Result<bool> {
    Ok(solve_lcp_kind(r, q, SolutionKind::Standard)?.is_some())
}

/// Checks `sol` against the defining conditions with the crate's float tolerances.
pub fn is_solution(r: &Matrix<f64>, q: &[f64], sol: &LcpSolution<f64>) -> bool {
    let n = r.rows();
    if sol.w.len() != n || sol.z.len() != n + 1 {
        return false;
    }
    let sum: f64 = sol.z.iter().sum();
    if (sum - 1.0).abs() > RESIDUAL_TOLERANCE || sol.z.iter().any(|&z| z < -SUPPORT_TOLERANCE) {
        return false;
    }
    let rz = r.mul_vec(&sol.z[1..]);
    (0..n).all(|i| {
        let residual = (sol.w[i] - sol.z[0] * q[i] - rz[i]).abs();
        let complementary = sol.z[i + 1] <= SUPPORT_TOLERANCE || sol.w[i].abs() <= RESIDUAL_TOLERANCE;
        residual <= RESIDUAL_TOLERANCE && sol.w[i] >= -RESIDUAL_TOLERANCE && complementary
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QVerdict {
    QCertified,
    NotQWithWitness,
    ProbablyQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QMethod {
    Determinant3x3,
    ConeSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMatrixVerdict {
    pub verdict: QVerdict,
    /// A `q` for which the standard-form problem has no solution.
    pub witness_q: Option<Vec<f64>>,
    pub samples_used: usize,
    pub method: QMethod,
    pub determinant: Option<f64>,
}

/// The 3x3 sign pattern `[[0,+,-],[-,0,+],[+,-,0]]` or its mirror image, which
/// is the same pattern after swapping two players.
pub fn has_cyclic_sign_pattern(r: &Matrix<f64>) -> bool {
    if r.rows() != 3 || r.cols() != 3 || (0..3).any(|i| r[(i, i)] != 0.0) {
        return false;
    }
    let forward = (0..3).all(|i| r[(i, (i + 1) % 3)] > 0.0 && r[(i, (i + 2) % 3)] < 0.0);
    let backward = (0..3).all(|i| r[(i, (i + 1) % 3)] < 0.0 && r[(i, (i + 2) % 3)] > 0.0);
    forward || backward
}

fn unit_sphere_sample(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Samples `q` uniformly on the unit sphere and returns the first (by sample
/// index) one whose standard-form problem is unsolvable.
pub fn find_unsolvable_q(r: &Matrix<f64>, samples: usize, seed: u64) -> Option<(usize, Vec<f64>)> {
    let n = r.rows();
    (0..samples).into_par_iter().find_map_first(|k| {
        let q = unit_sphere_sample(n, seed, k as u64);
        match standard_form_solvable(r, &q) {
            Ok(false) => Some((k, q)),
            _ => None,
        }
    })
}

/// Decides whether `R` is a Q-matrix: exactly for the cyclic 3x3 sign pattern, by
/// sampling otherwise.
///
/// Solvability is tested in the textbook form `w = q + R z`. In simplex form a
/// matrix with a nontrivial solution of `LCP(R, 0)` solves every `q` with
/// `z_0 = 0`, which would make the test vacuous.
pub fn q_matrix_test(r: &Matrix<f64>, samples: usize, seed: u64) -> Result<QMatrixVerdict> {
    if !r.is_square() {
        return Err(Error::Dimension("Q-matrix test needs a square matrix".into()));
    }
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    if has_cyclic_sign_pattern(r) {
        let det = r.determinant()?;
        if det > 0.0 {
            return Ok(QMatrixVerdict {
                verdict: QVerdict::QCertified,
                witness_q: None,
                samples_used: 0,
                method: QMethod::Determinant3x3,
                determinant: Some(det),
            });
        }
        let found = find_unsolvable_q(r, samples, seed);
        return Ok(QMatrixVerdict {
            verdict: if found.is_some() { QVerdict::NotQWithWitness } else { QVerdict::ProbablyQ },
            samples_used: found.as_ref().map_or(samples, |(k, _)| k + 1),
            witness_q: found.map(|(_, q)| q),
            method: QMethod::Determinant3x3,
            determinant: Some(det),
        });
    }
    let found = find_unsolvable_q(r, samples, seed);
    Ok(QMatrixVerdict {
        verdict: if found.is_some() { QVerdict::NotQWithWitness } else { QVerdict::ProbablyQ },
        samples_used: found.as_ref().map_or(samples, |(k, _)| k + 1),
        witness_q: found.map(|(_, q)| q),
        method: QMethod::ConeSampling,
        determinant: None,
    })
}

/// Exactly one strictly positive entry in every row and every column.
pub fn is_sign_m<T: Scalar>(r: &Matrix<T>) -> bool {
    let n = r.rows();
    r.is_square()
        && (0..n).all(|i| (0..n).filter(|&j| r[(i, j)] > T::zero()).count() == 1)
        && (0..n).all(|j| (0..n).filter(|&i| r[(i, j)] > T::zero()).count() == 1)
}

/// Whether `R^{-1}` exists and is entrywise nonnegative (up to `-1e-9`).
pub fn inverse_positive<T: Scalar>(r: &Matrix<T>) -> Result<bool> {
    let inv = r.inverse()?;
    let floor = T::from_f64(-1e-9);
    let n = r.rows();
    Ok((0..n).all(|i| (0..n).all(|j| inv[(i, j)] >= floor)))
}
