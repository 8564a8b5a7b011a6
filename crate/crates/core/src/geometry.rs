//! The set `D = conv(r̂^1, …, r̂^n) ∩ ℝ^n_{≥0}` of payoffs that normal players
//! can split among themselves, and its boundary.
//!
//! The hull of the columns spans at most an `(n-1)`-dimensional affine
//! subspace, so "boundary" always means boundary relative to that subspace:
//! a member of `D` is on the boundary when some coordinate vanishes or when no
//! representation puts positive weight on every column.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::classify::Classification;
use crate::error::{Error, Result};
use crate::linalg::{sup_dist, Matrix};
use crate::simplex::{LinearProgram, Relation};

pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    vertices: Vec<Vec<f64>>,
    /// Orthonormal basis of the directions of the affine hull of the vertices.
    hull_basis: Vec<Vec<f64>>,
    pub tolerance: f64,
}

impl FeasibleSet {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.first().map_or(0, Vec::len);
        if vertices.is_empty() || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("vertices must be nonempty and share one length".into()));
        }
        let mut hull_basis: Vec<Vec<f64>> = Vec::new();
        for v in &vertices[1..] {
            let mut d: Vec<f64> = v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect();
            for b in &hull_basis {
                let dot: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in d.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 {
                hull_basis.push(d.into_iter().map(|x| x / norm).collect());
            }
        }
        Ok(FeasibleSet { vertices, hull_basis, tolerance: GEOMETRY_TOLERANCE })
    }

    pub fn from_classification(cls: &Classification) -> Result<Self> {
        cls.restricted_matrix()?;
        Self::new(cls.columns())
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn hull_dimension(&self) -> usize {
        self.hull_basis.len()
    }

    /// Matrix whose columns are the vertices.
    pub fn matrix(&self) -> Matrix<f64> {
        Matrix::from_columns(&self.vertices).expect("vertices share one length")
    }

    /// `J_y`: coordinates of `y` that vanish up to tolerance.
    pub fn active_set(&self, y: &[f64]) -> Vec<usize> {
        (0..y.len()).filter(|&i| y[i].abs() <= self.tolerance).collect()
    }

    /// Weights `μ ∈ Δ(subset)` with `Σ μ_i r̂^i = y`, if any.
    pub fn barycentric(&self, y: &[f64], subset: &[usize]) -> Option<Vec<f64>> {
        if subset.is_empty() {
            return None;
        }
        let k = subset.len();
        let mut lp = LinearProgram::new(k);
        lp.constraint(vec![1.0; k], Relation::Eq, 1.0);
        for (row, &yr) in y.iter().enumerate() {
            lp.constraint(subset.iter().map(|&i| self.vertices[i][row]).collect(), Relation::Eq, yr);
        }
        let (mu, _) = lp.solve().optimal()?;
        let p = self.combine(subset, &mu);
        (sup_dist(&p, y) <= self.tolerance).then_some(mu)
    }

    /// `Σ weights[a] · r̂^{subset[a]}`.
    pub fn combine(&self, subset: &[usize], weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (&i, &m) in subset.iter().zip(weights) {
            for (o, v) in out.iter_mut().zip(&self.vertices[i]) {
                *o += m * v;
            }
        }
        out
    }

    pub fn in_hull(&self, y: &[f64]) -> bool {
        let all: Vec<usize> = (0..self.n_vertices()).collect();
        self.barycentric(y, &all).is_some()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && y.iter().all(|&v| v >= -self.tolerance) && self.in_hull(y)
    }

    /// Largest `t` such that `y` has a representation with every weight at least `t`.
    pub fn min_weight_margin(&self, y: &[f64]) -> Option<f64> {
        let n = self.n_vertices();
        // variables: t, ν_1..ν_n with μ_i = t + ν_i
        let mut objective = vec![0.0; n + 1];
        objective[0] = 1.0;
        let mut lp = LinearProgram::new(n + 1).maximize(objective);
        let mut total = vec![1.0; n + 1];
        total[0] = n as f64;
        lp.constraint(total, Relation::Eq, 1.0);
        for (row, &yr) in y.iter().enumerate() {
            let mut coeffs = Vec::with_capacity(n + 1);
            coeffs.push(self.vertices.iter().map(|v| v[row]).sum());
            coeffs.extend(self.vertices.iter().map(|v| v[row]));
            lp.constraint(coeffs, Relation::Eq, yr);
        }
        lp.solve().optimal().map(|(_, t)| t)
    }

    /// Membership in `D` together with a zero coordinate or a face of the hull.
    pub fn on_boundary(&self, y: &[f64]) -> bool {
        if !self.contains(y) {
            return false;
        }
        if y.iter().any(|&v| v <= self.tolerance) {
            return true;
        }
        self.min_weight_margin(y).is_none_or(|t| t <= self.tolerance)
    }

    /// Maximizes `c·y` over `D`; `None` when `D` is empty.
    pub fn maximize(&self, c: &[f64]) -> Option<Vec<f64>> {
        let n = self.n_vertices();
        let objective: Vec<f64> = self
            .vertices
            .iter()
            .map(|v| v.iter().zip(c).map(|(a, b)| a * b).sum())
            .collect();
        let mut lp = LinearProgram::new(n).maximize(objective);
        lp.constraint(vec![1.0; n], Relation::Eq, 1.0);
        for row in 0..self.dim() {
            lp.constraint(self.vertices.iter().map(|v| v[row]).collect(), Relation::Ge, 0.0);
        }
        let (mu, _) = lp.solve().optimal()?;
        let all: Vec<usize> = (0..n).collect();
        Some(self.combine(&all, &mu))
    }

    /// The lexicographically smallest point of `D`, which is a vertex of `D`.
    pub fn lexicographic_min(&self) -> Option<Vec<f64>> {
        let n = self.n_vertices();
        let mut fixed: Vec<(usize, f64)> = Vec::new();
        let mut mu_best = None;
        for k in 0..self.dim() {
            let objective: Vec<f64> = self.vertices.iter().map(|v| -v[k]).collect();
            let mut lp = LinearProgram::new(n).maximize(objective);
            lp.constraint(vec![1.0; n], Relation::Eq, 1.0);
            for row in 0..self.dim() {
                lp.constraint(self.vertices.iter().map(|v| v[row]).collect(), Relation::Ge, 0.0);
            }
            for &(row, value) in &fixed {
                let coeffs = self.vertices.iter().map(|v| v[row]).collect();
                if value.abs() <= 1e-10 {
                    lp.constraint(coeffs, Relation::Eq, 0.0);
                } else {
                    lp.constraint(coeffs, Relation::Le, value + 1e-12);
                }
            }
            let (mu, v) = lp.solve().optimal()?;
            fixed.push((k, -v));
            mu_best = Some(mu);
        }
        let all: Vec<usize> = (0..n).collect();
        let mut y = self.combine(&all, &mu_best?);
        snap_small(&mut y, 1e-12);
        Some(y)
    }

    /// A point of the relative interior of `D`: the average of several optimizers.
    pub fn interior_point<R: Rng>(&self, rng: &mut R, probes: usize) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim()];
        for _ in 0..probes.max(1) {
            let c: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let p = self.maximize(&c)?;
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        Some(acc.into_iter().map(|a| a / probes.max(1) as f64).collect())
    }

    /// Exit point of the ray `from + s·dir` (`s >= 0`) from `D`.
    pub fn ray_exit(&self, from: &[f64], dir: &[f64]) -> Option<Vec<f64>> {
        let n = self.n_vertices();
        // variables: μ_1..μ_n, s
        let mut objective = vec![0.0; n + 1];
        objective[n] = 1.0;
        let mut lp = LinearProgram::new(n + 1).maximize(objective);
        let mut total = vec![1.0; n + 1];
        total[n] = 0.0;
        lp.constraint(total, Relation::Eq, 1.0);
        for row in 0..self.dim() {
            let mut coeffs: Vec<f64> = self.vertices.iter().map(|v| v[row]).collect();
            coeffs.push(-dir[row]);
            lp.constraint(coeffs, Relation::Eq, from[row]);
            let mut nonneg = vec![0.0; n + 1];
            nonneg[n] = dir[row];
            lp.constraint(nonneg, Relation::Ge, -from[row]);
        }
        let (_, s) = lp.solve().optimal()?;
        Some(from.iter().zip(dir).map(|(f, d)| f + s * d).collect())
    }

    /// A random point of the boundary: a random direction within the affine hull
    /// shot from an interior point.
    pub fn random_boundary_point<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let center = self.interior_point(rng, 2 * self.dim())?;
        if self.hull_basis.is_empty() {
            return Some(center);
        }
        let mut dir = vec![0.0; self.dim()];
        for b in &self.hull_basis {
            let g: f64 = rng.sample(StandardNormal);
            for (d, v) in dir.iter_mut().zip(b) {
                *d += g * v;
            }
        }
        let mut y = self.ray_exit(&center, &dir)?;
        snap_small(&mut y, 1e-12);
        Some(y)
    }
}

/// Sets coordinates with magnitude at most `tol` to exactly zero; returns the largest change.
pub fn snap_small(v: &mut [f64], tol: f64) -> f64 {
    let mut moved = 0.0_f64;
    for x in v.iter_mut() {
        if x.abs() <= tol && *x != 0.0 {
            moved = moved.max(x.abs());
            *x = 0.0;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn team_game() -> FeasibleSet {
        let q = -0.25;
        FeasibleSet::new(vec![
            vec![0.0, 1.0, q, q],
            vec![1.0, 0.0, q, q],
            vec![q, q, 0.0, 1.0],
            vec![q, q, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn membership_and_boundary() {
        let d = team_game();
        let y = [0.25, 0.25, 0.0, 0.0];
        assert!(d.contains(&y) && d.on_boundary(&y));
        assert_eq!(d.active_set(&y), vec![2, 3]);
        assert!(!d.contains(d.vertex(0)));
        let center = [0.125; 4];
        assert!(d.contains(&center));
        assert!(!d.on_boundary(&center));
        assert_eq!(d.hull_dimension(), 3);
    }

    #[test]
    fn lexicographic_minimum_is_a_boundary_vertex() {
        let d = team_game();
        let y = d.lexicographic_min().unwrap();
        assert!(sup_dist(&y, &[0.0, 0.0, 0.0, 0.5]) < 1e-12, "{y:?}");
        assert!(d.on_boundary(&y));
    }

    #[test]
    fn random_boundary_points_are_on_the_boundary() {
        let d = team_game();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = d.random_boundary_point(&mut rng).unwrap();
            assert!(d.on_boundary(&y), "{y:?}");
        }
    }
}
