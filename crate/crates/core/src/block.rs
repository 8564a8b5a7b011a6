//! The building block: for an anchor `y` on the boundary of `D`, a point
//! `w` on the boundary, points `w^i` on the segments `[w, r̂^i]`, and a
//! distribution `z` over `{0, …, n}` such that
//!
//! * F.1 `w^i = λ_i r̂^i + (1 - λ_i) w` with `0 < λ_i < 1`;
//! * F.2 every coordinate of every `w^i` is at least `-ε`;
//! * F.3 `w = z_0 y + Σ z_i w^i`;
//! * F.4 `z_i > 0` implies `w^i_i = 0`;
//! * F.5 `Σ_{i>=1} z_i > 0`.
//!
//! Read as one round of play: nature picks `i ~ z`; `0` ends the round with
//! continuation `y`, otherwise player `i` quits with probability `λ_i`.
//!
//! Every block is equivalent to a nontrivial solution `(w, z)` of `LCP(R̂, y)`
//! reweighted by `ε` (see [`block_from_solution`]); the case analysis below
//! decides which solution is used.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{snap_small, FeasibleSet};
use crate::lcp::{solve_lcp_kind, LcpSolution, SolutionKind, RESIDUAL_TOLERANCE, SUPPORT_TOLERANCE};
use crate::linalg::sup_dist;
use crate::simplex::{LinearProgram, Relation};

/// Halvings of the perturbation size when approaching an anchor from outside `D`.
pub const MAX_PERTURBATION_HALVINGS: usize = 40;
/// Successive perturbed solutions closer than this count as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCase {
    /// `y` is a convex combination of the columns indexed by its zero coordinates; `w = y`.
    OnFace,
    /// Limit of solutions for anchors perturbed toward the face of zero coordinates.
    PerturbedLimit,
    /// `w` is the far end of the segment from `y` toward one column inside `D`.
    Segment,
    /// `w` lies on a shrunken copy of the face spanned from `y`.
    ShrunkFace,
    /// First nontrivial solution of `LCP(R̂, y)` in canonical order.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingBlock {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub w_i: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub case: BlockCase,
}

impl BuildingBlock {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// `Σ_{i>=1} z_i`.
    pub fn column_mass(&self) -> f64 {
        self.z[1..].iter().sum()
    }

    /// `‖y - w‖_∞`, the drift of the anchor map at `y`.
    pub fn drift(&self) -> f64 {
        sup_dist(&self.y, &self.w)
    }

    /// `‖w - y‖_∞ <= 2 Σ z_i`, with `1e-9` slack.
    pub fn satisfies_drift_bound(&self) -> bool {
        self.drift() <= 2.0 * self.column_mass() + RESIDUAL_TOLERANCE
    }

    /// Indices `i` with `z_i > 0`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.z[i + 1] > SUPPORT_TOLERANCE).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub conditions: Vec<ConditionResult>,
    /// `‖w - y‖_∞` and `2 Σ z_i`.
    pub drift: f64,
    pub drift_bound: f64,
    pub pass: bool,
}

impl BlockCheck {
    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| !c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// `λ` minimizing `‖p - (λ a + (1 - λ) b)‖_2`, and the resulting sup-norm residual.
fn segment_parameter(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dd: f64 = d.iter().map(|x| x * x).sum();
    if dd == 0.0 {
        return (f64::NAN, sup_dist(p, b));
    }
    let lambda = p.iter().zip(b).zip(&d).map(|((p, b), d)| (p - b) * d).sum::<f64>() / dd;
    let residual = p
        .iter()
        .zip(b)
        .zip(&d)
        .map(|((p, b), d)| (p - b - lambda * d).abs())
        .fold(0.0, f64::max);
    (lambda, residual)
}

/// Evaluates F.1–F.5, validity of `z`, and `w ∈ ∂D`.
pub fn check_block(block: &BuildingBlock, d: &FeasibleSet, eps: f64) -> BlockCheck {
    let n = d.n_vertices();
    let mut conditions = Vec::new();
    let mut push = |name: &'static str, failure: Option<String>| {
        conditions.push(ConditionResult {
            name,
            pass: failure.is_none(),
            detail: failure.unwrap_or_else(|| "ok".into()),
        });
    };

    let sizes_ok = block.y.len() == n
        && block.w.len() == n
        && block.w_i.len() == n
        && block.w_i.iter().all(|v| v.len() == n)
        && block.z.len() == n + 1
        && block.lambda.len() == n;
    if !sizes_ok {
        push("sizes", Some(format!("block dimensions do not match {n} normal players")));
        return BlockCheck { conditions, drift: f64::NAN, drift_bound: f64::NAN, pass: false };
    }

    let sum: f64 = block.z.iter().sum();
    let z_failure = if let Some(k) = block.z.iter().position(|&v| v < -SUPPORT_TOLERANCE) {
        Some(format!("z_{k} = {} is negative", block.z[k]))
    } else if (sum - 1.0).abs() > RESIDUAL_TOLERANCE {
        Some(format!("z sums to {sum}"))
    } else {
        None
    };
    push("z", z_failure);

    let mut f1 = None;
    for i in 0..n {
        let (lambda, residual) = segment_parameter(&block.w_i[i], d.vertex(i), &block.w);
        if residual > RESIDUAL_TOLERANCE || lambda.is_nan() {
            f1 = Some(format!("w^{} is off the segment [w, r̂^{}] by {residual:.3e}", i + 1, i + 1));
        } else if lambda <= SUPPORT_TOLERANCE || lambda >= 1.0 {
            f1 = Some(format!("λ_{} = {lambda} is not in (0, 1)", i + 1));
        } else if (lambda - block.lambda[i]).abs() > 1e-7 {
            f1 = Some(format!("λ_{} recorded as {} but the segment gives {lambda}", i + 1, block.lambda[i]));
        }
        if f1.is_some() {
            break;
        }
    }
    push("F.1", f1);

    let mut f2 = None;
    'outer: for i in 0..n {
        for j in 0..n {
            if block.w_i[i][j] < -eps - RESIDUAL_TOLERANCE {
                f2 = Some(format!("w^{}_{} = {} < -ε", i + 1, j + 1, block.w_i[i][j]));
                break 'outer;
            }
        }
    }
    push("F.2", f2);

    let mut mix: Vec<f64> = block.y.iter().map(|v| block.z[0] * v).collect();
    for i in 0..n {
        for (m, v) in mix.iter_mut().zip(&block.w_i[i]) {
            *m += block.z[i + 1] * v;
        }
    }
    let residual = sup_dist(&mix, &block.w);
    push(
        "F.3",
        (residual > RESIDUAL_TOLERANCE).then(|| format!("‖w - z_0 y - Σ z_i w^i‖ = {residual:.3e}")),
    );

    let f4 = (0..n)
        .find(|&i| block.z[i + 1] > SUPPORT_TOLERANCE && block.w_i[i][i].abs() > RESIDUAL_TOLERANCE)
        .map(|i| format!("z_{} = {} but w^{}_{} = {}", i + 1, block.z[i + 1], i + 1, i + 1, block.w_i[i][i]));
    push("F.4", f4);

    let mass = block.column_mass();
    push("F.5", (mass <= SUPPORT_TOLERANCE).then(|| format!("Σ z_i = {mass}")));

    push("boundary", (!d.on_boundary(&block.w)).then(|| "w is not on the boundary of D".to_string()));

    let pass = conditions.iter().all(|c| c.pass);
    BlockCheck { conditions, drift: block.drift(), drift_bound: 2.0 * mass, pass }
}

/// Reweights a nontrivial solution `(w, z)` of `LCP(R̂, y)` into a block with `λ_i = ε`:
/// `ẑ_0 = ε z_0 / (ε z_0 + Σ z_i)`, `ẑ_i = z_i / (ε z_0 + Σ z_i)`, `w^i = (1 - ε) w + ε r̂^i`.
pub fn block_from_solution(d: &FeasibleSet, y: &[f64], sol: &LcpSolution<f64>, eps: f64, case: BlockCase) -> BuildingBlock {
    let n = d.n_vertices();
    let raw: Vec<f64> = sol.z.iter().map(|v| if *v <= SUPPORT_TOLERANCE { 0.0 } else { *v }).collect();
    let mass: f64 = raw[1..].iter().sum();
    let den = eps * raw[0] + mass;
    let mut z = Vec::with_capacity(n + 1);
    z.push(eps * raw[0] / den);
    z.extend(raw[1..].iter().map(|v| v / den));
    let mut w = sol.w.clone();
    snap_small(&mut w, 1e-12);
    BuildingBlock {
        y: y.to_vec(),
        w_i: (0..n).map(|i| toward(&w, d.vertex(i), eps)).collect(),
        w,
        z,
        lambda: vec![eps; n],
        case,
    }
}

/// `(1 - t) from + t to`.
fn toward(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

/// Largest `t` with `(1 - t) y + Σ_{i∈J} μ_i r̂^i >= 0`, `Σ μ = t`, `t <= 1`.
fn face_reach(d: &FeasibleSet, y: &[f64], face: &[usize]) -> f64 {
    if face.is_empty() {
        return 0.0;
    }
    let k = face.len();
    // variables: μ over the face; t is their sum
    let mut lp = LinearProgram::new(k).maximize(vec![1.0; k]);
    lp.constraint(vec![1.0; k], Relation::Le, 1.0);
    for row in 0..d.dim() {
        let coeffs = face.iter().map(|&i| d.vertex(i)[row] - y[row]).collect();
        lp.constraint(coeffs, Relation::Ge, -y[row]);
    }
    lp.solve().optimal().map_or(0.0, |(_, t)| t)
}

/// Largest `λ` keeping `λ r̂^i + (1 - λ) y` nonnegative.
fn segment_reach(d: &FeasibleSet, y: &[f64], i: usize) -> f64 {
    d.vertex(i)
        .iter()
        .zip(y)
        .filter(|(r, yy)| *r < *yy)
        .map(|(r, yy)| yy / (yy - r))
        .fold(1.0, f64::min)
}

fn exhaustive(d: &FeasibleSet, y: &[f64], eps: f64) -> Result<BuildingBlock> {
    let sol = solve_lcp_kind(&d.matrix(), y, SolutionKind::Nontrivial)?.ok_or_else(|| Error::BlockCheck {
        condition: "F.5".into(),
        detail: "LCP(R̂, y) has no solution with z_0 < 1".into(),
    })?;
    Ok(block_from_solution(d, y, &sol, eps, BlockCase::Exhaustive))
}

/// Solution of `LCP(R̂, q)` restricted to complementary set `alpha`, minimizing `z_0`.
fn solve_on_support(d: &FeasibleSet, q: &[f64], alpha: &[usize]) -> Option<LcpSolution<f64>> {
    let n = d.n_vertices();
    let k = alpha.len();
    let mut objective = vec![0.0; k + 1];
    objective[0] = -1.0;
    let mut lp = LinearProgram::new(k + 1).maximize(objective);
    lp.constraint(vec![1.0; k + 1], Relation::Eq, 1.0);
    for row in 0..n {
        let mut coeffs = vec![q[row]];
        coeffs.extend(alpha.iter().map(|&j| d.vertex(j)[row]));
        let rel = if alpha.contains(&row) { Relation::Eq } else { Relation::Ge };
        lp.constraint(coeffs, rel, 0.0);
    }
    let (x, _) = lp.solve().optimal()?;
    if x[0] >= 1.0 - SUPPORT_TOLERANCE {
        return None;
    }
    let mut z = vec![0.0; n + 1];
    z[0] = x[0];
    for (a, &j) in alpha.iter().enumerate() {
        z[j + 1] = x[a + 1];
    }
    let all: Vec<usize> = (0..n).collect();
    let mut w = d.combine(&all, &z[1..]);
    for (wi, qi) in w.iter_mut().zip(q) {
        *wi += z[0] * qi;
    }
    for &i in alpha {
        w[i] = 0.0;
    }
    Some(LcpSolution { w, z })
}

/// Solves `LCP(R̂, y_m)` for anchors `y_m` moved toward the barycenter of the
/// zero-coordinate face by `ε 2^{-m}`, and once the solutions settle on one
/// support, re-solves on that support at `y` itself.
fn perturbed_limit(d: &FeasibleSet, y: &[f64], face: &[usize], eps: f64) -> Option<BuildingBlock> {
    let r = d.matrix();
    let barycenter: Vec<f64> = {
        let w = vec![1.0 / face.len() as f64; face.len()];
        d.combine(face, &w)
    };
    let gap = sup_dist(&barycenter, y);
    if gap == 0.0 {
        return None;
    }
    let dir: Vec<f64> = barycenter.iter().zip(y).map(|(b, v)| (b - v) / gap).collect();
    let mut history: Vec<(Vec<usize>, LcpSolution<f64>)> = Vec::new();
    for m in 0..=MAX_PERTURBATION_HALVINGS {
        let step = (eps * 0.5f64.powi(m as i32)).min(gap);
        let ym: Vec<f64> = y.iter().zip(&dir).map(|(v, dv)| v + step * dv).collect();
        let sol = solve_lcp_kind(&r, &ym, SolutionKind::Any).ok()??;
        let support = sol.support();
        history.push((support, sol));
        let h = history.len();
        if h < 3 {
            continue;
        }
        let stable = history[h - 3..].iter().all(|(s, _)| *s == history[h - 1].0);
        let (a, b) = (&history[h - 2].1, &history[h - 1].1);
        let moved = sup_dist(&a.w, &b.w).max(sup_dist(&a.z, &b.z));
        if stable && moved < CONVERGENCE_TOLERANCE {
            let limit = solve_on_support(d, y, &history[h - 1].0)?;
            return Some(block_from_solution(d, y, &limit, eps, BlockCase::PerturbedLimit));
        }
    }
    None
}

/// Point of `∂D` in `(1 - δ) y + δ S(J)` and its weights over the face, if any.
fn shrunk_face_point(d: &FeasibleSet, y: &[f64], face: &[usize], delta: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = face.len();
    let point = |mu: &[f64]| -> Vec<f64> {
        let s = d.combine(face, mu);
        y.iter().zip(&s).map(|(a, b)| (1.0 - delta) * a + delta * b).collect()
    };
    for zero in 0..d.dim() {
        let mut lp = LinearProgram::new(k);
        lp.constraint(vec![1.0; k], Relation::Eq, 1.0);
        for row in 0..d.dim() {
            let coeffs = face.iter().map(|&i| delta * d.vertex(i)[row]).collect();
            let rel = if row == zero { Relation::Eq } else { Relation::Ge };
            lp.constraint(coeffs, rel, -(1.0 - delta) * y[row]);
        }
        if let Some((mu, _)) = lp.solve().optimal() {
            let mut w = point(&mu);
            snap_small(&mut w, 1e-12);
            if d.on_boundary(&w) && sup_dist(&w, y) > d.tolerance {
                return Some((w, mu));
            }
        }
    }
    None
}

fn shrunk_face(d: &FeasibleSet, y: &[f64], face: &[usize], eps: f64) -> Option<BuildingBlock> {
    let n = d.n_vertices();
    let mut delta = eps;
    for _ in 0..=MAX_PERTURBATION_HALVINGS {
        if let Some((w, mu)) = shrunk_face_point(d, y, face, delta) {
            let w_i: Vec<Vec<f64>> = (0..n).map(|i| toward(y, d.vertex(i), delta)).collect();
            let lambda = (0..n)
                .map(|i| segment_parameter(&w_i[i], d.vertex(i), &w).0)
                .collect();
            let mut z = vec![0.0; n + 1];
            for (&i, &m) in face.iter().zip(&mu) {
                z[i + 1] = m;
            }
            return Some(BuildingBlock { y: y.to_vec(), w, w_i, z, lambda, case: BlockCase::ShrunkFace });
        }
        delta /= 2.0;
    }
    None
}

/// Which construction applies at `y`.
pub fn classify_anchor(d: &FeasibleSet, y: &[f64]) -> BlockCase {
    let face = d.active_set(y);
    if d.barycentric(y, &face).is_some() {
        return BlockCase::OnFace;
    }
    if face_reach(d, y, &face) <= d.tolerance {
        return BlockCase::PerturbedLimit;
    }
    if face.iter().any(|&i| segment_reach(d, y, i) > d.tolerance) {
        BlockCase::Segment
    } else {
        BlockCase::ShrunkFace
    }
}

/// Builds a block at `y ∈ ∂D` and checks it.
///
/// When the case-specific construction fails the checker (the shrunk-face
/// tuple generally violates F.1, since its `w^i` need not lie on `[w, r̂^i]`),
/// the first nontrivial solution of `LCP(R̂, y)` is used instead.
pub fn build_block(d: &FeasibleSet, y: &[f64], eps: f64) -> Result<BuildingBlock> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !d.on_boundary(y) {
        return Err(Error::Precondition(format!("anchor {y:?} is not on the boundary of D")));
    }
    let face = d.active_set(y);
    let n = d.n_vertices();
    let candidate = match classify_anchor(d, y) {
        BlockCase::OnFace => {
            let mu = d.barycentric(y, &face).expect("classified as on the face");
            let mut z = vec![0.0; n + 1];
            for (&i, &m) in face.iter().zip(&mu) {
                z[i + 1] = m;
            }
            Some(BuildingBlock {
                y: y.to_vec(),
                w: y.to_vec(),
                w_i: (0..n).map(|i| toward(y, d.vertex(i), eps)).collect(),
                z,
                lambda: vec![eps; n],
                case: BlockCase::OnFace,
            })
        }
        BlockCase::PerturbedLimit if !face.is_empty() => perturbed_limit(d, y, &face, eps),
        BlockCase::Segment => {
            let i = *face
                .iter()
                .find(|&&i| segment_reach(d, y, i) > d.tolerance)
                .expect("classified as a segment");
            let lambda = segment_reach(d, y, i);
            let mut z = vec![0.0; n + 1];
            z[0] = 1.0 - lambda;
            z[i + 1] = lambda;
            let mut w = toward(y, d.vertex(i), lambda);
            for &j in &face {
                w[j] = 0.0;
            }
            Some(block_from_solution(d, y, &LcpSolution { w, z }, eps, BlockCase::Segment))
        }
        BlockCase::ShrunkFace => shrunk_face(d, y, &face, eps),
        _ => None,
    };
    if let Some(block) = candidate {
        if check_block(&block, d, eps).pass {
            return Ok(block);
        }
    }
    let block = exhaustive(d, y, eps)?;
    let report = check_block(&block, d, eps);
    match report.first_failure() {
        None => Ok(block),
        Some(c) => Err(Error::BlockCheck { condition: c.name.to_string(), detail: c.detail.clone() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn anchor_on_a_vertex_pair_alternates() {
        let d = team_game();
        let y = [0.0, 0.0, 0.0, 0.5];
        let b = build_block(&d, &y, 0.1).unwrap();
        assert!(check_block(&b, &d, 0.1).pass);
        assert!(sup_dist(&b.w, &[0.0, 0.0, 0.5, 0.0]) < 1e-12);
        assert!(b.satisfies_drift_bound());
    }

    #[test]
    fn on_face_anchor_keeps_w_equal_to_y() {
        let d = FeasibleSet::new(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0], vec![-1.0, -1.0, 0.0]]).unwrap();
        let y = [0.0, 0.0, 1.0 / 3.0];
        let b = build_block(&d, &y, 0.1).unwrap();
        assert_eq!(b.case, BlockCase::OnFace);
        assert_eq!(b.w, y.to_vec());
        assert!((b.z[1] - 2.0 / 3.0).abs() < 1e-12 && (b.z[2] - 1.0 / 3.0).abs() < 1e-12);
        assert!(check_block(&b, &d, 0.1).pass);
    }

    #[test]
    fn checker_flags_broken_tuples() {
        let d = team_game();
        let good = build_block(&d, &[0.0, 0.0, 0.0, 0.5], 0.1).unwrap();
        let mut bad = good.clone();
        let i = bad.support()[0];
        bad.w_i[i][i] = 0.1;
        assert!(!check_block(&bad, &d, 0.1).condition("F.4").unwrap().pass);
        let mut bad = good.clone();
        bad.w_i[0] = bad.w.clone();
        assert!(!check_block(&bad, &d, 0.1).condition("F.1").unwrap().pass);
    }
}
