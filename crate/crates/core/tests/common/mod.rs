#![allow(dead_code)]

use std::path::PathBuf;

use quitting_core::QuittingGame;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> QuittingGame {
    QuittingGame::load(fixture(name), true).unwrap()
}

/// Two teams of two: each quitter hands its partner 1 and costs the other team ¼.
pub fn team_game() -> QuittingGame {
    load("team_game.json")
}

use quitting_core::lcp::{nontrivial_zero_solution, q_matrix_test, QVerdict};
use quitting_core::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random 3-player games whose restricted matrix has the cyclic sign pattern,
/// positive determinant, and no nontrivial solution of `LCP(R, 0)`.
pub fn random_cyclic_q_games(count: usize, seed: u64) -> Vec<QuittingGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let mut v = || rng.random_range(0.05..1.0);
        let rows = vec![
            vec![0.0, v(), -v()],
            vec![-v(), 0.0, v()],
            vec![v(), -v(), 0.0],
        ];
        let r = Matrix::from_rows(&rows).unwrap();
        if q_matrix_test(&r, 1, 0).unwrap().verdict != QVerdict::QCertified {
            continue;
        }
        if nontrivial_zero_solution(&r).unwrap().is_some() {
            continue;
        }
        let columns: Vec<Vec<f64>> = (0..3).map(|j| r.column(j)).collect();
        out.push(QuittingGame::from_unilateral(&columns, vec![0.0; 3]).unwrap());
    }
    out
}

/// Least-squares coefficients of `q` on linearly independent `cols`, with the residual.
/// `None` when the columns are dependent.
fn project(cols: &[Vec<f64>], q: &[f64]) -> Option<(Vec<f64>, f64)> {
    let k = cols.len();
    // normal equations G c = b, solved by Gaussian elimination with partial pivoting
    let mut g: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let mut row: Vec<f64> = (0..k).map(|b| dot(&cols[a], &cols[b])).collect();
            row.push(dot(&cols[a], q));
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| g[x][c].abs().total_cmp(&g[y][c].abs()))?;
        if g[p][c].abs() < 1e-10 {
            return None;
        }
        g.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = g[r][c] / g[c][c];
                for j in c..=k {
                    g[r][j] -= f * g[c][j];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..k).map(|c| g[c][k] / g[c][c]).collect();
    let residual = (0..q.len())
        .map(|i| (q[i] - (0..k).map(|c| coef[c] * cols[c][i]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    Some((coef, residual))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Whether `w = q + R z` has a complementary solution, by checking every
/// complementary cone through all of its linearly independent column subsets.
pub fn lcp_solvable_by_cones(r: &Matrix<f64>, q: &[f64]) -> bool {
    let n = q.len();
    let mut choice = vec![0u8; n];
    loop {
        // 0: index unused, 1: unit vector e_i (w_i basic), 2: column -R_i (z_i basic)
        let cols: Vec<Vec<f64>> = (0..n)
            .filter(|&i| choice[i] != 0)
            .map(|i| {
                if choice[i] == 1 {
                    (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
                } else {
                    r.column(i).iter().map(|v| -v).collect()
                }
            })
            .collect();
        let hit = if cols.is_empty() {
            q.iter().all(|v| v.abs() < 1e-12)
        } else {
            matches!(project(&cols, q), Some((c, res)) if res < 1e-9 && c.iter().all(|v| *v >= -1e-12))
        };
        if hit {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            choice[i] += 1;
            if choice[i] < 3 {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}
