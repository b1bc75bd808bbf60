//! Dense simplex for small linear programs of the form
//! `max cᵀx  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The origin is feasible under `b ≥ 0`, so one phase with slack variables
//! suffices. Bland's rule rules out cycling.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::LinearProgram("constraint matrix has the wrong shape".into()));
    }
    if let Some(v) = b.iter().find(|&&v| v < -PIVOT_TOL || !v.is_finite()) {
        return Err(Error::LinearProgram(format!("right-hand side {v} is negative")));
    }
    // tableau rows: constraints [A | I | b]; last row: objective [-c | 0 | 0]
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i].max(0.0);
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let max_iter = 50 * (n + m).max(1);
    for _ in 0..max_iter {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -PIVOT_TOL) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i][width - 1];
                }
            }
            return Ok(LpSolution { value: t[m][width - 1], x });
        };
        // ratio test, ties broken by smallest basic index
        let mut row: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > PIVOT_TOL {
                let r = t[i][width - 1] / t[i][col];
                let better = match row {
                    None => true,
                    Some((k, best)) => r < best - PIVOT_TOL || (r <= best + PIVOT_TOL && basis[i] < basis[k]),
                };
                if better {
                    row = Some((i, r));
                }
            }
        }
        let Some((r, _)) = row else {
            return Err(Error::LinearProgram("objective is unbounded".into()));
        };
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[r].clone();
        for (i, line) in t.iter_mut().enumerate() {
            if i != r && line[col].abs() > 0.0 {
                let f = line[col];
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[r] = col;
    }
    Err(Error::LinearProgram("iteration limit reached".into()))
}
