//! Dense primal simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with `b ≥ 0`.
//! Starts from the slack basis and pivots by Bland's rule.

use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// `a` is row-major `m×n`.
pub fn maximize(c: &[f64], a: &[f64], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    if a.len() != m * n {
        return Err(Error::Solver(format!("constraint matrix has {} entries, expected {}", a.len(), m * n)));
    }
    if b.iter().any(|v| *v < -FEAS_TOL) {
        return Err(Error::Solver("slack basis is infeasible (negative right-hand side)".into()));
    }
    // dictionary: x_B = rhs − T·x_N, z = z0 + red·x_N
    let mut t = a.to_vec();
    let mut rhs: Vec<f64> = b.iter().map(|v| v.max(0.0)).collect();
    let mut red = c.to_vec();
    let mut z = 0.0;
    // labels: 0..n are structural, n..n+m are slacks
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let mut basic: Vec<usize> = (n..n + m).collect();

    let cap = 100 * (m + n) + 10_000;
    for pivots in 0..cap {
        let mut enter: Option<usize> = None;
        for j in 0..n {
            if red[j] > FEAS_TOL && enter.is_none_or(|e| nonbasic[j] < nonbasic[e]) {
                enter = Some(j);
            }
        }
        let Some(s) = enter else {
            let mut x = vec![0.0; n];
            for (i, &lab) in basic.iter().enumerate() {
                if lab < n {
                    x[lab] = rhs[i];
                }
            }
            return Ok(LpSolution {
                x,
                objective: z,
                pivots,
            });
        };

        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for i in 0..m {
            let coef = t[i * n + s];
            if coef > FEAS_TOL {
                let q = rhs[i] / coef;
                let take = match leave {
                    None => true,
                    Some(l) => q < ratio - 1e-15 || (q <= ratio + 1e-15 && basic[i] < basic[l]),
                };
                if take {
                    ratio = q;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::Solver("LP is unbounded".into()));
        };

        let p = t[r * n + s];
        for j in 0..n {
            if j != s {
                t[r * n + j] /= p;
            }
        }
        rhs[r] /= p;
        t[r * n + s] = 1.0 / p;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = t[i * n + s];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                if j != s {
                    t[i * n + j] -= f * t[r * n + j];
                }
            }
            rhs[i] -= f * rhs[r];
            if rhs[i] < 0.0 && rhs[i] > -FEAS_TOL {
                rhs[i] = 0.0;
            }
            t[i * n + s] = -f / p;
        }
        let f = red[s];
        for j in 0..n {
            if j != s {
                red[j] -= f * t[r * n + j];
            }
        }
        z += f * rhs[r];
        red[s] = -f / p;
        std::mem::swap(&mut basic[r], &mut nonbasic[s]);
    }
    Err(Error::Solver(format!("simplex hit the iteration cap ({cap})")))
}
