//! Dense transportation simplex: northwest-corner start, MODI pricing.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const PRICE_TOL: f64 = 1e-12;

/// Minimum-cost flow from `supply` (rows) to `demand` (columns) over a
/// row-major cost matrix. Totals must agree. Returns the dense plan.
pub fn solve(cost: &[f64], supply: &[f64], demand: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::Invalid("transportation instance has empty side or bad cost shape".into()));
    }
    let mut flow = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);

    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]);
        flow[i * n + j] = x;
        basic[i * n + j] = true;
        cells.push((i, j));
        let row_done = s[i] <= d[j];
        s[i] -= x;
        d[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (row_done && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), m + n - 1);

    let cap = 50 * m * n + 1000;
    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    for _ in 0..cap {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for &(r, c) in &cells {
            adj[r].push(m + c);
            adj[m + c].push(r);
        }
        // potentials by walking the basis tree from row 0
        let mut seen = vec![false; nodes];
        seen[0] = true;
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                if a < m {
                    v[b - m] = cost[a * n + (b - m)] - u[a];
                } else {
                    u[b] = cost[b * n + (a - m)] - v[a - m];
                }
                queue.push_back(b);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Solver("transportation basis is not a spanning tree".into()));
        }

        let mut entering = None;
        let mut best = -PRICE_TOL;
        for r in 0..m {
            for c in 0..n {
                if basic[r * n + c] {
                    continue;
                }
                let red = cost[r * n + c] - u[r] - v[c];
                if red < best {
                    best = red;
                    entering = Some((r, c));
                }
            }
        }
        let Some((er, ec)) = entering else {
            for f in flow.iter_mut() {
                if *f < 0.0 {
                    *f = 0.0;
                }
            }
            return Ok(flow);
        };

        // tree path from column node `ec` back to row node `er`
        let mut parent = vec![usize::MAX; nodes];
        let start = m + ec;
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            if a == er {
                break;
            }
            for &b in &adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = er;
        while node != start {
            let prev = parent[node];
            let (r, c) = if node < m { (node, prev - m) } else { (prev, node - m) };
            path.push((r, c));
            node = prev;
        }
        // path runs er -> ... -> ec; the cycle alternates starting with −
        // at the cell adjacent to the entering column
        path.reverse();
        let mut theta = f64::INFINITY;
        let mut leaving = None;
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = flow[r * n + c];
                let better = match leaving {
                    None => true,
                    Some((lr, lc)) => f < theta || (f == theta && r * n + c < lr * n + lc),
                };
                if better {
                    theta = f;
                    leaving = Some((r, c));
                }
            }
        }
        let (lr, lc) = leaving.ok_or_else(|| Error::Solver("empty pivot cycle".into()))?;
        flow[er * n + ec] = theta;
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[r * n + c] -= theta;
            } else {
                flow[r * n + c] += theta;
            }
        }
        flow[lr * n + lc] = 0.0;
        basic[lr * n + lc] = false;
        basic[er * n + ec] = true;
        let pos = cells.iter().position(|&x| x == (lr, lc)).expect("leaving cell is basic");
        cells[pos] = (er, ec);
    }
    Err(Error::Solver(format!("transportation simplex hit the iteration cap ({cap})")))
}
