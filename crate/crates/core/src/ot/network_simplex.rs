//! Primal network simplex for the dense transportation problem
//! `min Σ c_ij f_ij  s.t.  Σ_j f_ij = a_i,  Σ_i f_ij = b_j,  f >= 0`.
//!
//! The basis is a spanning tree on the `m + n` supply and demand nodes.
//! Node potentials are recomputed from the tree after every pivot and the
//! entering arc is chosen by block search over reduced costs.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Basic arcs `(i, j, flow)` with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual potentials with `u_i + v_j <= c_ij`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    m: usize,
    n: usize,
    arcs: Vec<(usize, usize)>,
    flow: Vec<f64>,
    adj: Vec<Vec<usize>>,
    parent_arc: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    stack: Vec<usize>,
}

impl Tree {
    fn other(&self, arc: usize, node: usize) -> usize {
        let (i, j) = self.arcs[arc];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Potentials `u_i = pot[i]`, `v_j = pot[m + j]` from root 0, plus parents.
    fn relabel(&mut self, cost: &[f64]) {
        let n = self.n;
        self.pot[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = usize::MAX;
        self.parent_arc[0] = usize::MAX;
        self.stack.clear();
        self.stack.push(0);
        while let Some(node) = self.stack.pop() {
            for k in 0..self.adj[node].len() {
                let arc = self.adj[node][k];
                if arc == self.parent_arc[node] {
                    continue;
                }
                let next = self.other(arc, node);
                let (i, j) = self.arcs[arc];
                let c = cost[i * n + j];
                self.pot[next] = c - self.pot[node];
                self.parent[next] = node;
                self.parent_arc[next] = arc;
                self.depth[next] = self.depth[node] + 1;
                self.stack.push(next);
            }
        }
    }
}

/// Solve the transportation problem. `cost` is row-major `m x n`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(invalid("transport problem needs nonempty marginals and an m x n cost"));
    }
    if supply.iter().chain(demand).any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(invalid("marginal weights must be finite and >= 0"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(invalid("costs must be finite"));
    }
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb) {
        return Err(invalid(format!("unbalanced marginals: {sa} vs {sb}")));
    }

    // north-west corner start
    let nodes = m + n;
    let mut tree = Tree {
        m,
        n,
        arcs: Vec::with_capacity(nodes - 1),
        flow: Vec::with_capacity(nodes - 1),
        adj: vec![Vec::new(); nodes],
        parent_arc: vec![usize::MAX; nodes],
        parent: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        pot: vec![0.0; nodes],
        stack: Vec::with_capacity(nodes),
    };
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let f = ra[i].min(rb[j]).max(0.0);
        let k = tree.arcs.len();
        tree.arcs.push((i, j));
        tree.flow.push(f);
        tree.adj[i].push(k);
        tree.adj[m + j].push(k);
        ra[i] -= f;
        rb[j] -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let max_cost = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let eps = 1e-12 * (1.0 + max_cost);
    let total = m * n;
    let block = ((total as f64).sqrt().ceil() as usize).clamp(64.min(total), total);
    let max_pivots = 200 * total + 100_000;
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let mut cycle_plus: Vec<usize> = Vec::new();
    let mut cycle_minus: Vec<usize> = Vec::new();

    loop {
        tree.relabel(cost);
        // block search for the most negative reduced cost
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let (ii, jj) = (cursor / n, cursor % n);
                let rc = cost[cursor] - tree.pot[ii] - tree.pot[m + jj];
                if rc < best {
                    best = rc;
                    entering = Some((ii, jj));
                }
                cursor += 1;
                if cursor == total {
                    cursor = 0;
                }
            }
            scanned = end;
            if entering.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverFailure(format!("no convergence after {max_pivots} pivots")));
        }

        // cycle: entering arc (+), then the tree path from demand node back
        // to the supply node with alternating signs starting with (-)
        let (mut a, mut b) = (m + ej, ei);
        let mut from_a: Vec<usize> = Vec::new();
        let mut from_b: Vec<usize> = Vec::new();
        while tree.depth[a] > tree.depth[b] {
            from_a.push(tree.parent_arc[a]);
            a = tree.parent[a];
        }
        while tree.depth[b] > tree.depth[a] {
            from_b.push(tree.parent_arc[b]);
            b = tree.parent[b];
        }
        while a != b {
            from_a.push(tree.parent_arc[a]);
            a = tree.parent[a];
            from_b.push(tree.parent_arc[b]);
            b = tree.parent[b];
        }
        cycle_plus.clear();
        cycle_minus.clear();
        for (k, &arc) in from_a.iter().chain(from_b.iter().rev()).enumerate() {
            if k % 2 == 0 {
                cycle_minus.push(arc);
            } else {
                cycle_plus.push(arc);
            }
        }
        let (mut leave, mut theta) = (usize::MAX, f64::INFINITY);
        for &arc in &cycle_minus {
            if tree.flow[arc] < theta {
                theta = tree.flow[arc];
                leave = arc;
            }
        }
        let theta = theta.max(0.0);
        for &arc in &cycle_plus {
            tree.flow[arc] += theta;
        }
        for &arc in &cycle_minus {
            tree.flow[arc] = (tree.flow[arc] - theta).max(0.0);
        }
        let (li, lj) = tree.arcs[leave];
        tree.adj[li].retain(|&x| x != leave);
        tree.adj[m + lj].retain(|&x| x != leave);
        tree.arcs[leave] = (ei, ej);
        tree.flow[leave] = theta;
        tree.adj[ei].push(leave);
        tree.adj[m + ej].push(leave);
    }

    let u = tree.pot[..m].to_vec();
    let v = tree.pot[m..].to_vec();
    let primal: f64 = tree.arcs.iter().zip(&tree.flow).map(|(&(i, j), f)| f * cost[i * n + j]).sum();
    let dual: f64 =
        supply.iter().zip(&u).map(|(a, u)| a * u).sum::<f64>() + demand.iter().zip(&v).map(|(b, v)| b * v).sum::<f64>();

    // certificate: dual feasibility and zero duality gap
    let tol = 1e-9 * (1.0 + max_cost);
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            worst = worst.min(cost[i * n + j] - u[i] - v[j]);
        }
    }
    let gap = (primal - dual).abs();
    if worst < -tol || gap > 1e-9 * (1.0 + primal.abs()) {
        return Err(Error::SolverFailure(format!(
            "optimality certificate failed: min reduced cost {worst:.3e}, duality gap {gap:.3e}"
        )));
    }
    let flows = tree.arcs.iter().zip(&tree.flow).filter(|(_, f)| **f > 0.0).map(|(&(i, j), &f)| (i, j, f)).collect();
    Ok(TransportSolution { flows, cost: primal, u, v, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_assignment() {
        // optimal: 0->1, 1->0 with cost 2
        let cost = [5.0, 1.0, 1.0, 5.0];
        let s = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((s.cost - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_unbalanced_inputs() {
        let s = solve_transport(&[1.0], &[0.25, 0.25, 0.5], &[1.0, 2.0, 3.0]).unwrap();
        assert!((s.cost - 2.25).abs() < 1e-15);
        let s = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &[0.0; 4]).unwrap();
        assert_eq!(s.cost, 0.0);
        assert!(solve_transport(&[1.0], &[0.5], &[1.0]).is_err());
        assert!(solve_transport(&[1.0], &[1.0], &[f64::NAN]).is_err());
    }
}
