//! Exact finite optimal transport by the primal transportation simplex.
//!
//! The basis is a spanning tree on the bipartite graph of sources and sinks.
//! Each pivot prices a block of cells, pushes flow around the cycle closed by
//! the entering cell and rebuilds the tree potentials by traversal. Degenerate
//! pivots are allowed; a generous pivot budget guards against stalling.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::torus::torus_distance_raw;

use super::measure::DiscreteMeasure;

/// Default cap on the combined number of atoms.
pub const DEFAULT_TRANSPORT_CAP: usize = 4000;

/// Optimal plan of a transportation problem.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    /// Basic cells `(source, sink, flow)`; zero flows may appear.
    pub plan: Vec<(usize, usize, f64)>,
    /// Source potentials `u` and sink potentials `v` with
    /// `u_i + v_j <= c_ij`, tight on basic cells.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    n1: usize,
    adj: Vec<Vec<usize>>,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl Tree {
    /// Node ids: sources `0..n1`, sinks `n1..n1+n2`.
    fn rebuild(&mut self, cost: &impl Fn(usize, usize) -> f64) {
        let n = self.adj.len();
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent_cell.iter_mut().for_each(|p| *p = NONE);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::with_capacity(n);
        seen[0] = true;
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        queue.push_back(0);
        while let Some(a) = queue.pop_front() {
            for &c in &self.adj[a] {
                let (i, j) = self.cells[c];
                let b = if a < self.n1 { self.n1 + j } else { i };
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                self.parent[b] = a;
                self.parent_cell[b] = c;
                self.depth[b] = self.depth[a] + 1;
                // u_i + v_j = c_ij on basic cells
                self.pot[b] = cost(i, j) - self.pot[a];
                queue.push_back(b);
            }
        }
    }
}

/// Solves `min sum c_ij x_ij` subject to row sums `supply` and column sums
/// `demand` (rescaled to the supply total), `x >= 0`.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<TransportSolution> {
    let n1 = supply.len();
    let n2 = demand.len();
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptySet);
    }
    let ts: f64 = supply.iter().sum();
    let td: f64 = demand.iter().sum();
    let demand: Vec<f64> = demand.iter().map(|&b| b * ts / td).collect();

    // north-west corner start on the given orders
    let mut cells = Vec::with_capacity(n1 + n2 - 1);
    let mut flow = Vec::with_capacity(n1 + n2 - 1);
    let (mut i, mut j) = (0usize, 0usize);
    let mut rs = supply[0];
    let mut cs = demand[0];
    loop {
        let x = rs.min(cs).max(0.0);
        cells.push((i, j));
        flow.push(x);
        rs -= x;
        cs -= x;
        if i == n1 - 1 && j == n2 - 1 {
            break;
        }
        if (rs <= cs && i < n1 - 1) || j == n2 - 1 {
            i += 1;
            rs = supply[i];
        } else {
            j += 1;
            cs = demand[j];
        }
    }
    debug_assert_eq!(cells.len(), n1 + n2 - 1);

    let n = n1 + n2;
    let mut adj = vec![Vec::new(); n];
    for (c, &(i, j)) in cells.iter().enumerate() {
        adj[i].push(c);
        adj[n1 + j].push(c);
    }
    let mut tree = Tree {
        n1,
        adj,
        cells,
        flow,
        parent: vec![NONE; n],
        parent_cell: vec![NONE; n],
        depth: vec![0; n],
        pot: vec![0.0; n],
    };
    tree.rebuild(&cost);

    let arcs = n1 * n2;
    let block = ((arcs as f64).sqrt() as usize).max(64).min(arcs);
    let max_cost = {
        let mut m = 0.0f64;
        for i in (0..n1).step_by((n1 / 64).max(1)) {
            for j in 0..n2 {
                m = m.max(cost(i, j).abs());
            }
        }
        m.max(1e-300)
    };
    let tol = 1e-12 * max_cost;
    let budget = 200 * (n1 + n2) * ((n1 + n2) as f64).log2().ceil().max(1.0) as usize + 10_000;

    let mut cursor = 0usize;
    let mut pivots = 0usize;
    loop {
        // block pricing: most negative reduced cost in the first block that
        // contains any negative one
        let mut best: Option<(usize, usize, f64)> = None;
        let mut scanned = 0usize;
        while scanned < arcs {
            let take = block.min(arcs - scanned);
            for t in 0..take {
                let a = (cursor + t) % arcs;
                let (i, j) = (a / n2, a % n2);
                let rc = cost(i, j) - tree.pot[i] - tree.pot[n1 + j];
                if rc < -tol && best.is_none_or(|b| rc < b.2) {
                    best = Some((i, j, rc));
                }
            }
            cursor = (cursor + take) % arcs;
            scanned += take;
            if best.is_some() {
                break;
            }
        }
        let Some((ei, ej, _)) = best else { break };
        pivots += 1;
        if pivots > budget {
            return Err(Error::Invariant(format!(
                "transport simplex exceeded {budget} pivots"
            )));
        }

        // cycle: entering cell (+), then alternating signs along the tree
        // path from sink ej back to source ei
        let (mut a, mut b) = (ei, n1 + ej);
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                from_a.push(tree.parent_cell[a]);
                a = tree.parent[a];
            } else {
                from_b.push(tree.parent_cell[b]);
                b = tree.parent[b];
            }
        }
        // order: sink side walking up, then source side walking down
        let path: Vec<usize> = from_b.iter().copied().chain(from_a.iter().rev().copied()).collect();
        let mut theta = f64::INFINITY;
        let mut leave = NONE;
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 && tree.flow[c] < theta {
                theta = tree.flow[c];
                leave = c;
            }
        }
        let theta = theta.max(0.0);
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                tree.flow[c] = (tree.flow[c] - theta).max(0.0);
            } else {
                tree.flow[c] += theta;
            }
        }
        // swap the leaving cell for the entering one
        let (li, lj) = tree.cells[leave];
        tree.adj[li].retain(|&c| c != leave);
        tree.adj[n1 + lj].retain(|&c| c != leave);
        tree.cells[leave] = (ei, ej);
        tree.flow[leave] = theta;
        tree.adj[ei].push(leave);
        tree.adj[n1 + ej].push(leave);
        tree.rebuild(&cost);
    }

    let plan: Vec<(usize, usize, f64)> = tree
        .cells
        .iter()
        .zip(&tree.flow)
        .map(|(&(i, j), &x)| (i, j, x))
        .collect();
    let cost_value = plan.iter().map(|&(i, j, x)| x * cost(i, j)).sum();
    Ok(TransportSolution {
        cost: cost_value,
        plan,
        u: tree.pot[..n1].to_vec(),
        v: tree.pot[n1..].to_vec(),
        pivots,
    })
}

/// Exact `W_p(m1, m2)` with cost `||x - y||^p`, for supports of combined
/// size at most `cap`.
pub fn exact_wp_grid(m1: &DiscreteMeasure, m2: &DiscreteMeasure, p: f64, cap: usize) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            expected: m1.dim(),
            found: m2.dim(),
        });
    }
    let size = m1.len() + m2.len();
    if size > cap {
        return Err(Error::cap("transport support", size, cap));
    }
    let cost = |i: usize, j: usize| {
        let dist = torus_distance_raw(m1.point(i), m2.point(j));
        if p == 1.0 {
            dist
        } else {
            dist.powf(p)
        }
    };
    Ok(solve_transport(m1.masses(), m2.masses(), cost)?.cost)
}

/// Exact `W_1(m1, m2)` by finite transport.
pub fn exact_w1_grid(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<f64> {
    exact_wp_grid(m1, m2, 1.0, DEFAULT_TRANSPORT_CAP)
}
