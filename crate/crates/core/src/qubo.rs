//! Structured QUBO over edge variables b[i][j] of the (N+1)-node market graph.
//!
//! Cost: H_cost = sum w[i][j] b[i][j]. Penalty: five terms (out-degree conflicts,
//! in-degree conflicts, flow-balance squares, opposite-edge products, tabu products),
//! all with ordered-pair summation. Total: m_c * H_cost + m_p * H_penalty.
//! The full coefficient tensor is never materialized; evaluation and the solver
//! interaction exploit the term structure directly.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::marketgraph::MarketGraph;
use crate::num::Scalar;
use crate::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuboError {
    #[error("dimension mismatch: problem has {expected} nodes, assignment has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed dump record: {0}")]
    MalformedDump(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QuboError {
    fn from(e: std::io::Error) -> Self {
        QuboError::Io(e.to_string())
    }
}

/// Binary edge-variable assignment: (N+1)x(N+1), diagonal unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeVars {
    n_nodes: usize,
    bits: Vec<bool>,
}

impl EdgeVars {
    pub fn new(n_nodes: usize) -> EdgeVars {
        EdgeVars { n_nodes, bits: vec![false; n_nodes * n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of meaningful variables: n(n-1) = N(N+1).
    pub fn var_count(&self) -> usize {
        self.n_nodes * (self.n_nodes - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n_nodes + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert_ne!(i, j, "diagonal edge variables are unused");
        self.bits[i * self.n_nodes + j] = v;
    }

    /// Flat variable index of edge (i,j); inverse of [`edge_of_var`].
    pub fn var_index(n_nodes: usize, i: usize, j: usize) -> usize {
        debug_assert_ne!(i, j);
        i * (n_nodes - 1) + if j < i { j } else { j - 1 }
    }

    pub fn edge_of_var(n_nodes: usize, k: usize) -> (usize, usize) {
        let i = k / (n_nodes - 1);
        let r = k % (n_nodes - 1);
        let j = if r < i { r } else { r + 1 };
        (i, j)
    }

    /// Assignment from a flat bit vector in `var_index` order.
    pub fn from_var_bits(n_nodes: usize, bits: &[bool]) -> EdgeVars {
        let mut x = EdgeVars::new(n_nodes);
        for (k, &b) in bits.iter().enumerate() {
            if b {
                let (i, j) = Self::edge_of_var(n_nodes, k);
                x.set(i, j, true);
            }
        }
        x
    }

    /// Assignment from a packed integer, for exhaustive enumeration at small N.
    pub fn from_code(n_nodes: usize, code: u64) -> EdgeVars {
        let nv = n_nodes * (n_nodes - 1);
        let bits: Vec<bool> = (0..nv).map(|k| code >> k & 1 == 1).collect();
        EdgeVars::from_var_bits(n_nodes, &bits)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_nodes {
            for j in 0..self.n_nodes {
                if i != j && self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n_nodes).filter(|&j| j != i && self.get(i, j)).count()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        (0..self.n_nodes).filter(|&j| j != i && self.get(j, i)).count()
    }
}

/// Forbidden (short, long) pairs. t[i][j] = 1 penalizes b[0][j] = b[i][0] = 1,
/// i.e. a cycle starting at j (short) and ending at i (long). Registering the pair
/// (short, long) therefore sets t[long][short].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabuList {
    n_nodes: usize,
    bits: Vec<bool>,
}

impl TabuList {
    pub fn new(n_nodes: usize) -> TabuList {
        TabuList { n_nodes, bits: vec![false; n_nodes * n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n_nodes + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i > 0 && j > 0, "row/column 0 of the tabu list is unused");
        self.bits[i * self.n_nodes + j] = v;
    }

    pub fn register_pair(&mut self, short: usize, long: usize) {
        self.set(long, short, true);
    }

    pub fn is_pair_tabu(&self, short: usize, long: usize) -> bool {
        self.get(long, short)
    }

    pub fn entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 1..self.n_nodes {
            for j in 1..self.n_nodes {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn clear(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = false);
    }
}

#[derive(Debug, Clone)]
pub struct QuboProblem<S> {
    pub graph: MarketGraph<S>,
    pub tabu: TabuList,
    pub m_c: S,
    pub m_p: S,
}

impl<S: Scalar> QuboProblem<S> {
    pub fn new(graph: MarketGraph<S>, tabu: TabuList, m_c: S, m_p: S) -> QuboProblem<S> {
        assert!(m_c > S::zero() && m_p > S::zero(), "m_c and m_p must be positive");
        assert_eq!(graph.n_nodes(), tabu.n_nodes());
        QuboProblem { graph, tabu, m_c, m_p }
    }

    /// Penalty-dominant default: m_p = 1 + sum |w|, used with m_c = 1, so any
    /// single violation outweighs the best possible cost improvement.
    pub fn with_default_weights(graph: MarketGraph<S>, tabu: TabuList) -> QuboProblem<S> {
        let m_p = default_penalty_weight(&graph);
        QuboProblem::new(graph, tabu, S::one(), m_p)
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_vars(&self) -> usize {
        self.n_nodes() * (self.n_nodes() - 1)
    }

    fn check_dims(&self, x: &EdgeVars) -> Result<(), QuboError> {
        if x.n_nodes() != self.n_nodes() {
            return Err(QuboError::DimensionMismatch { expected: self.n_nodes(), got: x.n_nodes() });
        }
        Ok(())
    }

    /// H_cost = sum w[i][j] b[i][j].
    pub fn eval_cost(&self, x: &EdgeVars) -> Result<S, QuboError> {
        self.check_dims(x)?;
        let n = self.n_nodes();
        let mut acc = S::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j && x.get(i, j) {
                    acc = acc + self.graph.get(i, j);
                }
            }
        }
        Ok(acc)
    }

    /// The five penalty terms with ordered-pair summation; zero iff no violation.
    pub fn eval_penalty(&self, x: &EdgeVars) -> Result<S, QuboError> {
        self.check_dims(x)?;
        let n = self.n_nodes();
        let mut acc: i64 = 0;
        for i in 0..n {
            let out = x.out_degree(i) as i64;
            let inn = x.in_degree(i) as i64;
            // terms 1 and 2: ordered distinct pairs sharing a tail / head
            acc += out * (out - 1);
            acc += inn * (inn - 1);
            // term 3: flow balance
            acc += (out - inn) * (out - inn);
        }
        // term 4: opposite edges, both orderings counted
        for i in 0..n {
            for j in 0..n {
                if i != j && x.get(i, j) && x.get(j, i) {
                    acc += 1;
                }
            }
        }
        // term 5: tabu pairs at the dummy
        for i in 1..n {
            for j in 1..n {
                if self.tabu.get(i, j) && x.get(0, j) && x.get(i, 0) {
                    acc += 1;
                }
            }
        }
        Ok(S::from_i64(acc).unwrap())
    }

    /// m_c * H_cost + m_p * H_penalty.
    pub fn eval_total(&self, x: &EdgeVars) -> Result<S, QuboError> {
        Ok(self.m_c * self.eval_cost(x)? + self.m_p * self.eval_penalty(x)?)
    }

    /// Spin-model coefficients via b = (1 + sigma) / 2; energies match
    /// `eval_total` pointwise, offset included.
    pub fn to_ising(&self) -> IsingModel<S> {
        let n = self.n_nodes();
        let nv = self.n_vars();
        let mut m = IsingModel {
            n_vars: nv,
            j: vec![S::zero(); nv * nv],
            h: vec![S::zero(); nv],
            offset: S::zero(),
        };
        let var = |i: usize, j: usize| EdgeVars::var_index(n, i, j);
        let two = S::two();
        // linear cost terms
        for i in 1..n {
            for j in 1..n {
                if i != j {
                    m.add_linear(var(i, j), self.m_c * self.graph.get(i, j));
                }
            }
        }
        // terms 1+2: coefficient 2 m_p per ordered pair sharing a tail or head
        for i in 0..n {
            let outs: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| var(i, j)).collect();
            let ins: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| var(j, i)).collect();
            for a in 0..outs.len() {
                for b in (a + 1)..outs.len() {
                    m.add_quadratic(outs[a], outs[b], two * self.m_p);
                    m.add_quadratic(ins[a], ins[b], two * self.m_p);
                }
            }
            // term 3: (out_i - in_i)^2, multilinear-reduced.
            // squares of the two sums contribute the same pair structure again,
            // plus linear diagonals, minus the cross products.
            for a in 0..outs.len() {
                for b in (a + 1)..outs.len() {
                    m.add_quadratic(outs[a], outs[b], two * self.m_p);
                    m.add_quadratic(ins[a], ins[b], two * self.m_p);
                }
            }
            for &k in &outs {
                m.add_linear(k, self.m_p);
            }
            for &k in &ins {
                m.add_linear(k, self.m_p);
            }
            for &ka in &outs {
                for &kb in &ins {
                    m.add_quadratic(ka, kb, -two * self.m_p);
                }
            }
        }
        // term 4: opposite edges
        for i in 0..n {
            for j in (i + 1)..n {
                m.add_quadratic(var(i, j), var(j, i), two * self.m_p);
            }
        }
        // term 5: tabu
        for i in 1..n {
            for j in 1..n {
                if i != j && self.tabu.get(i, j) {
                    m.add_quadratic(var(0, j), var(i, 0), self.m_p);
                }
            }
        }
        m
    }
}

/// m_p = 1 + sum |w[i][j]| (with m_c fixed at 1).
pub fn default_penalty_weight<S: Scalar>(graph: &MarketGraph<S>) -> S {
    S::one() + graph.abs_weight_sum()
}

/// Pairwise couplings J (symmetric, zero diagonal), local fields h and a constant
/// offset: E(sigma) = sum_{k<l} J[k][l] sigma_k sigma_l + sum h_k sigma_k + offset.
#[derive(Debug, Clone)]
pub struct IsingModel<S> {
    pub n_vars: usize,
    j: Vec<S>,
    h: Vec<S>,
    pub offset: S,
}

impl<S: Scalar> IsingModel<S> {
    /// Add a QUBO term c * b_k b_l (k != l).
    fn add_quadratic(&mut self, k: usize, l: usize, c: S) {
        let q = c / S::from_f64(4.0).unwrap();
        self.j[k * self.n_vars + l] = self.j[k * self.n_vars + l] + q;
        self.j[l * self.n_vars + k] = self.j[l * self.n_vars + k] + q;
        self.h[k] = self.h[k] + q;
        self.h[l] = self.h[l] + q;
        self.offset = self.offset + q;
    }

    /// Add a QUBO term c * b_k.
    fn add_linear(&mut self, k: usize, c: S) {
        let half = c / S::two();
        self.h[k] = self.h[k] + half;
        self.offset = self.offset + half;
    }

    #[inline]
    pub fn coupling(&self, k: usize, l: usize) -> S {
        self.j[k * self.n_vars + l]
    }

    pub fn field(&self, k: usize) -> S {
        self.h[k]
    }

    pub fn energy(&self, spins: &[i8]) -> S {
        assert_eq!(spins.len(), self.n_vars);
        let mut e = self.offset;
        for k in 0..self.n_vars {
            let sk = S::from_i8(spins[k]).unwrap();
            e = e + self.h[k] * sk;
            for l in (k + 1)..self.n_vars {
                e = e + self.j[k * self.n_vars + l] * sk * S::from_i8(spins[l]).unwrap();
            }
        }
        e
    }

    /// Mean of the squared coupling entries over the full n x n matrix.
    pub fn mean_sq_coupling(&self) -> S {
        let n = S::from_usize(self.n_vars * self.n_vars).unwrap();
        self.j.iter().map(|&v| v * v).sum::<S>() / n
    }
}

/// Graph/QUBO dump format for the `solve` and `oracle` subcommands.
/// First line: `N,m_c,m_p`; then edge rows `i,j,w` (node ids, dummy = 0).
pub fn write_graph_dump<W: Write, S: Scalar>(
    w: &mut W,
    graph: &MarketGraph<S>,
    m_c: S,
    m_p: S,
) -> Result<(), QuboError> {
    writeln!(w, "{},{},{}", graph.n_stocks(), m_c.to_f64().unwrap(), m_p.to_f64().unwrap())?;
    for i in 1..graph.n_nodes() {
        for j in 1..graph.n_nodes() {
            if i != j {
                writeln!(w, "{},{},{}", i, j, graph.get(i, j).to_f64().unwrap())?;
            }
        }
    }
    Ok(())
}

pub fn read_graph_dump<R: BufRead>(r: R) -> Result<(MarketGraph<Real>, Real, Real), QuboError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| QuboError::MalformedDump("empty dump".into()))??;
    let hf: Vec<&str> = header.trim().split(',').collect();
    if hf.len() != 3 {
        return Err(QuboError::MalformedDump(header));
    }
    let n: usize = hf[0].trim().parse().map_err(|_| QuboError::MalformedDump(header.clone()))?;
    let m_c: Real = hf[1].trim().parse().map_err(|_| QuboError::MalformedDump(header.clone()))?;
    let m_p: Real = hf[2].trim().parse().map_err(|_| QuboError::MalformedDump(header.clone()))?;
    let mut g = MarketGraph::zeros(n + 1);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 3 {
            return Err(QuboError::MalformedDump(line));
        }
        let i: usize = f[0].trim().parse().map_err(|_| QuboError::MalformedDump(line.clone()))?;
        let j: usize = f[1].trim().parse().map_err(|_| QuboError::MalformedDump(line.clone()))?;
        let w: Real = f[2].trim().parse().map_err(|_| QuboError::MalformedDump(line.clone()))?;
        if i > n || j > n {
            return Err(QuboError::MalformedDump(line));
        }
        g.set(i, j, w);
    }
    Ok((g, m_c, m_p))
}

/// Tabu rows `i,j,1` (t[i][j] indices).
pub fn read_tabu_dump<R: BufRead>(r: R, n_nodes: usize) -> Result<TabuList, QuboError> {
    let mut t = TabuList::new(n_nodes);
    for line in r.lines() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let f: Vec<&str> = s.split(',').collect();
        if f.len() != 3 {
            return Err(QuboError::MalformedDump(line));
        }
        let i: usize = f[0].trim().parse().map_err(|_| QuboError::MalformedDump(line.clone()))?;
        let j: usize = f[1].trim().parse().map_err(|_| QuboError::MalformedDump(line.clone()))?;
        if i == 0 || j == 0 || i >= n_nodes || j >= n_nodes {
            return Err(QuboError::MalformedDump(line));
        }
        if f[2].trim() == "1" {
            t.set(i, j, true);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph3() -> MarketGraph<Real> {
        let mut g = MarketGraph::zeros(4);
        g.set(1, 2, -0.016);
        g.set(2, 1, 0.004);
        g.set(1, 3, 0.002);
        g.set(3, 2, -0.001);
        g
    }

    fn problem(tabu: TabuList) -> QuboProblem<Real> {
        QuboProblem::new(graph3(), tabu, 1.0, 10.0)
    }

    fn cycle(n_nodes: usize, interior: &[usize]) -> EdgeVars {
        let mut x = EdgeVars::new(n_nodes);
        x.set(0, interior[0], true);
        for w in interior.windows(2) {
            x.set(w[0], w[1], true);
        }
        x.set(*interior.last().unwrap(), 0, true);
        x
    }

    #[test]
    fn var_index_round_trips() {
        let n = 4;
        let mut seen = std::collections::HashSet::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let k = EdgeVars::var_index(n, i, j);
                    assert!(k < n * (n - 1));
                    assert!(seen.insert(k));
                    assert_eq!(EdgeVars::edge_of_var(n, k), (i, j));
                }
            }
        }
    }

    #[test]
    fn cost_empty_and_single_edge() {
        let q = problem(TabuList::new(4));
        let x = EdgeVars::new(4);
        assert_eq!(q.eval_cost(&x).unwrap(), 0.0);
        let mut x = EdgeVars::new(4);
        x.set(1, 2, true);
        assert_eq!(q.eval_cost(&x).unwrap(), -0.016);
    }

    #[test]
    fn cost_of_cycle_ignores_dummy_edges() {
        let q = problem(TabuList::new(4));
        let x = cycle(4, &[1, 2]);
        assert_eq!(q.eval_cost(&x).unwrap(), -0.016);
    }

    #[test]
    fn penalty_zero_on_valid_cycle() {
        let q = problem(TabuList::new(4));
        assert_eq!(q.eval_penalty(&cycle(4, &[1, 2])).unwrap(), 0.0);
        assert_eq!(q.eval_penalty(&cycle(4, &[1, 3, 2])).unwrap(), 0.0);
    }

    #[test]
    fn penalty_counts_opposite_edges_twice() {
        let q = problem(TabuList::new(4));
        let mut x = EdgeVars::new(4);
        x.set(1, 2, true);
        x.set(2, 1, true);
        assert_eq!(q.eval_penalty(&x).unwrap(), 2.0);
    }

    #[test]
    fn tabu_fires_only_on_matching_dummy_edges() {
        let mut tabu = TabuList::new(4);
        // registered pair: short=2, long=1 -> t[1][2]
        tabu.register_pair(2, 1);
        let q = problem(tabu);
        // cycle 0->2->1->0 (starts at short 2, ends at long 1): penalty 1
        assert_eq!(q.eval_penalty(&cycle(4, &[2, 1])).unwrap(), 1.0);
        // cycle 0->2->3->0: b[0][2]=1 but b[1][0]=0, no tabu penalty
        assert_eq!(q.eval_penalty(&cycle(4, &[2, 3])).unwrap(), 0.0);
        // interior edge b[1][2] alone never fires the tabu term:
        // 0->3->1->2->0 starts at 3 and ends at 2, no (short=2, long=1) match
        let x = cycle(4, &[3, 1, 2]);
        assert!(x.get(1, 2));
        assert_eq!(q.eval_penalty(&x).unwrap(), 0.0);
    }

    #[test]
    fn total_combines_linearly() {
        let q = problem(TabuList::new(4));
        let x = cycle(4, &[1, 2]);
        assert_eq!(q.eval_total(&x).unwrap(), -0.016);
        let mut x2 = EdgeVars::new(4);
        x2.set(1, 3, true);
        x2.set(3, 1, true);
        // penalty 2, cost 0.002, m_p = 10
        assert!((q.eval_total(&x2).unwrap() - (20.0 + 0.002)).abs() < 1e-12);
        assert_eq!(q.eval_total(&EdgeVars::new(4)).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let q = problem(TabuList::new(4));
        let x = EdgeVars::new(5);
        assert!(matches!(q.eval_cost(&x), Err(QuboError::DimensionMismatch { .. })));
    }

    #[test]
    fn default_penalty_weight_values() {
        let g: MarketGraph<Real> = MarketGraph::zeros(4);
        assert_eq!(default_penalty_weight(&g), 1.0);
        let mut g: MarketGraph<Real> = MarketGraph::zeros(4);
        g.set(1, 2, -0.016);
        g.set(2, 1, 0.004);
        assert!((default_penalty_weight(&g) - 1.02_f64).abs() < 1e-12);
    }

    #[test]
    fn default_weight_dominates_any_violation_exhaustively() {
        // N=3: every violating assignment must cost more than any valid one gains.
        let g = graph3();
        let q = QuboProblem::with_default_weights(g, TabuList::new(4));
        let mut min_valid = f64::INFINITY;
        let mut min_violating = f64::INFINITY;
        for code in 0u64..(1 << 12) {
            let x = EdgeVars::from_code(4, code);
            let p = q.eval_penalty(&x).unwrap();
            let t = q.eval_total(&x).unwrap();
            if p == 0.0 {
                min_valid = min_valid.min(t);
            } else {
                min_violating = min_violating.min(t);
            }
        }
        assert!(min_violating >= q.m_p - q.graph.abs_weight_sum());
        assert!(min_violating > min_valid.min(0.0).abs().max(0.0) + 0.5);
        assert!(min_violating > 0.0 && min_valid <= 0.0);
    }

    #[test]
    fn ising_single_variable_identities() {
        let mut m = IsingModel { n_vars: 1, j: vec![0.0], h: vec![0.0], offset: 0.0 };
        m.add_linear(0, 3.0);
        assert_eq!(m.field(0), 1.5);
        assert_eq!(m.offset, 1.5);
        let mut m2 = IsingModel { n_vars: 2, j: vec![0.0; 4], h: vec![0.0; 2], offset: 0.0 };
        m2.add_quadratic(0, 1, 1.0);
        assert_eq!(m2.coupling(0, 1), 0.25);
        assert_eq!(m2.field(0), 0.25);
        assert_eq!(m2.field(1), 0.25);
        assert_eq!(m2.offset, 0.25);
    }

    #[test]
    fn ising_energy_matches_qubo_exhaustively() {
        let mut tabu = TabuList::new(4);
        tabu.register_pair(1, 2);
        let q = problem(tabu);
        let m = q.to_ising();
        let nv = q.n_vars();
        assert_eq!(nv, 12);
        for code in 0u64..(1 << 12) {
            let x = EdgeVars::from_code(4, code);
            let spins: Vec<i8> = (0..nv)
                .map(|k| {
                    let (i, j) = EdgeVars::edge_of_var(4, k);
                    if x.get(i, j) {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            let eq = q.eval_total(&x).unwrap();
            let ei = m.energy(&spins);
            assert!(
                (eq - ei).abs() <= 1e-9 * eq.abs().max(1.0),
                "code {code}: qubo {eq} vs ising {ei}"
            );
        }
    }

    #[test]
    fn total_is_homogeneous_in_mc_w_and_mp() {
        let g = graph3();
        let q1 = QuboProblem::new(g.clone(), TabuList::new(4), 1.0, 7.0);
        let mut g2 = MarketGraph::zeros(4);
        for i in 1..4 {
            for j in 1..4 {
                if i != j {
                    g2.set(i, j, g.get(i, j) * 3.0);
                }
            }
        }
        let q2 = QuboProblem::new(g2, TabuList::new(4), 1.0, 21.0);
        for code in [0u64, 5, 100, 4095, 2048, 1234] {
            let x = EdgeVars::from_code(4, code);
            let a = q1.eval_total(&x).unwrap();
            let b = q2.eval_total(&x).unwrap();
            assert!((b - 3.0 * a).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn dump_round_trip() {
        let g = graph3();
        let mut buf = Vec::new();
        write_graph_dump(&mut buf, &g, 1.0, 10.0).unwrap();
        let (g2, m_c, m_p) = read_graph_dump(&buf[..]).unwrap();
        assert_eq!(m_c, 1.0);
        assert_eq!(m_p, 10.0);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(g.get(i, j), g2.get(i, j));
                }
            }
        }
        let tabu = read_tabu_dump("1,2,1\n3,1,0\n".as_bytes(), 4).unwrap();
        assert!(tabu.get(1, 2));
        assert!(!tabu.get(3, 1));
    }
}
