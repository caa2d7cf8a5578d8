//! Decode an edge-variable assignment into a cyclic path and evaluate it against
//! the opening threshold.
//!
//! The penalty function leaves two shapes unpunished that are still not tradable:
//! a cycle avoiding the dummy node and split cycles. Both are rejected here, as is
//! the empty assignment.

use crate::marketgraph::MarketGraph;
use crate::num::Scalar;
use crate::qubo::{EdgeVars, TabuList};
use crate::Real;

/// Why an assignment does not encode a single tradable cycle through the dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Empty,
    DegreeViolation,
    FlowImbalance,
    OppositeEdge,
    NoDummyCycle,
    SplitCycles,
}

impl Violation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Violation::Empty => "empty",
            Violation::DegreeViolation => "degree-violation",
            Violation::FlowImbalance => "flow-imbalance",
            Violation::OppositeEdge => "opposite-edge",
            Violation::NoDummyCycle => "no-dummy-cycle",
            Violation::SplitCycles => "split-cycles",
        }
    }
}

/// A simple directed cycle 0 -> v1 -> ... -> vk -> 0. The first interior node is
/// the short side of the pair, the last the long side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclePath {
    interior: Vec<usize>,
}

impl CyclePath {
    pub fn new(interior: Vec<usize>) -> CyclePath {
        assert!(interior.len() >= 2);
        CyclePath { interior }
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn short(&self) -> usize {
        self.interior[0]
    }

    pub fn long(&self) -> usize {
        *self.interior.last().unwrap()
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.short(), self.long())
    }

    /// Weight sum along the cycle; the dummy edges contribute zero.
    pub fn weight_sum<S: Scalar>(&self, graph: &MarketGraph<S>) -> S {
        let mut acc = S::zero();
        for w in self.interior.windows(2) {
            acc = acc + graph.get(w[0], w[1]);
        }
        acc
    }

    pub fn to_edge_vars(&self, n_nodes: usize) -> EdgeVars {
        let mut x = EdgeVars::new(n_nodes);
        x.set(0, self.interior[0], true);
        for w in self.interior.windows(2) {
            x.set(w[0], w[1], true);
        }
        x.set(*self.interior.last().unwrap(), 0, true);
        x
    }

    /// `0>a>c>b>0` notation with a formatter for node labels.
    pub fn notation<F: Fn(usize) -> String>(&self, label: F) -> String {
        let mut s = String::from("0");
        for &v in &self.interior {
            s.push('>');
            s.push_str(&label(v));
        }
        s.push_str(">0");
        s
    }
}

/// Succeeds iff the edges form exactly one simple directed cycle including node 0.
pub fn decode(x: &EdgeVars) -> Result<CyclePath, Violation> {
    let n = x.n_nodes();
    let edges = x.edges();
    if edges.is_empty() {
        return Err(Violation::Empty);
    }
    let mut next: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if x.out_degree(i) > 1 || x.in_degree(i) > 1 {
            return Err(Violation::DegreeViolation);
        }
    }
    for i in 0..n {
        if x.out_degree(i) != x.in_degree(i) {
            return Err(Violation::FlowImbalance);
        }
    }
    for &(i, j) in &edges {
        next[i] = Some(j);
    }
    // degrees <= 1 and balanced: the edge set is a disjoint union of simple cycles
    let mut visited = vec![false; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if visited[start] || next[start].is_none() {
            continue;
        }
        let mut cyc = vec![start];
        visited[start] = true;
        let mut cur = next[start].unwrap();
        while cur != start {
            visited[cur] = true;
            cyc.push(cur);
            cur = next[cur].unwrap();
        }
        cycles.push(cyc);
    }
    if cycles.len() > 1 {
        return Err(Violation::SplitCycles);
    }
    let cyc = cycles.pop().expect("edges nonempty implies a cycle");
    if cyc.len() == 2 {
        return Err(Violation::OppositeEdge);
    }
    let Some(pos0) = cyc.iter().position(|&v| v == 0) else {
        return Err(Violation::NoDummyCycle);
    };
    let interior: Vec<usize> = cyc[pos0 + 1..].iter().chain(cyc[..pos0].iter()).copied().collect();
    Ok(CyclePath::new(interior))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Tradable { weight_sum: Real },
    BelowThreshold { weight_sum: Real },
}

impl Verdict {
    pub fn weight_sum(&self) -> Real {
        match *self {
            Verdict::Tradable { weight_sum } | Verdict::BelowThreshold { weight_sum } => weight_sum,
        }
    }

    pub fn is_tradable(&self) -> bool {
        matches!(self, Verdict::Tradable { .. })
    }
}

/// Tradable iff the weight sum meets the (negative) threshold and the pair is not
/// in the tabu list.
pub fn evaluate(
    path: &CyclePath,
    graph: &MarketGraph<Real>,
    tabu: &TabuList,
    threshold: Real,
) -> Verdict {
    let weight_sum = path.weight_sum(graph);
    let (short, long) = path.pair();
    if weight_sum <= threshold && !tabu.is_pair_tabu(short, long) {
        Verdict::Tradable { weight_sum }
    } else {
        Verdict::BelowThreshold { weight_sum }
    }
}
