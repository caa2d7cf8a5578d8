//! DTW similarity factors and the weighted directed market graph.
//!
//! Edge weight: w[i][j] = s[i][j] * (norm_ask[j] - norm_bid[i]) for stocks i, j >= 1.
//! Node 0 is the dummy node with zero-weight edges in both directions, so pair
//! selection becomes minimum-weight cycle search through node 0.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::feed::{PriceBook, Universe};
use crate::num::Scalar;
use crate::Real;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("empty price sequence")]
    EmptySequence,
    #[error("missing or uneven history for stock index {0}")]
    MissingHistory(usize),
    #[error("stock index {0} has never been quoted")]
    IncompleteBook(usize),
    #[error("malformed similarity record: {0}")]
    MalformedSimilarity(String),
    #[error("similarity entry for unknown code pair {0:?}")]
    UnknownCode(String),
    #[error("similarity file does not cover pair ({0},{1})")]
    MissingPair(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Classic DTW with |a-b| local cost, steps {match, insert, delete}, no band.
pub fn dtw_distance<S: Scalar>(a: &[S], b: &[S]) -> Result<S, GraphError> {
    if a.is_empty() || b.is_empty() {
        return Err(GraphError::EmptySequence);
    }
    let m = b.len();
    let mut prev = vec![S::infinity(); m + 1];
    let mut cur = vec![S::infinity(); m + 1];
    prev[0] = S::zero();
    for &av in a {
        cur[0] = S::infinity();
        for j in 1..=m {
            let cost = (av - b[j - 1]).abs();
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Pairwise similarity factors in [0,1]; diagonal unused. Indexed by stock id 1..=N.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix<S> {
    n: usize,
    s: Vec<S>,
}

impl<S: Scalar> SimilarityMatrix<S> {
    pub fn new(n: usize) -> SimilarityMatrix<S> {
        SimilarityMatrix { n, s: vec![S::zero(); n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.s[(i - 1) * self.n + (j - 1)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.s[(i - 1) * self.n + (j - 1)] = v;
        self.s[(j - 1) * self.n + (i - 1)] = v;
    }

    /// Load the daily similarity file: CSV with header `code_i,code_j,s`,
    /// one row per unordered pair.
    pub fn from_reader<R: BufRead>(r: R, universe: &Universe) -> Result<SimilarityMatrix<S>, GraphError> {
        let n = universe.n();
        let mut sim = SimilarityMatrix::new(n);
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || (lineno == 0 && t.starts_with("code_i")) {
                continue;
            }
            let f: Vec<&str> = t.split(',').collect();
            if f.len() != 3 {
                return Err(GraphError::MalformedSimilarity(line.clone()));
            }
            let i = universe
                .index_of(f[0].trim())
                .ok_or_else(|| GraphError::UnknownCode(line.clone()))?;
            let j = universe
                .index_of(f[1].trim())
                .ok_or_else(|| GraphError::UnknownCode(line.clone()))?;
            let v: f64 = f[2]
                .trim()
                .parse()
                .map_err(|_| GraphError::MalformedSimilarity(line.clone()))?;
            if !(0.0..=1.0).contains(&v) || i == j {
                return Err(GraphError::MalformedSimilarity(line.clone()));
            }
            sim.set(i, j, S::from_f64(v).unwrap());
            seen.insert((i.min(j), i.max(j)), ());
        }
        for i in 1..=n {
            for j in (i + 1)..=n {
                if !seen.contains_key(&(i, j)) {
                    return Err(GraphError::MissingPair(i, j));
                }
            }
        }
        Ok(sim)
    }

    pub fn write<W: Write>(&self, w: &mut W, universe: &Universe) -> Result<(), GraphError> {
        writeln!(w, "code_i,code_j,s")?;
        for i in 1..=self.n {
            for j in (i + 1)..=self.n {
                writeln!(w, "{},{},{}", universe.code(i), universe.code(j), self.get(i, j).to_f64().unwrap())?;
            }
        }
        Ok(())
    }
}

/// Build similarity factors from per-stock daily price sequences.
///
/// d̄[i][j] is the mean DTW distance over the days; s = 1 - d̄ / max d̄, so the
/// closest pair gets similarity near 1 and the most distant pair exactly 0.
pub fn build_similarity<S: Scalar>(histories: &[Vec<Vec<S>>]) -> Result<SimilarityMatrix<S>, GraphError> {
    let n = histories.len();
    let days = histories.first().map(|h| h.len()).unwrap_or(0);
    for (k, h) in histories.iter().enumerate() {
        if h.is_empty() || h.len() != days {
            return Err(GraphError::MissingHistory(k + 1));
        }
        if h.iter().any(|seq| seq.is_empty()) {
            return Err(GraphError::MissingHistory(k + 1));
        }
    }
    let mut dbar = vec![S::zero(); n * n];
    let mut dmax = S::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = S::zero();
            for d in 0..days {
                acc = acc + dtw_distance(&histories[i][d], &histories[j][d])?;
            }
            let mean = acc / S::from_usize(days).unwrap();
            dbar[i * n + j] = mean;
            dbar[j * n + i] = mean;
            dmax = dmax.max(mean);
        }
    }
    let mut sim = SimilarityMatrix::new(n);
    for i in 1..=n {
        for j in (i + 1)..=n {
            let s = if dmax > S::zero() {
                S::one() - dbar[(i - 1) * n + (j - 1)] / dmax
            } else {
                S::one()
            };
            sim.set(i, j, s);
        }
    }
    Ok(sim)
}

/// (N+1)-node directed weighted graph; node 0 is the dummy.
#[derive(Debug, Clone)]
pub struct MarketGraph<S> {
    n_nodes: usize,
    w: Vec<S>,
}

impl<S: Scalar> MarketGraph<S> {
    pub fn zeros(n_nodes: usize) -> MarketGraph<S> {
        MarketGraph { n_nodes, w: vec![S::zero(); n_nodes * n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_stocks(&self) -> usize {
        self.n_nodes - 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.w[i * self.n_nodes + j]
    }

    /// Dummy edges stay zero; setting them is ignored.
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        if i == 0 || j == 0 || i == j {
            return;
        }
        self.w[i * self.n_nodes + j] = v;
    }

    pub fn abs_weight_sum(&self) -> S {
        self.w.iter().map(|v| v.abs()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> MarketGraph<T> {
        MarketGraph {
            n_nodes: self.n_nodes,
            w: self.w.iter().map(|&v| crate::num::cast::<S, T>(v)).collect(),
        }
    }
}

/// Eq.-(1)-style weights from the latest book snapshot and similarity factors.
pub fn build_graph(book: &PriceBook, sim: &SimilarityMatrix<Real>) -> Result<MarketGraph<Real>, GraphError> {
    let n = book.n();
    assert_eq!(sim.n(), n, "similarity size does not match the universe");
    let mut g = MarketGraph::zeros(n + 1);
    for i in 1..=n {
        book.quote(i).ok_or(GraphError::IncompleteBook(i))?;
    }
    for i in 1..=n {
        let bid_i = book.quote(i).unwrap().norm_bid;
        for j in 1..=n {
            if i == j {
                continue;
            }
            let ask_j = book.quote(j).unwrap().norm_ask;
            g.set(i, j, sim.get(i, j) * (ask_j - bid_i));
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decimal::Price;
    use crate::feed::{parse_feed, Universe};

    #[test]
    fn dtw_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_hand_evaluated_table() {
        // 2x2 DP table for [0,0] vs [1,1]: every alignment costs 1 per matched cell,
        // the diagonal path visits two cells.
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn dtw_single_elements() {
        assert_eq!(dtw_distance(&[3.5], &[1.0]).unwrap(), 2.5);
    }

    #[test]
    fn dtw_rejects_empty() {
        assert!(matches!(dtw_distance::<f64>(&[], &[1.0]), Err(GraphError::EmptySequence)));
    }

    #[test]
    fn dtw_is_symmetric_and_nonnegative() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let b = [2.0, 2.0, 4.0];
        let d1 = dtw_distance(&a, &b).unwrap();
        let d2 = dtw_distance(&b, &a).unwrap();
        assert_eq!(d1, d2);
        assert!(d1 >= 0.0);
    }

    /// Brute-force DTW over all monotone warping paths, for small inputs.
    fn dtw_oracle(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let c = (a[i] - b[j]).abs();
            if i == a.len() - 1 && j == b.len() - 1 {
                return c;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            c + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn dtw_matches_exhaustive_path_oracle() {
        let seqs: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 4.0, 3.0],
            vec![2.0, 2.5, 3.0],
            vec![0.5, 4.0, 4.0, 1.0, 2.0],
        ];
        for a in &seqs {
            for b in &seqs {
                let dp = dtw_distance(a, b).unwrap();
                let brute = dtw_oracle(a, b);
                assert!((dp - brute).abs() < 1e-12, "{dp} vs {brute}");
            }
        }
    }

    #[test]
    fn similarity_identical_histories_all_one() {
        let day = vec![vec![1.0, 2.0, 3.0]];
        let sim = build_similarity(&[day.clone(), day.clone(), day]).unwrap();
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    assert_eq!(sim.get(i, j), 1.0);
                }
            }
        }
    }

    #[test]
    fn similarity_max_distance_pair_is_zero() {
        let h = vec![
            vec![vec![0.0, 0.0]],
            vec![vec![0.1, 0.1]],
            vec![vec![5.0, 5.0]],
        ];
        let sim = build_similarity(&h).unwrap();
        // pair (1,3) attains the max average distance
        assert_eq!(sim.get(1, 3), 0.0);
        assert!(sim.get(1, 2) > 0.9);
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    let s = sim.get(i, j);
                    assert!((0.0..=1.0).contains(&s));
                    assert_eq!(s, sim.get(j, i));
                }
            }
        }
    }

    #[test]
    fn similarity_matches_hand_dp_on_two_day_histories() {
        // 3 stocks, 2 days; distances computed with the path-enumeration oracle.
        let h = vec![
            vec![vec![1.0, 2.0], vec![1.0, 1.0]],
            vec![vec![1.5, 2.5], vec![1.0, 2.0]],
            vec![vec![4.0, 4.0], vec![3.0, 5.0]],
        ];
        let sim = build_similarity(&h).unwrap();
        let mut dbar = [[0.0f64; 3]; 3];
        let mut dmax = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let d = (dtw_oracle(&h[i][0], &h[j][0]) + dtw_oracle(&h[i][1], &h[j][1])) / 2.0;
                dbar[i][j] = d;
                dmax = dmax.max(d);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let expect = 1.0 - dbar[i][j] / dmax;
                    assert!((sim.get(i + 1, j + 1) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn similarity_uneven_histories_rejected() {
        let h = vec![vec![vec![1.0]], vec![]];
        assert!(matches!(build_similarity(&h), Err(GraphError::MissingHistory(2))));
    }

    fn quoted_book(quotes: &[(&str, i64, i64)]) -> (Universe, PriceBook) {
        let u = Universe::new(
            quotes
                .iter()
                .map(|(c, _, _)| (c.to_string(), 100, Price::from_units(1000)))
                .collect(),
        )
        .unwrap();
        let mut book = PriceBook::new(&u);
        for (c, b, a) in quotes {
            book.apply_event(&u, &parse_feed(&format!("1,{c},{b},{a},Q")).unwrap()).unwrap();
        }
        (u, book)
    }

    #[test]
    fn graph_weight_substitution() {
        let (_u, book) = quoted_book(&[("A", 1010, 1012), ("B", 988, 990)]);
        let mut sim = SimilarityMatrix::new(2);
        sim.set(1, 2, 0.8);
        let g = build_graph(&book, &sim).unwrap();
        // s=0.8, norm_ask_B=0.99, norm_bid_A=1.01 -> w = -0.016
        assert!((g.get(1, 2) - (-0.016)).abs() < 1e-12);
        // dummy edges are zero
        for k in 0..=2 {
            assert_eq!(g.get(0, k), 0.0);
            assert_eq!(g.get(k, 0), 0.0);
        }
    }

    #[test]
    fn graph_zero_similarity_kills_edge() {
        let (_u, book) = quoted_book(&[("A", 1010, 1012), ("B", 988, 990)]);
        let sim = SimilarityMatrix::new(2); // all zero
        let g = build_graph(&book, &sim).unwrap();
        assert_eq!(g.get(1, 2), 0.0);
        assert_eq!(g.get(2, 1), 0.0);
    }

    #[test]
    fn incomplete_book_is_an_error() {
        let u = Universe::new(vec![
            ("A".into(), 100, Price::from_units(1000)),
            ("B".into(), 100, Price::from_units(1000)),
        ])
        .unwrap();
        let mut book = PriceBook::new(&u);
        book.apply_event(&u, &parse_feed("1,A,990,991,Q").unwrap()).unwrap();
        let sim = SimilarityMatrix::new(2);
        assert!(matches!(build_graph(&book, &sim), Err(GraphError::IncompleteBook(2))));
    }

    #[test]
    fn bypass_exceeds_direct_by_transit_spread_when_similarity_is_one() {
        let (_u, book) = quoted_book(&[("A", 1000, 1002), ("B", 995, 998), ("C", 990, 991)]);
        let mut sim = SimilarityMatrix::new(3);
        for i in 1..=3 {
            for j in (i + 1)..=3 {
                sim.set(i, j, 1.0);
            }
        }
        let g = build_graph(&book, &sim).unwrap();
        for (a, c, b) in [(1, 3, 2), (2, 1, 3), (3, 2, 1)] {
            let bypass = g.get(a, c) + g.get(c, b);
            let direct = g.get(a, b);
            let qc = book.quote(c).unwrap();
            let spread = qc.norm_ask - qc.norm_bid;
            assert!((bypass - direct - spread).abs() < 1e-12);
            assert!(bypass >= direct);
        }
    }
}
