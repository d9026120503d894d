//! Weighted undirected graphs, their Laplacians and spanning trees.
//!
//! Vertices are `0..n` in code and `1..=n` in files. Each edge keeps the
//! orientation it was given, which fixes the sign of its incidence vector
//! `b_e = e_u - e_v` but is otherwise irrelevant.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::par;

/// Dense pseudo-inverses are only attempted up to this many vertices.
pub const DENSE_VERTEX_CAP: usize = 2000;

/// Default cap on explicitly enumerated spanning trees.
pub const TREE_ENUMERATION_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        self.components -= 1;
        true
    }
}

impl Clone for UnionFind {
    fn clone(&self) -> Self {
        UnionFind {
            parent: self.parent.clone(),
            components: self.components,
        }
    }
}

impl WeightedGraph {
    /// Validates weights and endpoints and requires the graph to be connected.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {} has an endpoint outside 1..={n}",
                    i + 1
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("edge {} is a self-loop", i + 1)));
            }
            if !(e.w > 0.0 && e.w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} has non-positive weight {}",
                    i + 1,
                    e.w
                )));
            }
        }
        let g = WeightedGraph { n, edges };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Builds from 0-based `(u, v, w)` triples.
    pub fn from_triples(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(n, triples.iter().map(|&(u, v, w)| Edge { u, v, w }).collect())
    }

    /// Unweighted complete graph `K_n`.
    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push(Edge { u, v, w: 1.0 });
            }
        }
        Self::new(n, edges)
    }

    /// First connected sample of `G(n, p)` among the seeded attempts.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
        }
        for attempt in 0..1000 {
            let mut rng = par::stream_rng(seed, attempt);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(p) {
                        edges.push(Edge { u, v, w: 1.0 });
                    }
                }
            }
            match Self::new(n, edges) {
                Ok(g) => return Ok(g),
                Err(Error::Disconnected) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Disconnected)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        uf.components == 1
    }

    /// Parses the `n m` header followed by `m` lines `u v w` (1-based).
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse(format!("line {hline}: expected header `n m`")));
        }
        let n: usize = parse_field(head[0], hline)?;
        let m: usize = parse_field(head[1], hline)?;
        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {ln}: expected `u v w`")));
            }
            let u: usize = parse_field(f[0], ln)?;
            let v: usize = parse_field(f[1], ln)?;
            let w: f64 = parse_field(f[2], ln)?;
            if u == 0 || v == 0 {
                return Err(Error::Parse(format!("line {ln}: vertices are 1-based")));
            }
            edges.push(Edge { u: u - 1, v: v - 1, w });
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Self::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.m());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u + 1, e.v + 1, e.w);
        }
        s
    }

    /// `Σ_{e} weight(e) b_e b_eᵀ` over the listed edge indices.
    pub fn laplacian_of(&self, edges: impl IntoIterator<Item = (usize, f64)>) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for (i, w) in edges {
            let Edge { u, v, .. } = self.edges[i];
            l[(u, u)] += w;
            l[(v, v)] += w;
            l[(u, v)] -= w;
            l[(v, u)] -= w;
        }
        l
    }

    pub fn laplacian(&self) -> Matrix {
        self.laplacian_of(self.edges.iter().enumerate().map(|(i, e)| (i, e.w)))
    }

    /// Number of spanning trees by the matrix-tree theorem.
    pub fn spanning_tree_count(&self) -> f64 {
        if self.n == 1 {
            return 1.0;
        }
        let unit = self.laplacian_of((0..self.m()).map(|i| (i, 1.0)));
        let reduced = unit.view((1, 1), (self.n - 1, self.n - 1)).into_owned();
        reduced.determinant().round()
    }

    /// All spanning trees as sorted edge-index lists, in the order of the
    /// include-first deletion-contraction recursion.
    pub fn spanning_trees(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        let count = self.spanning_tree_count();
        if count > cap as f64 {
            return Err(Error::TooManyTrees { count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut chosen = Vec::with_capacity(self.n.saturating_sub(1));
        self.grow(0, UnionFind::new(self.n), &mut chosen, &mut out);
        Ok(out)
    }

    fn grow(&self, next: usize, uf: UnionFind, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if uf.components == 1 {
            out.push(chosen.clone());
            return;
        }
        if next == self.m() {
            return;
        }
        let Edge { u, v, .. } = self.edges[next];
        // Contract: take the edge unless it closes a cycle.
        let mut with = uf.clone();
        if with.union(u, v) {
            chosen.push(next);
            self.grow(next + 1, with, chosen, out);
            chosen.pop();
        }
        // Delete: only worthwhile if the remaining edges can still span.
        let mut reach = uf.clone();
        for e in &self.edges[next + 1..] {
            reach.union(e.u, e.v);
        }
        if reach.components == 1 {
            self.grow(next + 1, uf, chosen, out);
        }
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse `{s}`")))
}

/// The Laplacian of a connected graph with its pseudo-inverse and the
/// pseudo-inverse square root.
///
/// Since `J/n` projects onto the kernel of `L`, `L + J/n` is invertible and
/// `L† = (L + J/n)⁻¹ - J/n`; the same trick gives `(L†)^{1/2}`.
#[derive(Clone, Debug)]
pub struct LaplacianView {
    pub laplacian: Matrix,
    pub pinv: Matrix,
    pub pinv_sqrt: Matrix,
}

impl LaplacianView {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        let n = g.n();
        if n > DENSE_VERTEX_CAP {
            return Err(Error::GroundSetTooLarge {
                n,
                cap: DENSE_VERTEX_CAP,
            });
        }
        let laplacian = g.laplacian();
        let j = Matrix::from_element(n, n, 1.0 / n as f64);
        let shifted = &laplacian + &j;
        if linalg::lambda_min(&shifted) <= 1e-12 {
            return Err(Error::Disconnected);
        }
        let pinv = linalg::map_spectrum(&shifted, |x| 1.0 / x) - &j;
        let pinv_sqrt = linalg::map_spectrum(&shifted, |x| 1.0 / x.sqrt()) - &j;
        Ok(LaplacianView {
            laplacian,
            pinv,
            pinv_sqrt,
        })
    }

    /// `b_{uv}ᵀ L† b_{uv}`.
    pub fn effective_resistance(&self, u: usize, v: usize) -> f64 {
        let p = &self.pinv;
        p[(u, u)] + p[(v, v)] - 2.0 * p[(u, v)]
    }
}

pub fn effective_resistance(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    if u >= g.n() || v >= g.n() {
        return Err(Error::InvalidParameter(format!("vertex outside 1..={}", g.n())));
    }
    if u == v {
        return Err(Error::InvalidParameter("effective resistance needs u != v".into()));
    }
    Ok(LaplacianView::new(g)?.effective_resistance(u, v))
}

/// `l_e = w(e)·R_eff(u, v)` for every edge, in edge order.
pub fn leverage_scores(g: &WeightedGraph) -> Result<Vec<f64>> {
    let view = LaplacianView::new(g)?;
    Ok(leverage_from(g, &view))
}

pub(crate) fn leverage_from(g: &WeightedGraph, view: &LaplacianView) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|e| e.w * view.effective_resistance(e.u, e.v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_triples(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(
            WeightedGraph::from_triples(3, &[(0, 1, 1.0)]),
            Err(Error::Disconnected)
        ));
        assert!(WeightedGraph::from_triples(2, &[(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_triples(2, &[(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_triples(2, &[(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = WeightedGraph::parse("3 3\n1 2 1\n1 3 2.5\n\n# note\n2 3 1\n").unwrap();
        assert_eq!(g.edges()[1], Edge { u: 0, v: 2, w: 2.5 });
        assert_eq!(WeightedGraph::parse(&g.to_text()).unwrap(), g);
        assert!(WeightedGraph::parse("3 2\n1 2 1\n").is_err());
        assert!(WeightedGraph::parse("2 1\n0 1 1\n").is_err());
        assert!(WeightedGraph::parse("2 1\n1 2 x\n").is_err());
    }

    #[test]
    fn laplacian_kernel_and_pinv() {
        let g = WeightedGraph::erdos_renyi(7, 0.5, 3).unwrap();
        let view = LaplacianView::new(&g).unwrap();
        let ones = Matrix::from_element(7, 1, 1.0);
        assert!((&view.laplacian * &ones).amax() < 1e-12);
        let proj = linalg::identity(7) - Matrix::from_element(7, 7, 1.0 / 7.0);
        assert!((&view.laplacian * &view.pinv - &proj).amax() < 1e-10);
        assert!((&view.pinv_sqrt * &view.pinv_sqrt - &view.pinv).amax() < 1e-10);
    }

    #[test]
    fn effective_resistance_examples() {
        let g = triangle();
        assert!((effective_resistance(&g, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let single = WeightedGraph::from_triples(2, &[(0, 1, 4.0)]).unwrap();
        assert!((effective_resistance(&single, 0, 1).unwrap() - 0.25).abs() < 1e-12);
        let path = WeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!((effective_resistance(&path, 0, 2).unwrap() - 2.0).abs() < 1e-12);
        assert!(effective_resistance(&g, 1, 1).is_err());
    }

    #[test]
    fn leverage_score_examples() {
        for l in leverage_scores(&triangle()).unwrap() {
            assert!((l - 2.0 / 3.0).abs() < 1e-12);
        }
        let star = WeightedGraph::from_triples(4, &[(0, 1, 2.0), (0, 2, 1.0), (0, 3, 0.5)]).unwrap();
        for l in leverage_scores(&star).unwrap() {
            assert!((l - 1.0).abs() < 1e-12);
        }
        let k8 = WeightedGraph::complete(8).unwrap();
        let ls = leverage_scores(&k8).unwrap();
        assert!(ls.iter().all(|l| (l - 0.25).abs() < 1e-12));
        assert!((ls.iter().sum::<f64>() - 7.0).abs() < 1e-8);
    }

    #[test]
    fn tree_counts_match_cayley() {
        for n in 1..=6 {
            let g = WeightedGraph::complete(n).unwrap();
            let cayley = (n as f64).powi(n as i32 - 2);
            assert_eq!(g.spanning_tree_count(), cayley.round());
            assert_eq!(g.spanning_trees(10_000).unwrap().len() as f64, cayley.round());
        }
        let k8 = WeightedGraph::complete(8).unwrap();
        assert_eq!(k8.spanning_tree_count(), 262_144.0);
        assert!(matches!(k8.spanning_trees(10_000), Err(Error::TooManyTrees { .. })));
    }

    #[test]
    fn enumerated_trees_are_spanning_and_distinct() {
        let g = WeightedGraph::erdos_renyi(6, 0.6, 11).unwrap();
        let trees = g.spanning_trees(10_000).unwrap();
        let mut seen = std::collections::HashSet::new();
        for t in &trees {
            assert_eq!(t.len(), 5);
            let mut uf = UnionFind::new(6);
            for &i in t {
                assert!(uf.union(g.edges()[i].u, g.edges()[i].v));
            }
            assert!(seen.insert(t.clone()));
        }
        assert_eq!(trees.len() as f64, g.spanning_tree_count());
    }
}
