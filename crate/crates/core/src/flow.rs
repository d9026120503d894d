//! Dinic max-flow over integer or floating capacities.

use std::collections::VecDeque;

pub trait Capacity: Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    const ZERO: Self;
    const INFINITE: Self;
    /// Residual capacities at or below this are treated as saturated.
    fn is_positive(self) -> bool;
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Capacity for i64 {
    const ZERO: i64 = 0;
    const INFINITE: i64 = i64::MAX / 4;
    fn is_positive(self) -> bool {
        self > 0
    }
}

impl Capacity for f64 {
    const ZERO: f64 = 0.0;
    const INFINITE: f64 = f64::INFINITY;
    fn is_positive(self) -> bool {
        self > 1e-15
    }
}

#[derive(Clone, Debug)]
struct Edge<C> {
    to: usize,
    cap: C,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork<C> {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge<C>>,
}

impl<C: Capacity> FlowNetwork<C> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: C) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: C::ZERO });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap.is_positive() && level[to] == usize::MAX {
                    level[to] = level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, pushed: C, level: &[usize], next: &mut [usize]) -> C {
        if u == t {
            return pushed;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap.is_positive() && level[to] == level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got.is_positive() {
                    self.edges[e].cap = self.edges[e].cap - got;
                    self.edges[e ^ 1].cap = self.edges[e ^ 1].cap + got;
                    return got;
                }
            }
            next[u] += 1;
        }
        C::ZERO
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> C {
        let mut total = C::ZERO;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let got = self.augment(s, t, C::INFINITE, &level, &mut next);
                if !got.is_positive() {
                    break;
                }
                total = total + got;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        // CLRS example, max flow 23.
        let mut g = FlowNetwork::<i64>::new(6);
        for &(u, v, c) in &[
            (0, 1, 16),
            (0, 2, 13),
            (1, 3, 12),
            (2, 1, 4),
            (2, 4, 14),
            (3, 2, 9),
            (3, 5, 20),
            (4, 3, 7),
            (4, 5, 4),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23);
    }

    #[test]
    fn float_bottleneck() {
        let mut g = FlowNetwork::<f64>::new(4);
        g.add_edge(0, 1, 0.5);
        g.add_edge(0, 2, 0.5);
        g.add_edge(1, 3, f64::INFINITY);
        g.add_edge(2, 3, 0.25);
        assert!((g.max_flow(0, 3) - 0.75).abs() < 1e-15);
    }
}
