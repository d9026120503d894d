//! Spectral sparsification by averaging reweighted random spanning trees.
//!
//! Trees are drawn from the weight-uniform distribution `P[T] ∝ Π_{e∈T} w(e)`
//! with Wilson's loop-erased random walk. Every edge of a sampled tree is
//! reweighted to `w(e)/l_e`, which makes the tree Laplacian an unbiased
//! estimate of `L_G` because `P[e ∈ T] = l_e`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::concentration::{MatrixEnsemble, OutcomeSource};
use crate::distribution::{OutcomeMask, MAX_GROUND_SET};
use crate::error::{Error, Result};
use crate::graph::{leverage_from, LaplacianView, WeightedGraph, TREE_ENUMERATION_CAP};
use crate::linalg::{self, Matrix};
use crate::par;

/// Slack on the `[1-ε, 1+ε]` window for rounding in the eigen-solve.
pub const SPECTRAL_SLACK: f64 = 1e-9;

/// Tolerance on `‖approx · 1‖` before the kernel is declared wrong.
pub const KERNEL_TOL: f64 = 1e-8;

/// Default constant in `t = ⌈C ε⁻² ln n⌉`.
pub const DEFAULT_TREE_CONSTANT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeSample {
    /// Sorted edge indices, `n - 1` of them.
    pub edges: Vec<usize>,
    /// `w(e) / l_e` for each edge in `edges`.
    pub reweights: Vec<f64>,
}

/// Wilson sampler with the leverage scores of its graph precomputed.
#[derive(Clone, Debug)]
pub struct TreeSampler {
    graph: WeightedGraph,
    view: LaplacianView,
    leverage: Vec<f64>,
    // Per vertex: incident (neighbor, edge index) and cumulative weights.
    adjacency: Vec<Vec<(usize, usize)>>,
    cumulative: Vec<Vec<f64>>,
}

impl TreeSampler {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        let view = LaplacianView::new(g)?;
        let leverage = leverage_from(g, &view);
        let mut adjacency = vec![Vec::new(); g.n()];
        let mut cumulative = vec![Vec::new(); g.n()];
        for (i, e) in g.edges().iter().enumerate() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                let prev = cumulative[a].last().copied().unwrap_or(0.0);
                adjacency[a].push((b, i));
                cumulative[a].push(prev + e.w);
            }
        }
        Ok(TreeSampler {
            graph: g.clone(),
            view,
            leverage,
            adjacency,
            cumulative,
        })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn view(&self) -> &LaplacianView {
        &self.view
    }

    pub fn leverage(&self) -> &[f64] {
        &self.leverage
    }

    fn step<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> (usize, usize) {
        let cum = &self.cumulative[u];
        let x = rng.gen::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
        self.adjacency[u][k]
    }

    /// Sorted edge indices of one weight-uniform spanning tree, rooted at
    /// vertex 0.
    pub fn sample_edges<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.graph.n();
        let mut in_tree = vec![false; n];
        let mut next = vec![(0usize, 0usize); n];
        in_tree[0] = true;
        let mut edges = Vec::with_capacity(n - 1);
        for start in 1..n {
            // The walk overwrites `next` on revisits, which erases loops.
            let mut u = start;
            while !in_tree[u] {
                next[u] = self.step(u, rng);
                u = next[u].0;
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                edges.push(next[u].1);
                u = next[u].0;
            }
        }
        edges.sort_unstable();
        edges
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TreeSample {
        let edges = self.sample_edges(rng);
        let reweights = edges
            .iter()
            .map(|&i| self.graph.edges()[i].w / self.leverage[i])
            .collect();
        TreeSample { edges, reweights }
    }

    /// `Σ_{e∈T} (w(e)/l_e) b_e b_eᵀ`.
    pub fn tree_laplacian(&self, tree: &TreeSample) -> Matrix {
        self.graph
            .laplacian_of(tree.edges.iter().copied().zip(tree.reweights.iter().copied()))
    }

    /// The sampler viewed as a random subset of edges.
    pub fn edge_source(&self) -> Result<TreeEdgeSource<'_>> {
        if self.graph.m() > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge {
                n: self.graph.m(),
                cap: MAX_GROUND_SET,
            });
        }
        Ok(TreeEdgeSource { sampler: self })
    }

    /// Normalized edge matrices `Y_e = (w(e)/l_e) Qᵀ(L†)^{1/2} b_e b_eᵀ (L†)^{1/2} Q`
    /// in dimension `n - 1`, where `Q` spans the complement of the all-ones
    /// vector. Each `Y_e` has norm 1 and `Σ_e l_e Y_e = I`.
    pub fn normalized_ensemble(&self) -> Result<MatrixEnsemble> {
        let n = self.graph.n();
        let q = linalg::ones_complement_basis(n);
        let proj = q.transpose() * &self.view.pinv_sqrt;
        let mats = self
            .graph
            .edges()
            .iter()
            .zip(&self.leverage)
            .map(|(e, &l)| {
                let mut b = Matrix::zeros(n, 1);
                b[(e.u, 0)] = 1.0;
                b[(e.v, 0)] = -1.0;
                let x = &proj * b;
                linalg::symmetrize(&(&x * x.transpose() * (e.w / l)))
            })
            .collect();
        MatrixEnsemble::new(n - 1, mats, 1.0)
    }
}

/// Tree edge indicators as an [`OutcomeSource`]: marginals are the leverage
/// scores and draws come from the Wilson sampler.
#[derive(Clone, Copy, Debug)]
pub struct TreeEdgeSource<'a> {
    sampler: &'a TreeSampler,
}

impl OutcomeSource for TreeEdgeSource<'_> {
    fn ground_size(&self) -> usize {
        self.sampler.graph.m()
    }

    fn marginal_vector(&self) -> Vec<f64> {
        self.sampler.leverage.clone()
    }

    fn exact_support(&self) -> Option<&[(OutcomeMask, f64)]> {
        None
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> OutcomeMask {
        let bits = self
            .sampler
            .sample_edges(rng)
            .into_iter()
            .fold(0u64, |acc, i| acc | (1 << i));
        OutcomeMask::new(bits, self.ground_size()).expect("edge count checked at construction")
    }
}

/// One tree from `g` with reweights; builds a fresh sampler, so prefer
/// [`TreeSampler`] for repeated draws.
pub fn sample_tree<R: Rng + ?Sized>(g: &WeightedGraph, rng: &mut R) -> Result<TreeSample> {
    Ok(TreeSampler::new(g)?.sample(rng))
}

/// `max_e |freq(e) - l_e|` over `trials` sampled trees.
pub fn edge_marginal_check(g: &WeightedGraph, trials: usize, seed: u64) -> Result<f64> {
    let sampler = TreeSampler::new(g)?;
    edge_marginal_deviation(&sampler, trials, seed)
}

pub fn edge_marginal_deviation(sampler: &TreeSampler, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let m = sampler.graph.m();
    let chunks = par::map_trial_chunks(trials, seed, |rng, len| {
        let mut counts = vec![0u64; m];
        for _ in 0..len {
            for i in sampler.sample_edges(rng) {
                counts[i] += 1;
            }
        }
        counts
    });
    let mut counts = vec![0u64; m];
    for chunk in chunks {
        for (c, x) in counts.iter_mut().zip(chunk) {
            *c += x;
        }
    }
    Ok(counts
        .iter()
        .zip(&sampler.leverage)
        .map(|(&c, &l)| (c as f64 / trials as f64 - l).abs())
        .fold(0.0, f64::max))
}

/// `⌈C ε⁻² ln n⌉`, at least 1.
pub fn tree_count(epsilon: f64, constant: f64, n: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside (0, 1]")));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::InvalidParameter(format!("constant {constant} must be positive")));
    }
    let t = (constant / (epsilon * epsilon) * (n as f64).ln()).ceil();
    Ok((t as usize).max(1))
}

#[derive(Clone, Debug)]
pub struct Sparsifier {
    /// `(1/t) Σ_j L_{T_j}` with reweighted trees.
    pub laplacian: Matrix,
    pub t: usize,
}

pub fn sparsify(g: &WeightedGraph, epsilon: f64, constant: f64, seed: u64) -> Result<Sparsifier> {
    let sampler = TreeSampler::new(g)?;
    sparsify_with(&sampler, epsilon, constant, seed)
}

/// Tree `j` uses stream `j` of `seed`, and the sum runs in tree order, so
/// the result does not depend on the worker count.
pub fn sparsify_with(sampler: &TreeSampler, epsilon: f64, constant: f64, seed: u64) -> Result<Sparsifier> {
    let t = tree_count(epsilon, constant, sampler.graph.n())?;
    let parts = par::map_range(t, |j| {
        let mut rng = par::stream_rng(seed, j as u64);
        sampler.tree_laplacian(&sampler.sample(&mut rng))
    });
    let n = sampler.graph.n();
    let mut sum = Matrix::zeros(n, n);
    for l in parts {
        sum += l;
    }
    Ok(Sparsifier {
        laplacian: sum / t as f64,
        t,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCheck {
    pub ok: bool,
    /// `max |λ - 1|` over the restricted eigenvalues.
    pub worst_error: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Eigenvalues of `(L†)^{1/2} approx (L†)^{1/2}` on the complement of the
/// all-ones vector, tested against `[1-ε, 1+ε]`.
pub fn spectral_check(g: &WeightedGraph, approx: &Matrix, epsilon: f64) -> Result<SpectralCheck> {
    spectral_check_with(&LaplacianView::new(g)?, approx, epsilon)
}

pub fn spectral_check_with(view: &LaplacianView, approx: &Matrix, epsilon: f64) -> Result<SpectralCheck> {
    let n = view.laplacian.nrows();
    if approx.nrows() != n || approx.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: approx.nrows().max(approx.ncols()),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be non-negative")));
    }
    let residual = (approx * Matrix::from_element(n, 1, 1.0)).amax();
    if residual > KERNEL_TOL {
        return Err(Error::KernelMismatch { residual });
    }
    let q = linalg::ones_complement_basis(n);
    let s = &view.pinv_sqrt;
    let restricted = q.transpose() * s * linalg::symmetrize(approx) * s * &q;
    let ev = linalg::eigenvalues(&restricted);
    let min_eigenvalue = ev.first().copied().unwrap_or(1.0);
    let max_eigenvalue = ev.last().copied().unwrap_or(1.0);
    let worst_error = (1.0 - min_eigenvalue).max(max_eigenvalue - 1.0).max(0.0);
    Ok(SpectralCheck {
        ok: worst_error <= epsilon + SPECTRAL_SLACK,
        worst_error,
        min_eigenvalue,
        max_eigenvalue,
    })
}

/// Weight-uniform probabilities of the enumerated spanning trees.
pub fn tree_probabilities(g: &WeightedGraph, cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let trees = g.spanning_trees(cap)?;
    let weights: Vec<f64> = trees
        .iter()
        .map(|t| t.iter().map(|&i| g.edges()[i].w).product())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(trees.into_iter().zip(weights).map(|(t, w)| (t, w / total)).collect())
}

/// `E[L_T]` over all spanning trees with reweights `w(e)/l_e`; equals `L_G`.
pub fn exact_tree_expectation(g: &WeightedGraph) -> Result<Matrix> {
    let sampler = TreeSampler::new(g)?;
    let mut e = Matrix::zeros(g.n(), g.n());
    for (edges, p) in tree_probabilities(g, TREE_ENUMERATION_CAP)? {
        let reweights = edges.iter().map(|&i| g.edges()[i].w / sampler.leverage[i]).collect();
        e += sampler.tree_laplacian(&TreeSample { edges, reweights }) * p;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn triangle(w: [f64; 3]) -> WeightedGraph {
        WeightedGraph::from_triples(3, &[(0, 1, w[0]), (0, 2, w[1]), (1, 2, w[2])]).unwrap()
    }

    fn frequencies(g: &WeightedGraph, trials: usize, seed: u64) -> HashMap<Vec<usize>, f64> {
        let sampler = TreeSampler::new(g).unwrap();
        let mut rng = par::stream_rng(seed, 0);
        let mut f = HashMap::new();
        for _ in 0..trials {
            *f.entry(sampler.sample_edges(&mut rng)).or_insert(0.0) += 1.0 / trials as f64;
        }
        f
    }

    #[test]
    fn tree_input_is_its_own_sample() {
        let g = WeightedGraph::from_triples(4, &[(0, 1, 2.0), (1, 2, 1.0), (1, 3, 3.0)]).unwrap();
        let mut rng = par::stream_rng(1, 0);
        let s = sample_tree(&g, &mut rng).unwrap();
        assert_eq!(s.edges, vec![0, 1, 2]);
        for (r, e) in s.reweights.iter().zip(g.edges()) {
            assert!((r - e.w).abs() < 1e-12);
        }
        assert!(edge_marginal_check(&g, 100, 1).unwrap() < 1e-12);
        let sp = sparsify(&g, 0.3, 4.0, 9).unwrap();
        assert!((sp.laplacian - g.laplacian()).amax() < 1e-10);
    }

    #[test]
    fn unweighted_triangle_trees_are_uniform() {
        let f = frequencies(&triangle([1.0; 3]), 300_000, 5);
        assert_eq!(f.len(), 3);
        for p in f.values() {
            assert!((p - 1.0 / 3.0).abs() < 0.005, "{p}");
        }
    }

    #[test]
    fn weighted_triangle_trees_follow_weight_products() {
        // Trees {a,b} and {a,c} have weight 2, {b,c} weight 1.
        let f = frequencies(&triangle([2.0, 1.0, 1.0]), 300_000, 6);
        assert!((f[&vec![0, 1]] - 0.4).abs() < 0.005);
        assert!((f[&vec![0, 2]] - 0.4).abs() < 0.005);
        assert!((f[&vec![1, 2]] - 0.2).abs() < 0.005);
    }

    #[test]
    fn wilson_matches_enumeration_on_small_graphs() {
        let trials = 300_000;
        for (k, g) in [
            WeightedGraph::from_triples(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (0, 2, 1.0)]).unwrap(),
            WeightedGraph::complete(4).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let exact = tree_probabilities(g, 16).unwrap();
            let f = frequencies(g, trials, 20 + k as u64);
            for (t, p) in exact {
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                let got = f.get(&t).copied().unwrap_or(0.0);
                assert!((got - p).abs() <= 4.0 * sigma, "{t:?}: {got} vs {p}");
            }
        }
    }

    #[test]
    fn edge_marginals_match_leverage() {
        assert!(edge_marginal_check(&triangle([1.0; 3]), 100_000, 2).unwrap() <= 0.01);
        let k8 = WeightedGraph::complete(8).unwrap();
        assert!(edge_marginal_check(&k8, 100_000, 3).unwrap() <= 0.01);
    }

    #[test]
    fn tree_counts() {
        assert_eq!(tree_count(0.5, 4.0, 8).unwrap(), 34);
        assert!(tree_count(2.0, 4.0, 8).is_err());
        assert!(tree_count(0.0, 4.0, 8).is_err());
        assert!(tree_count(0.5, 0.0, 8).is_err());
    }

    #[test]
    fn exact_expectation_is_unbiased() {
        let g = triangle([1.0; 3]);
        assert!((exact_tree_expectation(&g).unwrap() - g.laplacian()).amax() < 1e-12);
        let g = WeightedGraph::erdos_renyi(6, 0.7, 4).unwrap();
        assert!((exact_tree_expectation(&g).unwrap() - g.laplacian()).amax() < 1e-9);
    }

    #[test]
    fn spectral_check_examples() {
        let g = WeightedGraph::erdos_renyi(6, 0.6, 1).unwrap();
        let l = g.laplacian();
        let exact = spectral_check(&g, &l, 0.0).unwrap();
        assert!(exact.ok && exact.worst_error < 1e-12);
        let eps = 0.1;
        let scaled = spectral_check(&g, &(&l * (1.0 + 2.0 * eps)), eps).unwrap();
        assert!(!scaled.ok);
        assert!((scaled.worst_error - 2.0 * eps).abs() < 1e-10);
        let mut bad = l.clone();
        bad[(0, 0)] += 1.0;
        assert!(matches!(
            spectral_check(&g, &bad, eps),
            Err(Error::KernelMismatch { .. })
        ));
    }

    #[test]
    fn spectral_check_single_tree_on_triangle() {
        // Tree {1,2},{1,3} reweighted by 3/2 each. Brute force: the pencil
        // L_T x = λ L_G x on 1⊥ solved via L_G's eigenbasis.
        let g = triangle([1.0; 3]);
        let approx = g.laplacian_of([(0, 1.5), (1, 1.5)]);
        let check = spectral_check(&g, &approx, 0.5).unwrap();
        // L_G = 3I - J, so on 1⊥ the pencil is L_T / 3 with eigenvalues 1.5·{1, 3}/3.
        assert!((check.min_eigenvalue - 0.5).abs() < 1e-12);
        assert!((check.max_eigenvalue - 1.5).abs() < 1e-12);
        assert!(check.ok);
        assert!(!spectral_check(&g, &approx, 0.49).unwrap().ok);
    }

    #[test]
    fn normalized_ensemble_sums_to_identity() {
        let g = WeightedGraph::erdos_renyi(6, 0.6, 2).unwrap();
        let sampler = TreeSampler::new(&g).unwrap();
        let ens = sampler.normalized_ensemble().unwrap();
        assert_eq!(ens.d(), 5);
        let total = ens.weighted_sum(sampler.leverage());
        assert!((total - linalg::identity(5)).amax() < 1e-10);
        for y in ens.mats() {
            assert!((linalg::lambda_max(y) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sparsifier_is_deterministic() {
        let g = WeightedGraph::complete(6).unwrap();
        let a = sparsify(&g, 0.5, 4.0, 17).unwrap();
        let b = sparsify(&g, 0.5, 4.0, 17).unwrap();
        assert_eq!(a.laplacian, b.laplacian);
        assert_eq!(a.t, b.t);
    }
}
