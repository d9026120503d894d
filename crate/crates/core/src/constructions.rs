//! Fixture generators and the checks built on them.

use rand::Rng;

use crate::distribution::{ConditioningSpec, Distribution, OutcomeMask};
use crate::error::{Error, Result};
use crate::graph::{WeightedGraph, TREE_ENUMERATION_CAP};
use crate::influence::{
    feasible_specs, linf_parameter, one_sided_influence, two_sided_influence, InfluenceKind, LinfOptions,
    DEFAULT_MAX_GROUND_SET,
};
use crate::sparsify::tree_probabilities;

/// Entry-wise tolerance of the reflection identity on homogenizations.
pub const REFLECTION_TOL: f64 = 1e-12;

fn quiet() -> LinfOptions {
    LinfOptions {
        keep_rows: false,
        ..Default::default()
    }
}

/// All `k`-subsets of `0..n` as masks, in increasing mask order.
pub fn k_subsets(n: usize, k: usize) -> Vec<OutcomeMask> {
    let mut out = Vec::new();
    if k > n || n >= 64 {
        return out;
    }
    if k == 0 {
        return vec![OutcomeMask::EMPTY];
    }
    // Gosper's hack walks the fixed-popcount masks in increasing order.
    let mut x: u64 = (1 << k) - 1;
    let limit = 1u64 << n;
    while x < limit {
        out.push(OutcomeMask::new(x, n).expect("below 2^n"));
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

/// Uniform over `{S ∪ {n} : S ≠ {0..k-1}} ∪ {{0..k-1} ∪ {k}}` on `0..=n`,
/// with `S` ranging over the `k`-subsets of `0..n`.
pub fn build_counterexample(n: usize, k: usize) -> Result<Distribution> {
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    let ground = n + 1;
    if ground > DEFAULT_MAX_GROUND_SET {
        return Err(Error::GroundSetTooLarge {
            n: ground,
            cap: DEFAULT_MAX_GROUND_SET,
        });
    }
    let first = OutcomeMask::full(k);
    let outcomes = k_subsets(n, k).into_iter().map(|s| {
        let extra = if s == first { k } else { n };
        (s.with(extra), 1.0)
    });
    Distribution::new(ground, outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperBoundCheck {
    /// `2(n-k)/k + 1`.
    pub bound: f64,
    /// One-sided ℓ∞ parameter, diagonal included.
    pub measured: f64,
    /// The same maximum with the diagonal entries left out.
    pub measured_offdiag: f64,
    pub ok: bool,
}

/// One-sided parameter of the counterexample against `2(n-k)/k + 1`.
pub fn verify_upper_bound(n: usize, k: usize) -> Result<UpperBoundCheck> {
    let mu = build_counterexample(n, k)?;
    let report = linf_parameter(&mu, InfluenceKind::OneSided, &quiet())?;
    let bound = 2.0 * (n - k) as f64 / k as f64 + 1.0;
    Ok(UpperBoundCheck {
        bound,
        measured: report.d_inf,
        measured_offdiag: report.d_inf_offdiag,
        ok: report.d_inf <= bound + 1e-9,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundCheck {
    /// `2k(n-k)/n`.
    pub lower: f64,
    /// Largest two-sided row sum with nothing pinned.
    pub measured: f64,
    pub ok: bool,
}

pub fn verify_lower_bound(n: usize, k: usize) -> Result<LowerBoundCheck> {
    let mu = build_counterexample(n, k)?;
    let psi = two_sided_influence(&mu, ConditioningSpec::EMPTY)?;
    let measured = (0..psi.n)
        .filter(|&i| psi.feasible_rows[i])
        .map(|i| psi.row_l1(i))
        .fold(0.0, f64::max);
    let lower = 2.0 * (k * (n - k)) as f64 / n as f64;
    Ok(LowerBoundCheck {
        lower,
        measured,
        ok: measured >= lower - 1e-9,
    })
}

/// Edge-indicator distribution of the weight-uniform spanning tree, over
/// the edges of `g` in file order.
pub fn tree_distribution(g: &WeightedGraph) -> Result<Distribution> {
    let m = g.m();
    if m > crate::distribution::MAX_GROUND_SET {
        return Err(Error::GroundSetTooLarge {
            n: m,
            cap: crate::distribution::MAX_GROUND_SET,
        });
    }
    let entries = tree_probabilities(g, TREE_ENUMERATION_CAP)?
        .into_iter()
        .map(|(t, p)| Ok((OutcomeMask::from_elements(&t, m)?, p)))
        .collect::<Result<Vec<_>>>()?;
    Distribution::new(m, entries)
}

/// Independent coordinates with `P[ξ_i = 1] = probs[i]`.
pub fn product_distribution(probs: &[f64]) -> Result<Distribution> {
    let n = probs.len();
    if n > DEFAULT_MAX_GROUND_SET {
        return Err(Error::GroundSetTooLarge {
            n,
            cap: DEFAULT_MAX_GROUND_SET,
        });
    }
    if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
    }
    let entries = (0..1u64 << n).map(|bits| {
        let w = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| if bits >> i & 1 == 1 { p } else { 1.0 - p })
            .product();
        (OutcomeMask::new(bits, n).expect("below 2^n"), w)
    });
    Distribution::new(n, entries)
}

pub fn uniform_k_subsets(n: usize, k: usize) -> Result<Distribution> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k={k} exceeds n={n}")));
    }
    Distribution::new(n, k_subsets(n, k).into_iter().map(|m| (m, 1.0)))
}

/// Random `k`-homogeneous distribution: each `k`-subset enters the support
/// with probability `density` and gets a weight uniform in `(0, 1]`. At least
/// one subset is always kept.
pub fn random_homogeneous<R: Rng + ?Sized>(n: usize, k: usize, density: f64, rng: &mut R) -> Result<Distribution> {
    let subsets = k_subsets(n, k);
    if subsets.is_empty() {
        return Err(Error::InvalidParameter(format!("no {k}-subsets of a {n}-set")));
    }
    let density = density.clamp(0.0, 1.0);
    let mut entries = Vec::new();
    for &m in &subsets {
        if rng.gen_bool(density) {
            entries.push((m, 1.0 - rng.gen::<f64>()));
        }
    }
    if entries.is_empty() {
        let pick = subsets[rng.gen_range(0..subsets.len())];
        entries.push((pick, 1.0));
    }
    Distribution::new(n, entries)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

/// One unweighted representative of every isomorphism class of connected
/// graphs on `n` vertices, `n <= 6`. The representative is the class member
/// with the smallest edge mask over lexicographically ordered vertex pairs.
pub fn small_connected_graphs(n: usize) -> Result<Vec<WeightedGraph>> {
    if n > 6 {
        return Err(Error::InvalidParameter(format!(
            "isomorphism sweep limited to 6 vertices, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut slot = vec![vec![0usize; n]; n];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        slot[u][v] = i;
        slot[v][u] = i;
    }
    let perms = permutations(n);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for bits in 0u64..1 << pairs.len() {
        let canonical = perms
            .iter()
            .map(|p| {
                pairs
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| bits >> i & 1 == 1)
                    .fold(0u64, |acc, (_, &(u, v))| acc | 1 << slot[p[u]][p[v]])
            })
            .min()
            .unwrap_or(bits);
        if !seen.insert(canonical) {
            continue;
        }
        let triples: Vec<(usize, usize, f64)> = pairs
            .iter()
            .enumerate()
            .filter(|&(i, _)| canonical >> i & 1 == 1)
            .map(|(_, &(u, v))| (u, v, 1.0))
            .collect();
        match WeightedGraph::from_triples(n, &triples) {
            Ok(g) => out.push(g),
            Err(Error::Disconnected) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogenizationCheck {
    pub two_sided_d: f64,
    pub hom_one_sided_d: f64,
    /// `max |I(r, j) + I(r, j + n)|` over every one-sided pinning of the
    /// homogenization.
    pub reflection_residual: f64,
    pub ok: bool,
}

/// Compares the one-sided parameter of the homogenization with twice the
/// two-sided parameter of `mu`, and checks that each padding coordinate
/// mirrors its original.
pub fn verify_homogenization_influence(mu: &Distribution) -> Result<HomogenizationCheck> {
    let n = mu.n();
    if 2 * n > DEFAULT_MAX_GROUND_SET {
        return Err(Error::GroundSetTooLarge {
            n: 2 * n,
            cap: DEFAULT_MAX_GROUND_SET,
        });
    }
    let hom = mu.homogenize()?;
    let two_sided_d = linf_parameter(mu, InfluenceKind::TwoSided, &quiet())?.d_inf;
    let hom_one_sided_d = linf_parameter(&hom, InfluenceKind::OneSided, &quiet())?.d_inf;
    let mut reflection_residual: f64 = 0.0;
    for spec in feasible_specs(&hom, InfluenceKind::OneSided, None) {
        let infl = one_sided_influence(&hom, spec.lambda())?;
        for r in 0..2 * n {
            for j in 0..n {
                reflection_residual = reflection_residual.max((infl.entry(r, j) + infl.entry(r, j + n)).abs());
            }
        }
    }
    Ok(HomogenizationCheck {
        two_sided_d,
        hom_one_sided_d,
        reflection_residual,
        ok: hom_one_sided_d <= 2.0 * two_sided_d + 1e-9 && reflection_residual <= REFLECTION_TOL,
    })
}
