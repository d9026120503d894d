//! One-sided and two-sided influence matrices, the l-infinity independence
//! parameters obtained by maximizing their row sums over all pinnings, and
//! average multiplicative independence.
//!
//! Conventions:
//! - A one-sided entry `(i, j)` is `P[xi_j | xi_i = 1, Λ] - P[xi_j | Λ]`
//!   whenever `{xi_i = 1} ∧ Λ` has positive mass, including `j = i`, where it
//!   equals `1 - P[xi_i | Λ]`. Row and column entries inside `Λ` are zero.
//! - A two-sided entry `(i, j)` is `P[xi_j | xi_i = 1, σ] - P[xi_j | xi_i = 0, σ]`
//!   when both events have positive mass, zero otherwise.
//! - Specs are visited by increasing `|Λ|`, then lexicographically by the
//!   sorted element list, then by assignment (0 before 1). Ties in the maximum
//!   keep the first spec and the lowest row in that order.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::distribution::{ConditioningSpec, Distribution, OutcomeMask};
use crate::error::{Error, Result};
use crate::par;

/// Default cap on the ground set for exhaustive pinning enumeration.
pub const DEFAULT_MAX_GROUND_SET: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InfluenceKind {
    OneSided,
    TwoSided,
}

impl InfluenceKind {
    pub fn label(self) -> &'static str {
        match self {
            InfluenceKind::OneSided => "one-sided",
            InfluenceKind::TwoSided => "two-sided",
        }
    }
}

/// Pairwise masses of the outcomes admitted by a spec.
///
/// `joint[i * n + j]` is the (unnormalized) mass of outcomes containing both
/// `i` and `j`; the diagonal holds single-element masses.
#[derive(Clone, Debug)]
pub(crate) struct PairStats {
    n: usize,
    total: f64,
    joint: Vec<f64>,
    without: Vec<f64>,
}

impl PairStats {
    pub(crate) fn collect(mu: &Distribution, spec: &ConditioningSpec) -> Option<PairStats> {
        let n = mu.n();
        let mut total = 0.0;
        let mut joint = vec![0.0; n * n];
        let mut without = vec![0.0; n];
        let mut any = false;
        for &(m, w) in mu.support() {
            if !spec.admits(m) {
                continue;
            }
            any = true;
            total += w;
            let elems: Vec<usize> = m.iter().collect();
            for &i in &elems {
                let row = &mut joint[i * n..(i + 1) * n];
                for &j in &elems {
                    row[j] += w;
                }
            }
            for (i, slot) in without.iter_mut().enumerate() {
                if !m.contains(i) {
                    *slot += w;
                }
            }
        }
        any.then_some(PairStats {
            n,
            total,
            joint,
            without,
        })
    }

    fn with(&self, i: usize) -> f64 {
        self.joint[i * self.n + i]
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.n + j]
    }

    pub(crate) fn marginal(&self, j: usize) -> f64 {
        self.with(j) / self.total
    }

    /// `P[xi_j = 1 | xi_v = 1]` under the spec; `v` must have positive mass.
    pub(crate) fn conditional(&self, v: usize, j: usize) -> f64 {
        self.pair(v, j) / self.with(v)
    }

    fn conditional_absent(&self, v: usize, j: usize) -> f64 {
        ((self.with(j) - self.pair(v, j)) / self.without[v]).max(0.0)
    }
}

/// An `n × n` influence matrix at one pinning.
#[derive(Clone, Debug)]
pub struct InfluenceMatrix {
    pub kind: InfluenceKind,
    pub n: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    pub spec: ConditioningSpec,
    /// Row `i` is true iff the conditioning pinning `xi_i` was feasible.
    pub feasible_rows: Vec<bool>,
}

impl InfluenceMatrix {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `Σ_j |entry(i, j)|`.
    pub fn row_l1(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x.abs()).sum()
    }

    /// Row sum with the diagonal entry left out.
    pub fn row_l1_offdiag(&self, i: usize) -> f64 {
        self.row_l1(i) - self.entry(i, i).abs()
    }

    /// The ℓ∞→ℓ∞ operator norm, i.e. the largest row ℓ1 sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row_l1(i)).fold(0.0, f64::max)
    }

    /// Largest real part among the eigenvalues. Diagnostic only.
    pub fn lambda_max(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = DMatrix::from_row_slice(self.n, self.n, &self.entries);
        m.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn one_sided(stats: &PairStats, spec: ConditioningSpec) -> InfluenceMatrix {
        let n = stats.n;
        let lambda = spec.lambda();
        let mut entries = vec![0.0; n * n];
        let mut feasible_rows = vec![false; n];
        for i in (0..n).filter(|&i| !lambda.contains(i)) {
            if stats.with(i) <= 0.0 {
                continue;
            }
            feasible_rows[i] = true;
            for j in (0..n).filter(|&j| !lambda.contains(j)) {
                entries[i * n + j] = stats.conditional(i, j) - stats.marginal(j);
            }
        }
        InfluenceMatrix {
            kind: InfluenceKind::OneSided,
            n,
            entries,
            spec,
            feasible_rows,
        }
    }

    fn two_sided(stats: &PairStats, spec: ConditioningSpec) -> InfluenceMatrix {
        let n = stats.n;
        let mut entries = vec![0.0; n * n];
        let mut feasible_rows = vec![false; n];
        for i in 0..n {
            if stats.with(i) <= 0.0 || stats.without[i] <= 0.0 {
                continue;
            }
            feasible_rows[i] = true;
            for j in 0..n {
                entries[i * n + j] = if j == i {
                    1.0
                } else {
                    stats.conditional(i, j) - stats.conditional_absent(i, j)
                };
            }
        }
        InfluenceMatrix {
            kind: InfluenceKind::TwoSided,
            n,
            entries,
            spec,
            feasible_rows,
        }
    }
}

/// One-sided influence matrix with `lambda` pinned to ones.
pub fn one_sided_influence(mu: &Distribution, lambda: OutcomeMask) -> Result<InfluenceMatrix> {
    OutcomeMask::new(lambda.bits(), mu.n())?;
    let spec = ConditioningSpec::all_ones(lambda);
    let stats = PairStats::collect(mu, &spec).ok_or(Error::InfeasibleConditioning)?;
    Ok(InfluenceMatrix::one_sided(&stats, spec))
}

/// Two-sided influence matrix at the pinning `spec`.
pub fn two_sided_influence(mu: &Distribution, spec: ConditioningSpec) -> Result<InfluenceMatrix> {
    OutcomeMask::new(spec.lambda().bits(), mu.n())?;
    let stats = PairStats::collect(mu, &spec).ok_or(Error::InfeasibleConditioning)?;
    Ok(InfluenceMatrix::two_sided(&stats, spec))
}

/// Enumeration knobs for [`linf_parameter`].
#[derive(Clone, Debug)]
pub struct LinfOptions {
    /// Largest `|Λ|` visited; `None` visits all sizes.
    pub max_lambda: Option<usize>,
    /// Keep one [`RowRecord`] per feasible row of every visited spec.
    pub keep_rows: bool,
    pub max_ground_set: usize,
}

impl Default for LinfOptions {
    fn default() -> Self {
        LinfOptions {
            max_lambda: None,
            keep_rows: true,
            max_ground_set: DEFAULT_MAX_GROUND_SET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RowRecord {
    pub spec: ConditioningSpec,
    pub row: usize,
    pub l1: f64,
    pub l1_offdiag: f64,
}

/// Result of maximizing influence row sums over every feasible pinning.
#[derive(Clone, Debug)]
pub struct LinfReport {
    pub kind: InfluenceKind,
    /// Largest row ℓ1 sum, diagonal included.
    pub d_inf: f64,
    /// Largest row ℓ1 sum with diagonal entries excluded.
    pub d_inf_offdiag: f64,
    pub argmax_spec: ConditioningSpec,
    pub argmax_row: usize,
    /// Average multiplicative independence parameter, one-sided homogeneous
    /// inputs only.
    pub d_am: Option<f64>,
    pub specs_visited: usize,
    pub rows: Vec<RowRecord>,
}

/// All feasible pinnings in canonical order.
pub fn feasible_specs(
    mu: &Distribution,
    kind: InfluenceKind,
    max_lambda: Option<usize>,
) -> Vec<ConditioningSpec> {
    let n = mu.n();
    let max_lambda = max_lambda.unwrap_or(n).min(n);
    let masks: Vec<OutcomeMask> = mu.support().iter().map(|&(m, _)| m).collect();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, ConditioningSpec, Vec<OutcomeMask>)> =
        vec![(0, ConditioningSpec::EMPTY, masks)];
    // Depth-first over elements; a branch dies as soon as no outcome survives.
    while let Some((next, spec, alive)) = stack.pop() {
        out.push(spec);
        if spec.lambda().len() == max_lambda {
            continue;
        }
        for i in next..n {
            let values: &[bool] = match kind {
                InfluenceKind::OneSided => &[true],
                InfluenceKind::TwoSided => &[false, true],
            };
            for &v in values {
                let kept: Vec<OutcomeMask> =
                    alive.iter().copied().filter(|m| m.contains(i) == v).collect();
                if !kept.is_empty() {
                    stack.push((i + 1, spec.pin(i, v), kept));
                }
            }
        }
    }
    out.sort_by(canonical_order);
    out
}

fn canonical_order(a: &ConditioningSpec, b: &ConditioningSpec) -> Ordering {
    a.lambda()
        .len()
        .cmp(&b.lambda().len())
        .then_with(|| a.lambda().iter().cmp(b.lambda().iter()))
        .then_with(|| {
            let va = a.lambda().iter().map(|i| a.ones().contains(i));
            let vb = b.lambda().iter().map(|i| b.ones().contains(i));
            va.cmp(vb)
        })
}

fn check_ground_set(mu: &Distribution, cap: usize) -> Result<()> {
    if mu.n() > cap {
        return Err(Error::GroundSetTooLarge { n: mu.n(), cap });
    }
    Ok(())
}

struct SpecOutcome {
    rows: Vec<(usize, f64, f64)>,
    d_am: f64,
}

fn ami_ratio(stats: &PairStats, k: usize) -> f64 {
    let k = k as f64;
    let n = stats.n;
    let mut best: f64 = 0.0;
    for u in 0..n {
        let pu = stats.marginal(u);
        if pu <= 0.0 {
            continue;
        }
        let mut avg = 0.0;
        for v in 0..n {
            let pv = stats.marginal(v);
            if pv <= 0.0 {
                continue;
            }
            avg += (pv / k) * (stats.conditional(v, u) - pu).abs();
        }
        best = best.max(avg / (pu / k));
    }
    best
}

/// Maximal influence row sum over every feasible pinning (Λ with
/// `|Λ| <= max_lambda`; for two-sided, every feasible assignment of Λ).
pub fn linf_parameter(
    mu: &Distribution,
    kind: InfluenceKind,
    opts: &LinfOptions,
) -> Result<LinfReport> {
    check_ground_set(mu, opts.max_ground_set)?;
    if let Some(m) = opts.max_lambda {
        if m > mu.n() {
            return Err(Error::InvalidParameter(format!(
                "max_lambda {m} exceeds ground set size {}",
                mu.n()
            )));
        }
    }
    let specs = feasible_specs(mu, kind, opts.max_lambda);
    let homogeneity = mu.homogeneity().filter(|&k| k >= 1);
    let outcomes = par::map_slice(&specs, |spec| {
        let stats = PairStats::collect(mu, spec).expect("enumerated specs are feasible");
        let matrix = match kind {
            InfluenceKind::OneSided => InfluenceMatrix::one_sided(&stats, *spec),
            InfluenceKind::TwoSided => InfluenceMatrix::two_sided(&stats, *spec),
        };
        let rows = (0..matrix.n)
            .filter(|&i| matrix.feasible_rows[i])
            .map(|i| (i, matrix.row_l1(i), matrix.row_l1_offdiag(i)))
            .collect();
        let d_am = match (kind, homogeneity) {
            (InfluenceKind::OneSided, Some(k)) => ami_ratio(&stats, k),
            _ => 0.0,
        };
        SpecOutcome { rows, d_am }
    });

    let mut report = LinfReport {
        kind,
        d_inf: 0.0,
        d_inf_offdiag: 0.0,
        argmax_spec: ConditioningSpec::EMPTY,
        argmax_row: 0,
        d_am: None,
        specs_visited: specs.len(),
        rows: Vec::new(),
    };
    let mut d_am: f64 = 0.0;
    let mut first = true;
    for (spec, outcome) in specs.iter().zip(outcomes) {
        d_am = d_am.max(outcome.d_am);
        for (row, l1, l1_offdiag) in outcome.rows {
            if first || l1 > report.d_inf {
                report.d_inf = l1;
                report.argmax_spec = *spec;
                report.argmax_row = row;
                first = false;
            }
            report.d_inf_offdiag = report.d_inf_offdiag.max(l1_offdiag);
            if opts.keep_rows {
                report.rows.push(RowRecord {
                    spec: *spec,
                    row,
                    l1,
                    l1_offdiag,
                });
            }
        }
    }
    if kind == InfluenceKind::OneSided && homogeneity.is_some() {
        report.d_am = Some(d_am);
    }
    Ok(report)
}

/// Smallest `D_am` such that `E_{v~ν}|I(v -> u)| <= D_am · ν(u)` for every
/// `u` and every one-sided pinning.
pub fn ami_parameter(mu: &Distribution) -> Result<f64> {
    ami_parameter_with(mu, DEFAULT_MAX_GROUND_SET)
}

pub fn ami_parameter_with(mu: &Distribution, max_ground_set: usize) -> Result<f64> {
    let k = match mu.homogeneity() {
        Some(k) if k >= 1 => k,
        _ => return Err(Error::NotHomogeneous),
    };
    check_ground_set(mu, max_ground_set)?;
    let specs = feasible_specs(mu, InfluenceKind::OneSided, None);
    let ratios = par::map_slice(&specs, |spec| {
        let stats = PairStats::collect(mu, spec).expect("enumerated specs are feasible");
        ami_ratio(&stats, k)
    });
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest residuals of the identities linking ℓ∞ and average
/// multiplicative independence, over all one-sided pinnings.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityResiduals {
    /// `max |Σ_v ν(v)|p_v(u) - p(u)| - ν(u)‖p_u - p‖₁|`.
    pub identity: f64,
    /// `max |ν(u) p_u(v) - ν(v) p_v(u)|`.
    pub bayes: f64,
    pub specs_visited: usize,
}

pub fn verify_ii_ami_identity(mu: &Distribution) -> Result<IdentityResiduals> {
    let k = match mu.homogeneity() {
        Some(k) if k >= 1 => k as f64,
        _ => return Err(Error::NotHomogeneous),
    };
    check_ground_set(mu, DEFAULT_MAX_GROUND_SET)?;
    let specs = feasible_specs(mu, InfluenceKind::OneSided, None);
    let per_spec = par::map_slice(&specs, |spec| {
        let stats = PairStats::collect(mu, spec).expect("enumerated specs are feasible");
        let n = stats.n;
        let p: Vec<f64> = (0..n).map(|j| stats.marginal(j)).collect();
        let nu: Vec<f64> = p.iter().map(|x| x / k).collect();
        let live: Vec<usize> = (0..n).filter(|&j| p[j] > 0.0).collect();
        let mut identity: f64 = 0.0;
        let mut bayes: f64 = 0.0;
        for &u in &live {
            let lhs: f64 = live
                .iter()
                .map(|&v| nu[v] * (stats.conditional(v, u) - p[u]).abs())
                .sum();
            let l1: f64 = (0..n).map(|v| (stats.conditional(u, v) - p[v]).abs()).sum();
            identity = identity.max((lhs - nu[u] * l1).abs());
            for &v in &live {
                let r = nu[u] * stats.conditional(u, v) - nu[v] * stats.conditional(v, u);
                bayes = bayes.max(r.abs());
            }
        }
        (identity, bayes)
    });
    let mut out = IdentityResiduals {
        specs_visited: specs.len(),
        ..Default::default()
    };
    for (identity, bayes) in per_spec {
        out.identity = out.identity.max(identity);
        out.bayes = out.bayes.max(bayes);
    }
    Ok(out)
}

/// Both ℓ∞ parameters and `D_am` for one distribution.
#[derive(Clone, Debug)]
pub struct DependenceReport {
    pub one_sided: LinfReport,
    pub two_sided: LinfReport,
    pub d_am: Option<f64>,
}

impl DependenceReport {
    pub fn d_inf_one_sided(&self) -> f64 {
        self.one_sided.d_inf
    }

    pub fn d_inf_two_sided(&self) -> f64 {
        self.two_sided.d_inf
    }
}

pub fn analyze(mu: &Distribution, opts: &LinfOptions) -> Result<DependenceReport> {
    let one_sided = linf_parameter(mu, InfluenceKind::OneSided, opts)?;
    let two_sided = linf_parameter(mu, InfluenceKind::TwoSided, opts)?;
    let d_am = one_sided.d_am;
    Ok(DependenceReport {
        one_sided,
        two_sided,
        d_am,
    })
}
