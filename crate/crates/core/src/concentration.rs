//! Matrix Chernoff machinery for sums `Σ_i ξ_i Y_i` with `ξ ~ μ`.
//!
//! Everything except the Monte Carlo estimator is computed exactly by
//! enumerating the support of `μ`: the expected sum and its extreme
//! eigenvalues, the conditioning shifts `Z_v`, the trace moment generating
//! function inequality, the averaged exponential bound behind it, and the
//! tail probabilities themselves when the support is small enough.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, OutcomeMask};
use crate::error::{Error, Result};
use crate::influence::{linf_parameter, InfluenceKind, LinfOptions};
use crate::linalg::{self, Matrix};
use crate::par;

/// Constant in the exponent of the tail bound `d·exp(-δ²μ / (20·R·D²))`.
pub const TAIL_CONSTANT: f64 = 20.0;

/// Supports up to this size are enumerated instead of sampled.
pub const EXACT_SUPPORT_LIMIT: usize = 10_000;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
// Borderline eigenvalues count as tail events.
const EVENT_TOL: f64 = 1e-12;

/// Symmetric PSD matrices `Y_1..Y_n` with `Y_i ⪯ R·I`.
#[derive(Clone, Debug)]
pub struct MatrixEnsemble {
    d: usize,
    mats: Vec<Matrix>,
    r_cap: f64,
}

impl MatrixEnsemble {
    pub fn new(d: usize, mats: Vec<Matrix>, r_cap: f64) -> Result<Self> {
        if !(r_cap > 0.0 && r_cap.is_finite()) {
            return Err(Error::InvalidEnsemble(format!("R must be positive, got {r_cap}")));
        }
        for (i, y) in mats.iter().enumerate() {
            if y.nrows() != d || y.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: y.nrows().max(y.ncols()),
                });
            }
            if linalg::max_asymmetry(y) > SYMMETRY_TOL {
                return Err(Error::InvalidEnsemble(format!("Y_{} is not symmetric", i + 1)));
            }
            let ev = linalg::eigenvalues(y);
            if ev.first().is_some_and(|&l| l < -PSD_TOL) {
                return Err(Error::InvalidEnsemble(format!("Y_{} is not PSD", i + 1)));
            }
            if ev.last().is_some_and(|&l| l > r_cap + PSD_TOL) {
                return Err(Error::InvalidEnsemble(format!(
                    "Y_{} has eigenvalue above R = {r_cap}",
                    i + 1
                )));
            }
        }
        Ok(MatrixEnsemble { d, mats, r_cap })
    }

    /// Diagonal ensemble `Y_i = e_i e_iᵀ` in dimension `n`.
    pub fn basis(n: usize) -> Self {
        let mats = (0..n)
            .map(|i| {
                let mut m = Matrix::zeros(n, n);
                m[(i, i)] = 1.0;
                m
            })
            .collect();
        MatrixEnsemble { d: n, mats, r_cap: 1.0 }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn r_cap(&self) -> f64 {
        self.r_cap
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    /// `Σ_{i ∈ outcome} Y_i`.
    pub fn sum_over(&self, outcome: OutcomeMask) -> Matrix {
        let mut s = Matrix::zeros(self.d, self.d);
        for i in outcome.iter() {
            s += &self.mats[i];
        }
        s
    }

    /// `Σ_i w_i Y_i`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Matrix {
        let mut s = Matrix::zeros(self.d, self.d);
        for (y, &w) in self.mats.iter().zip(weights) {
            if w != 0.0 {
                s += y * w;
            }
        }
        s
    }

    /// Appends `extra` zero matrices, e.g. for the padding coordinates of a
    /// homogenized distribution.
    pub fn padded(&self, extra: usize) -> Self {
        let mut mats = self.mats.clone();
        mats.extend((0..extra).map(|_| Matrix::zeros(self.d, self.d)));
        MatrixEnsemble {
            d: self.d,
            mats,
            r_cap: self.r_cap,
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.mats.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.mats.len(),
            });
        }
        Ok(())
    }

    fn check_unit_cap(&self) -> Result<()> {
        if self.r_cap > 1.0 + PSD_TOL {
            return Err(Error::InvalidEnsemble(format!(
                "check requires R <= 1, got {}",
                self.r_cap
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(s)?;
        let d = file.d;
        let mats = file
            .mats
            .into_iter()
            .enumerate()
            .map(|(i, flat)| {
                if flat.len() != d * d {
                    return Err(Error::Parse(format!(
                        "matrix {} has {} entries, expected {}",
                        i + 1,
                        flat.len(),
                        d * d
                    )));
                }
                Ok(Matrix::from_row_slice(d, d, &flat))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, mats, file.r)
    }

    pub fn to_json_string(&self) -> String {
        let file = EnsembleFile {
            d: self.d,
            r: self.r_cap,
            mats: self
                .mats
                .iter()
                .map(|m| m.transpose().iter().copied().collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("ensemble serializes")
    }
}

/// On-disk form: `{"d": int, "R": number, "mats": [[row-major d·d], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    pub d: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub mats: Vec<Vec<f64>>,
}

/// Anything that yields random outcomes over `0..ground_size()` with known
/// marginals: an explicit distribution, or a sampler for an implicit one.
pub trait OutcomeSource: Sync {
    fn ground_size(&self) -> usize;
    fn marginal_vector(&self) -> Vec<f64>;
    /// The full support, when it is explicitly available.
    fn exact_support(&self) -> Option<&[(OutcomeMask, f64)]>;
    fn draw(&self, rng: &mut ChaCha8Rng) -> OutcomeMask;
}

impl OutcomeSource for Distribution {
    fn ground_size(&self) -> usize {
        self.n()
    }

    fn marginal_vector(&self) -> Vec<f64> {
        self.marginals().0
    }

    fn exact_support(&self) -> Option<&[(OutcomeMask, f64)]> {
        Some(self.support())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> OutcomeMask {
        self.sample(rng)
    }
}

/// `E[Σ_i ξ_i Y_i] = Σ_i p(i) Y_i`.
pub fn expected_sum(mu: &(impl OutcomeSource + ?Sized), ens: &MatrixEnsemble) -> Result<Matrix> {
    ens.check_len(mu.ground_size())?;
    Ok(ens.weighted_sum(&mu.marginal_vector()))
}

/// `(λ_min, λ_max)` of the expected sum.
pub fn expected_spectrum(mu: &(impl OutcomeSource + ?Sized), ens: &MatrixEnsemble) -> Result<(f64, f64)> {
    let e = expected_sum(mu, ens)?;
    let ev = linalg::eigenvalues(&e);
    Ok((
        ev.first().copied().unwrap_or(0.0),
        ev.last().copied().unwrap_or(0.0),
    ))
}

/// Shift of the expected sum caused by conditioning on `ξ_v = 1`.
#[derive(Clone, Debug)]
pub struct ZvMatrix {
    pub v: usize,
    pub z: Matrix,
}

fn homogeneous_k(mu: &Distribution) -> Result<usize> {
    match mu.homogeneity() {
        Some(k) if k >= 1 => Ok(k),
        _ => Err(Error::NotHomogeneous),
    }
}

/// `Z_v = E_{μ_v}[Σ ξ_i Y_i] - E_μ[Σ ξ_i Y_i] = Σ_i (p_v(i) - p(i)) Y_i`.
pub fn z_matrix(mu: &Distribution, ens: &MatrixEnsemble, v: usize) -> Result<ZvMatrix> {
    homogeneous_k(mu)?;
    ens.check_len(mu.n())?;
    if v >= mu.n() {
        return Err(Error::MaskOutOfRange { element: v, n: mu.n() });
    }
    let p = mu.marginals();
    let spec = crate::ConditioningSpec::all_ones(OutcomeMask::EMPTY.with(v));
    let pv = mu.condition(&spec)?.marginals();
    let shift: Vec<f64> = pv.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
    Ok(ZvMatrix {
        v,
        z: ens.weighted_sum(&shift),
    })
}

fn all_z(mu: &Distribution, ens: &MatrixEnsemble) -> Result<Vec<(f64, ZvMatrix)>> {
    let k = homogeneous_k(mu)? as f64;
    let p = mu.marginals();
    (0..mu.n())
        .filter(|&v| p[v] > 0.0)
        .map(|v| Ok((p[v] / k, z_matrix(mu, ens, v)?)))
        .collect()
}

/// Margins of the two orderings `Z_v ⪯ D_inf·I` and
/// `E_ν[Z_v²] ⪯ D_inf·D_am·E_ν[Y_v]`.
#[derive(Clone, Debug)]
pub struct ZvBoundReport {
    pub d_inf: f64,
    pub d_am: f64,
    /// `max_v λ_max(Z_v - D_inf·I)`; at most 0 when the first ordering holds.
    pub first_excess: f64,
    /// `λ_min(D_inf·D_am·E_ν[Y_v] - E_ν[Z_v²])`; at least 0 when the second holds.
    pub second_margin: f64,
    /// `max_{ij} |E_ν[Z_v]|`.
    pub mean_z: f64,
    pub holds: bool,
}

pub fn check_zv_bound(mu: &Distribution, ens: &MatrixEnsemble) -> Result<ZvBoundReport> {
    let opts = LinfOptions {
        keep_rows: false,
        ..Default::default()
    };
    let report = linf_parameter(mu, InfluenceKind::OneSided, &opts)?;
    let d_am = report.d_am.ok_or(Error::NotHomogeneous)?;
    check_zv_bound_with(mu, ens, report.d_inf, d_am)
}

pub fn check_zv_bound_with(
    mu: &Distribution,
    ens: &MatrixEnsemble,
    d_inf: f64,
    d_am: f64,
) -> Result<ZvBoundReport> {
    ens.check_unit_cap()?;
    let zs = all_z(mu, ens)?;
    let d = ens.d();
    let mut first_excess = f64::NEG_INFINITY;
    let mut mean = Matrix::zeros(d, d);
    let mut z_sq = Matrix::zeros(d, d);
    let mut y_avg = Matrix::zeros(d, d);
    for (nu, zv) in &zs {
        first_excess = first_excess.max(linalg::lambda_max(&zv.z) - d_inf);
        mean += &zv.z * *nu;
        z_sq += (&zv.z * &zv.z) * *nu;
        y_avg += &ens.mats()[zv.v] * *nu;
    }
    if zs.is_empty() {
        first_excess = -d_inf;
    }
    let second_margin = linalg::lambda_min(&(y_avg * (d_inf * d_am) - z_sq));
    Ok(ZvBoundReport {
        d_inf,
        d_am,
        first_excess,
        second_margin,
        mean_z: mean.amax(),
        holds: first_excess <= 1e-9 && second_margin >= -1e-9,
    })
}

/// Smallest `c` covered by the averaged exponential bound.
pub fn required_c(d_inf: f64, d_am: f64) -> f64 {
    5.0 * d_inf * d_am
}

/// `Err(CTooSmall)` when `c < 5·D_inf·D_am`. Callers may treat this as a
/// warning and still probe the inequality.
pub fn check_c(c: f64, d_inf: f64, d_am: f64) -> Result<()> {
    let required = required_c(d_inf, d_am);
    if c + 1e-12 < required {
        return Err(Error::CTooSmall { c, required });
    }
    Ok(())
}

fn check_theta(theta: f64, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    let limit = 1.0 / (2.0 * c);
    if !theta.is_finite() || theta.abs() > limit * (1.0 + 1e-12) {
        return Err(Error::ThetaOutOfRange { theta, limit });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct TraceMgf {
    /// `tr E[exp(H + θ Σ ξ_i Y_i)]`.
    pub lhs: f64,
    /// `tr exp(H + (θ + cθ²) E[Σ ξ_i Y_i])`.
    pub rhs: f64,
}

impl TraceMgf {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn trace_mgf_check(
    mu: &Distribution,
    ens: &MatrixEnsemble,
    theta: f64,
    h: &Matrix,
    c: f64,
) -> Result<TraceMgf> {
    check_theta(theta, c)?;
    ens.check_len(mu.n())?;
    if h.nrows() != ens.d() || h.ncols() != ens.d() {
        return Err(Error::DimensionMismatch {
            expected: ens.d(),
            found: h.nrows(),
        });
    }
    let terms = par::map_slice(mu.support(), |&(m, p)| {
        p * linalg::trace_exp(&(h + ens.sum_over(m) * theta))
    });
    let lhs = terms.into_iter().sum();
    let e = expected_sum(mu, ens)?;
    let rhs = linalg::trace_exp(&(h + e * (theta + c * theta * theta)));
    Ok(TraceMgf { lhs, rhs })
}

/// `λ_max(E_{v~ν}[exp((θ + cθ²) Z_v - cθ² Y_v)]) - 1`.
pub fn second_part_check(mu: &Distribution, ens: &MatrixEnsemble, theta: f64, c: f64) -> Result<f64> {
    check_theta(theta, c)?;
    let zs = all_z(mu, ens)?;
    let a = theta + c * theta * theta;
    let b = c * theta * theta;
    let mut avg = Matrix::zeros(ens.d(), ens.d());
    for (nu, zv) in &zs {
        avg += linalg::expm_sym(&(&zv.z * a - &ens.mats()[zv.v] * b)) * *nu;
    }
    Ok(linalg::lambda_max(&avg) - 1.0)
}

/// `d·exp(-δ²·μ / (20·R·D²))`.
pub fn tail_bound(delta: f64, mu_extreme: f64, d_param: f64, dim: usize, r_cap: f64) -> Result<f64> {
    tail_bound_with_constant(delta, mu_extreme, d_param, dim, r_cap, TAIL_CONSTANT)
}

pub fn tail_bound_with_constant(
    delta: f64,
    mu_extreme: f64,
    d_param: f64,
    dim: usize,
    r_cap: f64,
    constant: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside [0, 1]")));
    }
    if !(d_param > 0.0) {
        return Err(Error::NonPositiveD(d_param));
    }
    if !(r_cap > 0.0) || mu_extreme < 0.0 || !(constant > 0.0) {
        return Err(Error::InvalidParameter(
            "R and the constant must be positive, mu non-negative".into(),
        ));
    }
    Ok(dim as f64 * (-delta * delta * mu_extreme / (constant * r_cap * d_param * d_param)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Min,
    Max,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Min => "min",
            Side::Max => "max",
        }
    }
}

/// Everything the tail estimator needs besides δ.
#[derive(Clone, Debug)]
pub struct TailSetup {
    pub dim: usize,
    pub r_cap: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Dependence parameter entering the bound.
    pub d_param: f64,
    /// Centered events `λ(S - E[S])` with threshold `±δμ`, used for
    /// non-homogeneous inputs.
    pub centered: bool,
    pub constant: f64,
    expected: Matrix,
}

impl TailSetup {
    /// Setup with an externally certified dependence parameter.
    pub fn with_parameter(
        mu: &(impl OutcomeSource + ?Sized),
        ens: &MatrixEnsemble,
        d_param: f64,
        centered: bool,
    ) -> Result<Self> {
        let expected = expected_sum(mu, ens)?;
        let ev = linalg::eigenvalues(&expected);
        Ok(TailSetup {
            dim: ens.d(),
            r_cap: ens.r_cap(),
            mu_min: ev.first().copied().unwrap_or(0.0),
            mu_max: ev.last().copied().unwrap_or(0.0),
            d_param,
            centered,
            constant: TAIL_CONSTANT,
            expected,
        })
    }

    /// Homogeneous inputs use the one-sided parameter and uncentered events.
    /// Others use twice the two-sided parameter (the one-sided parameter of
    /// the homogenization) and centered events.
    pub fn for_distribution(mu: &Distribution, ens: &MatrixEnsemble) -> Result<Self> {
        let opts = LinfOptions {
            keep_rows: false,
            ..Default::default()
        };
        match mu.homogeneity() {
            Some(_) => {
                let d = linf_parameter(mu, InfluenceKind::OneSided, &opts)?.d_inf;
                Self::with_parameter(mu, ens, d, false)
            }
            None => {
                let d = linf_parameter(mu, InfluenceKind::TwoSided, &opts)?.d_inf;
                Self::with_parameter(mu, ens, 2.0 * d, true)
            }
        }
    }

    pub fn mu_extreme(&self, side: Side) -> f64 {
        match side {
            Side::Min => self.mu_min,
            Side::Max => self.mu_max,
        }
    }

    pub fn bound(&self, delta: f64, side: Side) -> Result<f64> {
        let mu = self.mu_extreme(side).max(0.0);
        if self.d_param == 0.0 {
            // Deterministic input: the exponent diverges unless δμ = 0.
            if !(0.0..=1.0).contains(&delta) {
                return Err(Error::InvalidParameter(format!("delta {delta} outside [0, 1]")));
            }
            return Ok(if delta * mu > 0.0 { 0.0 } else { self.dim as f64 });
        }
        tail_bound_with_constant(delta, mu, self.d_param, self.dim, self.r_cap, self.constant)
    }

    /// Whether the outcome with matrix sum `s` lies in the tail event.
    pub fn in_tail(&self, s: &Matrix, delta: f64, side: Side) -> bool {
        let (m, offset) = if self.centered {
            (s - &self.expected, 0.0)
        } else {
            (s.clone(), 1.0)
        };
        match side {
            Side::Max => {
                let threshold = (offset + delta) * self.mu_max;
                linalg::lambda_max(&m) >= threshold - EVENT_TOL
            }
            Side::Min => {
                let threshold = (offset - delta) * self.mu_min;
                linalg::lambda_min(&m) <= threshold + EVENT_TOL
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TailEstimate {
    pub side: Side,
    pub delta: f64,
    /// Exact tail probability, or the empirical frequency when sampled.
    pub empirical: f64,
    pub bound: f64,
    pub exact: bool,
    /// Number of samples; 0 for exact enumeration.
    pub trials: usize,
    pub d_param: f64,
    pub mu_extreme: f64,
}

impl TailEstimate {
    /// `bound + 3·sqrt(bound(1 - bound)/trials)` for sampled estimates,
    /// `bound` itself for exact ones.
    pub fn allowance(&self) -> f64 {
        if self.exact || self.trials == 0 {
            self.bound
        } else {
            let b = self.bound.clamp(0.0, 1.0);
            self.bound + 3.0 * (b * (1.0 - b) / self.trials as f64).sqrt()
        }
    }

    pub fn holds(&self) -> bool {
        self.empirical <= self.allowance()
    }
}

/// Tail probability of `setup`'s event, exact when the support has at most
/// [`EXACT_SUPPORT_LIMIT`] outcomes and sampled with `trials` draws otherwise.
pub fn tail_probability(
    source: &(impl OutcomeSource + ?Sized),
    ens: &MatrixEnsemble,
    setup: &TailSetup,
    delta: f64,
    side: Side,
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    ens.check_len(source.ground_size())?;
    let bound = setup.bound(delta, side)?;
    let (empirical, exact, trials) = match source.exact_support() {
        Some(support) if support.len() <= EXACT_SUPPORT_LIMIT => {
            let hits = par::map_slice(support, |&(m, p)| {
                if setup.in_tail(&ens.sum_over(m), delta, side) {
                    p
                } else {
                    0.0
                }
            });
            (hits.into_iter().sum::<f64>(), true, 0)
        }
        _ => {
            if trials == 0 {
                return Err(Error::InvalidParameter("trials must be at least 1".into()));
            }
            let counts = par::map_trial_chunks(trials, seed, |rng, len| {
                (0..len)
                    .filter(|_| setup.in_tail(&ens.sum_over(source.draw(rng)), delta, side))
                    .count()
            });
            let hits: usize = counts.into_iter().sum();
            (hits as f64 / trials as f64, false, trials)
        }
    };
    Ok(TailEstimate {
        side,
        delta,
        empirical,
        bound,
        exact,
        trials,
        d_param: setup.d_param,
        mu_extreme: setup.mu_extreme(side),
    })
}

/// Tail probability against the bound, with the dependence parameter
/// computed from `mu` by enumeration.
pub fn monte_carlo_tail(
    mu: &Distribution,
    ens: &MatrixEnsemble,
    delta: f64,
    side: Side,
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    let setup = TailSetup::for_distribution(mu, ens)?;
    tail_probability(mu, ens, &setup, delta, side, trials, seed)
}

/// Worst margins of the three matrix inequalities over random pairs.
#[derive(Clone, Debug)]
pub struct FactReport {
    pub pairs: usize,
    /// `min λ_min(A² + B² - AB - BA)`.
    pub square: f64,
    /// `min λ_min(I + A - B + 2A² + 2B² - e^{A-B})` with `A ⪯ I`, `B ⪰ 0`.
    pub exponential: f64,
    /// `min tr(e^A e^B) - tr(e^{A+B})`.
    pub golden_thompson: f64,
}

impl FactReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.square >= -tol && self.exponential >= -tol && self.golden_thompson >= -tol
    }
}

pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0) * scale);
    linalg::symmetrize(&g)
}

pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    linalg::symmetrize(&(&g * g.transpose())) * scale
}

pub fn square_margin(a: &Matrix, b: &Matrix) -> f64 {
    linalg::lambda_min(&(a * a + b * b - a * b - b * a))
}

pub fn exponential_margin(a: &Matrix, b: &Matrix) -> f64 {
    let d = a.nrows();
    let rhs = linalg::identity(d) + a - b + (a * a) * 2.0 + (b * b) * 2.0;
    linalg::lambda_min(&(rhs - linalg::expm_sym(&(a - b))))
}

pub fn golden_thompson_margin(a: &Matrix, b: &Matrix) -> f64 {
    (linalg::expm_sym(a) * linalg::expm_sym(b)).trace() - linalg::trace_exp(&(a + b))
}

/// Checks the three facts on `pairs` seeded random pairs of `d × d` matrices.
pub fn matrix_fact_checks(seed: u64, pairs: usize, d: usize) -> FactReport {
    let margins = par::map_range(pairs, |k| {
        let mut rng = par::stream_rng(seed, k as u64);
        let scale = rng.gen_range(0.1..2.0);
        let a = random_symmetric(&mut rng, d, scale);
        let scale_b = rng.gen_range(0.1..2.0);
        let b = random_symmetric(&mut rng, d, scale_b);
        let sq = square_margin(&a, &b);

        // Shift A below the identity; B is a scaled Gram matrix.
        let scale_a2 = rng.gen_range(0.1..3.0);
        let mut a2 = random_symmetric(&mut rng, d, scale_a2);
        let top = linalg::lambda_max(&a2);
        if top > 1.0 {
            a2 -= linalg::identity(d) * (top - rng.gen_range(0.0..1.0));
        }
        let scale_b2 = rng.gen_range(0.05..1.5);
        let b2 = random_psd(&mut rng, d, scale_b2);
        let ex = exponential_margin(&a2, &b2);

        let gt = golden_thompson_margin(&a, &b);
        (sq, ex, gt)
    });
    let mut report = FactReport {
        pairs,
        square: f64::INFINITY,
        exponential: f64::INFINITY,
        golden_thompson: f64::INFINITY,
    };
    for (sq, ex, gt) in margins {
        report.square = report.square.min(sq);
        report.exponential = report.exponential.min(ex);
        report.golden_thompson = report.golden_thompson.min(gt);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn mu_tri() -> Distribution {
        Distribution::uniform(3, &[[0, 1], [0, 2], [1, 2]]).unwrap()
    }

    fn mu_pair() -> Distribution {
        Distribution::uniform(2, &[[0], [1]]).unwrap()
    }

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn diag_pair() -> MatrixEnsemble {
        MatrixEnsemble::new(2, vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], 1.0).unwrap()
    }

    #[test]
    fn ensemble_validation() {
        assert!(MatrixEnsemble::new(2, vec![diag(&[1.0, -0.1])], 1.0).is_err());
        assert!(MatrixEnsemble::new(2, vec![diag(&[2.0, 0.0])], 1.0).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(MatrixEnsemble::new(2, vec![asym], 2.0).is_err());
        assert!(MatrixEnsemble::new(3, vec![diag(&[1.0, 0.0])], 1.0).is_err());
        assert!(MatrixEnsemble::new(2, vec![], 0.0).is_err());
    }

    #[test]
    fn ensemble_json() {
        let e = MatrixEnsemble::from_json_str(r#"{"d":2,"R":1,"mats":[[1,0,0,0],[0.5,0.5,0.5,0.5]]}"#).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e.mats()[1][(0, 1)] - 0.5).abs() < 1e-15);
        let back = MatrixEnsemble::from_json_str(&e.to_json_string()).unwrap();
        assert_eq!(back.mats(), e.mats());
        assert!(MatrixEnsemble::from_json_str(r#"{"d":2,"R":1,"mats":[[1,0,0]]}"#).is_err());
        assert!(MatrixEnsemble::from_json_str(r#"{"d":2,"R":1,"mats":[],"x":0}"#).is_err());
    }

    #[test]
    fn expected_sum_examples() {
        let e = expected_sum(&mu_tri(), &MatrixEnsemble::basis(3)).unwrap();
        assert!((e - diag(&[2.0 / 3.0; 3])).amax() < 1e-15);

        let zero = MatrixEnsemble::new(2, vec![Matrix::zeros(2, 2); 3], 1.0).unwrap();
        assert_eq!(expected_sum(&mu_tri(), &zero).unwrap().amax(), 0.0);

        let point = Distribution::uniform(2, &[[0, 1]]).unwrap();
        let ident = MatrixEnsemble::new(2, vec![linalg::identity(2); 2], 1.0).unwrap();
        assert!((expected_sum(&point, &ident).unwrap() - linalg::identity(2) * 2.0).amax() < 1e-15);

        assert!(matches!(
            expected_sum(&mu_pair(), &MatrixEnsemble::basis(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expected_spectrum_examples() {
        let (lo, hi) = expected_spectrum(&mu_tri(), &MatrixEnsemble::basis(3)).unwrap();
        assert!((lo - 2.0 / 3.0).abs() < 1e-12 && (hi - 2.0 / 3.0).abs() < 1e-12);
        let zero = MatrixEnsemble::new(2, vec![Matrix::zeros(2, 2); 3], 1.0).unwrap();
        assert_eq!(expected_spectrum(&mu_tri(), &zero).unwrap(), (0.0, 0.0));
        let point = Distribution::uniform(2, &[[0, 1]]).unwrap();
        let (lo, hi) = expected_spectrum(&point, &diag_pair()).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_matrix_examples() {
        let z = z_matrix(&mu_tri(), &MatrixEnsemble::basis(3), 0).unwrap();
        assert!((z.z - diag(&[1.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0])).amax() < 1e-15);

        let point = Distribution::uniform(3, &[[0, 2]]).unwrap();
        for v in [0, 2] {
            assert_eq!(z_matrix(&point, &MatrixEnsemble::basis(3), v).unwrap().z.amax(), 0.0);
        }
        assert!(matches!(
            z_matrix(&point, &MatrixEnsemble::basis(3), 1),
            Err(Error::InfeasibleConditioning)
        ));

        let z = z_matrix(&mu_pair(), &diag_pair(), 0).unwrap();
        assert!((z.z - diag(&[0.5, -0.5])).amax() < 1e-15);
    }

    #[test]
    fn zv_bound_examples() {
        let r = check_zv_bound(&mu_tri(), &MatrixEnsemble::basis(3)).unwrap();
        assert!((r.d_inf - 1.0).abs() < 1e-12);
        assert!((r.first_excess - (1.0 / 3.0 - 1.0)).abs() < 1e-12);
        assert!(r.holds && r.mean_z < 1e-15);

        let point = Distribution::uniform(3, &[[0, 2]]).unwrap();
        let r = check_zv_bound(&point, &MatrixEnsemble::basis(3)).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn trace_mgf_theta_zero() {
        let h = random_symmetric(&mut par::stream_rng(5, 0), 3, 1.0);
        let r = trace_mgf_check(&mu_tri(), &MatrixEnsemble::basis(3), 0.0, &h, 5.0).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!((r.lhs - linalg::trace_exp(&h)).abs() < 1e-12);
    }

    #[test]
    fn trace_mgf_point_mass() {
        let point = Distribution::uniform(2, &[[0, 1]]).unwrap();
        let ens = MatrixEnsemble::new(
            2,
            vec![diag(&[1.0, 0.5]), Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])],
            1.0,
        )
        .unwrap();
        let h = Matrix::zeros(2, 2);
        let r = trace_mgf_check(&point, &ens, 0.05, &h, 5.0).unwrap();
        let s = ens.sum_over(OutcomeMask::full(2));
        assert!((r.lhs - linalg::trace_exp(&(&s * 0.05))).abs() < 1e-12);
        assert!(r.holds(1e-12));
    }

    #[test]
    fn trace_mgf_mu_tri_grid() {
        let ens = MatrixEnsemble::basis(3);
        let h = Matrix::zeros(3, 3);
        for theta in [-0.1, -0.05, -0.02, 0.02, 0.05, 0.1] {
            let r = trace_mgf_check(&mu_tri(), &ens, theta, &h, 5.0).unwrap();
            assert!(r.holds(1e-9), "theta {theta}: {r:?}");
        }
        assert!(matches!(
            trace_mgf_check(&mu_tri(), &ens, 0.2, &h, 5.0),
            Err(Error::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn c_threshold() {
        assert!(check_c(5.0, 1.0, 1.0).is_ok());
        assert!(matches!(check_c(4.0, 1.0, 1.0), Err(Error::CTooSmall { .. })));
    }

    #[test]
    fn second_part_examples() {
        assert!(second_part_check(&mu_tri(), &MatrixEnsemble::basis(3), 0.0, 5.0)
            .unwrap()
            .abs()
            < 1e-12);
        assert!(second_part_check(&mu_tri(), &MatrixEnsemble::basis(3), 0.1, 5.0).unwrap() <= 1e-9);
        assert!(second_part_check(&mu_pair(), &diag_pair(), -0.1, 5.0).unwrap() <= 1e-9);
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(tail_bound(0.0, 5.0, 1.0, 4, 1.0).unwrap(), 4.0);
        assert!((tail_bound(1.0, 20.0, 1.0, 1, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((tail_bound(0.5, 80.0, 2.0, 3, 1.0).unwrap() - 3.0 * (-0.25f64).exp()).abs() < 1e-12);
        assert!(matches!(tail_bound(0.5, 1.0, 0.0, 1, 1.0), Err(Error::NonPositiveD(_))));
        assert!(tail_bound(1.5, 1.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn tail_point_mass() {
        let point = Distribution::uniform(2, &[[0, 1]]).unwrap();
        let r = monte_carlo_tail(&point, &diag_pair(), 0.3, Side::Max, 100, 1).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn tail_mu_tri_max_side() {
        let ens = MatrixEnsemble::basis(3);
        let r = monte_carlo_tail(&mu_tri(), &ens, 0.5, Side::Max, 1, 1).unwrap();
        assert!(r.exact);
        assert_eq!(r.empirical, 1.0);
        let r = monte_carlo_tail(&mu_tri(), &ens, 0.6, Side::Max, 1, 1).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn fact_equality_cases() {
        let a = random_symmetric(&mut par::stream_rng(9, 0), 4, 1.0);
        assert!(square_margin(&a, &a).abs() < 1e-12);
        let d1 = diag(&[0.3, -0.2, 1.0, 0.0]);
        let d2 = diag(&[-1.0, 0.5, 0.1, 2.0]);
        assert!(golden_thompson_margin(&d1, &d2).abs() < 1e-12);
    }

    #[test]
    fn random_facts_hold() {
        let r = matrix_fact_checks(2024, 100, 4);
        assert!(r.holds(1e-8), "{r:?}");
    }
}
