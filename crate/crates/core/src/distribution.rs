//! Explicit distributions over the binary hypercube `{0,1}^n`.
//!
//! An outcome is a subset of the ground set `0..n`, stored as a bit mask.
//! Distributions keep their support sorted by mask with strictly positive,
//! normalized probabilities, so "the conditioning is feasible" is the same as
//! "some support outcome survives the filter".

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set a mask can represent.
pub const MAX_GROUND_SET: usize = 64;

/// Tolerance for the normalization invariant.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A subset of the ground set, bit `i` set iff element `i` is present.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OutcomeMask(u64);

impl OutcomeMask {
    pub const EMPTY: OutcomeMask = OutcomeMask(0);

    /// Wraps raw bits, checking that all of them lie below `n`.
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge {
                n,
                cap: MAX_GROUND_SET,
            });
        }
        if n < MAX_GROUND_SET && bits >> n != 0 {
            let element = 63 - bits.leading_zeros() as usize;
            return Err(Error::MaskOutOfRange { element, n });
        }
        Ok(OutcomeMask(bits))
    }

    /// Builds a mask from 0-based element indices.
    pub fn from_elements(elements: &[usize], n: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &e in elements {
            if e >= n || e >= MAX_GROUND_SET {
                return Err(Error::MaskOutOfRange { element: e, n });
            }
            bits |= 1 << e;
        }
        Self::new(bits, n)
    }

    /// The full ground set `0..n`.
    pub fn full(n: usize) -> Self {
        if n >= MAX_GROUND_SET {
            OutcomeMask(u64::MAX)
        } else {
            OutcomeMask((1u64 << n) - 1)
        }
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, i: usize) -> Self {
        OutcomeMask(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        OutcomeMask(self.0 & !(1 << i))
    }

    pub fn union(self, other: Self) -> Self {
        OutcomeMask(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        OutcomeMask(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Elements in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Debug for OutcomeMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A pinning `xi_l = sigma(l)` for every `l` in `lambda`.
///
/// `ones` holds the elements of `lambda` pinned to 1; the rest of `lambda`
/// is pinned to 0. The one-sided case has `ones == lambda`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ConditioningSpec {
    lambda: OutcomeMask,
    ones: OutcomeMask,
}

impl ConditioningSpec {
    pub const EMPTY: ConditioningSpec = ConditioningSpec {
        lambda: OutcomeMask::EMPTY,
        ones: OutcomeMask::EMPTY,
    };

    pub fn new(lambda: OutcomeMask, ones: OutcomeMask) -> Result<Self> {
        if !ones.is_subset_of(lambda) {
            return Err(Error::InvalidParameter(
                "assignment pins elements outside lambda".into(),
            ));
        }
        Ok(ConditioningSpec { lambda, ones })
    }

    pub fn all_ones(lambda: OutcomeMask) -> Self {
        ConditioningSpec {
            lambda,
            ones: lambda,
        }
    }

    /// Builds a spec from `(element, value)` pairs.
    pub fn from_pairs(pairs: &[(usize, bool)], n: usize) -> Result<Self> {
        let mut lambda = OutcomeMask::EMPTY;
        let mut ones = OutcomeMask::EMPTY;
        for &(i, v) in pairs {
            if i >= n {
                return Err(Error::MaskOutOfRange { element: i, n });
            }
            if lambda.contains(i) && ones.contains(i) != v {
                return Err(Error::InvalidParameter(format!(
                    "element {i} pinned to both values"
                )));
            }
            lambda = lambda.with(i);
            if v {
                ones = ones.with(i);
            }
        }
        Ok(ConditioningSpec { lambda, ones })
    }

    pub fn lambda(&self) -> OutcomeMask {
        self.lambda
    }

    pub fn ones(&self) -> OutcomeMask {
        self.ones
    }

    pub fn zeros(&self) -> OutcomeMask {
        OutcomeMask(self.lambda.0 & !self.ones.0)
    }

    pub fn is_one_sided(&self) -> bool {
        self.lambda == self.ones
    }

    /// Adds the pin `xi_i = value`; `i` must not already be pinned.
    pub fn pin(&self, i: usize, value: bool) -> Self {
        ConditioningSpec {
            lambda: self.lambda.with(i),
            ones: if value { self.ones.with(i) } else { self.ones },
        }
    }

    /// Whether an outcome agrees with every pin.
    pub fn admits(&self, outcome: OutcomeMask) -> bool {
        outcome.0 & self.lambda.0 == self.ones.0
    }

    /// Lambda as 1-based indices joined by `;`.
    pub fn lambda_label(&self) -> String {
        join_one_based(self.lambda.iter())
    }

    /// Assignment values in lambda order joined by `;`.
    pub fn assignment_label(&self) -> String {
        self.lambda
            .iter()
            .map(|i| if self.ones.contains(i) { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Debug for ConditioningSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.lambda.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}->{}", i, u8::from(self.ones.contains(i)))?;
        }
        write!(f, "}}")
    }
}

fn join_one_based(it: impl Iterator<Item = usize>) -> String {
    it.map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Marginal probabilities `p(i) = P[xi_i = 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalVector(pub Vec<f64>);

impl std::ops::Deref for MarginalVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The pick distribution `nu(v) = p(v) / k` of a k-homogeneous distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct PickDistribution(pub Vec<f64>);

impl std::ops::Deref for PickDistribution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An explicit probability distribution over subsets of `0..n`.
#[derive(Clone, Debug)]
pub struct Distribution {
    n: usize,
    support: Vec<(OutcomeMask, f64)>,
    cdf: Vec<f64>,
    homogeneity: Option<usize>,
}

impl Distribution {
    /// Builds a distribution from possibly unnormalized, possibly repeated
    /// weighted outcomes. Duplicates are merged and zero weights dropped.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (OutcomeMask, f64)>) -> Result<Self> {
        if n > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge {
                n,
                cap: MAX_GROUND_SET,
            });
        }
        let full = OutcomeMask::full(n);
        let mut merged: BTreeMap<OutcomeMask, f64> = BTreeMap::new();
        for (index, (mask, weight)) in entries.into_iter().enumerate() {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
            if !mask.is_subset_of(full) {
                OutcomeMask::new(mask.bits(), n)?;
            }
            *merged.entry(mask).or_insert(0.0) += weight;
        }
        let total: f64 = merged.values().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroWeights);
        }
        let support = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(m, w)| (m, w / total))
            .collect();
        Ok(Self::from_normalized(n, support))
    }

    /// Convenience constructor from 0-based element lists.
    pub fn from_sets<S: AsRef<[usize]>>(n: usize, entries: &[(S, f64)]) -> Result<Self> {
        let masks = entries
            .iter()
            .map(|(s, w)| Ok((OutcomeMask::from_elements(s.as_ref(), n)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, masks)
    }

    /// Uniform distribution over the given 0-based sets.
    pub fn uniform<S: AsRef<[usize]>>(n: usize, sets: &[S]) -> Result<Self> {
        let entries: Vec<(&[usize], f64)> = sets.iter().map(|s| (s.as_ref(), 1.0)).collect();
        Self::from_sets(n, &entries)
    }

    /// Point mass on one outcome.
    pub fn point_mass(n: usize, outcome: OutcomeMask) -> Result<Self> {
        Self::new(n, [(outcome, 1.0)])
    }

    // `support` must be sorted, duplicate-free and strictly positive.
    fn from_normalized(n: usize, support: Vec<(OutcomeMask, f64)>) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = support
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        let mut sizes = support.iter().map(|(m, _)| m.len());
        let homogeneity = sizes
            .next()
            .filter(|&k| support.iter().all(|(m, _)| m.len() == k));
        Distribution {
            n,
            support,
            cdf,
            homogeneity,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Support outcomes sorted by mask, with their probabilities.
    pub fn support(&self) -> &[(OutcomeMask, f64)] {
        &self.support
    }

    /// `Some(k)` when every outcome has exactly `k` elements.
    pub fn homogeneity(&self) -> Option<usize> {
        self.homogeneity
    }

    pub fn probability(&self, outcome: OutcomeMask) -> f64 {
        self.support
            .binary_search_by_key(&outcome, |&(m, _)| m)
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    /// Mass of the event described by `spec`.
    pub fn mass(&self, spec: &ConditioningSpec) -> f64 {
        self.support
            .iter()
            .filter(|(m, _)| spec.admits(*m))
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn is_feasible(&self, spec: &ConditioningSpec) -> bool {
        self.support.iter().any(|(m, _)| spec.admits(*m))
    }

    pub fn marginals(&self) -> MarginalVector {
        let mut p = vec![0.0; self.n];
        for &(m, w) in &self.support {
            for i in m.iter() {
                p[i] += w;
            }
        }
        MarginalVector(p)
    }

    /// The distribution conditioned on `spec`, still over `0..n`.
    pub fn condition(&self, spec: &ConditioningSpec) -> Result<Distribution> {
        if !spec.lambda().is_subset_of(OutcomeMask::full(self.n)) {
            OutcomeMask::new(spec.lambda().bits(), self.n)?;
        }
        let kept: Vec<(OutcomeMask, f64)> = self
            .support
            .iter()
            .copied()
            .filter(|(m, _)| spec.admits(*m))
            .collect();
        let total: f64 = kept.iter().map(|&(_, p)| p).sum();
        if kept.is_empty() || total <= 0.0 {
            return Err(Error::InfeasibleConditioning);
        }
        Ok(Self::from_normalized(
            self.n,
            kept.into_iter().map(|(m, p)| (m, p / total)).collect(),
        ))
    }

    pub fn pick_distribution(&self) -> Result<PickDistribution> {
        let k = match self.homogeneity {
            Some(k) if k >= 1 => k as f64,
            _ => return Err(Error::NotHomogeneous),
        };
        Ok(PickDistribution(
            self.marginals().0.into_iter().map(|p| p / k).collect(),
        ))
    }

    /// Pads every outcome `s` to `s ∪ {i + n : i ∉ s}` over `0..2n`.
    pub fn homogenize(&self) -> Result<Distribution> {
        let n2 = 2 * self.n;
        if n2 > MAX_GROUND_SET {
            return Err(Error::GroundSetTooLarge {
                n: n2,
                cap: MAX_GROUND_SET,
            });
        }
        let full = OutcomeMask::full(self.n).bits();
        let mut support: Vec<(OutcomeMask, f64)> = self
            .support
            .iter()
            .map(|&(m, p)| (OutcomeMask(m.0 | ((!m.0 & full) << self.n)), p))
            .collect();
        support.sort_by_key(|&(m, _)| m);
        Ok(Self::from_normalized(n2, support))
    }

    /// Draws one outcome by inverse CDF over the sorted support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeMask {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.support[idx.min(self.support.len() - 1)].0
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(s)?;
        file.into_distribution()
    }

    pub fn to_json_string(&self) -> String {
        let file = DistributionFile {
            n: self.n,
            support: self
                .support
                .iter()
                .map(|&(m, p)| SupportEntry {
                    set: m.iter().map(|i| i + 1).collect(),
                    p,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("distribution serializes")
    }
}

/// On-disk form: `{"n": int, "support": [{"set": [1-based], "p": number}]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub n: usize,
    pub support: Vec<SupportEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    pub set: Vec<usize>,
    pub p: f64,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<Distribution> {
        let n = self.n;
        let mut entries = Vec::with_capacity(self.support.len());
        for entry in self.support {
            let mut mask = OutcomeMask::EMPTY;
            for &e in &entry.set {
                if e == 0 || e > n {
                    return Err(Error::MaskOutOfRange {
                        element: e.saturating_sub(1),
                        n,
                    });
                }
                if mask.contains(e - 1) {
                    return Err(Error::Parse(format!("element {e} repeated in a set")));
                }
                mask = mask.with(e - 1);
            }
            entries.push((mask, entry.p));
        }
        Distribution::new(n, entries)
    }
}
