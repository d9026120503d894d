//! Stochastic covering property (SCP) for explicit distributions.
//!
//! For a set `τ` pinned to ones and an element `v ∉ τ`, let `ξ''` be the
//! remaining coordinates conditioned on `ξ_v = 1` and `ξ'` the same
//! coordinates conditioned on `ξ_v = 0`. SCP asks for a coupling in which
//! `ξ'` equals `ξ''` or `ξ''` with one extra coordinate switched on. Such a
//! coupling exists iff the bipartite transport network
//! `source -> ξ'' outcomes -> allowed ξ' outcomes -> sink` carries a full unit
//! of flow.

use crate::distribution::{ConditioningSpec, Distribution, OutcomeMask};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::influence::{feasible_specs, linf_parameter, InfluenceKind, LinfOptions, DEFAULT_MAX_GROUND_SET};
use crate::par;

/// Flow value at which a floating-point instance counts as feasible.
pub const FLOAT_FEASIBILITY: f64 = 1.0 - 1e-9;

const MAX_DENOMINATOR: u64 = 1_000_000;
const MAX_COMMON_DENOMINATOR: u64 = 1 << 50;

/// Transport problem between the two conditionals at one `(τ, v)`.
#[derive(Clone, Debug)]
pub struct CouplingInstance {
    /// Outcomes of `ξ''` (conditioned on `ξ_v = 1`) with `τ ∪ {v}` removed.
    pub left: Vec<(OutcomeMask, f64)>,
    /// Outcomes of `ξ'` (conditioned on `ξ_v = 0`) with `τ ∪ {v}` removed.
    pub right: Vec<(OutcomeMask, f64)>,
    /// `(l, r)` index pairs with `left[l] ⊆ right[r]` and at most one extra bit.
    pub allowed: Vec<(usize, usize)>,
}

fn restricted(mu: &Distribution, spec: &ConditioningSpec, drop: OutcomeMask) -> Vec<(OutcomeMask, f64)> {
    let keep = !drop.bits();
    let mut out: Vec<(OutcomeMask, f64)> = Vec::new();
    let mut total = 0.0;
    for &(m, p) in mu.support() {
        if spec.admits(m) {
            let r = OutcomeMask::new(m.bits() & keep, mu.n()).expect("subset of valid mask");
            out.push((r, p));
            total += p;
        }
    }
    // Pinned coordinates are constant on each side, so the restriction is
    // injective and needs no merging.
    for (_, p) in &mut out {
        *p /= total;
    }
    out
}

impl CouplingInstance {
    /// `None` when either conditional is infeasible.
    pub fn build(mu: &Distribution, tau: OutcomeMask, v: usize) -> Option<CouplingInstance> {
        let base = ConditioningSpec::all_ones(tau);
        let on = base.pin(v, true);
        let off = base.pin(v, false);
        if !mu.is_feasible(&on) || !mu.is_feasible(&off) {
            return None;
        }
        let drop = tau.with(v);
        let left = restricted(mu, &on, drop);
        let right = restricted(mu, &off, drop);
        Some(Self::from_sides(left, right))
    }

    pub fn from_sides(left: Vec<(OutcomeMask, f64)>, right: Vec<(OutcomeMask, f64)>) -> Self {
        let mut allowed = Vec::new();
        for (l, &(x2, _)) in left.iter().enumerate() {
            for (r, &(x1, _)) in right.iter().enumerate() {
                if x2.is_subset_of(x1) && x1.len() - x2.len() <= 1 {
                    allowed.push((l, r));
                }
            }
        }
        CouplingInstance {
            left,
            right,
            allowed,
        }
    }

    /// Whether a coupling supported on `allowed` exists.
    pub fn coupling_exists(&self) -> bool {
        let masses: Vec<f64> = self.left.iter().chain(&self.right).map(|&(_, p)| p).collect();
        match common_scale(&masses) {
            Some(scale) => self.integer_feasible(scale),
            None => self.float_flow() >= FLOAT_FEASIBILITY,
        }
    }

    fn network<C: crate::flow::Capacity>(&self, cap: impl Fn(f64) -> C) -> (FlowNetwork<C>, usize, usize) {
        let l = self.left.len();
        let r = self.right.len();
        let (s, t) = (l + r, l + r + 1);
        let mut g = FlowNetwork::new(l + r + 2);
        for (i, &(_, p)) in self.left.iter().enumerate() {
            g.add_edge(s, i, cap(p));
        }
        for (j, &(_, p)) in self.right.iter().enumerate() {
            g.add_edge(l + j, t, cap(p));
        }
        for &(i, j) in &self.allowed {
            g.add_edge(i, l + j, C::INFINITE);
        }
        (g, s, t)
    }

    fn integer_feasible(&self, scale: u64) -> bool {
        let to_int = |p: f64| (p * scale as f64).round() as i64;
        let left_total: i64 = self.left.iter().map(|&(_, p)| to_int(p)).sum();
        let right_total: i64 = self.right.iter().map(|&(_, p)| to_int(p)).sum();
        if left_total != scale as i64 || right_total != scale as i64 {
            return self.float_flow() >= FLOAT_FEASIBILITY;
        }
        let (mut g, s, t) = self.network(to_int);
        g.max_flow(s, t) == scale as i64
    }

    /// Maximum flow with floating-point capacities.
    pub fn float_flow(&self) -> f64 {
        let (mut g, s, t) = self.network(|p| p);
        g.max_flow(s, t)
    }
}

// Smallest-denominator rational within 1e-12 of `x`, by continued fractions.
fn denominator(x: f64) -> Option<u64> {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > MAX_DENOMINATOR as i128 {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= 1e-12 {
            return Some(k2 as u64);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac <= 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Common denominator turning every mass into an integer, when one exists
/// within range.
fn common_scale(masses: &[f64]) -> Option<u64> {
    let mut lcm = 1u64;
    for &x in masses {
        let q = denominator(x)?;
        lcm = lcm.checked_mul(q / gcd(lcm, q))?;
        if lcm > MAX_COMMON_DENOMINATOR {
            return None;
        }
    }
    Some(lcm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScpVerdict {
    pub holds: bool,
    /// First violating `(τ, v)` in canonical order.
    pub witness: Option<(OutcomeMask, usize)>,
    pub instances_checked: usize,
}

pub fn check_scp(mu: &Distribution) -> Result<ScpVerdict> {
    check_scp_with(mu, DEFAULT_MAX_GROUND_SET)
}

pub fn check_scp_with(mu: &Distribution, max_ground_set: usize) -> Result<ScpVerdict> {
    if mu.n() > max_ground_set {
        return Err(Error::GroundSetTooLarge {
            n: mu.n(),
            cap: max_ground_set,
        });
    }
    let taus = feasible_specs(mu, InfluenceKind::OneSided, None);
    let pairs: Vec<(OutcomeMask, usize)> = taus
        .iter()
        .flat_map(|spec| {
            let tau = spec.lambda();
            (0..mu.n()).filter(move |&v| !tau.contains(v)).map(move |v| (tau, v))
        })
        .collect();
    let witness = par::find_map_first(&pairs, |&(tau, v)| {
        let inst = CouplingInstance::build(mu, tau, v)?;
        (!inst.coupling_exists()).then_some((tau, v))
    });
    Ok(ScpVerdict {
        holds: witness.is_none(),
        witness,
        instances_checked: pairs.len(),
    })
}

#[derive(Clone, Debug)]
pub struct ScpImplication {
    pub two_sided: f64,
    pub holds: bool,
}

/// For a homogeneous SCP distribution, checks two-sided parameter `<= 2`.
pub fn verify_scp_implies_twosided(mu: &Distribution) -> Result<ScpImplication> {
    if mu.homogeneity().is_none() {
        return Err(Error::NotHomogeneous);
    }
    let verdict = check_scp(mu)?;
    if !verdict.holds {
        return Err(Error::InvalidParameter(
            "distribution does not have the stochastic covering property".into(),
        ));
    }
    let opts = LinfOptions {
        keep_rows: false,
        ..Default::default()
    };
    let two_sided = linf_parameter(mu, InfluenceKind::TwoSided, &opts)?.d_inf;
    Ok(ScpImplication {
        two_sided,
        holds: two_sided <= 2.0 + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(e: &[usize], n: usize) -> OutcomeMask {
        OutcomeMask::from_elements(e, n).unwrap()
    }

    #[test]
    fn mu_tri_has_scp() {
        let mu = Distribution::uniform(3, &[[0, 1], [0, 2], [1, 2]]).unwrap();
        let v = check_scp(&mu).unwrap();
        assert!(v.holds);
        assert!(verify_scp_implies_twosided(&mu).unwrap().holds);
    }

    #[test]
    fn product_has_scp() {
        let entries: Vec<(OutcomeMask, f64)> =
            (0..8u64).map(|b| (OutcomeMask::new(b, 3).unwrap(), 1.0)).collect();
        let mu = Distribution::new(3, entries).unwrap();
        assert!(check_scp(&mu).unwrap().holds);
    }

    #[test]
    fn disjoint_pairs_fail_with_witness() {
        let mu = Distribution::uniform(4, &[[0, 1], [2, 3]]).unwrap();
        let v = check_scp(&mu).unwrap();
        assert!(!v.holds);
        assert_eq!(v.witness, Some((OutcomeMask::EMPTY, 0)));
        let inst = CouplingInstance::build(&mu, OutcomeMask::EMPTY, 0).unwrap();
        assert_eq!(inst.left, vec![(mask(&[1], 4), 1.0)]);
        assert_eq!(inst.right, vec![(mask(&[2, 3], 4), 1.0)]);
        assert!(inst.allowed.is_empty());
        assert!(verify_scp_implies_twosided(&mu).is_err());
    }

    #[test]
    fn point_mass_has_no_instances() {
        let mu = Distribution::uniform(3, &[[0, 1]]).unwrap();
        let v = check_scp(&mu).unwrap();
        assert!(v.holds);
        assert!(verify_scp_implies_twosided(&mu).unwrap().holds);
    }

    #[test]
    fn rational_scaling() {
        assert_eq!(denominator(1.0 / 3.0), Some(3));
        assert_eq!(denominator(0.4), Some(5));
        assert_eq!(denominator(1.0), Some(1));
        assert_eq!(common_scale(&[0.5, 1.0 / 3.0, 1.0 / 6.0]), Some(6));
        assert_eq!(denominator(std::f64::consts::PI - 3.0), None);
    }

    #[test]
    fn irrational_masses_use_float_flow() {
        let a = 1.0 / std::f64::consts::PI;
        let left = vec![(mask(&[0], 3), a), (mask(&[1], 3), 1.0 - a)];
        let right = vec![(mask(&[0, 2], 3), a), (mask(&[1, 2], 3), 1.0 - a)];
        assert!(CouplingInstance::from_sides(left.clone(), right).coupling_exists());
        let right = vec![(mask(&[0, 2], 3), 1.0 - a), (mask(&[1, 2], 3), a)];
        assert!(!CouplingInstance::from_sides(left, right).coupling_exists());
    }

    #[test]
    fn ground_set_cap() {
        let mu = Distribution::uniform(3, &[[0, 1]]).unwrap();
        assert!(matches!(
            check_scp_with(&mu, 2),
            Err(Error::GroundSetTooLarge { .. })
        ));
    }
}
