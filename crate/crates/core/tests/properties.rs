use linf_core::concentration::{expected_sum, tail_bound, MatrixEnsemble};
use linf_core::influence::{
    ami_parameter, feasible_specs, linf_parameter, one_sided_influence, two_sided_influence, InfluenceKind,
    LinfOptions,
};
use linf_core::linalg::Matrix;
use linf_core::scp::{check_scp, CouplingInstance};
use linf_core::{ConditioningSpec, Distribution, OutcomeMask};
use proptest::prelude::*;

/// Arbitrary distribution on `1..=max_n` elements; roughly half the outcomes
/// carry mass.
fn distribution(max_n: usize) -> impl Strategy<Value = Distribution> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], 1 << n).prop_filter_map(
            "needs positive mass",
            move |w| {
                let entries = w
                    .iter()
                    .enumerate()
                    .map(|(b, &x)| (OutcomeMask::new(b as u64, n).unwrap(), x));
                Distribution::new(n, entries).ok()
            },
        )
    })
}

fn homogeneous(max_n: usize) -> impl Strategy<Value = Distribution> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), 1..n))
        .prop_flat_map(|(n, k)| {
            let subsets: Vec<u64> = (0..1u64 << n).filter(|b| b.count_ones() as usize == k).collect();
            let len = subsets.len();
            prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], len).prop_filter_map(
                "needs positive mass",
                move |w| {
                    let entries = subsets
                        .iter()
                        .zip(&w)
                        .map(|(&b, &x)| (OutcomeMask::new(b, n).unwrap(), x));
                    Distribution::new(n, entries).ok()
                },
            )
        })
}

fn quiet() -> LinfOptions {
    LinfOptions {
        keep_rows: false,
        ..Default::default()
    }
}

fn permuted(mu: &Distribution, perm: &[usize]) -> Distribution {
    let entries = mu.support().iter().map(|&(m, p)| {
        let bits = m.iter().fold(0u64, |acc, i| acc | 1 << perm[i]);
        (OutcomeMask::new(bits, mu.n()).unwrap(), p)
    });
    Distribution::new(mu.n(), entries).unwrap()
}

/// Hall-type certificate for the transport problem: a coupling exists iff
/// every set of left outcomes has at most as much mass as its neighborhood.
fn transport_feasible_by_subsets(inst: &CouplingInstance) -> bool {
    let l = inst.left.len();
    (1u32..1 << l).all(|set| {
        let mass: f64 = (0..l).filter(|i| set >> i & 1 == 1).map(|i| inst.left[i].1).sum();
        let mut reach = vec![false; inst.right.len()];
        for &(i, j) in &inst.allowed {
            if set >> i & 1 == 1 {
                reach[j] = true;
            }
        }
        let cover: f64 = reach
            .iter()
            .zip(&inst.right)
            .filter(|(r, _)| **r)
            .map(|(_, &(_, p))| p)
            .sum();
        mass <= cover + 1e-12
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_are_normalized(mu in distribution(6)) {
        let total: f64 = mu.support().iter().map(|&(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(mu.support().iter().all(|&(_, p)| p > 0.0));
    }

    #[test]
    fn conditioning_is_bayes(mu in distribution(5), lam in 0u64..32, ones in 0u64..32) {
        let n = mu.n();
        let full = (1u64 << n) - 1;
        let lambda = OutcomeMask::new(lam & full, n).unwrap();
        let spec = ConditioningSpec::new(lambda, OutcomeMask::new(ones & lam & full, n).unwrap()).unwrap();
        let mass = mu.mass(&spec);
        match mu.condition(&spec) {
            Ok(cond) => {
                for &(m, p) in mu.support() {
                    let want = if spec.admits(m) { p / mass } else { 0.0 };
                    prop_assert!((cond.probability(m) - want).abs() <= 1e-12);
                }
            }
            Err(_) => prop_assert_eq!(mass, 0.0),
        }
    }

    #[test]
    fn homogenization_pads_marginals(mu in distribution(6)) {
        let n = mu.n();
        let hom = mu.homogenize().unwrap();
        prop_assert_eq!(hom.homogeneity(), Some(n));
        let p = mu.marginals();
        let q = hom.marginals();
        for i in 0..n {
            prop_assert!((q[i] - p[i]).abs() <= 1e-12);
            prop_assert!((q[i + n] - (1.0 - p[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn covering_verdict_ignores_labels(mu in distribution(4), shuffle in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let perm: Vec<usize> = shuffle.iter().copied().filter(|&i| i < mu.n()).collect();
        let relabeled = permuted(&mu, &perm);
        prop_assert_eq!(check_scp(&mu).unwrap().holds, check_scp(&relabeled).unwrap().holds);
    }

    #[test]
    fn flow_agrees_with_subset_certificate(mu in distribution(4)) {
        let n = mu.n();
        for spec in feasible_specs(&mu, InfluenceKind::OneSided, None) {
            for v in (0..n).filter(|&v| !spec.lambda().contains(v)) {
                if let Some(inst) = CouplingInstance::build(&mu, spec.lambda(), v) {
                    if inst.left.len() <= 8 {
                        prop_assert_eq!(inst.coupling_exists(), transport_feasible_by_subsets(&inst));
                    }
                }
            }
        }
    }

    #[test]
    fn tail_bound_is_monotone(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, mu in 0.0f64..50.0,
                              big_d in 0.1f64..5.0, dim in 1usize..8, r in 0.1f64..3.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let at = |delta: f64, mu: f64, d: f64| tail_bound(delta, mu, d, dim, r).unwrap();
        prop_assert!(at(hi, mu, big_d) <= at(lo, mu, big_d) + 1e-15);
        prop_assert!(at(hi, mu + 1.0, big_d) <= at(hi, mu, big_d) + 1e-15);
        prop_assert!(at(hi, mu, big_d * 1.5) >= at(hi, mu, big_d) - 1e-15);
        prop_assert!((at(0.0, mu, big_d) - dim as f64).abs() <= 1e-12);
    }

    #[test]
    fn one_sided_rows_scale_two_sided_rows(mu in distribution(5)) {
        let p_all = mu.marginals();
        for spec in feasible_specs(&mu, InfluenceKind::OneSided, None) {
            let one = one_sided_influence(&mu, spec.lambda()).unwrap();
            let two = two_sided_influence(&mu, spec).unwrap();
            let cond = mu.condition(&spec).unwrap().marginals();
            for i in 0..mu.n() {
                if one.feasible_rows[i] && two.feasible_rows[i] {
                    for j in (0..mu.n()).filter(|&j| !spec.lambda().contains(j)) {
                        let want = (1.0 - cond[i]) * two.entry(i, j);
                        prop_assert!((one.entry(i, j) - want).abs() <= 1e-12);
                    }
                }
            }
        }
        let a = linf_parameter(&mu, InfluenceKind::OneSided, &quiet()).unwrap().d_inf;
        let b = linf_parameter(&mu, InfluenceKind::TwoSided, &quiet()).unwrap().d_inf;
        prop_assert!(a <= b + 1e-12, "{} > {} with marginals {:?}", a, b, p_all);
    }

    #[test]
    fn parameter_paths_agree(mu in homogeneous(6)) {
        let report = linf_parameter(&mu, InfluenceKind::OneSided, &quiet()).unwrap();
        let direct = feasible_specs(&mu, InfluenceKind::OneSided, None)
            .iter()
            .map(|s| one_sided_influence(&mu, s.lambda()).unwrap().norm_inf())
            .fold(0.0, f64::max);
        prop_assert!((report.d_inf - direct).abs() <= 1e-12);
        prop_assert!((report.d_am.unwrap() - ami_parameter(&mu).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn expected_sum_is_linear(mu in distribution(5), seed in 0u64..1000) {
        let n = mu.n();
        let mats: Vec<Matrix> = (0..n)
            .map(|i| {
                let a = ((seed + i as u64) % 7) as f64 / 7.0;
                Matrix::from_row_slice(2, 2, &[a, 0.1 * a, 0.1 * a, 1.0 - a])
            })
            .collect();
        let ens = MatrixEnsemble::new(2, mats, 1.0).unwrap();
        let mut direct = Matrix::zeros(2, 2);
        for &(m, p) in mu.support() {
            direct += ens.sum_over(m) * p;
        }
        prop_assert!((expected_sum(&mu, &ens).unwrap() - direct).amax() <= 1e-12);
    }
}
