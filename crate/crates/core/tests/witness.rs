use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netwit::qlinalg::{CMat, DensityMatrix};
use netwit::random::{ginibre, haar_unitary, random_state};
use netwit::states::{basis_vector, ghz_state, ghz_vector, ProductMeasurement};
use netwit::witness::{
    entropic_witness, entropic_witness_best, entropic_witness_k, fidelity_witness, ghz_fidelity_bound,
    lemma_bounds, WitnessReport, DEFAULT_WITNESS_TOL,
};

fn comp(n: usize, d: usize) -> ProductMeasurement {
    ProductMeasurement::computational(&vec![d; n])
}

#[test]
fn ghz_violates_entropic_witness() {
    for d in 2..=3 {
        let r = entropic_witness(&ghz_state(d, 3), &comp(3, d)).unwrap();
        let log_d = (d as f64).log2();
        assert_abs_diff_eq!(r.lhs, log_d, epsilon = 1e-10);
        assert_abs_diff_eq!(r.rhs, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.margin, log_d, epsilon = 1e-10);
        assert!(r.violated);
    }
}

#[test]
fn classical_ghz_mixture_saturates_entropic_witness() {
    let z = DensityMatrix::pure(vec![2, 2, 2], &basis_vector(&[2, 2, 2], &[0, 0, 0])).unwrap();
    let o = DensityMatrix::pure(vec![2, 2, 2], &basis_vector(&[2, 2, 2], &[1, 1, 1])).unwrap();
    let rho = DensityMatrix::mixture(&[(0.5, &z), (0.5, &o)]).unwrap();
    let r = entropic_witness(&rho, &comp(3, 2)).unwrap();
    assert_abs_diff_eq!(r.lhs, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(r.rhs, 1.0, epsilon = 1e-10);
    assert!(!r.violated);
}

#[test]
fn maximally_mixed_state_is_not_flagged() {
    let rho = DensityMatrix::maximally_mixed(vec![2, 2, 2]);
    let r = entropic_witness(&rho, &comp(3, 2)).unwrap();
    // uniform independent bits: H(a:b) = H(b:c) = 0, H(b) = 1
    assert_abs_diff_eq!(r.lhs, -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(r.rhs, 2.0, epsilon = 1e-10);
    assert!(!r.violated);
    let f = fidelity_witness(&rho, 2, 3).unwrap();
    assert_abs_diff_eq!(f.lhs, 0.125, epsilon = 1e-12);
    assert!(!f.violated);
}

#[test]
fn entropic_witness_rejects_wrong_party_count() {
    assert!(entropic_witness(&ghz_state(2, 2), &comp(2, 2)).is_err());
    assert!(entropic_witness_k(&ghz_state(2, 2), &comp(2, 2)).is_err());
}

#[test]
fn general_k_witness() {
    let r = entropic_witness_k(&ghz_state(2, 4), &comp(4, 2)).unwrap();
    assert_abs_diff_eq!(r.lhs, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(r.rhs, 0.0, epsilon = 1e-10);
    assert!(r.violated);
    for k in 3..=5 {
        let dims = vec![2; k];
        let zero = DensityMatrix::pure(dims.clone(), &basis_vector(&dims, &vec![0; k])).unwrap();
        let r = entropic_witness_k(&zero, &comp(k, 2)).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rhs, 0.0, epsilon = 1e-10);
        assert!(!r.violated);
    }
}

#[test]
fn general_k_reduces_to_three_parties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rho = random_state(&mut rng, &[2, 2, 2], 2, false);
        let bases: Vec<CMat> = (0..3).map(|_| haar_unitary(&mut rng, 2, false)).collect();
        let meas = ProductMeasurement::from_bases(&bases).unwrap();
        let a = entropic_witness(&rho, &meas).unwrap();
        let b = entropic_witness_k(&rho, &meas).unwrap();
        assert_abs_diff_eq!(a.lhs, b.lhs, epsilon = 1e-12);
        assert_abs_diff_eq!(a.rhs, b.rhs, epsilon = 1e-12);
    }
}

#[test]
fn best_relabeling_dominates_fixed_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let rho = random_state(&mut rng, &[2, 2, 2], 1, false);
        let m = comp(3, 2);
        let fixed = entropic_witness(&rho, &m).unwrap();
        let best = entropic_witness_best(&rho, &m).unwrap();
        assert!(best.margin >= fixed.margin - 1e-12);
        assert!(best.name.starts_with("entropic["));
    }
}

#[test]
fn fidelity_bound_closed_forms() {
    assert_abs_diff_eq!(ghz_fidelity_bound(2, 3), 4.0 / 33.0 * (6.0 + 3f64.sqrt()), epsilon = 1e-14);
    assert!((ghz_fidelity_bound(2, 3) - 0.9372).abs() < 5e-5);
    for d in 2..=10 {
        let df = d as f64;
        let three = 2.0 * df * (3.0 * df + (2.0 * df - 1.0).sqrt()) / (1.0 - 2.0 * df + 9.0 * df * df);
        assert_abs_diff_eq!(ghz_fidelity_bound(d, 3), three, epsilon = 1e-12);
        for k in 3..=8 {
            assert!(ghz_fidelity_bound(d, k) < 1.0, "d={d} k={k}");
        }
    }
}

#[test]
fn fidelity_witness_on_noisy_ghz() {
    let g = ghz_state(2, 3);
    let r = fidelity_witness(&g, 2, 3).unwrap();
    assert_abs_diff_eq!(r.lhs, 1.0, epsilon = 1e-12);
    assert!(r.violated);
    // fidelity is (1 − v)/8 + v, linear in v
    let v_star = (ghz_fidelity_bound(2, 3) - 0.125) / 0.875;
    let mm = DensityMatrix::maximally_mixed(vec![2, 2, 2]);
    for (v, expect) in [(v_star - 1e-4, false), (v_star + 1e-4, true)] {
        let rho = DensityMatrix::mixture(&[(v, &g), (1.0 - v, &mm)]).unwrap();
        assert_eq!(fidelity_witness(&rho, 2, 3).unwrap().violated, expect);
    }
    assert!(fidelity_witness(&g, 3, 3).is_err());
}

#[test]
fn lemma_bound_values() {
    let (pmax, pmin) = lemma_bounds(1.0, 2).unwrap();
    assert_abs_diff_eq!(pmax, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(pmin, 1.0, epsilon = 1e-15);
    let (pmax, pmin) = lemma_bounds(0.0, 2).unwrap();
    assert_abs_diff_eq!(pmax, 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(pmin, 0.0, epsilon = 1e-15);
    assert!(lemma_bounds(1.1, 2).is_err());
    assert!(lemma_bounds(-0.1, 2).is_err());
    // the two bounds cross exactly where the d=2 fidelity witness becomes available
    let mut crossed = None;
    for i in 0..=10_000 {
        let f = i as f64 / 10_000.0;
        let (hi, lo) = lemma_bounds(f, 2).unwrap();
        if crossed.is_none() && hi < lo {
            crossed = Some(f);
        }
    }
    let f = crossed.expect("bounds cross below F = 1");
    assert!(f > 0.7 && f < 1.0);
}

#[test]
fn margin_is_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let rho = random_state(&mut rng, &[2, 2, 2], 3, false);
        let g = ginibre(&mut rng, 8, 8, false);
        let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        let h = &h - CMat::identity(8, 8) * (h.trace() / Complex64::new(8.0, 0.0));
        let dir = &h / Complex64::new(h.norm(), 0.0);
        // mix towards I/8 first so the perturbed matrix stays PSD
        let base = rho.entries() * Complex64::new(0.99, 0.0) + CMat::identity(8, 8) * Complex64::new(0.01 / 8.0, 0.0);
        let a = DensityMatrix::new(vec![2, 2, 2], base.clone()).unwrap();
        let b = DensityMatrix::new(vec![2, 2, 2], base + dir * Complex64::new(1e-6, 0.0)).unwrap();
        let m = comp(3, 2);
        let ra = entropic_witness(&a, &m).unwrap();
        let rb = entropic_witness(&b, &m).unwrap();
        assert!((ra.lhs - rb.lhs).abs() < 1e-3);
        assert!((ra.margin - rb.margin).abs() < 1e-3);
    }
}

#[test]
fn report_json_fields() {
    let r = WitnessReport::new("x", 1.0, 0.5, DEFAULT_WITNESS_TOL);
    let v = serde_json::to_value(&r).unwrap();
    for key in ["name", "lhs", "rhs", "violated", "margin", "tol"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

proptest! {
    #[test]
    fn violated_iff_margin_exceeds_tol(lhs in -5.0f64..5.0, rhs in -5.0f64..5.0, tol in 0.0f64..1e-3) {
        let r = WitnessReport::new("w", lhs, rhs, tol);
        prop_assert_eq!(r.violated, r.margin > tol);
        prop_assert_eq!(r.margin, lhs - rhs);
    }

    #[test]
    fn product_states_never_violate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts: Vec<DensityMatrix> = (0..3)
            .map(|_| {
                let rank = rng.random_range(1..=2);
                random_state(&mut rng, &[2], rank, false)
            })
            .collect();
        let rho = parts[0].tensor(&parts[1]).tensor(&parts[2]);
        prop_assert!(!entropic_witness_best(&rho, &comp(3, 2)).unwrap().violated);
        prop_assert!(!fidelity_witness(&rho, 2, 3).unwrap().violated);
        prop_assert!(rho.fidelity_with_pure(&ghz_vector(2, 3)).unwrap() <= 0.5 + 1e-12);
    }
}

#[test]
fn best_order_matches_explicit_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho = random_state(&mut rng, &[2, 2, 2], 1, false);
    let m = comp(3, 2);
    let best = entropic_witness_best(&rho, &m).unwrap();
    let mut margins = Vec::new();
    for perm in [[0, 1, 2], [2, 1, 0], [2, 0, 1], [0, 2, 1], [1, 2, 0], [1, 0, 2]] {
        let r = rho.permute_subsystems(&perm).unwrap();
        margins.push(entropic_witness(&r, &m.permuted(&perm)).unwrap().margin);
    }
    let max = margins.iter().cloned().fold(f64::MIN, f64::max);
    assert_abs_diff_eq!(best.margin, max, epsilon = 1e-12);
}
