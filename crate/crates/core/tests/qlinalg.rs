use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netwit::qlinalg::{hermitian_eigenvalues, CMat, CVec, DensityMatrix, HermitianOperator, SubsystemSelector};
use netwit::random::{haar_unitary, random_state};
use netwit::states::{basis_vector, ghz_vector};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = idx % dims[k];
        idx /= dims[k];
    }
    d
}

fn index(d: &[usize], dims: &[usize]) -> usize {
    d.iter().zip(dims).fold(0, |acc, (&x, &n)| acc * n + x)
}

/// Partial trace by summing over matching traced indices.
fn oracle_partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let kd: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let side: usize = kd.iter().product();
    let mut out = CMat::zeros(side, side);
    let n = m.nrows();
    for r in 0..n {
        for col in 0..n {
            let dr = digits(r, dims);
            let dc = digits(col, dims);
            let traced_equal = (0..dims.len()).all(|k| keep.contains(&k) || dr[k] == dc[k]);
            if traced_equal {
                let kr: Vec<usize> = keep.iter().map(|&k| dr[k]).collect();
                let kc: Vec<usize> = keep.iter().map(|&k| dc[k]).collect();
                out[(index(&kr, &kd), index(&kc, &kd))] += m[(r, col)];
            }
        }
    }
    out
}

/// Permutation with `perm[i]` = new position of subsystem `i`, via the
/// explicit permutation matrix.
fn oracle_permute(m: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let n = m.nrows();
    let mut nd = vec![0; dims.len()];
    for (i, &p) in perm.iter().enumerate() {
        nd[p] = dims[i];
    }
    let mut p = CMat::zeros(n, n);
    for idx in 0..n {
        let d = digits(idx, dims);
        let mut e = vec![0; d.len()];
        for (i, &q) in perm.iter().enumerate() {
            e[q] = d[i];
        }
        p[(index(&e, &nd), idx)] = c(1.0);
    }
    &p * m * p.adjoint()
}

fn phi_plus() -> DensityMatrix {
    let mut v = CVec::zeros(4);
    v[0] = c(std::f64::consts::FRAC_1_SQRT_2);
    v[3] = c(std::f64::consts::FRAC_1_SQRT_2);
    DensityMatrix::pure(vec![2, 2], &v).unwrap()
}

fn ket(dims: &[usize], d: &[usize]) -> DensityMatrix {
    DensityMatrix::pure(dims.to_vec(), &basis_vector(dims, d)).unwrap()
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn tensor_of_basis_states() {
    let z = ket(&[2], &[0]);
    let zz = z.tensor(&z);
    assert_eq!(zz.dims(), &[2, 2]);
    assert_eq!(max_diff(zz.entries(), ket(&[2, 2], &[0, 0]).entries()), 0.0);
    let t = ket(&[2, 2], &[1, 0]).tensor(&ket(&[2], &[1]));
    assert_eq!(t.dims(), &[2, 2, 2]);
    assert_eq!(t.side(), 8);
}

#[test]
fn partial_trace_examples() {
    let m = phi_plus().partial_trace(&SubsystemSelector::new([0])).unwrap();
    assert!(max_diff(m.entries(), &(CMat::identity(2, 2) * c(0.5))) < 1e-15);
    let rho = random_state(&mut rng(1), &[2, 3], 3, false);
    let all = rho.partial_trace(&SubsystemSelector::all(2)).unwrap();
    assert!(max_diff(all.entries(), rho.entries()) < 1e-15);
    assert!(rho.partial_trace(&SubsystemSelector::new([2])).is_err());
    assert!(rho.partial_trace(&SubsystemSelector::new([0, 0])).is_err());
}

#[test]
fn partial_transpose_of_bell_state() {
    let pt = phi_plus().partial_transpose(&SubsystemSelector::new([1])).unwrap();
    let ev = pt.eigenvalues();
    let expect = [-0.5, 0.5, 0.5, 0.5];
    for (a, b) in ev.iter().zip(expect) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(pt.min_eigenvalue(), -0.5, epsilon = 1e-12);
}

#[test]
fn min_eigenvalue_examples() {
    assert_abs_diff_eq!(HermitianOperator::identity(vec![2, 2]).min_eigenvalue(), 1.0, epsilon = 1e-14);
    let zero = HermitianOperator::new(vec![3], CMat::zeros(3, 3)).unwrap();
    assert_abs_diff_eq!(zero.min_eigenvalue(), 0.0, epsilon = 1e-14);
}

#[test]
fn swap_of_basis_state() {
    let s = ket(&[2, 2], &[0, 1]).permute_subsystems(&[1, 0]).unwrap();
    assert_eq!(max_diff(s.entries(), ket(&[2, 2], &[1, 0]).entries()), 0.0);
    assert!(ket(&[2, 2], &[0, 1]).permute_subsystems(&[0, 0]).is_err());
}

#[test]
fn entropy_examples() {
    for d in 2..5 {
        let m = DensityMatrix::maximally_mixed(vec![d]);
        assert_abs_diff_eq!(m.von_neumann_entropy().unwrap(), (d as f64).log2(), epsilon = 1e-12);
    }
    assert_abs_diff_eq!(phi_plus().von_neumann_entropy().unwrap(), 0.0, epsilon = 1e-12);
    let diag = DensityMatrix::new(
        vec![2],
        CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.25), c(0.75)])),
    )
    .unwrap();
    let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
    assert_abs_diff_eq!(diag.von_neumann_entropy().unwrap(), h, epsilon = 1e-12);
}

#[test]
fn fidelity_examples() {
    let g = ghz_vector(2, 3);
    let ghz = DensityMatrix::pure(vec![2, 2, 2], &g).unwrap();
    assert_abs_diff_eq!(ghz.fidelity_with_pure(&g).unwrap(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(ket(&[2, 2, 2], &[0, 0, 0]).fidelity_with_pure(&g).unwrap(), 0.5, epsilon = 1e-12);
    let mm = DensityMatrix::maximally_mixed(vec![2, 2, 2]);
    assert_abs_diff_eq!(mm.fidelity_with_pure(&g).unwrap(), 0.125, epsilon = 1e-12);
    assert!(mm.fidelity_with_pure(&ghz_vector(2, 2)).is_err());
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 1..=3).prop_filter("side at most 27", |d| d.iter().product::<usize>() <= 27)
}

fn perm_of(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut s = seed;
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        p.swap(i, (s >> 33) as usize % (i + 1));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tensor_trace_and_partial_trace(seed in any::<u64>(), da in dims_strategy(), db in dims_strategy()) {
        let mut r = rng(seed);
        let a = random_state(&mut r, &da, 2, false);
        let b = random_state(&mut r, &db, 3, false);
        let ab = a.tensor(&b);
        // trace multiplicativity against a direct product of traces
        let tr = ab.entries().trace();
        prop_assert!((tr - a.entries().trace() * b.entries().trace()).norm() < 1e-12);
        let left: Vec<usize> = (0..da.len()).collect();
        let back = ab.partial_trace(&SubsystemSelector::new(left.clone())).unwrap();
        prop_assert!(max_diff(back.entries(), a.entries()) < 1e-12);
        let keep: Vec<usize> = (0..da.len() + db.len()).filter(|k| (seed >> k) & 1 == 1).collect();
        if !keep.is_empty() {
            let dims: Vec<usize> = da.iter().chain(&db).copied().collect();
            let pt = ab.partial_trace(&SubsystemSelector::new(keep.clone())).unwrap();
            prop_assert!(max_diff(pt.entries(), &oracle_partial_trace(ab.entries(), &dims, &keep)) < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_invariants(seed in any::<u64>(), dims in dims_strategy()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, &dims, 3, false);
        let part: Vec<usize> = (0..dims.len()).filter(|k| (seed >> (k + 7)) & 1 == 1).collect();
        let sel = SubsystemSelector::new(part);
        let pt = rho.partial_transpose(&sel).unwrap();
        let m = pt.entries();
        prop_assert!((m.trace() - c(1.0)).norm() < 1e-13);
        prop_assert!(max_diff(m, &m.adjoint()) < 1e-13);
        let twice = pt.partial_transpose(&sel).unwrap();
        prop_assert!(max_diff(twice.entries(), rho.entries()) < 1e-15);
        // a product of states stays PSD under any partial transpose
        let prod = random_state(&mut r, &[2], 2, false).tensor(&random_state(&mut r, &[2], 2, false));
        let ppt = prod.partial_transpose(&SubsystemSelector::new([(seed % 2) as usize])).unwrap();
        prop_assert!(ppt.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn permutation_invariants(seed in any::<u64>(), dims in dims_strategy()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, &dims, 2, false);
        let n = dims.len();
        let perm = perm_of(n, seed);
        let moved = rho.permute_subsystems(&perm).unwrap();
        prop_assert!(max_diff(moved.entries(), &oracle_permute(rho.entries(), &dims, &perm)) < 1e-14);
        let ea = hermitian_eigenvalues(rho.entries());
        let eb = hermitian_eigenvalues(moved.entries());
        for (a, b) in ea.iter().zip(&eb) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let back = moved.permute_subsystems(&inv).unwrap();
        prop_assert!(max_diff(back.entries(), rho.entries()) < 1e-14);
        // marginal on S equals the marginal of the moved state on π(S), reordered
        let s: Vec<usize> = (0..n).filter(|k| (seed >> (k + 3)) & 1 == 1).collect();
        if !s.is_empty() {
            let direct = rho.partial_trace(&SubsystemSelector::new(s.clone())).unwrap();
            let mut image: Vec<usize> = s.iter().map(|&k| perm[k]).collect();
            image.sort_unstable();
            let via = moved.partial_trace(&SubsystemSelector::new(image.clone())).unwrap();
            // position of each element of S inside the sorted image
            let order: Vec<usize> = s.iter().map(|&k| image.iter().position(|&x| x == perm[k]).unwrap()).collect();
            let reordered = direct.permute_subsystems(&order).unwrap();
            prop_assert!(max_diff(reordered.entries(), via.entries()) < 1e-12);
        }
    }

    #[test]
    fn entropy_invariances(seed in any::<u64>(), dims in dims_strategy()) {
        let mut r = rng(seed);
        let rho = random_state(&mut r, &dims, 1 + (seed % 4) as usize, false);
        let s = rho.von_neumann_entropy().unwrap();
        let perm = perm_of(dims.len(), seed ^ 0xabc);
        prop_assert!((rho.permute_subsystems(&perm).unwrap().von_neumann_entropy().unwrap() - s).abs() < 1e-9);
        let u = haar_unitary(&mut r, rho.side(), false);
        let rot: DMatrix<Complex64> = &u * rho.entries() * u.adjoint();
        let rot = (&rot + rot.adjoint()) * c(0.5);
        let rot = DensityMatrix::new(dims.clone(), rot).unwrap();
        prop_assert!((rot.von_neumann_entropy().unwrap() - s).abs() < 1e-9);
        let psi = netwit::random::haar_vector(&mut r, rho.side(), false);
        let f = rho.fidelity_with_pure(&psi).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }
}

#[test]
fn state_files_keep_full_precision() {
    let rho = random_state(&mut rng(9), &[2, 2], 3, false);
    let text = rho.to_json();
    let back = DensityMatrix::from_json(&text).unwrap();
    assert_eq!(back.entries(), rho.entries());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.json");
    rho.write(&path).unwrap();
    assert_eq!(DensityMatrix::read(&path).unwrap().entries(), rho.entries());
}
