use nalgebra::DMatrix;
use netwit_sdp::{Field, InteriorPoint, LinearForm, SdpProblem, Sense, SolveStatus, SolverBackend};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Deterministic pseudo-random Hermitian matrix (no RNG dependency needed here).
fn hermitian(n: usize, seed: u64, complex: bool) -> DMatrix<Complex64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut m = DMatrix::from_fn(n, n, |_, _| c(next(), if complex { next() } else { 0.0 }));
    m = &m + m.adjoint();
    m
}

fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn max_eig_problem(w: &DMatrix<Complex64>, field: Field) -> (SdpProblem, netwit_sdp::BlockId) {
    let mut p = SdpProblem::new();
    let x = p.add_block("x", w.nrows(), field);
    p.add_constraint(p.trace(x), 1.0, "trace");
    p.set_objective(p.inner_with(x, w), Sense::Maximize);
    (p, x)
}

#[test]
fn largest_eigenvalue_real() {
    for seed in 0..4 {
        let w = hermitian(7, seed, false);
        let (p, _) = max_eig_problem(&w, Field::Real);
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
        let lmax = *eigenvalues(&w).last().unwrap();
        assert!((sol.objective - lmax).abs() < 1e-7, "{} vs {lmax}", sol.objective);
    }
}

#[test]
fn largest_eigenvalue_complex() {
    for seed in 10..14 {
        let w = hermitian(6, seed, true);
        let (p, x) = max_eig_problem(&w, Field::Complex);
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
        let lmax = *eigenvalues(&w).last().unwrap();
        assert!((sol.objective - lmax).abs() < 1e-7);
        // the primal block reproduces the objective
        let val = (&w * sol.block(x)).trace().re;
        assert!((val - lmax).abs() < 1e-6);
    }
}

#[test]
fn dual_certificate_bounds_every_feasible_point() {
    let w = hermitian(5, 99, true);
    let (p, x) = max_eig_problem(&w, Field::Complex);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert!(sol.status.is_solved());
    let dual = sol.block_dual(x);
    assert!(eigenvalues(dual)[0] > -1e-7, "dual block must be PSD");
    for seed in 0..5 {
        // random density matrix A·A† / tr
        let a = hermitian(5, 500 + seed, true);
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let obj = (&w * &rho).trace().re;
        let pairing = (dual * &rho).trace().re;
        assert!((obj - (sol.dual_objective - pairing)).abs() < 1e-6);
    }
}

#[test]
fn positive_part_via_minimization() {
    // min tr X  s.t.  X ⪰ A, X ⪰ 0  has value Σ max(λ_i(A), 0)
    let a = hermitian(6, 7, true);
    let mut p = SdpProblem::new();
    let x = p.add_block("x", 6, Field::Complex);
    let y = p.add_block("y", 6, Field::Complex);
    for r in 0..6 {
        for col in r..6 {
            let f = &(&p.entry(x, r, col) - &p.entry(y, r, col));
            p.add_complex_constraint(f, a[(r, col)], &format!("y=x-a[{r},{col}]"));
        }
    }
    p.set_objective(p.trace(x), Sense::Minimize);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
    let want: f64 = eigenvalues(&a).iter().map(|l| l.max(0.0)).sum();
    assert!((sol.objective - want).abs() < 1e-7, "{} vs {want}", sol.objective);
}

#[test]
fn contradictory_traces_are_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_block("x", 4, Field::Complex);
    p.add_constraint(p.trace(x), 1.0, "tr=1");
    p.add_constraint(p.trace(x), 2.0, "tr=2");
    p.set_objective(p.entry(x, 0, 0).re, Sense::Maximize);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn fixed_negative_diagonal_is_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_block("x", 2, Field::Real);
    p.add_constraint(p.entry(x, 0, 0).re, -1.0, "neg");
    p.set_objective(p.entry(x, 1, 1).re, Sense::Minimize);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn conic_infeasibility_is_detected() {
    // x00 + x11 = 1 and x01 = 2 cannot be PSD
    let mut p = SdpProblem::new();
    let x = p.add_block("x", 2, Field::Real);
    p.add_constraint(p.trace(x), 1.0, "tr");
    p.add_constraint(p.entry(x, 0, 1).re, 2.0, "off");
    p.set_objective(LinearForm::new(), Sense::Maximize);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible, "{}", sol.message);
}

#[test]
fn equality_coupled_blocks() {
    // two real blocks sharing a marginal-like constraint: x00 = y11, maximize x00 + y00
    let mut p = SdpProblem::new();
    let x = p.add_block("x", 2, Field::Real);
    let y = p.add_block("y", 2, Field::Real);
    p.add_constraint(p.trace(x), 1.0, "trx");
    p.add_constraint(p.trace(y), 1.0, "try");
    let link = &(&p.entry(x, 0, 0).re + &p.entry(x, 1, 1).re) - &p.entry(y, 1, 1).re;
    p.add_constraint(link, 0.75, "link");
    let obj = &p.entry(x, 0, 0).re + &p.entry(y, 0, 0).re;
    p.set_objective(obj, Sense::Maximize);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
    // y11 = 0.25 forces y00 = 0.75; x00 ≤ 1
    assert!((sol.objective - 1.75).abs() < 1e-7);
}
