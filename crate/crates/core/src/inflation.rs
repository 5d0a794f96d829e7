//! Ring-inflation relaxation of the triangle network.
//!
//! Two copies of each source are rewired into a pair of triangles (state τ on
//! A₁B₁C₁A₂B₂C₂) and a hexagon (state γ on A₃B₃C₃A₄B₄C₄). If ρ_ABC came from
//! bipartite sources, both exist with
//!
//! * τ and γ invariant under exchanging the two copies,
//! * τ_A₁B₁C₁ = τ_A₂B₂C₂ = ρ,
//! * γ_A₃B₃A₄B₄ = τ_A₁B₁A₂B₂, γ_B₃C₃B₄C₄ = τ_B₁C₁B₂C₂, γ_C₃A₄C₄A₃ = τ_C₁A₁C₂A₂,
//! * τ PPT across the two copies, and γ_A₃B₃C₃B₄, γ_B₃C₃A₄C₄, γ_C₃A₄B₄A₃
//!   PPT on their last system.
//!
//! Infeasibility for a given ρ therefore certifies genuine network
//! 3-entanglement, and maximizing a fidelity over the relaxation bounds what
//! network-2 states can reach.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use netwit_sdp::{
    BlockId, ComplexForm, Field, SdpProblem, SdpSolution, Sense, SolveStatus, SolverBackend,
    SolverStats,
};

use crate::error::{domain, NetwitError, Result};
use crate::qlinalg::{compose, digits, CMat, CVec, DensityMatrix, HermitianOperator};

/// Slack optimum above which a fixed state is declared outside the relaxation.
pub const SLACK_TOL: f64 = 1e-6;

const QUBITS6: [usize; 6] = [2; 6];
const QUBITS3: [usize; 3] = [2; 3];

/// Matrix of linear forms in the problem parameters, row-major.
#[derive(Clone, Debug)]
pub(crate) struct FormMatrix {
    dims: Vec<usize>,
    side: usize,
    data: Vec<ComplexForm>,
}

impl FormMatrix {
    pub(crate) fn of_block(p: &SdpProblem, id: BlockId, dims: &[usize]) -> Self {
        let side: usize = dims.iter().product();
        assert_eq!(side, p.block(id).side);
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                data.push(p.entry(id, r, c));
            }
        }
        Self {
            dims: dims.to_vec(),
            side,
            data,
        }
    }

    pub(crate) fn at(&self, r: usize, c: usize) -> &ComplexForm {
        &self.data[r * self.side + c]
    }

    /// Marginal on `keep`, with output subsystems in the order listed.
    pub(crate) fn marginal(&self, keep: &[usize]) -> Self {
        let n = self.dims.len();
        let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let kdims: Vec<usize> = keep.iter().map(|&i| self.dims[i]).collect();
        let tdims: Vec<usize> = traced.iter().map(|&i| self.dims[i]).collect();
        let kside: usize = kdims.iter().product();
        let tside: usize = tdims.iter().product();
        let full = |kd: &[usize], td: &[usize]| {
            let mut d = vec![0; n];
            for (j, &i) in keep.iter().enumerate() {
                d[i] = kd[j];
            }
            for (j, &i) in traced.iter().enumerate() {
                d[i] = td[j];
            }
            compose(&d, &self.dims)
        };
        let mut kd_r = vec![0; keep.len()];
        let mut kd_c = vec![0; keep.len()];
        let mut td = vec![0; traced.len()];
        let mut data = Vec::with_capacity(kside * kside);
        for r in 0..kside {
            digits(r, &kdims, &mut kd_r);
            for c in 0..kside {
                digits(c, &kdims, &mut kd_c);
                let mut f = ComplexForm::zero();
                for t in 0..tside {
                    digits(t, &tdims, &mut td);
                    f.add_assign(self.at(full(&kd_r, &td), full(&kd_c, &td)));
                }
                data.push(f);
            }
        }
        Self {
            dims: kdims,
            side: kside,
            data,
        }
    }

    pub(crate) fn partial_transpose(&self, part: &[usize]) -> Self {
        let n = self.dims.len();
        let mut di = vec![0; n];
        let mut dj = vec![0; n];
        let mut data = vec![ComplexForm::zero(); self.side * self.side];
        for r in 0..self.side {
            for c in 0..self.side {
                digits(r, &self.dims, &mut di);
                digits(c, &self.dims, &mut dj);
                for &k in part {
                    std::mem::swap(&mut di[k], &mut dj[k]);
                }
                data[compose(&di, &self.dims) * self.side + compose(&dj, &self.dims)] =
                    self.at(r, c).clone();
            }
        }
        Self {
            dims: self.dims.clone(),
            side: self.side,
            data,
        }
    }

    /// `self − s·other`.
    pub(crate) fn minus_scaled(&self, other: &Self, s: f64) -> Self {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let mut f = a.clone();
                f.add_scaled(b, Complex64::new(-s, 0.0));
                f
            })
            .collect();
        Self {
            dims: self.dims.clone(),
            side: self.side,
            data,
        }
    }
}

/// Imposes `a = b` on the upper triangle (the lower one follows by Hermiticity).
pub(crate) fn equate(p: &mut SdpProblem, a: &FormMatrix, b: &FormMatrix, label: &str) {
    assert_eq!(a.side, b.side);
    for r in 0..a.side {
        for c in r..a.side {
            let f = a.at(r, c) - b.at(r, c);
            p.add_complex_constraint(&f, Complex64::new(0.0, 0.0), &format!("{label}[{r},{c}]"));
        }
    }
}

/// Which PPT constraints to impose (all by default).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PptSelection {
    /// τ transposed on A₂B₂C₂.
    pub tau: bool,
    /// γ_A₃B₃C₃B₄ transposed on B₄.
    pub gamma_b4: bool,
    /// γ_B₃C₃A₄C₄ transposed on C₄.
    pub gamma_c4: bool,
    /// γ_C₃A₄B₄A₃ transposed on A₃.
    pub gamma_a3: bool,
}

impl Default for PptSelection {
    fn default() -> Self {
        Self {
            tau: true,
            gamma_b4: true,
            gamma_c4: true,
            gamma_a3: true,
        }
    }
}

/// Number field of the SDP blocks. `Auto` picks real blocks when the target
/// or fixed state is real: the relaxation is invariant under complex
/// conjugation, so averaging a solution with its conjugate loses nothing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldChoice {
    #[default]
    Auto,
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InflationOptions {
    pub field: FieldChoice,
    pub ppt: PptSelection,
}

#[derive(Clone, Debug)]
pub enum InflationMode {
    /// Maximize `⟨t|ρ|t⟩`.
    Target(CVec),
    /// Minimize the slack `s` with `τ_A₁B₁C₁ = (1−s)ρ + s·I/8`.
    Fixed(DensityMatrix),
    /// Maximize `⟨t|ρᵖ|t⟩` subject to `ρ − p·ρᵖ ⪰ 0`.
    Postselected { target: CVec, p: f64 },
}

/// A built relaxation together with the handles needed to read its solution.
#[derive(Clone, Debug)]
pub struct RingInflation {
    pub problem: SdpProblem,
    pub mode: InflationMode,
    pub field: Field,
    pub tau: BlockId,
    pub gamma: BlockId,
    /// Copy of `τ_A₁B₁C₁` (target and postselected modes).
    pub rho: Option<BlockId>,
    pub rho_p: Option<BlockId>,
    pub slack: Option<BlockId>,
}

fn is_real_vec(v: &CVec) -> bool {
    v.iter().all(|z| z.im.abs() <= 1e-14)
}

fn check_target(t: &CVec) -> Result<()> {
    if t.len() != 8 {
        return domain(format!("target has length {}, expected 8", t.len()));
    }
    if (t.norm() - 1.0).abs() > 1e-9 {
        return domain(format!("target has norm {}", t.norm()));
    }
    Ok(())
}

/// Weight matrix `|t⟩⟨t|`, so that `Re tr(W X) = ⟨t|X|t⟩`.
pub(crate) fn projector(t: &CVec) -> CMat {
    t * t.adjoint()
}

fn resolve_field(choice: FieldChoice, real_data: bool) -> Field {
    match choice {
        FieldChoice::Real => Field::Real,
        FieldChoice::Complex => Field::Complex,
        FieldChoice::Auto if real_data => Field::Real,
        FieldChoice::Auto => Field::Complex,
    }
}

/// Declares τ, γ and all mode-independent constraints; returns the marginal
/// `τ_A₁B₁C₁` as forms.
pub(crate) fn ring_core(
    p: &mut SdpProblem,
    field: Field,
    ppt: PptSelection,
) -> (BlockId, BlockId, FormMatrix) {
    let tau = p.add_block("tau", 64, field);
    let gamma = p.add_block("gamma", 64, field);
    p.add_constraint(p.trace(tau), 1.0, "tr_tau");
    p.add_constraint(p.trace(gamma), 1.0, "tr_gamma");

    let tf = FormMatrix::of_block(p, tau, &QUBITS6);
    let gf = FormMatrix::of_block(p, gamma, &QUBITS6);

    // copy exchange (012) <-> (345)
    let swap = [3, 4, 5, 0, 1, 2];
    let swap_map: Vec<usize> = (0..64)
        .map(|i| {
            let mut d = [0; 6];
            digits(i, &QUBITS6, &mut d);
            let nd: Vec<usize> = swap.iter().map(|&j| d[j]).collect();
            compose(&nd, &QUBITS6)
        })
        .collect();
    for (blk, name) in [(&tf, "sym_tau"), (&gf, "sym_gamma")] {
        for r in 0..64 {
            for c in r..64 {
                let f = blk.at(r, c) - blk.at(swap_map[r], swap_map[c]);
                if !f.is_zero() {
                    p.add_complex_constraint(&f, Complex64::new(0.0, 0.0), &format!("{name}[{r},{c}]"));
                }
            }
        }
    }

    let rho1 = tf.marginal(&[0, 1, 2]);
    let rho2 = tf.marginal(&[3, 4, 5]);
    equate(p, &rho1, &rho2, "tau_copies");

    // positions: A1 B1 C1 A2 B2 C2 = 0..6 in τ; A3 B3 C3 A4 B4 C4 = 0..6 in γ
    equate(p, &gf.marginal(&[0, 1, 3, 4]), &tf.marginal(&[0, 1, 3, 4]), "ring_ab");
    equate(p, &gf.marginal(&[1, 2, 4, 5]), &tf.marginal(&[1, 2, 4, 5]), "ring_bc");
    equate(p, &gf.marginal(&[2, 3, 5, 0]), &tf.marginal(&[2, 0, 5, 3]), "ring_ca");

    let ppt_block = |p: &mut SdpProblem, name: &str, forms: FormMatrix| {
        let side = forms.side;
        let id = p.add_block(name, side, field);
        let bf = FormMatrix::of_block(p, id, &forms.dims);
        equate(p, &bf, &forms, name);
    };
    if ppt.tau {
        ppt_block(p, "ppt_tau", tf.partial_transpose(&[3, 4, 5]));
    }
    if ppt.gamma_b4 {
        ppt_block(p, "ppt_gamma_b4", gf.marginal(&[0, 1, 2, 4]).partial_transpose(&[3]));
    }
    if ppt.gamma_c4 {
        ppt_block(p, "ppt_gamma_c4", gf.marginal(&[1, 2, 3, 5]).partial_transpose(&[3]));
    }
    if ppt.gamma_a3 {
        ppt_block(p, "ppt_gamma_a3", gf.marginal(&[2, 3, 4, 0]).partial_transpose(&[3]));
    }
    (tau, gamma, rho1)
}

/// Builds the relaxation for exactly one of `target` (fidelity maximization)
/// or `fixed_rho` (feasibility).
pub fn build_ring_inflation(
    target: Option<&CVec>,
    fixed_rho: Option<&DensityMatrix>,
) -> Result<RingInflation> {
    build_ring_inflation_with(target, fixed_rho, &InflationOptions::default())
}

pub fn build_ring_inflation_with(
    target: Option<&CVec>,
    fixed_rho: Option<&DensityMatrix>,
    opts: &InflationOptions,
) -> Result<RingInflation> {
    match (target, fixed_rho) {
        (Some(t), None) => build_target(t, opts),
        (None, Some(rho)) => build_fixed(rho, opts),
        _ => Err(NetwitError::Usage(
            "provide exactly one of a target vector or a fixed state".into(),
        )),
    }
}

fn build_target(t: &CVec, opts: &InflationOptions) -> Result<RingInflation> {
    check_target(t)?;
    let field = resolve_field(opts.field, is_real_vec(t));
    let mut p = SdpProblem::new();
    let (tau, gamma, marg) = ring_core(&mut p, field, opts.ppt);
    let rho = p.add_block("rho", 8, field);
    let rf = FormMatrix::of_block(&p, rho, &QUBITS3);
    equate(&mut p, &rf, &marg, "rho");
    p.set_objective(p.inner_with(rho, &projector(t)), Sense::Maximize);
    Ok(RingInflation {
        problem: p,
        mode: InflationMode::Target(t.clone()),
        field,
        tau,
        gamma,
        rho: Some(rho),
        rho_p: None,
        slack: None,
    })
}

fn build_fixed(rho: &DensityMatrix, opts: &InflationOptions) -> Result<RingInflation> {
    if rho.dims() != QUBITS3 {
        return domain(format!("fixed state has dims {:?}, expected [2, 2, 2]", rho.dims()));
    }
    let field = resolve_field(opts.field, rho.is_real());
    if field == Field::Real && !rho.is_real() {
        return domain("complex state cannot be fixed in a real relaxation");
    }
    let mut p = SdpProblem::new();
    let (tau, gamma, marg) = ring_core(&mut p, field, opts.ppt);
    let s = p.add_block("slack", 1, Field::Real);
    let sf = p.entry(s, 0, 0);
    let e = rho.entries();
    for r in 0..8 {
        for c in r..8 {
            // τ_A₁B₁C₁[r,c] + s·(ρ − I/8)[r,c] = ρ[r,c]
            let mut f = marg.at(r, c).clone();
            let shift = e[(r, c)] - if r == c { Complex64::new(0.125, 0.0) } else { Complex64::new(0.0, 0.0) };
            f.add_scaled(&sf, shift);
            p.add_complex_constraint(&f, e[(r, c)], &format!("fixed[{r},{c}]"));
        }
    }
    p.set_objective(sf.re.clone(), Sense::Minimize);
    Ok(RingInflation {
        problem: p,
        mode: InflationMode::Fixed(rho.clone()),
        field,
        tau,
        gamma,
        rho: None,
        rho_p: None,
        slack: Some(s),
    })
}

#[derive(Clone, Debug)]
pub struct InflationCertificate {
    /// τ over A₁B₁C₁A₂B₂C₂; meaningful when the status is solved.
    pub tau: DensityMatrix,
    /// γ over A₃B₃C₃A₄B₄C₄.
    pub gamma: DensityMatrix,
    /// Fidelity optimum (target modes) or slack optimum (fixed mode).
    pub objective_value: f64,
    pub dual_value: f64,
    pub solver_status: SolveStatus,
    /// Linear witness on ρ_ABC derived from the dual solution (target mode).
    pub dual_witness: Option<HermitianOperator>,
    pub stats: SolverStats,
    pub message: String,
}

impl InflationCertificate {
    /// Largest violation of the marginal and symmetry conditions by (τ, γ).
    pub fn constraint_violation(&self) -> f64 {
        let t = &self.tau;
        let g = &self.gamma;
        let marg = |m: &DensityMatrix, keep: &[usize]| -> CMat {
            // ordered marginal: move `keep` to the front in the given order, then trace the rest
            let n = m.num_subsystems();
            let mut perm = vec![0; n];
            let mut next = keep.len();
            for i in 0..n {
                perm[i] = match keep.iter().position(|&k| k == i) {
                    Some(pos) => pos,
                    None => {
                        next += 1;
                        next - 1
                    }
                };
            }
            let moved = m.permute_subsystems(&perm).expect("valid permutation");
            let sel: Vec<usize> = (0..keep.len()).collect();
            moved
                .partial_trace(&sel.into())
                .expect("valid selector")
                .entries()
                .clone()
        };
        let pairs = [
            (marg(t, &[0, 1, 2]), marg(t, &[3, 4, 5])),
            (marg(g, &[0, 1, 3, 4]), marg(t, &[0, 1, 3, 4])),
            (marg(g, &[1, 2, 4, 5]), marg(t, &[1, 2, 4, 5])),
            (marg(g, &[2, 3, 5, 0]), marg(t, &[2, 0, 5, 3])),
            (t.entries().clone(), t.permute_subsystems(&[3, 4, 5, 0, 1, 2]).unwrap().entries().clone()),
            (g.entries().clone(), g.permute_subsystems(&[3, 4, 5, 0, 1, 2]).unwrap().entries().clone()),
        ];
        pairs.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn block_state(sol: &SdpSolution, id: BlockId, dims: &[usize]) -> DensityMatrix {
    let m = sol.block(id);
    let m = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::from_parts(dims.to_vec(), m)
}

/// Solves a built relaxation and packages the result.
pub fn solve(ring: &RingInflation, backend: &dyn SolverBackend) -> Result<InflationCertificate> {
    let sol = backend.solve(&ring.problem)?;
    let solved = sol.status.is_solved();
    let (tau, gamma) = if sol.status == SolveStatus::Infeasible {
        let z = DensityMatrix::from_parts(QUBITS6.to_vec(), DMatrix::zeros(64, 64));
        (z.clone(), z)
    } else {
        (block_state(&sol, ring.tau, &QUBITS6), block_state(&sol, ring.gamma, &QUBITS6))
    };
    let dual_witness = match (&ring.mode, ring.rho) {
        (InflationMode::Target(t), Some(rho)) if solved => {
            let w = projector(t) + sol.block_dual(rho);
            let w = (&w + w.adjoint()) * Complex64::new(0.5, 0.0);
            Some(HermitianOperator::from_parts(QUBITS3.to_vec(), w))
        }
        _ => None,
    };
    Ok(InflationCertificate {
        tau,
        gamma,
        objective_value: sol.objective,
        dual_value: sol.dual_objective,
        solver_status: sol.status,
        dual_witness,
        stats: sol.stats,
        message: sol.message,
    })
}

#[derive(Clone, Debug)]
pub struct Certification {
    pub certified_genuine: bool,
    pub slack: f64,
    pub certificate: InflationCertificate,
}

/// Feasibility test of `rho` against the relaxation. `certified_genuine`
/// means no inflation certificate exists; otherwise the result is inconclusive.
pub fn certify_state(rho: &DensityMatrix, backend: &dyn SolverBackend) -> Result<Certification> {
    certify_state_with(rho, backend, &InflationOptions::default())
}

pub fn certify_state_with(
    rho: &DensityMatrix,
    backend: &dyn SolverBackend,
    opts: &InflationOptions,
) -> Result<Certification> {
    let ring = build_ring_inflation_with(None, Some(rho), opts)?;
    let cert = solve(&ring, backend)?;
    match cert.solver_status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => Ok(Certification {
            certified_genuine: cert.objective_value > SLACK_TOL,
            slack: cert.objective_value,
            certificate: cert,
        }),
        // the slack formulation is always feasible (s = 1), so this is a solver failure
        status => Err(NetwitError::Solver(format!(
            "feasibility problem returned {status:?}: {}",
            cert.message
        ))),
    }
}

/// Linear witness `W` with `tr(Wρ) ≤ optimum` for every state admitting an
/// inflation certificate; `W ⪰ |t⟩⟨t|`, so `tr(Wρ)` also upper-bounds the fidelity.
pub fn extract_dual_witness(cert: &InflationCertificate) -> Result<HermitianOperator> {
    if !cert.solver_status.is_solved() {
        return Err(NetwitError::Solver(format!(
            "no dual witness for status {:?}",
            cert.solver_status
        )));
    }
    cert.dual_witness
        .clone()
        .ok_or_else(|| NetwitError::UnsupportedBackend("dual information for this problem".into()))
}
