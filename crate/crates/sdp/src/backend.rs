use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ipm::{phase_one, Ipm, IpmSettings, IpmStatus};
use crate::presolve::{presolve, Lmi, Presolved};
use crate::problem::{Field, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped before full accuracy with residuals and gap below the looser threshold.
    NearOptimal,
    Infeasible,
    NumericalError,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub reduced_vars: usize,
    pub reduced_rows: usize,
}

/// Result of a solve.
///
/// `blocks` holds the primal block values. `block_duals` holds Hermitian
/// multipliers `W_k ⪰ 0` such that, at every feasible point, the objective
/// equals `dual_objective − Σ_k Re tr(W_k X_k)` for a maximization (and
/// `dual_objective + Σ_k Re tr(W_k X_k)` for a minimization), up to the
/// solver residuals.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub blocks: Vec<DMatrix<Complex64>>,
    pub block_duals: Vec<DMatrix<Complex64>>,
    pub stats: SolverStats,
    pub message: String,
}

impl SdpSolution {
    pub fn block(&self, id: crate::problem::BlockId) -> &DMatrix<Complex64> {
        &self.blocks[id.0]
    }

    pub fn block_dual(&self, id: crate::problem::BlockId) -> &DMatrix<Complex64> {
        &self.block_duals[id.0]
    }
}

pub trait SolverBackend {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}

#[derive(Clone, Debug)]
pub struct InteriorPoint {
    pub max_iter: usize,
    pub tol: f64,
    pub near_tol: f64,
    pub step_fraction: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            near_tol: 1e-6,
            step_fraction: 0.95,
        }
    }
}

fn to_hermitian(m: &DMatrix<f64>, field: Field, side: usize) -> DMatrix<Complex64> {
    match field {
        Field::Real => m.map(|v| Complex64::new(v, 0.0)),
        Field::Complex => DMatrix::from_fn(side, side, |r, c| {
            Complex64::new(m[(r, c)], m[(r + side, c)])
        }),
    }
}

/// Dual of an embedded block: `W = (X₁₁ + X₂₂) + i(X₂₁ − X₁₂)` pairs with the
/// Hermitian block as `Re tr(W ρ) = tr(X · emb(ρ))`.
fn dual_to_hermitian(x: &DMatrix<f64>, field: Field, side: usize) -> DMatrix<Complex64> {
    match field {
        Field::Real => x.map(|v| Complex64::new(v, 0.0)),
        Field::Complex => DMatrix::from_fn(side, side, |r, c| {
            Complex64::new(
                x[(r, c)] + x[(r + side, c + side)],
                x[(r + side, c)] - x[(r, c + side)],
            )
        }),
    }
}

fn lmi_value(lmi: &Lmi, y: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(lmi.dim, lmi.dim);
    for &(r, c, v) in &lmi.constant {
        s[(r as usize, c as usize)] += v;
    }
    for (var, entries) in &lmi.terms {
        for &(r, c, v) in entries {
            s[(r as usize, c as usize)] += v * y[*var];
        }
    }
    s
}

fn infeasible(problem: &SdpProblem, message: String) -> SdpSolution {
    let zeros: Vec<DMatrix<Complex64>> = problem
        .blocks()
        .iter()
        .map(|b| DMatrix::zeros(b.side, b.side))
        .collect();
    SdpSolution {
        status: SolveStatus::Infeasible,
        objective: f64::NAN,
        dual_objective: f64::NAN,
        blocks: zeros.clone(),
        block_duals: zeros,
        stats: SolverStats::default(),
        message,
    }
}

impl SolverBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        let red = match presolve(problem)? {
            Presolved::Infeasible(msg) => return Ok(infeasible(problem, msg)),
            Presolved::Reduced(r) => r,
        };
        // LMIs without variables must already hold
        for lmi in red.lmis.iter().filter(|l| l.terms.is_empty()) {
            let s = lmi_value(lmi, &[]);
            let lmin = if lmi.dim == 0 {
                0.0
            } else {
                s.symmetric_eigenvalues().min()
            };
            if lmin < -1e-9 {
                let name = &problem.blocks()[lmi.block].name;
                return Ok(infeasible(
                    problem,
                    format!("block '{name}' is fully determined and not PSD (λmin = {lmin:.3e})"),
                ));
            }
        }
        let settings = IpmSettings {
            max_iter: self.max_iter,
            tol: self.tol,
            near_tol: self.near_tol,
            step_fraction: self.step_fraction,
        };
        let out = Ipm::new(&red, settings.clone()).run();
        if out.status == IpmStatus::Failed {
            if let Some(shift) = phase_one(&red, settings) {
                if shift > 1e-6 {
                    return Ok(infeasible(
                        problem,
                        format!("no PSD point satisfies the equalities (minimal shift {shift:.3e})"),
                    ));
                }
            }
        }
        let status = match out.status {
            IpmStatus::Optimal => SolveStatus::Optimal,
            IpmStatus::NearOptimal => SolveStatus::NearOptimal,
            IpmStatus::Infeasible => SolveStatus::Infeasible,
            IpmStatus::Failed => SolveStatus::NumericalError,
        };
        let blocks = red
            .lmis
            .iter()
            .map(|lmi| {
                let spec = &problem.blocks()[lmi.block];
                to_hermitian(&lmi_value(lmi, &out.y), spec.field, spec.side)
            })
            .collect();
        let block_duals = red
            .lmis
            .iter()
            .zip(&out.x)
            .map(|(lmi, x)| {
                let spec = &problem.blocks()[lmi.block];
                if x.nrows() == 0 {
                    DMatrix::zeros(spec.side, spec.side)
                } else {
                    dual_to_hermitian(x, spec.field, spec.side)
                }
            })
            .collect();
        Ok(SdpSolution {
            status,
            objective: red.sign * (out.pobj + red.objective_constant),
            dual_objective: red.sign * (out.dobj + red.objective_constant),
            blocks,
            block_duals,
            stats: SolverStats {
                iterations: out.iterations,
                primal_residual: out.pinf,
                dual_residual: out.dinf,
                relative_gap: out.gap,
                reduced_vars: red.n,
                reduced_rows: red.rows.len(),
            },
            message: out.message,
        })
    }
}
