//! Certification from postselected data.
//!
//! If only a fraction `p` of the runs is kept, the reconstructed state ρᵖ and
//! the state ρ actually produced satisfy `ρ − p·ρᵖ ⪰ 0`. Adding this
//! constraint to the ring inflation bounds the fidelity of ρᵖ that a network-2
//! source can fake at detection probability `p`.

use serde::{Deserialize, Serialize};

use netwit_sdp::{Field, SdpProblem, Sense, SolveStatus, SolverBackend};

use crate::error::{domain, NetwitError, Result};
use crate::inflation::{
    equate, projector, ring_core, FieldChoice, FormMatrix, InflationMode, InflationOptions,
    RingInflation,
};
use crate::qlinalg::CVec;

/// Fidelities at or above `1 − EPS_ONE` count as "the adversary reaches 1".
pub const EPS_ONE: f64 = 1e-4;

pub fn build_postselected(target: &CVec, p: f64) -> Result<RingInflation> {
    build_postselected_with(target, p, &InflationOptions::default())
}

pub fn build_postselected_with(
    target: &CVec,
    p: f64,
    opts: &InflationOptions,
) -> Result<RingInflation> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("detection probability {p} outside (0, 1]"));
    }
    if target.len() != 8 || (target.norm() - 1.0).abs() > 1e-9 {
        return domain("target must be a unit vector of length 8");
    }
    let real = target.iter().all(|z| z.im.abs() <= 1e-14);
    let field = match opts.field {
        FieldChoice::Real => Field::Real,
        FieldChoice::Complex => Field::Complex,
        FieldChoice::Auto if real => Field::Real,
        FieldChoice::Auto => Field::Complex,
    };
    let dims = [2, 2, 2];
    let mut prob = SdpProblem::new();
    let (tau, gamma, marg) = ring_core(&mut prob, field, opts.ppt);
    let rho_p = prob.add_block("rho_p", 8, field);
    prob.add_constraint(prob.trace(rho_p), 1.0, "tr_rho_p");
    let slackd = prob.add_block("postselection_gap", 8, field);
    let rpf = FormMatrix::of_block(&prob, rho_p, &dims);
    let df = FormMatrix::of_block(&prob, slackd, &dims);
    equate(&mut prob, &df, &marg.minus_scaled(&rpf, p), "postselection");
    prob.set_objective(prob.inner_with(rho_p, &projector(target)), Sense::Maximize);
    Ok(RingInflation {
        problem: prob,
        mode: InflationMode::Postselected {
            target: target.clone(),
            p,
        },
        field,
        tau,
        gamma,
        rho: None,
        rho_p: Some(rho_p),
        slack: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub p: f64,
    pub max_fidelity: f64,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectionScan {
    pub target: String,
    pub tol_p: f64,
    /// Midpoint of the final bisection bracket.
    pub p_critical: Option<f64>,
    /// Final bracket `[lo, hi]`: the optimum reaches 1 at `lo` but not at `hi`.
    pub bracket: Option<(f64, f64)>,
    pub samples: Vec<ScanSample>,
    pub complete: bool,
}

/// Largest postselected fidelity reachable at detection probability `p`.
pub fn max_fidelity(target: &CVec, p: f64, backend: &dyn SolverBackend) -> Result<ScanSample> {
    let ring = build_postselected(target, p)?;
    let sol = backend.solve(&ring.problem)?;
    Ok(ScanSample {
        p,
        max_fidelity: sol.objective,
        status: sol.status,
    })
}

fn reaches_one(s: &ScanSample) -> bool {
    s.max_fidelity >= 1.0 - EPS_ONE
}

/// Bisection for the smallest detection probability at which the network-2
/// optimum drops below one. `jobs > 1` evaluates that many interior points
/// per round on separate threads.
pub fn critical_probability<B: SolverBackend + Sync>(
    target_name: &str,
    target: &CVec,
    tol_p: f64,
    backend: &B,
    jobs: usize,
) -> Result<PostselectionScan> {
    if tol_p < 1e-3 {
        return domain(format!("tol_p = {tol_p} is below 1e-3"));
    }
    let mut scan = PostselectionScan {
        target: target_name.to_string(),
        tol_p,
        p_critical: None,
        bracket: None,
        samples: Vec::new(),
        complete: false,
    };
    let finish = |mut scan: PostselectionScan| {
        scan.samples.sort_by(|a, b| a.p.total_cmp(&b.p));
        scan
    };
    let eval = |ps: &[f64]| -> Result<Vec<ScanSample>> {
        if jobs <= 1 || ps.len() == 1 {
            return ps.iter().map(|&p| max_fidelity(target, p, backend)).collect();
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = ps
                .iter()
                .map(|&p| s.spawn(move || max_fidelity(target, p, backend)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .map_err(|_| NetwitError::Solver("scan worker panicked".into()))?
                })
                .collect()
        })
    };

    let mut hi = 1.0;
    let top = eval(&[hi])?.remove(0);
    scan.samples.push(top.clone());
    if !top.status.is_solved() {
        return Ok(finish(scan));
    }
    if reaches_one(&top) {
        // no detection probability allows certification with this target
        scan.complete = true;
        return Ok(finish(scan));
    }
    let mut lo = 0.3;
    loop {
        let s = eval(&[lo])?.remove(0);
        scan.samples.push(s.clone());
        if !s.status.is_solved() {
            return Ok(finish(scan));
        }
        if reaches_one(&s) {
            break;
        }
        hi = lo;
        lo /= 2.0;
        if lo < 1e-3 {
            return Err(NetwitError::Solver(
                "optimum stays below one for vanishing detection probability".into(),
            ));
        }
    }
    let per_round = jobs.max(1);
    while hi - lo > tol_p {
        let ps: Vec<f64> = (1..=per_round)
            .map(|j| lo + (hi - lo) * j as f64 / (per_round + 1) as f64)
            .collect();
        let results = eval(&ps)?;
        scan.samples.extend(results.iter().cloned());
        if results.iter().any(|s| !s.status.is_solved()) {
            return Ok(finish(scan));
        }
        for s in &results {
            if reaches_one(s) {
                lo = lo.max(s.p);
            } else {
                hi = hi.min(s.p);
            }
        }
    }
    scan.bracket = Some((lo, hi));
    scan.p_critical = Some(0.5 * (lo + hi));
    scan.complete = true;
    Ok(finish(scan))
}
