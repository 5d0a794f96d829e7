//! Closed-form witnesses of genuine network entanglement.
//!
//! Every state producible from bipartite sources, local channels and shared
//! randomness satisfies
//!
//! ```text
//! H(a:b) + H(b:c) − H(b) ≤ S(ρ_A) + S(ρ_ABC) − S(ρ_BC)
//! F_GHZ_d(ρ) ≤ 2d(3d + √(2d−1)) / (1 − 2d + 9d²)
//! ```
//!
//! with the k-party generalisations implemented below. A violation therefore
//! certifies genuine network 3-entanglement (k-entanglement).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qlinalg::{DensityMatrix, SubsystemSelector};
use crate::states::{ghz_vector, measure, mutual_information, shannon_entropy, ProductMeasurement};

pub const DEFAULT_WITNESS_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub margin: f64,
    pub tol: f64,
}

impl WitnessReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = lhs - rhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            violated: margin > tol,
            margin,
            tol,
        }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self::new(self.name, self.lhs, self.rhs, tol)
    }
}

fn sel(v: &[usize]) -> SubsystemSelector {
    SubsystemSelector::new(v.to_vec())
}

/// Three-party entropic witness with party order (A, B, C) as given.
pub fn entropic_witness(rho: &DensityMatrix, meas: &ProductMeasurement) -> Result<WitnessReport> {
    if rho.num_subsystems() != 3 {
        return domain(format!(
            "entropic witness needs 3 parties, state has {}",
            rho.num_subsystems()
        ));
    }
    let mut r = entropic_witness_k(rho, meas)?;
    r.name = "entropic".into();
    Ok(r)
}

/// `Σ_{i=0}^{k−2} H(xⁱ:xⁱ⁺¹) − Σ_{i=1}^{k−2} H(xⁱ) ≤ S(X⁰) + S(X⁰|X¹…X^{k−1})`.
pub fn entropic_witness_k(rho: &DensityMatrix, meas: &ProductMeasurement) -> Result<WitnessReport> {
    let k = rho.num_subsystems();
    if k < 3 {
        return domain(format!("entropic witness needs k ≥ 3 parties, got {k}"));
    }
    let p = measure(rho, meas)?;
    let mut lhs = 0.0;
    for i in 0..k - 1 {
        lhs += mutual_information(&p, &sel(&[i]), &sel(&[i + 1]))?;
    }
    for i in 1..k - 1 {
        lhs -= shannon_entropy(&p, &sel(&[i]))?;
    }
    let rest: Vec<usize> = (1..k).collect();
    let s_first = rho.partial_trace(&sel(&[0]))?.von_neumann_entropy()?;
    let s_all = rho.von_neumann_entropy()?;
    let s_rest = rho.partial_trace(&sel(&rest))?.von_neumann_entropy()?;
    Ok(WitnessReport::new(
        format!("entropic_k{k}"),
        lhs,
        s_first + s_all - s_rest,
        DEFAULT_WITNESS_TOL,
    ))
}

/// Evaluates the three-party entropic witness for every party order (each
/// choice of middle party, with both orders of the outer parties, since the
/// right-hand side is not symmetric in them) and returns the report with the
/// largest margin.
pub fn entropic_witness_best(
    rho: &DensityMatrix,
    meas: &ProductMeasurement,
) -> Result<WitnessReport> {
    const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [2, 1, 0], [1, 2, 0], [0, 2, 1], [2, 0, 1], [1, 0, 2]];
    const NAMES: [char; 3] = ['A', 'B', 'C'];
    let mut best: Option<WitnessReport> = None;
    for order in ORDERS {
        // order[j] is the original party placed at position j
        let mut perm = [0; 3];
        for (j, &party) in order.iter().enumerate() {
            perm[party] = j;
        }
        let r = rho.permute_subsystems(&perm)?;
        let m = meas.permuted(&perm);
        let mut rep = entropic_witness(&r, &m)?;
        rep.name = format!("entropic[{}]", order.iter().map(|&i| NAMES[i]).collect::<String>());
        if best.as_ref().is_none_or(|b| rep.margin > b.margin) {
            best = Some(rep);
        }
    }
    Ok(best.expect("six orders"))
}

/// Largest GHZ_d fidelity of a network state with (k−1)-partite sources.
pub fn ghz_fidelity_bound(d: usize, k: usize) -> f64 {
    let (d, k) = (d as f64, k as f64);
    let num = d * (3.0 - k * (d + 1.0) + k * k * d + 2.0 * (2.0 + k * (d - 1.0) - d).sqrt());
    let den = 1.0 + 4.0 * d - 2.0 * d * k + k * k * d * d;
    num / den
}

pub fn fidelity_witness(rho: &DensityMatrix, d: usize, k: usize) -> Result<WitnessReport> {
    if rho.dims().len() != k || rho.dims().iter().any(|&x| x != d) {
        return domain(format!(
            "state dims {:?} are not {k} subsystems of dimension {d}",
            rho.dims()
        ));
    }
    let f = rho.fidelity_with_pure(&ghz_vector(d, k))?;
    Ok(WitnessReport::new(
        format!("fidelity_ghz{d}_k{k}"),
        f,
        ghz_fidelity_bound(d, k),
        DEFAULT_WITNESS_TOL,
    ))
}

/// For GHZ fidelity `F`: the largest coincidence `P(a=y)` allowed once one
/// party is disconnected, and the smallest `P(a=b)` the fidelity enforces.
pub fn lemma_bounds(f: f64, d: usize) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&f) {
        return domain(format!("fidelity {f} outside [0, 1]"));
    }
    if d < 2 {
        return domain("local dimension must be at least 2");
    }
    let d = d as f64;
    let pmax = 1.0 + (1.0 / d - 1.0) * f + 2.0 * (f * (1.0 - f) / d).sqrt();
    Ok((pmax, f))
}
