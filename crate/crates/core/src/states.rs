//! Reference states, product measurements and outcome statistics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qlinalg::{CMat, CVec, DensityMatrix, HermitianOperator, SubsystemSelector, Tolerances};

/// `Σ_j |j⟩^{⊗k} / √d`.
pub fn ghz_vector(d: usize, k: usize) -> CVec {
    let side = d.pow(k as u32);
    let mut v = CVec::zeros(side);
    let step: usize = (0..k).map(|i| d.pow(i as u32)).sum();
    for j in 0..d {
        v[j * step] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    v
}

pub fn ghz_state(d: usize, k: usize) -> DensityMatrix {
    let v = ghz_vector(d, k);
    DensityMatrix::from_parts(vec![d; k], &v * v.adjoint())
}

/// `(|001⟩ + |010⟩ + |100⟩) / √3`.
pub fn w_vector() -> CVec {
    let mut v = CVec::zeros(8);
    let a = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
    v[1] = a;
    v[2] = a;
    v[4] = a;
    v
}

pub fn w_state() -> DensityMatrix {
    let v = w_vector();
    DensityMatrix::from_parts(vec![2, 2, 2], &v * v.adjoint())
}

/// Computational basis vector `|digits⟩`.
pub fn basis_vector(dims: &[usize], digits: &[usize]) -> CVec {
    let side: usize = dims.iter().product();
    let idx = crate::qlinalg::compose(digits, dims);
    let mut v = CVec::zeros(side);
    v[idx] = Complex64::new(1.0, 0.0);
    v
}

/// Joint probability mass function over a grid of discrete outcomes;
/// the first variable is the most significant in the flat layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    cardinalities: Vec<usize>,
    probabilities: Vec<f64>,
}

/// pmf entries below this are treated as exact zeros in entropies.
const PMF_ZERO: f64 = 1e-15;

impl JointDistribution {
    pub fn new(cardinalities: Vec<usize>, probabilities: Vec<f64>) -> Result<Self> {
        let size: usize = cardinalities.iter().product();
        if cardinalities.iter().any(|&c| c == 0) || size != probabilities.len() {
            return domain(format!(
                "{} probabilities for cardinalities {cardinalities:?}",
                probabilities.len()
            ));
        }
        if probabilities.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return domain("probabilities must be nonnegative");
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > Tolerances::default().trace {
            return domain(format!("probabilities sum to {total}"));
        }
        Ok(Self {
            cardinalities,
            probabilities,
        })
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.probabilities[crate::qlinalg::compose(outcome, &self.cardinalities)]
    }

    /// Marginal on `vars`, in the order given.
    pub fn marginal(&self, vars: &SubsystemSelector) -> Result<Self> {
        vars.validate(self.num_vars())?;
        let cards: Vec<usize> = vars.indices().iter().map(|&i| self.cardinalities[i]).collect();
        let mut out = vec![0.0; cards.iter().product()];
        let mut d = vec![0; self.num_vars()];
        let mut sub = vec![0; vars.len()];
        for (idx, &p) in self.probabilities.iter().enumerate() {
            crate::qlinalg::digits(idx, &self.cardinalities, &mut d);
            for (j, &i) in vars.indices().iter().enumerate() {
                sub[j] = d[i];
            }
            out[crate::qlinalg::compose(&sub, &cards)] += p;
        }
        Ok(Self {
            cardinalities: cards,
            probabilities: out,
        })
    }
}

/// One POVM per party, each a list of effects on that party's space.
#[derive(Clone, Debug)]
pub struct ProductMeasurement {
    povms: Vec<Vec<HermitianOperator>>,
}

impl ProductMeasurement {
    pub fn new(povms: Vec<Vec<HermitianOperator>>) -> Result<Self> {
        let tol = Tolerances::default();
        for (party, povm) in povms.iter().enumerate() {
            let Some(first) = povm.first() else {
                return domain(format!("party {party} has an empty POVM"));
            };
            let side = first.side();
            let mut total = CMat::zeros(side, side);
            for e in povm {
                if e.side() != side {
                    return domain(format!("party {party}: effects of different sizes"));
                }
                if e.min_eigenvalue() < -tol.psd {
                    return domain(format!("party {party}: effect is not PSD"));
                }
                total += e.entries();
            }
            let defect = (total - CMat::identity(side, side)).norm();
            if defect > 1e-9 {
                return domain(format!("party {party}: effects sum to identity only within {defect:.3e}"));
            }
        }
        Ok(Self { povms })
    }

    /// Projective measurement in the computational basis of every party.
    pub fn computational(dims: &[usize]) -> Self {
        let povms = dims
            .iter()
            .map(|&d| {
                (0..d)
                    .map(|i| {
                        let mut e = CMat::zeros(d, d);
                        e[(i, i)] = Complex64::new(1.0, 0.0);
                        HermitianOperator::from_parts(vec![d], e)
                    })
                    .collect()
            })
            .collect();
        Self { povms }
    }

    /// Projective measurement in the columns of one unitary per party.
    pub fn from_bases(bases: &[CMat]) -> Result<Self> {
        let povms = bases
            .iter()
            .map(|u| {
                let d = u.nrows();
                (0..u.ncols())
                    .map(|i| {
                        let v = u.column(i).into_owned();
                        HermitianOperator::from_parts(vec![d], &v * v.adjoint())
                    })
                    .collect()
            })
            .collect();
        Self::new(povms)
    }

    pub fn povms(&self) -> &[Vec<HermitianOperator>] {
        &self.povms
    }

    pub fn num_parties(&self) -> usize {
        self.povms.len()
    }

    /// Same measurement with parties reordered: party `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut povms = self.povms.clone();
        for (i, &p) in perm.iter().enumerate() {
            povms[p] = self.povms[i].clone();
        }
        Self { povms }
    }
}

/// Outcome statistics `P(o) = tr[ρ ⊗_i E_{o_i}]`.
pub fn measure(rho: &DensityMatrix, meas: &ProductMeasurement) -> Result<JointDistribution> {
    if meas.num_parties() != rho.num_subsystems() {
        return domain(format!(
            "{} POVMs for a state with {} subsystems",
            meas.num_parties(),
            rho.num_subsystems()
        ));
    }
    for (i, povm) in meas.povms().iter().enumerate() {
        if povm[0].side() != rho.dims()[i] {
            return domain(format!("POVM {i} acts on dimension {}", povm[0].side()));
        }
    }
    let cards: Vec<usize> = meas.povms().iter().map(|p| p.len()).collect();
    let mut probs = Vec::with_capacity(cards.iter().product());
    let dims = rho.dims();
    let side = rho.side();
    let mut outcome = vec![0; cards.len()];
    let total: usize = cards.iter().product();
    for idx in 0..total {
        crate::qlinalg::digits(idx, &cards, &mut outcome);
        let mut p = Complex64::new(0.0, 0.0);
        // tr[ρ K] with K = ⊗ E; K[i, j] = Π E_k[i_k, j_k]
        let mut di = vec![0; dims.len()];
        let mut dj = vec![0; dims.len()];
        for i in 0..side {
            crate::qlinalg::digits(i, dims, &mut di);
            for j in 0..side {
                crate::qlinalg::digits(j, dims, &mut dj);
                let mut k = Complex64::new(1.0, 0.0);
                for (party, &o) in outcome.iter().enumerate() {
                    k *= meas.povms()[party][o].entries()[(dj[party], di[party])];
                    if k == Complex64::new(0.0, 0.0) {
                        break;
                    }
                }
                if k != Complex64::new(0.0, 0.0) {
                    p += rho.entries()[(i, j)] * k;
                }
            }
        }
        probs.push(p.re);
    }
    let psd = Tolerances::default().psd;
    for p in probs.iter_mut() {
        if *p < -psd {
            return domain(format!("negative outcome probability {p}"));
        }
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    JointDistribution::new(cards, probs)
}

fn entropy_of(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > PMF_ZERO {
            h -= x * x.log2();
        }
    }
    h.max(0.0)
}

/// Joint entropy (bits) of the variables in `vars`.
pub fn shannon_entropy(p: &JointDistribution, vars: &SubsystemSelector) -> Result<f64> {
    Ok(entropy_of(p.marginal(vars)?.probabilities()))
}

pub fn mutual_information(
    p: &JointDistribution,
    x: &SubsystemSelector,
    y: &SubsystemSelector,
) -> Result<f64> {
    if x.indices().iter().any(|i| y.contains(*i)) {
        return domain("mutual information needs disjoint variable sets");
    }
    let mut xy = x.indices().to_vec();
    xy.extend_from_slice(y.indices());
    let xy = SubsystemSelector::new(xy);
    Ok(shannon_entropy(p, x)? + shannon_entropy(p, y)? - shannon_entropy(p, &xy)?)
}

/// `Σ_i P(x = i, y = i)` for two single variables.
pub fn coincidence_probability(
    p: &JointDistribution,
    x: &SubsystemSelector,
    y: &SubsystemSelector,
) -> Result<f64> {
    if x.len() != 1 || y.len() != 1 {
        return domain("coincidence probability takes single variables");
    }
    let (xi, yi) = (x.indices()[0], y.indices()[0]);
    if xi == yi {
        return Ok(1.0);
    }
    let m = p.marginal(&SubsystemSelector::new(vec![xi, yi]))?;
    let (cx, cy) = (m.cardinalities()[0], m.cardinalities()[1]);
    if cx != cy {
        return domain(format!("cardinalities {cx} and {cy} differ"));
    }
    Ok((0..cx).map(|i| m.prob(&[i, i])).sum())
}
