//! Dense linear algebra on multi-qudit operators.
//!
//! Composite indices put the leftmost subsystem in the most significant
//! position, so `tensor(a, b)` is the ordinary Kronecker product.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, NetwitError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            trace: 1e-9,
            psd: 1e-8,
            norm: 1e-9,
        }
    }
}

/// Ordered list of distinct subsystem positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemSelector {
    indices: Vec<usize>,
}

impl SubsystemSelector {
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        Self {
            indices: indices.into(),
        }
    }

    pub fn all(n: usize) -> Self {
        Self::new((0..n).collect::<Vec<_>>())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn validate(&self, n_subsystems: usize) -> Result<()> {
        for (k, &i) in self.indices.iter().enumerate() {
            if i >= n_subsystems {
                return domain(format!(
                    "subsystem {i} out of range for {n_subsystems} subsystems"
                ));
            }
            if self.indices[..k].contains(&i) {
                return domain(format!("subsystem {i} selected twice"));
            }
        }
        Ok(())
    }
}

impl From<Vec<usize>> for SubsystemSelector {
    fn from(v: Vec<usize>) -> Self {
        Self::new(v)
    }
}

impl From<&[usize]> for SubsystemSelector {
    fn from(v: &[usize]) -> Self {
        Self::new(v.to_vec())
    }
}

impl<const N: usize> From<[usize; N]> for SubsystemSelector {
    fn from(v: [usize; N]) -> Self {
        Self::new(v.to_vec())
    }
}

fn check_dims(dims: &[usize], side: usize) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return domain("local dimensions must be positive");
    }
    let prod: usize = dims.iter().product();
    if prod != side {
        return domain(format!(
            "dims {dims:?} give side {prod}, matrix has side {side}"
        ));
    }
    Ok(())
}

/// Mixed-radix digits of a composite index, leftmost most significant.
pub(crate) fn digits(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

pub(crate) fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Maps each composite index to the composite index after relocating
/// subsystem `i` to position `perm[i]`.
pub(crate) fn permutation_map(dims: &[usize], perm: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = dims.len();
    let mut new_dims = vec![0; n];
    for i in 0..n {
        new_dims[perm[i]] = dims[i];
    }
    let side: usize = dims.iter().product();
    let mut d = vec![0; n];
    let mut nd = vec![0; n];
    let map = (0..side)
        .map(|idx| {
            digits(idx, dims, &mut d);
            for i in 0..n {
                nd[perm[i]] = d[i];
            }
            compose(&nd, &new_dims)
        })
        .collect();
    (map, new_dims)
}

fn validate_perm(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return domain(format!("permutation of length {} for {n} subsystems", perm.len()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return domain(format!("{perm:?} is not a permutation of 0..{n}"));
        }
        seen[p] = true;
    }
    Ok(())
}

pub(crate) fn partial_trace_raw(m: &CMat, dims: &[usize], keep: &[usize]) -> (CMat, Vec<usize>) {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let n = dims.len();
    let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let kdims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let kside: usize = kdims.iter().product();
    let tside: usize = tdims.iter().product();
    let side = m.nrows();
    // split every composite index into (kept, traced) parts
    let mut d = vec![0; n];
    let mut kd = vec![0; keep.len()];
    let mut td = vec![0; traced.len()];
    let mut by_traced: Vec<Vec<(usize, usize)>> = vec![Vec::new(); tside];
    for idx in 0..side {
        digits(idx, dims, &mut d);
        for (j, &i) in keep.iter().enumerate() {
            kd[j] = d[i];
        }
        for (j, &i) in traced.iter().enumerate() {
            td[j] = d[i];
        }
        by_traced[compose(&td, &tdims)].push((idx, compose(&kd, &kdims)));
    }
    let mut out = CMat::zeros(kside, kside);
    for group in &by_traced {
        for &(i, ki) in group {
            for &(j, kj) in group {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    (out, kdims)
}

pub(crate) fn partial_transpose_raw(m: &CMat, dims: &[usize], part: &[usize]) -> CMat {
    let side = m.nrows();
    let n = dims.len();
    let mut out = CMat::zeros(side, side);
    let mut di = vec![0; n];
    let mut dj = vec![0; n];
    for i in 0..side {
        for j in 0..side {
            digits(i, dims, &mut di);
            digits(j, dims, &mut dj);
            for &k in part {
                std::mem::swap(&mut di[k], &mut dj[k]);
            }
            out[(compose(&di, dims), compose(&dj, dims))] = m[(i, j)];
        }
    }
    out
}

pub(crate) fn permute_raw(m: &CMat, dims: &[usize], perm: &[usize]) -> (CMat, Vec<usize>) {
    let (map, new_dims) = permutation_map(dims, perm);
    let side = m.nrows();
    let mut out = CMat::zeros(side, side);
    for i in 0..side {
        for j in 0..side {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    (out, new_dims)
}

fn hermitian_defect(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenvector of the largest eigenvalue (first one returned by the solver on ties).
pub fn top_eigenvector(m: &CMat) -> (f64, CVec) {
    let eig = m.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

fn symmetrized(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Hermitian operator with tensor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    dims: Vec<usize>,
    entries: CMat,
}

impl HermitianOperator {
    pub fn new(dims: Vec<usize>, entries: CMat) -> Result<Self> {
        Self::with_tolerances(dims, entries, &Tolerances::default())
    }

    pub fn with_tolerances(dims: Vec<usize>, entries: CMat, tol: &Tolerances) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return domain("operator must be square");
        }
        check_dims(&dims, entries.nrows())?;
        let defect = hermitian_defect(&entries);
        if defect > tol.herm {
            return domain(format!("not Hermitian (defect {defect:.3e})"));
        }
        Ok(Self {
            dims,
            entries: symmetrized(&entries),
        })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, entries: CMat) -> Self {
        Self { dims, entries }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let side = dims.iter().product();
        Self::from_parts(dims, CMat::identity(side, side))
    }

    pub fn projector(dims: Vec<usize>, psi: &CVec) -> Self {
        Self::from_parts(dims, psi * psi.adjoint())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_parts(dims, self.entries.kronecker(&other.entries))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries).first().copied().unwrap_or(0.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    /// `Re tr(self · rho)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        (&self.entries * &rho.entries).trace().re
    }

    pub fn partial_transpose(&self, part: &SubsystemSelector) -> Result<Self> {
        part.validate(self.dims.len())?;
        Ok(Self::from_parts(
            self.dims.clone(),
            partial_transpose_raw(&self.entries, &self.dims, part.indices()),
        ))
    }
}

/// Trace-one positive semidefinite operator with tensor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    entries: CMat,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, entries: CMat) -> Result<Self> {
        Self::with_tolerances(dims, entries, &Tolerances::default())
    }

    pub fn with_tolerances(dims: Vec<usize>, entries: CMat, tol: &Tolerances) -> Result<Self> {
        let op = HermitianOperator::with_tolerances(dims, entries, tol)?;
        let tr = op.entries.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return domain(format!("trace is {tr}, expected 1"));
        }
        let lmin = op.min_eigenvalue();
        if lmin < -tol.psd {
            return domain(format!("not positive semidefinite (λmin = {lmin:.3e})"));
        }
        Ok(Self {
            dims: op.dims,
            entries: op.entries,
        })
    }

    /// Builds a state known to be valid by construction (no checks).
    pub(crate) fn from_parts(dims: Vec<usize>, entries: CMat) -> Self {
        Self { dims, entries }
    }

    pub fn pure(dims: Vec<usize>, psi: &CVec) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > Tolerances::default().norm {
            return domain(format!("state vector has norm {norm}"));
        }
        check_dims(&dims, psi.len())?;
        Ok(Self::from_parts(dims, psi * psi.adjoint()))
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let side: usize = dims.iter().product();
        let e = CMat::identity(side, side) * Complex64::new(1.0 / side as f64, 0.0);
        Self::from_parts(dims, e)
    }

    /// `Σ w_i ρ_i` for a probability vector `w`.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return domain("empty mixture");
        };
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if parts.iter().any(|p| p.0 < 0.0) || (total - 1.0).abs() > 1e-9 {
            return domain("mixture weights must form a probability vector");
        }
        let mut e = CMat::zeros(first.side(), first.side());
        for (w, rho) in parts {
            if rho.dims != first.dims {
                return domain("mixture of states with different dims");
            }
            e += &rho.entries * Complex64::new(*w, 0.0);
        }
        Ok(Self::from_parts(first.dims.clone(), e))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator::from_parts(self.dims.clone(), self.entries.clone())
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_parts(dims, self.entries.kronecker(&other.entries))
    }

    /// Reduced state on `keep`; the kept subsystems stay in their original order.
    pub fn partial_trace(&self, keep: &SubsystemSelector) -> Result<Self> {
        keep.validate(self.dims.len())?;
        let (e, dims) = partial_trace_raw(&self.entries, &self.dims, keep.indices());
        Ok(Self::from_parts(dims, e))
    }

    pub fn partial_transpose(&self, part: &SubsystemSelector) -> Result<HermitianOperator> {
        self.as_operator().partial_transpose(part)
    }

    /// Moves subsystem `i` to position `perm[i]`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        validate_perm(perm, self.dims.len())?;
        let (e, dims) = permute_raw(&self.entries, &self.dims, perm);
        Ok(Self::from_parts(dims, e))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Entropy in bits.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let psd = Tolerances::default().psd;
        let mut s = 0.0;
        for l in self.eigenvalues() {
            if l < -psd {
                return domain(format!("eigenvalue {l:.3e} below zero"));
            }
            if l > 0.0 {
                s -= l * l.log2();
            }
        }
        Ok(s.max(0.0))
    }

    /// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
    pub fn fidelity_with_pure(&self, psi: &CVec) -> Result<f64> {
        if psi.len() != self.side() {
            return domain(format!(
                "vector of length {} for a state of side {}",
                psi.len(),
                self.side()
            ));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > Tolerances::default().norm {
            return domain(format!("vector has norm {norm}"));
        }
        let f = (psi.adjoint() * &self.entries * psi)[(0, 0)].re;
        Ok(f.clamp(0.0, 1.0))
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im.abs() <= 1e-14)
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).norm()
    }

    pub fn to_json(&self) -> String {
        state_json(&self.dims, &self.entries)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(text)?;
        let side: usize = file.dims.iter().product();
        if file.entries.len() != side * side {
            return domain(format!(
                "{} entries for dims {:?} (expected {})",
                file.entries.len(),
                file.dims,
                side * side
            ));
        }
        let m = CMat::from_fn(side, side, |r, c| {
            let [re, im] = file.entries[r * side + c];
            Complex64::new(re, im)
        });
        Self::new(file.dims, m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(NetwitError::from)
    }
}

pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    a.tensor(b)
}

pub fn partial_trace(m: &DensityMatrix, keep: &SubsystemSelector) -> Result<DensityMatrix> {
    m.partial_trace(keep)
}

pub fn partial_transpose(m: &DensityMatrix, part: &SubsystemSelector) -> Result<HermitianOperator> {
    m.partial_transpose(part)
}

pub fn permute_subsystems(m: &DensityMatrix, perm: &[usize]) -> Result<DensityMatrix> {
    m.permute_subsystems(perm)
}

pub fn von_neumann_entropy(m: &DensityMatrix) -> Result<f64> {
    m.von_neumann_entropy()
}

pub fn fidelity_with_pure(m: &DensityMatrix, psi: &CVec) -> Result<f64> {
    m.fidelity_with_pure(psi)
}

pub fn min_eigenvalue(m: &HermitianOperator) -> f64 {
    m.min_eigenvalue()
}

#[derive(Deserialize, Serialize)]
struct StateFile {
    dims: Vec<usize>,
    entries: Vec<[f64; 2]>,
}

/// JSON with every real number written to 17 significant digits.
fn state_json(dims: &[usize], m: &CMat) -> String {
    let side = m.nrows();
    let mut s = String::with_capacity(side * side * 52 + 64);
    s.push_str("{\"dims\": ");
    s.push_str(&serde_json::to_string(dims).expect("dims serialize"));
    s.push_str(", \"entries\": [");
    for r in 0..side {
        for c in 0..side {
            if r + c > 0 {
                s.push_str(", ");
            }
            let z = m[(r, c)];
            s.push_str(&format!("[{:.16e}, {:.16e}]", z.re, z.im));
        }
    }
    s.push_str("]}\n");
    s
}
