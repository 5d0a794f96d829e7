//! Solver-agnostic semidefinite programs over block matrix variables.
//!
//! Every variable of an [`SdpProblem`] is a real parameter of one PSD block.
//! A real block of side `s` carries `s(s+1)/2` parameters (its upper
//! triangle); a complex Hermitian block carries `s²` (real parts of the
//! upper triangle including the diagonal, then imaginary parts of the
//! strict upper triangle). Constraints are real linear equalities over
//! those parameters and the objective is a real linear functional.

use std::collections::BTreeMap;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub side: usize,
    pub field: Field,
}

impl BlockSpec {
    pub fn num_params(&self) -> usize {
        match self.field {
            Field::Real => self.side * (self.side + 1) / 2,
            Field::Complex => self.side * self.side,
        }
    }

    /// Local index of `Re X[r][c]`, `r <= c`.
    pub(crate) fn re_param(&self, r: usize, c: usize) -> usize {
        debug_assert!(r <= c && c < self.side);
        r * self.side - r * r.saturating_sub(1) / 2 + (c - r)
    }

    /// Local index of `Im X[r][c]`, `r < c`, complex blocks only.
    pub(crate) fn im_param(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < c && c < self.side && self.field == Field::Complex);
        let s = self.side;
        s * (s + 1) / 2 + r * (s - 1) - r * r.saturating_sub(1) / 2 + (c - r - 1)
    }

    /// Inverse of the parameter numbering: `(row, col, is_imaginary)`.
    pub(crate) fn param_location(&self, local: usize) -> (usize, usize, bool) {
        let s = self.side;
        let n_re = s * (s + 1) / 2;
        let (mut k, imag, width) = if local < n_re {
            (local, false, s)
        } else {
            (local - n_re, true, s - 1)
        };
        let mut r = 0;
        let mut w = width;
        while k >= w {
            k -= w;
            r += 1;
            w -= 1;
        }
        if imag {
            (r, r + 1 + k, true)
        } else {
            (r, r + k, false)
        }
    }
}

/// Handle to a declared block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

/// Sparse real linear functional over the global parameter vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    terms: BTreeMap<usize, f64>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(index: usize, coef: f64) -> Self {
        let mut f = Self::new();
        f.add_term(index, coef);
        f
    }

    pub fn add_term(&mut self, index: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let e = self.terms.entry(index).or_insert(0.0);
        *e += coef;
        if *e == 0.0 {
            self.terms.remove(&index);
        }
    }

    pub fn add_scaled(&mut self, other: &LinearForm, scale: f64) {
        for (&i, &c) in &other.terms {
            self.add_term(i, c * scale);
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        let mut f = Self::new();
        f.add_scaled(self, scale);
        f
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(&i, &c)| (i, c))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(&i, &c)| c * x[i]).sum()
    }
}

impl Add for &LinearForm {
    type Output = LinearForm;
    fn add(self, rhs: &LinearForm) -> LinearForm {
        let mut f = self.clone();
        f.add_scaled(rhs, 1.0);
        f
    }
}

impl Sub for &LinearForm {
    type Output = LinearForm;
    fn sub(self, rhs: &LinearForm) -> LinearForm {
        let mut f = self.clone();
        f.add_scaled(rhs, -1.0);
        f
    }
}

/// A complex-valued linear expression `re + i·im` in the real parameters,
/// e.g. one entry of a Hermitian block or of a partial trace of one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexForm {
    pub re: LinearForm,
    pub im: LinearForm,
}

impl ComplexForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_assign(&mut self, other: &ComplexForm) {
        self.re.add_scaled(&other.re, 1.0);
        self.im.add_scaled(&other.im, 1.0);
    }

    /// `self += z · other`.
    pub fn add_scaled(&mut self, other: &ComplexForm, z: Complex64) {
        self.re.add_scaled(&other.re, z.re);
        self.re.add_scaled(&other.im, -z.im);
        self.im.add_scaled(&other.im, z.re);
        self.im.add_scaled(&other.re, z.im);
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.scaled(-1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_empty() && self.im.is_empty()
    }
}

impl Sub for &ComplexForm {
    type Output = ComplexForm;
    fn sub(self, rhs: &ComplexForm) -> ComplexForm {
        ComplexForm {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl Add for &ComplexForm {
    type Output = ComplexForm;
    fn add(self, rhs: &ComplexForm) -> ComplexForm {
        ComplexForm {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl Neg for &ComplexForm {
    type Output = ComplexForm;
    fn neg(self) -> ComplexForm {
        ComplexForm {
            re: self.re.scaled(-1.0),
            im: self.im.scaled(-1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqConstraint {
    pub form: LinearForm,
    pub rhs: f64,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    blocks: Vec<BlockSpec>,
    offsets: Vec<usize>,
    constraints: Vec<EqConstraint>,
    objective: LinearForm,
    sense: Sense,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self {
            blocks: Vec::new(),
            offsets: vec![0],
            constraints: Vec::new(),
            objective: LinearForm::new(),
            sense: Sense::Maximize,
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, side: usize, field: Field) -> BlockId {
        assert!(side > 0, "blocks must be non-empty");
        let spec = BlockSpec {
            name: name.into(),
            side,
            field,
        };
        let next = self.num_vars() + spec.num_params();
        self.blocks.push(spec);
        self.offsets.push(next);
        BlockId(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &BlockSpec {
        &self.blocks[id.0]
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn num_vars(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub(crate) fn block_offset(&self, id: usize) -> usize {
        self.offsets[id]
    }

    /// Linear form of `Re tr(W · X)` for a fixed matrix `W` and block `X`.
    pub fn inner_with(&self, id: BlockId, w: &nalgebra::DMatrix<Complex64>) -> LinearForm {
        let b = &self.blocks[id.0];
        assert_eq!(w.nrows(), b.side, "weight matrix size for block {}", b.name);
        assert_eq!(w.ncols(), b.side, "weight matrix size for block {}", b.name);
        let off = self.offsets[id.0];
        let mut f = LinearForm::new();
        for r in 0..b.side {
            f.add_term(off + b.re_param(r, r), w[(r, r)].re);
            for c in r + 1..b.side {
                // X_rc = a + ib, X_cr = a - ib
                let (wrc, wcr) = (w[(r, c)], w[(c, r)]);
                f.add_term(off + b.re_param(r, c), wcr.re + wrc.re);
                if b.field == Field::Complex {
                    f.add_term(off + b.im_param(r, c), wrc.im - wcr.im);
                }
            }
        }
        f
    }

    /// Linear expression of the complex entry `X[r][c]` of a block.
    pub fn entry(&self, id: BlockId, r: usize, c: usize) -> ComplexForm {
        let b = &self.blocks[id.0];
        assert!(r < b.side && c < b.side, "entry ({r},{c}) outside block {}", b.name);
        let off = self.offsets[id.0];
        let (lo, hi) = if r <= c { (r, c) } else { (c, r) };
        let mut f = ComplexForm::zero();
        f.re.add_term(off + b.re_param(lo, hi), 1.0);
        if b.field == Field::Complex && lo != hi {
            let sign = if r < c { 1.0 } else { -1.0 };
            f.im.add_term(off + b.im_param(lo, hi), sign);
        }
        f
    }

    /// Linear form for the trace of a block.
    pub fn trace(&self, id: BlockId) -> LinearForm {
        let side = self.blocks[id.0].side;
        let mut f = LinearForm::new();
        for i in 0..side {
            f.add_scaled(&self.entry(id, i, i).re, 1.0);
        }
        f
    }

    pub fn add_constraint(&mut self, form: LinearForm, rhs: f64, label: impl Into<String>) {
        self.constraints.push(EqConstraint {
            form,
            rhs,
            label: label.into(),
        });
    }

    /// Adds `Re` and `Im` rows of `form = rhs`, skipping rows that are
    /// identically `0 = 0`.
    pub fn add_complex_constraint(&mut self, form: &ComplexForm, rhs: Complex64, label: &str) {
        if !(form.re.is_empty() && rhs.re == 0.0) {
            self.add_constraint(form.re.clone(), rhs.re, format!("{label}.re"));
        }
        if !(form.im.is_empty() && rhs.im == 0.0) {
            self.add_constraint(form.im.clone(), rhs.im, format!("{label}.im"));
        }
    }

    pub fn constraints(&self) -> &[EqConstraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, form: LinearForm, sense: Sense) {
        self.objective = form;
        self.sense = sense;
    }

    pub fn objective(&self) -> &LinearForm {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check = |f: &LinearForm, what: &str| -> Result<()> {
            for (i, c) in f.terms() {
                if i >= n {
                    return Err(SdpError::Malformed(format!(
                        "{what} references parameter {i} but only {n} are declared"
                    )));
                }
                if !c.is_finite() {
                    return Err(SdpError::Malformed(format!("{what} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        for (k, con) in self.constraints.iter().enumerate() {
            check(&con.form, &format!("constraint {k} ({})", con.label))?;
            if !con.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("constraint {k} has non-finite rhs")));
            }
        }
        check(&self.objective, "objective")?;
        if self.blocks.is_empty() {
            return Err(SdpError::Malformed("no blocks declared".into()));
        }
        Ok(())
    }

    /// Self-describing conic export: one column per block parameter.
    pub fn to_conic(&self) -> ConicExport {
        let mut a = Vec::new();
        let mut b = Vec::with_capacity(self.constraints.len());
        for (row, con) in self.constraints.iter().enumerate() {
            for (col, v) in con.form.terms() {
                a.push((row, col, v));
            }
            b.push(con.rhs);
        }
        let mut c = vec![0.0; self.num_vars()];
        for (i, v) in self.objective.terms() {
            c[i] = v;
        }
        ConicExport {
            format: "netwit-conic-v1".into(),
            parameterization: "per block: Re of upper triangle row-major (r<=c), then Im of strict upper triangle row-major for complex blocks".into(),
            blocks: self.blocks.clone(),
            num_vars: self.num_vars(),
            a,
            b,
            c,
            sense: self.sense,
            labels: self.constraints.iter().map(|c| c.label.clone()).collect(),
        }
    }

    pub fn from_conic(export: &ConicExport) -> Result<Self> {
        let mut p = SdpProblem::new();
        for blk in &export.blocks {
            p.add_block(blk.name.clone(), blk.side, blk.field);
        }
        if p.num_vars() != export.num_vars || export.c.len() != export.num_vars {
            return Err(SdpError::Malformed("variable count does not match blocks".into()));
        }
        let mut rows = vec![LinearForm::new(); export.b.len()];
        for &(r, col, v) in &export.a {
            if r >= rows.len() || col >= export.num_vars {
                return Err(SdpError::Malformed(format!("triplet ({r},{col}) out of range")));
            }
            rows[r].add_term(col, v);
        }
        for (r, form) in rows.into_iter().enumerate() {
            let label = export.labels.get(r).cloned().unwrap_or_default();
            p.add_constraint(form, export.b[r], label);
        }
        let mut obj = LinearForm::new();
        for (i, &v) in export.c.iter().enumerate() {
            obj.add_term(i, v);
        }
        p.set_objective(obj, export.sense);
        p.validate()?;
        Ok(p)
    }

    pub fn write_conic(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, &self.to_conic())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicExport {
    pub format: String,
    pub parameterization: String,
    pub blocks: Vec<BlockSpec>,
    pub num_vars: usize,
    /// `(row, column, value)` triplets of the equality matrix.
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub sense: Sense,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_numbering_is_a_bijection() {
        for field in [Field::Real, Field::Complex] {
            for side in 1..6 {
                let b = BlockSpec {
                    name: "x".into(),
                    side,
                    field,
                };
                let mut seen = vec![false; b.num_params()];
                for r in 0..side {
                    for c in r..side {
                        let k = b.re_param(r, c);
                        assert!(!seen[k]);
                        seen[k] = true;
                        assert_eq!(b.param_location(k), (r, c, false));
                        if field == Field::Complex && r < c {
                            let k = b.im_param(r, c);
                            assert!(!seen[k]);
                            seen[k] = true;
                            assert_eq!(b.param_location(k), (r, c, true));
                        }
                    }
                }
                assert!(seen.into_iter().all(|s| s));
            }
        }
    }

    #[test]
    fn lower_entries_conjugate() {
        let mut p = SdpProblem::new();
        let x = p.add_block("x", 3, Field::Complex);
        let up = p.entry(x, 0, 2);
        let lo = p.entry(x, 2, 0);
        assert_eq!(up.conj(), lo);
        assert!(p.entry(x, 1, 1).im.is_empty());
    }

    #[test]
    fn validation_rejects_undeclared_parameters() {
        let mut p = SdpProblem::new();
        p.add_block("x", 2, Field::Real);
        p.add_constraint(LinearForm::var(7, 1.0), 1.0, "bad");
        assert!(matches!(p.validate(), Err(SdpError::Malformed(_))));
    }

    #[test]
    fn conic_export_round_trips() {
        let mut p = SdpProblem::new();
        let x = p.add_block("x", 2, Field::Complex);
        let y = p.add_block("y", 3, Field::Real);
        p.add_constraint(p.trace(x), 1.0, "trx");
        let f = &p.entry(x, 0, 1) - &p.entry(y, 1, 2);
        p.add_complex_constraint(&f, Complex64::new(0.25, 0.0), "link");
        p.set_objective(p.entry(y, 0, 0).re, Sense::Minimize);
        let json = serde_json::to_string(&p.to_conic()).unwrap();
        let back: ConicExport = serde_json::from_str(&json).unwrap();
        let q = SdpProblem::from_conic(&back).unwrap();
        assert_eq!(q.to_conic(), p.to_conic());
    }
}
