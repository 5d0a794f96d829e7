//! Reduction of an [`SdpProblem`] to linear-matrix-inequality form.
//!
//! Two-term equalities `a·x = ±a·y` merge parameters, one-term equalities fix
//! them, linearly dependent rows are dropped (after checking consistency) and
//! each block becomes an LMI `C_k + Σ y_i E_{k,i} ⪰ 0` in the surviving
//! variables. Complex Hermitian blocks of side `s` are embedded as real
//! symmetric matrices `[[Re, -Im], [Im, Re]]` of side `2s`.

use std::collections::BTreeMap;

use crate::error::{Result, SdpError};
use crate::problem::{BlockSpec, Field, SdpProblem, Sense};

pub(crate) type Pos = (u32, u32, f64);

#[derive(Clone, Debug)]
pub(crate) struct Lmi {
    pub block: usize,
    pub dim: usize,
    pub constant: Vec<Pos>,
    /// `(variable, entries of E_i)`; entries list both triangles.
    pub terms: Vec<(usize, Vec<Pos>)>,
}

#[derive(Clone, Debug)]
pub(crate) struct Reduced {
    pub n: usize,
    pub lmis: Vec<Lmi>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    /// Internal problem is always `maximize objective·y + objective_constant`.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    /// `+1` for maximization, `-1` for minimization of the user objective.
    pub sign: f64,
    pub components: Vec<Vec<usize>>,
}

pub(crate) enum Presolved {
    Reduced(Reduced),
    Infeasible(String),
}

/// Embedded positions of one block parameter.
pub(crate) fn param_positions(spec: &BlockSpec, local: usize) -> Vec<Pos> {
    let (r, c, imag) = spec.param_location(local);
    let s = spec.side;
    let (r32, c32) = (r as u32, c as u32);
    match spec.field {
        Field::Real => {
            if r == c {
                vec![(r32, r32, 1.0)]
            } else {
                vec![(r32, c32, 1.0), (c32, r32, 1.0)]
            }
        }
        Field::Complex => {
            let s32 = s as u32;
            if imag {
                vec![
                    (r32 + s32, c32, 1.0),
                    (c32, r32 + s32, 1.0),
                    (c32 + s32, r32, -1.0),
                    (r32, c32 + s32, -1.0),
                ]
            } else if r == c {
                vec![(r32, r32, 1.0), (r32 + s32, r32 + s32, 1.0)]
            } else {
                vec![
                    (r32, c32, 1.0),
                    (c32, r32, 1.0),
                    (r32 + s32, c32 + s32, 1.0),
                    (c32 + s32, r32 + s32, 1.0),
                ]
            }
        }
    }
}

pub(crate) fn embedded_dim(spec: &BlockSpec) -> usize {
    match spec.field {
        Field::Real => spec.side,
        Field::Complex => 2 * spec.side,
    }
}

/// Union-find over parameters carrying `x_v = sign · x_parent`.
struct SignedUnionFind {
    parent: Vec<usize>,
    sign: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

const FIX_TOL: f64 = 1e-9;

impl SignedUnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sign: vec![1.0; n],
            fixed: vec![None; n],
        }
    }

    fn find(&mut self, v: usize) -> (usize, f64) {
        let mut path = Vec::new();
        let mut cur = v;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // compress from the top so each node's sign is relative to the root
        for &node in path.iter().rev() {
            let p = self.parent[node];
            if p != root {
                self.sign[node] *= self.sign[p];
            }
            self.parent[node] = root;
        }
        (root, if v == root { 1.0 } else { self.sign[v] })
    }

    fn fix(&mut self, v: usize, value: f64) -> std::result::Result<(), String> {
        let (r, s) = self.find(v);
        let root_value = s * value;
        match self.fixed[r] {
            Some(old) if (old - root_value).abs() > FIX_TOL * (1.0 + old.abs()) => Err(format!(
                "parameter fixed to both {old} and {root_value}"
            )),
            Some(_) => Ok(()),
            None => {
                self.fixed[r] = Some(root_value);
                Ok(())
            }
        }
    }

    /// Imposes `x_a = s · x_b`.
    fn union(&mut self, a: usize, b: usize, s: f64) -> std::result::Result<(), String> {
        let (ra, sa) = self.find(a);
        let (rb, sb) = self.find(b);
        let rel = sa * s * sb; // x_ra = rel · x_rb
        if ra == rb {
            if rel < 0.0 {
                return self.fix(ra, 0.0);
            }
            return Ok(());
        }
        self.parent[ra] = rb;
        self.sign[ra] = rel;
        if let Some(va) = self.fixed[ra].take() {
            self.fix(rb, rel * va)?;
        }
        Ok(())
    }

    fn rewrite(&mut self, terms: &[(usize, f64)], rhs: f64) -> (Vec<(usize, f64)>, f64) {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut rhs = rhs;
        let mut scale: f64 = 0.0;
        for &(v, a) in terms {
            scale = scale.max(a.abs());
            let (r, s) = self.find(v);
            match self.fixed[r] {
                Some(val) => rhs -= a * s * val,
                None => *acc.entry(r).or_insert(0.0) += a * s,
            }
        }
        let cut = 1e-12 * scale;
        let out = acc.into_iter().filter(|&(_, c)| c.abs() > cut).collect();
        (out, rhs)
    }
}

pub(crate) fn presolve(p: &SdpProblem) -> Result<Presolved> {
    p.validate()?;
    let n_params = p.num_vars();
    let mut uf = SignedUnionFind::new(n_params);

    let orig_rows: Vec<(Vec<(usize, f64)>, f64)> = p
        .constraints()
        .iter()
        .map(|c| (c.form.terms().collect(), c.rhs))
        .collect();

    let mut active: Vec<usize> = (0..orig_rows.len()).collect();
    loop {
        let mut changed = false;
        let mut keep = Vec::with_capacity(active.len());
        for &ri in &active {
            let (terms, rhs) = uf.rewrite(&orig_rows[ri].0, orig_rows[ri].1);
            let rhs_scale = 1.0 + orig_rows[ri].1.abs();
            let outcome = match terms.len() {
                0 => {
                    if rhs.abs() > FIX_TOL * rhs_scale {
                        return Ok(Presolved::Infeasible(format!(
                            "constraint '{}' reduces to 0 = {rhs}",
                            p.constraints()[ri].label
                        )));
                    }
                    changed = true;
                    Ok(())
                }
                1 => {
                    changed = true;
                    uf.fix(terms[0].0, rhs / terms[0].1)
                }
                2 if rhs.abs() <= FIX_TOL * rhs_scale
                    && (terms[0].1.abs() - terms[1].1.abs()).abs()
                        <= 1e-12 * terms[0].1.abs() =>
                {
                    changed = true;
                    uf.union(terms[0].0, terms[1].0, -terms[1].1 / terms[0].1)
                }
                _ => {
                    keep.push(ri);
                    Ok(())
                }
            };
            if let Err(msg) = outcome {
                return Ok(Presolved::Infeasible(format!(
                    "constraint '{}': {msg}",
                    p.constraints()[ri].label
                )));
            }
        }
        active = keep;
        if !changed {
            break;
        }
    }

    // LMIs in root variables
    let mut lmis = Vec::with_capacity(p.blocks().len());
    let mut new_index: Vec<Option<usize>> = vec![None; n_params];
    let mut n = 0;
    for (k, spec) in p.blocks().iter().enumerate() {
        let off = p.block_offset(k);
        let mut constant: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut terms: BTreeMap<usize, BTreeMap<(u32, u32), f64>> = BTreeMap::new();
        for local in 0..spec.num_params() {
            let (root, s) = uf.find(off + local);
            let positions = param_positions(spec, local);
            match uf.fixed[root] {
                Some(val) => {
                    for (r, c, v) in positions {
                        *constant.entry((r, c)).or_insert(0.0) += s * val * v;
                    }
                }
                None => {
                    let slot = terms.entry(root).or_default();
                    for (r, c, v) in positions {
                        *slot.entry((r, c)).or_insert(0.0) += s * v;
                    }
                }
            }
        }
        let mut lmi_terms = Vec::with_capacity(terms.len());
        for (root, entries) in terms {
            let entries: Vec<Pos> = entries
                .into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|((r, c), v)| (r, c, v))
                .collect();
            if entries.is_empty() {
                continue;
            }
            let idx = *new_index[root].get_or_insert_with(|| {
                n += 1;
                n - 1
            });
            lmi_terms.push((idx, entries));
        }
        lmi_terms.sort_by_key(|t| t.0);
        lmis.push(Lmi {
            block: k,
            dim: embedded_dim(spec),
            constant: constant
                .into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|((r, c), v)| (r, c, v))
                .collect(),
            terms: lmi_terms,
        });
    }

    let map_terms = |terms: Vec<(usize, f64)>| -> Result<Vec<(usize, f64)>> {
        terms
            .into_iter()
            .map(|(r, c)| {
                new_index[r].map(|i| (i, c)).ok_or_else(|| {
                    SdpError::Unsupported(format!(
                        "parameter {r} appears only in linear constraints"
                    ))
                })
            })
            .collect()
    };

    let mut rows = Vec::with_capacity(active.len());
    let mut rhs = Vec::with_capacity(active.len());
    let mut labels = Vec::with_capacity(active.len());
    for &ri in &active {
        let (terms, r) = uf.rewrite(&orig_rows[ri].0, orig_rows[ri].1);
        if terms.is_empty() {
            continue;
        }
        rows.push(map_terms(terms)?);
        rhs.push(r);
        labels.push(p.constraints()[ri].label.clone());
    }

    let sign = match p.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let obj_terms: Vec<(usize, f64)> = p.objective().terms().collect();
    let (obj_terms, obj_rest) = uf.rewrite(&obj_terms, 0.0);
    let mut objective = vec![0.0; n];
    for (i, c) in map_terms(obj_terms)? {
        objective[i] = sign * c;
    }
    // rewrite() moved fixed contributions to the "rhs" side with a minus sign
    let objective_constant = -sign * obj_rest;

    match drop_dependent_rows(n, rows, rhs, &labels) {
        Err(msg) => Ok(Presolved::Infeasible(msg)),
        Ok((rows, rhs)) => {
            let components = components(n, &lmis);
            Ok(Presolved::Reduced(Reduced {
                n,
                lmis,
                rows,
                rhs,
                objective,
                objective_constant,
                sign,
                components,
            }))
        }
    }
}

type Rows = (Vec<Vec<(usize, f64)>>, Vec<f64>);

/// Pivoted Cholesky on the Gram matrix `B Bᵀ` selects a maximal independent
/// row set; the remaining rows must be consistent with it.
fn drop_dependent_rows(
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    labels: &[String],
) -> std::result::Result<Rows, String> {
    let m = rows.len();
    if m == 0 {
        return Ok((rows, rhs));
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(v, a) in row {
            cols[v].push((i, a));
        }
    }
    // dense symmetric Gram matrix, row-major
    let mut g = vec![0.0; m * m];
    for col in &cols {
        for &(i, a) in col {
            for &(j, b) in col {
                g[i * m + j] += a * b;
            }
        }
    }
    let max_diag = (0..m).map(|i| g[i * m + i]).fold(0.0, f64::max);
    let tol = 1e-10 * max_diag.max(1e-300);

    let mut perm: Vec<usize> = (0..m).collect();
    let mut rank = 0;
    // in-place pivoted Cholesky on the permuted matrix; L stored in the lower triangle
    let idx = |a: usize, b: usize| a * m + b;
    while rank < m {
        let (best, best_val) = (rank..m)
            .map(|i| (i, g[idx(perm[i], perm[i])]))
            .fold((rank, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            break;
        }
        perm.swap(rank, best);
        let p = perm[rank];
        let d = best_val.sqrt();
        g[idx(p, p)] = d;
        for &q in &perm[rank + 1..] {
            g[idx(q, p)] /= d;
        }
        // the trailing block is kept fully symmetric since later pivots reorder it
        for a in rank + 1..m {
            let qa = perm[a];
            let la = g[idx(qa, p)];
            if la == 0.0 {
                continue;
            }
            for &qb in &perm[rank + 1..a] {
                let upd = la * g[idx(qb, p)];
                g[idx(qa, qb)] -= upd;
                g[idx(qb, qa)] -= upd;
            }
            g[idx(qa, qa)] -= la * la;
        }
        rank += 1;
    }

    if rank < m {
        // w = L_I⁻¹ d_I, then each dependent row must satisfy d_j = L_j · w
        let mut w = vec![0.0; rank];
        for a in 0..rank {
            let pa = perm[a];
            let mut s = rhs[pa];
            for (b, wb) in w.iter().enumerate().take(a) {
                s -= g[idx(pa, perm[b])] * wb;
            }
            w[a] = s / g[idx(pa, pa)];
        }
        let w_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for &pj in &perm[rank..] {
            let pred: f64 = (0..rank).map(|b| g[idx(pj, perm[b])] * w[b]).sum();
            if (pred - rhs[pj]).abs() > 1e-7 * (1.0 + rhs[pj].abs() + w_norm) {
                return Err(format!(
                    "constraint '{}' contradicts the others (rhs {} vs implied {pred})",
                    labels[pj], rhs[pj]
                ));
            }
        }
    }

    let mut keep: Vec<usize> = perm[..rank].to_vec();
    keep.sort_unstable();
    let mut rows = rows;
    let new_rows = keep.iter().map(|&i| std::mem::take(&mut rows[i])).collect();
    let new_rhs = keep.iter().map(|&i| rhs[i]).collect();
    Ok((new_rows, new_rhs))
}

fn components(n: usize, lmis: &[Lmi]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for lmi in lmis {
        if let Some(&(first, _)) = lmi.terms.first() {
            for &(v, _) in &lmi.terms[1..] {
                let (a, b) = (root(&mut parent, first), root(&mut parent, v));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = root(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}
