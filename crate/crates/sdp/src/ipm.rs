//! Infeasible-start primal-dual interior-point method (HKM direction with
//! Mehrotra predictor-corrector) for problems in LMI form
//!
//! ```text
//! maximize  bᵀy   s.t.  Z_k = C_k + Σ_i y_i E_{k,i} ⪰ 0,   B y = d
//! minimize  Σ⟨C_k, X_k⟩ + dᵀu   s.t.  b + ℰ(X) − Bᵀu = 0,  X_k ⪰ 0
//! ```
//!
//! where `ℰ(X)_i = Σ_k ⟨E_{k,i}, X_k⟩`. The Schur complement `M` is block
//! diagonal over groups of variables that share no LMI; each block is
//! factored separately and the equality rows are handled through the reduced
//! system `(B M⁻¹ Bᵀ) Δu = B M⁻¹ h − r_e`.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Accum, Mat, Par, Side};
use log::debug;
use nalgebra::DMatrix;

use crate::presolve::{Lmi, Reduced};

#[derive(Clone, Debug)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub near_tol: f64,
    pub step_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Failed,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmOutcome {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    /// Dual matrices, one per LMI (zero for constant LMIs).
    pub x: Vec<DMatrix<f64>>,
    pub pobj: f64,
    pub dobj: f64,
    pub iterations: usize,
    pub pinf: f64,
    pub dinf: f64,
    pub gap: f64,
    pub message: String,
}

struct Component {
    vars: Vec<usize>,
    rows: Vec<usize>,
    /// Dense `B_cᵀ` (variables × rows of this component).
    bt: Mat<f64>,
    lmis: Vec<usize>,
}

struct Structure {
    /// var -> (component, local index)
    place: Vec<(usize, usize)>,
    comps: Vec<Component>,
    /// B stored by rows.
    rows: Vec<Vec<(usize, f64)>>,
}

impl Structure {
    fn new(red: &Reduced) -> Self {
        let mut place = vec![(0, 0); red.n];
        for (ci, vars) in red.components.iter().enumerate() {
            for (li, &v) in vars.iter().enumerate() {
                place[v] = (ci, li);
            }
        }
        let mut comp_rows: Vec<Vec<usize>> = vec![Vec::new(); red.components.len()];
        for (ri, row) in red.rows.iter().enumerate() {
            let mut seen: Vec<usize> = row.iter().map(|&(v, _)| place[v].0).collect();
            seen.sort_unstable();
            seen.dedup();
            for c in seen {
                comp_rows[c].push(ri);
            }
        }
        let mut comp_lmis: Vec<Vec<usize>> = vec![Vec::new(); red.components.len()];
        for (k, lmi) in red.lmis.iter().enumerate() {
            if let Some(&(v, _)) = lmi.terms.first() {
                comp_lmis[place[v].0].push(k);
            }
        }
        let comps = red
            .components
            .iter()
            .enumerate()
            .map(|(ci, vars)| {
                let rows = std::mem::take(&mut comp_rows[ci]);
                let mut bt = Mat::<f64>::zeros(vars.len(), rows.len());
                for (lr, &ri) in rows.iter().enumerate() {
                    for &(v, a) in &red.rows[ri] {
                        let (c, lv) = place[v];
                        if c == ci {
                            bt[(lv, lr)] += a;
                        }
                    }
                }
                Component {
                    vars: vars.clone(),
                    rows,
                    bt,
                    lmis: std::mem::take(&mut comp_lmis[ci]),
                }
            })
            .collect();
        Self {
            place,
            comps,
            rows: red.rows.clone(),
        }
    }

    fn b_times(&self, y: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(v, a)| a * y[v]).sum())
            .collect()
    }

    fn bt_times(&self, u: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (row, &ui) in self.rows.iter().zip(u) {
            for &(v, a) in row {
                out[v] += a * ui;
            }
        }
        out
    }
}

fn lmi_value(lmi: &Lmi, y: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(lmi.dim, lmi.dim);
    for &(r, c, v) in &lmi.constant {
        s[(r as usize, c as usize)] += v;
    }
    add_linear(lmi, y, &mut s);
    s
}

fn add_linear(lmi: &Lmi, y: &[f64], out: &mut DMatrix<f64>) {
    for (var, entries) in &lmi.terms {
        let yv = y[*var];
        if yv == 0.0 {
            continue;
        }
        for &(r, c, v) in entries {
            out[(r as usize, c as usize)] += v * yv;
        }
    }
}

fn add_adjoint(lmi: &Lmi, k: &DMatrix<f64>, out: &mut [f64]) {
    for (var, entries) in &lmi.terms {
        out[*var] += entries
            .iter()
            .map(|&(r, c, v)| v * k[(r as usize, c as usize)])
            .sum::<f64>();
    }
}

fn constant_inner(lmi: &Lmi, x: &DMatrix<f64>) -> f64 {
    lmi.constant
        .iter()
        .map(|&(r, c, v)| v * x[(r as usize, c as usize)])
        .sum()
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Largest `α ≤ 1/fraction` keeping `P + αΔ ⪰ 0`, given the Cholesky factor of `P`.
fn max_step(l: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let Some(linv) = l.clone().solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
    else {
        return 0.0;
    };
    let mut w = &linv * delta * linv.transpose();
    symmetrize(&mut w);
    let lmin = w.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| c.l())
}

struct Factored {
    llts: Vec<Option<faer::linalg::solvers::Llt<f64>>>,
    s_llt: Option<faer::linalg::solvers::Llt<f64>>,
}

pub(crate) struct Ipm<'a> {
    red: &'a Reduced,
    st: Structure,
    settings: IpmSettings,
    /// LMIs carrying variables; constant ones were checked up front.
    active: Vec<usize>,
}

impl<'a> Ipm<'a> {
    pub fn new(red: &'a Reduced, settings: IpmSettings) -> Self {
        let active = (0..red.lmis.len())
            .filter(|&k| !red.lmis[k].terms.is_empty())
            .collect();
        Self {
            red,
            st: Structure::new(red),
            settings,
            active,
        }
    }

    fn adjoint(&self, xs: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.red.n];
        for &k in &self.active {
            add_adjoint(&self.red.lmis[k], &xs[k], &mut out);
        }
        out
    }

    fn factor(&self, xs: &[DMatrix<f64>], gs: &[DMatrix<f64>]) -> Option<Factored> {
        let red = self.red;
        let mut llts = Vec::with_capacity(self.st.comps.len());
        let m = red.rows.len();
        let mut s = Mat::<f64>::zeros(m, m);
        for comp in &self.st.comps {
            let nc = comp.vars.len();
            let mut buf = vec![0.0; nc * nc];
            for &k in &comp.lmis {
                let lmi = &red.lmis[k];
                let d = lmi.dim;
                let x = xs[k].as_slice();
                let g = gs[k].as_slice();
                let locals: Vec<usize> = lmi.terms.iter().map(|t| self.st.place[t.0].1).collect();
                for (i, (_, ei)) in lmi.terms.iter().enumerate() {
                    let li = locals[i];
                    for (j, (_, ej)) in lmi.terms.iter().enumerate().skip(i) {
                        let mut v = 0.0;
                        for &(p, q, a) in ei {
                            let (p, q) = (p as usize, q as usize);
                            for &(r, s_, c) in ej {
                                v += a * c * x[q + r as usize * d] * g[s_ as usize + p * d];
                            }
                        }
                        let lj = locals[j];
                        buf[li + lj * nc] += v;
                        if li != lj {
                            buf[lj + li * nc] += v;
                        }
                    }
                }
            }
            let max_diag = (0..nc).map(|i| buf[i + i * nc]).fold(0.0, f64::max);
            let mut shift = 0.0;
            let llt = loop {
                let mat = Mat::from_fn(nc, nc, |i, j| {
                    buf[i + j * nc] + if i == j { shift } else { 0.0 }
                });
                match mat.llt(Side::Lower) {
                    Ok(l) => break l,
                    Err(_) => {
                        shift = if shift == 0.0 {
                            1e-14 * max_diag.max(1.0)
                        } else {
                            shift * 100.0
                        };
                        if shift > 1e-4 * max_diag.max(1.0) {
                            return None;
                        }
                    }
                }
            };
            if !comp.rows.is_empty() {
                let mut k = comp.bt.clone();
                solve_lower_triangular_in_place(llt.L(), k.as_mut(), Par::Seq);
                let mc = comp.rows.len();
                let mut sc = Mat::<f64>::zeros(mc, mc);
                matmul(sc.as_mut(), Accum::Replace, k.transpose(), k.as_ref(), 1.0, Par::Seq);
                for (a, &ra) in comp.rows.iter().enumerate() {
                    for (b, &rb) in comp.rows.iter().enumerate() {
                        s[(ra, rb)] += sc[(a, b)];
                    }
                }
            }
            llts.push(Some(llt));
        }
        let s_llt = if m > 0 {
            let max_diag = (0..m).map(|i| s[(i, i)]).fold(0.0, f64::max);
            let mut shift = 0.0;
            loop {
                let mut sm = s.clone();
                for i in 0..m {
                    sm[(i, i)] += shift;
                }
                match sm.llt(Side::Lower) {
                    Ok(l) => break Some(l),
                    Err(_) => {
                        shift = if shift == 0.0 {
                            1e-14 * max_diag.max(1.0)
                        } else {
                            shift * 100.0
                        };
                        if shift > 1e-4 * max_diag.max(1.0) {
                            return None;
                        }
                    }
                }
            }
        } else {
            None
        };
        Some(Factored { llts, s_llt })
    }

    fn apply_minv(&self, f: &Factored, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.red.n];
        for (comp, llt) in self.st.comps.iter().zip(&f.llts) {
            let llt = llt.as_ref().expect("factored component");
            let rhs = Mat::from_fn(comp.vars.len(), 1, |i, _| h[comp.vars[i]]);
            let sol = llt.solve(&rhs);
            for (i, &v) in comp.vars.iter().enumerate() {
                out[v] = sol[(i, 0)];
            }
        }
        out
    }

    /// Solves `M Δy + Bᵀ Δu = h`, `B Δy = r_e`.
    fn solve_kkt(&self, f: &Factored, h: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.apply_minv(f, h);
        let m = re.len();
        if m == 0 {
            return (w, Vec::new());
        }
        let bw = self.st.b_times(&w);
        let rhs = Mat::from_fn(m, 1, |i, _| bw[i] - re[i]);
        let du_m = f.s_llt.as_ref().expect("factored Schur complement").solve(&rhs);
        let du: Vec<f64> = (0..m).map(|i| du_m[(i, 0)]).collect();
        let btdu = self.st.bt_times(&du, self.red.n);
        let h2: Vec<f64> = h.iter().zip(&btdu).map(|(a, b)| a - b).collect();
        (self.apply_minv(f, &h2), du)
    }

    pub fn run(&self) -> IpmOutcome {
        let red = self.red;
        let n = red.n;
        let m = red.rows.len();
        let nl = red.lmis.len();
        let b = &red.objective;
        let d = &red.rhs;
        let set = &self.settings;

        let b_norm = norm(b);
        let d_norm = norm(d);
        let c_norm = red
            .lmis
            .iter()
            .map(|l| l.constant.iter().map(|p| p.2 * p.2).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let total_dim: usize = self.active.iter().map(|&k| red.lmis[k].dim).sum();

        let mut y = vec![0.0; n];
        let mut u = vec![0.0; m];
        let mut xs: Vec<DMatrix<f64>> = red.lmis.iter().map(|l| DMatrix::zeros(l.dim, l.dim)).collect();
        let mut zs = xs.clone();
        for &k in &self.active {
            let dim = red.lmis[k].dim;
            xs[k] = DMatrix::identity(dim, dim);
            zs[k] = DMatrix::identity(dim, dim);
        }

        let mut best: Option<(f64, Vec<f64>, Vec<DMatrix<f64>>, [f64; 5])> = None;
        let mut stalls = 0;
        let mut iter = 0;
        let outcome = |status, y: Vec<f64>, x, it, r: [f64; 5], msg: String| IpmOutcome {
            status,
            y,
            x,
            pobj: r[0],
            dobj: r[1],
            iterations: it,
            pinf: r[2],
            dinf: r[3],
            gap: r[4],
            message: msg,
        };

        loop {
            // residuals
            let mut rd: Vec<DMatrix<f64>> = Vec::with_capacity(nl);
            let mut rd_norm2 = 0.0;
            for k in 0..nl {
                if self.active.contains(&k) {
                    let mut r = lmi_value(&red.lmis[k], &y);
                    r -= &zs[k];
                    rd_norm2 += r.norm_squared();
                    rd.push(r);
                } else {
                    rd.push(DMatrix::zeros(0, 0));
                }
            }
            let ex = self.adjoint(&xs);
            let btu = self.st.bt_times(&u, n);
            let rp: Vec<f64> = (0..n).map(|i| b[i] + ex[i] - btu[i]).collect();
            let by = self.st.b_times(&y);
            let re: Vec<f64> = (0..m).map(|i| d[i] - by[i]).collect();

            let pobj: f64 = b.iter().zip(&y).map(|(a, c)| a * c).sum();
            let dobj: f64 = self
                .active
                .iter()
                .map(|&k| constant_inner(&red.lmis[k], &xs[k]))
                .sum::<f64>()
                + d.iter().zip(&u).map(|(a, c)| a * c).sum::<f64>();
            let xz: f64 = self.active.iter().map(|&k| inner(&xs[k], &zs[k])).sum();
            let mu = xz / total_dim as f64;

            let pinf = (norm(&re) / (1.0 + d_norm)).max(rd_norm2.sqrt() / (1.0 + c_norm));
            let dinf = norm(&rp) / (1.0 + b_norm);
            let relgap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
            let report = [pobj, dobj, pinf, dinf, relgap];
            let merit = pinf.max(dinf).max(relgap);
            debug!(
                "ipm it {iter:3} pobj {pobj:+.9e} dobj {dobj:+.9e} pinf {pinf:.2e} dinf {dinf:.2e} gap {relgap:.2e} mu {mu:.2e}"
            );
            if best.as_ref().map_or(true, |b| merit < b.0) {
                best = Some((merit, y.clone(), xs.clone(), report));
            }
            if merit < set.tol {
                return outcome(IpmStatus::Optimal, y, xs, iter, report, "converged".into());
            }

            // Farkas ray for the y-problem: X ⪰ 0 with ℰ(X) = Bᵀu and ⟨C,X⟩ + dᵀu < 0
            let ray = -dobj;
            if ray > 0.0 {
                let resid: f64 = norm(
                    &(0..n).map(|i| ex[i] - btu[i]).collect::<Vec<_>>(),
                );
                let size = xs.iter().map(frob).sum::<f64>() + norm(&u);
                if resid < 1e-8 * ray && size > 1e6 {
                    return outcome(
                        IpmStatus::Infeasible,
                        y,
                        xs,
                        iter,
                        report,
                        "primal infeasibility certificate".into(),
                    );
                }
            }

            if iter >= set.max_iter || stalls >= 5 {
                break;
            }
            iter += 1;

            // Z⁻¹ and factorizations
            let mut gs: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
            let mut lx: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
            let mut lz: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
            let mut ok = true;
            for &k in &self.active {
                match (cholesky_lower(&zs[k]), cholesky_lower(&xs[k])) {
                    (Some(l), Some(lxk)) => {
                        let dim = l.nrows();
                        let linv = l
                            .clone()
                            .solve_lower_triangular(&DMatrix::identity(dim, dim))
                            .expect("triangular factor");
                        let mut g = linv.transpose() * linv;
                        symmetrize(&mut g);
                        gs[k] = g;
                        lz[k] = l;
                        lx[k] = lxk;
                    }
                    _ => ok = false,
                }
            }
            let Some(fact) = (if ok { self.factor(&xs, &gs) } else { None }) else {
                debug!("ipm: factorization failed at iteration {iter}");
                break;
            };

            // predictor (σ = 0) then corrector
            let mut dxa: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
            let mut dza: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
            let mut step = (0.0, 0.0);
            let mut dirs = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for phase in 0..2 {
                let sigma_mu = if phase == 0 {
                    0.0
                } else {
                    let mut xz_aff = 0.0;
                    for &k in &self.active {
                        let xa = &xs[k] + &dxa[k] * step.0;
                        let za = &zs[k] + &dza[k] * step.1;
                        xz_aff += inner(&xa, &za);
                    }
                    let mu_aff = xz_aff / total_dim as f64;
                    let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
                    sigma * mu
                };
                // complementarity target K_k = σμG − X − X·Rd·G (− ΔXa·ΔZa·G)
                let mut ks: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
                for &k in &self.active {
                    let g = &gs[k];
                    let mut kk = g * sigma_mu - &xs[k] - &xs[k] * &rd[k] * g;
                    if phase == 1 {
                        kk -= &dxa[k] * &dza[k] * g;
                    }
                    ks[k] = kk;
                }
                let ek = self.adjoint(&ks);
                let h: Vec<f64> = (0..n).map(|i| rp[i] + ek[i]).collect();
                let (dy, du) = self.solve_kkt(&fact, &h, &re);
                let mut dx = vec![DMatrix::zeros(0, 0); nl];
                let mut dz = vec![DMatrix::zeros(0, 0); nl];
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for &k in &self.active {
                    let mut dzk = rd[k].clone();
                    add_linear(&red.lmis[k], &dy, &mut dzk);
                    let mut dxk = &ks[k] - &xs[k] * &dzk * &gs[k];
                    symmetrize(&mut dxk);
                    ad = ad.min(max_step(&lx[k], &dxk));
                    ap = ap.min(max_step(&lz[k], &dzk));
                    dx[k] = dxk;
                    dz[k] = dzk;
                }
                let frac = set.step_fraction;
                step = ((frac * ad).min(1.0), (frac * ap).min(1.0));
                if phase == 0 {
                    dxa = dx;
                    dza = dz;
                } else {
                    dirs = (dx, dz, dy, du);
                }
            }
            let (dx, dz, dy, du) = dirs;
            let (ax, az) = step;
            if ax.max(az) < 1e-10 {
                stalls += 1;
            } else if ax.min(az) < 1e-6 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            for (yi, di) in y.iter_mut().zip(&dy) {
                *yi += az * di;
            }
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += ax * di;
            }
            for &k in &self.active {
                xs[k] += &dx[k] * ax;
                zs[k] += &dz[k] * az;
                symmetrize(&mut xs[k]);
                symmetrize(&mut zs[k]);
            }
        }

        let (merit, y, xs, report) = best.expect("at least one iterate");
        let status = if merit < set.near_tol {
            IpmStatus::NearOptimal
        } else {
            IpmStatus::Failed
        };
        outcome(
            status,
            y,
            xs,
            iter,
            report,
            format!("stopped after {iter} iterations, merit {merit:.2e}"),
        )
    }
}

/// Minimum total shift `Σ s_k` (with `s_k ≥ 0`) making every LMI
/// `C_k + Σ y_i E_{k,i} + s_k I ⪰ 0` feasible under `B y = d`. A strictly
/// positive value proves the original problem infeasible.
pub(crate) fn phase_one(red: &Reduced, settings: IpmSettings) -> Option<f64> {
    let mut aux = red.clone();
    let mut comp_of = vec![0; red.n];
    for (ci, vars) in red.components.iter().enumerate() {
        for &v in vars {
            comp_of[v] = ci;
        }
    }
    let mut extra = Vec::new();
    for (k, lmi) in aux.lmis.iter_mut().enumerate() {
        let s = red.n + extra.len();
        let diag = (0..lmi.dim as u32).map(|i| (i, i, 1.0)).collect();
        let comp = lmi.terms.first().map(|t| comp_of[t.0]);
        lmi.terms.push((s, diag));
        extra.push((k, comp));
    }
    aux.n = red.n + extra.len();
    aux.objective = vec![0.0; aux.n];
    for (j, &(k, comp)) in extra.iter().enumerate() {
        let s = red.n + j;
        aux.objective[s] = -1.0;
        aux.lmis.push(Lmi {
            block: red.lmis[k].block,
            dim: 1,
            constant: Vec::new(),
            terms: vec![(s, vec![(0, 0, 1.0)])],
        });
        match comp {
            Some(c) => aux.components[c].push(s),
            None => aux.components.push(vec![s]),
        }
    }
    let out = Ipm::new(&aux, settings).run();
    match out.status {
        IpmStatus::Optimal | IpmStatus::NearOptimal => Some(-out.pobj),
        _ => None,
    }
}
