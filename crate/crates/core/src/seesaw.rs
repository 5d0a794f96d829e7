//! Explicit network-2 states and see-saw lower bounds.
//!
//! A triangle network has sources σ_A′B″, σ_B′C″, σ_C′A″ and local channels
//! Ω_A: A′A″ → A, Ω_B: B′B″ → B, Ω_C: C′C″ → C, correlated by a shared
//! classical branch λ:
//!
//! ```text
//! ρ_ABC = Σ_λ w_λ (Ω_A^λ ⊗ Ω_B^λ ⊗ Ω_C^λ)(σ_A′B″^λ ⊗ σ_B′C″^λ ⊗ σ_C′A″^λ)
//! ```
//!
//! Channels are stored as Choi matrices `J = Σ |i⟩⟨i'| ⊗ Ω(|i⟩⟨i'|)` with the
//! input factor first.

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use netwit_sdp::{Field, SdpProblem, Sense, SolverBackend};

use crate::error::{domain, NetwitError, Result};
use crate::qlinalg::{
    hermitian_eigenvalues, partial_trace_raw, permute_raw, top_eigenvector, CMat, CVec,
    DensityMatrix, HermitianOperator,
};
use crate::random::{haar_vector, random_channel_choi, random_state};

const OUT_DIM: usize = 2;
const CPTP_TOL: f64 = 1e-8;

/// Position of each hidden system of the source product (A′,B″,B′,C″,C′,A″)
/// in the party order (A′,A″,B′,B″,C′,C″).
const SOURCE_TO_PARTY: [usize; 6] = [0, 3, 2, 5, 4, 1];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// σ_A′B″, σ_B′C″, σ_C′A″.
    pub sources: [DensityMatrix; 3],
    /// Choi matrices of Ω_A, Ω_B, Ω_C.
    pub maps: [CMat; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    /// Local dimensions of A′, A″, B′, B″, C′, C″.
    pub hidden_dims: [usize; 6],
    pub branches: Vec<Branch>,
    pub weights: Vec<f64>,
}

impl NetworkModel {
    pub fn source_dims(&self, s: usize) -> [usize; 2] {
        let h = &self.hidden_dims;
        match s {
            0 => [h[0], h[3]],
            1 => [h[2], h[5]],
            _ => [h[4], h[1]],
        }
    }

    pub fn party_input_dim(&self, party: usize) -> usize {
        self.hidden_dims[2 * party] * self.hidden_dims[2 * party + 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() || self.branches.len() != self.weights.len() {
            return domain("one weight per branch required");
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return domain("weights must form a probability vector");
        }
        for (b, br) in self.branches.iter().enumerate() {
            for s in 0..3 {
                if br.sources[s].dims() != self.source_dims(s) {
                    return domain(format!(
                        "branch {b}: source {s} has dims {:?}, expected {:?}",
                        br.sources[s].dims(),
                        self.source_dims(s)
                    ));
                }
            }
            for party in 0..3 {
                check_choi(&br.maps[party], self.party_input_dim(party), OUT_DIM)
                    .map_err(|e| NetwitError::Domain(format!("branch {b}, party {party}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelJson::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ModelJson = serde_json::from_str(text)?;
        let m = j.into_model()?;
        m.validate()?;
        Ok(m)
    }
}

/// Checks complete positivity and trace preservation of a Choi matrix.
pub fn check_choi(j: &CMat, d_in: usize, d_out: usize) -> std::result::Result<(), String> {
    if j.nrows() != d_in * d_out || j.ncols() != d_in * d_out {
        return Err(format!("Choi matrix of side {} for {d_in} → {d_out}", j.nrows()));
    }
    let herm = (j - j.adjoint()).norm();
    if herm > CPTP_TOL {
        return Err(format!("Choi matrix not Hermitian ({herm:.2e})"));
    }
    let lmin = hermitian_eigenvalues(j)[0];
    if lmin < -CPTP_TOL {
        return Err(format!("not completely positive (λmin = {lmin:.2e})"));
    }
    let (m, _) = partial_trace_raw(j, &[d_in, d_out], &[0]);
    let defect = (m - CMat::identity(d_in, d_in)).norm();
    if defect > CPTP_TOL {
        return Err(format!("not trace preserving ({defect:.2e})"));
    }
    Ok(())
}

/// Choi matrix of the channel on two systems (dims `d0`, `d1`) that keeps
/// system `keep` and traces out the other; `keep`'s dimension must be 2.
pub fn choi_keep_one(d0: usize, d1: usize, keep: usize) -> CMat {
    let d_in = d0 * d1;
    let mut j = CMat::zeros(d_in * OUT_DIM, d_in * OUT_DIM);
    for a in 0..d0 {
        for b in 0..d1 {
            for a2 in 0..d0 {
                for b2 in 0..d1 {
                    let (o, o2, same) = if keep == 0 { (a, a2, b == b2) } else { (b, b2, a == a2) };
                    if same && o < OUT_DIM && o2 < OUT_DIM {
                        j[((a * d1 + b) * OUT_DIM + o, (a2 * d1 + b2) * OUT_DIM + o2)] = c(1.0);
                    }
                }
            }
        }
    }
    j
}

/// Choi matrix of the channel that discards its input and prepares `out`.
pub fn choi_prepare(d_in: usize, out: &CMat) -> CMat {
    CMat::identity(d_in, d_in).kronecker(out)
}

/// Applies the map with kernel `k` (`out[(a),(a')] = Σ k[(b,a),(b',a')] in[(b),(b')]`)
/// to subsystem `pos`.
fn apply_kernel_at(
    m: &CMat,
    dims: &[usize],
    pos: usize,
    k: &CMat,
    d_in: usize,
    d_out: usize,
) -> (CMat, Vec<usize>) {
    let n = dims.len();
    // move `pos` to the front
    let mut perm: Vec<usize> = (0..n).map(|i| if i < pos { i + 1 } else { i }).collect();
    perm[pos] = 0;
    let (front, fdims) = permute_raw(m, dims, &perm);
    let rest: usize = fdims[1..].iter().product();
    let mut out = CMat::zeros(d_out * rest, d_out * rest);
    for b in 0..d_in {
        for b2 in 0..d_in {
            for a in 0..d_out {
                for a2 in 0..d_out {
                    let kv = k[(b * d_out + a, b2 * d_out + a2)];
                    if kv == c(0.0) {
                        continue;
                    }
                    for r in 0..rest {
                        for r2 in 0..rest {
                            out[(a * rest + r, a2 * rest + r2)] += kv * front[(b * rest + r, b2 * rest + r2)];
                        }
                    }
                }
            }
        }
    }
    let mut odims = fdims.clone();
    odims[0] = d_out;
    // move back
    let mut inv = vec![0; n];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    permute_raw(&out, &odims, &inv)
}

/// Kernel of the adjoint map: `Ω†(Y)[i',i] = Σ J[(i,o),(i',o')] Y[o',o]`.
fn adjoint_kernel(j: &CMat, d_in: usize, d_out: usize) -> CMat {
    let side = d_in * d_out;
    let mut k = CMat::zeros(side, side);
    for i in 0..d_in {
        for o in 0..d_out {
            for i2 in 0..d_in {
                for o2 in 0..d_out {
                    // input (b, b') = (o', o), output (a, a') = (i', i)
                    k[(o2 * d_in + i2, o * d_in + i)] = j[(i * d_out + o, i2 * d_out + o2)];
                }
            }
        }
    }
    k
}

fn source_product(br: &Branch) -> CMat {
    br.sources[0]
        .entries()
        .kronecker(br.sources[1].entries())
        .kronecker(br.sources[2].entries())
}

fn product_dims(m: &NetworkModel) -> Vec<usize> {
    (0..3).flat_map(|s| m.source_dims(s)).collect()
}

/// Hidden state of one branch with systems regrouped per party.
fn hidden_by_party(m: &NetworkModel, br: &Branch) -> CMat {
    permute_raw(&source_product(br), &product_dims(m), &SOURCE_TO_PARTY).0
}

fn party_dims(m: &NetworkModel) -> Vec<usize> {
    (0..3).map(|p| m.party_input_dim(p)).collect()
}

fn apply_channels(m: &NetworkModel, br: &Branch, hidden: &CMat, skip: Option<usize>) -> (CMat, Vec<usize>) {
    let mut state = hidden.clone();
    let mut dims = party_dims(m);
    for party in 0..3 {
        if Some(party) == skip {
            continue;
        }
        let (s, d) = apply_kernel_at(&state, &dims, party, &br.maps[party], dims[party], OUT_DIM);
        state = s;
        dims = d;
    }
    (state, dims)
}

fn branch_state(m: &NetworkModel, br: &Branch) -> CMat {
    let hidden = hidden_by_party(m, br);
    apply_channels(m, br, &hidden, None).0
}

/// Output state of the network.
pub fn assemble_state(m: &NetworkModel) -> Result<DensityMatrix> {
    m.validate()?;
    Ok(assemble_unchecked(m))
}

fn assemble_unchecked(m: &NetworkModel) -> DensityMatrix {
    let mut rho = CMat::zeros(8, 8);
    for (br, &w) in m.branches.iter().zip(&m.weights) {
        if w > 0.0 {
            rho += branch_state(m, br) * c(w);
        }
    }
    let rho = (&rho + rho.adjoint()) * c(0.5);
    DensityMatrix::from_parts(vec![2, 2, 2], rho)
}

fn fidelity_of(rho: &CMat, t: &CVec) -> f64 {
    (t.adjoint() * rho * t)[(0, 0)].re
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub hidden_dim: usize,
    pub branches: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub improvement_tol: f64,
    pub seed: u64,
    /// Worker threads for independent restarts.
    pub jobs: usize,
    /// Restrict random sources and channels to real matrices.
    pub real: bool,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 2,
            branches: 4,
            restarts: 20,
            max_iters: 200,
            improvement_tol: 1e-9,
            seed: 0,
            jobs: 1,
            real: false,
        }
    }
}

impl SeesawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0
            || self.branches == 0
            || self.restarts == 0
            || self.max_iters == 0
            || !(self.improvement_tol > 0.0)
        {
            return domain("see-saw configuration values must be positive");
        }
        Ok(())
    }
}

fn pure_state(dims: Vec<usize>, v: &CVec) -> DensityMatrix {
    DensityMatrix::from_parts(dims, v * v.adjoint())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random branch with Haar-random pure sources and Stinespring-random channels.
fn random_branch<R: Rng + ?Sized>(rng: &mut R, hd: [usize; 6], mixed: bool, real: bool) -> Branch {
    let skel = NetworkModel {
        hidden_dims: hd,
        branches: Vec::new(),
        weights: Vec::new(),
    };
    let sources = std::array::from_fn(|s| {
        let dims = skel.source_dims(s).to_vec();
        let side = dims[0] * dims[1];
        if mixed {
            let rank = rng.random_range(1..=side);
            random_state(rng, &dims, rank, real)
        } else {
            pure_state(dims, &haar_vector(rng, side, real))
        }
    });
    let maps = std::array::from_fn(|p| {
        let d_in = skel.party_input_dim(p);
        let kraus = if mixed {
            rng.random_range(d_in.div_ceil(OUT_DIM)..=d_in * OUT_DIM)
        } else {
            d_in * OUT_DIM
        };
        random_channel_choi(rng, d_in, OUT_DIM, kraus, real)
    });
    Branch { sources, maps }
}

/// Operator `X` on the hidden systems (source-product order) with
/// `⟨t|ρ_branch|t⟩ = tr(X σ)`.
fn hidden_effective(m: &NetworkModel, br: &Branch, t: &CVec) -> CMat {
    let mut x = t * t.adjoint();
    let mut dims = vec![OUT_DIM; 3];
    let pd = party_dims(m);
    for party in 0..3 {
        let k = adjoint_kernel(&br.maps[party], pd[party], OUT_DIM);
        let (nx, nd) = apply_kernel_at(&x, &dims, party, &k, OUT_DIM, pd[party]);
        x = nx;
        dims = nd;
    }
    // party order (A′A″, B′B″, C′C″) -> source order
    let hd = &m.hidden_dims;
    let mut inv = [0; 6];
    for (i, &p) in SOURCE_TO_PARTY.iter().enumerate() {
        inv[p] = i;
    }
    permute_raw(&x, hd, &inv).0
}

fn update_source(m: &NetworkModel, br: &mut Branch, s: usize, t: &CVec) {
    let x = hidden_effective(m, br, t);
    let sdims: Vec<usize> = (0..3).map(|k| br.sources[k].side()).collect();
    let mut weight = CMat::identity(1, 1);
    for k in 0..3 {
        let f = if k == s {
            CMat::identity(sdims[k], sdims[k])
        } else {
            br.sources[k].entries().clone()
        };
        weight = weight.kronecker(&f);
    }
    let (eff, _) = partial_trace_raw(&(x * weight), &sdims, &[s]);
    let eff = (&eff + eff.adjoint()) * c(0.5);
    let (_, v) = top_eigenvector(&eff);
    br.sources[s] = pure_state(m.source_dims(s).to_vec(), &v);
}

/// `Q` with `⟨t|ρ_branch|t⟩ = Re tr(J_party Q)`.
fn channel_effective(m: &NetworkModel, br: &Branch, party: usize, t: &CVec) -> CMat {
    let hidden = hidden_by_party(m, br);
    let (omega, dims) = apply_channels(m, br, &hidden, Some(party));
    let d_in = dims[party];
    // bring `party` to the front of both ω and |t⟩⟨t|
    let mut perm: Vec<usize> = (0..3).map(|i| if i < party { i + 1 } else { i }).collect();
    perm[party] = 0;
    let (w, _) = permute_raw(&omega, &dims, &perm);
    let (tt, _) = permute_raw(&(t * t.adjoint()), &[OUT_DIM; 3], &perm);
    let rest = OUT_DIM * OUT_DIM;
    let mut q = CMat::zeros(d_in * OUT_DIM, d_in * OUT_DIM);
    for i in 0..d_in {
        for i2 in 0..d_in {
            for o in 0..OUT_DIM {
                for o2 in 0..OUT_DIM {
                    let mut acc = c(0.0);
                    for r in 0..rest {
                        for r2 in 0..rest {
                            acc += w[(i * rest + r, i2 * rest + r2)] * tt[(o2 * rest + r2, o * rest + r)];
                        }
                    }
                    q[(i2 * OUT_DIM + o2, i * OUT_DIM + o)] = acc;
                }
            }
        }
    }
    (&q + q.adjoint()) * c(0.5)
}

/// Projects an approximate Choi matrix onto CPTP maps: clip negative
/// eigenvalues, then rescale the input so that `tr_out J = I` exactly.
fn repair_choi(j: &CMat, d_in: usize, d_out: usize) -> Option<CMat> {
    let j = (j + j.adjoint()) * c(0.5);
    let eig = j.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| c(l.max(0.0)));
    let j = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let (m, _) = partial_trace_raw(&j, &[d_in, d_out], &[0]);
    let me = m.symmetric_eigen();
    if me.eigenvalues.iter().any(|&l| l <= 1e-12) {
        return None;
    }
    let inv_sqrt = &me.eigenvectors
        * DMatrix::from_diagonal(&me.eigenvalues.map(|l| c(1.0 / l.sqrt())))
        * me.eigenvectors.adjoint();
    let s = inv_sqrt.kronecker(&CMat::identity(d_out, d_out));
    let j = &s * j * &s;
    Some((&j + j.adjoint()) * c(0.5))
}

/// Solves `max Re tr(J Q)` over Choi matrices of CPTP maps `d_in → d_out`.
pub fn optimize_channel(
    q: &CMat,
    d_in: usize,
    d_out: usize,
    backend: &dyn SolverBackend,
) -> Result<CMat> {
    let mut p = SdpProblem::new();
    let field = if q.iter().all(|z| z.im.abs() <= 1e-14) {
        Field::Real
    } else {
        Field::Complex
    };
    let j = p.add_block("choi", d_in * d_out, field);
    for i in 0..d_in {
        for i2 in i..d_in {
            let mut f = netwit_sdp::ComplexForm::zero();
            for o in 0..d_out {
                f.add_assign(&p.entry(j, i * d_out + o, i2 * d_out + o));
            }
            let rhs = if i == i2 { c(1.0) } else { c(0.0) };
            p.add_complex_constraint(&f, rhs, &format!("tp[{i},{i2}]"));
        }
    }
    p.set_objective(p.inner_with(j, q), Sense::Maximize);
    let sol = backend.solve(&p)?;
    if !sol.status.is_solved() {
        return Err(NetwitError::Solver(format!(
            "channel update returned {:?}: {}",
            sol.status, sol.message
        )));
    }
    repair_choi(sol.block(j), d_in, d_out)
        .ok_or_else(|| NetwitError::Solver("channel update produced a singular map".into()))
}

fn branch_fidelity(m: &NetworkModel, br: &Branch, t: &CVec) -> f64 {
    fidelity_of(&branch_state(m, br), t)
}

/// Result of optimizing one branch: final value and the objective after
/// every sweep (starting with the initial value).
#[derive(Clone, Debug)]
pub struct BranchRun {
    pub branch: Branch,
    pub fidelity: f64,
    pub history: Vec<f64>,
}

/// Alternating maximization of `⟨t|ρ|t⟩` over the sources and channels of a
/// single branch. Every sub-step is solved to optimality and only accepted
/// when it does not lower the objective, so `history` is non-decreasing.
pub fn optimize_branch(
    hidden_dims: [usize; 6],
    init: Branch,
    t: &CVec,
    cfg: &SeesawConfig,
    backend: &dyn SolverBackend,
) -> Result<BranchRun> {
    let skel = NetworkModel {
        hidden_dims,
        branches: Vec::new(),
        weights: Vec::new(),
    };
    let mut br = init;
    let mut f = branch_fidelity(&skel, &br, t);
    let mut history = vec![f];
    for _ in 0..cfg.max_iters {
        let start = f;
        for s in 0..3 {
            let mut cand = br.clone();
            update_source(&skel, &mut cand, s, t);
            let fc = branch_fidelity(&skel, &cand, t);
            if fc >= f {
                br = cand;
                f = fc;
            }
        }
        for party in 0..3 {
            let q = channel_effective(&skel, &br, party, t);
            let j = optimize_channel(&q, skel.party_input_dim(party), OUT_DIM, backend)?;
            let mut cand = br.clone();
            cand.maps[party] = j;
            let fc = branch_fidelity(&skel, &cand, t);
            if fc >= f {
                br = cand;
                f = fc;
            }
        }
        history.push(f);
        if f - start < cfg.improvement_tol {
            break;
        }
    }
    Ok(BranchRun {
        branch: br,
        fidelity: f,
        history,
    })
}

fn run_restart(
    t: &CVec,
    cfg: &SeesawConfig,
    backend: &dyn SolverBackend,
    restart: usize,
) -> Result<(NetworkModel, f64)> {
    let hd = [cfg.hidden_dim; 6];
    let mut rng = rng_for(cfg.seed, restart as u64);
    let mut runs = Vec::with_capacity(cfg.branches);
    for _ in 0..cfg.branches {
        let init = random_branch(&mut rng, hd, false, cfg.real);
        runs.push(optimize_branch(hd, init, t, cfg, backend)?);
    }
    // the objective is linear in the weights: all mass goes to the best branch
    let best = (0..runs.len())
        .max_by(|&a, &b| runs[a].fidelity.total_cmp(&runs[b].fidelity))
        .expect("at least one branch");
    let weights = (0..runs.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect();
    let model = NetworkModel {
        hidden_dims: hd,
        branches: runs.into_iter().map(|r| r.branch).collect(),
        weights,
    };
    let f = fidelity_of(assemble_unchecked(&model).entries(), t);
    Ok((model, f))
}

/// Best network-2 model found for `target` over `cfg.restarts` restarts.
pub fn seesaw_maximize<B: SolverBackend + Sync>(
    target: &CVec,
    cfg: &SeesawConfig,
    backend: &B,
) -> Result<(NetworkModel, f64)> {
    cfg.validate()?;
    if target.len() != 8 || (target.norm() - 1.0).abs() > 1e-9 {
        return domain("target must be a unit vector of length 8");
    }
    let results: Vec<Result<(NetworkModel, f64)>> = if cfg.jobs <= 1 {
        (0..cfg.restarts)
            .map(|r| run_restart(target, cfg, backend, r))
            .collect()
    } else {
        let mut out: Vec<Option<Result<(NetworkModel, f64)>>> = (0..cfg.restarts).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<usize>> = (0..cfg.jobs)
                .map(|j| (j..cfg.restarts).step_by(cfg.jobs).collect())
                .collect();
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|idx| {
                    scope.spawn(move || {
                        idx.into_iter()
                            .map(|r| (r, run_restart(target, cfg, backend, r)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (r, res) in h.join().expect("see-saw worker panicked") {
                    out[r] = Some(res);
                }
            }
        });
        out.into_iter().map(|r| r.expect("every restart ran")).collect()
    };
    let mut best: Option<(NetworkModel, f64)> = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok((m, f)) => {
                debug!("see-saw restart {r}: fidelity {f:.9}");
                if best.as_ref().is_none_or(|b| f > b.1) {
                    best = Some((m, f));
                }
            }
            Err(e) => warn!("see-saw restart {r} skipped: {e}"),
        }
    }
    best.ok_or_else(|| NetwitError::Solver("every see-saw restart failed".into()))
}

/// Random network model with mixed sources, channels of random Kraus rank
/// and random branch weights.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, cfg: &SeesawConfig) -> NetworkModel {
    let hd = [cfg.hidden_dim; 6];
    let branches: Vec<Branch> = (0..cfg.branches)
        .map(|_| random_branch(rng, hd, true, cfg.real))
        .collect();
    let raw: Vec<f64> = (0..cfg.branches).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    NetworkModel {
        hidden_dims: hd,
        branches,
        weights: raw.iter().map(|w| w / total).collect(),
    }
}

/// `n` network-2 states from random models; deterministic in `seed`.
pub fn generate_sound_states(n: usize, cfg: &SeesawConfig, seed: u64) -> Vec<DensityMatrix> {
    let mut rng = rng_for(seed, 0x5eed);
    (0..n)
        .map(|_| assemble_unchecked(&random_model(&mut rng, cfg)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dims: Vec<usize>,
    entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    fn new(dims: Vec<usize>, m: &CMat) -> Self {
        let side = m.nrows();
        let entries = (0..side * side)
            .map(|k| {
                let z = m[(k / side, k % side)];
                [z.re, z.im]
            })
            .collect();
        Self { dims, entries }
    }

    fn matrix(&self) -> Result<CMat> {
        let side: usize = self.dims.iter().product();
        if self.entries.len() != side * side {
            return domain(format!("{} entries for dims {:?}", self.entries.len(), self.dims));
        }
        Ok(CMat::from_fn(side, side, |r, col| {
            let [re, im] = self.entries[r * side + col];
            Complex64::new(re, im)
        }))
    }
}

#[derive(Serialize, Deserialize)]
struct BranchJson {
    sources: Vec<MatrixJson>,
    /// Choi matrices with dims `[d_in, d_out]`.
    maps: Vec<MatrixJson>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    hidden_dims: [usize; 6],
    weights: Vec<f64>,
    branches: Vec<BranchJson>,
}

impl From<&NetworkModel> for ModelJson {
    fn from(m: &NetworkModel) -> Self {
        let branches = m
            .branches
            .iter()
            .map(|b| BranchJson {
                sources: b
                    .sources
                    .iter()
                    .map(|s| MatrixJson::new(s.dims().to_vec(), s.entries()))
                    .collect(),
                maps: (0..3)
                    .map(|p| MatrixJson::new(vec![m.party_input_dim(p), OUT_DIM], &b.maps[p]))
                    .collect(),
            })
            .collect();
        Self {
            hidden_dims: m.hidden_dims,
            weights: m.weights.clone(),
            branches,
        }
    }
}

impl ModelJson {
    fn into_model(self) -> Result<NetworkModel> {
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            if b.sources.len() != 3 || b.maps.len() != 3 {
                return domain("each branch needs 3 sources and 3 maps");
            }
            let mut sources = Vec::with_capacity(3);
            for s in &b.sources {
                sources.push(DensityMatrix::new(s.dims.clone(), s.matrix()?)?);
            }
            let mut maps = Vec::with_capacity(3);
            for j in &b.maps {
                maps.push(j.matrix()?);
            }
            branches.push(Branch {
                sources: sources.try_into().expect("three sources"),
                maps: maps.try_into().expect("three maps"),
            });
        }
        Ok(NetworkModel {
            hidden_dims: self.hidden_dims,
            branches,
            weights: self.weights,
        })
    }
}

/// Output state of a model as a Hermitian operator, for callers that need
/// it without the state checks.
pub fn assemble_operator(m: &NetworkModel) -> HermitianOperator {
    assemble_unchecked(m).as_operator()
}
