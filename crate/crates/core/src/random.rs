//! Seeded random states, unitaries and channels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::qlinalg::{CMat, CVec, DensityMatrix};

/// Entries drawn i.i.d. standard normal (complex unless `real`).
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, real: bool) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
        Complex64::new(re, im)
    })
}

/// Haar-random unit vector (uniform on the real sphere when `real`).
pub fn haar_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, real: bool) -> CVec {
    let g = ginibre(rng, dim, 1, real);
    let v = g.column(0).into_owned();
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Haar-random unitary (orthogonal when `real`) via QR with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize, real: bool) -> CMat {
    isometry(rng, dim, dim, real)
}

/// Random isometry `V: C^cols → C^rows` (`V†V = I`), `rows ≥ cols`.
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, real: bool) -> CMat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols, real);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Mixture of `components` Haar-random pure states with random weights.
pub fn random_state<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &[usize],
    components: usize,
    real: bool,
) -> DensityMatrix {
    let side: usize = dims.iter().product();
    let mut m = CMat::zeros(side, side);
    let weights: Vec<f64> = (0..components.max(1)).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let v = haar_vector(rng, side, real);
        m += &v * v.adjoint() * Complex64::new(w / total, 0.0);
    }
    m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::from_parts(dims.to_vec(), m)
}

/// Choi matrix `J = Σ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` (input first) of a random CPTP map
/// built from a random Stinespring isometry with `kraus` Kraus operators.
pub fn random_channel_choi<R: Rng + ?Sized>(
    rng: &mut R,
    d_in: usize,
    d_out: usize,
    kraus: usize,
    real: bool,
) -> CMat {
    let v = isometry(rng, d_out * kraus, d_in, real);
    // Kraus operator K_e[o, i] = V[(o, e), i]
    let mut j = CMat::zeros(d_in * d_out, d_in * d_out);
    for e in 0..kraus {
        for i in 0..d_in {
            for o in 0..d_out {
                let a = v[(o * kraus + e, i)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..d_in {
                    for o2 in 0..d_out {
                        j[(i * d_out + o, i2 * d_out + o2)] += a * v[(o2 * kraus + e, i2)].conj();
                    }
                }
            }
        }
    }
    j
}
