use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netwit::qlinalg::{CMat, CVec, DensityMatrix};
use netwit::seesaw::{
    assemble_state, check_choi, choi_keep_one, choi_prepare, generate_sound_states, optimize_branch, random_model,
    seesaw_maximize, Branch, NetworkModel, SeesawConfig,
};
use netwit::states::{basis_vector, ghz_vector, w_vector, ProductMeasurement};
use netwit::witness::{entropic_witness_best, fidelity_witness};
use netwit_sdp::InteriorPoint;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn pure2(v: [f64; 4]) -> DensityMatrix {
    DensityMatrix::pure(vec![2, 2], &CVec::from_iterator(4, v.iter().map(|&x| c(x)))).unwrap()
}

fn zero_zero() -> DensityMatrix {
    pure2([1.0, 0.0, 0.0, 0.0])
}

fn ket0() -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(0, 0)] = c(1.0);
    m
}

fn single(branch: Branch) -> NetworkModel {
    NetworkModel {
        hidden_dims: [2; 6],
        branches: vec![branch],
        weights: vec![1.0],
    }
}

/// Kraus operators `K[o, i] = √λ v[(i, o)]` from an input-first Choi matrix.
fn kraus(j: &CMat, d_in: usize, d_out: usize) -> Vec<CMat> {
    let e = j.clone().symmetric_eigen();
    let mut out = Vec::new();
    for (k, &l) in e.eigenvalues.iter().enumerate() {
        if l <= 1e-14 {
            continue;
        }
        let v = e.eigenvectors.column(k);
        out.push(CMat::from_fn(d_out, d_in, |o, i| v[i * d_out + o] * c(l.sqrt())));
    }
    out
}

/// Network output computed independently: hidden state assembled index by
/// index in party order, then the product of Kraus operators applied.
fn oracle(m: &NetworkModel) -> CMat {
    let mut rho = CMat::zeros(8, 8);
    for (br, &w) in m.branches.iter().zip(&m.weights) {
        let (s0, s1, s2) = (br.sources[0].entries(), br.sources[1].entries(), br.sources[2].entries());
        // hidden index (a', a'', b', b'', c', c'') with parties grouped as (a'a''), (b'b''), (c'c'')
        let h = CMat::from_fn(64, 64, |r, col| {
            let d = |x: usize| [x >> 5 & 1, x >> 4 & 1, x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1];
            let (x, y) = (d(r), d(col));
            s0[(x[0] * 2 + x[3], y[0] * 2 + y[3])] * s1[(x[2] * 2 + x[5], y[2] * 2 + y[5])] * s2[(x[4] * 2 + x[1], y[4] * 2 + y[1])]
        });
        let ka = kraus(&br.maps[0], 4, 2);
        let kb = kraus(&br.maps[1], 4, 2);
        let kc = kraus(&br.maps[2], 4, 2);
        for a in &ka {
            for b in &kb {
                for cc in &kc {
                    let k = a.kronecker(b).kronecker(cc);
                    rho += (&k * &h * k.adjoint()) * c(w);
                }
            }
        }
    }
    rho
}

#[test]
fn single_source_passes_through() {
    let phi = pure2([0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()]);
    let m = single(Branch {
        sources: [phi.clone(), zero_zero(), zero_zero()],
        maps: [choi_keep_one(2, 2, 0), choi_keep_one(2, 2, 1), choi_keep_one(2, 2, 0)],
    });
    let rho = assemble_state(&m).unwrap();
    let expect = phi.tensor(&DensityMatrix::pure(vec![2], &basis_vector(&[2], &[0])).unwrap());
    assert!((rho.entries() - expect.entries()).norm() < 1e-14);
    assert!((rho.entries() - oracle(&m)).norm() < 1e-12);
}

#[test]
fn w_construction_reaches_two_thirds() {
    let r = 0.5f64.sqrt();
    let psi = pure2([0.0, r, r, 0.0]);
    let keep_first = choi_keep_one(2, 2, 0);
    let keep_second = choi_keep_one(2, 2, 1);
    let prep = choi_prepare(4, &ket0());
    let branches = vec![
        Branch {
            sources: [psi.clone(), zero_zero(), zero_zero()],
            maps: [keep_first.clone(), keep_second.clone(), prep.clone()],
        },
        Branch {
            sources: [zero_zero(), psi.clone(), zero_zero()],
            maps: [prep.clone(), keep_first.clone(), keep_second.clone()],
        },
        Branch {
            sources: [zero_zero(), zero_zero(), psi],
            maps: [keep_second, prep, keep_first],
        },
    ];
    let m = NetworkModel {
        hidden_dims: [2; 6],
        branches,
        weights: vec![1.0 / 3.0; 3],
    };
    let rho = assemble_state(&m).unwrap();
    assert_abs_diff_eq!(rho.fidelity_with_pure(&w_vector()).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    assert!((rho.entries() - oracle(&m)).norm() < 1e-12);
}

#[test]
fn product_model_gives_unflagged_product_state() {
    let m = single(Branch {
        sources: [zero_zero(), zero_zero(), zero_zero()],
        maps: [choi_prepare(4, &ket0()), choi_keep_one(2, 2, 0), choi_keep_one(2, 2, 1)],
    });
    let rho = assemble_state(&m).unwrap();
    let zero = DensityMatrix::pure(vec![2, 2, 2], &basis_vector(&[2, 2, 2], &[0, 0, 0])).unwrap();
    assert!((rho.entries() - zero.entries()).norm() < 1e-14);
    assert!(!entropic_witness_best(&rho, &ProductMeasurement::computational(&[2, 2, 2])).unwrap().violated);
}

#[test]
fn random_models_match_the_kraus_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for real in [false, true] {
        let cfg = SeesawConfig {
            real,
            ..SeesawConfig::default()
        };
        for _ in 0..5 {
            let m = random_model(&mut rng, &cfg);
            m.validate().unwrap();
            for br in &m.branches {
                for j in &br.maps {
                    check_choi(j, 4, 2).unwrap();
                }
            }
            let rho = assemble_state(&m).unwrap();
            assert!((rho.entries() - oracle(&m)).norm() < 1e-12);
            assert_eq!(rho.is_real(), real);
        }
    }
}

#[test]
fn invalid_models_are_rejected() {
    let mut m = single(Branch {
        sources: [zero_zero(), zero_zero(), zero_zero()],
        maps: [choi_keep_one(2, 2, 0), choi_keep_one(2, 2, 0), choi_keep_one(2, 2, 0)],
    });
    m.branches[0].maps[1] = m.branches[0].maps[1].clone() * c(1.01);
    assert!(assemble_state(&m).is_err());
    let mut m2 = m.clone();
    m2.branches[0].maps[1] = choi_keep_one(2, 2, 0);
    m2.weights = vec![0.5];
    assert!(assemble_state(&m2).is_err());
    assert!(SeesawConfig {
        restarts: 0,
        ..SeesawConfig::default()
    }
    .validate()
    .is_err());
}

#[test]
fn model_json_round_trip_is_exact() {
    let m = random_model(&mut ChaCha8Rng::seed_from_u64(3), &SeesawConfig::default());
    let text = m.to_json();
    let back = NetworkModel::from_json(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_json(), text);
}

#[test]
fn generated_states_are_deterministic() {
    let cfg = SeesawConfig::default();
    let a = generate_sound_states(4, &cfg, 99);
    let b = generate_sound_states(4, &cfg, 99);
    let c2 = generate_sound_states(4, &cfg, 100);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_json(), y.to_json());
    }
    assert_ne!(a[0].to_json(), c2[0].to_json());
}

#[test]
fn generated_states_pass_the_analytic_witnesses() {
    for real in [false, true] {
        let cfg = SeesawConfig {
            real,
            ..SeesawConfig::default()
        };
        for rho in generate_sound_states(100, &cfg, 5) {
            let meas = ProductMeasurement::computational(&[2, 2, 2]);
            assert!(!entropic_witness_best(&rho, &meas).unwrap().violated);
            assert!(!fidelity_witness(&rho, 2, 3).unwrap().violated);
            assert!(rho.fidelity_with_pure(&ghz_vector(2, 3)).unwrap() <= 0.68301 + 1e-5);
        }
    }
}

#[test]
fn product_target_is_reached_exactly() {
    let t = basis_vector(&[2, 2, 2], &[0, 0, 0]);
    let cfg = SeesawConfig {
        restarts: 2,
        ..SeesawConfig::default()
    };
    let (m, f) = seesaw_maximize(&t, &cfg, &InteriorPoint::default()).unwrap();
    assert!((f - 1.0).abs() < 1e-7, "{f}");
    let again = assemble_state(&m).unwrap().fidelity_with_pure(&t).unwrap();
    assert!((again - f).abs() < 1e-7);
}

#[test]
fn branch_iterations_are_monotone() {
    let t = ghz_vector(2, 3);
    let cfg = SeesawConfig::default();
    let ipm = InteriorPoint::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let init = random_model(&mut rng, &SeesawConfig { branches: 1, ..cfg.clone() }).branches.remove(0);
        let run = optimize_branch([2; 6], init, &t, &cfg, &ipm).unwrap();
        assert!(run.history.len() >= 2);
        for w in run.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{w:?}");
        }
        let m = single(run.branch.clone());
        let f = assemble_state(&m).unwrap().fidelity_with_pure(&t).unwrap();
        assert!((f - run.fidelity).abs() < 1e-7);
        assert!(run.fidelity <= 0.68301 + 1e-5);
    }
}

#[test]
fn restarts_do_not_depend_on_thread_count() {
    let t = w_vector();
    let ipm = InteriorPoint::default();
    let base = SeesawConfig {
        restarts: 3,
        max_iters: 20,
        ..SeesawConfig::default()
    };
    let (m1, f1) = seesaw_maximize(&t, &base, &ipm).unwrap();
    let (m2, f2) = seesaw_maximize(&t, &SeesawConfig { jobs: 2, ..base }, &ipm).unwrap();
    assert_eq!(f1, f2);
    assert_eq!(m1.to_json(), m2.to_json());
    let reported = assemble_state(&m1).unwrap().fidelity_with_pure(&t).unwrap();
    assert!((reported - f1).abs() < 1e-7);
}
