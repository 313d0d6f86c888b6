mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmvn::exec::Execution;
use tmvn::fourier::Backend;
use tmvn::expcov::{compute_phi_expcov, compute_phi_expcov_lowrank_h, ExpcovOptions, ExpcovSpec};
use tmvn::lowrank::{Factor, IndexedFactor, LowRankH, Term};
use tmvn::oracle::{build_dense_matrix, quad_reference};
use tmvn::spec::{HModel, Problem};
use tmvn::tree::ZLocations;
use tmvn::tridiag::{compute_phi_tridiag, compute_phi_tridiag_lowrank_h, TridiagOptions, TridiagSpec};

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.random_range(-2.0..1.5);
        let hi = rng.random_range(lo + 0.25..=2.0);
        a.push(lo);
        b.push(hi);
    }
    (a, b)
}

fn quad(problem: &Problem, a: &[f64], b: &[f64], h: &HModel) -> f64 {
    let m = build_dense_matrix(problem).unwrap();
    let est = quad_reference(&m, a, b, h, 20, Execution::Parallel).unwrap();
    assert!(est.error_bound < 1e-10 * est.value.abs(), "oracle not converged: {est:?}");
    est.value
}

fn tridiag_phi(spec: &TridiagSpec, m: usize) -> f64 {
    compute_phi_tridiag(spec, &TridiagOptions::new(m)).unwrap().phi.value()
}

fn fast(m: usize) -> ExpcovOptions {
    ExpcovOptions::new(m).with_backend(Backend::Fast)
}

fn expcov_phi(spec: &ExpcovSpec, m: usize) -> f64 {
    compute_phi_expcov(spec, &fast(m)).unwrap().phi.value()
}

#[test]
fn tridiagonal_matches_tensor_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in [2, 4] {
        for _ in 0..10 {
            let (a, b) = random_box(&mut rng, n);
            let spec = TridiagSpec::new(n, 4.0, 2.0, a.clone(), b.clone()).unwrap();
            let want = quad(&Problem::Tridiagonal(spec.clone()), &a, &b, &HModel::Constant(1.0));
            let got = tridiag_phi(&spec, 128);
            assert!(common::rel_f(got, want) < 1e-8, "n={n} box {a:?} {b:?}: {got} vs {want}");
        }
    }
}

#[test]
fn tridiagonal_other_coefficients() {
    let (a, b) = (vec![-1.0, -0.5, -2.0, 0.0], vec![0.5, 2.0, 1.0, 1.5]);
    for (d, o) in [(3.0, 1.0), (2.5, 1.25), (6.0, 0.5)] {
        let spec = TridiagSpec::new(4, d, o, a.clone(), b.clone()).unwrap();
        let want = quad(&Problem::Tridiagonal(spec.clone()), &a, &b, &HModel::Constant(1.0));
        let got = tridiag_phi(&spec, 128);
        assert!(common::rel_f(got, want) < 1e-8, "d={d} o={o}: {got} vs {want}");
    }
}

#[test]
fn exponential_matches_tensor_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in [2, 4] {
        for trial in 0..5 {
            let (a, b) = random_box(&mut rng, n);
            let z = ZLocations::seeded_uniform(n, 100 + trial, 1.0, 1.0).unwrap();
            let spec = ExpcovSpec::new(z, a.clone(), b.clone()).unwrap();
            let want = quad(&Problem::Expcov(spec.clone()), &a, &b, &HModel::Constant(1.0));
            let got = expcov_phi(&spec, 64);
            assert!(common::rel_f(got, want) < 1e-8, "n={n} trial {trial}: {got} vs {want}");
        }
    }
}

fn poly_h(n: usize) -> LowRankH {
    let terms = vec![
        Term { weight: 1.0, factors: vec![IndexedFactor { var: 1, factor: Factor::Polynomial { coeffs: vec![0.5, 1.0, 0.25], gauss: 0.0 } }] },
        Term {
            weight: -0.3,
            factors: vec![
                IndexedFactor { var: 1, factor: Factor::Polynomial { coeffs: vec![0.0, 1.0], gauss: 0.0 } },
                IndexedFactor { var: n, factor: Factor::Polynomial { coeffs: vec![1.0, 0.0, 1.0], gauss: 0.5 } },
            ],
        },
    ];
    LowRankH::new(n, terms).unwrap()
}

#[test]
fn polynomial_h_matches_quadrature() {
    for n in [2, 4] {
        let a = vec![-1.0; n];
        let mut b = vec![1.0; n];
        b[n - 1] = 0.5;
        let h = poly_h(n);
        let tri = TridiagSpec::new(n, 4.0, 2.0, a.clone(), b.clone()).unwrap();
        let want = quad(&Problem::Tridiagonal(tri.clone()), &a, &b, &HModel::LowRank(h.clone()));
        let got = compute_phi_tridiag_lowrank_h(&tri, &h, &TridiagOptions::new(128)).unwrap().phi.value();
        assert!(common::rel_f(got, want) < 1e-8, "tridiagonal n={n}: {got} vs {want}");

        let exp = ExpcovSpec::new(ZLocations::evenly_spaced(n, 1.0, 1.0).unwrap(), a.clone(), b.clone()).unwrap();
        let want = quad(&Problem::Expcov(exp.clone()), &a, &b, &HModel::LowRank(h.clone()));
        let got = compute_phi_expcov_lowrank_h(&exp, &h, &fast(64)).unwrap().phi.value();
        assert!(common::rel_f(got, want) < 1e-8, "exponential n={n}: {got} vs {want}");
    }
}

#[test]
fn indicator_h_equals_shrunk_box() {
    let n = 4;
    let (a, b) = (vec![-1.0; n], vec![1.0; n]);
    let h = LowRankH::new(
        n,
        vec![Term {
            weight: 1.0,
            factors: vec![
                IndexedFactor { var: 2, factor: Factor::Indicator { lo: -0.25, hi: 0.5 } },
                IndexedFactor { var: 3, factor: Factor::Indicator { lo: -2.0, hi: 0.0 } },
            ],
        }],
    )
    .unwrap();
    let mut sa = a.clone();
    let mut sb = b.clone();
    sa[1] = -0.25;
    sb[1] = 0.5;
    sb[2] = 0.0;

    let tri = TridiagSpec::new(n, 4.0, 2.0, a.clone(), b.clone()).unwrap();
    let via_h = compute_phi_tridiag_lowrank_h(&tri, &h, &TridiagOptions::new(128)).unwrap().phi.value();
    let shrunk = tridiag_phi(&TridiagSpec::new(n, 4.0, 2.0, sa.clone(), sb.clone()).unwrap(), 128);
    assert!(common::rel_f(via_h, shrunk) < 1e-10, "tridiagonal: {via_h} vs {shrunk}");

    let z = ZLocations::evenly_spaced(n, 1.0, 1.0).unwrap();
    let exp = ExpcovSpec::new(z.clone(), a, b).unwrap();
    let via_h = compute_phi_expcov_lowrank_h(&exp, &h, &fast(64)).unwrap().phi.value();
    let shrunk = expcov_phi(&ExpcovSpec::new(z, sa, sb).unwrap(), 64);
    assert!(common::rel_f(via_h, shrunk) < 1e-10, "exponential: {via_h} vs {shrunk}");
}

#[test]
fn phi_is_positive_and_monotone_in_upper_bound() {
    let n = 8;
    let mut prev_t = 0.0;
    let mut prev_e = 0.0;
    let z = ZLocations::seeded_uniform(n, 5, 1.0, 1.0).unwrap();
    for step in 0..5 {
        let mut b = vec![1.0; n];
        b[3] = -0.5 + 0.5 * step as f64;
        let a = vec![-1.0; n];
        let t = tridiag_phi(&TridiagSpec::new(n, 4.0, 2.0, a.clone(), b.clone()).unwrap(), 64);
        let e = expcov_phi(&ExpcovSpec::new(z.clone(), a, b).unwrap(), 32);
        assert!(t > prev_t && e > prev_e, "step {step}: {t} {e}");
        prev_t = t;
        prev_e = e;
    }
}

#[test]
fn rescaling_z_and_beta_together_is_exact() {
    let n = 8;
    let base = ZLocations::seeded_uniform(n, 9, 1.0, 0.5).unwrap();
    let scaled = ZLocations::new(base.z.iter().map(|v| v * 4.0).collect(), 2.0, 4.0).unwrap();
    let (a, b) = (vec![-1.0; n], vec![1.0; n]);
    let p1 = compute_phi_expcov(&ExpcovSpec::new(base, a.clone(), b.clone()).unwrap(), &fast(32)).unwrap();
    let p2 = compute_phi_expcov(&ExpcovSpec::new(scaled, a, b).unwrap(), &fast(32)).unwrap();
    assert_eq!(p1.phi, p2.phi);
}

#[test]
fn reflection_symmetry() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (a, b) = random_box(&mut rng, n);
    let ra: Vec<f64> = b.iter().rev().map(|v| -v).collect();
    let rb: Vec<f64> = a.iter().rev().map(|v| -v).collect();

    let t1 = tridiag_phi(&TridiagSpec::new(n, 4.0, 2.0, a.clone(), b.clone()).unwrap(), 64);
    let t2 = tridiag_phi(&TridiagSpec::new(n, 4.0, 2.0, ra.clone(), rb.clone()).unwrap(), 64);
    assert!(common::rel_f(t1, t2) < 1e-10, "{t1} vs {t2}");

    let z = ZLocations::seeded_uniform(n, 3, 1.0, 1.0).unwrap();
    let rz = ZLocations::new(z.z.iter().map(|v| 1.0 - v).collect(), 1.0, 1.0).unwrap();
    let e1 = expcov_phi(&ExpcovSpec::new(z, a, b).unwrap(), 32);
    let e2 = expcov_phi(&ExpcovSpec::new(rz, ra, rb).unwrap(), 32);
    assert!(common::rel_f(e1, e2) < 1e-10, "{e1} vs {e2}");
}

#[test]
fn sequential_and_parallel_agree() {
    let n = 16;
    let z = ZLocations::seeded_uniform(n, 4, 1.0, 1.0).unwrap();
    let spec = ExpcovSpec::new(z, vec![-1.0; n], vec![1.0; n]).unwrap();
    let mut opts = fast(32);
    let par = compute_phi_expcov(&spec, &opts).unwrap().phi;
    opts.exec = Execution::Sequential;
    let seq = compute_phi_expcov(&spec, &opts).unwrap().phi;
    assert_eq!(par, seq);

    let tri = TridiagSpec::new(64, 4.0, 2.0, vec![-1.0; 64], vec![1.0; 64]).unwrap();
    let mut topts = TridiagOptions::new(64);
    let par = compute_phi_tridiag(&tri, &topts).unwrap().phi;
    topts.exec = Execution::Sequential;
    let seq = compute_phi_tridiag(&tri, &topts).unwrap().phi;
    assert_eq!(par, seq);
}

#[test]
fn single_variable_problems() {
    let tri = TridiagSpec::new(1, 4.0, 2.0, vec![-1.0], vec![0.5]).unwrap();
    let got = tridiag_phi(&tri, 32);
    let want = quad(&Problem::Tridiagonal(tri.clone()), &[-1.0], &[0.5], &HModel::Constant(1.0));
    assert!(common::rel_f(got, want) < 1e-12, "{got} vs {want}");
}

#[test]
fn direct_backend_is_reproducible() {
    let n = 4;
    let z = ZLocations::seeded_uniform(n, 6, 1.0, 1.0).unwrap();
    let spec = ExpcovSpec::new(z, vec![-1.0; n], vec![0.5, 2.0, 1.0, 1.0]).unwrap();
    let first = compute_phi_expcov(&spec, &ExpcovOptions::new(16)).unwrap().phi;
    let second = compute_phi_expcov(&spec, &ExpcovOptions::new(16)).unwrap().phi;
    assert_eq!(first, second);
    let fast_phi = compute_phi_expcov(&spec, &fast(16)).unwrap().phi;
    assert!(fast_phi.rel_diff(&first) < 1e-11);
}
