use proptest::prelude::*;
use std::f64::consts::PI;
use tmvn::exec::Execution;
use tmvn::expcov::ExpcovSpec;
use tmvn::fourier::{grid_points, series_from_samples, FourierSeries1, SampleGrid2};
use tmvn::oracle::{mc_reference, quad_reference};
use tmvn::quadrature;
use tmvn::spec::HModel;
use tmvn::specfun::{faddeeva, filter, gauss_fourier_weight};
use tmvn::tree::{PartitionTree, ZLocations};
use tmvn::Complex;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex::new(a, b)), len)
}

fn permute(m: &[f64], n: usize, perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[perm[i] * n + perm[j]];
        }
    }
    out
}

fn random_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1u32..=2, any::<u64>(), 0.2..3.0f64).prop_flat_map(|(log_n, seed, beta)| {
        let n = 1usize << log_n;
        let bounds = prop::collection::vec((-2.0..1.0f64, 0.2..2.0f64), n);
        bounds.prop_map(move |bs| {
            let z = ZLocations::seeded_uniform(n, seed, 1.0, beta).unwrap();
            let a: Vec<f64> = bs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = bs.iter().map(|p| (p.0 + p.1).min(2.0)).collect();
            let spec = ExpcovSpec::new(z, a.clone(), b.clone()).unwrap();
            (spec.dense(), a, b)
        })
    })
}

proptest! {
    #[test]
    fn filter_is_even_and_non_increasing(half_width in 0.5..50.0f64, u in 0.0..2.0f64, du in 0.0..0.2f64) {
        let x1 = u * half_width;
        let x2 = (u + du).min(2.0) * half_width;
        prop_assert_eq!(filter(x1, half_width), filter(-x1, half_width));
        prop_assert!(filter(x2, half_width) <= filter(x1, half_width));
        let v = filter(x1, half_width);
        prop_assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn faddeeva_reflections(x in -5.0..5.0f64, y in 0.0..5.0f64) {
        let z = Complex::new(x, y);
        let w = faddeeva(z);
        let reflected = faddeeva(-z);
        let e = 2.0 * (-z * z).exp();
        let scale = e.norm() + w.norm();
        prop_assert!((reflected - (e - w)).norm() <= 1e-12 * scale);
        let mirrored = faddeeva(Complex::new(-x, y));
        prop_assert!((mirrored - w.conj()).norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn gauss_weight_matches_quadrature(k in -64i64..=64, half_period in 1.0..30.0f64) {
        let t = -(k as f64) * PI / (2.0 * half_period);
        let q = quadrature::oscillatory_integral(-9.0, 9.0, t, &[], |x| (-x * x).exp()) / PI.sqrt();
        let w = gauss_fourier_weight(k, half_period);
        prop_assert!((q.re - w).abs() < 1e-13 && q.im.abs() < 1e-13, "{} vs {}", q, w);
        prop_assert_eq!(w, gauss_fourier_weight(-k, half_period));
    }

    #[test]
    fn tree_partitions_indices(log_n in 1u32..=12) {
        let n = 1usize << log_n;
        let tree = PartitionTree::build(n).unwrap();
        prop_assert_eq!(tree.nodes.len(), 2 * n - 1);
        prop_assert_eq!(tree.depth, log_n as usize);
        for node in &tree.nodes {
            if let Some((l, r)) = node.children {
                let (l, r) = (tree.node(l), tree.node(r));
                prop_assert_eq!(l.lo, node.lo);
                prop_assert_eq!(l.hi + 1, r.lo);
                prop_assert_eq!(r.hi, node.hi);
                prop_assert_eq!(l.level, node.level + 1);
            } else {
                prop_assert_eq!(node.lo, node.hi);
                prop_assert_eq!(node.level, tree.depth);
            }
        }
    }

    #[test]
    fn split_points_separate_children(log_n in 1u32..=9, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let z = ZLocations::seeded_uniform(n, seed, 1.0, 1.0).unwrap();
        let mut tree = PartitionTree::build(n).unwrap();
        tree.assign_geometry(&z.z, 1.0).unwrap();
        for node in &tree.nodes {
            let (a, b) = node.ab();
            prop_assert!(z.z[node.lo] >= a && z.z[node.hi] <= b);
            if let Some((l, r)) = node.children {
                let c = node.split_point.unwrap();
                prop_assert!(z.z[tree.node(l).hi] < c && c < z.z[tree.node(r).lo]);
            }
        }
    }

    #[test]
    fn parseval_one_dimension(values in complex_vec(64), half_width in 1.0..20.0f64) {
        let s = FourierSeries1::from_samples(&values, half_width).unwrap();
        let grid: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        let coeff: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((grid - 64.0 * coeff).abs() <= 1e-12 * grid);
        let back = s.samples();
        for (u, v) in back.iter().zip(&values) {
            prop_assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn parseval_two_dimensions(values in complex_vec(16 * 16)) {
        let grid = SampleGrid2::new(8, values.clone()).unwrap();
        let s = series_from_samples(&grid, [14.0, 3.0]).unwrap();
        let g: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        let c: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((g - 256.0 * c).abs() <= 1e-12 * g);
    }

    #[test]
    fn direct_evaluation_on_grid_reproduces_samples(values in complex_vec(32)) {
        let s = FourierSeries1::from_samples(&values, 14.0).unwrap();
        for (t, v) in grid_points(16, 14.0).iter().zip(&values) {
            prop_assert!((s.eval_direct(*t) - v).norm() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gauss_weighted_integral_of_filtered_functions(
        amps in prop::collection::vec(-1.0..1.0f64, 4),
        freqs in prop::collection::vec(0.0..2.0f64, 4),
        phases in prop::collection::vec(0.0..6.3f64, 4),
        shift in -2.0..2.0f64,
    ) {
        let f = |t: f64| {
            let s: f64 = (0..4).map(|j| amps[j] * (freqs[j] * t + phases[j]).cos()).sum();
            Complex::new(s + 1.5, (t - shift).tanh()) * filter(t, 7.0)
        };
        let m = 64;
        let samples: Vec<Complex> = grid_points(m, 14.0).iter().map(|&t| f(t)).collect();
        let got = FourierSeries1::from_samples(&samples, 14.0).unwrap().integrate_gauss_weighted();
        let want = quadrature::adaptive(&|t: f64| f(t) * (-t * t).exp(), -14.0, 14.0, 1e-13) / PI.sqrt();
        prop_assert!((got - want).norm() < 1e-10, "{} vs {}", got, want);
    }

    #[test]
    fn quadrature_is_permutation_invariant((m, a, b) in random_problem(), rot in 0usize..4) {
        let n = a.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let pm = permute(&m, n, &perm);
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        let h = HModel::Constant(1.0);
        let q1 = quad_reference(&m, &a, &b, &h, 16, Execution::Parallel).unwrap();
        let q2 = quad_reference(&pm, &pa, &pb, &h, 16, Execution::Parallel).unwrap();
        prop_assert!((q1.value - q2.value).abs() <= 1e-13 * q1.value, "{} vs {}", q1.value, q2.value);
    }

    #[test]
    fn quadrature_and_monte_carlo_agree((m, a, b) in random_problem(), seed in any::<u64>()) {
        let h = HModel::Constant(1.0);
        let q = quad_reference(&m, &a, &b, &h, 16, Execution::Parallel).unwrap();
        let mc = mc_reference(&m, &a, &b, &h, 200_000, seed, Execution::Parallel).unwrap();
        prop_assert!((q.value - mc.value).abs() <= mc.error_bound, "{:?} vs {:?}", q, mc);
    }
}
