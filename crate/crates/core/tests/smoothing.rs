mod common;

use common::*;
use fbis_core::kernel::GAUSSIAN_AT_ZERO;
use fbis_core::smoothing::*;
use fbis_core::{kernel_eval, Bandwidth, KernelSpec};
use proptest::prelude::*;

const KERNELS: [KernelSpec; 2] = [KernelSpec::Gaussian, KernelSpec::Epanechnikov];

fn bw(h: f64) -> Bandwidth {
    Bandwidth::finite(h).unwrap()
}

#[test]
fn kernel_values() {
    assert!((kernel_eval(0.0, KernelSpec::Gaussian) - 0.3989422804).abs() < 1e-10);
    assert_eq!(kernel_eval(0.0, KernelSpec::Epanechnikov), 0.75);
    assert_eq!(kernel_eval(2.0, KernelSpec::Epanechnikov), 0.0);
    assert!((kernel_eval(1.3, KernelSpec::Gaussian) - gauss(1.3)).abs() < 1e-16);
}

#[test]
fn small_fits() {
    let x = [0.0, 1.0];
    let y = [0.0, 1.0];
    assert_eq!(nw_fit(&x, &y, Bandwidth::Infinite, KernelSpec::Gaussian, &[0.5]).unwrap(), vec![0.5]);
    let v = nw_fit(&x, &y, bw(1.0), KernelSpec::Gaussian, &[0.5]).unwrap()[0];
    assert!((v - 0.5).abs() < 1e-15);

    let x = [0.0, 0.5, 1.0];
    let y = [1.0, 0.0, 1.0];
    let v = nw_fit(&x, &y, bw(0.3), KernelSpec::Gaussian, &[0.25]).unwrap()[0];
    assert!((v - nw_direct(&x, &y, 0.3, gauss, 0.25)).abs() < 1e-12);
    assert!((v - 0.5150754611202841).abs() < 1e-12);
}

#[test]
fn two_point_trace() {
    let s = smoother_summary(&[0.0, 1.0], &[0.0, 1.0], bw(1.0), KernelSpec::Gaussian).unwrap();
    let k0 = GAUSSIAN_AT_ZERO;
    let k1 = gauss(1.0);
    assert!((s.trace - 2.0 * k0 / (k0 + k1)).abs() < 1e-12);
    assert!((s.trace - 1.244919).abs() < 1e-6);
}

#[test]
fn infinite_bandwidth_is_exact_mean() {
    let mut r = rng(3);
    let x = uniforms(&mut r, 37);
    let y = normals(&mut r, 37);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    for spec in KERNELS {
        let s = smoother_summary(&x, &y, Bandwidth::Infinite, spec).unwrap();
        assert_eq!(s.trace, 1.0);
        assert!(s.fitted.iter().all(|&f| f == mean));
    }
}

#[test]
fn oracle_equivalence_on_random_instances() {
    let mut r = rng(11);
    for case in 0..100 {
        let n = 2 + case % 19;
        let x = uniforms(&mut r, n);
        let y = normals(&mut r, n);
        let h = 0.05 + 0.5 * uniforms(&mut r, 1)[0];
        let (spec, k): (KernelSpec, fn(f64) -> f64) = if case % 2 == 0 {
            (KernelSpec::Gaussian, gauss)
        } else {
            // Wide enough that every row keeps its neighbours.
            (KernelSpec::Epanechnikov, epan)
        };
        let h = if case % 2 == 0 { h } else { 1.5 };
        let s = smoother_matrix(&x, bw(h), spec).unwrap();
        for i in 0..n {
            let via_matrix: f64 = (0..n).map(|k| s[i * n + k] * y[k]).sum();
            assert!((via_matrix - nw_direct(&x, &y, h, k, x[i])).abs() < 1e-12, "case {case} row {i}");
        }
        let fitted = smoother_summary(&x, &y, bw(h), spec).unwrap().fitted;
        let direct = nw_fit(&x, &y, bw(h), spec, &x).unwrap();
        for i in 0..n {
            assert!((fitted[i] - direct[i]).abs() < 1e-12);
            assert!((fitted[i] - nw_direct(&x, &y, h, k, x[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn product_matches_triple_loop() {
    let mut r = rng(5);
    let n = 25;
    let cols: Vec<Vec<f64>> = (0..3).map(|_| uniforms(&mut r, n)).collect();
    let y = normals(&mut r, n);
    let hs = [0.1, 0.3, 0.5];
    let h: Vec<Bandwidth> = hs.iter().map(|&v| bw(v)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let eval: Vec<Vec<f64>> = (0..3).map(|_| uniforms(&mut r, 7)).collect();
    let eval_refs: Vec<&[f64]> = eval.iter().map(|c| c.as_slice()).collect();
    let got = nw_fit_product(&refs, &y, &h, KernelSpec::Gaussian, &eval_refs).unwrap();
    for e in 0..7 {
        let pt = [eval[0][e], eval[1][e], eval[2][e]];
        let want = product_direct(&cols, &y, &[Some(0.1), Some(0.3), Some(0.5)], gauss, &pt);
        assert!((got[e] - want).abs() < 1e-12);
    }
}

#[test]
fn product_trace_small_instance() {
    let c1 = [0.1, 0.4, 0.9];
    let c2 = [0.7, 0.2, 0.5];
    let t = smoother_trace_product(&[&c1, &c2], &[bw(0.3), bw(0.6)], KernelSpec::Gaussian).unwrap();
    let mut oracle = 0.0;
    for i in 0..3 {
        let den: f64 = (0..3)
            .map(|k| gauss((c1[i] - c1[k]) / 0.3) * gauss((c2[i] - c2[k]) / 0.6))
            .sum();
        oracle += gauss(0.0) * gauss(0.0) / den;
    }
    assert!((t - oracle).abs() < 1e-12);
    assert!((t - 2.0954211463785137).abs() < 1e-12);
    let all_inf = smoother_trace_product(&[&c1, &c2], &[Bandwidth::Infinite; 2], KernelSpec::Gaussian).unwrap();
    assert_eq!(all_inf, 1.0);
}

#[test]
fn product_all_infinite_is_mean() {
    let c1 = [0.1, 0.4, 0.9, 0.3];
    let c2 = [0.7, 0.2, 0.5, 0.0];
    let y = [1.0, 2.0, 4.0, -1.0];
    let f = nw_fit_product(&[&c1, &c2], &y, &[Bandwidth::Infinite; 2], KernelSpec::Gaussian, &[&[0.5], &[0.5]])
        .unwrap();
    assert_eq!(f, vec![1.5]);
}

/// Large-sample limit of `h·tr(S_h)` for Uniform[0, 1] design:
/// `K(0) ∫₀¹ dx / [Φ((1−x)/h) − Φ(−x/h)]`, which tends to `K(0)` as `h → 0`
/// but carries an `O(h)` boundary excess at any fixed `h`.
fn uniform_limit(h: f64) -> f64 {
    let phi = |t: f64| 0.5 * libm::erfc(-t / 2f64.sqrt());
    let m = 100_000;
    let s: f64 = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / m as f64;
            1.0 / (phi((1.0 - x) / h) - phi(-x / h))
        })
        .sum();
    GAUSSIAN_AT_ZERO * s / m as f64
}

#[test]
fn scaled_trace_approaches_its_limit() {
    let mut r = rng(2024);
    let mut at = |n: usize, h: f64| {
        let x = uniforms(&mut r, n);
        scaled_trace(&x, h, KernelSpec::Gaussian).unwrap()
    };
    let limit = uniform_limit(0.05);
    let small = at(1_000, 0.05);
    let large = at(10_000, 0.05);
    assert!((large - limit).abs() < 1e-3, "{large} vs {limit}");
    assert!((large - limit).abs() < (small - limit).abs(), "{small} {large} {limit}");
    // Shrinking h moves the limit itself toward K(0).
    let fine = at(20_000, 0.01);
    assert!((fine - uniform_limit(0.01)).abs() < 1e-3);
    assert!((fine - GAUSSIAN_AT_ZERO).abs() < 0.006, "{fine}");
}

#[test]
fn rejects_bad_input() {
    assert!(nw_fit(&[], &[], bw(1.0), KernelSpec::Gaussian, &[0.0]).is_err());
    assert!(nw_fit(&[0.0, 1.0], &[1.0], bw(1.0), KernelSpec::Gaussian, &[0.0]).is_err());
    assert!(nw_fit(&[0.0, f64::NAN], &[1.0, 2.0], bw(1.0), KernelSpec::Gaussian, &[0.0]).is_err());
    assert!(Bandwidth::finite(0.0).is_none());
    assert!(Bandwidth::finite(f64::INFINITY).is_none());
}

#[test]
fn compact_kernel_floor_falls_back_to_mean() {
    let x = [0.0, 10.0];
    let y = [1.0, 3.0];
    let f = nw_fit(&x, &y, bw(0.5), KernelSpec::Epanechnikov, &[5.0]).unwrap();
    assert_eq!(f, vec![2.0]);
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
            0.02f64..2.0,
        )
    })
}

proptest! {
    #[test]
    fn rows_are_stochastic((x, _y, h) in instance(), epa in any::<bool>()) {
        let spec = if epa { KernelSpec::Epanechnikov } else { KernelSpec::Gaussian };
        let n = x.len();
        let s = smoother_matrix(&x, bw(h), spec).unwrap();
        for i in 0..n {
            let row: f64 = s[i * n..(i + 1) * n].iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
            prop_assert!(s[i * n..(i + 1) * n].iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn shift_and_scale_equivariance((x, y, h) in instance(), c in -100.0f64..100.0, a in 0.01f64..50.0) {
        let base = nw_fit(&x, &y, bw(h), KernelSpec::Gaussian, &x).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = y.iter().map(|v| a * v).collect();
        let fs = nw_fit(&x, &shifted, bw(h), KernelSpec::Gaussian, &x).unwrap();
        let fa = nw_fit(&x, &scaled, bw(h), KernelSpec::Gaussian, &x).unwrap();
        for i in 0..x.len() {
            prop_assert!((fs[i] - (base[i] + c)).abs() < 1e-12);
            prop_assert!((fa[i] - a * base[i]).abs() <= 1e-12 * (a * base[i]).abs().max(1.0));
        }
    }

    #[test]
    fn infinite_coordinate_cancels((x, y, h) in instance(), seed in any::<u64>(), epa in any::<bool>()) {
        let spec = if epa { KernelSpec::Epanechnikov } else { KernelSpec::Gaussian };
        let mut r = rng(seed);
        let other = uniforms(&mut r, x.len());
        let hs = [bw(h), Bandwidth::Infinite];
        let prod = smoother_summary_product(&[&x, &other], &y, &hs, spec).unwrap();
        let uni = smoother_summary(&x, &y, bw(h), spec).unwrap();
        prop_assert!((prod.trace - uni.trace).abs() < 1e-12);
        for i in 0..x.len() {
            prop_assert!((prod.fitted[i] - uni.fitted[i]).abs() < 1e-12);
        }
        let pts = uniforms(&mut r, 4);
        let junk = uniforms(&mut r, 4);
        let a = nw_fit_product(&[&x, &other], &y, &hs, spec, &[&pts, &junk]).unwrap();
        let b = nw_fit(&x, &y, bw(h), spec, &pts).unwrap();
        for i in 0..4 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_lies_between_one_and_n((x, _y, h) in instance()) {
        let t = smoother_trace_product(&[&x], &[bw(h)], KernelSpec::Gaussian).unwrap();
        prop_assert!(t >= 1.0 - 1e-12 && t <= x.len() as f64 + 1e-12);
    }
}
