mod common;

use common::*;
use fbis_core::datagen::g1;
use fbis_core::screening::*;
use fbis_core::smoothing::smoother_summary;
use fbis_core::{Bandwidth, Dataset, KernelSpec};
use proptest::prelude::*;

fn random_data(seed: u64, n: usize, p: usize, signal: impl Fn(&[Vec<f64>], usize) -> f64, noise: f64) -> Dataset {
    let mut r = rng(seed);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| uniforms(&mut r, n)).collect();
    let eps = normals(&mut r, n);
    let y: Vec<f64> = (0..n).map(|i| signal(&cols, i) + noise * eps[i]).collect();
    Dataset::from_columns(y, cols).unwrap()
}

/// Transcribed `log(RSS/n) + τ (tr − 1) (L/n)^{1/2} h^{1/2}` with a direct NW fit.
fn ic_oracle(x: &[f64], y: &[f64], h: f64, tau: f64, l: f64) -> f64 {
    let n = x.len() as f64;
    let mut rss = 0.0;
    let mut tr = 0.0;
    for i in 0..x.len() {
        let den: f64 = x.iter().map(|xk| gauss((x[i] - xk) / h)).sum();
        let num: f64 = x.iter().zip(y).map(|(xk, yk)| gauss((x[i] - xk) / h) * yk).sum();
        rss += (y[i] - num / den).powi(2);
        tr += gauss(0.0) / den;
    }
    (rss / n).ln() + tau * (tr - 1.0) * (l / n).sqrt() * h.sqrt()
}

fn im_oracle(x: &[f64], y: &[f64], h: f64, l: f64) -> f64 {
    let n = x.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let mut rss = 0.0;
    let mut tr = 0.0;
    for i in 0..x.len() {
        let den: f64 = x.iter().map(|xk| gauss((x[i] - xk) / h)).sum();
        let num: f64 = x.iter().zip(y).map(|(xk, yk)| gauss((x[i] - xk) / h) * yk).sum();
        rss += (y[i] - num / den).powi(2);
        tr += gauss(0.0) / den;
    }
    ((tss / n).ln() - (rss / n).ln()) / (tr * (l / n).sqrt() * h.sqrt())
}

#[test]
fn h_star_arithmetic() {
    let h = h_star(400, 1000, Rate::UseP).unwrap();
    assert!((h - 0.444074).abs() < 1e-6);
    let h = h_star(100, 100, Rate::UseLogN).unwrap();
    assert!((h - 0.540318).abs() < 1e-6);
    let n = 30;
    let p = (n as f64).exp().round() as usize;
    assert!((h_star(n, p, Rate::UseP).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn ic_infinity_values() {
    assert!((ic_infinity(&[0.0, 1.0, 2.0]).unwrap() - (2.0f64 / 3.0).ln()).abs() < 1e-15);
    assert_eq!(ic_infinity(&[4.0; 5]).unwrap_err().code(), "DegenerateResponse");
    let y0 = [0.3, -1.2, 2.5, 0.7];
    let y: Vec<f64> = y0.iter().map(|v| -3.0 * v + 8.0).collect();
    let want = ic_infinity(&y0).unwrap() + 2.0 * 3f64.ln();
    assert!((ic_infinity(&y).unwrap() - want).abs() < 1e-12);
}

#[test]
fn ic_reductions_and_oracle() {
    let x = [0.05, 0.31, 0.48, 0.77, 0.93];
    let y = [1.2, -0.4, 0.9, 2.2, 0.1];
    let cfg = ScreeningConfig::default();
    assert_eq!(ic(&x, &y, Bandwidth::Infinite, &cfg, 50).unwrap(), ic_infinity(&y).unwrap());
    let l = 50f64.ln();
    let got = ic(&x, &y, Bandwidth::Finite(0.2), &cfg, 50).unwrap();
    assert!((got - ic_oracle(&x, &y, 0.2, 1.0, l)).abs() < 1e-12);
    let mut c = cfg.clone();
    c.tau = 2.5;
    let got = ic(&x, &y, Bandwidth::Finite(0.2), &c, 50).unwrap();
    assert!((got - ic_oracle(&x, &y, 0.2, 2.5, l)).abs() < 1e-12);
    c.tau = 0.0;
    let s = smoother_summary(&x, &y, Bandwidth::Finite(0.2), KernelSpec::Gaussian).unwrap();
    let unpenalized = (s.rss(&y) / 5.0).ln();
    assert!((ic(&x, &y, Bandwidth::Finite(0.2), &c, 50).unwrap() - unpenalized).abs() < 1e-14);
}

#[test]
fn im_oracle_and_constant_column() {
    let x = [0.11, 0.93, 0.42, 0.58, 0.27, 0.76];
    let y = [0.5, 1.9, -0.3, 0.4, 1.1, 2.0];
    let cfg = ScreeningConfig::default();
    let got = importance_measure(&x, &y, 0.35, 200, &cfg).unwrap();
    assert!((got - im_oracle(&x, &y, 0.35, 200f64.ln())).abs() < 1e-12);
    assert_eq!(importance_measure(&[0.4; 6], &y, 0.35, 200, &cfg).unwrap(), 0.0);
}

#[test]
fn hard_rule_on_noise_and_signal() {
    let noise = random_data(17, 200, 50, |_, _| 0.0, 1.0);
    let cfg = ScreeningConfig {
        tau: 100.0,
        ..ScreeningConfig::default()
    };
    assert!(fbis_hard_select(&noise, &cfg).unwrap().is_empty());

    let data = random_data(18, 400, 10, |c, i| g1(c[0][i]), 0.1);
    let sel = fbis_hard_select(&data, &ScreeningConfig::default()).unwrap();
    assert!(sel.contains(&0), "{sel:?}");
}

#[test]
fn favored_flag_matches_ic_comparison() {
    let data = random_data(19, 150, 20, |c, i| g1(c[0][i]) + c[1][i], 0.5);
    let scores = marginal_scores(&data, &ScreeningConfig::default()).unwrap();
    for v in &scores.variables {
        assert_eq!(v.favored == Favored::HStar, v.ic_hstar < scores.ic_inf);
    }
}

#[test]
fn quantile_levels() {
    let data = random_data(20, 100, 30, |c, i| c[0][i], 1.0);
    let mut cfg = ScreeningConfig {
        q: Quantile::Level(0.0),
        n_permutations: 3,
        ..ScreeningConfig::default()
    };
    let t = permutation_threshold(&data, &cfg).unwrap();
    assert_eq!(t.permuted_ims.len(), 90);
    assert_eq!(t.omega_q, t.permuted_ims.iter().cloned().fold(f64::INFINITY, f64::min));
    cfg.q = Quantile::Max;
    let t2 = permutation_threshold(&data, &cfg).unwrap();
    assert_eq!(t2.omega_q, t2.permuted_ims.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    assert_eq!(t.permuted_ims, t2.permuted_ims);
    assert_eq!(permutation_threshold(&data, &cfg).unwrap(), t2);

    assert_eq!(lower_quantile(&[3.0, 1.0, 2.0, 4.0], Quantile::Level(0.5)), 2.0);
    assert_eq!(lower_quantile(&[3.0, 1.0, 2.0, 4.0], Quantile::Level(0.51)), 3.0);
}

#[test]
fn screening_is_deterministic() {
    let data = random_data(21, 120, 40, |c, i| 3.0 * g1(c[2][i]), 0.3);
    let cfg = ScreeningConfig {
        seed: 99,
        n_permutations: 2,
        ..ScreeningConfig::default()
    };
    let a = fbis_screen(&data, &cfg).unwrap();
    let b = fbis_screen(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.selected.contains(&2));
    let ims = a.ims();
    assert!(a.selected.windows(2).all(|w| ims[w[0]] >= ims[w[1]]));
}

#[test]
fn permutation_threshold_controls_null_selections() {
    let (n, p) = (100, 50);
    let mut fractions = Vec::new();
    for seed in 0..20 {
        let data = random_data(1000 + seed, n, p, |_, _| 0.0, 1.0);
        let cfg = ScreeningConfig {
            seed: 5000 + seed,
            ..ScreeningConfig::default()
        };
        let report = fbis_screen(&data, &cfg).unwrap();
        fractions.push(report.selected.len() as f64 / p as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!(mean <= 0.05, "mean null selection fraction {mean}");
}

#[test]
fn penalty_grows_with_p() {
    let n = 200;
    let mut prev = (0.0, 0.0);
    for p in [10, 100, 1000, 10_000, 100_000] {
        let h = h_star(n, p, Rate::UseP).unwrap();
        let scale = penalty_scale(n, rate_log(n, p, Rate::UseP).unwrap(), h);
        assert!(h > prev.0 && scale > prev.1);
        prev = (h, scale);
    }
}

#[test]
fn sis_finds_linear_signal() {
    let data = random_data(22, 200, 30, |c, i| 2.0 * c[0][i], 1e-3);
    assert_eq!(sis_rank(&data)[0], 0);
    let noise = random_data(23, 50, 10, |_, _| 0.0, 1.0);
    assert_eq!(sis_rank(&noise), sis_rank(&noise));
}

#[test]
fn ties_break_by_index() {
    assert_eq!(rank_descending(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
}

#[test]
fn constant_columns_are_flagged() {
    let mut r = rng(24);
    let y = normals(&mut r, 30);
    let data = Dataset::from_columns(y, vec![uniforms(&mut r, 30), vec![2.0; 30]]).unwrap();
    let scores = marginal_scores(&data, &ScreeningConfig::default()).unwrap();
    assert!(scores.variables[1].constant);
    assert_eq!(scores.variables[1].im, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_invariance(seed in any::<u64>(), a in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], c in -50.0f64..50.0) {
        let data = random_data(seed, 60, 12, |x, i| g1(x[0][i]) + 0.5 * x[1][i], 0.3);
        let moved: Vec<f64> = data.y().iter().map(|v| a * v + c).collect();
        let other = data.with_response(moved).unwrap();
        let cfg = ScreeningConfig::default();
        let s1 = marginal_scores(&data, &cfg).unwrap();
        let s2 = marginal_scores(&other, &cfg).unwrap();
        for (u, v) in s1.variables.iter().zip(&s2.variables) {
            prop_assert!((u.im - v.im).abs() < 1e-10);
        }
        prop_assert_eq!(s1.ranking(), s2.ranking());
        prop_assert_eq!(fbis_hard_select(&data, &cfg).unwrap(), fbis_hard_select(&other, &cfg).unwrap());
    }
}
