mod common;

use common::*;
use fbis_core::datagen::{g1, gen_example, Example, SimSpec};
use fbis_core::ifbis::*;
use fbis_core::screening::ScreeningConfig;
use fbis_core::smoothing::{smoother_summary, smoother_summary_product};
use fbis_core::{Bandwidth, Dataset, KernelSpec};
use proptest::prelude::*;

/// Independent double-loop transcription of the conditional measure.
fn conditional_oracle(z: &[f64], x: &[f64], y: &[f64], h: f64, l: f64, k: fn(f64) -> f64) -> f64 {
    let n = y.len();
    let fit = |with_x: bool| {
        let mut rss = 0.0;
        let mut tr = 0.0;
        for i in 0..n {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut own = 0.0;
            for j in 0..n {
                let mut w = k((z[i] - z[j]) / h) / h;
                w *= if with_x { k((x[i] - x[j]) / h) / h } else { k(0.0) };
                num += w * y[j];
                den += w;
                if i == j {
                    own = w;
                }
            }
            rss += (y[i] - num / den).powi(2);
            tr += own / den;
        }
        (rss, tr)
    };
    let (rss_a, tr_a) = fit(false);
    let (rss_b, tr_b) = fit(true);
    let nf = n as f64;
    ((rss_a / nf).ln() - (rss_b / nf).ln()) / ((tr_b - tr_a) * (l / nf).sqrt() * h.sqrt())
}

const Z8: [f64; 8] = [0.0, 0.12, 0.31, 0.45, 0.52, 0.7, 0.86, 1.0];
const X8: [f64; 8] = [0.9, 0.15, 0.62, 0.33, 0.05, 0.78, 0.41, 0.27];
const Y8: [f64; 8] = [0.4, 1.3, -0.2, 0.8, 1.9, 0.1, 0.6, 1.1];

#[test]
fn conditional_measure_matches_oracle() {
    for (spec, k, h) in [
        (KernelSpec::Gaussian, gauss as fn(f64) -> f64, 0.3),
        (KernelSpec::Epanechnikov, epan as fn(f64) -> f64, 0.45),
    ] {
        let cfg = ScreeningConfig {
            kernel: spec,
            ..ScreeningConfig::default()
        };
        let got = conditional_importance(&Z8, &X8, &Y8, h, 100, &cfg).unwrap();
        assert!(!got.degenerate);
        let want = conditional_oracle(&Z8, &X8, &Y8, h, 100f64.ln(), k);
        assert!((got.value - want).abs() < 1e-12, "{spec:?}: {} vs {want}", got.value);
    }
}

#[test]
fn constant_candidate_scores_zero() {
    let got = conditional_importance(&Z8, &[0.5; 8], &Y8, 0.3, 100, &ScreeningConfig::default()).unwrap();
    assert_eq!(got.value, 0.0);
    assert!(got.degenerate);
}

#[test]
fn base_fit_reduces_to_univariate() {
    let h = Bandwidth::Finite(0.3);
    let spec = KernelSpec::Gaussian;
    let a = smoother_summary_product(&[&Z8, &X8], &Y8, &[h, Bandwidth::Infinite], spec).unwrap();
    let b = smoother_summary(&Z8, &Y8, h, spec).unwrap();
    assert!((a.trace - b.trace).abs() < 1e-12);
    for i in 0..8 {
        assert!((a.fitted[i] - b.fitted[i]).abs() < 1e-12);
    }
}

#[test]
fn surrogate_is_min_max() {
    let mut r = rng(1);
    let data = small_data(&mut r);
    let trace = ifbis_run(&data, &IfbisConfig::default()).unwrap();
    let model = trace.iterations[0].mekro_model.clone().unwrap();
    let z = surrogate(&model).unwrap();
    assert!(z.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(z.contains(&0.0) && z.contains(&1.0));
    let mut flat = model;
    flat.fitted = vec![2.0; flat.fitted.len()];
    assert_eq!(surrogate(&flat).unwrap_err().code(), "DegenerateSurrogate");
}

fn small_data(r: &mut rand_chacha::ChaCha8Rng) -> Dataset {
    let n = 200;
    let cols: Vec<Vec<f64>> = (0..30).map(|_| uniforms(r, n)).collect();
    let eps = normals(r, n);
    let y = (0..n).map(|i| g1(cols[0][i]) + 0.1 * eps[i]).collect();
    Dataset::from_columns(y, cols).unwrap()
}

#[test]
fn single_strong_signal_converges() {
    let mut r = rng(2);
    let data = small_data(&mut r);
    let trace = ifbis_run(&data, &IfbisConfig::default()).unwrap();
    assert_eq!(trace.final_set, vec![0]);
    assert_eq!(trace.stop_reason, StopReason::Converged);
}

fn check_invariants(trace: &IfbisTrace, cfg: &IfbisConfig, n: usize) {
    let first = &trace.iterations[0];
    for pair in trace.iterations.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        assert!(next.candidates.iter().all(|j| !prev.selected.contains(j)));
        assert!(next
            .selected
            .iter()
            .all(|j| prev.selected.contains(j) || next.candidates.contains(j)));
        assert!(next.conditional_ims.iter().all(|(j, _)| !prev.selected.contains(j)));
    }
    let s0 = cfg.size_cap(n);
    assert!(trace.final_set.len() <= s0.max(first.selected.len()));
    assert_eq!(&trace.final_set, &trace.iterations.last().unwrap().selected);
    assert!(trace.iterations.len() <= cfg.max_iterations);
    let last = trace.iterations.last().unwrap();
    match trace.stop_reason {
        StopReason::SizeCap => assert!(trace.final_set.len() >= s0),
        StopReason::EmptyAddition => assert!(last.conditional_ims.is_empty() && last.candidates.is_empty()),
        StopReason::IterationCap => assert_eq!(trace.iterations.len(), cfg.max_iterations),
        StopReason::Converged => {
            let len = trace.iterations.len();
            assert!(
                trace.final_set.is_empty()
                    || (len >= 2 && trace.iterations[len - 2].selected == trace.final_set)
            );
        }
    }
}

#[test]
fn simulated_runs_respect_invariants() {
    for (example, seed) in [(Example::Ex2, 3), (Example::Ex3, 4), (Example::Ex1, 5)] {
        let data = gen_example(&SimSpec {
            example,
            n: 150,
            p: 80,
            rho: 0.3,
            sigma2: 1.0,
            seed,
        })
        .unwrap();
        let cfg = IfbisConfig::default();
        let a = ifbis_run(&data, &cfg).unwrap();
        check_invariants(&a, &cfg, data.n());
        assert_eq!(a, ifbis_run(&data, &cfg).unwrap());

        let small = IfbisConfig {
            s0: Some(2),
            k_max: 1,
            max_iterations: 2,
            ..IfbisConfig::default()
        };
        let b = ifbis_run(&data, &small).unwrap();
        check_invariants(&b, &small, data.n());
        let topk = IfbisConfig {
            rule: ConditionalRule::TopK(2),
            ..IfbisConfig::default()
        };
        check_invariants(&ifbis_run(&data, &topk).unwrap(), &topk, data.n());
    }
}

#[test]
fn pure_noise_stops_early() {
    let mut r = rng(6);
    let n = 120;
    let cols: Vec<Vec<f64>> = (0..40).map(|_| uniforms(&mut r, n)).collect();
    let data = Dataset::from_columns(normals(&mut r, n), cols).unwrap();
    let trace = ifbis_run(&data, &IfbisConfig::default()).unwrap();
    assert!(trace.final_set.len() <= 2, "{:?}", trace.final_set);
}

#[test]
fn prediction_uses_raw_units() {
    let mut r = rng(7);
    let data = small_data(&mut r);
    let stretched: Vec<Vec<f64>> = (0..data.p())
        .map(|j| data.column(j).iter().map(|v| 10.0 * v - 3.0).collect())
        .collect();
    let other = Dataset::from_columns(data.y().to_vec(), stretched).unwrap();
    let cfg = IfbisConfig::default();
    let a = ifbis_run(&data, &cfg).unwrap();
    let b = ifbis_run(&other, &cfg).unwrap();
    assert_eq!(a.final_set, b.final_set);
    let pa = a.predict(&data, &data, &cfg).unwrap();
    let pb = b.predict(&other, &other, &cfg).unwrap();
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn rejects_bad_config() {
    let mut r = rng(8);
    let data = small_data(&mut r);
    for cfg in [
        IfbisConfig { s0: Some(0), ..IfbisConfig::default() },
        IfbisConfig { k_max: 0, ..IfbisConfig::default() },
        IfbisConfig { rule: ConditionalRule::TopK(0), ..IfbisConfig::default() },
    ] {
        assert_eq!(ifbis_run(&data, &cfg).unwrap_err().code(), "InvalidConfig");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditional_measure_affine_in_y(
        y in prop::collection::vec(-3.0f64..3.0, 8),
        a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        c in -20.0f64..20.0,
    ) {
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let cfg = ScreeningConfig::default();
        let moved: Vec<f64> = y.iter().map(|v| a * v + c).collect();
        let u = conditional_importance(&Z8, &X8, &y, 0.3, 50, &cfg).unwrap();
        let v = conditional_importance(&Z8, &X8, &moved, 0.3, 50, &cfg).unwrap();
        prop_assert!((u.value - v.value).abs() < 1e-10);
    }

    #[test]
    fn conditional_measure_matches_oracle_on_random_inputs(
        z in prop::collection::vec(0.0f64..1.0, 6..14),
        seed in any::<u64>(),
        h in 0.1f64..0.8,
    ) {
        let mut r = rng(seed);
        let n = z.len();
        let x = uniforms(&mut r, n);
        let y = normals(&mut r, n);
        let got = conditional_importance(&z, &x, &y, h, 30, &ScreeningConfig::default()).unwrap();
        if !got.degenerate {
            let want = conditional_oracle(&z, &x, &y, h, 30f64.ln(), gauss);
            prop_assert!((got.value - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }
}
