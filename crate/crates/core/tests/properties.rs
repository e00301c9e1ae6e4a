//! Property tests for cross-module invariants.

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use proptest::prelude::*;

use volspill_core::evaluation::{loss_suite, mcs, r2_oos, LossOptions};
use volspill_core::har::{build_har_design, HarData};
use volspill_core::measures::{bipower_jump, realized_variance, rex_split, semivariances};
use volspill_core::spillover::{connectedness, gfevd, ma_coefficients, SpilloverMatrix};
use volspill_core::state::{argmax_source, classify_states};
use volspill_core::*;

fn returns() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05f64..0.05, 3..300)
}

fn stochastic(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(1e-3f64..1.0, n), n).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

fn dates(n: usize) -> Vec<NaiveDate> {
    let s = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..n).map(|i| s + Duration::days(i as i64)).collect()
}

proptest! {
    #[test]
    fn decompositions_sum_to_rv(r in returns(), lo in -0.03f64..-0.001, hi in 0.001f64..0.03) {
        let rv = realized_variance(&r).unwrap();
        let tol = 1e-12 * rv.max(f64::MIN_POSITIVE);
        let (p, m) = semivariances(&r).unwrap();
        prop_assert!((p + m - rv).abs() <= tol);
        let j = bipower_jump(&r, 0.99).unwrap();
        prop_assert!((j.cv + j.cj - rv).abs() <= tol);
        prop_assert!(j.cj >= 0.0 && j.cv >= 0.0);
        let (a, b, c) = rex_split(&r, lo, hi).unwrap();
        prop_assert!((a + b + c - rv).abs() <= tol);
    }

    #[test]
    fn rv_scales_quadratically(r in returns(), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = r.iter().map(|v| v * c).collect();
        let (a, b) = (realized_variance(&r).unwrap(), realized_variance(&scaled).unwrap());
        prop_assert!((b - c * c * a).abs() <= 1e-10 * b.max(1e-300));
    }

    #[test]
    fn gfevd_rows_are_shares(
        phi in prop::collection::vec(-0.3f64..0.3, 9),
        l in prop::collection::vec(-1.0f64..1.0, 9),
        h in 1usize..15,
    ) {
        let phi = DMatrix::from_row_slice(3, 3, &phi);
        let l = DMatrix::from_row_slice(3, 3, &l);
        let sigma = &l * l.transpose() + DMatrix::identity(3, 3) * 0.05;
        let theta = gfevd(&ma_coefficients(&[phi], h).unwrap().matrices, &sigma).unwrap();
        for i in 0..3 {
            prop_assert!((theta.row(i).sum() - 1.0).abs() < 1e-10);
            prop_assert!(theta.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn connectedness_identities(entries in (2usize..7).prop_flat_map(stochastic)) {
        let n = entries.len();
        let m = SpilloverMatrix::from_entries(entries, 0.5, 10).unwrap();
        let c = connectedness(&m);
        prop_assert!(c.net.iter().sum::<f64>().abs() < 1e-8);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(c.npdc[i][j], -c.npdc[j][i]);
            }
        }
        prop_assert!(c.tsi >= 0.0 && c.tsi <= 100.0);
        let mean_from = c.from_others.iter().sum::<f64>() / n as f64;
        prop_assert!((mean_from - c.tsi).abs() < 1e-9);
    }

    #[test]
    fn argmax_ignores_common_shifts(v in prop::collection::vec(-50.0f64..50.0, 1..8), shift in -100.0f64..100.0) {
        let c: Vec<(String, f64)> = v.iter().enumerate().map(|(i, x)| (format!("S{i}"), *x)).collect();
        let s: Vec<(String, f64)> = c.iter().map(|(n, x)| (n.clone(), x + shift)).collect();
        prop_assert_eq!(argmax_source(&c).unwrap().0, argmax_source(&s).unwrap().0);
    }

    #[test]
    fn state_labels_survive_monotone_maps(v in prop::collection::vec(1e-6f64..1.0, 20..200)) {
        let cfg = StateConfig::default();
        let a = classify_states(&v, &cfg).unwrap();
        let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let b = classify_states(&logs, &cfg).unwrap();
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn constant_panel_gives_constant_columns(c in 1e-6f64..1.0, n in 30usize..80) {
        let data = HarData { dates: dates(n), rv: vec![c; n], ..HarData::default() };
        let d = build_har_design(&data, &HarSpec::new(HarFamily::Rv, false)).unwrap();
        let want = (c + volspill_core::numeric::LOG_OFFSET).ln();
        for r in 0..d.n_rows() {
            for v in d.row(r) {
                prop_assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rmse_squared_is_mse(e in prop::collection::vec(-3.0f64..3.0, 1..100)) {
        let y: Vec<f64> = (0..e.len()).map(|i| -8.0 + 0.01 * i as f64).collect();
        let run = ForecastRun {
            model: "m".into(),
            horizon: 1,
            scheme: Scheme::RollingFixed { window: 10 },
            dates: dates(e.len()),
            predictions: y.iter().zip(&e).map(|(a, b)| a + b).collect(),
            targets: y,
            residual_variances: vec![0.0; e.len()],
            failures: vec![],
        };
        let s = loss_suite(&run, &LossOptions::default()).summary;
        prop_assert!((s.rmse * s.rmse - s.mse).abs() <= 1e-12 * s.mse.max(1.0));
        prop_assert!(s.qlike >= 0.0);
    }

    #[test]
    fn r2_oos_swap_inverts_the_sse_ratio(
        y in prop::collection::vec(-1.0f64..1.0, 10..60),
        seed in 0u64..1000,
    ) {
        let m: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + ((i as u64 * 31 + seed) % 17) as f64 * 0.01 + 0.01).collect();
        let b: Vec<f64> = y.iter().enumerate().map(|(i, v)| v - ((i as u64 * 7 + seed) % 11) as f64 * 0.02 - 0.02).collect();
        let x = r2_oos(&y, &m, &b, 1).unwrap().r2_oos;
        let swapped = r2_oos(&y, &b, &m, 1).unwrap().r2_oos;
        prop_assert!((swapped - (1.0 - 1.0 / (1.0 - x))).abs() < 1e-9);
        prop_assert!(x <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mcs_survivors_shrink_with_alpha(seed in 0u64..10_000, gap in 0.0f64..0.3) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let losses: Vec<Vec<f64>> = (0..4)
            .map(|m| (0..80).map(|_| 1.0 + gap * m as f64 + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect())
            .collect();
        let names: Vec<String> = (0..4).map(|m| format!("M{m}")).collect();
        let mut prev: Option<McsResult> = None;
        for alpha in [0.05, 0.1, 0.25, 0.5] {
            let cfg = McsConfig { alpha, bootstrap: 200, block_len: 5, seed };
            let res = mcs(&losses, &names, &cfg).unwrap();
            prop_assert!(res.t_max.survivors.iter().any(|s| *s));
            let mut ranks = res.t_r.ranks.clone();
            ranks.sort();
            prop_assert_eq!(ranks, vec![1, 2, 3, 4]);
            if let Some(p) = &prev {
                for m in 0..4 {
                    prop_assert!(!res.t_max.survivors[m] || p.t_max.survivors[m]);
                    prop_assert!(!res.t_r.survivors[m] || p.t_r.survivors[m]);
                }
            }
            prev = Some(res);
        }
    }
}
