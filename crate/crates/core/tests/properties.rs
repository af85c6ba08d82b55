//! Invariants checked over randomly generated inputs.

use std::path::Path;

use proptest::prelude::*;

use krigeval::bayes::{PhiPrior, PredictiveDistribution};
use krigeval::covariance::correlation_matrix;
use krigeval::dataset::{read_csv_from, sample_uniform, subsample_indices, write_csv_to};
use krigeval::experiments::{CriterionRow, CriterionTable};
use krigeval::stats::{median, quartiles};
use krigeval::validation::{alpha_curve, mse_alpha, pia, pva, q2, regular_levels, LooRecord};
use krigeval::{phi_posterior, CovarianceSpec, Family, FitOptions, Kernel, OkModel, PriorSpec, Rect, SpatialDataset, Smoothness};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Matern(Smoothness::Half)),
        Just(Family::Matern(Smoothness::ThreeHalves)),
        Just(Family::Matern(Smoothness::FiveHalves)),
        Just(Family::Gaussian),
    ]
}

/// `(observed, mean, variance)` triples with positive variances.
fn gaussian_records() -> impl Strategy<Value = Vec<LooRecord>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0.01..4.0f64), 5..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (z, m, s2))| LooRecord::gaussian(i, z, m, s2))
            .collect()
    })
}

fn small_field(n: usize, seed: u64) -> SpatialDataset {
    let pts = sample_uniform(Rect::square(0.0, 10.0), n, seed).unwrap();
    let spec = CovarianceSpec::new(Family::EXPONENTIAL, 3.0, 0.2, 0.0).unwrap();
    krigeval::simulate_gp(&spec, 0.0, &pts, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(
        fam in family(), phi in 0.1..10.0f64, seed in 0u64..1000, n in 2usize..20,
    ) {
        let pts = sample_uniform(Rect::square(0.0, 10.0), n, seed).unwrap();
        let k = Kernel::new(fam, phi, 0.0).unwrap();
        let m = correlation_matrix(&k, &pts);
        for i in 0..n {
            prop_assert_eq!(m[i * n + i], 1.0);
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], m[j * n + i]);
                prop_assert!(m[i * n + j] > 0.0 && m[i * n + j] <= 1.0);
            }
        }
    }

    #[test]
    fn correlation_decreases_with_distance(fam in family(), phi in 0.1..10.0f64, a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(fam.correlation_unchecked(phi, lo) >= fam.correlation_unchecked(phi, hi));
    }

    #[test]
    fn q2_is_affine_invariant(recs in gaussian_records(), a in 0.1..10.0f64, b in -10.0..10.0f64) {
        let base = q2(&recs);
        prop_assume!(base.is_ok());
        let moved: Vec<_> = recs
            .iter()
            .map(|r| LooRecord::gaussian(r.index, a * r.observed + b, a * r.prediction + b, a * a * r.variance))
            .collect();
        let (x, y) = (base.unwrap(), q2(&moved).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn variance_criteria_are_scale_invariant(recs in gaussian_records(), a in 0.1..10.0f64) {
        let scaled: Vec<_> = recs
            .iter()
            .map(|r| LooRecord::gaussian(r.index, a * r.observed, a * r.prediction, a * a * r.variance))
            .collect();
        prop_assert!((pva(&recs).unwrap() - pva(&scaled).unwrap()).abs() < 1e-9);
        prop_assert!((pia(&recs).unwrap() - pia(&scaled).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_pia_tracks_pva(recs in gaussian_records()) {
        let gap = (pia(&recs).unwrap() - pva(&recs).unwrap()).abs();
        prop_assert!(gap <= 0.017 + 1e-6, "gap {}", gap);
    }

    #[test]
    fn alpha_curve_is_monotone(recs in gaussian_records(), count in 2usize..100) {
        let curve = alpha_curve(&recs, &regular_levels(count)).unwrap();
        prop_assert_eq!(curve.len(), count);
        for w in curve.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 <= w[1].1);
        }
        prop_assert!(curve.iter().all(|(_, d)| (0.0..=1.0).contains(d)));
        let m = mse_alpha(&curve).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn mse_alpha_vanishes_on_the_diagonal(count in 1usize..200) {
        let curve: Vec<_> = regular_levels(count).into_iter().map(|a| (a, a)).collect();
        prop_assert_eq!(mse_alpha(&curve).unwrap(), 0.0);
    }

    #[test]
    fn empirical_quantiles_are_monotone(draws in prop::collection::vec(-100.0..100.0f64, 1..200), p in 0.0..1.0f64, q in 0.0..1.0f64) {
        let d = PredictiveDistribution::from_draws(draws).unwrap();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(d.quantile(lo) <= d.quantile(hi));
        prop_assert!(d.quantile(0.0) <= d.mean() && d.mean() <= d.quantile(1.0));
    }

    #[test]
    fn subsample_indices_are_distinct(parent in 1usize..300, frac in 0.01..1.0f64, seed: u64) {
        let n = ((parent as f64 * frac).ceil() as usize).clamp(1, parent);
        let mut idx = subsample_indices(parent, n, seed).unwrap();
        prop_assert_eq!(&idx, &subsample_indices(parent, n, seed).unwrap());
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.iter().all(|&i| i < parent));
    }

    #[test]
    fn csv_round_trip_is_exact(n in 1usize..30, seed: u64, scale in 1e-6..1e6f64) {
        let pts = sample_uniform(Rect::new(-scale, scale, -1.0, 1.0), n, seed).unwrap();
        let values = pts.iter().map(|p| p.x * 1.1 - p.y / 3.0).collect();
        let ds = SpatialDataset::new(pts, values).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn summary_matches_direct_statistics(values in prop::collection::vec(-3.0..3.0f64, 1..30)) {
        let mut table = CriterionTable::new();
        for (r, v) in values.iter().enumerate() {
            table.rows.push(CriterionRow {
                experiment: "gp".into(),
                method: "ordinary".into(),
                covariance: "matern_1/2".into(),
                n: 16,
                replicate: r,
                criterion: "q2".into(),
                value: *v,
            });
        }
        let s = table.summary();
        prop_assert_eq!(s.len(), 1);
        let (q1, med, q3) = quartiles(&values);
        prop_assert_eq!(s[0].count, values.len());
        prop_assert_eq!((s[0].q1, s[0].median, s[0].q3), (q1, med, q3));
        prop_assert_eq!(table.median("ordinary", 16, "q2"), Some(median(&values)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kriging_interpolates_without_nugget(fam in family(), phi in 0.5..5.0f64, seed in 0u64..500) {
        let ds = small_field(12, seed);
        let k = Kernel::new(fam, phi, 0.0).unwrap();
        let model = match OkModel::with_kernel(&ds, k, None) {
            Ok(m) => m,
            // near-singular smooth kernels are rejected rather than interpolated
            Err(_) => return Ok(()),
        };
        let scale = ds.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for (p, z) in ds.positions().iter().zip(ds.values()) {
            let pred = model.predict(p).unwrap();
            prop_assert!((pred.mean - z).abs() < 1e-6 * scale, "{} vs {}", pred.mean, z);
            prop_assert!(pred.variance.abs() < 1e-6 * model.params().variance);
        }
        let w = model.weights(&krigeval::Point::new(5.0, 5.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn posterior_weights_sum_to_one(seed in 0u64..500, count in 1usize..40) {
        let ds = small_field(15, seed);
        let prior = PriorSpec::vague(PhiPrior::uniform_grid(0.2, 10.0, count).unwrap());
        let post = phi_posterior(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0), &prior).unwrap();
        let total: f64 = post.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(post.weights().iter().all(|w| *w >= 0.0));
    }
}
