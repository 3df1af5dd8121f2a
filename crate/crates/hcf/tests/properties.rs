//! Property tests for the structural invariants: standardization round
//! trips, the two CRPS formulas, quantile monotonicity, KL non-negativity,
//! exhaustive shingle coverage, and event-window causality.

use proptest::prelude::*;

use hcf::data::{
    align_events, shingle_origins, window_at, FeatureAnchor, RawEvents, RawSeries, Scaler,
    ShinglePolicy,
};
use hcf::forecast::quantile_sorted;
use hcf::gaussian::{diag_gaussian_kl, GaussianVar};
use hcf::metrics::crps_empirical;
use hcf::tape::Tape;

proptest! {
    #[test]
    fn scaler_apply_invert_identity(
        raw in prop::collection::vec(-1e3f64..1e3, 4..120),
        dim in 1usize..4,
    ) {
        let n = (raw.len() / dim).max(2);
        let values: Vec<f64> = raw.iter().copied().take(n * dim).collect();
        prop_assume!(values.len() == n * dim);
        let names = (0..dim).map(|i| format!("v{i}")).collect();
        let series = RawSeries::new(0, 3600, values.clone(), names).unwrap();
        // Constant columns are legitimately rejected; skip those draws.
        let Ok(scaler) = Scaler::fit(&series, n) else {
            return Ok(());
        };
        let mut buf = values.clone();
        scaler.apply_rows(&mut buf);
        scaler.invert_rows(&mut buf);
        for (a, b) in buf.iter().zip(&values) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn crps_integral_equals_energy_form(
        samples in prop::collection::vec(-50f64..50.0, 1..40),
        x in -60f64..60.0,
    ) {
        let integral = crps_empirical(&samples, x).unwrap();
        let m = samples.len() as f64;
        let term1: f64 = samples.iter().map(|s| (s - x).abs()).sum::<f64>() / m;
        let mut term2 = 0.0;
        for a in &samples {
            for b in &samples {
                term2 += (a - b).abs();
            }
        }
        let energy = term1 - term2 / (2.0 * m * m);
        prop_assert!((integral - energy).abs() < 1e-9 * (1.0 + energy.abs()));
        prop_assert!(integral >= -1e-12);
    }

    #[test]
    fn quantiles_are_monotone_in_the_level(
        mut samples in prop::collection::vec(-100f64..100.0, 1..60),
        levels in prop::collection::vec(0.01f64..0.99, 2..12),
    ) {
        samples.sort_by(f64::total_cmp);
        let mut sorted_levels = levels.clone();
        sorted_levels.sort_by(f64::total_cmp);
        let qs: Vec<f64> = sorted_levels.iter().map(|&p| quantile_sorted(&samples, p)).collect();
        for w in qs.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn kl_divergence_is_non_negative(
        mq in prop::collection::vec(-3f64..3.0, 1..6),
        lq in prop::collection::vec(-3f64..3.0, 1..6),
        mp in prop::collection::vec(-3f64..3.0, 1..6),
        lp in prop::collection::vec(-3f64..3.0, 1..6),
    ) {
        let d = mq.len().min(lq.len()).min(mp.len()).min(lp.len());
        let tape = Tape::new();
        let q = GaussianVar {
            mean: tape.vector(mq[..d].to_vec()),
            log_var: tape.vector(lq[..d].to_vec()),
        };
        let p = GaussianVar {
            mean: tape.vector(mp[..d].to_vec()),
            log_var: tape.vector(lp[..d].to_vec()),
        };
        let kl = diag_gaussian_kl(&q, &p).unwrap().item();
        prop_assert!(kl >= -1e-12, "kl = {kl}");
    }

    #[test]
    fn exhaustive_shingling_covers_each_origin_once(
        t_total in 2usize..400,
        width in 1usize..400,
    ) {
        prop_assume!(width <= t_total);
        let origins = shingle_origins(t_total, width, &ShinglePolicy::Exhaustive, None).unwrap();
        prop_assert_eq!(origins.len(), t_total - width + 1);
        for (i, o) in origins.iter().enumerate() {
            prop_assert_eq!(*o, i + 1);
        }
    }

    #[test]
    fn aligned_events_never_leak_the_future(
        offsets in prop::collection::vec(1i64..30_000, 0..25),
        origin in 1usize..30,
        t_past in 4usize..20,
    ) {
        let total = 60usize;
        let horizon = 6usize;
        prop_assume!(origin - 1 + t_past + horizon <= total);
        let values: Vec<f64> = (0..total).map(|i| (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
        let series = RawSeries::new(0, 3600, values, vec!["v".into()]).unwrap();
        let scaler = Scaler::fit(&series, total).unwrap();
        let anchor = FeatureAnchor::fit(0, series.timestamp_at(total - 1)).unwrap();
        let window = window_at(&series, &scaler, &anchor, origin, t_past, horizon, true).unwrap();

        // Strictly increasing event times scattered over the whole series.
        let mut t = -3600i64;
        let mut records = Vec::new();
        for (i, off) in offsets.iter().enumerate() {
            t += off;
            records.push((t, i % 2 + 1));
        }
        let events = RawEvents { records, type_names: vec!["up".into(), "down".into()] };
        let ew = align_events(&events, &window, &anchor, None).unwrap();

        // Causality plus telescoping reconstruction within 1e-9.
        let in_window: Vec<f64> = events
            .records
            .iter()
            .map(|&(e, _)| window.local_position(e))
            .filter(|&p| p > 0.0 && p <= t_past as f64)
            .collect();
        prop_assert_eq!(ew.len(), in_window.len());
        let reference = events
            .records
            .iter()
            .map(|&(e, _)| window.local_position(e))
            .filter(|&p| p <= 0.0)
            .fold(1.0 - origin as f64, f64::max);
        let mut pos = reference;
        for (d, expect) in ew.deltas.iter().zip(&in_window) {
            prop_assert!(*d >= 0.0);
            pos += d;
            prop_assert!((pos - expect).abs() < 1e-9);
            prop_assert!(pos <= t_past as f64 + 1e-12);
        }
        prop_assert!(ew.end_delta >= -1e-12);
        if !ew.is_empty() {
            prop_assert!((pos + ew.end_delta - t_past as f64).abs() < 1e-9);
        }
    }
}
