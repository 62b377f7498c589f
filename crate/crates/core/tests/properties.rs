use isnmf::audio::{discard_silence, frame_count, stft_power};
use isnmf::report::{read_csv, write_csv, TracePoint, TrainReport};
use isnmf::{
    aux_value, is_divergence, rescale_dictionary, sample_stats, solve_h, update_w, Dictionary, NonnegMatrix,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = NonnegMatrix> {
    prop::collection::vec(1e-3f64..10.0, rows * cols)
        .prop_map(move |data| NonnegMatrix::from_col_major(rows, cols, data).unwrap())
}

fn model(w: &NonnegMatrix, h: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|f| h.iter().enumerate().map(|(k, hk)| w.get(f, k) * hk).sum())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_is_scale_invariant(
        pairs in prop::collection::vec((1e-2f64..1e2, 1e-2f64..1e2), 1..40),
        log_scale in -4.0f64..4.0,
    ) {
        let (y, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let s = 10f64.powf(log_scale);
        let d = is_divergence(&y, &x, 1e-300).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * s).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
        let ds = is_divergence(&ys, &xs, 1e-300).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - ds).abs() <= 1e-10 * d.max(1e-300));
    }

    #[test]
    fn solve_h_never_increases_the_divergence(
        w in matrix(6, 3),
        v in prop::collection::vec(0.0f64..5.0, 6),
        iters in 1usize..30,
    ) {
        let eps = 1e-12;
        let h0 = vec![1.0; 3];
        let before = is_divergence(&v, &model(&w, &h0), eps).unwrap();
        let h = solve_h(&v, &w, &h0, iters, eps).unwrap();
        let after = is_divergence(&v, &model(&w, &h), eps).unwrap();
        prop_assert!(h.iter().all(|&x| x > 0.0 && x.is_finite()));
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn update_w_minimizes_the_auxiliary(
        a in matrix(3, 2),
        b in matrix(3, 2),
        factors in prop::collection::vec(0.2f64..5.0, 6),
    ) {
        let w = update_w(&a, &b, &NonnegMatrix::filled(3, 2, 1.0).unwrap()).unwrap();
        let probe = NonnegMatrix::from_col_major(
            3, 2, w.as_slice().iter().zip(&factors).map(|(x, f)| x * f).collect(),
        ).unwrap();
        let best = aux_value(&a, &b, &w).unwrap();
        prop_assert!(best <= aux_value(&a, &b, &probe).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn rescaling_preserves_wh_and_the_fixed_point(
        w in matrix(5, 3),
        h in matrix(3, 4),
        v in prop::collection::vec(1e-2f64..5.0, 5),
    ) {
        let stats = sample_stats(&v, &w, h.col(0), 1e-12).unwrap();
        let w_fixed = update_w(&stats.a, &stats.b, &w).unwrap();
        let mut dict = Dictionary::new(w_fixed.clone(), stats.a, stats.b).unwrap();
        let mut h_scaled = h.clone();
        rescale_dictionary(&mut dict, Some(&mut h_scaled)).unwrap();
        prop_assert!(dict.w().column_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        let before = w_fixed.matmul(&h).unwrap();
        let after = dict.w().matmul(&h_scaled).unwrap();
        for (x, y) in before.as_slice().iter().zip(after.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
        let again = update_w(dict.a(), dict.b(), dict.w()).unwrap();
        for (x, y) in again.as_slice().iter().zip(dict.w().as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn stft_frame_count_formula(len in 64usize..3000, hop_div in 1usize..=8) {
        let window = 64;
        let hop = window / hop_div;
        let samples = vec![0.25; len];
        let spec = stft_power(&samples, window, hop).unwrap();
        prop_assert_eq!(spec.cols(), (len - window) / hop + 1);
        prop_assert_eq!(spec.cols(), frame_count(len, window, hop));
        prop_assert_eq!(spec.rows(), window / 2 + 1);
    }

    #[test]
    fn silence_filter_keeps_order_and_counts(
        powers in prop::collection::vec(prop_oneof![Just(0.0), 1e-9f64..1e-7, 1e-3f64..10.0], 1..50),
    ) {
        prop_assume!(powers.iter().any(|&p| p > 0.0));
        let spec = NonnegMatrix::from_col_major(1, powers.len(), powers.clone()).unwrap();
        let ds = discard_silence(&spec, -60.0).unwrap();
        let loudest = powers.iter().cloned().fold(0.0, f64::max);
        let expected: Vec<usize> = (0..powers.len())
            .filter(|&i| powers[i] > 0.0 && powers[i] >= loudest * 1e-6)
            .collect();
        let kept: Vec<usize> = ds.frame_meta.iter().map(|m| m.frame).collect();
        prop_assert_eq!(&kept, &expected);
        prop_assert_eq!(ds.discarded_count + kept.len(), powers.len());
    }

    #[test]
    fn trace_csv_roundtrip_is_exact(
        points in prop::collection::vec(
            (0u64..1_000_000, 0.0f64..1e4, prop::option::of(-1e3f64..1e3), prop::option::of(0.0f64..1e3)),
            1..20,
        ),
        seed in any::<u64>(),
    ) {
        let mut report = TrainReport::new("online-warm-r0.7-b1000-s1", seed, "k=8 epsilon=0.000000000001");
        report.points = points
            .into_iter()
            .map(|(samples, seconds, train, heldout)| TracePoint {
                samples,
                seconds,
                train_objective: train,
                heldout_objective: heldout,
            })
            .collect();
        let mut bytes = Vec::new();
        write_csv(std::slice::from_ref(&report), &mut bytes).unwrap();
        let back = read_csv(&bytes[..]).unwrap();
        prop_assert_eq!(back, vec![report]);
    }
}
