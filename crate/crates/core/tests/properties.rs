use heartstate::signal::{error_metrics, estimate_hr, BvpSignal, DEFAULT_BAND};
use heartstate::ssm::{
    dual_form_apply, recurrent_scan, selective_scan, stability_project, zoh_discretize,
    zoh_input_gain, ComplexDiag, ContinuousSSM, SSMState,
};
use heartstate::temporal_norm::{rma_init, tn_batch};
use heartstate::Matrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn eigen() -> impl Strategy<Value = (f64, f64)> {
    (-5.0f64..-0.01, -20.0f64..20.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projected_diagonal_is_always_valid(re in prop::collection::vec(-3.0f64..3.0, 1..12)) {
        let im = vec![1.0; re.len()];
        let p = stability_project(&ComplexDiag::new_unchecked(re, im));
        prop_assert!(ComplexDiag::new(p.re().to_vec(), p.im().to_vec()).is_ok());
    }

    #[test]
    fn zoh_semigroup((re, im) in eigen(), dt in 0.001f64..0.2) {
        let l = Complex64::new(re, im);
        let one = (l * dt).exp();
        let two = (l * (2.0 * dt)).exp();
        prop_assert!((one * one - two).norm() <= 1e-12);
        // gain(2dt) = gain(dt)·(1 + ā)
        let g1 = zoh_input_gain(l, dt);
        let g2 = zoh_input_gain(l, 2.0 * dt);
        prop_assert!((g1 * (one + 1.0) - g2).norm() <= 1e-12 * g2.norm().max(1e-3));
    }

    #[test]
    fn free_response_decays((re, im) in eigen(), h0 in 0.1f64..10.0, dt in 0.01f64..0.1) {
        let a = ComplexDiag::new(vec![re], vec![im]).unwrap();
        let sys = zoh_discretize(&ContinuousSSM::siso(a, &[1.0], &[1.0], 0.0).unwrap(), dt).unwrap();
        let rho = sys.a_bar()[0].norm();
        let x = Matrix::<f64>::zeros(50, 1);
        let (_, end) = recurrent_scan(&x, &sys, &SSMState::from_vec(vec![Complex64::new(h0, 0.0)])).unwrap();
        prop_assert!(end.norm() <= h0 * rho.powi(50) * (1.0 + 1e-9));
        prop_assert!(end.norm() < h0);
    }

    #[test]
    fn dual_equals_selective_scan(
        eig in prop::collection::vec(eigen(), 1..6),
        t_len in 1usize..90,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = eig.len();
        let dt = 1.0 / 30.0;
        let a_bar: Vec<Complex64> = eig.iter().map(|&(r, i)| (Complex64::new(r, i) * dt).exp()).collect();
        let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let b_seq: Vec<Matrix<Complex64>> = (0..t_len).map(|_| Matrix::from_fn(n, 2, |_, _| c())).collect();
        let c_seq: Vec<Matrix<Complex64>> = (0..t_len).map(|_| Matrix::from_fn(3, n, |_, _| c())).collect();
        let x = Matrix::from_fn(t_len, 2, |_, _| c().re);
        let dual = dual_form_apply(&x, &b_seq, &c_seq, &a_bar).unwrap();
        let (rec, _) = selective_scan(&x, &b_seq, &c_seq, &a_bar, &SSMState::zeros(n)).unwrap();
        for (p, q) in dual.as_slice().iter().zip(rec.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn rmse_dominates_mae(pairs in prop::collection::vec((40.0f64..180.0, 40.0f64..180.0), 1..50)) {
        let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (mae, rmse) = error_metrics(&p, &g).unwrap();
        prop_assert!(mae >= 0.0);
        prop_assert!(rmse >= mae * (1.0 - 1e-12));
    }

    #[test]
    fn batch_tn_is_affine_invariant(
        xs in prop::collection::vec(-10.0f64..10.0, 8..64),
        scale in 0.5f64..4.0,
        offset in -100.0f64..100.0,
        slope in -1.0f64..1.0,
    ) {
        let base = tn_batch(&xs).unwrap();
        let moved: Vec<f64> = xs.iter().enumerate()
            .map(|(t, v)| scale * v + offset + slope * t as f64)
            .collect();
        let out = tn_batch(&moved).unwrap();
        let all_zero = base.iter().all(|&v| v == 0.0);
        if !all_zero {
            for (a, b) in base.iter().zip(&out) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rma_mean_stays_in_range(xs in prop::collection::vec(-5.0f64..5.0, 2..200), alpha in 0.5f64..0.999) {
        let mut s = rma_init(xs[0], alpha).unwrap();
        let (lo, hi) = xs.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        for &x in &xs[1..] {
            let y = s.step(x).unwrap();
            prop_assert!(y.is_finite());
            prop_assert!(s.mu >= lo - 1e-12 && s.mu <= hi + 1e-12);
        }
    }

    #[test]
    fn hr_estimate_is_scale_invariant(f in 0.8f64..2.8, k in prop::sample::select(vec![-4.0, -1.0, 0.5, 2.0, 1024.0])) {
        let x: Vec<f64> = (0..600).map(|t| (std::f64::consts::TAU * f * t as f64 / 30.0).sin()).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        let a = estimate_hr(&BvpSignal::new(x, 30.0, 0.0).unwrap(), DEFAULT_BAND).unwrap();
        let b = estimate_hr(&BvpSignal::new(scaled, 30.0, 0.0).unwrap(), DEFAULT_BAND).unwrap();
        // powers of two scale every intermediate exactly; other factors round
        if (k.abs() as f64).log2().fract() == 0.0 {
            prop_assert_eq!(a.bpm, b.bpm);
        } else {
            prop_assert!((a.bpm - b.bpm).abs() <= 1e-9 * a.bpm);
        }
    }
}
