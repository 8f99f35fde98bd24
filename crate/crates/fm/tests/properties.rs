use lift3d_fm::*;
use proptest::prelude::*;

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|n| (vec_of(n), vec_of(n)))
}

proptest! {
    #[test]
    fn interpolation_is_homogeneous((x0, x1) in pairs(), tau in 0.0..=1.0f64, a in -5.0..5.0f64) {
        let scaled = interp_state(
            &x0.iter().map(|v| a * v).collect::<Vec<_>>(),
            &x1.iter().map(|v| a * v).collect::<Vec<_>>(),
            tau,
        ).unwrap();
        for (s, v) in scaled.iter().zip(interp_state(&x0, &x1, tau).unwrap()) {
            prop_assert!((s - a * v).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn target_is_antisymmetric((x0, x1) in pairs()) {
        let f = target_velocity(&x0, &x1).unwrap();
        let b = target_velocity(&x1, &x0).unwrap();
        prop_assert!(f.iter().zip(&b).all(|(p, q)| *p == -*q));
    }

    #[test]
    fn exact_target_field_zeroes_cfm_loss((x0, x1) in pairs(), taus in prop::collection::vec(0.0..=1.0f64, 1..8)) {
        let v = target_velocity(&x0, &x1).unwrap();
        let samples = taus.iter().enumerate().map(|(i, &t)| {
            FlowSample::single(Modality::ALL[i % 4], StatePair::new(x0.clone(), x1.clone()).unwrap(), None, t).unwrap()
        }).collect();
        let batch = FlowBatch::new(samples).unwrap();
        prop_assert_eq!(cfm_loss(&ConstantField(v), &batch, &ModalityWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn cfm_loss_is_nonnegative_and_linear_in_weights((x0, x1) in pairs(), k in vec_of(5), tau in 0.0..=1.0f64, s in 0.0..4.0f64) {
        let n = x0.len();
        let field = ConstantField(k[..n.min(5)].iter().copied().chain(std::iter::repeat(0.0)).take(n).collect());
        let batch = FlowBatch::new(vec![FlowSample::single(Modality::Shape, StatePair::new(x0, x1).unwrap(), None, tau).unwrap()]).unwrap();
        let base = cfm_loss(&field, &batch, &ModalityWeights::uniform(1.0)).unwrap();
        let scaled = cfm_loss(&field, &batch, &ModalityWeights { shape: s, ..ModalityWeights::uniform(1.0) }).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((scaled - s * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn constant_fields_are_self_consistent(k in vec_of(3), x in vec_of(3), j in 0u32..64, e in 1u32..7, w in -3.0..3.0f64) {
        let d = 0.5f64.powi(e as i32);
        let tau = (j as f64 * d).min(1.0 - 2.0 * d);
        let t = consistency_target(&ConstantField(k.clone()), Modality::Shape, &x, Some(&Condition::default()), tau, d, w).unwrap();
        for (a, b) in t.value().iter().zip(&k) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn dpo_delta_swaps_sign(a in vec_of(2), b in vec_of(2), va in vec_of(2), vb in vec_of(2), kt in vec_of(2), kr in vec_of(2)) {
        let (theta, reference) = (ConstantField(kt), ConstantField(kr));
        let w = Preferred { x_tau: &a, v: &va };
        let l = Preferred { x_tau: &b, v: &vb };
        let d1 = dpo_delta(&theta, &reference, Modality::Shape, w, l, None, 0.5).unwrap();
        let d2 = dpo_delta(&theta, &reference, Modality::Shape, l, w, None, 0.5).unwrap();
        prop_assert_eq!(d1, -d2);
    }

    #[test]
    fn dpo_loss_is_positive_and_monotone(d in -30.0..30.0f64, step in 0.01..5.0f64, beta in 0.01..10.0f64) {
        let c = DpoConfig::new(beta, 1.0).unwrap();
        let l = dpo_loss(d, &c, 0.5);
        prop_assert!(l > 0.0);
        prop_assert!(dpo_loss(d - step, &c, 0.5) < l);
    }

    #[test]
    fn nfe_matches_schedule(steps in 1usize..80, half in any::<bool>(), shortcut in any::<bool>()) {
        let vf = Counting::new(ConstantField(vec![0.0]));
        let config = SamplerConfig { steps, w_cfg: 2.0, cfg_half_schedule: half, shortcut_mode: shortcut };
        let out = euler_sample(&vf, Modality::Shape, &[0.0], Some(&Condition::default()), &config).unwrap();
        let expected = if shortcut { steps } else if half { steps + steps.div_ceil(2) } else { 2 * steps };
        prop_assert_eq!(out.nfe, expected);
        prop_assert_eq!(vf.count(), expected);
        prop_assert_eq!(config.expected_nfe(), expected);
    }
}
