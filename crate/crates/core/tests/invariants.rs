use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use tclab_core::levy::{JumpLaw, LevyModel};
use tclab_core::rng::{self, Phase};
use tclab_core::stats::ks_two_sample;
use tclab_core::time_change::{apply_time_change, phi_transform, Path};
use tclab_core::{parse_rate, Path32};

fn jump_law() -> impl Strategy<Value = JumpLaw> {
    prop_oneof![
        (0.1..3.0f64).prop_map(|mean| JumpLaw::ExponentialUp { mean }),
        (0.1..3.0f64).prop_map(|mean| JumpLaw::ExponentialDown { mean }),
        (0.1..3.0f64, 0.1..3.0f64, 0.05..0.95f64)
            .prop_map(|(u, d, p)| JumpLaw::TwoSidedExponential { mean_up: u, mean_down: d, p_up: p }),
    ]
}

fn model() -> impl Strategy<Value = LevyModel> {
    (-2.0..2.0f64, 0.1..4.0f64, 0.1..3.0f64, jump_law())
        .prop_map(|(a, s2, lam, j)| LevyModel::brownian_cp(a, s2, lam, j).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn char_exponent_is_hermitian(m in model(), q in -20.0..20.0f64) {
        let a = m.char_exponent(q);
        let b = m.char_exponent(-q);
        prop_assert!((a - b.conj()).norm() <= 1e-9 * (1.0 + a.norm()));
        prop_assert_eq!(m.char_exponent(0.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn laplace_exponent_is_convex(m in model(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let sup = m.mgf_domain_sup().min(5.0);
        let (a, b) = (0.95 * sup * u, 0.95 * sup * v);
        let mid = m.laplace_exponent(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (m.laplace_exponent(a) + m.laplace_exponent(b)) + 1e-9);
        prop_assert!(m.laplace_exponent(0.0).abs() < 1e-12);
    }

    #[test]
    fn jump_tails_are_monotone(j in jump_law(), u in 0.01..10.0f64, du in 0.0..5.0f64) {
        prop_assert!(j.upper_tail(u + du) <= j.upper_tail(u) + 1e-15);
        prop_assert!(j.lower_tail(-u - du) <= j.lower_tail(-u) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&j.upper_tail(u)));
    }

    #[test]
    fn phi_inverse_round_trips(b in -3.0..20.0f64, which in 0usize..3) {
        let src = ["exp(x)", "max(1,x)^2", "exp(x/2)*(1+x^2)"][which];
        let r = parse_rate(src).unwrap();
        let u = r.phi(b).unwrap();
        prop_assert!(u > 0.0);
        let back = r.phi_inverse(u).unwrap();
        prop_assert!((back - b).abs() <= 1e-6 * (1.0 + b.abs()), "{src}: {b} -> {u} -> {back}");
    }

    #[test]
    fn ks_statistic_is_symmetric(seed in any::<u64>(), n in 100usize..300, shift in 0.0..1.0f64) {
        let mut r = rng::stream(seed, 0, Phase::Study);
        let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..n + 17).map(|_| r.random::<f64>() + shift).collect();
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), i in 0u64..1000) {
        let x: u64 = rng::stream(seed, i, Phase::Path).random();
        prop_assert_eq!(x, rng::stream(seed, i, Phase::Path).random::<u64>());
        prop_assert_ne!(x, rng::stream(seed, i + 1, Phase::Path).random::<u64>());
        prop_assert_ne!(x, rng::stream(seed, i, Phase::Tilted).random::<u64>());
    }

    #[test]
    fn time_change_keeps_grid_order(steps in proptest::collection::vec(-1.0..1.0f64, 2..200), x0 in -2.0..2.0f64) {
        let mut v = vec![0.0];
        for s in &steps {
            v.push(v.last().unwrap() + s * 0.1);
        }
        let levy = Path::levy(v.clone(), 0.01);
        let rate = parse_rate("exp(x)").unwrap();
        let grid: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        let out = apply_time_change(&levy, &rate, x0, &grid);
        prop_assert!(out.times.windows(2).all(|w| w[0] <= w[1]));
        for y in &out.values {
            prop_assert!(v.iter().any(|u| (x0 + u - y).abs() < 1e-12), "value {y} not on the Lévy path");
        }
    }

    #[test]
    fn zero_shift_transform_is_identity(steps in proptest::collection::vec(-1.0..1.0f32, 2..100)) {
        let mut v = vec![0.0f32];
        for s in &steps {
            v.push(v.last().unwrap() + s);
        }
        let p: Path32 = Path::levy(v, 0.05);
        let rate = parse_rate("max(1,x)^2").unwrap();
        let q = phi_transform(&p, &rate, 0.0);
        prop_assert_eq!(&q.times, &p.times);
        prop_assert_eq!(&q.values, &p.values);
    }
}
