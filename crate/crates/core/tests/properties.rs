use proptest::prelude::*;

use fbm_harnack::bismut::BismutKernel;
use fbm_harnack::fbm::{covariance, kernel, kernel_dt, synthesize, VolterraSampler};
use fbm_harnack::fraccalc::rl_integral;
use fbm_harnack::harnack::TestFunction;
use fbm_harnack::sde::{coupled_solve, euler_solve};
use fbm_harnack::specialfn::{beta, gamma, gauss_2f1};
use fbm_harnack::{
    CouplingVariant, DriftFamily, DriftSpec, HurstParam, SampledPath, TimeGrid, WienerIncrements,
};

fn hurst() -> impl Strategy<Value = HurstParam> {
    (0.05f64..0.49).prop_map(|v| HurstParam::new(v).unwrap())
}

fn drift() -> impl Strategy<Value = DriftSpec> {
    (0usize..3, -2.0f64..2.0, -1.0f64..1.0).prop_map(|(k, a, c)| {
        let fam = [DriftFamily::Linear, DriftFamily::Sine, DriftFamily::Tanh][k];
        DriftSpec::new(fam, a, c).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hypergeometric_is_symmetric_in_a_b(a in -0.9f64..0.9, b in -0.9f64..0.9, c in 0.2f64..2.0, z in -20.0f64..0.0) {
        let x = gauss_2f1(a, b, c, z).unwrap();
        let y = gauss_2f1(b, a, c, z).unwrap();
        prop_assert!((x - y).abs() <= 1e-11 * x.abs().max(1.0));
    }

    #[test]
    fn hypergeometric_vanishing_parameter(b in -0.9f64..0.9, c in 0.2f64..2.0, z in -50.0f64..0.0) {
        prop_assert!((gauss_2f1(0.0, b, c, z).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beta_symmetry_and_recurrence(a in 0.05f64..5.0, b in 0.05f64..5.0) {
        let x = beta(a, b).unwrap();
        prop_assert!((x - beta(b, a).unwrap()).abs() <= 1e-13 * x);
        // B(a+1, b) = B(a, b) a / (a + b)
        prop_assert!((beta(a + 1.0, b).unwrap() - x * a / (a + b)).abs() <= 1e-12 * x);
    }

    #[test]
    fn gamma_reflection(x in 0.01f64..0.99) {
        let pi = std::f64::consts::PI;
        let lhs = gamma(x).unwrap() * gamma(1.0 - x).unwrap();
        prop_assert!((lhs * (pi * x).sin() / pi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_is_symmetric_and_bounded(h in hurst(), t in 0.0f64..5.0, s in 0.0f64..5.0) {
        let r = covariance(h, t, s).unwrap();
        prop_assert_eq!(r, covariance(h, s, t).unwrap());
        let (vt, vs) = (covariance(h, t, t).unwrap(), covariance(h, s, s).unwrap());
        prop_assert!(r * r <= vt * vs * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn kernel_is_positive_and_decreasing_in_t(h in hurst(), s in 0.01f64..1.0, gap in 0.01f64..2.0) {
        let t = s + gap;
        prop_assert!(kernel(h, t, s).unwrap() > 0.0);
        prop_assert!(kernel_dt(h, t, s).unwrap() < 0.0);
    }

    #[test]
    fn synthesis_is_linear(h in hurst(), seed in 0u64..1000, a in -3.0f64..3.0) {
        let grid = TimeGrid::new(1.0, 12).unwrap();
        let w1 = WienerIncrements::generate(&grid, seed, 0);
        let w2 = WienerIncrements::generate(&grid, seed, 1);
        let comb = WienerIncrements::from_values(w1.dw.iter().zip(&w2.dw).map(|(x, y)| a * x + y).collect());
        let (b1, b2, bc) = (
            synthesize(h, &grid, &w1).unwrap(),
            synthesize(h, &grid, &w2).unwrap(),
            synthesize(h, &grid, &comb).unwrap(),
        );
        for i in 0..=12 {
            prop_assert!((bc.values[i] - (a * b1.values[i] + b2.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn path_sampling_is_deterministic(seed in any::<u64>(), p in 0u64..1_000_000) {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let s = VolterraSampler::new(HurstParam::new(0.3).unwrap(), &grid).unwrap();
        prop_assert_eq!(s.sample_path(seed, p), s.sample_path(seed, p));
        prop_assert_ne!(s.sample_path(seed, p).0.dw, s.sample_path(seed, p + 1).0.dw);
    }

    #[test]
    fn riemann_liouville_semigroup(a in 0.1f64..0.45, b in 0.1f64..0.45) {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let f = SampledPath::from_fn_nodes(grid, |t| 1.0 + t * t).unwrap();
        let two = rl_integral(a, &rl_integral(b, &f).unwrap()).unwrap();
        let one = rl_integral(a + b, &f).unwrap();
        for i in (32..=256).step_by(32) {
            let (x, y) = (two.values()[i], one.values()[i]);
            // the inner result behaves like t^b at 0, which the linear
            // interpolant of the outer integral resolves only to O(Δ^b)
            prop_assert!(((x - y) / y).abs() < 1e-2, "node {i}: {x} vs {y}");
        }
    }

    #[test]
    fn euler_solution_starts_at_x0(x in -5.0f64..5.0, d in drift(), seed in 0u64..100) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let s = VolterraSampler::new(HurstParam::new(0.2).unwrap(), &grid).unwrap();
        let (_, b) = s.sample_path(seed, 0);
        let sol = euler_solve(x, &d, &b).unwrap();
        prop_assert_eq!(sol.values[0], x);
        prop_assert_eq!(sol.values.len(), 17);
    }

    #[test]
    fn coupled_paths_agree_after_coupling(x in -2.0f64..2.0, gap in 0.01f64..2.0, seed in 0u64..200, rem in any::<bool>()) {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let d = DriftSpec::new(DriftFamily::Sine, -1.0, 0.0).unwrap();
        let s = VolterraSampler::new(HurstParam::new(0.3).unwrap(), &grid).unwrap();
        let (_, b) = s.sample_path(seed, 0);
        let v = if rem { CouplingVariant::Rem31 } else { CouplingVariant::Thm31 };
        let c = coupled_solve(x, x + gap, &d, &b, v).unwrap();
        if let Some(tau) = c.tau_index {
            for i in tau..=64 {
                prop_assert_eq!(c.x.values[i], c.y.values[i]);
            }
            for i in tau..64 {
                prop_assert_eq!(c.u.values()[i], 0.0);
            }
        }
        let free = euler_solve(x, &d, &b).unwrap();
        prop_assert_eq!(&free.values, &c.x.values);
    }

    #[test]
    fn bismut_weight_is_linear_in_direction(y in -3.0f64..3.0, seed in 0u64..100) {
        let h = HurstParam::new(0.3).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let d = DriftSpec::new(DriftFamily::Tanh, -0.7, 0.1).unwrap();
        let s = VolterraSampler::new(h, &grid).unwrap();
        let k = BismutKernel::new(h, &grid).unwrap();
        let (w, b) = s.sample_path(seed, 3);
        let x = euler_solve(0.2, &d, &b).unwrap();
        let one = k.weight(&x, &w, &d, y).unwrap();
        let two = k.weight(&x, &w, &d, 2.0 * y).unwrap();
        prop_assert!((two.value - 2.0 * one.value).abs() <= 1e-12 * one.value.abs().max(1.0));
        prop_assert!((two.qv - 4.0 * one.qv).abs() <= 1e-12 * one.qv.max(1.0));
    }

    #[test]
    fn test_functions_respect_sup_norm(z in -1e3f64..1e3) {
        for f in [TestFunction::OnePlusHalfSin, TestFunction::Sigmoid01, TestFunction::ShiftedSigmoid, TestFunction::Sin] {
            prop_assert!(f.eval(z).abs() <= f.sup_norm());
        }
        prop_assert!(TestFunction::ShiftedSigmoid.eval(z) >= 1.0);
    }
}
