//! Property tests over random members of the power-times-exponential family.

use proptest::prelude::*;

use coag_core::flow::{characteristic_foot, evolve_add, evolve_mult, semigroup_apply};
use coag_core::grid::geometric;
use coag_core::metrics::weighted_sup;
use coag_core::{
    bernstein, compute_moments, laplace, mult_bernstein, normalize_to_class, GriddedDensity, KernelKind, PowerExp, TransformCurve,
};

fn size_grid() -> Vec<f64> {
    geometric(1e-4, 1e3, 300)
}

fn eta_grid() -> Vec<f64> {
    geometric(1e-4, 1e4, 120)
}

/// Sampled density whose moments and transforms come from quadrature only.
fn sampled(f: PowerExp) -> GriddedDensity {
    let g = GriddedDensity::from_power_exp(f, size_grid());
    let (h, t) = (g.head, g.tail);
    g.with_head(h).with_tail(t)
}

fn power_exp() -> impl Strategy<Value = PowerExp> {
    (0.2f64..5.0, 1.0f64..4.0, 0.5f64..3.0).prop_map(|(c, k, theta)| PowerExp::new(c, k, theta))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn const_pair_difference(f: PowerExp, g: PowerExp) -> TransformCurve {
    let class = KernelKind::Constant.class();
    let etas = eta_grid();
    let a = laplace(&normalize_to_class(&sampled(f), class).unwrap(), &etas).unwrap();
    let b = laplace(&normalize_to_class(&sampled(g), class).unwrap(), &etas).unwrap();
    a.difference(&b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_is_idempotent(f in power_exp(), kernel in prop_oneof![Just(KernelKind::Constant), Just(KernelKind::Additive)]) {
        let once = normalize_to_class(&sampled(f), kernel.class()).unwrap();
        let twice = normalize_to_class(&once, kernel.class()).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            prop_assert!(close(*a, *b, 1e-9));
        }
        let (p, q) = kernel.class().required_moments;
        let m = compute_moments(&once, q).unwrap();
        prop_assert!(close(m.get(p), 1.0, 1e-9) && close(m.get(q), 1.0, 1e-9));
    }

    #[test]
    fn moments_scale_homogeneously(f in power_exp(), a in 0.1f64..10.0, b in 0.5f64..2.0) {
        let g = sampled(f);
        let m = compute_moments(&g, 3).unwrap();
        let ms = compute_moments(&g.scaled(a, b), 3).unwrap();
        for l in 0..=3 {
            let expect = a * b.powi(-(l as i32) - 1) * m.get(l);
            prop_assert!(close(ms.get(l), expect, 1e-12), "l = {}: {} vs {}", l, ms.get(l), expect);
        }
    }

    #[test]
    fn laplace_is_linear(f in power_exp(), g in power_exp(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = size_grid();
        let fv: Vec<f64> = grid.iter().map(|&x| f.eval(x)).collect();
        let gv: Vec<f64> = grid.iter().map(|&x| g.eval(x)).collect();
        let mix: Vec<f64> = fv.iter().zip(&gv).map(|(x, y)| a * x + b * y).collect();
        let etas = eta_grid();
        let lf = laplace(&GriddedDensity::new(grid.clone(), fv).unwrap(), &etas).unwrap();
        let lg = laplace(&GriddedDensity::new(grid.clone(), gv).unwrap(), &etas).unwrap();
        let lm = laplace(&GriddedDensity::new_signed(grid, mix).unwrap(), &etas).unwrap();
        let combo = lf.combine(a, &lg, b).unwrap();
        let scale = lf.values[0].abs().max(lg.values[0].abs());
        for (x, y) in lm.values.iter().zip(&combo.values) {
            prop_assert!((x - y).abs() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
        }
    }

    #[test]
    fn bernstein_shape(f in power_exp()) {
        let g = normalize_to_class(&sampled(f), KernelKind::Additive.class()).unwrap();
        let u = bernstein(&g, &eta_grid()).unwrap();
        for i in 0..u.len() {
            prop_assert!(u.values[i] > 0.0 && u.values[i] <= u.etas[i] * (1.0 + 1e-12));
            prop_assert!(u.slopes[i] >= 0.0 && u.slopes[i] <= 1.0 + 1e-12);
            if i > 0 {
                prop_assert!(u.values[i] >= u.values[i - 1]);
                prop_assert!(u.slopes[i] <= u.slopes[i - 1] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn weighted_norm_axioms(f in power_exp(), g in power_exp(), h in power_exp(), s in -4.0f64..4.0, kappa in 1.1f64..2.0) {
        let v = const_pair_difference(f, g);
        let w = const_pair_difference(g, h);
        let (nv, nw) = (weighted_sup(&v, kappa).unwrap(), weighted_sup(&w, kappa).unwrap());
        let scaled = v.combine(s, &v, 0.0).unwrap();
        prop_assert!(close(weighted_sup(&scaled, kappa).unwrap(), s.abs() * nv, 1e-12));
        let sum = v.combine(1.0, &w, 1.0).unwrap();
        prop_assert!(weighted_sup(&sum, kappa).unwrap() <= (nv + nw) * (1.0 + 1e-6));
    }

    #[test]
    fn semigroup_scales_the_norm(f in power_exp(), g in power_exp(), tau in 0.0f64..3.0, kappa in 1.1f64..2.0) {
        let v = const_pair_difference(f, g);
        let before = weighted_sup(&v, kappa).unwrap();
        prop_assume!(before > 1e-12);
        let after = weighted_sup(&semigroup_apply(&v, tau), kappa).unwrap();
        prop_assert!(close(after, (-(1.0 + kappa) * tau).exp() * before, 1e-12));
    }

    #[test]
    fn multiplicative_flow_is_the_additive_flow(f in power_exp(), tau in 0.0f64..4.0) {
        let g = normalize_to_class(&sampled(f), KernelKind::Multiplicative.class()).unwrap();
        let u0 = mult_bernstein(&g, &eta_grid()).unwrap();
        prop_assert_eq!(evolve_mult(&u0, tau).unwrap().values, evolve_add(&u0, tau).unwrap().values);
    }

    #[test]
    fn backward_foot_bound(f in power_exp(), tau in 0.0f64..6.0, eta in 1e-4f64..1e4) {
        let g = normalize_to_class(&sampled(f), KernelKind::Additive.class()).unwrap();
        let src = bernstein(&g, &eta_grid()).unwrap().evaluator().unwrap();
        let x = characteristic_foot(eta, tau, &src).unwrap();
        prop_assert!(x > 0.0 && x <= eta * (-0.5 * tau).exp() * (1.0 + 1e-12));
    }
}
