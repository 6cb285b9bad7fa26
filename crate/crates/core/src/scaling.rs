//! Self-similar changes of variables `g(tau, z) = e^{2 tau} n(t(tau), e^tau z)`.

use serde::Serialize;

use crate::density::GriddedDensity;
use crate::kernel::KernelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScalingMap {
    pub kernel: KernelKind,
}

pub fn make_scaling(kernel: KernelKind) -> ScalingMap {
    ScalingMap { kernel }
}

impl ScalingMap {
    /// Original time reached at self-similar time `tau`.
    pub fn t_of_tau(&self, tau: f64) -> f64 {
        match self.kernel {
            KernelKind::Constant => tau.exp_m1(),
            KernelKind::Additive => 0.5 * tau,
            KernelKind::Multiplicative => -(-tau).exp_m1(),
        }
    }

    pub fn tau_of_t(&self, t: f64) -> f64 {
        match self.kernel {
            KernelKind::Constant => t.ln_1p(),
            KernelKind::Additive => 2.0 * t,
            KernelKind::Multiplicative => -(-t).ln_1p(),
        }
    }

    /// Length scale `s(t)`, with `s(t(tau)) = e^tau`.
    pub fn s_of_t(&self, t: f64) -> f64 {
        match self.kernel {
            KernelKind::Constant => 1.0 + t,
            KernelKind::Additive => (2.0 * t).exp(),
            KernelKind::Multiplicative => 1.0 / (1.0 - t),
        }
    }

    /// `T_*`: infinite unless the kernel gels.
    pub fn gelation_time(&self) -> f64 {
        match self.kernel {
            KernelKind::Multiplicative => 1.0,
            _ => f64::INFINITY,
        }
    }
}

/// `g(z) = e^{2 tau} n(e^tau z)`, realized exactly on the rescaled grid
/// `z_i = x_i e^{-tau}`; the extensions are mapped inside their family.
/// Use [`GriddedDensity::resample`] to move the result to another grid.
pub fn to_selfsimilar(n: &GriddedDensity, tau: f64, _map: &ScalingMap) -> GriddedDensity {
    if tau == 0.0 {
        return n.clone();
    }
    n.scaled((2.0 * tau).exp(), tau.exp())
}

/// Inverse of [`to_selfsimilar`]: `n(x) = e^{-2 tau} g(e^{-tau} x)`.
pub fn from_selfsimilar(g: &GriddedDensity, tau: f64, _map: &ScalingMap) -> GriddedDensity {
    if tau == 0.0 {
        return g.clone();
    }
    g.scaled((-2.0 * tau).exp(), (-tau).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::PowerExp;
    use crate::density::compute_moments;
    use crate::grid::default_size_grid;

    #[test]
    fn time_maps() {
        let c = make_scaling(KernelKind::Constant);
        assert!((c.t_of_tau(1.0) - 1.718_281_828_459_045).abs() < 1e-15);
        assert_eq!(make_scaling(KernelKind::Additive).t_of_tau(3.0), 1.5);
        let m = make_scaling(KernelKind::Multiplicative);
        assert!((m.t_of_tau(40.0) - 1.0).abs() < 1e-15);
        assert_eq!(m.gelation_time(), 1.0);
        assert!(c.gelation_time().is_infinite());
    }

    #[test]
    fn s_of_t_of_tau_is_exponential() {
        for k in KernelKind::ALL {
            let m = make_scaling(k);
            for i in 0..=40 {
                let tau = 0.5 * i as f64;
                // near the gel point t carries an absolute rounding of eps, which
                // 1/(1-t) amplifies by e^tau
                let slack = match k {
                    KernelKind::Multiplicative => 2.0 * f64::EPSILON * tau.exp(),
                    _ => 0.0,
                };
                let s = m.s_of_t(m.t_of_tau(tau));
                assert!((s / tau.exp() - 1.0).abs() < 1e-12 + slack, "{k} {tau}");
                assert!((m.tau_of_t(m.t_of_tau(tau)) - tau).abs() < 1e-12 * tau.max(1.0) + slack, "{k} {tau}");
            }
        }
    }

    #[test]
    fn time_change_matches_homogeneity() {
        // dt/dtau = s^{1-gamma} / k along s = e^tau
        for k in KernelKind::ALL {
            let m = make_scaling(k);
            for &tau in &[0.0, 0.7, 2.0] {
                let h = 1e-5;
                let dt = (m.t_of_tau(tau + h) - m.t_of_tau((tau - h).max(0.0))) / (tau + h - (tau - h).max(0.0));
                let expect = ((1.0 - k.gamma() as f64) * tau).exp() / k.k_constant();
                assert!((dt / expect - 1.0).abs() < 1e-5, "{k} {tau}");
            }
        }
    }

    #[test]
    fn constant_kernel_exact_solution_is_stationary() {
        let map = make_scaling(KernelKind::Constant);
        for &tau in &[0.5, 2.0, 4.0] {
            let t = map.t_of_tau(tau);
            let n = GriddedDensity::from_power_exp(PowerExp::new((1.0 + t).powi(-2), 1.0, 1.0 / (1.0 + t)), default_size_grid());
            let g = to_selfsimilar(&n, tau, &map);
            for (z, v) in g.grid.iter().zip(&g.values) {
                assert!((v / (-z).exp() - 1.0).abs() < 1e-12);
            }
            let back = from_selfsimilar(&GriddedDensity::from_power_exp(PowerExp::new(1.0, 1.0, 1.0), default_size_grid()), tau, &map);
            for (x, v) in back.grid.iter().zip(&back.values) {
                let expect = (1.0 + t).powi(-2) * (-x / (1.0 + t)).exp();
                assert!((v - expect).abs() <= 1e-12 * expect.max(1e-300));
            }
        }
    }

    #[test]
    fn moment_transport() {
        let map = make_scaling(KernelKind::Additive);
        let n = GriddedDensity::from_power_exp(PowerExp::new(13.5, 2.0, 3.0), default_size_grid());
        let mn = compute_moments(&n, 3).unwrap();
        let tau = 1.3;
        let mg = compute_moments(&to_selfsimilar(&n, tau, &map), 3).unwrap();
        for l in 0..=3 {
            let expect = ((1.0 - l as f64) * tau).exp() * mn.get(l);
            assert!((mg.get(l) / expect - 1.0).abs() < 1e-8, "M_{l}");
        }
    }

    #[test]
    fn round_trip() {
        let map = make_scaling(KernelKind::Multiplicative);
        let g = GriddedDensity::from_power_exp(PowerExp::new(13.5, 1.0, 3.0), default_size_grid());
        let back = to_selfsimilar(&from_selfsimilar(&g, 2.0, &map), 2.0, &map);
        for i in 0..g.len() {
            assert!((back.grid[i] / g.grid[i] - 1.0).abs() < 1e-14);
            if g.values[i] > 1e-290 {
                assert!((back.values[i] / g.values[i] - 1.0).abs() < 1e-13);
            }
        }
        assert_eq!(to_selfsimilar(&g, 0.0, &map), g);
    }
}
