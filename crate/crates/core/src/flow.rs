//! Transform-space evolution in self-similar variables.
//!
//! Constant kernel: the Laplace transform solves
//! `U_tau + eta U_eta + U = U^2`; along `eta = xi e^tau` the Riccati
//! equation integrates to `U = U_0 / (U_0 + (1 - U_0) e^tau)`.
//!
//! Additive kernel: the Bernstein transform solves
//! `U_tau = [(U - 2 eta) U_eta + U] / 2`, with characteristics
//! `U = U_0 e^{tau/2}`, `eta = (eta_0 - U_0) e^tau + U_0 e^{tau/2}`.
//!
//! Multiplicative kernel: `z g_mult` solves the additive equation, so the
//! flow of `B[x g]` is the additive flow.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::grid;
use crate::interp::Hermite;
use crate::kernel::KernelKind;
use crate::ode::{self, OdeOptions};
use crate::special::gauss_legendre;
use crate::transforms::{Sample, Source, TransformCurve, TransformKind};

/// Tolerance on the normalization moments a flow input must satisfy.
const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSolver {
    /// Explicit characteristic formulas.
    ClosedForm,
    /// Adaptive ODE integration along characteristics.
    OdeFallback,
}

#[derive(Debug, Clone, Copy)]
pub struct AddOptions {
    /// Refine between adjacent launch points whose images are farther apart
    /// (in `ln eta`) than this multiple of the target grid spacing.
    pub refine_factor: f64,
    /// Upper bound on the image gap in `ln eta`, so coarse target grids
    /// still get an accurate interpolant.
    pub max_log_gap: f64,
    pub max_refinements: usize,
}

impl Default for AddOptions {
    fn default() -> Self {
        AddOptions { refine_factor: 1.5, max_log_gap: 0.1, max_refinements: 40 }
    }
}

pub(crate) fn const_sample(base: &Source, tau: f64, eta: f64) -> Result<Sample> {
    let xi = eta * (-tau).exp();
    let s0 = base.sample(xi)?;
    if tau == 0.0 {
        return Ok(s0);
    }
    let m1 = base.m1();
    let e = tau.exp();
    let (p0, w0) = (s0.laplace, s0.bernstein);
    let den = p0 + w0 * e;
    Ok(Sample {
        laplace: p0 / den,
        bernstein: w0 * e / den,
        remainder: e * (s0.remainder + m1 * xi * w0 * tau.exp_m1()) / den,
        db: s0.db / (den * den),
    })
}

/// Image of a launch point under the additive characteristic map.
#[derive(Debug, Clone, Copy)]
struct Image {
    eta0: f64,
    eta: f64,
    b: f64,
    r: f64,
    db: f64,
    jac: f64,
}

fn add_image(base: &Source, m1: f64, tau: f64, eta0: f64) -> Result<Image> {
    let s = base.sample(eta0)?;
    let (eh, e) = ((0.5 * tau).exp(), tau.exp());
    // eta0 - B_0 = R_0 + (1 - m1) eta0
    let q0 = s.remainder + (1.0 - m1) * eta0;
    let jac = e * (1.0 - s.db) + s.db * eh;
    let b = s.bernstein * eh;
    let r = e * q0;
    Ok(Image { eta0, eta: r + b, b, r, db: s.db * eh / jac, jac })
}

fn foot(base: &Source, m1: f64, tau: f64, eta: f64) -> Result<(f64, Image)> {
    let (mut lo, mut hi) = ((eta * (-tau).exp()).ln(), (eta * (-0.5 * tau).exp()).ln());
    let mut u = 0.5 * (lo + hi);
    let mut img = add_image(base, m1, tau, u.exp())?;
    for _ in 0..200 {
        let f = img.eta - eta;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - f / (img.jac * img.eta0);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0);
        u = next;
        img = add_image(base, m1, tau, u.exp())?;
        if done {
            break;
        }
    }
    Ok((img.eta0, img))
}

pub(crate) fn add_sample(base: &Source, tau: f64, eta: f64) -> Result<Sample> {
    if tau == 0.0 {
        return base.sample(eta);
    }
    let (_, img) = foot(base, base.m1(), tau, eta)?;
    Ok(Sample { laplace: f64::NAN, bernstein: img.b, remainder: img.r, db: img.db })
}

/// Backward characteristic foot `X(0; tau, eta)` of the additive flow started from `initial`.
pub fn characteristic_foot(eta: f64, tau: f64, initial: &Source) -> Result<f64> {
    if tau == 0.0 {
        return Ok(eta);
    }
    Ok(foot(initial, initial.m1(), tau, eta)?.0)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(CoagError::Domain(format!("tau must be finite and nonnegative, got {tau}")));
    }
    Ok(())
}

fn const_base(u0: &TransformCurve) -> Result<Source> {
    if u0.kind != TransformKind::Laplace {
        return Err(CoagError::NonAdmissible("constant-kernel flow needs a Laplace transform".into()));
    }
    if let Some(v) = u0.values.iter().find(|&&v| !(v > 0.0 && v <= 1.0 + 1e-12)) {
        return Err(CoagError::NonAdmissible(format!("Laplace value {v} outside (0, 1]")));
    }
    let base = u0.evaluator()?;
    match base.m0() {
        Some(m0) if (m0 - 1.0).abs() <= NORMALIZATION_TOL => Ok(base),
        m0 => Err(CoagError::NonAdmissible(format!("U0(0+) = {m0:?}, expected 1"))),
    }
}

fn add_base(u0: &TransformCurve) -> Result<Source> {
    if u0.kind != TransformKind::Bernstein {
        return Err(CoagError::NonAdmissible("additive-kernel flow needs a Bernstein transform".into()));
    }
    if u0.signed {
        return Err(CoagError::NonAdmissible("cannot evolve a signed curve".into()));
    }
    let base = u0.evaluator()?;
    let m1 = base.m1();
    if (m1 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(CoagError::NonAdmissible(format!("slope at 0 is {m1}, expected 1")));
    }
    Ok(base)
}

/// Constant-kernel flow by the closed-form Riccati solution.
pub fn evolve_const(u0: &TransformCurve, tau: f64) -> Result<TransformCurve> {
    check_tau(tau)?;
    let base = const_base(u0)?;
    if tau == 0.0 {
        return Ok(u0.clone());
    }
    TransformCurve::from_source(Source::ConstFlow { base: Arc::new(base), tau }, &u0.etas, TransformKind::Laplace)
}

/// Additive-kernel flow: forward characteristics from an adaptive launch
/// grid, re-interpolated onto `u0.etas`.
pub fn evolve_add(u0: &TransformCurve, tau: f64) -> Result<TransformCurve> {
    evolve_add_with(u0, tau, AddOptions::default())
}

pub fn evolve_add_with(u0: &TransformCurve, tau: f64, opts: AddOptions) -> Result<TransformCurve> {
    check_tau(tau)?;
    let base = add_base(u0)?;
    if tau == 0.0 {
        return Ok(u0.clone());
    }
    let m1 = base.m1();
    let targets = &u0.etas;
    let spacing = targets.windows(2).map(|w| (w[1] / w[0]).ln()).fold(0.0f64, f64::max);
    let limit = (opts.refine_factor * spacing).min(opts.max_log_gap);

    let shrink = (-tau).exp();
    let mut launch: Vec<f64> = targets.iter().map(|e| e * shrink).chain(targets.iter().copied()).collect();
    launch.sort_by(f64::total_cmp);
    launch.dedup();
    let mut images: Vec<Image> = launch.par_iter().map(|&e| add_image(&base, m1, tau, e)).collect::<Result<_>>()?;

    for _ in 0..opts.max_refinements {
        let inserts: Vec<f64> = images
            .windows(2)
            .filter(|w| w[1].eta > w[0].eta && (w[1].eta / w[0].eta).ln() > limit)
            .map(|w| (w[0].eta0 * w[1].eta0).sqrt())
            .collect();
        if inserts.is_empty() {
            break;
        }
        let extra: Vec<Image> = inserts.par_iter().map(|&e| add_image(&base, m1, tau, e)).collect::<Result<_>>()?;
        images.extend(extra);
        images.sort_by(|a, b| a.eta0.total_cmp(&b.eta0));
    }

    for w in images.windows(2) {
        if !(w[1].eta > w[0].eta) || !(w[1].jac > 0.0) {
            return Err(CoagError::CharacteristicCrossing { eta0: w[1].eta0 });
        }
    }
    let (first, last) = (images[0].eta, images[images.len() - 1].eta);
    if first > targets[0] * (1.0 + 1e-12) || last < targets[targets.len() - 1] * (1.0 - 1e-12) {
        return Err(CoagError::Domain("launch grid does not cover the target range".into()));
    }

    let log_eta: Vec<f64> = images.iter().map(|i| i.eta.ln()).collect();
    let rem = Hermite::new(
        log_eta.clone(),
        images.iter().map(|i| i.r.ln()).collect(),
        images.iter().map(|i| i.eta * (1.0 - i.db) / i.r).collect(),
    );
    let bern =
        Hermite::new(log_eta.clone(), images.iter().map(|i| i.b.ln()).collect(), images.iter().map(|i| i.eta * i.db / i.b).collect());
    let mut samples = Vec::with_capacity(targets.len());
    for &eta in targets {
        let u = eta.ln();
        let r = rem.eval(u).exp();
        let (lb, dlb) = bern.eval_with_slope(u);
        let b = lb.exp();
        samples.push(Sample { laplace: f64::NAN, bernstein: b, remainder: r, db: dlb * b / eta });
    }
    let source = Source::AddFlow { base: Arc::new(base), tau };
    Ok(TransformCurve::from_samples(targets.clone(), TransformKind::Bernstein, &samples, None, 1.0, Some(source)))
}

/// Multiplicative-kernel flow of `B[x g]`; identical to the additive flow.
pub fn evolve_mult(u0: &TransformCurve, tau: f64) -> Result<TransformCurve> {
    evolve_add(u0, tau)
}

/// The transform each kernel's flow acts on.
pub fn flow_kind(kernel: KernelKind) -> TransformKind {
    match kernel {
        KernelKind::Constant => TransformKind::Laplace,
        _ => TransformKind::Bernstein,
    }
}

pub fn evolve(kernel: KernelKind, u0: &TransformCurve, tau: f64, solver: FlowSolver) -> Result<TransformCurve> {
    match (kernel, solver) {
        (KernelKind::Constant, FlowSolver::ClosedForm) => evolve_const(u0, tau),
        (KernelKind::Constant, FlowSolver::OdeFallback) => evolve_const_ode(u0, tau),
        (KernelKind::Additive, FlowSolver::ClosedForm) => evolve_add(u0, tau),
        (KernelKind::Multiplicative, FlowSolver::ClosedForm) => evolve_mult(u0, tau),
        (_, FlowSolver::OdeFallback) => evolve_add_ode(u0, tau),
    }
}

/// A flow together with its initial curve.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub kernel: KernelKind,
    pub tau: f64,
    pub curve: TransformCurve,
    pub initial_curve: TransformCurve,
}

impl FlowState {
    pub fn new(kernel: KernelKind, initial_curve: TransformCurve) -> Self {
        FlowState { kernel, tau: 0.0, curve: initial_curve.clone(), initial_curve }
    }

    /// Re-evaluates the flow from the initial curve at `tau`.
    pub fn at(&self, tau: f64, solver: FlowSolver) -> Result<FlowState> {
        let curve = evolve(self.kernel, &self.initial_curve, tau, solver)?;
        Ok(FlowState { kernel: self.kernel, tau, curve, initial_curve: self.initial_curve.clone() })
    }
}

/// `T_tau v(eta) = e^{-tau} v(eta e^{-tau})`, sampled on the shifted grid
/// `eta_i e^tau` so no interpolation is involved.
pub fn semigroup_apply(v: &TransformCurve, tau: f64) -> TransformCurve {
    let e = tau.exp();
    let d = (-tau).exp();
    TransformCurve {
        etas: v.etas.iter().map(|x| x * e).collect(),
        kind: v.kind,
        signed: v.signed,
        values: v.values.iter().map(|x| x * d).collect(),
        slopes: v.slopes.iter().map(|x| x * d * d).collect(),
        parts: None,
        source: None,
    }
}

/// Right side of the Duhamel formula for `u = U_1 - U_2` minus `u(tau)`:
/// `T_tau u_0 + int_0^tau T_{tau-s}[u(s) (U_1(s) + U_2(s))] ds - u(tau)`,
/// with the `s`-integral done by Gauss–Legendre on `nodes` points.
pub fn duhamel_residual_const(pair: (&TransformCurve, &TransformCurve), tau: f64, etas: &[f64], nodes: usize) -> Result<TransformCurve> {
    check_tau(tau)?;
    grid::validate(etas, "eta grid")?;
    let b1 = const_base(pair.0)?;
    let b2 = const_base(pair.1)?;
    let (x, w) = gauss_legendre(nodes.max(1));
    let flows: Vec<(Source, Source)> = x
        .iter()
        .map(|&xi| {
            let s = 0.5 * tau * (xi + 1.0);
            (Source::ConstFlow { base: Arc::new(b1.clone()), tau: s }, Source::ConstFlow { base: Arc::new(b2.clone()), tau: s })
        })
        .collect();
    let diff = |a: &Sample, b: &Sample, ma: (f64, f64), mb: (f64, f64), eta: f64| {
        (ma.0 - mb.0) - (ma.1 - mb.1) * eta + (a.remainder - b.remainder)
    };
    let m = |s: &Source| (s.m0().unwrap_or(1.0), s.m1());
    let (m_1, m_2) = (m(&b1), m(&b2));
    let residual: Vec<f64> = etas
        .par_iter()
        .map(|&eta| -> Result<f64> {
            let xi0 = eta * (-tau).exp();
            let u0 = diff(&b1.sample(xi0)?, &b2.sample(xi0)?, m_1, m_2, xi0);
            let mut acc = (-tau).exp() * u0;
            for (k, (f1, f2)) in flows.iter().enumerate() {
                let s = 0.5 * tau * (x[k] + 1.0);
                let xi = eta * (s - tau).exp();
                let (a, b) = (f1.sample(xi)?, f2.sample(xi)?);
                let u = diff(&a, &b, m_1, m_2, xi);
                acc += 0.5 * tau * w[k] * (s - tau).exp() * u * (a.laplace + b.laplace);
            }
            let end1 = Source::ConstFlow { base: Arc::new(b1.clone()), tau };
            let end2 = Source::ConstFlow { base: Arc::new(b2.clone()), tau };
            let u_tau = diff(&end1.sample(eta)?, &end2.sample(eta)?, m_1, m_2, eta);
            Ok(acc - u_tau)
        })
        .collect::<Result<_>>()?;
    TransformCurve::from_values(etas.to_vec(), residual, TransformKind::Laplace, true)
}

fn ode_opts() -> OdeOptions {
    OdeOptions { rtol: 1e-10, atol: 1e-300, max_steps: 100_000 }
}

/// Constant-kernel flow by integrating `P' = -P W`, `W' = P W`,
/// `R' = P R + m_1 eta W`, `eta' = eta` (and the variation of `P` with the
/// foot) along each characteristic.
pub fn evolve_const_ode(u0: &TransformCurve, tau: f64) -> Result<TransformCurve> {
    check_tau(tau)?;
    let base = const_base(u0)?;
    if tau == 0.0 {
        return Ok(u0.clone());
    }
    let m1 = base.m1();
    let samples: Vec<Sample> = u0
        .etas
        .par_iter()
        .map(|&eta| -> Result<Sample> {
            let xi = eta * (-tau).exp();
            let s0 = base.sample(xi)?;
            let y0 = [s0.laplace, s0.bernstein, s0.remainder, xi, -s0.db];
            let y = ode::integrate(
                |_, y, d| {
                    let (p, w, r, e, a) = (y[0], y[1], y[2], y[3], y[4]);
                    d[0] = -p * w;
                    d[1] = p * w;
                    d[2] = p * r + m1 * e * w;
                    d[3] = e;
                    d[4] = (2.0 * p - 1.0) * a;
                },
                0.0,
                &y0,
                tau,
                ode_opts(),
            )?;
            Ok(Sample { laplace: y[0], bernstein: y[1], remainder: y[2], db: -y[4] * (-tau).exp() })
        })
        .collect::<Result<_>>()?;
    Ok(TransformCurve::from_samples(u0.etas.clone(), TransformKind::Laplace, &samples, base.m0(), m1, None))
}

/// Additive-kernel flow by shooting: the characteristic system
/// `eta' = eta - U/2`, `U' = U/2` and its variational equations are
/// integrated from a trial foot, which Newton's method adjusts until the
/// characteristic lands on the target `eta`.
pub fn evolve_add_ode(u0: &TransformCurve, tau: f64) -> Result<TransformCurve> {
    check_tau(tau)?;
    let base = add_base(u0)?;
    if tau == 0.0 {
        return Ok(u0.clone());
    }
    let samples: Vec<Sample> = u0
        .etas
        .par_iter()
        .map(|&eta| -> Result<Sample> {
            let shoot = |eta0: f64| -> Result<[f64; 4]> {
                let s0 = base.sample(eta0)?;
                let y = ode::integrate(
                    |_, y, d| {
                        d[0] = y[0] - 0.5 * y[1];
                        d[1] = 0.5 * y[1];
                        d[2] = y[2] - 0.5 * y[3];
                        d[3] = 0.5 * y[3];
                    },
                    0.0,
                    &[eta0, s0.bernstein, 1.0, s0.db],
                    tau,
                    ode_opts(),
                )?;
                Ok([y[0], y[1], y[2], y[3]])
            };
            let (mut lo, mut hi) = ((eta * (-tau).exp()).ln(), (eta * (-0.5 * tau).exp()).ln());
            let mut u = 0.5 * (lo + hi);
            let mut y = shoot(u.exp())?;
            for _ in 0..100 {
                let f = y[0] - eta;
                if f > 0.0 {
                    hi = u;
                } else {
                    lo = u;
                }
                let newton = u - f / (y[2] * u.exp());
                let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                let done = (next - u).abs() <= 1e-14;
                u = next;
                y = shoot(u.exp())?;
                if done || f == 0.0 {
                    break;
                }
            }
            let db = y[3] / y[2];
            Ok(Sample { laplace: f64::NAN, bernstein: y[1], remainder: eta - y[1], db })
        })
        .collect::<Result<_>>()?;
    Ok(TransformCurve::from_samples(u0.etas.clone(), TransformKind::Bernstein, &samples, None, 1.0, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::density::GriddedDensity;
    use crate::grid::{default_eta_grid, default_size_grid, geometric};
    use crate::transforms::{bernstein, closed_form, laplace};

    fn gamma_add() -> TransformCurve {
        let f = GriddedDensity::from_power_exp(catalog::PowerExp::new(13.5, 2.0, 3.0), default_size_grid());
        bernstein(&f, &default_eta_grid()).unwrap()
    }

    #[test]
    fn constant_fixed_point() {
        let etas = default_eta_grid();
        let u0 = closed_form("const_profile_laplace", &etas).unwrap();
        for &tau in &[0.5, 3.0, 10.0] {
            let u = evolve_const(&u0, tau).unwrap();
            for (i, e) in etas.iter().enumerate() {
                assert!((u.values[i] - 1.0 / (1.0 + e)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn additive_fixed_point() {
        let etas = default_eta_grid();
        let u0 = closed_form("G_add_bernstein", &etas).unwrap();
        let u = evolve_add(&u0, 3.0).unwrap();
        for (i, e) in etas.iter().enumerate() {
            let expect = (1.0 + 2.0 * e).sqrt() - 1.0;
            assert!((u.values[i] / expect - 1.0).abs() < 1e-6, "{e}");
        }
    }

    #[test]
    fn tau_zero_is_identity() {
        let u0 = gamma_add();
        let u = evolve_add(&u0, 0.0).unwrap();
        assert_eq!(u.values, u0.values);
        assert_eq!(characteristic_foot(3.0, 0.0, &u0.evaluator().unwrap()).unwrap(), 3.0);
    }

    #[test]
    fn foot_round_trip_and_bound() {
        let u0 = closed_form("G_add_bernstein", &[1.0, 2.0]).unwrap();
        let src = u0.evaluator().unwrap();
        let x = characteristic_foot(4.0, 2.0, &src).unwrap();
        let b0 = (1.0 + 2.0 * x).sqrt() - 1.0;
        let forward = x * 2f64.exp() + b0 * (1f64.exp() - 2f64.exp());
        assert!((forward - 4.0).abs() < 1e-8);
        assert!(x <= 4.0 * (-1f64).exp());
    }

    #[test]
    fn delegation_is_bitwise() {
        let u0 = gamma_add();
        let a = evolve_add(&u0, 2.0).unwrap();
        let m = evolve_mult(&u0, 2.0).unwrap();
        assert_eq!(a.values, m.values);
        assert_eq!(a.parts, m.parts);
    }

    #[test]
    fn wrong_inputs_rejected() {
        let etas = geometric(1e-2, 1e2, 20);
        let l = closed_form("gamma(2,2)", &etas).unwrap();
        assert!(matches!(evolve_add(&l, 1.0), Err(CoagError::NonAdmissible(_))));
        let two = closed_form("exp(0.5)_laplace", &etas).unwrap();
        let scaled =
            TransformCurve::from_values(etas.clone(), two.values.iter().map(|v| 2.0 * v).collect(), TransformKind::Laplace, false).unwrap();
        assert!(matches!(evolve_const(&scaled, 1.0), Err(CoagError::NonAdmissible(_))));
        assert!(evolve_const(&l, -1.0).is_err());
    }

    #[test]
    fn ode_fallback_agrees() {
        let etas = geometric(1e-3, 1e3, 25);
        let l = laplace(&GriddedDensity::from_power_exp(catalog::lookup("gamma(2,2)").unwrap(), default_size_grid()), &etas).unwrap();
        let a = evolve_const(&l, 1.0).unwrap();
        let b = evolve_const_ode(&l, 1.0).unwrap();
        for i in 0..etas.len() {
            assert!((a.values[i] / b.values[i] - 1.0).abs() < 1e-8);
        }
        let u0 =
            TransformCurve::from_source(Source::Closed(catalog::PowerExp::new(13.5, 2.0, 3.0)), &etas, TransformKind::Bernstein).unwrap();
        let a = evolve_add(&u0, 1.0).unwrap();
        let b = evolve_add_ode(&u0, 1.0).unwrap();
        for i in 0..etas.len() {
            assert!((a.values[i] / b.values[i] - 1.0).abs() < 1e-6, "{} {} {}", etas[i], a.values[i], b.values[i]);
        }
    }

    #[test]
    fn duhamel_identical_inputs_vanish() {
        let etas = geometric(1e-2, 1e2, 15);
        let u = closed_form("gamma(2,2)", &etas).unwrap();
        let r = duhamel_residual_const((&u, &u), 1.0, &etas, 50).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn semigroup_norm_scaling() {
        let etas = geometric(1e-3, 1e3, 50);
        let v = closed_form("exp", &etas).unwrap().difference(&closed_form("gamma(2,2)", &etas).unwrap()).unwrap();
        let t = semigroup_apply(&v, 0.7);
        for i in 0..etas.len() {
            let lhs = t.values[i].abs() / t.etas[i].powf(1.5);
            let rhs = (-(2.5) * 0.7f64).exp() * v.values[i].abs() / etas[i].powf(1.5);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
