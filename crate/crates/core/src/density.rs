//! Densities on the half-line sampled on a size grid.
//!
//! Quadrature runs in `u = ln x`: the integrand `x f(x)` is integrated with
//! the trapezoid rule plus third-order Gregory end corrections when the grid
//! is geometric (plain log-trapezoid otherwise). Below the first and above
//! the last grid point the density is continued by optional analytic head
//! and tail extensions `c x^{-p} e^{-beta x}`, integrated in closed form.
//! Without a head the density is taken to vanish below the grid.

use serde::Serialize;

use crate::catalog::PowerExp;
use crate::error::{CoagError, Result};
use crate::grid;
use crate::interp::resample_loglog;
use crate::kernel::AdmissibleClass;

/// Moments already equal to one within this tolerance are left alone by
/// [`normalize_to_class`].
const NORMALIZED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GriddedDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Continuation on `(0, x_1]`.
    pub head: Option<PowerExp>,
    /// Continuation on `[x_M, inf)`.
    pub tail: Option<PowerExp>,
    /// Differences of densities; the nonnegativity invariant is suspended.
    pub signed: bool,
    /// Exact closed form, when the density is a catalog member.
    pub exact: Option<PowerExp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentVector {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub max_order: usize,
}

impl MomentVector {
    pub fn get(&self, order: usize) -> f64 {
        assert!(order <= self.max_order, "moment {order} not computed");
        [self.m0, self.m1, self.m2, self.m3, self.m4][order]
    }
}

/// Log-variable quadrature weights: `int f dx ~ sum w_i f(x_i)` over `[x_1, x_M]`.
pub fn quadrature_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    if n >= 8 && grid::is_log_uniform(xs) {
        let h = (xs[n - 1].ln() - xs[0].ln()) / (n - 1) as f64;
        const END: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
        for (i, wi) in w.iter_mut().enumerate() {
            let g = if i < 4 {
                END[i]
            } else if i >= n - 4 {
                END[n - 1 - i]
            } else {
                1.0
            };
            *wi = h * g * xs[i];
        }
    } else {
        let u: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        for i in 0..n {
            let left = if i > 0 { u[i] - u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] - u[i] } else { 0.0 };
            w[i] = 0.5 * (left + right) * xs[i];
        }
    }
    w
}

impl GriddedDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::build(grid, values, false)
    }

    pub fn new_signed(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::build(grid, values, true)
    }

    fn build(grid: Vec<f64>, values: Vec<f64>, signed: bool) -> Result<Self> {
        grid::validate(&grid, "size grid")?;
        if grid.len() != values.len() {
            return Err(CoagError::InvalidGrid(format!("{} grid points but {} values", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoagError::Domain("density values must be finite".into()));
        }
        if !signed && values.iter().any(|&v| v < 0.0) {
            return Err(CoagError::Domain("negative value in a nonnegative density".into()));
        }
        Ok(GriddedDensity { grid, values, head: None, tail: None, signed, exact: None })
    }

    /// Samples a catalog member; head, tail and closed form are all exact.
    pub fn from_power_exp(f: PowerExp, grid: Vec<f64>) -> Self {
        let values = grid.iter().map(|&x| f.eval(x)).collect();
        GriddedDensity { grid, values, head: Some(f), tail: Some(f), signed: false, exact: Some(f) }
    }

    pub fn with_head(mut self, head: Option<PowerExp>) -> Self {
        self.head = head;
        self.exact = None;
        self
    }

    pub fn with_tail(mut self, tail: Option<PowerExp>) -> Self {
        self.tail = tail;
        self.exact = None;
        self
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn x_max(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `x -> a f(b x)`, realized exactly by rescaling the grid.
    pub fn scaled(&self, a: f64, b: f64) -> Self {
        GriddedDensity {
            grid: self.grid.iter().map(|x| x / b).collect(),
            values: self.values.iter().map(|v| a * v).collect(),
            head: self.head.map(|e| e.scaled(a, b)),
            tail: self.tail.map(|e| e.scaled(a, b)),
            signed: self.signed,
            exact: self.exact.map(|e| e.scaled(a, b)),
        }
    }

    pub fn times_x(&self) -> Self {
        GriddedDensity {
            grid: self.grid.clone(),
            values: self.grid.iter().zip(&self.values).map(|(x, v)| x * v).collect(),
            head: self.head.map(|e| e.times_x()),
            tail: self.tail.map(|e| e.times_x()),
            signed: self.signed,
            exact: self.exact.map(|e| e.times_x()),
        }
    }

    /// Value at an arbitrary `x`: closed form if known, extensions outside
    /// the grid, log-log PCHIP inside.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_many(&[x])[0]
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        if let Some(e) = self.exact {
            return xs.iter().map(|&x| e.eval(x)).collect();
        }
        let inside = resample_loglog(&self.grid, &self.values, xs);
        xs.iter()
            .zip(inside)
            .map(|(&x, v)| {
                if x < self.x_min() {
                    self.head.map_or(0.0, |h| h.eval(x))
                } else if x > self.x_max() {
                    self.tail.map_or(0.0, |t| t.eval(x))
                } else {
                    v
                }
            })
            .collect()
    }

    /// The density on a new grid; extensions are kept.
    pub fn resample(&self, grid: Vec<f64>) -> Result<Self> {
        grid::validate(&grid, "size grid")?;
        let values = self.eval_many(&grid);
        Ok(GriddedDensity { grid, values, head: self.head, tail: self.tail, signed: self.signed, exact: self.exact })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn quadrature_weights(&self) -> Vec<f64> {
        quadrature_weights(&self.grid)
    }

    pub fn moments(&self, max_order: usize) -> Result<MomentVector> {
        compute_moments(self, max_order)
    }

    /// `sum` of `f` against `weight(x)` over the grid plus the extension
    /// integrals supplied by `ext(extension, lo, hi)`.
    pub(crate) fn integrate(
        &self,
        weights: &[f64],
        weight: impl Fn(f64) -> f64,
        ext: impl Fn(&PowerExp, f64, f64) -> f64,
    ) -> (f64, f64, f64) {
        let bulk: f64 = self.grid.iter().zip(&self.values).zip(weights).map(|((&x, &v), &w)| w * v * weight(x)).sum();
        let head = self.head.map_or(0.0, |h| ext(&h, 0.0, self.x_min()));
        let tail = self.tail.map_or(0.0, |t| ext(&t, self.x_max(), f64::INFINITY));
        (head, bulk, tail)
    }
}

/// Moments `M_0 .. M_max_order` by the documented quadrature.
///
/// A head extension that is not integrable against `x^l` gives `M_l = inf`
/// (the profiles with local blow-up have `M_0 = inf`); a tail extension that
/// is not integrable is an error.
pub fn compute_moments(f: &GriddedDensity, max_order: usize) -> Result<MomentVector> {
    if max_order > 4 {
        return Err(CoagError::Domain(format!("max_order {max_order} exceeds 4")));
    }
    if f.tail.is_none() {
        let last = f.values[f.len() - 1].abs();
        if last > 1e-14 * f.max_abs() {
            return Err(CoagError::Domain(format!("no tail extension and density has not decayed at x = {} (value {last:e})", f.x_max())));
        }
    }
    let weights = f.quadrature_weights();
    let mut m = [f64::NAN; 5];
    for (l, slot) in m.iter_mut().enumerate().take(max_order + 1) {
        let (head, bulk, tail) = f.integrate(&weights, |x| x.powi(l as i32), |e, lo, hi| e.partial_moment(l, lo, hi));
        if !tail.is_finite() {
            return Err(CoagError::MomentDivergence { order: l });
        }
        *slot = head + bulk + tail;
    }
    Ok(MomentVector { m0: m[0], m1: m[1], m2: m[2], m3: m[3], m4: m[4], max_order })
}

/// Rescales `f` to `x -> a f(b x)` so that both required moments of the class equal one.
///
/// Catalog densities use their closed-form moments, so the result is exact
/// in the family; others use [`compute_moments`].
pub fn normalize_to_class(f: &GriddedDensity, class: AdmissibleClass) -> Result<GriddedDensity> {
    if f.signed {
        return Err(CoagError::Domain("cannot normalize a signed density".into()));
    }
    let (p, q) = class.required_moments;
    let (mp, mq) = match f.exact {
        Some(e) => (e.moment(p), e.moment(q)),
        None => match compute_moments(f, q) {
            Ok(m) => (m.get(p), m.get(q)),
            Err(CoagError::MomentDivergence { order }) => return Err(CoagError::DegenerateDensity(format!("M_{order} diverges"))),
            Err(e) => return Err(e),
        },
    };
    for (idx, m) in [(p, mp), (q, mq)] {
        if !m.is_finite() || m <= 0.0 {
            return Err(CoagError::DegenerateDensity(format!("M_{idx} = {m}")));
        }
    }
    if (mp - 1.0).abs() <= NORMALIZED_TOL && (mq - 1.0).abs() <= NORMALIZED_TOL {
        return Ok(f.clone());
    }
    let b = mq / mp;
    let a = b.powi(p as i32 + 1) / mp;
    Ok(f.scaled(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, g_add, g_mult};
    use crate::grid::default_size_grid;
    use crate::kernel::KernelKind;

    fn sampled(f: PowerExp) -> GriddedDensity {
        GriddedDensity::from_power_exp(f, default_size_grid())
    }

    #[test]
    fn moments_of_exponential() {
        let m = compute_moments(&sampled(PowerExp::new(1.0, 1.0, 1.0)), 4).unwrap();
        for (l, expect) in [(0, 1.0), (1, 1.0), (2, 2.0), (3, 6.0), (4, 24.0)] {
            assert!((m.get(l) - expect).abs() < 1e-8 * expect, "M_{l} = {}", m.get(l));
        }
    }

    #[test]
    fn moments_of_gamma_density() {
        // direct integration: int 4 x^{l+1} e^{-2x} dx = 4 (l+1)! / 2^{l+2}
        let m = compute_moments(&sampled(catalog::lookup("gamma(2,2)").unwrap()), 2).unwrap();
        assert!((m.m0 - 1.0).abs() < 1e-8);
        assert!((m.m1 - 1.0).abs() < 1e-8);
        assert!((m.m2 - 1.5).abs() < 1e-8);
    }

    #[test]
    fn tail_machinery_for_profiles() {
        let a = compute_moments(&sampled(g_add()), 3).unwrap();
        assert!(a.m0.is_infinite());
        assert!((a.m1 - 1.0).abs() < 1e-6 && (a.m2 - 1.0).abs() < 1e-6);
        let m = compute_moments(&sampled(g_mult()), 4).unwrap();
        assert!((m.m3 - 1.0).abs() < 1e-6 && (m.m2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn divergent_tail_is_reported() {
        let f = sampled(PowerExp::new(1.0, 1.0, 1.0)).with_tail(Some(PowerExp::from_extension(2.5, 1e-3, 0.0)));
        match compute_moments(&f, 3) {
            Err(CoagError::MomentDivergence { order }) => assert_eq!(order, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn normalization_closed_form() {
        let f = sampled(PowerExp::new(2.0, 1.0, 2.0)).with_tail(Some(PowerExp::new(2.0, 1.0, 2.0)));
        assert!(f.exact.is_none());
        let n = normalize_to_class(&f, KernelKind::Constant.class()).unwrap();
        // a = b = 1/2 maps 2 e^{-2x} to e^{-x}
        for (x, v) in n.grid.iter().zip(&n.values) {
            assert!((v - (-x).exp()).abs() < 1e-7 * (-x).exp().max(1e-300), "{x}");
        }
        let e = sampled(PowerExp::new(1.0, 1.0, 1.0));
        assert_eq!(normalize_to_class(&e, KernelKind::Constant.class()).unwrap(), e);
        for k in KernelKind::ALL {
            let p = catalog::exact_profile(k);
            assert_eq!(normalize_to_class(&p, k.class()).unwrap(), p);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let z = GriddedDensity::new(default_size_grid(), vec![0.0; 600]).unwrap();
        assert!(matches!(normalize_to_class(&z, KernelKind::Constant.class()), Err(CoagError::DegenerateDensity(_))));
        let mult_on_exp = normalize_to_class(&sampled(g_add()), KernelKind::Constant.class());
        assert!(matches!(mult_on_exp, Err(CoagError::DegenerateDensity(_))));
    }

    #[test]
    fn constructor_validation() {
        assert!(GriddedDensity::new(vec![1.0, 2.0], vec![1.0, -1.0]).is_err());
        assert!(GriddedDensity::new_signed(vec![1.0, 2.0], vec![1.0, -1.0]).is_ok());
        assert!(GriddedDensity::new(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
