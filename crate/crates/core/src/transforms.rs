//! Laplace and Bernstein transforms.
//!
//! Transforms are carried together with the remainder
//! `R(eta) = int (e^{-eta x} - 1 + eta x) g(x) dx >= 0`, so that
//! `L = M_0 - M_1 eta + R` and `B = M_1 eta - R`. Differences of transforms
//! of densities with matched moments are then differences of remainders,
//! which keeps the small-`eta` end free of cancellation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, PowerExp};
use crate::density::GriddedDensity;
use crate::error::{CoagError, Result};
use crate::flow;
use crate::grid;
use crate::interp::{pchip_slopes, Hermite};
use crate::special::{exp_remainder, one_minus_exp, Weight};

/// Relative tolerance for treating the moments of two curves as equal.
pub const MOMENT_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Laplace,
    Bernstein,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Laplace => "laplace",
            TransformKind::Bernstein => "bernstein",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = CoagError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplace" => Ok(TransformKind::Laplace),
            "bernstein" => Ok(TransformKind::Bernstein),
            other => Err(CoagError::UnknownName(format!("transform kind '{other}'"))),
        }
    }
}

/// Everything known about a transform at one `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Laplace value; NaN when `M_0` is infinite.
    pub laplace: f64,
    pub bernstein: f64,
    pub remainder: f64,
    /// `int x e^{-eta x} g dx`, the Bernstein slope.
    pub db: f64,
}

impl Sample {
    pub fn value(&self, kind: TransformKind) -> f64 {
        match kind {
            TransformKind::Laplace => self.laplace,
            TransformKind::Bernstein => self.bernstein,
        }
    }

    pub fn slope(&self, kind: TransformKind) -> f64 {
        match kind {
            TransformKind::Laplace => -self.db,
            TransformKind::Bernstein => self.db,
        }
    }
}

/// Pointwise evaluator behind a curve, used wherever values off the grid are needed.
#[derive(Debug, Clone)]
pub enum Source {
    Closed(PowerExp),
    Quadrature(Arc<QuadratureSource>),
    Interpolated(Arc<CurveInterp>),
    /// Constant-kernel flow of `base` for time `tau`.
    ConstFlow {
        base: Arc<Source>,
        tau: f64,
    },
    /// Additive-kernel flow of `base` for time `tau`.
    AddFlow {
        base: Arc<Source>,
        tau: f64,
    },
}

impl Source {
    pub fn for_density(f: &GriddedDensity) -> Source {
        match f.exact {
            Some(e) => Source::Closed(e),
            None => Source::Quadrature(Arc::new(QuadratureSource::new(f.clone()))),
        }
    }

    /// `M_0`, if finite.
    pub fn m0(&self) -> Option<f64> {
        match self {
            Source::Closed(e) => Some(e.moment(0)).filter(|m| m.is_finite()),
            Source::Quadrature(q) => q.m0,
            Source::Interpolated(c) => c.m0,
            Source::ConstFlow { base, .. } => base.m0(),
            Source::AddFlow { .. } => None,
        }
    }

    pub fn m1(&self) -> f64 {
        match self {
            Source::Closed(e) => e.moment(1),
            Source::Quadrature(q) => q.m1,
            Source::Interpolated(c) => c.m1,
            Source::ConstFlow { base, .. } => base.m1(),
            Source::AddFlow { .. } => 1.0,
        }
    }

    pub fn sample(&self, eta: f64) -> Result<Sample> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(CoagError::Domain(format!("eta must be positive and finite, got {eta}")));
        }
        match self {
            Source::Closed(e) => Ok(closed_sample(e, eta)),
            Source::Quadrature(q) => Ok(q.sample(eta)),
            Source::Interpolated(c) => Ok(c.sample(eta)),
            Source::ConstFlow { base, tau } => flow::const_sample(base, *tau, eta),
            Source::AddFlow { base, tau } => flow::add_sample(base, *tau, eta),
        }
    }
}

fn closed_sample(e: &PowerExp, eta: f64) -> Sample {
    let laplace = if e.k > 0.0 { e.laplace(eta) } else { f64::NAN };
    Sample { laplace, bernstein: e.bernstein(eta), remainder: e.remainder(eta), db: e.first_moment_laplace(eta) }
}

/// Quadrature transforms of a gridded density (weights computed once).
#[derive(Debug)]
pub struct QuadratureSource {
    pub density: GriddedDensity,
    weights: Vec<f64>,
    pub m0: Option<f64>,
    pub m1: f64,
}

impl QuadratureSource {
    pub fn new(density: GriddedDensity) -> Self {
        let weights = density.quadrature_weights();
        let moment = |l: usize| {
            let (h, b, t) = density.integrate(&weights, |x| x.powi(l as i32), |e, lo, hi| e.partial_moment(l, lo, hi));
            h + b + t
        };
        let m0 = Some(moment(0)).filter(|m| m.is_finite());
        let m1 = moment(1);
        QuadratureSource { density, weights, m0, m1 }
    }

    pub fn sample(&self, eta: f64) -> Sample {
        let f = &self.density;
        let (mut p, mut b, mut r, mut db) = (0.0, 0.0, 0.0, 0.0);
        for ((&x, &v), &w) in f.grid.iter().zip(&f.values).zip(&self.weights) {
            let y = eta * x;
            let e = (-y).exp();
            let wv = w * v;
            p += wv * e;
            b += wv * one_minus_exp(y);
            r += wv * exp_remainder(y);
            db += wv * x * e;
        }
        let mut ext = |e: &PowerExp, lo: f64, hi: f64| {
            if self.m0.is_some() {
                p += e.partial_weighted(0, eta, Weight::Exp, lo, hi);
            }
            b += e.partial_weighted(0, eta, Weight::OneMinusExp, lo, hi);
            r += e.partial_weighted(0, eta, Weight::Remainder, lo, hi);
            db += e.partial_weighted(1, eta, Weight::Exp, lo, hi);
        };
        if let Some(h) = &f.head {
            ext(h, 0.0, f.x_min());
        }
        if let Some(t) = &f.tail {
            ext(t, f.x_max(), f64::INFINITY);
        }
        Sample { laplace: if self.m0.is_some() { p } else { f64::NAN }, bernstein: b, remainder: r, db }
    }
}

/// Log-log cubic Hermite interpolant of a remainder curve with its exact
/// slopes, extended as a power law beyond the sampled range.
#[derive(Debug)]
pub struct CurveInterp {
    log_eta: Vec<f64>,
    herm: Hermite,
    pub m0: Option<f64>,
    pub m1: f64,
}

impl CurveInterp {
    pub fn new(etas: &[f64], rem: &[f64], rem_slopes: &[f64], m0: Option<f64>, m1: f64) -> Result<Self> {
        if rem.iter().any(|&r| !(r > 0.0)) {
            return Err(CoagError::NonAdmissible("remainder must be positive to interpolate".into()));
        }
        let log_eta: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
        let ys = rem.iter().map(|r| r.ln()).collect();
        let ds = etas.iter().zip(rem).zip(rem_slopes).map(|((e, r), s)| e * s / r).collect();
        Ok(CurveInterp { herm: Hermite::new(log_eta.clone(), ys, ds), log_eta, m0, m1 })
    }

    pub fn sample(&self, eta: f64) -> Sample {
        let u = eta.ln();
        let n = self.log_eta.len();
        let (y, dy) = if u < self.log_eta[0] {
            let s = self.herm.ds[0];
            (self.herm.ys[0] + s * (u - self.log_eta[0]), s)
        } else if u > self.log_eta[n - 1] {
            let s = self.herm.ds[n - 1];
            (self.herm.ys[n - 1] + s * (u - self.log_eta[n - 1]), s)
        } else {
            self.herm.eval_with_slope(u)
        };
        let r = y.exp();
        let r_slope = dy * r / eta;
        let laplace = self.m0.map_or(f64::NAN, |m0| m0 - self.m1 * eta + r);
        Sample { laplace, bernstein: self.m1 * eta - r, remainder: r, db: self.m1 - r_slope }
    }
}

/// Moments and remainder that accompany a curve built from a density or a flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parts {
    pub m0: Option<f64>,
    pub m1: f64,
    pub rem: Vec<f64>,
    pub rem_slopes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformCurve {
    pub etas: Vec<f64>,
    pub kind: TransformKind,
    pub signed: bool,
    pub values: Vec<f64>,
    /// `d value / d eta` at each grid point.
    pub slopes: Vec<f64>,
    pub parts: Option<Parts>,
    #[serde(skip)]
    pub source: Option<Source>,
}

impl TransformCurve {
    /// A bare curve; slopes come from a PCHIP fit.
    pub fn from_values(etas: Vec<f64>, values: Vec<f64>, kind: TransformKind, signed: bool) -> Result<Self> {
        grid::validate(&etas, "eta grid")?;
        if etas.len() != values.len() {
            return Err(CoagError::InvalidGrid("eta and value columns differ in length".into()));
        }
        let slopes = pchip_slopes(&etas, &values);
        Ok(TransformCurve { etas, kind, signed, values, slopes, parts: None, source: None })
    }

    pub fn from_samples(etas: Vec<f64>, kind: TransformKind, samples: &[Sample], m0: Option<f64>, m1: f64, source: Option<Source>) -> Self {
        let values = samples.iter().map(|s| s.value(kind)).collect();
        let slopes = samples.iter().map(|s| s.slope(kind)).collect();
        let rem = samples.iter().map(|s| s.remainder).collect();
        let rem_slopes = samples.iter().map(|s| m1 - s.db).collect();
        TransformCurve { etas, kind, signed: false, values, slopes, parts: Some(Parts { m0, m1, rem, rem_slopes }), source }
    }

    /// Samples `source` on `etas` (grid points evaluated in parallel).
    pub fn from_source(source: Source, etas: &[f64], kind: TransformKind) -> Result<Self> {
        grid::validate(etas, "eta grid")?;
        let m0 = source.m0();
        if kind == TransformKind::Laplace && m0.is_none() {
            return Err(CoagError::MomentDivergence { order: 0 });
        }
        let m1 = source.m1();
        if !m1.is_finite() {
            return Err(CoagError::MomentDivergence { order: 1 });
        }
        let samples = etas.par_iter().map(|&e| source.sample(e)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_samples(etas.to_vec(), kind, &samples, m0, m1, Some(source)))
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// Pointwise evaluator: the stored source, or an interpolant of the parts.
    pub fn evaluator(&self) -> Result<Source> {
        if let Some(s) = &self.source {
            return Ok(s.clone());
        }
        let p =
            self.parts.as_ref().ok_or_else(|| CoagError::NonAdmissible("curve carries no moment data; build it from a density".into()))?;
        Ok(Source::Interpolated(Arc::new(CurveInterp::new(&self.etas, &p.rem, &p.rem_slopes, p.m0, p.m1)?)))
    }

    /// Signed difference `self - other` on a shared grid.
    ///
    /// When both curves carry moments, these must agree to
    /// [`MOMENT_MATCH_TOL`]; they are then treated as equal and the difference
    /// is taken between remainders.
    pub fn difference(&self, other: &TransformCurve) -> Result<TransformCurve> {
        if self.kind != other.kind {
            return Err(CoagError::Domain("cannot subtract transforms of different kinds".into()));
        }
        if self.etas != other.etas {
            return Err(CoagError::InvalidGrid("curves are sampled on different eta grids".into()));
        }
        let (values, slopes) = match (&self.parts, &other.parts) {
            (Some(a), Some(b)) => {
                check_match(1, a.m1, b.m1)?;
                let sign = match self.kind {
                    TransformKind::Laplace => {
                        check_match(0, a.m0.unwrap_or(f64::NAN), b.m0.unwrap_or(f64::NAN))?;
                        1.0
                    }
                    TransformKind::Bernstein => -1.0,
                };
                let v = a.rem.iter().zip(&b.rem).map(|(x, y)| sign * (x - y)).collect();
                let s = a.rem_slopes.iter().zip(&b.rem_slopes).map(|(x, y)| sign * (x - y)).collect();
                (v, s)
            }
            _ => (
                self.values.iter().zip(&other.values).map(|(x, y)| x - y).collect(),
                self.slopes.iter().zip(&other.slopes).map(|(x, y)| x - y).collect(),
            ),
        };
        Ok(TransformCurve { etas: self.etas.clone(), kind: self.kind, signed: true, values, slopes, parts: None, source: None })
    }

    /// `a * self + b * other` on a shared grid, as a signed curve.
    pub fn combine(&self, a: f64, other: &TransformCurve, b: f64) -> Result<TransformCurve> {
        if self.etas != other.etas || self.kind != other.kind {
            return Err(CoagError::InvalidGrid("curves are not compatible".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let slopes = self.slopes.iter().zip(&other.slopes).map(|(x, y)| a * x + b * y).collect();
        Ok(TransformCurve { etas: self.etas.clone(), kind: self.kind, signed: true, values, slopes, parts: None, source: None })
    }
}

fn check_match(order: usize, lhs: f64, rhs: f64) -> Result<()> {
    if (lhs - rhs).abs() <= MOMENT_MATCH_TOL * lhs.abs().max(rhs.abs()).max(1.0) {
        Ok(())
    } else {
        Err(CoagError::MomentMismatch { order, lhs, rhs })
    }
}

fn check_etas(etas: &[f64]) -> Result<()> {
    if let Some(e) = etas.iter().find(|e| !(**e > 0.0)) {
        return Err(CoagError::Domain(format!("eta must be positive, got {e}")));
    }
    Ok(())
}

/// `L[f](eta) = int e^{-eta x} f(x) dx`.
pub fn laplace(f: &GriddedDensity, etas: &[f64]) -> Result<TransformCurve> {
    check_etas(etas)?;
    TransformCurve::from_source(Source::for_density(f), etas, TransformKind::Laplace)
}

/// `B[f](eta) = int (1 - e^{-eta x}) f(x) dx`.
pub fn bernstein(f: &GriddedDensity, etas: &[f64]) -> Result<TransformCurve> {
    check_etas(etas)?;
    TransformCurve::from_source(Source::for_density(f), etas, TransformKind::Bernstein)
}

/// `B[x f]`.
pub fn mult_bernstein(f: &GriddedDensity, etas: &[f64]) -> Result<TransformCurve> {
    bernstein(&f.times_x(), etas)
}

/// Analytic transforms: `const_profile_laplace`, `G_add_bernstein`, and any
/// catalog density name (`exp`, `gamma(shape,rate)`, `G_add`, ...) with an
/// optional `_laplace`/`_bernstein` suffix. Without a suffix the Laplace
/// transform is used when it exists.
pub fn closed_form(name: &str, etas: &[f64]) -> Result<TransformCurve> {
    check_etas(etas)?;
    let name = name.trim();
    let (base, kind) = if let Some(b) = name.strip_suffix("_bernstein") {
        (b, Some(TransformKind::Bernstein))
    } else if let Some(b) = name.strip_suffix("_laplace") {
        (b, Some(TransformKind::Laplace))
    } else {
        (name, None)
    };
    let base = if base == "const_profile" { "G_const" } else { base };
    let f = catalog::lookup(base)?;
    let kind = kind.unwrap_or(if f.k > 0.0 { TransformKind::Laplace } else { TransformKind::Bernstein });
    TransformCurve::from_source(Source::Closed(f), etas, kind)
}
