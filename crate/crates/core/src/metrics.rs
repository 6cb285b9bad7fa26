//! Weighted sup-norms `sup_eta eta^{-kappa} |G(eta)|`, distances and rate fits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::density::{compute_moments, GriddedDensity};
use crate::error::{CoagError, GridEnd, Result};
use crate::grid::default_eta_grid;
use crate::interp::Hermite;
use crate::kernel::KernelKind;
use crate::transforms::{self, TransformCurve, MOMENT_MATCH_TOL};

/// An endpoint maximum is accepted as a plateau when it exceeds its
/// neighbour by at most this relative amount.
pub const PLATEAU_TOL: f64 = 1e-6;
/// Width in `ln eta` at which the golden-section search stops; the sup
/// value is then converged far below a relative `1e-6`.
const GOLDEN_WIDTH: f64 = 1e-9;
/// Distances below this fraction of `d(0)` are treated as numerical floor.
pub const FLOOR_FRACTION: f64 = 1e-13;
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaNorm {
    pub kappa: f64,
    pub kernel: KernelKind,
}

impl KappaNorm {
    /// Range in which the norm is finite on the kernel's difference space.
    pub fn valid_range(&self) -> (f64, f64) {
        match self.kernel {
            KernelKind::Constant => (0.0, 2.0),
            _ => (0.0, 3.0),
        }
    }

    pub fn is_finite_norm(&self) -> bool {
        let (lo, hi) = self.valid_range();
        self.kappa >= lo && self.kappa <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupValue {
    pub value: f64,
    pub eta: f64,
    /// Set when the maximum sits on a plateau at a grid end.
    pub endpoint: Option<GridEnd>,
}

fn ratio(v: f64, eta: f64, kappa: f64) -> f64 {
    v.abs() * eta.powf(-kappa)
}

/// `sup_i |G(eta_i)| / eta_i^kappa`, refined by golden section on the
/// Hermite interpolant (in `ln eta`) around the discrete maximizer.
pub fn weighted_sup(curve: &TransformCurve, kappa: f64) -> Result<f64> {
    Ok(weighted_sup_detail(curve, kappa)?.value)
}

pub fn weighted_sup_detail(curve: &TransformCurve, kappa: f64) -> Result<SupValue> {
    let etas = &curve.etas;
    let n = etas.len();
    let r: Vec<f64> = etas.iter().zip(&curve.values).map(|(&e, &v)| ratio(v, e, kappa)).collect();
    let (imax, rmax) = r.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if !rmax.is_finite() {
        return Err(CoagError::Domain("weighted ratio is not finite".into()));
    }
    if rmax == 0.0 {
        return Ok(SupValue { value: 0.0, eta: etas[0], endpoint: None });
    }
    if imax == 0 || imax == n - 1 {
        let (nb, end) = if imax == 0 { (1, GridEnd::Left) } else { (n - 2, GridEnd::Right) };
        if rmax - r[nb] <= PLATEAU_TOL * rmax {
            return Ok(SupValue { value: rmax, eta: etas[imax], endpoint: Some(end) });
        }
        return Err(CoagError::SupNotBracketed { end, eta: etas[imax] });
    }
    let u: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
    let herm = Hermite::new(
        u[imax - 1..=imax + 1].to_vec(),
        curve.values[imax - 1..=imax + 1].to_vec(),
        (imax - 1..=imax + 1).map(|i| curve.slopes[i] * etas[i]).collect(),
    );
    let f = |x: f64| herm.eval(x).abs() * (-kappa * x).exp();
    let (mut a, mut b) = (u[imax - 1], u[imax + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_WIDTH {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    if fx > rmax {
        Ok(SupValue { value: fx, eta: x.exp(), endpoint: None })
    } else {
        Ok(SupValue { value: rmax, eta: etas[imax], endpoint: None })
    }
}

/// True when `eta^{-kappa} |G|` decreases toward the smallest grid points.
pub fn ratio_vanishes_at_zero(curve: &TransformCurve, kappa: f64) -> bool {
    let r: Vec<f64> = (0..3).map(|i| ratio(curve.values[i], curve.etas[i], kappa)).collect();
    r[0] < r[1] && r[1] < r[2]
}

/// The transform the kernel's norm is built on.
pub fn kernel_transform(f: &GriddedDensity, kernel: KernelKind, etas: &[f64]) -> Result<TransformCurve> {
    match kernel {
        KernelKind::Constant => transforms::laplace(f, etas),
        KernelKind::Additive => transforms::bernstein(f, etas),
        KernelKind::Multiplicative => transforms::mult_bernstein(f, etas),
    }
}

fn class_moments(f: &GriddedDensity, kernel: KernelKind) -> Result<(f64, f64)> {
    let (p, q) = kernel.class().required_moments;
    match f.exact {
        Some(e) => Ok((e.moment(p), e.moment(q))),
        None => {
            let m = compute_moments(f, q)?;
            Ok((m.get(p), m.get(q)))
        }
    }
}

/// `|| T[g1] - T[g2] ||_kappa` on the default eta grid.
pub fn distance(g1: &GriddedDensity, g2: &GriddedDensity, kernel: KernelKind, kappa: f64) -> Result<f64> {
    distance_on(g1, g2, kernel, kappa, &default_eta_grid())
}

pub fn distance_on(g1: &GriddedDensity, g2: &GriddedDensity, kernel: KernelKind, kappa: f64, etas: &[f64]) -> Result<f64> {
    let (a, b) = (class_moments(g1, kernel)?, class_moments(g2, kernel)?);
    let (p, q) = kernel.class().required_moments;
    for (order, x, y) in [(p, a.0, b.0), (q, a.1, b.1)] {
        if !((x - y).abs() <= MOMENT_MATCH_TOL * x.abs().max(y.abs()).max(1.0)) {
            return Err(CoagError::MomentMismatch { order, lhs: x, rhs: y });
        }
    }
    let c1 = kernel_transform(g1, kernel, etas)?;
    let c2 = kernel_transform(g2, kernel, etas)?;
    curve_distance(&c1, &c2, kappa)
}

pub fn curve_distance(c1: &TransformCurve, c2: &TransformCurve, kappa: f64) -> Result<f64> {
    weighted_sup(&c1.difference(c2)?, kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Negative least-squares slope of `ln d` against `tau`; `None` when
    /// fewer than two usable points remain.
    pub rate: Option<f64>,
    pub window: (f64, f64),
    pub points: usize,
    pub window_shrunk: bool,
}

pub fn fit_rate(taus: &[f64], distances: &[f64]) -> Result<RateFit> {
    fit_rate_window(taus, distances, DEFAULT_FIT_WINDOW)
}

/// Least-squares decay rate over `window`, skipping distances at or below
/// the numerical floor `1e-13 d(0)`. When the floor removes points from
/// the window, the window is shrunk to the last usable checkpoint.
pub fn fit_rate_window(taus: &[f64], distances: &[f64], window: (f64, f64)) -> Result<RateFit> {
    if taus.len() != distances.len() {
        return Err(CoagError::Domain("taus and distances differ in length".into()));
    }
    if taus.len() < 5 {
        return Err(CoagError::Domain(format!("need at least 5 checkpoints, got {}", taus.len())));
    }
    let d0 = distances[0];
    let floor = FLOOR_FRACTION * d0;
    let in_window: Vec<usize> = (0..taus.len()).filter(|&i| taus[i] >= window.0 && taus[i] <= window.1).collect();
    let usable: Vec<usize> = in_window.iter().copied().filter(|&i| distances[i] > floor && distances[i] > 0.0).collect();
    let shrunk = usable.len() < in_window.len();
    let used_window = match (usable.first(), usable.last()) {
        (Some(&a), Some(&b)) if shrunk => (taus[a], taus[b]),
        _ => window,
    };
    if d0 <= 0.0 || usable.len() < 2 {
        return Ok(RateFit { rate: None, window: used_window, points: usable.len(), window_shrunk: shrunk });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|&i| taus[i]).sum::<f64>() / n;
    let my = usable.iter().map(|&i| distances[i].ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &usable {
        let dx = taus[i] - mx;
        sxy += dx * (distances[i].ln() - my);
        sxx += dx * dx;
    }
    Ok(RateFit { rate: Some(-sxy / sxx), window: used_window, points: usable.len(), window_shrunk: shrunk })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEntry {
    pub kappa: f64,
    pub distances: Vec<f64>,
    pub fitted_rate: Option<f64>,
    pub theorem_rate: f64,
    /// `|fitted - theorem| / theorem`.
    pub rate_error: Option<f64>,
    pub contraction_holds: bool,
    pub window_shrunk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub kernel: KernelKind,
    pub taus: Vec<f64>,
    pub entries: Vec<KappaEntry>,
}

/// Relative slack allowed in the one-sided contraction inequality.
pub const CONTRACTION_SLACK: f64 = 1e-2;

/// `d(tau_j) <= e^{-rate tau_j} d(0) (1 + slack)` at every checkpoint.
pub fn contraction_holds(taus: &[f64], distances: &[f64], rate: f64) -> bool {
    let d0 = distances[0];
    taus.iter().zip(distances).all(|(&t, &d)| d <= (-rate * t).exp() * d0 * (1.0 + CONTRACTION_SLACK))
}

impl KappaEntry {
    pub fn new(kernel: KernelKind, kappa: f64, taus: &[f64], distances: Vec<f64>) -> Result<Self> {
        let theorem_rate = kernel.theorem_rate(kappa);
        let all_zero = distances.iter().all(|&d| d == 0.0);
        let (fitted_rate, window_shrunk) = if all_zero {
            (None, false)
        } else {
            let fit = fit_rate(taus, &distances)?;
            (fit.rate, fit.window_shrunk)
        };
        let rate_error = fitted_rate.map(|r| (r - theorem_rate).abs() / theorem_rate.abs());
        let contraction_holds = contraction_holds(taus, &distances, theorem_rate);
        Ok(KappaEntry { kappa, distances, fitted_rate, theorem_rate, rate_error, contraction_holds, window_shrunk })
    }
}

impl ContractionReport {
    pub fn all_contract(&self) -> bool {
        self.entries.iter().all(|e| e.contraction_holds)
    }

    /// True when every fitted rate is within `tol` relative of the theorem
    /// rate (entries without a fit count as passing).
    pub fn rates_within(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.rate_error.is_none_or(|r| r <= tol))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat `tau,kappa,distance` rows, sorted by tau then kappa.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for e in &self.entries {
            for (t, d) in self.taus.iter().zip(&e.distances) {
                rows.push((*t, e.kappa, *d));
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out = String::from("tau,kappa,distance\n");
        for (t, k, d) in rows {
            writeln!(out, "{t:e},{k:e},{d:e}").unwrap();
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        Ok(())
    }
}
