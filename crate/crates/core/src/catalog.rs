//! The power-times-exponential family `c x^{k-1} e^{-theta x}`.
//!
//! Every catalog density (the exponential, normalized gamma densities and
//! the self-similar profiles) belongs to it, and its transforms are explicit.
//! The same form doubles as the head/tail extension of gridded densities,
//! written there as `c x^{-p} e^{-beta x}` with `p = 1 - k`, `beta = theta`.

use serde::Serialize;

use crate::density::GriddedDensity;
use crate::error::{CoagError, Result};
use crate::kernel::KernelKind;
use crate::special::{self, gamma, Weight};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerExp {
    pub c: f64,
    pub k: f64,
    pub theta: f64,
}

impl PowerExp {
    pub fn new(c: f64, k: f64, theta: f64) -> Self {
        PowerExp { c, k, theta }
    }

    /// Extension descriptor `c x^{-p} e^{-beta x}`.
    pub fn from_extension(p: f64, c: f64, beta: f64) -> Self {
        PowerExp { c, k: 1.0 - p, theta: beta }
    }

    pub fn p(&self) -> f64 {
        1.0 - self.k
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(self.k - 1.0) * (-self.theta * x).exp()
    }

    /// `M_l = c Gamma(k+l) theta^{-(k+l)}`, or `+inf` when it diverges.
    pub fn moment(&self, l: usize) -> f64 {
        let s = self.k + l as f64;
        if s <= 0.0 || self.theta <= 0.0 {
            return f64::INFINITY;
        }
        self.c * gamma(s) * self.theta.powf(-s)
    }

    /// `int_lo^hi x^l f(x) dx`.
    pub fn partial_moment(&self, l: usize, lo: f64, hi: f64) -> f64 {
        self.c * special::power_exp_integral(self.k + l as f64, self.theta, lo, hi)
    }

    /// `int_lo^hi x^l w(eta x) f(x) dx`.
    pub fn partial_weighted(&self, l: usize, eta: f64, weight: Weight, lo: f64, hi: f64) -> f64 {
        self.c * special::weighted_power_exp(self.k + l as f64, self.theta, eta, weight, lo, hi)
    }

    /// `x -> a f(b x)` stays in the family.
    pub fn scaled(&self, a: f64, b: f64) -> Self {
        PowerExp { c: a * self.c * b.powf(self.k - 1.0), k: self.k, theta: self.theta * b }
    }

    pub fn times_x(&self) -> Self {
        PowerExp { c: self.c, k: self.k + 1.0, theta: self.theta }
    }

    fn scale(&self) -> f64 {
        self.c * gamma(self.k) * self.theta.powf(-self.k)
    }

    /// Laplace transform `c Gamma(k) (theta + eta)^{-k}`; needs `k > 0`.
    pub fn laplace(&self, eta: f64) -> f64 {
        self.c * gamma(self.k) * (self.theta + eta).powf(-self.k)
    }

    /// Bernstein transform `c Gamma(k) theta^{-k} [1 - (1 + eta/theta)^{-k}]`;
    /// by analytic continuation this also holds for `-1 < k < 0`.
    pub fn bernstein(&self, eta: f64) -> f64 {
        let r = eta / self.theta;
        -self.scale() * (-self.k * r.ln_1p()).exp_m1()
    }

    /// `int (e^{-eta x} - 1 + eta x) f(x) dx = c Gamma(k) theta^{-k} [(1+r)^{-k} - 1 + k r]`.
    pub fn remainder(&self, eta: f64) -> f64 {
        let r = eta / self.theta;
        let bracket = if r < 0.5 {
            // binomial series of (1+r)^{-k} from the quadratic term on
            let mut coef = -self.k * (-self.k - 1.0) / 2.0;
            let mut rp = r * r;
            let mut sum = coef * rp;
            for j in 3..200 {
                coef *= (-self.k - (j as f64 - 1.0)) / j as f64;
                rp *= r;
                let term = coef * rp;
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    break;
                }
            }
            sum
        } else {
            (-self.k * r.ln_1p()).exp_m1() + self.k * r
        };
        self.scale() * bracket
    }

    /// `int x e^{-eta x} f(x) dx = c Gamma(k+1) (theta + eta)^{-k-1}`.
    pub fn first_moment_laplace(&self, eta: f64) -> f64 {
        self.c * gamma(self.k + 1.0) * (self.theta + eta).powf(-self.k - 1.0)
    }
}

fn gamma_density(shape: f64, rate: f64) -> PowerExp {
    PowerExp::new(rate.powf(shape) / gamma(shape), shape, rate)
}

/// `(2 pi)^{-1/2} x^{-3/2} e^{-x/2}`.
pub fn g_add() -> PowerExp {
    PowerExp::new(INV_SQRT_2PI, -0.5, 0.5)
}

/// `(2 pi)^{-1/2} x^{-5/2} e^{-x/2}`.
pub fn g_mult() -> PowerExp {
    PowerExp::new(INV_SQRT_2PI, -1.5, 0.5)
}

pub fn profile(kernel: KernelKind) -> PowerExp {
    match kernel {
        KernelKind::Constant => PowerExp::new(1.0, 1.0, 1.0),
        KernelKind::Additive => g_add(),
        KernelKind::Multiplicative => g_mult(),
    }
}

fn parse_args(s: &str, name: &str) -> Result<Vec<f64>> {
    let inner = s
        .strip_prefix(name)
        .and_then(|r| r.trim().strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| CoagError::UnknownName(s.to_string()))?;
    inner.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| CoagError::Parse(format!("bad number '{t}' in '{s}'")))).collect()
}

/// Looks up a catalog density: `exp`, `gamma(shape,rate)` (normalized to unit
/// mass), `exp(rate)`, `G_const`, `G_add`, `G_mult`.
pub fn lookup(name: &str) -> Result<PowerExp> {
    let s = name.trim();
    match s {
        "exp" | "G_const" => return Ok(PowerExp::new(1.0, 1.0, 1.0)),
        "G_add" => return Ok(g_add()),
        "G_mult" => return Ok(g_mult()),
        _ => {}
    }
    if s.starts_with("gamma") {
        let a = parse_args(s, "gamma")?;
        if a.len() != 2 || a[0] <= 0.0 || a[1] <= 0.0 {
            return Err(CoagError::Parse(format!("'{s}' needs gamma(shape,rate) with positive entries")));
        }
        return Ok(gamma_density(a[0], a[1]));
    }
    if s.starts_with("exp(") {
        let a = parse_args(s, "exp")?;
        if a.len() != 1 || a[0] <= 0.0 {
            return Err(CoagError::Parse(format!("'{s}' needs exp(rate) with rate > 0")));
        }
        return Ok(gamma_density(1.0, a[0]));
    }
    Err(CoagError::UnknownName(format!("catalog density '{s}'")))
}

/// Exact self-similar profile on the default size grid.
pub fn exact_profile(kernel: KernelKind) -> GriddedDensity {
    GriddedDensity::from_power_exp(profile(kernel), crate::grid::default_size_grid())
}
