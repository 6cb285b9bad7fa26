//! Special functions: incomplete gamma integrals (continued to negative
//! order where the integrals still converge) and the cancellation-free
//! kernels `e^{-y}`, `1 - e^{-y}`, `e^{-y} - 1 + y`.

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn is_integer(a: f64) -> bool {
    (a - a.round()).abs() < 1e-12
}

/// Gamma function. Exact (up to one rounding per factor) for small
/// positive integers so closed forms built from them stay bit-reproducible.
pub fn gamma(a: f64) -> f64 {
    if a > 0.0 && a <= 171.0 && is_integer(a) {
        let n = a.round() as u32;
        return (1..n).fold(1.0, |acc, k| acc * k as f64);
    }
    if a.abs() <= 60.0 && is_integer(a - 0.5) {
        // half-integers from Gamma(1/2) = sqrt(pi)
        let mut g = std::f64::consts::PI.sqrt();
        let mut s = 0.5;
        while s < a {
            g *= s;
            s += 1.0;
        }
        while s > a {
            s -= 1.0;
            g /= s;
        }
        return g;
    }
    statrs::function::gamma::gamma(a)
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

/// Upper incomplete gamma by Lentz's continued fraction; needs x > a + 1
/// (or x > 1 when a <= 0).
fn upper_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// Exponential integral E_1(x) = Gamma(0, x) for 0 < x <= 1.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Lower incomplete gamma `gamma(a, x) = int_0^x t^{a-1} e^{-t} dt`, a > 0.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        gamma(a) - upper_cf(a, x)
    }
}

/// Upper incomplete gamma `Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt` for
/// any real `a` and `x > 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if a > 0.0 {
        if x < a + 1.0 {
            gamma(a) - lower_series(a, x)
        } else {
            upper_cf(a, x)
        }
    } else if x > 1.0 {
        upper_cf(a, x)
    } else if is_integer(a) {
        let n = (-a.round()) as i32;
        let mut g = e1_series(x);
        for m in 1..=n {
            let s = -(m as f64);
            g = (g - x.powf(s) * (-x).exp()) / s;
        }
        g
    } else {
        let n = (-a).floor() as i32 + 1;
        let a0 = a + n as f64;
        let mut g = gamma(a0) - lower_series(a0, x);
        for m in 1..=n {
            let s = a0 - m as f64;
            g = (g - x.powf(s) * (-x).exp()) / s;
        }
        g
    }
}

/// `(hi^s - lo^s) / s` without cancellation, with the `s -> 0` limit `ln(hi/lo)`.
fn power_difference(s: f64, lo: f64, hi: f64) -> f64 {
    let l = (hi / lo).ln();
    let sl = s * l;
    if sl.abs() < 1e-8 {
        lo.powf(s) * l * (1.0 + 0.5 * sl)
    } else {
        lo.powf(s) * sl.exp_m1() / s
    }
}

/// `int_lo^hi x^{a-1} e^{-b x} dx` for `0 <= lo < hi <= inf`, `b >= 0`.
/// Returns `+inf` when the integral diverges.
pub fn power_exp_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo == 0.0 {
        if a <= 0.0 {
            return f64::INFINITY;
        }
        if hi.is_infinite() {
            return if b > 0.0 { b.powf(-a) * gamma(a) } else { f64::INFINITY };
        }
        if b == 0.0 {
            return hi.powf(a) / a;
        }
        return b.powf(-a) * lower_gamma(a, b * hi);
    }
    if hi.is_infinite() {
        if b <= 0.0 {
            return if a < 0.0 { -lo.powf(a) / a } else { f64::INFINITY };
        }
        return b.powf(-a) * upper_gamma(a, b * lo);
    }
    if b * hi <= 1.0 {
        let mut sum = 0.0;
        let mut coef = 1.0;
        for j in 0..200 {
            if j > 0 {
                coef *= -b / j as f64;
            }
            let term = coef * power_difference(a + j as f64, lo, hi);
            sum += term;
            if j > 2 && term.abs() <= EPS * sum.abs() {
                break;
            }
        }
        return sum;
    }
    b.powf(-a) * (upper_gamma(a, b * lo) - upper_gamma(a, b * hi))
}

/// Which of the three transform kernels a weight uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `e^{-y}`
    Exp,
    /// `1 - e^{-y}`
    OneMinusExp,
    /// `e^{-y} - 1 + y`
    Remainder,
}

impl Weight {
    fn order(self) -> usize {
        match self {
            Weight::Exp => 0,
            Weight::OneMinusExp => 1,
            Weight::Remainder => 2,
        }
    }

    /// Taylor coefficient of `y^m`.
    fn coefficient(self, m: usize, inv_factorial: f64) -> f64 {
        if m < self.order() {
            return 0.0;
        }
        let alt = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        match self {
            Weight::Exp | Weight::Remainder => alt * inv_factorial,
            Weight::OneMinusExp => -alt * inv_factorial,
        }
    }

    pub fn eval(self, y: f64) -> f64 {
        match self {
            Weight::Exp => (-y).exp(),
            Weight::OneMinusExp => one_minus_exp(y),
            Weight::Remainder => exp_remainder(y),
        }
    }
}

/// `1 - e^{-y}`, with a dedicated series below `y = 1e-4`.
pub fn one_minus_exp(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        y * (1.0 - y * (0.5 - y / 6.0))
    } else {
        -(-y).exp_m1()
    }
}

/// `e^{-y} - 1 + y >= 0` for `y >= 0`.
pub fn exp_remainder(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let mut term = 0.5 * y * y;
        let mut sum = term;
        for k in 3..30 {
            term *= -y / k as f64;
            sum += term;
            if term.abs() < EPS * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (-y).exp_m1() + y
    }
}

/// `int_lo^hi x^{a-1} e^{-beta x} w(eta x) dx` for one of the three weights.
///
/// Below `x = 1/eta` the weight is expanded in powers of `eta x` (the
/// expansion starts at the weight's vanishing order, so the head integral
/// converges whenever `a + order > 0`); above it the weight is split into
/// exponentials, which no longer cancel there.
pub fn weighted_power_exp(a: f64, beta: f64, eta: f64, weight: Weight, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let split = (1.0 / eta).clamp(lo, hi);
    let mut total = 0.0;
    if split > lo {
        let k = weight.order();
        let mut inv_fact = 1.0;
        let mut eta_pow = 1.0;
        let mut sum = 0.0;
        for m in 0..80 {
            if m > 0 {
                inv_fact /= m as f64;
                eta_pow *= eta;
            }
            if m < k {
                continue;
            }
            let integral = power_exp_integral(a + m as f64, beta, lo, split);
            if !integral.is_finite() {
                return f64::INFINITY;
            }
            let term = weight.coefficient(m, inv_fact) * eta_pow * integral;
            sum += term;
            if m > k + 2 && term.abs() <= EPS * sum.abs() {
                break;
            }
        }
        total += sum;
    }
    if hi > split {
        let part = match weight {
            Weight::Exp => power_exp_integral(a, beta + eta, split, hi),
            Weight::OneMinusExp => power_exp_integral(a, beta, split, hi) - power_exp_integral(a, beta + eta, split, hi),
            Weight::Remainder => {
                power_exp_integral(a, beta + eta, split, hi) - power_exp_integral(a, beta, split, hi)
                    + eta * power_exp_integral(a + 1.0, beta, split, hi)
            }
        };
        total += part;
    }
    total
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
