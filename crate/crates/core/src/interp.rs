//! Piecewise-cubic Hermite interpolation, with PCHIP (shape-preserving) slopes
//! when derivatives are not supplied.

/// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to a valid interval.
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    debug_assert!(n >= 2);
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    xs.partition_point(|&v| v <= x) - 1
}

/// Cubic Hermite interpolant through `(xs[i], ys[i])` with slopes `ds[i]`.
#[derive(Debug, Clone)]
pub struct Hermite {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ds: Vec<f64>,
}

impl Hermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ds: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len() && ys.len() == ds.len());
        Hermite { xs, ys, ds }
    }

    /// Monotone PCHIP slopes (Fritsch–Butland harmonic mean, one-sided
    /// three-point ends).
    pub fn pchip(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let ds = pchip_slopes(&xs, &ys);
        Hermite::new(xs, ys, ds)
    }

    /// Value and derivative. Outside the nodes the end cubic is extended.
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let i = locate(&self.xs, x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.ds[i] * h, self.ds[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dy = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * d1) / h;
        (y, dy)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_slope(x).0
    }
}

pub fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Resamples `(xs, ys)` onto `targets`: log-log PCHIP across runs of positive
/// values, linear in `x` wherever an interval touches a non-positive value.
pub fn resample_loglog(xs: &[f64], ys: &[f64], targets: &[f64]) -> Vec<f64> {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let all_positive = ys.iter().all(|&v| v > 0.0);
    let loglog = if all_positive { Some(Hermite::pchip(lx.clone(), ys.iter().map(|v| v.ln()).collect())) } else { None };
    targets
        .iter()
        .map(|&t| {
            let i = locate(xs, t);
            if let Some(h) = &loglog {
                return h.eval(t.ln()).exp();
            }
            let (y0, y1) = (ys[i], ys[i + 1]);
            if y0 > 0.0 && y1 > 0.0 {
                let w = (t.ln() - lx[i]) / (lx[i + 1] - lx[i]);
                (y0.ln() * (1.0 - w) + y1.ln() * w).exp()
            } else {
                let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
                y0 * (1.0 - w) + y1 * w
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics_with_exact_slopes() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let df = |x: f64| 1.0 - 4.0 * x + 1.5 * x * x;
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let h = Hermite::new(xs.clone(), xs.iter().map(|&x| f(x)).collect(), xs.iter().map(|&x| df(x)).collect());
        for k in 0..50 {
            let x = k as f64 * 0.07;
            let (y, d) = h.eval_with_slope(x);
            assert!((y - f(x)).abs() < 1e-12);
            assert!((d - df(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn pchip_preserves_monotonicity() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = vec![0.0, 0.0, 0.1, 5.0, 5.0, 6.0];
        let h = Hermite::pchip(xs, ys);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=500 {
            let y = h.eval(k as f64 * 0.01);
            assert!(y >= prev - 1e-14);
            prev = y;
        }
    }

    #[test]
    fn loglog_resample_exact_for_power_laws() {
        let xs: Vec<f64> = (0..20).map(|i| 10f64.powf(i as f64 * 0.2)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let t = [1.3, 7.7, 1234.5];
        for (v, x) in resample_loglog(&xs, &ys, &t).iter().zip(t) {
            assert!((v / (3.0 * x.powf(-1.5)) - 1.0).abs() < 1e-12);
        }
    }
}
