//! Adaptive Dormand–Prince 5(4) integrator for small ODE systems.

use crate::error::{CoagError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-300, max_steps: 100_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns `y(t1)`.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut h = dir * (t1 - t0).abs().min(0.01);
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(t, &y, &mut k[0]);
    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        let mut err = 0.0f64;
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            let y5 = y[i] + h * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
            let y4 = y[i] + h * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5.abs());
            err = err.max(((y5 - y4) / scale).abs());
            y_new[i] = y5;
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            // first-same-as-last: the last stage is f at the new point
            let last = k[6].clone();
            k[0] = last;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(CoagError::Domain(format!("ODE step size underflow at t = {t}")));
        }
    }
    Err(CoagError::Domain("ODE integrator exceeded its step budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let y = integrate(|_, y, d| d[0] = y[0], 0.0, &[1.0], 3.0, OdeOptions::default()).unwrap();
        assert!((y[0] / 3f64.exp() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_riccati() {
        // u' = u^2 - u, u(0) = 1/2  ->  u = 1 / (1 + e^t)
        let y = integrate(|_, y, d| d[0] = y[0] * y[0] - y[0], 0.0, &[0.5], 2.0, OdeOptions::default()).unwrap();
        assert!((y[0] * (1.0 + 2f64.exp()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let y = integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            1.0,
            &[1f64.sin(), 1f64.cos()],
            0.0,
            OdeOptions::default(),
        )
        .unwrap();
        assert!(y[0].abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9);
    }
}
