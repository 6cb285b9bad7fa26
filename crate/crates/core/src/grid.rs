use crate::error::{CoagError, Result};

pub const DEFAULT_SIZE_POINTS: usize = 600;
pub const DEFAULT_SIZE_RANGE: (f64, f64) = (1e-4, 1e3);
pub const DEFAULT_ETA_POINTS: usize = 400;
pub const DEFAULT_ETA_RANGE: (f64, f64) = (1e-6, 1e6);

/// `n` geometrically spaced points from `lo` to `hi` inclusive. The
/// endpoints are returned exactly.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

pub fn default_size_grid() -> Vec<f64> {
    geometric(DEFAULT_SIZE_RANGE.0, DEFAULT_SIZE_RANGE.1, DEFAULT_SIZE_POINTS)
}

pub fn default_eta_grid() -> Vec<f64> {
    geometric(DEFAULT_ETA_RANGE.0, DEFAULT_ETA_RANGE.1, DEFAULT_ETA_POINTS)
}

pub fn validate(grid: &[f64], what: &str) -> Result<()> {
    if grid.len() < 2 {
        return Err(CoagError::InvalidGrid(format!("{what}: need at least two points")));
    }
    if !grid.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(CoagError::InvalidGrid(format!("{what}: points must be finite and positive")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoagError::InvalidGrid(format!("{what}: points must be strictly increasing")));
    }
    Ok(())
}

/// True when consecutive log-spacings agree to a relative `1e-9`.
pub fn is_log_uniform(grid: &[f64]) -> bool {
    if grid.len() < 3 {
        return true;
    }
    let h0 = (grid[1] / grid[0]).ln();
    grid.windows(2).all(|w| ((w[1] / w[0]).ln() - h0).abs() <= 1e-9 * h0.abs())
}
