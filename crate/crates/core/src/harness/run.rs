//! Contraction, cross-validation and original-time rate experiments.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog;
use crate::density::{normalize_to_class, GriddedDensity};
use crate::error::{CoagError, Result};
use crate::flow::{self, FlowSolver};
use crate::grid::geometric;
use crate::io::read_density;
use crate::kernel::KernelKind;
use crate::metrics::{fit_rate_window, kernel_transform, weighted_sup, ContractionReport, KappaEntry, DEFAULT_FIT_WINDOW};
use crate::physical::{self, SolverConfig, MULT_T_MAX};
use crate::scaling::{make_scaling, to_selfsimilar};
use crate::transforms::TransformCurve;

use super::config::{ExperimentConfig, SolverChoice};

/// Number of points and checkpoints of the closed-form versus ODE check.
pub const GUARD_POINTS: usize = 50;
pub const GUARD_TAUS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn guard_tolerance(kernel: KernelKind) -> f64 {
    match kernel {
        KernelKind::Constant => 1e-8,
        _ => 1e-6,
    }
}

pub fn default_crossval_tolerance(kernel: KernelKind) -> f64 {
    match kernel {
        KernelKind::Constant => 1e-3,
        _ => 3e-3,
    }
}

/// Comparison window of the cross-validation.
pub const CROSSVAL_ETA_RANGE: (f64, f64) = (1e-2, 1e2);

/// Runs `f` on a pool capped by `COAG_THREADS` when that is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("COAG_THREADS") {
        Ok(v) => {
            let n: usize =
                v.trim().parse().map_err(|_| CoagError::Config(format!("COAG_THREADS must be a positive integer, got '{v}'")))?;
            if n == 0 {
                return Err(CoagError::Config("COAG_THREADS must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CoagError::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Resolves a catalog name or a CSV path.
pub fn load_density(spec: &str, grid: &[f64]) -> Result<GriddedDensity> {
    match catalog::lookup(spec) {
        Ok(f) => Ok(GriddedDensity::from_power_exp(f, grid.to_vec())),
        Err(CoagError::UnknownName(_)) if Path::new(spec).exists() => read_density(spec),
        Err(e) => Err(e),
    }
}

/// The two initial data of an experiment, normalized to the kernel's class.
pub fn initial_pair(cfg: &ExperimentConfig) -> Result<(GriddedDensity, GriddedDensity)> {
    let grid = cfg.size_points();
    let class = cfg.kernel.class();
    let g1 = if cfg.profile_mode {
        GriddedDensity::from_power_exp(catalog::profile(cfg.kernel), grid.clone())
    } else {
        load_density(&cfg.g1, &grid)?
    };
    let g2 = load_density(&cfg.g2, &grid)?;
    Ok((normalize_to_class(&g1, class)?, normalize_to_class(&g2, class)?))
}

fn flow_solver(choice: SolverChoice) -> FlowSolver {
    match choice {
        SolverChoice::TransformOdeFallback => FlowSolver::OdeFallback,
        _ => FlowSolver::ClosedForm,
    }
}

/// Physical solution mapped to self-similar variables at each `tau`.
fn physical_selfsimilar(g: &GriddedDensity, cfg: &ExperimentConfig, taus: &[f64]) -> Result<Vec<GriddedDensity>> {
    let map = make_scaling(cfg.kernel);
    let ts: Vec<f64> = taus.iter().map(|&t| map.t_of_tau(t)).collect();
    let t_end = ts.last().copied().unwrap_or(0.0);
    if cfg.kernel == KernelKind::Multiplicative && t_end > MULT_T_MAX {
        return Err(CoagError::Config(format!(
            "the physical solver stops at t = {MULT_T_MAX} for the multiplicative kernel (tau = {:.4}); got tau = {}",
            map.tau_of_t(MULT_T_MAX),
            taus.last().unwrap()
        )));
    }
    let mut sc = SolverConfig::new(cfg.kernel, cfg.size_points(), t_end);
    sc.dt = cfg.dt;
    let sol = physical::solve(g, &sc, &ts)?;
    Ok(sol.densities.iter().zip(taus).map(|(n, &tau)| to_selfsimilar(n, tau, &map)).collect())
}

/// Kernel transform of each input at each checkpoint.
fn evolved_curves(g: &GriddedDensity, cfg: &ExperimentConfig) -> Result<Vec<TransformCurve>> {
    let etas = cfg.eta_points();
    match cfg.solver {
        SolverChoice::Physical => {
            let gs = physical_selfsimilar(g, cfg, &cfg.taus)?;
            gs.par_iter().map(|g| kernel_transform(g, cfg.kernel, &etas)).collect()
        }
        choice => {
            let u0 = kernel_transform(g, cfg.kernel, &etas)?;
            let solver = flow_solver(choice);
            cfg.taus.par_iter().map(|&tau| flow::evolve(cfg.kernel, &u0, tau, solver)).collect()
        }
    }
}

fn without_parts(c: &TransformCurve) -> TransformCurve {
    TransformCurve { parts: None, source: None, ..c.clone() }
}

/// Closed-form flow against the ODE fallback on a subgrid of the eta grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardReport {
    pub kernel: KernelKind,
    pub taus: Vec<f64>,
    pub points: usize,
    /// Largest relative difference at each checkpoint.
    pub max_relative_difference: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the closed-form and ODE flows of `g` at [`GUARD_TAUS`].
pub fn ode_guard(g: &GriddedDensity, kernel: KernelKind, etas: &[f64]) -> Result<GuardReport> {
    let stride = (etas.len() / GUARD_POINTS).max(1);
    let idx: Vec<usize> = (0..etas.len()).step_by(stride).take(GUARD_POINTS).collect();
    let sub: Vec<f64> = idx.iter().map(|&i| etas[i]).collect();
    let full = kernel_transform(g, kernel, etas)?;
    let coarse = kernel_transform(g, kernel, &sub)?;
    let diffs = GUARD_TAUS
        .par_iter()
        .map(|&tau| -> Result<f64> {
            let a = flow::evolve(kernel, &full, tau, FlowSolver::ClosedForm)?;
            let b = flow::evolve(kernel, &coarse, tau, FlowSolver::OdeFallback)?;
            Ok(idx.iter().zip(&b.values).map(|(&i, y)| (a.values[i] / y - 1.0).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let tolerance = guard_tolerance(kernel);
    let passed = diffs.iter().all(|d| *d <= tolerance);
    Ok(GuardReport { kernel, taus: GUARD_TAUS.to_vec(), points: sub.len(), max_relative_difference: diffs, tolerance, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionRun {
    pub config: ExperimentConfig,
    pub report: ContractionReport,
    pub guard: Option<GuardReport>,
    /// Rate check, when a rate tolerance is configured.
    pub rates_within_tolerance: Option<bool>,
    pub passed: bool,
}

impl ContractionRun {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.report.write(dir, "contraction")?;
        if let Some(g) = &self.guard {
            std::fs::write(dir.join("ode_guard.json"), serde_json::to_string_pretty(g)? + "\n")?;
        }
        Ok(())
    }
}

/// Distances `d_kappa(tau)` between the two evolved inputs, rate fits and
/// the contraction check, written as JSON and CSV when an output directory
/// is configured.
pub fn run_contraction(cfg: &ExperimentConfig) -> Result<ContractionRun> {
    with_thread_cap(|| contraction_inner(cfg))?
}

/// `distances[tau][kappa]` between the evolved curves.
fn distance_table(cfg: &ExperimentConfig, c1: &[TransformCurve], c2: &[TransformCurve]) -> Result<Vec<Vec<f64>>> {
    let physical = cfg.solver == SolverChoice::Physical;
    (0..cfg.taus.len())
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let tau = cfg.taus[j];
            let diff = if physical { without_parts(&c1[j]).difference(&without_parts(&c2[j])) } else { c1[j].difference(&c2[j]) }
                .map_err(|e| e.at(tau, f64::NAN))?;
            cfg.kappas.iter().map(|&k| weighted_sup(&diff, k).map_err(|e| e.at(tau, k))).collect()
        })
        .collect()
}

fn contraction_inner(cfg: &ExperimentConfig) -> Result<ContractionRun> {
    let (g1, g2) = initial_pair(cfg)?;
    let c1 = evolved_curves(&g1, cfg)?;
    let c2 = evolved_curves(&g2, cfg)?;
    let table = distance_table(cfg, &c1, &c2)?;
    let entries = cfg
        .kappas
        .iter()
        .enumerate()
        .map(|(i, &k)| KappaEntry::new(cfg.kernel, k, &cfg.taus, table.iter().map(|row| row[i]).collect()))
        .collect::<Result<Vec<_>>>()?;
    let report = ContractionReport { kernel: cfg.kernel, taus: cfg.taus.clone(), entries };
    let guard = if cfg.ode_guard { Some(ode_guard(&g2, cfg.kernel, &cfg.eta_points())?) } else { None };
    let rates_within_tolerance = cfg.rate_tolerance.map(|t| report.rates_within(t));
    let passed = report.all_contract() && guard.as_ref().is_none_or(|g| g.passed) && rates_within_tolerance.unwrap_or(true);
    let run = ContractionRun { config: cfg.clone(), report, guard, rates_within_tolerance, passed };
    if let Some(dir) = &cfg.output_dir {
        run.write(dir)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossvalReport {
    pub kernel: KernelKind,
    pub taus: Vec<f64>,
    /// Largest relative discrepancy over the comparison window at each checkpoint.
    pub max_discrepancy: Vec<f64>,
    pub worst_tau: f64,
    pub worst_eta: f64,
    pub worst_discrepancy: f64,
    pub tolerance: f64,
    /// Mass the physical solver dropped past the end of its grid, relative to the initial mass.
    pub truncated_mass: f64,
    pub passed: bool,
}

impl CrossvalReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("crossval.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Transform flow of `g2` against the physical solver mapped through the
/// self-similar scaling, compared on `eta in [1e-2, 1e2]`.
pub fn run_crossval(cfg: &ExperimentConfig) -> Result<CrossvalReport> {
    with_thread_cap(|| crossval_inner(cfg))?
}

fn crossval_inner(cfg: &ExperimentConfig) -> Result<CrossvalReport> {
    let grid = cfg.size_points();
    let g = normalize_to_class(&load_density(&cfg.g2, &grid)?, cfg.kernel.class())?;
    let etas = cfg.eta_points();
    let window: Vec<usize> = (0..etas.len())
        .filter(|&i| etas[i] >= CROSSVAL_ETA_RANGE.0 * (1.0 - 1e-12) && etas[i] <= CROSSVAL_ETA_RANGE.1 * (1.0 + 1e-12))
        .collect();
    if window.len() < 2 {
        return Err(CoagError::Config("eta grid has fewer than two points in [1e-2, 1e2]".into()));
    }
    let sub: Vec<f64> = window.iter().map(|&i| etas[i]).collect();
    let u0 = kernel_transform(&g, cfg.kernel, &etas)?;
    let solver = flow_solver(cfg.solver);
    let flows: Vec<TransformCurve> = cfg.taus.par_iter().map(|&tau| flow::evolve(cfg.kernel, &u0, tau, solver)).collect::<Result<_>>()?;

    let map = make_scaling(cfg.kernel);
    let ts: Vec<f64> = cfg.taus.iter().map(|&t| map.t_of_tau(t)).collect();
    let t_end = *ts.last().unwrap();
    let mut sc = SolverConfig::new(cfg.kernel, grid, t_end);
    sc.dt = cfg.dt;
    if cfg.kernel == KernelKind::Multiplicative && t_end > MULT_T_MAX {
        return Err(CoagError::Config(format!(
            "crossval for the multiplicative kernel must stop by tau = {:.4}",
            map.tau_of_t(MULT_T_MAX)
        )));
    }
    let sol = physical::solve(&g, &sc, &ts)?;
    let physical: Vec<TransformCurve> = sol
        .densities
        .par_iter()
        .zip(&cfg.taus)
        .map(|(n, &tau)| kernel_transform(&to_selfsimilar(n, tau, &map), cfg.kernel, &sub))
        .collect::<Result<_>>()?;

    let mut max_discrepancy = Vec::with_capacity(cfg.taus.len());
    let (mut worst_tau, mut worst_eta, mut worst) = (0.0, sub[0], 0.0f64);
    for (j, &tau) in cfg.taus.iter().enumerate() {
        let mut m = 0.0f64;
        for (k, &i) in window.iter().enumerate() {
            let (a, b) = (physical[j].values[k], flows[j].values[i]);
            let d = (a - b).abs() / b.abs();
            if d > m {
                m = d;
            }
            if d > worst {
                (worst, worst_tau, worst_eta) = (d, tau, etas[i]);
            }
        }
        max_discrepancy.push(m);
    }
    let initial_mass = physical::FvState::from_density(&g, &sc.grid)?.mass();
    let tolerance = cfg.tolerance.unwrap_or_else(|| default_crossval_tolerance(cfg.kernel));
    let report = CrossvalReport {
        kernel: cfg.kernel,
        taus: cfg.taus.clone(),
        max_discrepancy,
        worst_tau,
        worst_eta,
        worst_discrepancy: worst,
        tolerance,
        truncated_mass: sol.truncated_mass() / initial_mass,
        passed: worst <= tolerance,
    };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
        sol.write_checkpoints(&dir.join("physical"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GelRateEntry {
    pub kappa: f64,
    pub distances: Vec<f64>,
    /// Least-squares exponent `a` in `d ~ (1 - t)^a`.
    pub fitted_exponent: Option<f64>,
    /// `(kappa - 2) / 2`: the self-similar rate composed with `t = 1 - e^{-tau}`.
    pub composed_exponent: f64,
    /// `kappa - 2`: the exponent as stated for original time.
    pub stated_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GelRateReport {
    pub taus: Vec<f64>,
    /// Original times `1 - e^{-tau}`.
    pub t: Vec<f64>,
    pub entries: Vec<GelRateEntry>,
    pub contraction_holds: bool,
    /// Allowed relative error of each fitted exponent against the composed one.
    pub tolerance: f64,
    pub passed: bool,
}

/// Default relative tolerance of the original-time exponent fit.
pub const GEL_RATE_TOLERANCE: f64 = 0.1;

impl GelRateReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("gel_rate.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Power-law exponent of `d` against `1 - t` over the default fit window
/// (expressed in `tau = -ln(1 - t)`).
pub fn fit_power_exponent(ts: &[f64], distances: &[f64]) -> Result<Option<f64>> {
    let taus: Vec<f64> = ts.iter().map(|t| -(-t).ln_1p()).collect();
    Ok(fit_rate_window(&taus, distances, DEFAULT_FIT_WINDOW)?.rate)
}

/// Multiplicative-kernel distances as functions of original time with the
/// fitted exponent next to both candidate exponents.
pub fn run_original_time_rate(cfg: &ExperimentConfig) -> Result<GelRateReport> {
    if cfg.kernel != KernelKind::Multiplicative {
        return Err(CoagError::Config("the original-time rate is defined for the multiplicative kernel".into()));
    }
    let run = run_contraction(&ExperimentConfig { output_dir: None, ..cfg.clone() })?;
    let map = make_scaling(KernelKind::Multiplicative);
    let t: Vec<f64> = cfg.taus.iter().map(|&tau| map.t_of_tau(tau)).collect();
    let entries: Vec<GelRateEntry> = run
        .report
        .entries
        .iter()
        .map(|e| -> Result<GelRateEntry> {
            let all_zero = e.distances.iter().all(|&d| d == 0.0);
            Ok(GelRateEntry {
                kappa: e.kappa,
                distances: e.distances.clone(),
                fitted_exponent: if all_zero { None } else { fit_power_exponent(&t, &e.distances)? },
                composed_exponent: 0.5 * (e.kappa - 2.0),
                stated_exponent: e.kappa - 2.0,
            })
        })
        .collect::<Result<_>>()?;
    let tolerance = cfg.rate_tolerance.unwrap_or(GEL_RATE_TOLERANCE);
    let contraction_holds = run.report.all_contract();
    let fits_ok = entries.iter().all(|e| match e.fitted_exponent {
        Some(a) => (a - e.composed_exponent).abs() <= tolerance * e.composed_exponent.abs(),
        None => e.distances.iter().all(|&d| d == 0.0),
    });
    let passed = contraction_holds && fits_ok && run.guard.as_ref().is_none_or(|g| g.passed);
    let report = GelRateReport { taus: cfg.taus.clone(), t, entries, contraction_holds, tolerance, passed };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// The exact self-similar profile of `kernel` on `grid` (default size grid
/// when `None`).
pub fn profile_density(kernel: KernelKind, grid: Option<(f64, f64, usize)>) -> GriddedDensity {
    match grid {
        Some((lo, hi, n)) => GriddedDensity::from_power_exp(catalog::profile(kernel), geometric(lo, hi, n)),
        None => catalog::exact_profile(kernel),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Settings;

    fn quick(text: &str) -> ExperimentConfig {
        Settings::parse(text).unwrap().build().unwrap()
    }

    #[test]
    fn identical_inputs_give_zero_distances() {
        let cfg = quick("kernel = const\ng1 = gamma(2,2)\ng2 = gamma(2,2)\neta_grid = 1e-4, 1e4, 120\ncheckpoints = 0, 0.5, 1, 1.5, 2");
        let run = run_contraction(&cfg).unwrap();
        assert!(run.passed);
        for e in &run.report.entries {
            assert!(e.distances.iter().all(|&d| d == 0.0));
            assert!(e.fitted_rate.is_none());
        }
    }

    #[test]
    fn synthetic_original_time_exponent() {
        let taus: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
        let ts: Vec<f64> = taus.iter().map(|&tau| -(-tau).exp_m1()).collect();
        let d: Vec<f64> = taus.iter().map(|&tau| (-0.25 * tau).exp()).collect();
        let a = fit_power_exponent(&ts, &d).unwrap().unwrap();
        assert!((a - 0.25).abs() < 1e-6, "{a}");
    }

    #[test]
    fn catalog_or_path() {
        let grid = geometric(1e-3, 10.0, 30);
        assert!(load_density("exp", &grid).unwrap().exact.is_some());
        assert!(matches!(load_density("no_such_density", &grid), Err(CoagError::UnknownName(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        crate::io::write_density(&path, &load_density("gamma(2,1)", &grid).unwrap()).unwrap();
        let back = load_density(path.to_str().unwrap(), &grid).unwrap();
        assert_eq!(back.len(), 30);
    }
}
