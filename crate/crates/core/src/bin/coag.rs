//! Command-line front end: contraction runs, cross-validation against the
//! physical solver, the original-time rate near gelation, profile dumps and
//! one-shot transforms.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coag_core::error::Result;
use coag_core::harness::config::GridSpec;
use coag_core::harness::run::profile_density;
use coag_core::harness::{load_density, run_contraction, run_crossval, run_original_time_rate, Settings};
use coag_core::io::{curve_to_csv, density_to_csv};
use coag_core::{bernstein, grid, laplace, mult_bernstein, CoagError, KernelKind};

#[derive(Parser)]
#[command(name = "coag", version, about = "Self-similar coagulation dynamics and contraction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distances between two evolved solutions and their decay rates.
    Contract(ExperimentArgs),
    /// Transform flow against the finite-volume solver.
    Crossval(ExperimentArgs),
    /// Multiplicative-kernel distances against original time near gelation.
    GelRate(ExperimentArgs),
    /// Dump the exact self-similar profile of a kernel as CSV.
    Profile(ProfileArgs),
    /// Transform a density (CSV path or catalog name) on an eta grid.
    Transform(TransformArgs),
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// Named preset: thm1, thm2 or thm3.
    #[arg(long)]
    preset: Option<String>,
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// const, add or mult.
    #[arg(long)]
    kernel: Option<String>,
    /// First initial density (catalog name or CSV path).
    #[arg(long)]
    g1: Option<String>,
    /// Second initial density (catalog name or CSV path).
    #[arg(long)]
    g2: Option<String>,
    /// Weight exponent; repeat for several.
    #[arg(long)]
    kappa: Vec<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    /// Either a count of equal intervals up to tau-max or a comma list of taus.
    #[arg(long)]
    checkpoints: Option<String>,
    /// transform_closed_form, transform_ode_fallback or physical.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory for JSON/CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    allow_out_of_range: bool,
    /// Cross-validation tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Relative tolerance on fitted rates or exponents.
    #[arg(long)]
    rate_tolerance: Option<f64>,
    /// Size grid as lo,hi,n.
    #[arg(long)]
    size_grid: Option<String>,
    /// Eta grid as lo,hi,n.
    #[arg(long)]
    eta_grid: Option<String>,
    /// Physical-solver time step.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    kernel: String,
    /// Size grid as lo,hi,n; the default grid otherwise.
    #[arg(long)]
    size_grid: Option<String>,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransformArgs {
    /// Catalog name or CSV path.
    input: String,
    /// laplace, bernstein or mult_bernstein.
    #[arg(long, default_value = "bernstein")]
    kind: String,
    /// Eta grid as lo,hi,n; the default grid otherwise.
    #[arg(long)]
    eta_grid: Option<String>,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn settings(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(p) => Settings::read(p)?,
            None => Settings::new(),
        };
        let mut flags = Settings::new();
        let mut put = |k: &str, v: Option<String>| -> Result<()> {
            if let Some(v) = v {
                flags.set(k, &v)?;
            }
            Ok(())
        };
        put("preset", self.preset.clone())?;
        put("kernel", self.kernel.clone())?;
        put("g1", self.g1.clone())?;
        put("g2", self.g2.clone())?;
        if !self.kappa.is_empty() {
            put("kappa", Some(self.kappa.iter().map(f64::to_string).collect::<Vec<_>>().join(",")))?;
        }
        put("tau_max", self.tau_max.map(|v| v.to_string()))?;
        put("checkpoints", self.checkpoints.clone())?;
        put("solver", self.solver.clone())?;
        put("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        put("allow_out_of_range", self.allow_out_of_range.then(|| "true".to_string()))?;
        put("tolerance", self.tolerance.map(|v| v.to_string()))?;
        put("rate_tolerance", self.rate_tolerance.map(|v| v.to_string()))?;
        put("size_grid", self.size_grid.clone())?;
        put("eta_grid", self.eta_grid.clone())?;
        put("dt", self.dt.map(|v| v.to_string()))?;
        Ok(base.layered(&flags))
    }
}

fn parse_grid(spec: Option<&str>, default: Vec<f64>) -> Result<Vec<f64>> {
    match spec {
        Some(s) => Ok(GridSpec::parse(s)?.points()),
        None => Ok(default),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |r| format!("{r:.5}"))
}

fn prepare_out(out: &Option<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn contract(args: &ExperimentArgs) -> Result<bool> {
    let cfg = args.settings()?.build()?;
    prepare_out(&cfg.output_dir)?;
    let run = run_contraction(&cfg)?;
    println!("kernel {} solver {} g1 {} g2 {}", cfg.kernel, cfg.solver, if cfg.profile_mode { "profile" } else { &cfg.g1 }, cfg.g2);
    println!("{:>6} {:>10} {:>10} {:>10} {:>9}", "kappa", "fitted", "theorem", "rel.err", "contracts");
    for e in &run.report.entries {
        println!(
            "{:>6} {:>10} {:>10.5} {:>10} {:>9}",
            e.kappa,
            fmt_opt(e.fitted_rate),
            e.theorem_rate,
            fmt_opt(e.rate_error),
            if e.contraction_holds { "yes" } else { "NO" }
        );
    }
    if let Some(g) = &run.guard {
        let worst = g.max_relative_difference.iter().cloned().fold(0.0, f64::max);
        println!("ode guard: max difference {worst:.3e} (tolerance {:.0e}) {}", g.tolerance, if g.passed { "ok" } else { "FAILED" });
    }
    if let Some(ok) = run.rates_within_tolerance {
        println!("rates within tolerance: {}", if ok { "yes" } else { "NO" });
    }
    Ok(run.passed)
}

fn crossval(args: &ExperimentArgs) -> Result<bool> {
    let cfg = args.settings()?.build()?;
    prepare_out(&cfg.output_dir)?;
    let r = run_crossval(&cfg)?;
    println!("kernel {} g {}", cfg.kernel, cfg.g2);
    for (tau, d) in r.taus.iter().zip(&r.max_discrepancy) {
        println!("tau {tau:>6}  max discrepancy {d:.3e}");
    }
    println!(
        "worst {:.3e} at tau {} eta {:.4e}; tolerance {:.0e}; truncated mass {:.2e}: {}",
        r.worst_discrepancy,
        r.worst_tau,
        r.worst_eta,
        r.tolerance,
        r.truncated_mass,
        if r.passed { "ok" } else { "FAILED" }
    );
    Ok(r.passed)
}

fn gel_rate(args: &ExperimentArgs) -> Result<bool> {
    let mut settings = args.settings()?;
    if settings.get("kernel").is_none() && settings.get("preset").is_none() {
        settings.set("kernel", "mult")?;
    }
    let cfg = settings.build()?;
    prepare_out(&cfg.output_dir)?;
    let r = run_original_time_rate(&cfg)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "kappa", "fitted", "composed", "stated");
    for e in &r.entries {
        println!("{:>6} {:>10} {:>10.5} {:>10.5}", e.kappa, fmt_opt(e.fitted_exponent), e.composed_exponent, e.stated_exponent);
    }
    println!("contraction holds: {}", if r.contraction_holds { "yes" } else { "NO" });
    println!("exponents within {:.0}% of composed: {}", 100.0 * r.tolerance, if r.passed { "yes" } else { "NO" });
    Ok(r.passed)
}

fn profile(args: &ProfileArgs) -> Result<bool> {
    let kernel: KernelKind = args.kernel.parse()?;
    let grid = args.size_grid.as_deref().map(GridSpec::parse).transpose()?.map(|g| (g.lo, g.hi, g.n));
    emit(&density_to_csv(&profile_density(kernel, grid)), args.out.as_deref())?;
    Ok(true)
}

fn transform(args: &TransformArgs) -> Result<bool> {
    let f = load_density(&args.input, &grid::default_size_grid())?;
    let etas = parse_grid(args.eta_grid.as_deref(), grid::default_eta_grid())?;
    let curve = match args.kind.trim() {
        "laplace" => laplace(&f, &etas)?,
        "bernstein" => bernstein(&f, &etas)?,
        "mult_bernstein" | "mult-bernstein" => mult_bernstein(&f, &etas)?,
        other => return Err(CoagError::UnknownName(format!("transform kind '{other}'"))),
    };
    emit(&curve_to_csv(&curve), args.out.as_deref())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Contract(a) => contract(a),
        Command::Crossval(a) => crossval(a),
        Command::GelRate(a) => gel_rate(a),
        Command::Profile(a) => profile(a),
        Command::Transform(a) => transform(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
