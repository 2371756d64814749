use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use sphere_ineq_cli::commands::{g_table_csv, sweep_csv};
use sphere_ineq_cli::config::{parse_real, RunConfig};
use sphere_ineq_cli::{
    cmd_fuzz_inequality, cmd_g_curve, cmd_monotonicity, cmd_spectrum, cmd_sweep, cmd_verify_closed_form, CliError,
    Format, Report, SpectrumMode,
};

/// Reproducible numerical checks of the center-of-mass corrected
/// Moser–Trudinger–Onofri inequality on the two-sphere.
///
/// Exit status: 0 when every check passes, 2 when a check fails, 1 on a
/// usage or configuration error.
#[derive(Parser, Debug)]
#[command(name = "sphere-ineq", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Band limit L of the harmonic basis.
    #[arg(long, global = true)]
    lmax: Option<usize>,
    /// Quadrature grid as RINGSxAZIMUTHS, for example 48x96.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Base seed of the random fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Slack allowed on fuzzed inequality margins.
    #[arg(long, global = true)]
    tol_report: Option<f64>,
    /// File of `key = value` settings (lmax, grid, n_theta, n_phi, tol_el,
    /// tol_c, tol_report, seed, out, format); command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn real(s: &str) -> Result<f64, String> {
    parse_real(s)
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mass, center, residual, energy and mean checks of the explicit α = 2/3 family.
    VerifyClosedForm {
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0,0.3,0.6,0.9")]
        a: Vec<f64>,
    },
    /// Minimum of I_α − (α − 2/3)∫|∇u|² over seeded random fields.
    FuzzInequality {
        #[arg(long, value_parser = real, default_value = "2/3")]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Centers along which the explicit family is followed when α < 2/3.
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0.5,0.7,0.8,0.9,0.95,0.99")]
        a: Vec<f64>,
    },
    /// Constrained minima m(α, a) against their analytic brackets.
    #[command(after_help = "CSV columns (--format csv): alpha,a,m_value,lower_bound,upper_bound,dirichlet,beta3,converged")]
    Sweep {
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0.55,0.6,2/3,0.7,0.75,0.8")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0.2,0.5,0.8")]
        a: Vec<f64>,
    },
    /// Second variation at zero, kernel dimensions or the conformal eigenvalue ladder.
    Spectrum {
        #[arg(long, value_enum, default_value = "conformal")]
        mode: SpectrumMode,
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0.6,2/3,0.75,1")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0,0.3,0.5,0.8")]
        a: Vec<f64>,
    },
    /// Gram-determinant margins over random positive densities and the g(t) table.
    #[command(after_help = "CSV columns (--format csv): t,g,g_prime,g_quadrature")]
    Monotonicity {
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// g(t) in closed form against quadrature.
    #[command(after_help = "CSV columns (--format csv): t,g,g_prime,g_quadrature")]
    GCurve {
        #[arg(long, value_delimiter = ',', value_parser = real, default_value = "0.001,0.01,0.1,0.5,1,2,10,100,1000")]
        t: Vec<f64>,
    },
}

fn resolve_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        cfg.apply_file(path)?;
    }
    if let Some(l) = c.lmax {
        cfg.l_max = l;
    }
    if let Some(g) = &c.grid {
        cfg.set("grid", g)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_path = Some(o.clone());
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    if let Some(t) = c.tol_report {
        cfg.tol_report = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let cfg = resolve_config(&cli.common)?;
    let out = cfg.output_path.clone();
    let (report, table) = match &cli.command {
        Command::VerifyClosedForm { a } => (cmd_verify_closed_form(&cfg, a)?, None),
        Command::FuzzInequality { alpha, samples, a } => (cmd_fuzz_inequality(&cfg, *alpha, *samples, a)?, None),
        Command::Sweep { alpha, a } => {
            let (r, rows) = cmd_sweep(&cfg, alpha, a)?;
            (r, Some(sweep_csv(&rows)?))
        }
        Command::Spectrum { mode, alpha, a } => (cmd_spectrum(&cfg, *mode, alpha, a)?, None),
        Command::Monotonicity { samples } => {
            let (r, t) = cmd_monotonicity(&cfg, *samples)?;
            (r, Some(g_table_csv(&t)?))
        }
        Command::GCurve { t } => {
            let (r, tab) = cmd_g_curve(&cfg, t)?;
            (r, Some(g_table_csv(&tab)?))
        }
    };
    let text = match cfg.format {
        Format::Json => report.to_json(),
        Format::Csv => match table {
            Some(t) => t,
            None => report.records_csv()?,
        },
    };
    emit(&text, out.as_deref())?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(report) => {
            let failed = report.n_failed();
            eprintln!(
                "{}: {}/{} checks passed in {:.2}s",
                report.command,
                report.records.len() - failed,
                report.records.len(),
                report.wall_time
            );
            for r in report.records.iter().filter(|r| !r.pass) {
                eprintln!("  FAIL {} measured {:e} expected {:e} tol {:e}", r.name, r.measured, r.expected, r.tolerance);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
