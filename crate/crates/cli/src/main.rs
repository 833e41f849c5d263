use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use igdm::diagnostics::{check_descent_series, fit_rate, lyapunov_constants};
use igdm::harness::{meta_path, read_meta, read_trace_csv, run_matrix, CellMeta, CsvRow, ExperimentConfig, Noise};

#[derive(Parser)]
#[command(
    name = "igdm",
    version,
    about = "Derivative-free momentum experiments and trace diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix and write CSV traces plus summary.json.
    Run(RunArgs),
    /// Re-verify the Lyapunov descent inequality on a trace CSV.
    Check {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Fit a geometric or power rate to a trace CSV.
    Rates {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated, e.g. L50,N100.
    #[arg(long, value_delimiter = ',')]
    problems: Option<Vec<String>>,
    #[arg(long, value_parser = ["on", "off"])]
    noise: Option<String>,
    /// Comma-separated, e.g. DF-fordif,DFn-cendif.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

fn config_err(e: impl Into<anyhow::Error>) -> ConfigError {
    ConfigError(e.into())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(config_err)?;
    if let Some(p) = &args.problems {
        cfg.problems = p
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(config_err)?;
    }
    if let Some(n) = &args.noise {
        cfg.noise = vec![n.parse::<Noise>().map_err(config_err)?];
    }
    if let Some(m) = &args.methods {
        cfg.methods = m
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(config_err)?;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<ExitCode, ConfigError> {
    let cfg = load_config(args)?;
    let summary = run_matrix(&cfg).map_err(config_err)?;
    for c in &summary.cells {
        println!(
            "{:6} noise={:3} {:12} median evals-to-target {:>9} ({}/{} reached), median best {:.6e}",
            c.problem,
            c.noise.label(),
            c.method,
            c.median_evals_to_target.map_or("-".to_string(), |m| m.to_string()),
            c.reached,
            c.runs.len(),
            c.median_final_best
        );
    }
    for b in &summary.best_method {
        println!("best {} noise={}: {}", b.problem, b.noise.label(), b.method);
    }
    for f in &summary.failures {
        eprintln!(
            "failed {} noise={} {} seed {}: {}",
            f.problem,
            f.noise.label(),
            f.method,
            f.seed,
            f.error
        );
    }
    println!("wrote {}", cfg.output_dir.join("summary.json").display());
    Ok(if summary.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn load_trace(path: &Path) -> Result<(Vec<CsvRow>, Option<CellMeta>), ConfigError> {
    let rows = read_trace_csv(path).map_err(config_err)?;
    if rows.is_empty() {
        return Err(config_err(anyhow!("{} has no records", path.display())));
    }
    let meta_file = meta_path(path);
    let meta = if meta_file.exists() {
        Some(read_meta(&meta_file).map_err(config_err)?)
    } else {
        None
    };
    Ok((rows, meta))
}

fn check(path: &Path) -> Result<ExitCode, ConfigError> {
    let (rows, meta) = load_trace(path)?;
    let meta = meta.ok_or_else(|| {
        config_err(anyhow!(
            "{} is missing; it carries L, tau and nu",
            meta_path(path).display()
        ))
    })?;
    let l = meta
        .lipschitz
        .ok_or_else(|| config_err(anyhow!("trace has no Lipschitz constant")))?;
    let consts = match lyapunov_constants(l, meta.tau, meta.nu, meta.beta_bar, meta.delta_bar) {
        Ok(c) => c,
        Err(e) => {
            println!("no Lyapunov constants for this run: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let ks: Vec<u64> = rows.iter().map(|r| r.k).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.f_val).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.step_norm).collect();
    let report = check_descent_series(&ks, &f, &s, &consts).map_err(config_err)?;
    println!(
        "alpha = {:e}, C1 = {:e}, C2 = {:e}; checked {} steps, {} violations",
        consts.alpha,
        consts.c1,
        consts.c2,
        report.checked,
        report.violations.len()
    );
    if report.gradient_check_skipped {
        println!("gradient bound skipped: traces do not store gradients");
    }
    for v in report.violations.iter().take(10) {
        println!("  k = {}: {:e} > {:e}", v.k, v.lhs, v.rhs);
    }
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn rates(path: &Path) -> Result<ExitCode, ConfigError> {
    let (rows, meta) = load_trace(path)?;
    let (series, errors): (&str, Vec<f64>) = match meta.and_then(|m| m.fstar) {
        Some(fstar) => (
            "f - f*",
            rows.iter().map(|r| r.f_val - fstar).take_while(|e| *e > 0.0).collect(),
        ),
        None => (
            "g_norm",
            rows.iter().map_while(|r| r.g_norm).take_while(|e| *e > 0.0).collect(),
        ),
    };
    let fit = fit_rate(&errors)
        .with_context(|| format!("fitting {series}"))
        .map_err(config_err)?;
    let out = serde_json::json!({ "series": series, "samples": errors.len(), "fit": fit });
    println!("{}", serde_json::to_string_pretty(&out).map_err(config_err)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Check { trace } => check(trace),
        Command::Rates { trace } => rates(trace),
    };
    match result {
        Ok(code) => code,
        Err(ConfigError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
