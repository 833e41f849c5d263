//! Derivative-free experiment matrix: problems × noise × methods × seeds.
//!
//! Each cell builds its own seeded instance, runs the finite-difference
//! method under a budget of `budget_multiplier · n` value evaluations and
//! writes `<cell>.csv` plus `<cell>.meta.json`. [`run_matrix`] aggregates
//! the cells into `summary.json`.

mod config;
mod csv_io;

pub use config::{ExperimentConfig, MethodSpec, Noise, ProblemSpec};
pub use csv_io::{
    emit_csv, evals_to_target, meta_path, read_meta, read_trace_csv, write_json, CellMeta, CsvRow, CSV_HEADER,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{annotate, lyapunov_constants};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::oracles::{noisy_wrap, AdaptiveDeltaPolicy, NoiseModel};
use crate::point::Point;
use crate::solvers::{solve, GradTol, OracleConfig, Scheme, SolverParams};
use crate::trace::{RunTrace, Termination};

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub problem: ProblemSpec,
    pub noise: Noise,
    pub method: MethodSpec,
    pub seed: u64,
}

impl Cell {
    /// File stem, e.g. `L50_off_DFn-cendif_s3`.
    pub fn stem(&self) -> String {
        let problem = self.problem.to_string().replace(':', "-");
        format!("{problem}_{}_{}_s{}", self.noise.label(), self.method, self.seed)
    }
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &problem in &cfg.problems {
        for &noise in &cfg.noise {
            for method in &cfg.methods {
                for &seed in &cfg.seeds {
                    out.push(Cell {
                        problem,
                        noise,
                        method: method.clone(),
                        seed,
                    });
                }
            }
        }
    }
    out
}

fn noise_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03
}

#[derive(Debug)]
pub struct CellRun {
    pub meta: CellMeta,
    pub trace: RunTrace,
}

/// Runs one cell without touching the filesystem.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellRun> {
    let inst = cell.problem.build(cell.seed)?;
    let n = cell.problem.n();
    let objective = match cell.noise {
        Noise::Off => inst.objective,
        Noise::On => noisy_wrap(
            &inst.objective,
            NoiseModel::new(cfg.noise_amplitude, noise_seed(cell.seed))?,
        ),
    };
    let l = objective.lipschitz();
    let tau = match (cfg.tau, l) {
        (Some(t), _) => t,
        (None, Some(l)) => 0.9 * (1.0 - cfg.nu) / l,
        (None, None) => return Err(Error::MissingLipschitz),
    };
    let mut schedule = cell.method.schedule(l, objective.strong_convexity())?;
    if let Some(cap) = cfg.momentum_cap {
        schedule = schedule.with_cap(cap)?;
    }
    let budget = cfg.budget_multiplier * n as u64;
    let params = SolverParams::new(tau, cfg.nu)?
        .with_budget(budget)
        .with_max_iters(budget.max(1))
        .with_grad_tol(GradTol::Absolute(0.0));
    let oracle = OracleConfig::FiniteDiff {
        kind: cell.method.fd,
        policy: AdaptiveDeltaPolicy::new(cfg.theta, cfg.epsilon0, cfg.max_backtracks)?,
        checker: cfg.checker,
    };
    let mut trace = solve(&objective, Point::zeros(n), Scheme::Igdm, schedule, &params, &oracle)?;

    let (beta_bar, delta_bar) = trace.observed_bounds();
    let descent_violations = match l.map(|l| lyapunov_constants(l, tau, cfg.nu, beta_bar, delta_bar)) {
        Some(Ok(c)) => Some(annotate(&mut trace, &c)?.violations.len()),
        _ => None,
    };
    let rows: Vec<(u64, f64)> = trace.records().iter().map(|r| (r.value_evals, r.f_val)).collect();
    let meta = CellMeta {
        problem: cell.problem.to_string(),
        n,
        seed: cell.seed,
        noise: cell.noise,
        method: cell.method.to_string(),
        lipschitz: l,
        tau,
        nu: cfg.nu,
        beta_bar,
        delta_bar,
        fstar: inst.known_fstar,
        budget,
        target_ratio: cfg.target_ratio,
        termination: trace.termination().map(|t| t.label().to_string()).unwrap_or_default(),
        evals_to_target: inst
            .known_fstar
            .and_then(|fs| evals_to_target(&rows, fs, cfg.target_ratio)),
        final_best: trace.best_values().last().copied().unwrap_or(f64::NAN),
        last_value_evals: trace.last().map(|r| r.value_evals).unwrap_or(0),
        descent_violations,
        csv: format!("{}.csv", cell.stem()),
    };
    Ok(CellRun { meta, trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub seed: u64,
    pub csv: String,
    pub evals_to_target: Option<u64>,
    pub final_best: f64,
    pub last_value_evals: u64,
    pub termination: String,
    pub descent_violations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: String,
    pub noise: Noise,
    pub method: String,
    pub budget: u64,
    pub runs: Vec<RunEntry>,
    /// Runs that never reach the target count as `budget + 1`.
    pub median_evals_to_target: Option<f64>,
    pub reached: usize,
    pub median_final_best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestMethod {
    pub problem: String,
    pub noise: Noise,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub problem: String,
    pub noise: Noise,
    pub method: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub budget_multiplier: u64,
    pub target_ratio: f64,
    pub cells: Vec<CellSummary>,
    pub best_method: Vec<BestMethod>,
    pub failures: Vec<Failure>,
}

impl Summary {
    pub fn cell(&self, problem: &str, noise: Noise, method: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.problem == problem && c.noise == noise && c.method == method)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Groups per-seed results by (problem, noise, method), preserving the
/// config order, and picks the best method per (problem, noise): lowest
/// median evals-to-target, then lowest median final best value.
pub fn summarize(cfg: &ExperimentConfig, metas: &[CellMeta], failures: Vec<Failure>) -> Summary {
    let mut cells: Vec<CellSummary> = Vec::new();
    for meta in metas {
        let entry = RunEntry {
            seed: meta.seed,
            csv: meta.csv.clone(),
            evals_to_target: meta.evals_to_target,
            final_best: meta.final_best,
            last_value_evals: meta.last_value_evals,
            termination: meta.termination.clone(),
            descent_violations: meta.descent_violations,
        };
        match cells
            .iter_mut()
            .find(|c| c.problem == meta.problem && c.noise == meta.noise && c.method == meta.method)
        {
            Some(c) => c.runs.push(entry),
            None => cells.push(CellSummary {
                problem: meta.problem.clone(),
                noise: meta.noise,
                method: meta.method.clone(),
                budget: meta.budget,
                runs: vec![entry],
                median_evals_to_target: None,
                reached: 0,
                median_final_best: f64::NAN,
            }),
        }
    }
    let has_fstar = |c: &CellSummary| {
        metas
            .iter()
            .any(|m| m.problem == c.problem && m.method == c.method && m.fstar.is_some())
    };
    for c in &mut cells {
        c.reached = c.runs.iter().filter(|r| r.evals_to_target.is_some()).count();
        if has_fstar(c) {
            let mut e: Vec<f64> = c
                .runs
                .iter()
                .map(|r| r.evals_to_target.map_or(c.budget as f64 + 1.0, |v| v as f64))
                .collect();
            c.median_evals_to_target = median(&mut e);
        }
        let mut b: Vec<f64> = c.runs.iter().map(|r| r.final_best).collect();
        c.median_final_best = median(&mut b).unwrap_or(f64::NAN);
    }

    let mut best_method = Vec::new();
    for problem in &cfg.problems {
        for &noise in &cfg.noise {
            let label = problem.to_string();
            let key = |c: &CellSummary| (c.median_evals_to_target.unwrap_or(f64::INFINITY), c.median_final_best);
            let best = cells
                .iter()
                .filter(|c| c.problem == label && c.noise == noise)
                .min_by(|a, b| {
                    let (ka, kb) = (key(a), key(b));
                    ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
                });
            if let Some(b) = best {
                best_method.push(BestMethod {
                    problem: label,
                    noise,
                    method: b.method.clone(),
                });
            }
        }
    }
    Summary {
        budget_multiplier: cfg.budget_multiplier,
        target_ratio: cfg.target_ratio,
        cells,
        best_method,
        failures,
    }
}

fn execution(cfg: &ExperimentConfig) -> Execution {
    match cfg.workers {
        0 => Execution::Auto,
        w => Execution::workers(w),
    }
}

/// Runs every cell in memory and summarizes without writing files.
pub fn run_matrix_in_memory(cfg: &ExperimentConfig) -> Result<(Summary, Vec<CellRun>)> {
    cfg.validate()?;
    let cells = cells(cfg);
    let results = exec::map(execution(cfg), cells.clone(), |cell| run_cell(cfg, &cell));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (cell, res) in cells.into_iter().zip(results) {
        match res {
            Ok(run) => {
                if let Some(Termination::Aborted(msg)) = run.trace.termination() {
                    failures.push(failure(&cell, msg.clone()));
                }
                runs.push(run)
            }
            Err(e) => failures.push(failure(&cell, e.to_string())),
        }
    }
    let metas: Vec<CellMeta> = runs.iter().map(|r| r.meta.clone()).collect();
    Ok((summarize(cfg, &metas, failures), runs))
}

fn failure(cell: &Cell, error: String) -> Failure {
    Failure {
        problem: cell.problem.to_string(),
        noise: cell.noise,
        method: cell.method.to_string(),
        seed: cell.seed,
        error,
    }
}

/// Runs all cells, writing per-cell CSVs and sidecars plus `summary.json`
/// into `cfg.output_dir`. A failing cell is recorded and the rest proceed.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let cells = cells(cfg);
    log::info!("running {} cells into {}", cells.len(), dir.display());
    let results = exec::map(execution(cfg), cells.clone(), |cell| run_and_write(cfg, &cell, dir));
    let mut metas = Vec::new();
    let mut failures = Vec::new();
    for (cell, res) in cells.into_iter().zip(results) {
        match res {
            Ok((meta, aborted)) => {
                if let Some(msg) = aborted {
                    failures.push(failure(&cell, msg));
                }
                metas.push(meta);
            }
            Err(e) => {
                log::error!("cell {} failed: {e}", cell.stem());
                failures.push(failure(&cell, e.to_string()));
            }
        }
    }
    let summary = summarize(cfg, &metas, failures);
    write_json(&summary, &dir.join("summary.json"))?;
    Ok(summary)
}

fn run_and_write(cfg: &ExperimentConfig, cell: &Cell, dir: &Path) -> Result<(CellMeta, Option<String>)> {
    let run = run_cell(cfg, cell)?;
    let csv = dir.join(&run.meta.csv);
    emit_csv(&run.trace, &csv)?;
    write_json(&run.meta, &meta_path(&csv))?;
    let aborted = match run.trace.termination() {
        Some(Termination::Aborted(msg)) => Some(msg.clone()),
        _ => None,
    };
    log::debug!(
        "{}: {} after {} evals",
        cell.stem(),
        run.meta.termination,
        run.meta.last_value_evals
    );
    Ok((run.meta, aborted))
}
