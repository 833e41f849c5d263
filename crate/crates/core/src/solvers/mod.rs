//! The momentum iteration and its specializations.
//!
//! Every scheme shares one loop:
//!
//! ```text
//! x_in  = x^k + β_k (x^k − x^{k−1})
//! x_ex  = x^k + γ_k (x^k − x^{k−1})
//! x^{k+1} = x_in − τ g^k,   ‖g^k − ∇f(x_ex)‖ ≤ ν‖g^k‖
//! ```
//!
//! and differs only in the [`GradientSupplier`] that produces `g^k`.
//! Extragradient and sharpness-aware steps satisfy the inexactness condition
//! when `τ₂ ≤ ν/(L(ν+1))`; the proximal-point step does when its inner prox
//! is certified. Running the two-point schemes on finite-difference base
//! gradients is experimental.

mod supply;

pub use supply::{
    egm_g, ippm_g, samm_g, ExactGradient, FiniteDiffGradient, GradientSupplier, ProxPointGradient, StepAux, Supplied,
    TwoPointGradient,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momentum::{feasibility_check, MomentumSchedule};
use crate::objective::Objective;
use crate::oracles::{AdaptiveDeltaPolicy, Checker, FdKind};
use crate::point::{vec_axpy, Point};
use crate::prox::{MoreauEnvelope, ProxFunction};
use crate::trace::{Record, RunTrace, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradTol {
    Absolute(f64),
    /// Multiple of `‖g^1‖`.
    Relative(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Step size; `τ₁` for the two-point schemes.
    pub tau: f64,
    pub tau2: Option<f64>,
    pub nu: f64,
    pub lambda: Option<f64>,
    /// Cap on counted value evaluations (the objective's counter).
    pub budget_evals: Option<u64>,
    pub grad_tol: GradTol,
    pub max_iters: u64,
    /// Refuse to iterate unless the global parameter conditions hold.
    pub theory_compliant: bool,
}

impl SolverParams {
    pub fn new(tau: f64, nu: f64) -> Result<Self> {
        let p = SolverParams {
            tau,
            tau2: None,
            nu,
            lambda: None,
            budget_evals: None,
            grad_tol: GradTol::Relative(1e-8),
            max_iters: 1_000_000,
            theory_compliant: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tau2(mut self, tau2: f64) -> Self {
        self.tau2 = Some(tau2);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_budget(mut self, evals: u64) -> Self {
        self.budget_evals = Some(evals);
        self
    }

    pub fn with_grad_tol(mut self, tol: GradTol) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_max_iters(mut self, iters: u64) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn theory_compliant(mut self, on: bool) -> Self {
        self.theory_compliant = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::invalid("nu", format!("must lie in (0, 1), got {}", self.nu)));
        }
        if let Some(t2) = self.tau2 {
            if !(t2 > 0.0 && t2.is_finite()) {
                return Err(Error::invalid("tau2", "must be positive"));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid("lambda", "must be positive"));
            }
        }
        match self.grad_tol {
            GradTol::Absolute(t) | GradTol::Relative(t) if t < 0.0 || t.is_nan() => {
                return Err(Error::invalid("grad_tol", "must be nonnegative"))
            }
            _ => {}
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub k: u64,
    pub beta: f64,
    pub gamma: f64,
    pub x_next: Point,
    pub x_in: Point,
    pub x_ex: Point,
    pub g: Point,
    pub aux: StepAux,
}

/// One iteration from `(x^k, x^{k−1})`.
pub fn igdm_step(
    x: &Point,
    x_prev: &Point,
    k: u64,
    schedule: &mut MomentumSchedule,
    tau: f64,
    supplier: &mut dyn GradientSupplier,
) -> Result<StepResult> {
    let (beta, gamma) = schedule.beta_gamma(k);
    let d = x.sub(x_prev)?;
    let x_in = vec_axpy(beta, &d, x)?;
    let x_ex = vec_axpy(gamma, &d, x)?;
    let Supplied { g, aux } = supplier.supply(&x_ex)?;
    let x_next = vec_axpy(-tau, &g, &x_in)?;
    Ok(StepResult {
        k,
        beta,
        gamma,
        x_next,
        x_in,
        x_ex,
        g,
        aux,
    })
}

/// Threshold `τ₂ ≤ ν/(L(ν+1))` under which two-point steps are inexact
/// gradient steps.
pub fn max_tau2(l: f64, nu: f64) -> f64 {
    nu / (l * (nu + 1.0))
}

fn preflight(f: &Objective, x0: &Point, schedule: &MomentumSchedule, params: &SolverParams) -> Result<()> {
    params.validate()?;
    if x0.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: x0.dim(),
        });
    }
    let bounds = schedule.bounds();
    match f.lipschitz() {
        Some(l) => {
            let feas = feasibility_check(l, params.tau, params.nu, bounds.beta_bar, bounds.delta_bar);
            let tau2_bad = params.tau2.filter(|&t2| t2 > max_tau2(l, params.nu));
            if params.theory_compliant {
                if !feas.is_feasible() {
                    return Err(Error::Infeasible(feas.describe()));
                }
                if let Some(t2) = tau2_bad {
                    return Err(Error::Infeasible(format!(
                        "tau2 = {t2} exceeds nu/(L(nu+1)) = {}",
                        max_tau2(l, params.nu)
                    )));
                }
            } else if !feas.is_feasible() {
                log::warn!(
                    "running with parameters outside the convergence conditions: {}",
                    feas.describe()
                );
            }
        }
        None if params.theory_compliant => return Err(Error::MissingLipschitz),
        None => {}
    }
    Ok(())
}

/// Runs the iteration from `x^0 = x^1 = x0` until the gradient tolerance,
/// the evaluation budget, `max_iters`, or an oracle failure stops it.
///
/// `f` supplies the monitored values, the counters and the budget; the
/// supplier produces `g^k`. The budget is applied to `f`'s value counter.
pub fn run(
    f: &Objective,
    x0: Point,
    schedule: MomentumSchedule,
    params: &SolverParams,
    supplier: &mut dyn GradientSupplier,
) -> Result<RunTrace> {
    run_with_observer(f, x0, schedule, params, supplier, &mut |_| {})
}

/// [`run`] with a callback on every completed step.
pub fn run_with_observer(
    f: &Objective,
    x0: Point,
    mut schedule: MomentumSchedule,
    params: &SolverParams,
    supplier: &mut dyn GradientSupplier,
    observer: &mut dyn FnMut(&StepResult),
) -> Result<RunTrace> {
    preflight(f, &x0, &schedule, params)?;
    let previous_limit = f.value_limit();
    if let Some(b) = params.budget_evals {
        f.set_value_limit(Some(b));
    }
    let out = iterate(f, x0, &mut schedule, params, supplier, observer);
    f.set_value_limit(previous_limit);
    out
}

fn iterate(
    f: &Objective,
    x0: Point,
    schedule: &mut MomentumSchedule,
    params: &SolverParams,
    supplier: &mut dyn GradientSupplier,
    observer: &mut dyn FnMut(&StepResult),
) -> Result<RunTrace> {
    let mut trace = RunTrace::new();
    let mut x_prev = x0.clone();
    let mut x = x0;
    let mut tol: Option<f64> = None;
    let mut k = 1u64;

    let record = |k: u64, x: &Point, beta: f64, gamma: f64| -> std::result::Result<Record, String> {
        let f_val = f.reference_value(x).map_err(|e| e.to_string())?;
        let grad_f = f.reference_gradient(x).transpose().map_err(|e| e.to_string())?;
        Ok(Record {
            k,
            x: x.clone(),
            f_val,
            g_norm: None,
            value_evals: 0,
            grad_evals: 0,
            lyapunov_h: None,
            step_norm: 0.0,
            beta,
            gamma,
            grad_f,
            descent_ok: None,
        })
    };
    let stamp = |mut r: Record| {
        r.value_evals = f.value_evals();
        r.grad_evals = f.grad_evals();
        r
    };

    let termination = loop {
        if k > params.max_iters {
            let (beta, gamma) = schedule.beta_gamma(k);
            match record(k, &x, beta, gamma) {
                Ok(r) => trace.push(stamp(r))?,
                Err(msg) => break Termination::Aborted(msg),
            }
            break Termination::MaxIters;
        }
        let mut rec = match record(k, &x, 0.0, 0.0) {
            Ok(r) => r,
            Err(msg) => break Termination::Aborted(msg),
        };
        let step = igdm_step(&x, &x_prev, k, schedule, params.tau, supplier);
        let (beta, gamma) = schedule.beta_gamma(k);
        rec.beta = beta;
        rec.gamma = gamma;
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                let t = match &e {
                    Error::BudgetExhausted { .. } => Termination::BudgetExhausted,
                    Error::StationaryOrBudget { best, .. } => {
                        rec.g_norm = Some(best.norm());
                        Termination::BacktrackCap
                    }
                    Error::ProxNotCertified { .. } => Termination::ProxNotCertified,
                    other => Termination::Aborted(other.to_string()),
                };
                trace.push(stamp(rec))?;
                break t;
            }
        };
        let g_norm = step.g.norm();
        rec.g_norm = Some(g_norm);
        let threshold = *tol.get_or_insert(match params.grad_tol {
            GradTol::Absolute(t) => t,
            GradTol::Relative(t) => t * g_norm,
        });
        if step.g.is_zero() || g_norm <= threshold {
            trace.push(stamp(rec))?;
            break if step.g.is_zero() && threshold == 0.0 {
                Termination::Stationary
            } else {
                Termination::GradTol
            };
        }
        rec.step_norm = step.x_next.distance(&x)?;
        trace.push(stamp(rec))?;
        observer(&step);
        x_prev = std::mem::replace(&mut x, step.x_next);
        k += 1;
    };
    trace.set_termination(termination);
    Ok(trace)
}

/// Smooth schemes selectable by configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Igdm,
    Egm,
    Samm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "snake_case")]
pub enum OracleConfig {
    Exact,
    FiniteDiff {
        kind: FdKind,
        policy: AdaptiveDeltaPolicy,
        checker: Checker,
    },
}

fn base_supplier<'a>(f: &'a Objective, oracle: &OracleConfig, nu: f64) -> Box<dyn GradientSupplier + 'a> {
    match *oracle {
        OracleConfig::Exact => Box::new(ExactGradient { f }),
        OracleConfig::FiniteDiff { kind, policy, checker } => Box::new(FiniteDiffGradient {
            f,
            kind,
            policy,
            nu,
            checker,
        }),
    }
}

/// Runs `scheme` on a smooth objective.
pub fn solve(
    f: &Objective,
    x0: Point,
    scheme: Scheme,
    schedule: MomentumSchedule,
    params: &SolverParams,
    oracle: &OracleConfig,
) -> Result<RunTrace> {
    let base = base_supplier(f, oracle, params.nu);
    let tau2 = || {
        params
            .tau2
            .ok_or_else(|| Error::invalid("tau2", "two-point schemes need tau2"))
    };
    let mut supplier: Box<dyn GradientSupplier + '_> = match scheme {
        Scheme::Igdm => base,
        Scheme::Egm => Box::new(TwoPointGradient::extragradient(base, tau2()?)?),
        Scheme::Samm => Box::new(TwoPointGradient::sharpness_aware(base, tau2()?)?),
    };
    run(f, x0, schedule, params, supplier.as_mut())
}

/// Inexact proximal point with momentum on `h`, monitored through its
/// Moreau envelope `e_λh`.
pub fn solve_ippm(
    h: &ProxFunction,
    x0: Point,
    schedule: MomentumSchedule,
    params: &SolverParams,
    inner_budget: usize,
) -> Result<RunTrace> {
    let lambda = params
        .lambda
        .ok_or_else(|| Error::invalid("lambda", "IPPm needs lambda"))?;
    let envelope = MoreauEnvelope::new(h.clone(), lambda)?.to_objective(x0.dim());
    let mut supplier = ProxPointGradient {
        h,
        lambda,
        nu: params.nu,
        inner_budget,
    };
    run(&envelope, x0, schedule, params, &mut supplier)
}
