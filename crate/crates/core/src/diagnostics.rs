//! Lyapunov constants, descent verification and empirical rates.
//!
//! Along `z^k = (x^k, x^{k−1})` with `H_α(x, y) = f(x) + α‖x − y‖²`, feasible
//! parameters guarantee
//!
//! ```text
//! C1 ‖z^{k+1} − z^k‖² ≤ H_α(z^k) − H_α(z^{k+1})
//! ‖∇H_α(z^k)‖        ≤ C2 ‖z^{k+1} − z^k‖
//! ```
//!
//! so every violation beyond rounding is a bug.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momentum::feasibility_check;
use crate::objective::Objective;
use crate::point::Point;
use crate::trace::RunTrace;

pub const DESCENT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn lyapunov_constants(l: f64, tau: f64, nu: f64, beta_bar: f64, delta_bar: f64) -> Result<LyapunovConstants> {
    let feas = feasibility_check(l, tau, nu, beta_bar, delta_bar);
    if !feas.is_feasible() {
        return Err(Error::Infeasible(feas.describe()));
    }
    let lt = l * tau;
    let b2 = (lt + 1.0) * beta_bar * beta_bar;
    let alpha = (b2 + 1.0 - nu) / (4.0 * tau);
    let c1 = (1.0 - nu - b2 - 2.0 * lt * delta_bar) / (4.0 * tau);
    let c2 = 2f64.sqrt() * ((nu + 1.0) / tau).max((beta_bar * (lt + nu + 1.0) + lt * delta_bar) / tau) + 4.0 * alpha;
    if c1 <= 0.0 {
        return Err(Error::Infeasible(format!("C1 = {c1} is not positive")));
    }
    Ok(LyapunovConstants { alpha, c1, c2 })
}

/// `f(x) + α‖x − x_prev‖²`, counted as one value evaluation.
pub fn lyapunov_value(f: &Objective, alpha: f64, x: &Point, x_prev: &Point) -> Result<f64> {
    let d = x.distance(x_prev)?;
    Ok(f.value(x)? + alpha * d * d)
}

fn h_at(f_val: f64, alpha: f64, d2: f64) -> f64 {
    f_val + alpha * d2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Descent,
    GradientBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: u64,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub violations: Vec<Violation>,
    /// Number of `k` at which the inequalities were evaluated.
    pub checked: usize,
    /// Set when some record lacked `∇f(x^k)`.
    pub gradient_check_skipped: bool,
}

impl DescentReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies both inequalities for `k = 1, …, K−1` over a trace of `K`
/// records and writes `H_α(z^k)` and a per-`k` verdict into the records.
pub fn annotate(trace: &mut RunTrace, consts: &LyapunovConstants) -> Result<DescentReport> {
    let alpha = consts.alpha;
    let mut report = DescentReport::default();
    let records = trace.records_mut();
    let n = records.len();
    // ‖x^k − x^{k−1}‖², with x^0 = x^1.
    let mut back = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            0.0
        } else {
            records[i].x.distance(&records[i - 1].x)?
        };
        back.push(d * d);
    }
    let h: Vec<f64> = (0..n).map(|i| h_at(records[i].f_val, alpha, back[i])).collect();
    for i in 0..n {
        records[i].lyapunov_h = Some(h[i]);
        records[i].descent_ok = None;
    }
    for i in 0..n.saturating_sub(1) {
        let k = records[i].k;
        let dz2 = back[i + 1] + back[i];
        let tol = DESCENT_TOLERANCE * (1.0 + h[i].abs());
        let mut ok = true;

        let lhs = consts.c1 * dz2;
        let rhs = h[i] - h[i + 1];
        if lhs > rhs + tol {
            ok = false;
            report.violations.push(Violation {
                k,
                inequality: Inequality::Descent,
                lhs,
                rhs,
            });
        }

        match &records[i].grad_f {
            Some(grad) => {
                let d = if i == 0 {
                    Point::zeros(grad.dim())
                } else {
                    records[i].x.sub(&records[i - 1].x)?
                };
                let first: f64 = grad
                    .as_slice()
                    .iter()
                    .zip(d.as_slice())
                    .map(|(g, di)| {
                        let v = g + 2.0 * alpha * di;
                        v * v
                    })
                    .sum();
                let grad_h = (first + 4.0 * alpha * alpha * back[i]).sqrt();
                let bound = consts.c2 * dz2.sqrt();
                if grad_h > bound + tol {
                    ok = false;
                    report.violations.push(Violation {
                        k,
                        inequality: Inequality::GradientBound,
                        lhs: grad_h,
                        rhs: bound,
                    });
                }
            }
            None => report.gradient_check_skipped = true,
        }
        records[i].descent_ok = Some(ok);
        report.checked += 1;
    }
    if report.gradient_check_skipped {
        log::info!("gradient-bound check skipped: trace has no exact gradients");
    }
    Ok(report)
}

/// [`annotate`] on a copy, returning only the verdict.
pub fn check_descent(trace: &RunTrace, consts: &LyapunovConstants) -> Result<DescentReport> {
    let mut copy = trace.clone();
    annotate(&mut copy, consts)
}

/// Descent inequality alone from per-record `f(x^k)` and `‖x^{k+1} − x^k‖`,
/// as stored in trace CSVs. The gradient bound is always skipped.
#[allow(clippy::needless_range_loop)]
pub fn check_descent_series(
    ks: &[u64],
    f_vals: &[f64],
    step_norms: &[f64],
    consts: &LyapunovConstants,
) -> Result<DescentReport> {
    if ks.len() != f_vals.len() || ks.len() != step_norms.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            actual: f_vals.len().min(step_norms.len()),
        });
    }
    let n = ks.len();
    let back = |i: usize| {
        if i == 0 {
            0.0
        } else {
            step_norms[i - 1] * step_norms[i - 1]
        }
    };
    let h = |i: usize| h_at(f_vals[i], consts.alpha, back(i));
    let mut report = DescentReport {
        gradient_check_skipped: n > 1,
        ..DescentReport::default()
    };
    for i in 0..n.saturating_sub(1) {
        let (hk, hn) = (h(i), h(i + 1));
        let lhs = consts.c1 * (back(i + 1) + back(i));
        let rhs = hk - hn;
        if lhs > rhs + DESCENT_TOLERANCE * (1.0 + hk.abs()) {
            report.violations.push(Violation {
                k: ks[i],
                inequality: Inequality::Descent,
                lhs,
                rhs,
            });
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Step bound `Lτρ/((1−β̄)(1−ν))` for runs confined to a ball of radius `ρ`
/// around a stationary point.
pub fn step_distance_bound(l: f64, tau: f64, rho: f64, beta_bar: f64, nu: f64) -> f64 {
    l * tau * rho / ((1.0 - beta_bar) * (1.0 - nu))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    Geometric,
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Ratio `r` of `e_k ≈ c·r^k`, or slope `s` of `e_k ≈ c·k^s`.
    pub rate_or_slope: f64,
    pub r2: f64,
    /// Inclusive range of `k` used.
    pub window: (u64, u64),
}

impl RateFit {
    pub fn converged(&self) -> bool {
        match self.model {
            RateModel::Geometric => self.rate_or_slope > 0.0 && self.rate_or_slope < 1.0,
            RateModel::Power => self.rate_or_slope < 0.0,
        }
    }
}

/// Least squares `y ≈ a + s·t`; returns `(s, r²)`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|ti| (ti - tm) * (ti - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(ti, yi)| (ti - tm) * (yi - ym)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - ym) * (yi - ym)).sum();
    let s = if stt > 0.0 { sty / stt } else { 0.0 };
    let a = ym - s * tm;
    let ss_res: f64 = t.iter().zip(y).map(|(ti, yi)| (yi - a - s * ti).powi(2)).sum();
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n || ss_res <= 1e-24 * syy.max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (s, r2)
}

fn window_samples(errors: &[f64], start: usize, end: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if end > errors.len() || start >= end || start == 0 {
        return Err(Error::invalid(
            "window",
            format!("[{start}, {end}] outside 1..={}", errors.len()),
        ));
    }
    if end - start + 1 < 2 {
        return Err(Error::invalid("window", "needs at least two samples"));
    }
    let ks: Vec<f64> = (start..=end).map(|k| k as f64).collect();
    let ln: Vec<f64> = errors[start - 1..end].iter().map(|e| e.ln()).collect();
    Ok((ks, ln))
}

fn check_errors(errors: &[f64]) -> Result<()> {
    if errors.len() < 10 {
        return Err(Error::invalid(
            "errors",
            format!("need at least 10 samples, got {}", errors.len()),
        ));
    }
    if let Some((i, e)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(
            "errors",
            format!("entry {} is {e}, must be positive", i + 1),
        ));
    }
    Ok(())
}

/// Geometric fit over `k = start..=end` (`errors[0]` is `k = 1`).
pub fn fit_geometric(errors: &[f64], start: usize, end: usize) -> Result<RateFit> {
    let (ks, ln) = window_samples(errors, start, end)?;
    let (s, r2) = linear_fit(&ks, &ln);
    Ok(RateFit {
        model: RateModel::Geometric,
        rate_or_slope: s.exp(),
        r2,
        window: (start as u64, end as u64),
    })
}

/// Power-law fit over `k = start..=end`.
pub fn fit_power(errors: &[f64], start: usize, end: usize) -> Result<RateFit> {
    let (ks, ln) = window_samples(errors, start, end)?;
    let lk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let (s, r2) = linear_fit(&lk, &ln);
    Ok(RateFit {
        model: RateModel::Power,
        rate_or_slope: s,
        r2,
        window: (start as u64, end as u64),
    })
}

/// Fits both models to the trailing half of `errors` and keeps the one
/// with the larger r² (geometric on ties).
pub fn fit_rate(errors: &[f64]) -> Result<RateFit> {
    check_errors(errors)?;
    let end = errors.len();
    let start = end / 2 + 1;
    let g = fit_geometric(errors, start, end)?;
    let p = fit_power(errors, start, end)?;
    Ok(if p.r2 > g.r2 { p } else { g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momentum::MomentumSchedule;
    use crate::problems::gen_diagonal_quadratic;
    use crate::solvers::{solve, GradTol, OracleConfig, Scheme, SolverParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constants_examples() {
        let c = lyapunov_constants(1.0, 0.1, 0.1, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(c.alpha, 2.9375, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c1, 1.3125, epsilon = 1e-12);

        let c = lyapunov_constants(1.0, 0.1, 0.1, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(c.alpha, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c1, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c2, 2f64.sqrt() * 11.0 + 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.c2, 24.556, epsilon = 1e-3);

        assert!(matches!(
            lyapunov_constants(1.0, 0.95, 0.1, 0.0, 0.0),
            Err(Error::Infeasible(_))
        ));
        assert!(lyapunov_constants(1.0, 0.1, 0.1, 0.95, 0.0).is_err());
    }

    #[test]
    fn lyapunov_value_examples() {
        let sq = Objective::new(1, |x| x[0] * x[0]);
        let p = |v: f64| Point::from_slice(&[v]).unwrap();
        assert_eq!(lyapunov_value(&sq, 5.0, &p(2.0), &p(2.0)).unwrap(), 4.0);
        assert_eq!(lyapunov_value(&sq, 1.0, &p(1.0), &p(0.0)).unwrap(), 2.0);
        let zero = Objective::new(1, |_| 0.0);
        assert_eq!(lyapunov_value(&zero, 2.0, &p(3.0), &p(0.0)).unwrap(), 18.0);
    }

    fn quadratic_run(schedule: MomentumSchedule, tau_frac: f64, nu: f64) -> (RunTrace, f64) {
        let inst = gen_diagonal_quadratic(6, 50.0).unwrap();
        let l = inst.objective.lipschitz().unwrap();
        let tau = tau_frac * (1.0 - nu) / l;
        let params = SolverParams::new(tau, nu)
            .unwrap()
            .with_max_iters(400)
            .with_grad_tol(GradTol::Absolute(0.0));
        let x0 = Point::new(vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0]).unwrap();
        (
            solve(
                &inst.objective,
                x0,
                Scheme::Igdm,
                schedule,
                &params,
                &OracleConfig::Exact,
            )
            .unwrap(),
            tau * l,
        )
    }

    #[test]
    fn gradient_descent_has_no_violations() {
        let (mut t, lt) = quadratic_run(MomentumSchedule::none(), 0.9, 0.1);
        let c = lyapunov_constants(50.0, lt / 50.0, 0.1, 0.0, 0.0).unwrap();
        let rep = annotate(&mut t, &c).unwrap();
        assert!(rep.is_clean(), "{:?}", rep.violations.first());
        assert_eq!(rep.checked, t.len() - 1);
        assert!(!rep.gradient_check_skipped);
        let h: Vec<f64> = t.records().iter().map(|r| r.lyapunov_h.unwrap()).collect();
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(t.last().unwrap().descent_ok, None);
    }

    #[test]
    fn capped_momentum_has_no_violations() {
        let sched = MomentumSchedule::nesterov_convex().with_cap(0.3).unwrap();
        let (t, lt) = quadratic_run(sched.clone(), 0.45, 0.1);
        let b = sched.bounds();
        let c = lyapunov_constants(50.0, lt / 50.0, 0.1, b.beta_bar, b.delta_bar).unwrap();
        assert!(check_descent(&t, &c).unwrap().is_clean());
    }

    #[test]
    fn inflated_c1_is_caught() {
        let (t, lt) = quadratic_run(MomentumSchedule::none(), 0.9, 0.1);
        let mut c = lyapunov_constants(50.0, lt / 50.0, 0.1, 0.0, 0.0).unwrap();
        c.c1 *= 100.0;
        c.c2 /= 100.0;
        let rep = check_descent(&t, &c).unwrap();
        assert!(rep.violations.iter().any(|v| v.inequality == Inequality::Descent));
        assert!(rep.violations.iter().any(|v| v.inequality == Inequality::GradientBound));
    }

    #[test]
    fn stationary_start_is_clean() {
        let f = Objective::new(1, |x| x[0] * x[0])
            .with_gradient(|x| vec![2.0 * x[0]])
            .with_lipschitz(2.0);
        let params = SolverParams::new(0.1, 0.1).unwrap();
        let t = solve(
            &f,
            Point::zeros(1),
            Scheme::Igdm,
            MomentumSchedule::none(),
            &params,
            &OracleConfig::Exact,
        )
        .unwrap();
        let c = lyapunov_constants(2.0, 0.1, 0.1, 0.0, 0.0).unwrap();
        let rep = check_descent(&t, &c).unwrap();
        assert!(rep.is_clean());
        assert_eq!(rep.checked, 0);
    }

    #[test]
    fn missing_gradients_skip_second_check() {
        let (mut t, lt) = quadratic_run(MomentumSchedule::none(), 0.9, 0.1);
        for r in t.records_mut() {
            r.grad_f = None;
        }
        let c = lyapunov_constants(50.0, lt / 50.0, 0.1, 0.0, 0.0).unwrap();
        let rep = check_descent(&t, &c).unwrap();
        assert!(rep.is_clean() && rep.gradient_check_skipped);
    }

    #[test]
    fn series_check_matches_trace_check() {
        let (t, lt) = quadratic_run(MomentumSchedule::none(), 0.9, 0.1);
        let c = lyapunov_constants(50.0, lt / 50.0, 0.1, 0.0, 0.0).unwrap();
        let ks: Vec<u64> = t.records().iter().map(|r| r.k).collect();
        let fv: Vec<f64> = t.records().iter().map(|r| r.f_val).collect();
        let sn: Vec<f64> = t.records().iter().map(|r| r.step_norm).collect();
        let rep = check_descent_series(&ks, &fv, &sn, &c).unwrap();
        assert!(rep.is_clean() && rep.gradient_check_skipped);
        assert_eq!(rep.checked, check_descent(&t, &c).unwrap().checked);

        let mut bad = c;
        bad.c1 *= 100.0;
        assert!(!check_descent_series(&ks, &fv, &sn, &bad).unwrap().is_clean());
    }

    #[test]
    fn fit_examples() {
        let geo: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
        let fit = fit_rate(&geo).unwrap();
        assert_eq!(fit.model, RateModel::Geometric);
        assert_abs_diff_eq!(fit.rate_or_slope, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
        assert_eq!(fit.window, (21, 40));
        assert!(fit.converged());

        let pow: Vec<f64> = (1..=100).map(|k| (k as f64).powf(-0.5)).collect();
        let fit = fit_rate(&pow).unwrap();
        assert_eq!(fit.model, RateModel::Power);
        assert_abs_diff_eq!(fit.rate_or_slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);

        assert!(fit_rate(&[1.0; 5]).is_err());
        let mut bad = geo.clone();
        bad[3] = 0.0;
        assert!(fit_rate(&bad).is_err());
    }

    proptest! {
        #[test]
        fn fit_is_scale_invariant(c in 1e-6f64..1e6, r in 0.1f64..0.99, s in -2.0f64..-0.1) {
            let geo: Vec<f64> = (1..=30).map(|k| r.powi(k) * (1.0 + 0.01 * ((k * 7) % 5) as f64)).collect();
            let scaled: Vec<f64> = geo.iter().map(|e| e * c).collect();
            let (a, b) = (fit_geometric(&geo, 16, 30).unwrap(), fit_geometric(&scaled, 16, 30).unwrap());
            prop_assert!((a.rate_or_slope - b.rate_or_slope).abs() < 1e-9);
            let pw: Vec<f64> = (1..=30).map(|k| (k as f64).powf(s)).collect();
            let scaled: Vec<f64> = pw.iter().map(|e| e * c).collect();
            let (a, b) = (fit_power(&pw, 16, 30).unwrap(), fit_power(&scaled, 16, 30).unwrap());
            prop_assert!((a.rate_or_slope - b.rate_or_slope).abs() < 1e-9);
        }
    }
}
