//! Per-iteration run records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// State of one iteration `k`: the iterate `x^k`, the surrogate gradient
/// computed there and the step it produced.
///
/// `value_evals`/`grad_evals` are the objective's counters after the
/// iteration's oracle work. `step_norm` is `‖x^{k+1} − x^k‖`, or 0 on the
/// terminal record where no step was taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub k: u64,
    pub x: Point,
    pub f_val: f64,
    pub g_norm: Option<f64>,
    pub value_evals: u64,
    pub grad_evals: u64,
    pub lyapunov_h: Option<f64>,
    pub step_norm: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Clean gradient at `x^k`, when the objective exposes one.
    pub grad_f: Option<Point>,
    pub descent_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `‖g^k‖` fell below the gradient tolerance.
    GradTol,
    /// `g^k = 0` exactly with a zero tolerance.
    Stationary,
    BudgetExhausted,
    MaxIters,
    /// The adaptive finite-difference search hit its backtrack cap.
    BacktrackCap,
    /// The inexact prox inner solver failed to certify.
    ProxNotCertified,
    /// Non-finite values or other oracle failures.
    Aborted(String),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Aborted(_))
    }

    pub fn label(&self) -> &str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::Stationary => "stationary",
            Termination::BudgetExhausted => "budget",
            Termination::MaxIters => "max_iters",
            Termination::BacktrackCap => "backtrack_cap",
            Termination::ProxNotCertified => "prox_not_certified",
            Termination::Aborted(_) => "aborted",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunTrace {
    records: Vec<Record>,
    termination: Option<Termination>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.k <= last.k {
                return Err(Error::invalid("k", "iteration indices must increase"));
            }
            if record.value_evals < last.value_evals || record.grad_evals < last.grad_evals {
                return Err(Error::invalid("evals", "evaluation counts must not decrease"));
            }
        } else if record.k != 1 {
            return Err(Error::invalid("k", "traces start at iteration 1"));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub(crate) fn records_mut(&mut self) -> &mut [Record] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn termination(&self) -> Option<&Termination> {
        self.termination.as_ref()
    }

    pub fn set_termination(&mut self, t: Termination) {
        self.termination = Some(t);
    }

    pub fn final_point(&self) -> Option<&Point> {
        self.records.last().map(|r| &r.x)
    }

    /// Largest `β_k` and `|β_k − γ_k|` actually used over the iterations that
    /// took a step.
    pub fn observed_bounds(&self) -> (f64, f64) {
        self.records.iter().fold((0.0f64, 0.0f64), |(b, d), r| {
            (b.max(r.beta), d.max((r.beta - r.gamma).abs()))
        })
    }

    /// `‖x^k − x*‖` for every record.
    pub fn distances_to(&self, xstar: &Point) -> Result<Vec<f64>> {
        self.records.iter().map(|r| r.x.distance(xstar)).collect()
    }

    /// Running minimum of `f(x^k)`.
    pub fn best_values(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.f_val);
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: u64, evals: u64) -> Record {
        Record {
            k,
            x: Point::zeros(1),
            f_val: 1.0 / k as f64,
            g_norm: Some(1.0),
            value_evals: evals,
            grad_evals: 0,
            lyapunov_h: None,
            step_norm: 0.0,
            beta: 0.0,
            gamma: 0.0,
            grad_f: None,
            descent_ok: None,
        }
    }

    #[test]
    fn enforces_ordering() {
        let mut t = RunTrace::new();
        assert!(t.push(rec(2, 0)).is_err());
        t.push(rec(1, 5)).unwrap();
        assert!(t.push(rec(1, 6)).is_err());
        assert!(t.push(rec(2, 4)).is_err());
        t.push(rec(2, 5)).unwrap();
        assert_eq!(t.best_values(), vec![1.0, 0.5]);
    }
}
