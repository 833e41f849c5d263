//! Objectives with counted oracles.
//!
//! An [`Objective`] exposes two kinds of access:
//!
//! * counted oracles ([`Objective::value`], [`Objective::gradient`]) used by
//!   the algorithms; every call increments exactly one counter by one and the
//!   value oracle refuses calls once its evaluation limit is reached;
//! * reference access ([`Objective::reference_value`],
//!   [`Objective::reference_gradient`]) used for monitoring and diagnostics.
//!   References are never counted and always see the clean function, even
//!   when the counted oracle is noisy.
//!
//! Budget accounting: a forward difference reuses the base value across
//! backtracks and costs `n` evaluations per trial plus one base evaluation per
//! gradient; a central difference costs `2n` per trial.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::point::Point;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

pub struct Objective {
    dim: usize,
    value_oracle: ValueFn,
    exact_gradient: Option<GradientFn>,
    reference_value: ValueFn,
    reference_gradient: Option<GradientFn>,
    lipschitz_l: Option<f64>,
    strong_convexity_mu: Option<f64>,
    plk_exponent_q: Option<f64>,
    noise_amplitude: f64,
    value_evals: AtomicU64,
    grad_evals: AtomicU64,
    value_limit: AtomicU64,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("has_gradient", &self.exact_gradient.is_some())
            .field("lipschitz_l", &self.lipschitz_l)
            .field("strong_convexity_mu", &self.strong_convexity_mu)
            .field("plk_exponent_q", &self.plk_exponent_q)
            .field("noise_amplitude", &self.noise_amplitude)
            .field("value_evals", &self.value_evals())
            .field("grad_evals", &self.grad_evals())
            .finish()
    }
}

impl Objective {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "objective dimension must be positive");
        let value: ValueFn = Arc::new(value);
        Objective {
            dim,
            value_oracle: value.clone(),
            exact_gradient: None,
            reference_value: value,
            reference_gradient: None,
            lipschitz_l: None,
            strong_convexity_mu: None,
            plk_exponent_q: None,
            noise_amplitude: 0.0,
            value_evals: AtomicU64::new(0),
            grad_evals: AtomicU64::new(0),
            value_limit: AtomicU64::new(u64::MAX),
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let grad: GradientFn = Arc::new(grad);
        self.exact_gradient = Some(grad.clone());
        self.reference_gradient = Some(grad);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        assert!(l > 0.0 && l.is_finite(), "Lipschitz constant must be positive");
        self.lipschitz_l = Some(l);
        self
    }

    pub fn with_strong_convexity(mut self, mu: f64) -> Self {
        assert!(mu >= 0.0, "strong convexity modulus must be nonnegative");
        self.strong_convexity_mu = Some(mu);
        self
    }

    pub fn with_plk_exponent(mut self, q: f64) -> Self {
        assert!((0.0..1.0).contains(&q), "PLK exponent must lie in [0, 1)");
        self.plk_exponent_q = Some(q);
        self
    }

    /// Same function and metadata with fresh counters and a new counted value
    /// oracle. The exact gradient oracle is dropped; references are kept.
    pub(crate) fn with_value_oracle(&self, oracle: ValueFn, noise_amplitude: f64) -> Objective {
        Objective {
            dim: self.dim,
            value_oracle: oracle,
            exact_gradient: None,
            reference_value: self.reference_value.clone(),
            reference_gradient: self.reference_gradient.clone(),
            lipschitz_l: self.lipschitz_l,
            strong_convexity_mu: self.strong_convexity_mu,
            plk_exponent_q: self.plk_exponent_q,
            noise_amplitude,
            value_evals: AtomicU64::new(0),
            grad_evals: AtomicU64::new(0),
            value_limit: AtomicU64::new(u64::MAX),
        }
    }

    pub(crate) fn reference_value_fn(&self) -> ValueFn {
        self.reference_value.clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz_l
    }

    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity_mu
    }

    pub fn plk_exponent(&self) -> Option<f64> {
        self.plk_exponent_q
    }

    pub fn has_gradient(&self) -> bool {
        self.exact_gradient.is_some()
    }

    pub fn has_reference_gradient(&self) -> bool {
        self.reference_gradient.is_some()
    }

    /// Amplitude of the additive noise on the counted value oracle (0 if clean).
    pub fn noise_amplitude(&self) -> f64 {
        self.noise_amplitude
    }

    pub fn value_evals(&self) -> u64 {
        self.value_evals.load(Ordering::SeqCst)
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals.load(Ordering::SeqCst)
    }

    /// Caps the total number of counted value evaluations.
    pub fn set_value_limit(&self, limit: Option<u64>) {
        self.value_limit.store(limit.unwrap_or(u64::MAX), Ordering::SeqCst);
    }

    pub fn value_limit(&self) -> Option<u64> {
        match self.value_limit.load(Ordering::SeqCst) {
            u64::MAX => None,
            l => Some(l),
        }
    }

    pub fn remaining_value_evals(&self) -> u64 {
        self.value_limit
            .load(Ordering::SeqCst)
            .saturating_sub(self.value_evals())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Counted value oracle. Fails without calling the function once the
    /// evaluation limit is reached.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let limit = self.value_limit.load(Ordering::SeqCst);
        self.value_evals
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| (c < limit).then_some(c + 1))
            .map_err(|_| Error::BudgetExhausted { budget: limit })?;
        finite((self.value_oracle)(x), "value oracle")
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.value_at(x.as_slice())
    }

    /// Counted exact-gradient oracle.
    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check_dim(x.as_slice())?;
        let grad = self.exact_gradient.as_ref().ok_or(Error::MissingGradient)?;
        self.grad_evals.fetch_add(1, Ordering::SeqCst);
        Point::from_arith(grad(x.as_slice()), "gradient oracle")
    }

    /// Uncounted clean value, for monitoring.
    pub fn reference_value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x.as_slice())?;
        finite((self.reference_value)(x.as_slice()), "reference value")
    }

    /// Uncounted clean gradient, for diagnostics.
    pub fn reference_gradient(&self, x: &Point) -> Option<Result<Point>> {
        if let Err(e) = self.check_dim(x.as_slice()) {
            return Some(Err(e));
        }
        self.reference_gradient
            .as_ref()
            .map(|g| Point::from_arith(g(x.as_slice()), "reference gradient"))
    }
}

fn finite(v: f64, source_name: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { source_name, value: v })
    }
}
