//! Gradient surrogates: finite differences, the adaptive-δ inexact gradient
//! and noisy value wrapping.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdKind {
    Forward,
    Central,
}

impl FdKind {
    pub fn label(self) -> &'static str {
        match self {
            FdKind::Forward => "fordif",
            FdKind::Central => "cendif",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDiffScheme {
    kind: FdKind,
    delta: f64,
}

impl FiniteDiffScheme {
    pub fn new(kind: FdKind, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(FiniteDiffScheme { kind, delta })
    }

    pub fn kind(&self) -> FdKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn apply(&self, f: &Objective, x: &Point) -> Result<Point> {
        match self.kind {
            FdKind::Forward => forward_difference(f, x, self.delta),
            FdKind::Central => central_difference(f, x, self.delta),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be positive, got {delta}")))
    }
}

/// Forward difference from a cold start: `n + 1` value evaluations.
pub fn forward_difference(f: &Objective, x: &Point, delta: f64) -> Result<Point> {
    check_delta(delta)?;
    let fx = f.value(x)?;
    forward_difference_from(f, x, fx, delta)
}

/// Forward difference reusing a known `f(x)`: `n` value evaluations.
pub fn forward_difference_from(f: &Objective, x: &Point, fx: f64, delta: f64) -> Result<Point> {
    check_delta(delta)?;
    let coords = (0..x.dim())
        .map(|i| Ok((f.value_at(&x.shifted(i, delta))? - fx) / delta))
        .collect::<Result<Vec<_>>>()?;
    Point::from_arith(coords, "forward difference")
}

/// Central difference: `2n` value evaluations.
pub fn central_difference(f: &Objective, x: &Point, delta: f64) -> Result<Point> {
    check_delta(delta)?;
    let coords = (0..x.dim())
        .map(|i| {
            let plus = f.value_at(&x.shifted(i, delta))?;
            let minus = f.value_at(&x.shifted(i, -delta))?;
            Ok((plus - minus) / (2.0 * delta))
        })
        .collect::<Result<Vec<_>>>()?;
    Point::from_arith(coords, "central difference")
}

/// `L·√n·δ/2`, the worst-case error of either scheme on `C^{1,1}_L` functions.
pub fn fd_error_bound(l: f64, n: usize, delta: f64) -> f64 {
    l * (n as f64).sqrt() * delta / 2.0
}

/// Step sizes `δ_i = θ^i·ε` tried for `i = 0, 1, …, max_backtracks`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveDeltaPolicy {
    theta: f64,
    epsilon: f64,
    max_backtracks: u32,
}

impl AdaptiveDeltaPolicy {
    pub fn new(theta: f64, epsilon: f64, max_backtracks: u32) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid("theta", format!("must lie in (0, 1), got {theta}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if max_backtracks == 0 {
            return Err(Error::invalid("max_backtracks", "must be positive"));
        }
        Ok(AdaptiveDeltaPolicy {
            theta,
            epsilon,
            max_backtracks,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn max_backtracks(&self) -> u32 {
        self.max_backtracks
    }

    pub fn delta(&self, i: u32) -> f64 {
        self.theta.powi(i as i32) * self.epsilon
    }
}

impl Default for AdaptiveDeltaPolicy {
    fn default() -> Self {
        AdaptiveDeltaPolicy {
            theta: 0.5,
            epsilon: 0.1,
            max_backtracks: 60,
        }
    }
}

/// How the relative inexactness condition `‖g − ∇f(x_ex)‖ ≤ ν‖g‖` is tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checker {
    /// Literal test against the clean gradient; needs an exact gradient.
    Oracle,
    /// Sufficient test `L√n δ/2 ≤ ν‖g‖`; needs the Lipschitz constant.
    Bound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InexactGradient {
    pub g: Point,
    /// The accepted index `i_k`.
    pub backtracks: u32,
    pub delta: f64,
    /// The check was waived because δ reached the noise floor.
    pub noise_limited: bool,
}

/// Smallest δ worth trying against noise of the given amplitude.
pub fn noise_floor(amplitude: f64) -> f64 {
    (2.0 * amplitude).sqrt()
}

/// Finite-difference gradient at `x_ex` with the smallest `i` such that
/// `G(x_ex, θ^i ε)` passes the inexactness check.
///
/// On noisy objectives δ never shrinks below [`noise_floor`]; a trial at the
/// floor is accepted unconditionally and flagged `noise_limited`.
pub fn inexact_gradient(
    f: &Objective,
    x_ex: &Point,
    kind: FdKind,
    policy: &AdaptiveDeltaPolicy,
    nu: f64,
    checker: Checker,
) -> Result<InexactGradient> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::invalid("nu", format!("must lie in (0, 1), got {nu}")));
    }
    let truth = match checker {
        Checker::Oracle => {
            if !f.has_gradient() {
                return Err(Error::MissingGradient);
            }
            Some(f.reference_gradient(x_ex).ok_or(Error::MissingGradient)??)
        }
        Checker::Bound => {
            f.lipschitz().ok_or(Error::MissingLipschitz)?;
            None
        }
    };
    let floor = if f.noise_amplitude() > 0.0 {
        noise_floor(f.noise_amplitude())
    } else {
        0.0
    };
    let base = match kind {
        FdKind::Forward => Some(f.value(x_ex)?),
        FdKind::Central => None,
    };

    let mut best = None;
    for i in 0..=policy.max_backtracks() {
        let mut delta = policy.delta(i);
        let at_floor = delta <= floor;
        if at_floor {
            delta = floor;
        }
        let g = match base {
            Some(fx) => forward_difference_from(f, x_ex, fx, delta)?,
            None => central_difference(f, x_ex, delta)?,
        };
        let g_norm = g.norm();
        let passed = match &truth {
            Some(grad) => g.distance(grad)? <= nu * g_norm,
            None => fd_error_bound(f.lipschitz().unwrap_or_default(), x_ex.dim(), delta) <= nu * g_norm,
        };
        if passed || at_floor {
            if !passed {
                log::debug!("finite difference noise-limited at delta={delta:e}, |g|={g_norm:e}");
            }
            return Ok(InexactGradient {
                g,
                backtracks: i,
                delta,
                noise_limited: !passed,
            });
        }
        best = Some(g);
    }
    Err(Error::StationaryOrBudget {
        best: best.expect("at least one trial"),
        backtracks: policy.max_backtracks(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub const DEFAULT_AMPLITUDE: f64 = 1e-4;

    pub fn new(amplitude: f64, seed: u64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be nonnegative"));
        }
        Ok(NoiseModel { amplitude, seed })
    }
}

/// Objective whose counted values carry fresh `U(−a, a)` noise per call.
///
/// The exact gradient oracle is removed; reference access still sees the
/// clean function so traces can be monitored.
pub fn noisy_wrap(f: &Objective, noise: NoiseModel) -> Objective {
    let rng = Mutex::new(SplitMix64::new(noise.seed));
    let clean = f.reference_value_fn();
    let amplitude = noise.amplitude;
    let oracle = Arc::new(move |x: &[f64]| {
        let xi = if amplitude > 0.0 {
            rng.lock().expect("noise rng poisoned").symmetric(amplitude)
        } else {
            0.0
        };
        clean(x) + xi
    });
    f.with_value_oracle(oracle, amplitude)
}
