//! Strategies that produce the surrogate gradient `g^k` at `x^k_ex`.

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::oracles::{inexact_gradient, AdaptiveDeltaPolicy, Checker, FdKind};
use crate::point::{vec_axpy, Point};
use crate::prox::{inexact_prox, ProxFunction};

#[derive(Clone, Debug, PartialEq)]
pub enum StepAux {
    None,
    FiniteDiff {
        backtracks: u32,
        delta: f64,
        noise_limited: bool,
    },
    /// Extragradient / sharpness-aware inner point `x_ex ∓ τ₂∇f(x_ex)`.
    Inner {
        point: Point,
    },
    Prox {
        p: Point,
        certificate: f64,
        inner_iterations: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supplied {
    pub g: Point,
    pub aux: StepAux,
}

pub trait GradientSupplier {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied>;
}

/// `g = ∇f(x_ex)` from the counted exact oracle.
pub struct ExactGradient<'a> {
    pub f: &'a Objective,
}

impl GradientSupplier for ExactGradient<'_> {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        Ok(Supplied {
            g: self.f.gradient(x_ex)?,
            aux: StepAux::None,
        })
    }
}

/// Adaptive-δ finite differences.
pub struct FiniteDiffGradient<'a> {
    pub f: &'a Objective,
    pub kind: FdKind,
    pub policy: AdaptiveDeltaPolicy,
    pub nu: f64,
    pub checker: Checker,
}

impl GradientSupplier for FiniteDiffGradient<'_> {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        let r = inexact_gradient(self.f, x_ex, self.kind, &self.policy, self.nu, self.checker)?;
        Ok(Supplied {
            g: r.g,
            aux: StepAux::FiniteDiff {
                backtracks: r.backtracks,
                delta: r.delta,
                noise_limited: r.noise_limited,
            },
        })
    }
}

fn check_tau2(tau2: f64) -> Result<()> {
    if tau2 > 0.0 && tau2.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("tau2", format!("must be positive, got {tau2}")))
    }
}

fn two_point<S: GradientSupplier + ?Sized>(base: &mut S, x_ex: &Point, shift: f64) -> Result<Supplied> {
    let first = base.supply(x_ex)?.g;
    let inner = vec_axpy(shift, &first, x_ex)?;
    let g = base.supply(&inner)?.g;
    Ok(Supplied {
        g,
        aux: StepAux::Inner { point: inner },
    })
}

/// `∇f(x_ex − τ₂∇f(x_ex))`, two gradient evaluations.
pub fn egm_g(f: &Objective, x_ex: &Point, tau2: f64) -> Result<Point> {
    check_tau2(tau2)?;
    Ok(two_point(&mut ExactGradient { f }, x_ex, -tau2)?.g)
}

/// `∇f(x_ex + τ₂∇f(x_ex))`, two gradient evaluations.
pub fn samm_g(f: &Objective, x_ex: &Point, tau2: f64) -> Result<Point> {
    check_tau2(tau2)?;
    Ok(two_point(&mut ExactGradient { f }, x_ex, tau2)?.g)
}

/// Extragradient (`ascent = false`) or sharpness-aware (`ascent = true`)
/// surrogate built on any base gradient source.
pub struct TwoPointGradient<S> {
    pub base: S,
    pub tau2: f64,
    pub ascent: bool,
}

impl<S: GradientSupplier> TwoPointGradient<S> {
    pub fn extragradient(base: S, tau2: f64) -> Result<Self> {
        check_tau2(tau2)?;
        Ok(TwoPointGradient {
            base,
            tau2,
            ascent: false,
        })
    }

    pub fn sharpness_aware(base: S, tau2: f64) -> Result<Self> {
        check_tau2(tau2)?;
        Ok(TwoPointGradient {
            base,
            tau2,
            ascent: true,
        })
    }
}

impl<S: GradientSupplier> GradientSupplier for TwoPointGradient<S> {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        let shift = if self.ascent { self.tau2 } else { -self.tau2 };
        two_point(&mut self.base, x_ex, shift)
    }
}

/// `g = (x_ex − p)/λ` with `p` a certified inexact prox. Returns `(g, p)`.
pub fn ippm_g(h: &ProxFunction, x_ex: &Point, lambda: f64, nu: f64, inner_budget: usize) -> Result<(Point, Point)> {
    let r = inexact_prox(h, x_ex, lambda, nu, inner_budget)?;
    Ok((x_ex.sub(&r.p)?.scaled(1.0 / lambda), r.p))
}

pub struct ProxPointGradient<'a> {
    pub h: &'a ProxFunction,
    pub lambda: f64,
    pub nu: f64,
    pub inner_budget: usize,
}

impl GradientSupplier for ProxPointGradient<'_> {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        let r = inexact_prox(self.h, x_ex, self.lambda, self.nu, self.inner_budget)?;
        Ok(Supplied {
            g: x_ex.sub(&r.p)?.scaled(1.0 / self.lambda),
            aux: StepAux::Prox {
                p: r.p,
                certificate: r.certificate,
                inner_iterations: r.inner_iterations,
            },
        })
    }
}

impl<T: GradientSupplier + ?Sized> GradientSupplier for &mut T {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        (**self).supply(x_ex)
    }
}

impl<T: GradientSupplier + ?Sized> GradientSupplier for Box<T> {
    fn supply(&mut self, x_ex: &Point) -> Result<Supplied> {
        (**self).supply(x_ex)
    }
}
