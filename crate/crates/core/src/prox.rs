//! Proximal mappings, Moreau envelopes and a certified inexact prox.
//!
//! Catalog functions are coordinate-separable, `h(x) = Σ c(x_i)` for a scalar
//! component `c`, which lets the inner solver work coordinate by coordinate on
//! the strongly convex model `φ(y) = h(y) + ‖y − x‖²/(2λ)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;

/// A closed interval, possibly unbounded, used for scalar subdifferentials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    /// Element of `self + shift` closest to zero.
    fn min_norm_shifted(&self, shift: f64) -> f64 {
        (-shift).clamp(self.lo, self.hi) + shift
    }
}

/// Scalar building block of a separable [`ProxFunction`].
pub trait ScalarComponent: Send + Sync {
    /// Value, `+∞` outside the domain.
    fn value(&self, t: f64) -> f64;
    /// `∂c(t)` for `t` in the domain.
    fn subdifferential(&self, t: f64) -> Interval;
    /// Closed domain `[lo, hi]`.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    /// Closed-form `argmin_t c(t) + (t − x)²/(2λ)`, when known.
    fn prox(&self, _x: f64, _lambda: f64) -> Option<f64> {
        None
    }
}

/// `w·|t|`.
#[derive(Clone, Copy, Debug)]
pub struct AbsValue {
    pub weight: f64,
}

impl ScalarComponent for AbsValue {
    fn value(&self, t: f64) -> f64 {
        self.weight * t.abs()
    }

    fn subdifferential(&self, t: f64) -> Interval {
        if t > 0.0 {
            Interval::point(self.weight)
        } else if t < 0.0 {
            Interval::point(-self.weight)
        } else {
            Interval::new(-self.weight, self.weight)
        }
    }

    fn prox(&self, x: f64, lambda: f64) -> Option<f64> {
        Some(soft_threshold(x, lambda * self.weight))
    }
}

/// `(c/2)·t²` with `c ≥ 0`.
#[derive(Clone, Copy, Debug)]
pub struct HalfSquare {
    pub curvature: f64,
}

impl ScalarComponent for HalfSquare {
    fn value(&self, t: f64) -> f64 {
        0.5 * self.curvature * t * t
    }

    fn subdifferential(&self, t: f64) -> Interval {
        Interval::point(self.curvature * t)
    }

    fn prox(&self, x: f64, lambda: f64) -> Option<f64> {
        Some(x / (1.0 + lambda * self.curvature))
    }
}

/// `|t| − (ϱ/2)·t²` on `[−1/ϱ, 1/ϱ]`, `+∞` outside. ϱ-weakly convex with the
/// unique minimizer 0; the value is nondecreasing in `|t|` on its domain.
#[derive(Clone, Copy, Debug)]
pub struct WeaklyConvexAbs {
    pub rho: f64,
}

impl WeaklyConvexAbs {
    fn radius(&self) -> f64 {
        1.0 / self.rho
    }
}

impl ScalarComponent for WeaklyConvexAbs {
    fn value(&self, t: f64) -> f64 {
        if t.abs() > self.radius() {
            f64::INFINITY
        } else {
            t.abs() - 0.5 * self.rho * t * t
        }
    }

    fn subdifferential(&self, t: f64) -> Interval {
        let r = self.radius();
        if t >= r {
            Interval::new(1.0 - self.rho * r, f64::INFINITY)
        } else if t <= -r {
            Interval::new(f64::NEG_INFINITY, -1.0 + self.rho * r)
        } else if t > 0.0 {
            Interval::point(1.0 - self.rho * t)
        } else if t < 0.0 {
            Interval::point(-1.0 - self.rho * t)
        } else {
            Interval::new(-1.0, 1.0)
        }
    }

    fn domain(&self) -> (f64, f64) {
        (-self.radius(), self.radius())
    }

    fn prox(&self, x: f64, lambda: f64) -> Option<f64> {
        if x.abs() <= lambda {
            return Some(0.0);
        }
        let t = (x.abs() - lambda) / (1.0 - lambda * self.rho);
        Some(x.signum() * t.min(self.radius()))
    }
}

pub fn soft_threshold(x: f64, level: f64) -> f64 {
    x.signum() * (x.abs() - level).max(0.0)
}

/// A separable, ϱ-weakly convex, possibly extended-valued function.
#[derive(Clone)]
pub struct ProxFunction {
    name: String,
    rho: f64,
    component: Arc<dyn ScalarComponent>,
    closed_form: bool,
}

impl fmt::Debug for ProxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxFunction")
            .field("name", &self.name)
            .field("rho", &self.rho)
            .field("closed_form", &self.closed_form)
            .finish()
    }
}

impl ProxFunction {
    pub fn new(name: impl Into<String>, rho: f64, component: Arc<dyn ScalarComponent>) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", "weak convexity modulus must be nonnegative"));
        }
        Ok(ProxFunction {
            name: name.into(),
            rho,
            component,
            closed_form: true,
        })
    }

    /// `‖x‖₁`.
    pub fn l1() -> Self {
        Self::new("l1", 0.0, Arc::new(AbsValue { weight: 1.0 })).expect("valid")
    }

    /// `(c/2)‖x‖²`.
    pub fn quad(curvature: f64) -> Result<Self> {
        if !(curvature >= 0.0 && curvature.is_finite()) {
            return Err(Error::invalid("curvature", "must be nonnegative"));
        }
        Self::new("quad", 0.0, Arc::new(HalfSquare { curvature }))
    }

    /// `Σ |x_i| − (ϱ/2)x_i²` on the box `|x_i| ≤ 1/ϱ`, `ϱ ∈ (0, 1)`.
    pub fn weakly_convex(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("must lie in (0, 1), got {rho}")));
        }
        Self::new("weakly-convex-1d", rho, Arc::new(WeaklyConvexAbs { rho }))
    }

    /// Catalog lookup: `l1`, `quad` (unit curvature), `weakly-convex-1d`
    /// (ϱ = 1/2).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "l1" => Ok(Self::l1()),
            "quad" => Self::quad(1.0),
            "weakly-convex-1d" => Self::weakly_convex(0.5),
            other => Err(Error::Config(format!("unknown prox function `{other}`"))),
        }
    }

    /// Same function with the closed-form prox hidden, forcing the inner
    /// solver.
    pub fn without_closed_form(&self) -> Self {
        ProxFunction {
            closed_form: false,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form && self.component.prox(0.0, 1.0).is_some()
    }

    pub fn value(&self, x: &Point) -> f64 {
        x.as_slice().iter().map(|&t| self.component.value(t)).sum()
    }

    pub fn component(&self) -> &dyn ScalarComponent {
        self.component.as_ref()
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
        }
        if self.rho > 0.0 && lambda * self.rho >= 1.0 {
            return Err(Error::invalid(
                "lambda",
                format!("must be below 1/rho = {}, got {lambda}", 1.0 / self.rho),
            ));
        }
        Ok(())
    }

    /// Strong convexity modulus `1/λ − ϱ` of the prox model.
    fn model_modulus(&self, lambda: f64) -> f64 {
        1.0 / lambda - self.rho
    }

    fn closed_form_prox(&self, x: &Point, lambda: f64) -> Option<Point> {
        if !self.closed_form {
            return None;
        }
        let coords: Option<Vec<f64>> = x.as_slice().iter().map(|&t| self.component.prox(t, lambda)).collect();
        coords.map(|c| Point::new(c).expect("prox of finite point is finite"))
    }
}

/// `Prox_{λh}(x)`. Uses the closed form when available, otherwise solves the
/// prox model to working precision.
pub fn prox_eval(h: &ProxFunction, x: &Point, lambda: f64) -> Result<Point> {
    h.check_lambda(lambda)?;
    if let Some(p) = h.closed_form_prox(x, lambda) {
        return Ok(p);
    }
    let solver = BisectionProx::new(h, x, lambda);
    Ok(solver.solve_to_precision())
}

/// Distance bound `‖p − Prox_{λh}(x)‖ ≤ ‖s‖/m` from the minimal-norm
/// element `s` of `∂φ(p)`, with `m = 1/λ − ϱ`.
pub fn prox_residual_bound(h: &ProxFunction, x: &Point, p: &Point, lambda: f64) -> Result<f64> {
    h.check_lambda(lambda)?;
    if x.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: p.dim(),
        });
    }
    let (lo, hi) = h.component.domain();
    let m = h.model_modulus(lambda);
    let mut sq = 0.0;
    for (&pi, &xi) in p.as_slice().iter().zip(x.as_slice()) {
        if pi < lo || pi > hi {
            return Ok(f64::INFINITY);
        }
        let s = h.component.subdifferential(pi).min_norm_shifted((pi - xi) / lambda);
        sq += (s / m).powi(2);
    }
    Ok(sq.sqrt())
}

/// `‖p − Prox_{λh}(x_ex)‖ ≤ ν‖p − x_ex‖`, certified through
/// [`prox_residual_bound`].
pub fn satisfies_prox_condition(h: &ProxFunction, x_ex: &Point, p: &Point, lambda: f64, nu: f64) -> Result<bool> {
    let bound = prox_residual_bound(h, x_ex, p, lambda)?;
    Ok(bound <= nu * p.distance(x_ex)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InexactProx {
    pub p: Point,
    /// Certified upper bound on `‖p − Prox_{λh}(x_ex)‖`.
    pub certificate: f64,
    pub inner_iterations: usize,
}

/// Inexact prox with `‖p − Prox_{λh}(x_ex)‖ ≤ certificate ≤ ν‖p − x_ex‖`.
///
/// The inner method brackets each coordinate of the prox by the sign of the
/// model's subdifferential and bisects; a coordinate's error bound is the
/// smaller of the bracket half-width and `|s_i|/m`.
pub fn inexact_prox(h: &ProxFunction, x_ex: &Point, lambda: f64, nu: f64, inner_budget: usize) -> Result<InexactProx> {
    h.check_lambda(lambda)?;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::invalid("nu", format!("must lie in (0, 1), got {nu}")));
    }
    if let Some(p) = h.closed_form_prox(x_ex, lambda) {
        return Ok(InexactProx {
            p,
            certificate: 0.0,
            inner_iterations: 0,
        });
    }
    let mut solver = BisectionProx::new(h, x_ex, lambda);
    let mut iterations = 0;
    loop {
        let (p, bound) = solver.current();
        if bound == 0.0 || bound <= nu * p.distance(x_ex)? {
            return Ok(InexactProx {
                p,
                certificate: bound,
                inner_iterations: iterations,
            });
        }
        if iterations >= inner_budget || !solver.can_refine() {
            return Err(Error::ProxNotCertified {
                best: p,
                bound,
                iterations,
            });
        }
        solver.refine();
        iterations += 1;
    }
}

/// Per-coordinate bracketing of the prox model's minimizer.
struct BisectionProx<'a> {
    h: &'a ProxFunction,
    x: &'a Point,
    lambda: f64,
    m: f64,
    brackets: Vec<(f64, f64)>,
    exact: Vec<Option<f64>>,
}

impl<'a> BisectionProx<'a> {
    fn new(h: &'a ProxFunction, x: &'a Point, lambda: f64) -> Self {
        let (dlo, dhi) = h.component.domain();
        let m = h.model_modulus(lambda);
        let mut brackets = Vec::with_capacity(x.dim());
        let mut exact = Vec::with_capacity(x.dim());
        for &xi in x.as_slice() {
            let t0 = xi.clamp(dlo, dhi);
            let s = h.component.subdifferential(t0).min_norm_shifted((t0 - xi) / lambda);
            if s == 0.0 {
                exact.push(Some(t0));
                brackets.push((t0, t0));
            } else {
                // m|t0 − P| ≤ |s| and P lies on the side opposite to the sign of s.
                let reach = s.abs() / m;
                let b = if s > 0.0 {
                    ((t0 - reach).max(dlo), t0)
                } else {
                    (t0, (t0 + reach).min(dhi))
                };
                exact.push(None);
                brackets.push(b);
            }
        }
        BisectionProx {
            h,
            x,
            lambda,
            m,
            brackets,
            exact,
        }
    }

    fn model_sign(&self, i: usize, t: f64) -> f64 {
        let shift = (t - self.x[i]) / self.lambda;
        self.h.component.subdifferential(t).min_norm_shifted(shift)
    }

    /// Midpoints and their certified distance bound.
    fn current(&self) -> (Point, f64) {
        let mut coords = Vec::with_capacity(self.brackets.len());
        let mut sq = 0.0;
        for (i, (&(a, b), e)) in self.brackets.iter().zip(&self.exact).enumerate() {
            match e {
                Some(t) => coords.push(*t),
                None => {
                    let mid = 0.5 * (a + b);
                    let s = self.model_sign(i, mid);
                    let bound = if s == 0.0 {
                        0.0
                    } else {
                        (0.5 * (b - a)).min(s.abs() / self.m)
                    };
                    coords.push(mid);
                    sq += bound * bound;
                }
            }
        }
        (Point::new(coords).expect("finite brackets"), sq.sqrt())
    }

    fn can_refine(&self) -> bool {
        self.brackets
            .iter()
            .zip(&self.exact)
            .any(|(&(a, b), e)| e.is_none() && 0.5 * (a + b) > a && 0.5 * (a + b) < b)
    }

    fn refine(&mut self) {
        for i in 0..self.brackets.len() {
            if self.exact[i].is_some() {
                continue;
            }
            let (a, b) = self.brackets[i];
            let mid = 0.5 * (a + b);
            let s = self.model_sign(i, mid);
            if s == 0.0 {
                self.exact[i] = Some(mid);
            } else if s > 0.0 {
                self.brackets[i] = (a, mid);
            } else {
                self.brackets[i] = (mid, b);
            }
        }
    }

    fn solve_to_precision(mut self) -> Point {
        while self.can_refine() {
            self.refine();
        }
        self.current().0
    }
}

/// `e_λh`, the Moreau envelope of `h`.
#[derive(Clone, Debug)]
pub struct MoreauEnvelope {
    base: ProxFunction,
    lambda: f64,
}

impl MoreauEnvelope {
    pub fn new(base: ProxFunction, lambda: f64) -> Result<Self> {
        base.check_lambda(lambda)?;
        Ok(MoreauEnvelope { base, lambda })
    }

    pub fn base(&self) -> &ProxFunction {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Gradient Lipschitz modulus `max{λ⁻¹, ϱ/(1−λϱ)}`.
    pub fn lipschitz(&self) -> f64 {
        let rho = self.base.rho;
        (1.0 / self.lambda).max(rho / (1.0 - self.lambda * rho))
    }

    /// Smooth objective `e_λh` of dimension `dim` with its exact gradient,
    /// computed through the base function's prox.
    pub fn to_objective(&self, dim: usize) -> Objective {
        let (a, b) = (self.clone(), self.clone());
        Objective::new(dim, move |x| {
            let x = Point::from_slice(x).expect("finite iterate");
            moreau_value(&a, &x).expect("admissible lambda")
        })
        .with_gradient(move |x| {
            let x = Point::from_slice(x).expect("finite iterate");
            moreau_gradient(&b, &x).expect("admissible lambda").into_vec()
        })
        .with_lipschitz(self.lipschitz())
    }
}

/// `h(p) + ‖p − x‖²/(2λ)` at `p = Prox_{λh}(x)`.
pub fn moreau_value(env: &MoreauEnvelope, x: &Point) -> Result<f64> {
    let p = prox_eval(&env.base, x, env.lambda)?;
    Ok(env.base.value(&p) + p.distance(x)?.powi(2) / (2.0 * env.lambda))
}

/// `λ⁻¹(x − Prox_{λh}(x))`.
pub fn moreau_gradient(env: &MoreauEnvelope, x: &Point) -> Result<Point> {
    let p = prox_eval(&env.base, x, env.lambda)?;
    Ok(x.sub(&p)?.scaled(1.0 / env.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p1(v: f64) -> Point {
        Point::from_slice(&[v]).unwrap()
    }

    #[test]
    fn prox_examples() {
        let l1 = ProxFunction::l1();
        assert_eq!(prox_eval(&l1, &p1(3.0), 1.0).unwrap(), p1(2.0));
        assert_eq!(prox_eval(&l1, &p1(-0.5), 1.0).unwrap(), p1(0.0));
        let q = ProxFunction::quad(1.0).unwrap();
        assert_eq!(prox_eval(&q, &p1(4.0), 1.0).unwrap(), p1(2.0));
    }

    #[test]
    fn lambda_must_be_admissible() {
        let w = ProxFunction::weakly_convex(0.5).unwrap();
        assert!(prox_eval(&w, &p1(1.0), 2.0).is_err());
        assert!(prox_eval(&w, &p1(1.0), 1.9).is_ok());
        assert!(prox_eval(&ProxFunction::l1(), &p1(1.0), 0.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let env = MoreauEnvelope::new(ProxFunction::l1(), 1.0).unwrap();
        assert_abs_diff_eq!(moreau_value(&env, &p1(3.0)).unwrap(), 2.5, epsilon = 1e-14);
        assert_eq!(moreau_value(&env, &p1(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(moreau_gradient(&env, &p1(3.0)).unwrap()[0], 1.0, epsilon = 1e-14);
        assert_eq!(moreau_gradient(&env, &p1(0.0)).unwrap()[0], 0.0);

        let env = MoreauEnvelope::new(ProxFunction::quad(1.0).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(moreau_value(&env, &p1(4.0)).unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(moreau_gradient(&env, &p1(4.0)).unwrap()[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn certificate_examples() {
        let l1 = ProxFunction::l1();
        let x = p1(3.0);
        let r = inexact_prox(&l1, &x, 1.0, 0.5, 100).unwrap();
        assert_eq!((r.p.clone(), r.certificate), (p1(2.0), 0.0));

        assert!(satisfies_prox_condition(&l1, &x, &p1(2.2), 1.0, 0.5).unwrap());
        assert_abs_diff_eq!(
            prox_residual_bound(&l1, &x, &p1(2.2), 1.0).unwrap(),
            0.2,
            epsilon = 1e-12
        );
        assert!(!satisfies_prox_condition(&l1, &x, &p1(3.0), 1.0, 0.99).unwrap());
    }

    #[test]
    fn inner_solver_matches_closed_form() {
        let cases = [
            (ProxFunction::l1(), 1.0),
            (ProxFunction::quad(2.5).unwrap(), 0.7),
            (ProxFunction::weakly_convex(0.5).unwrap(), 1.5),
        ];
        for (h, lambda) in cases {
            let hidden = h.without_closed_form();
            for &v in &[-7.0, -2.1, -0.3, 0.0, 0.4, 1.0, 2.2, 9.0] {
                let x = Point::from_slice(&[v, 0.5 * v, -v]).unwrap();
                let exact = prox_eval(&h, &x, lambda).unwrap();
                let solved = prox_eval(&hidden, &x, lambda).unwrap();
                assert!(exact.distance(&solved).unwrap() < 1e-12, "{} at {v}", h.name());
                for nu in [0.1, 0.5, 0.9] {
                    match inexact_prox(&hidden, &x, lambda, nu, 200) {
                        Ok(r) => {
                            let err = r.p.distance(&exact).unwrap();
                            assert!(err <= r.certificate + 1e-15);
                            assert!(r.certificate <= nu * r.p.distance(&x).unwrap());
                        }
                        Err(e) => panic!("{} at {v}: {e}", h.name()),
                    }
                }
            }
        }
    }

    #[test]
    fn fixed_point_gets_zero_certificate() {
        let hidden = ProxFunction::l1().without_closed_form();
        let r = inexact_prox(&hidden, &p1(0.0), 1.0, 0.5, 10).unwrap();
        assert_eq!((r.p, r.certificate), (p1(0.0), 0.0));
    }

    #[test]
    fn weak_convexity_midpoint() {
        let rho = 0.5;
        let h = ProxFunction::weakly_convex(rho).unwrap();
        let shifted = |t: f64| h.value(&p1(t)) + 0.5 * rho * t * t;
        let r = 1.0 / rho;
        let grid: Vec<f64> = (0..=80).map(|i| -r + 2.0 * r * i as f64 / 80.0).collect();
        for &a in &grid {
            for &b in &grid {
                let mid = shifted(0.5 * (a + b));
                assert!(mid <= 0.5 * (shifted(a) + shifted(b)) + 1e-12);
            }
        }
    }

    #[test]
    fn envelope_gradient_lipschitz_and_fixed_points() {
        for (h, lambda) in [
            (ProxFunction::l1(), 0.8),
            (ProxFunction::quad(3.0).unwrap(), 0.5),
            (ProxFunction::weakly_convex(0.5).unwrap(), 1.2),
        ] {
            let env = MoreauEnvelope::new(h.clone(), lambda).unwrap();
            let l = env.lipschitz();
            let xs: Vec<f64> = (0..400).map(|i| -4.0 + 8.0 * i as f64 / 399.0).collect();
            let grads: Vec<f64> = xs.iter().map(|&x| moreau_gradient(&env, &p1(x)).unwrap()[0]).collect();
            for w in 0..xs.len() - 1 {
                let q = (grads[w + 1] - grads[w]).abs() / (xs[w + 1] - xs[w]);
                assert!(q <= l + 1e-8, "{}: {q} > {l}", h.name());
            }
            for &x in &xs {
                let g = moreau_gradient(&env, &p1(x)).unwrap()[0];
                let fixed = (prox_eval(&h, &p1(x), lambda).unwrap()[0] - x).abs() <= 1e-10;
                assert_eq!(g.abs() <= 1e-10 * (1.0 / lambda), fixed);
            }
        }
    }

    #[test]
    fn envelope_below_function_and_same_infimum() {
        for (h, lambda) in [
            (ProxFunction::l1(), 1.0),
            (ProxFunction::weakly_convex(0.5).unwrap(), 1.0),
        ] {
            let env = MoreauEnvelope::new(h.clone(), lambda).unwrap();
            let grid: Vec<f64> = (0..=1000).map(|i| -1.9 + 3.8 * i as f64 / 1000.0).collect();
            let mut min_e = f64::INFINITY;
            let mut min_h = f64::INFINITY;
            for &x in &grid {
                let e = moreau_value(&env, &p1(x)).unwrap();
                let hv = h.value(&p1(x));
                assert!(e <= hv + 1e-12);
                min_e = min_e.min(e);
                min_h = min_h.min(hv);
            }
            assert_abs_diff_eq!(min_e, min_h, epsilon = 4e-3);
        }
    }
}
