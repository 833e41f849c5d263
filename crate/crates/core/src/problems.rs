//! Seeded benchmark problems and analytic test functions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// `‖Ax − b‖²`.
    LeastSquares,
    /// `Σ log(1 + (Ax − b)_i²)`.
    ImageRestoration,
    /// `|x|^{2p}`.
    Plk {
        p: f64,
    },
    Custom(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub kind: ProblemKind,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct ProblemInstance {
    pub objective: Objective,
    pub known_fstar: Option<f64>,
    pub known_xstar: Option<Point>,
    pub meta: GeneratorMeta,
    /// Radius of the ball around the origin on which `lipschitz_L` is valid
    /// (`None` means global).
    pub lipschitz_radius: Option<f64>,
    pub matrix: Option<DMatrix<f64>>,
    pub rhs: Option<DVector<f64>>,
}

/// Row-major `n×n` matrix followed by an `n`-vector, all standard Gaussian.
pub fn gaussian_data(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = SplitMix64::new(seed);
    let a = DMatrix::from_row_iterator(n, n, (0..n * n).map(|_| rng.gaussian()).collect::<Vec<_>>());
    let b = DVector::from_iterator(n, (0..n).map(|_| rng.gaussian()));
    (a, b)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// all-ones vector: at most 200 iterations, stopping once the Rayleigh
/// quotient changes by less than 1e-12 relative.
pub fn power_iteration_sym(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..200 {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (next - estimate).abs() <= 1e-12 * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// `max_i Σ_j |m_ij|`.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    lu.solve(b).filter(|x| x.iter().all(|v| v.is_finite()))
}

fn residual(a: &DMatrix<f64>, b: &DVector<f64>, x: &[f64]) -> DVector<f64> {
    a * DVector::from_column_slice(x) - b
}

/// Least squares `‖Ax − b‖²` with `L = 2·σ_max(AᵀA)`.
pub fn least_squares_from(a: DMatrix<f64>, b: DVector<f64>, seed: u64) -> ProblemInstance {
    let n = a.ncols();
    let ata = a.transpose() * &a;
    let l = 2.0 * power_iteration_sym(&ata);
    let xstar = solve(&a, &b);
    let (av, bv) = (Arc::new(a.clone()), Arc::new(b.clone()));
    let (ag, bg) = (av.clone(), bv.clone());
    let mut objective = Objective::new(n, move |x| residual(&av, &bv, x).norm_squared())
        .with_gradient(move |x| {
            let r = residual(&ag, &bg, x);
            (ag.transpose() * r * 2.0).as_slice().to_vec()
        })
        .with_lipschitz(l);
    if xstar.is_some() {
        objective = objective.with_plk_exponent(0.5);
    }
    ProblemInstance {
        objective,
        known_fstar: xstar.as_ref().map(|_| 0.0),
        known_xstar: xstar.and_then(|x| Point::new(x.as_slice().to_vec()).ok()),
        meta: GeneratorMeta {
            kind: ProblemKind::LeastSquares,
            n,
            seed,
        },
        lipschitz_radius: None,
        matrix: Some(a),
        rhs: Some(b),
    }
}

pub fn gen_least_squares(n: usize, seed: u64) -> Result<ProblemInstance> {
    check_n(n)?;
    let (a, b) = gaussian_data(n, seed);
    Ok(least_squares_from(a, b, seed))
}

/// `Σ log(1 + (Ax − b)_i²)` with `L = 2‖AᵀA‖_∞`.
pub fn image_restoration_from(a: DMatrix<f64>, b: DVector<f64>, seed: u64) -> ProblemInstance {
    let n = a.ncols();
    let ata = a.transpose() * &a;
    let l = 2.0 * inf_norm(&ata);
    let xstar = solve(&a, &b);
    let (av, bv) = (Arc::new(a.clone()), Arc::new(b.clone()));
    let (ag, bg) = (av.clone(), bv.clone());
    let objective = Objective::new(n, move |x| residual(&av, &bv, x).iter().map(|r| (r * r).ln_1p()).sum())
        .with_gradient(move |x| {
            let r = residual(&ag, &bg, x).map(|r| r / (1.0 + r * r));
            (ag.transpose() * r * 2.0).as_slice().to_vec()
        })
        .with_lipschitz(l);
    ProblemInstance {
        objective,
        known_fstar: xstar.as_ref().map(|_| 0.0),
        known_xstar: xstar.and_then(|x| Point::new(x.as_slice().to_vec()).ok()),
        meta: GeneratorMeta {
            kind: ProblemKind::ImageRestoration,
            n,
            seed,
        },
        lipschitz_radius: None,
        matrix: Some(a),
        rhs: Some(b),
    }
}

pub fn gen_image_restoration(n: usize, seed: u64) -> Result<ProblemInstance> {
    check_n(n)?;
    let (a, b) = gaussian_data(n, seed);
    Ok(image_restoration_from(a, b, seed))
}

/// One-dimensional `|x|^{2p}`, PLK exponent `q = 1 − 1/(2p)` at 0.
///
/// The attached Lipschitz constant `2p(2p−1)` holds on the unit ball.
pub fn gen_plk_test(p: f64) -> Result<ProblemInstance> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("must exceed 1, got {p}")));
    }
    let e = 2.0 * p;
    let objective = Objective::new(1, move |x| x[0].abs().powf(e))
        .with_gradient(move |x| vec![e * x[0].signum() * x[0].abs().powf(e - 1.0)])
        .with_lipschitz(e * (e - 1.0))
        .with_plk_exponent(1.0 - 1.0 / e);
    Ok(ProblemInstance {
        objective,
        known_fstar: Some(0.0),
        known_xstar: Some(Point::zeros(1)),
        meta: GeneratorMeta {
            kind: ProblemKind::Plk { p },
            n: 1,
            seed: 0,
        },
        lipschitz_radius: Some(1.0),
        matrix: None,
        rhs: None,
    })
}

/// `½ xᵀ diag(d) x` with `d` log-spaced from 1 to `condition`.
pub fn gen_diagonal_quadratic(n: usize, condition: f64) -> Result<ProblemInstance> {
    check_n(n)?;
    if !(condition >= 1.0 && condition.is_finite()) {
        return Err(Error::invalid("condition", "must be at least 1"));
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            condition.powf(t)
        })
        .collect();
    let (dv, dg) = (Arc::new(diag.clone()), Arc::new(diag));
    let objective = Objective::new(n, move |x| {
        0.5 * x.iter().zip(dv.iter()).map(|(x, d)| d * x * x).sum::<f64>()
    })
    .with_gradient(move |x| x.iter().zip(dg.iter()).map(|(x, d)| d * x).collect())
    .with_lipschitz(condition)
    .with_strong_convexity(1.0)
    .with_plk_exponent(0.5);
    Ok(ProblemInstance {
        objective,
        known_fstar: Some(0.0),
        known_xstar: Some(Point::zeros(n)),
        meta: GeneratorMeta {
            kind: ProblemKind::Custom(format!("diag-quadratic:{condition}")),
            n,
            seed: 0,
        },
        lipschitz_radius: None,
        matrix: None,
        rhs: None,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    Ok(())
}
