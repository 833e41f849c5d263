//! Inexact gradient descent with momentum.
//!
//! The iteration `x^{k+1} = x^k + β_k(x^k − x^{k−1}) − τ g^k` only asks the
//! surrogate `g^k` to satisfy `‖g^k − ∇f(x^k + γ_k(x^k − x^{k−1}))‖ ≤ ν‖g^k‖`.
//! Finite differences with an adaptive step, extragradient and
//! sharpness-aware corrections, and inexact proximal steps on a Moreau
//! envelope all fit that mold; [`solvers`] runs them through one loop.
//!
//! ```
//! use igdm::{problems::gen_least_squares, solvers::*, MomentumSchedule, Point};
//!
//! let inst = gen_least_squares(10, 7).unwrap();
//! let l = inst.objective.lipschitz().unwrap();
//! let params = SolverParams::new(0.9 * 0.5 / l, 0.5).unwrap().with_max_iters(2000);
//! let trace = solve(
//!     &inst.objective,
//!     Point::zeros(10),
//!     Scheme::Igdm,
//!     MomentumSchedule::nesterov_convex(),
//!     &params,
//!     &OracleConfig::Exact,
//! )
//! .unwrap();
//! assert!(trace.last().unwrap().f_val < 1e-6);
//! ```

pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod harness;
pub mod momentum;
pub mod objective;
pub mod oracles;
pub mod point;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use momentum::{MomentumKind, MomentumSchedule};
pub use objective::Objective;
pub use point::Point;
pub use trace::{Record, RunTrace, Termination};
