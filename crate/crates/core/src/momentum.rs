//! Momentum schedules `(β_k, γ_k)` and the parameter conditions they must
//! meet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentumKind {
    None,
    /// `β_k = k/(k+3)`, `γ_k = 0` (the derivative-free experiments' Polyak form).
    HeavyBall,
    /// `β_k = 4/(√L+√μ)²`, `γ_k = 0`.
    HeavyBallTheory {
        l: f64,
        mu: f64,
    },
    /// `β_k = γ_k = (√L−√μ)/(√L+√μ)`.
    NesterovSc {
        l: f64,
        mu: f64,
    },
    /// `β_k = γ_k = k/(k+3)`.
    NesterovConvex,
    /// `β_k = γ_k = (θ_{k−1}−1)/θ_k`, `θ_0 = θ_1 = 1`.
    Fista,
    Custom {
        beta: f64,
        gamma: f64,
    },
}

/// A momentum sequence with an optional cap `β_k ← min(β_k, cap)` applied to
/// both weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumSchedule {
    kind: MomentumKind,
    cap: Option<f64>,
    thetas: Vec<f64>,
}

/// Suprema of a schedule. `attained == false` means the supremum is only a
/// limit, as for the `k/(k+3)` and FISTA sequences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleBounds {
    pub beta_bar: f64,
    pub delta_bar: f64,
    pub attained: bool,
}

impl ScheduleBounds {
    /// `β̄ < 1`.
    pub fn admissible(&self) -> bool {
        self.beta_bar < 1.0
    }
}

impl MomentumSchedule {
    pub const DEFAULT_CAP: f64 = 0.95;

    pub fn new(kind: MomentumKind) -> Result<Self> {
        match kind {
            MomentumKind::NesterovSc { l, mu } | MomentumKind::HeavyBallTheory { l, mu } => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::invalid("L", format!("must be positive, got {l}")));
                }
                if !(mu > 0.0 && mu <= l) {
                    return Err(Error::invalid("mu", format!("must lie in (0, L], got {mu}")));
                }
            }
            MomentumKind::Custom { beta, gamma }
                if !(beta >= 0.0 && gamma >= 0.0 && beta.is_finite() && gamma.is_finite()) =>
            {
                return Err(Error::invalid("beta/gamma", "must be finite and nonnegative"));
            }
            _ => {}
        }
        Ok(MomentumSchedule {
            kind,
            cap: None,
            thetas: vec![1.0, 1.0],
        })
    }

    pub fn none() -> Self {
        Self::new(MomentumKind::None).expect("valid")
    }

    pub fn heavy_ball() -> Self {
        Self::new(MomentumKind::HeavyBall).expect("valid")
    }

    pub fn nesterov_convex() -> Self {
        Self::new(MomentumKind::NesterovConvex).expect("valid")
    }

    pub fn fista() -> Self {
        Self::new(MomentumKind::Fista).expect("valid")
    }

    pub fn nesterov_sc(l: f64, mu: f64) -> Result<Self> {
        Self::new(MomentumKind::NesterovSc { l, mu })
    }

    pub fn heavy_ball_theory(l: f64, mu: f64) -> Result<Self> {
        Self::new(MomentumKind::HeavyBallTheory { l, mu })
    }

    pub fn constant(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(MomentumKind::Custom { beta, gamma })
    }

    /// Resolves a configuration name. `nesterov-sc` and `heavy-ball` need `L`
    /// and `μ`.
    pub fn from_name(name: &str, l: Option<f64>, mu: Option<f64>) -> Result<Self> {
        let need = |what: &str| Error::Config(format!("momentum `{name}` needs {what}"));
        match name {
            "none" => Ok(Self::none()),
            "polyak" => Ok(Self::heavy_ball()),
            "nesterov" => Ok(Self::nesterov_convex()),
            "fista" => Ok(Self::fista()),
            "nesterov-sc" => Self::nesterov_sc(l.ok_or_else(|| need("L"))?, mu.ok_or_else(|| need("mu"))?),
            "heavy-ball" => Self::heavy_ball_theory(l.ok_or_else(|| need("L"))?, mu.ok_or_else(|| need("mu"))?),
            other => Err(Error::Config(format!("unknown momentum schedule `{other}`"))),
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&cap) {
            return Err(Error::invalid("cap", format!("must lie in [0, 1), got {cap}")));
        }
        self.cap = Some(cap);
        Ok(self)
    }

    pub fn kind(&self) -> MomentumKind {
        self.kind
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    fn theta(&mut self, k: usize) -> f64 {
        while self.thetas.len() <= k {
            let t = *self.thetas.last().expect("seeded");
            self.thetas.push((1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0);
        }
        self.thetas[k]
    }

    /// `(β_k, γ_k)` for `k ≥ 1`.
    pub fn beta_gamma(&mut self, k: u64) -> (f64, f64) {
        assert!(k >= 1, "momentum is indexed from k = 1");
        let kf = k as f64;
        let (beta, gamma) = match self.kind {
            MomentumKind::None => (0.0, 0.0),
            MomentumKind::HeavyBall => (kf / (kf + 3.0), 0.0),
            MomentumKind::HeavyBallTheory { l, mu } => (4.0 / (l.sqrt() + mu.sqrt()).powi(2), 0.0),
            MomentumKind::NesterovSc { l, mu } => {
                let b = (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt());
                (b, b)
            }
            MomentumKind::NesterovConvex => (kf / (kf + 3.0), kf / (kf + 3.0)),
            MomentumKind::Fista => {
                let k = k as usize;
                let b = (self.theta(k - 1) - 1.0) / self.theta(k);
                (b, b)
            }
            MomentumKind::Custom { beta, gamma } => (beta, gamma),
        };
        match self.cap {
            Some(c) => (beta.min(c), gamma.min(c)),
            None => (beta, gamma),
        }
    }

    /// Suprema over the whole (infinite) schedule.
    pub fn bounds(&self) -> ScheduleBounds {
        let growing = |delta_bar_raw: f64| match self.cap {
            Some(c) => ScheduleBounds {
                beta_bar: c,
                delta_bar: delta_bar_raw.min(c),
                attained: true,
            },
            None => ScheduleBounds {
                beta_bar: 1.0,
                delta_bar: delta_bar_raw,
                attained: false,
            },
        };
        let constant = |b: f64, g: f64| {
            let (b, g) = match self.cap {
                Some(c) => (b.min(c), g.min(c)),
                None => (b, g),
            };
            ScheduleBounds {
                beta_bar: b,
                delta_bar: (b - g).abs(),
                attained: true,
            }
        };
        match self.kind {
            MomentumKind::None => constant(0.0, 0.0),
            MomentumKind::HeavyBall => growing(1.0),
            MomentumKind::NesterovConvex | MomentumKind::Fista => growing(0.0),
            MomentumKind::HeavyBallTheory { l, mu } => constant(4.0 / (l.sqrt() + mu.sqrt()).powi(2), 0.0),
            MomentumKind::NesterovSc { l, mu } => {
                let b = (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt());
                constant(b, b)
            }
            MomentumKind::Custom { beta, gamma } => constant(beta, gamma),
        }
    }

    /// Maxima over `k = 1, …, horizon`.
    pub fn bounds_truncated(&self, horizon: u64) -> ScheduleBounds {
        let mut probe = self.clone();
        let (mut beta_bar, mut delta_bar) = (0.0f64, 0.0f64);
        for k in 1..=horizon {
            let (b, g) = probe.beta_gamma(k);
            beta_bar = beta_bar.max(b);
            delta_bar = delta_bar.max((b - g).abs());
        }
        ScheduleBounds {
            beta_bar,
            delta_bar,
            attained: true,
        }
    }
}

pub fn schedule_bounds(s: &MomentumSchedule) -> ScheduleBounds {
    s.bounds()
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConditionTerm {
    /// `Lτ ≥ 1 − ν`.
    StepSize { value: f64, limit: f64 },
    /// `2Lτδ̄ + (Lτ+1)β̄² ≥ 1 − ν`.
    Momentum { value: f64, limit: f64 },
    /// A non-positive or non-finite input.
    Domain(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible(Vec<ConditionTerm>),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }

    pub fn describe(&self) -> String {
        match self {
            Feasibility::Feasible => "feasible".into(),
            Feasibility::Infeasible(terms) => terms
                .iter()
                .map(|t| match t {
                    ConditionTerm::StepSize { value, limit } => format!("L*tau = {value} >= 1 - nu = {limit}"),
                    ConditionTerm::Momentum { value, limit } => {
                        format!("2 L tau delta_bar + (L tau + 1) beta_bar^2 = {value} >= 1 - nu = {limit}")
                    }
                    ConditionTerm::Domain(d) => d.clone(),
                })
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

/// Global condition `max{Lτ, 2Lτδ̄ + (Lτ+1)β̄²} < 1 − ν`.
pub fn feasibility_check(l: f64, tau: f64, nu: f64, beta_bar: f64, delta_bar: f64) -> Feasibility {
    let mut domain = Vec::new();
    if !(l > 0.0 && l.is_finite()) {
        domain.push(ConditionTerm::Domain(format!("L = {l} must be positive")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        domain.push(ConditionTerm::Domain(format!("tau = {tau} must be positive")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        domain.push(ConditionTerm::Domain(format!("nu = {nu} must lie in (0, 1)")));
    }
    if !(beta_bar >= 0.0 && delta_bar >= 0.0) || !delta_bar.is_finite() {
        domain.push(ConditionTerm::Domain(
            "beta_bar, delta_bar must be finite and nonnegative".into(),
        ));
    }
    if !domain.is_empty() {
        return Feasibility::Infeasible(domain);
    }
    let limit = 1.0 - nu;
    let lt = l * tau;
    let momentum = 2.0 * lt * delta_bar + (lt + 1.0) * beta_bar * beta_bar;
    let mut terms = Vec::new();
    if lt >= limit {
        terms.push(ConditionTerm::StepSize { value: lt, limit });
    }
    if momentum >= limit {
        terms.push(ConditionTerm::Momentum { value: momentum, limit });
    }
    if terms.is_empty() {
        Feasibility::Feasible
    } else {
        Feasibility::Infeasible(terms)
    }
}

/// Local-convergence momentum range `β̄ ∈ [0, √(1−ν))`.
pub fn local_momentum_admissible(beta_bar: f64, nu: f64) -> bool {
    beta_bar >= 0.0 && beta_bar < (1.0 - nu).sqrt()
}
