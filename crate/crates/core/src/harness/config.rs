use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momentum::MomentumSchedule;
use crate::oracles::{Checker, FdKind, NoiseModel};
use crate::problems::{gen_image_restoration, gen_least_squares, gen_plk_test, ProblemInstance};

/// A problem family and size, written `L50` (least squares), `N100`
/// (image restoration) or `plk:2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProblemSpec {
    LeastSquares(usize),
    ImageRestoration(usize),
    Plk(f64),
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        match *self {
            ProblemSpec::LeastSquares(n) | ProblemSpec::ImageRestoration(n) => n,
            ProblemSpec::Plk(_) => 1,
        }
    }

    pub fn build(&self, seed: u64) -> Result<ProblemInstance> {
        match *self {
            ProblemSpec::LeastSquares(n) => gen_least_squares(n, seed),
            ProblemSpec::ImageRestoration(n) => gen_image_restoration(n, seed),
            ProblemSpec::Plk(p) => gen_plk_test(p),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::LeastSquares(n) => write!(f, "L{n}"),
            ProblemSpec::ImageRestoration(n) => write!(f, "N{n}"),
            ProblemSpec::Plk(p) => write!(f, "plk:{p}"),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown problem '{s}' (expected L<n>, N<n> or plk:<p>)"));
        if let Some(p) = s.strip_prefix("plk:") {
            return p.parse().map(ProblemSpec::Plk).map_err(|_| bad());
        }
        let (head, n) = s.split_at(s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?);
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match head {
            "L" => Ok(ProblemSpec::LeastSquares(n)),
            "N" => Ok(ProblemSpec::ImageRestoration(n)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ProblemSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProblemSpec> for String {
    fn from(p: ProblemSpec) -> String {
        p.to_string()
    }
}

/// `DF`, `DFn`, `DFp` or any schedule name, joined to `fordif`/`cendif`:
/// `DFn-cendif`, `fista-fordif`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodSpec {
    pub family: String,
    pub fd: FdKind,
}

impl MethodSpec {
    pub fn schedule_name(&self) -> &str {
        match self.family.as_str() {
            "DF" => "none",
            "DFn" => "nesterov",
            "DFp" => "polyak",
            other => other,
        }
    }

    pub fn schedule(&self, l: Option<f64>, mu: Option<f64>) -> Result<MomentumSchedule> {
        MomentumSchedule::from_name(self.schedule_name(), l, mu)
    }

    pub fn all_six() -> Vec<MethodSpec> {
        ["DF", "DFn", "DFp"]
            .iter()
            .flat_map(|f| {
                [FdKind::Forward, FdKind::Central].map(|fd| MethodSpec {
                    family: f.to_string(),
                    fd,
                })
            })
            .collect()
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.family, self.fd.label())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, scheme) = s
            .rsplit_once('-')
            .ok_or_else(|| Error::Config(format!("method '{s}' must end in -fordif or -cendif")))?;
        let fd = match scheme {
            "fordif" => FdKind::Forward,
            "cendif" => FdKind::Central,
            _ => return Err(Error::Config(format!("method '{s}' must end in -fordif or -cendif"))),
        };
        let spec = MethodSpec {
            family: family.to_string(),
            fd,
        };
        // Reject unknown schedule names early; strongly convex ones resolve per instance.
        match spec.schedule_name() {
            "nesterov-sc" | "heavy-ball" => {}
            name => {
                MomentumSchedule::from_name(name, None, None)
                    .map_err(|e| Error::Config(format!("method '{s}': {e}")))?;
            }
        }
        Ok(spec)
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Off,
    On,
}

impl Noise {
    pub fn label(self) -> &'static str {
        match self {
            Noise::Off => "off",
            Noise::On => "on",
        }
    }
}

impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Noise::Off),
            "on" => Ok(Noise::On),
            _ => Err(Error::Config(format!("noise must be 'on' or 'off', got '{s}'"))),
        }
    }
}

/// Experiment matrix, read from one JSON document. Every field has a
/// default, so `{}` is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemSpec>,
    pub noise: Vec<Noise>,
    pub noise_amplitude: f64,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    /// Budget is `budget_multiplier · n` value evaluations.
    pub budget_multiplier: u64,
    /// Defaults to `0.9(1 − ν)/L` per instance.
    pub tau: Option<f64>,
    pub nu: f64,
    pub theta: f64,
    pub epsilon0: f64,
    pub max_backtracks: u32,
    pub checker: Checker,
    /// Caps β and γ; `None` runs the schedules as-is.
    pub momentum_cap: Option<f64>,
    /// Relative drop of `f − f*` that counts as reaching the target.
    pub target_ratio: f64,
    /// `0` uses every core, `1` runs sequentially.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problems: vec![
                ProblemSpec::LeastSquares(50),
                ProblemSpec::LeastSquares(100),
                ProblemSpec::ImageRestoration(50),
                ProblemSpec::ImageRestoration(100),
            ],
            noise: vec![Noise::Off, Noise::On],
            noise_amplitude: NoiseModel::DEFAULT_AMPLITUDE,
            methods: MethodSpec::all_six(),
            seeds: vec![1],
            budget_multiplier: 200,
            tau: None,
            nu: 0.5,
            theta: 0.5,
            epsilon0: 0.1,
            max_backtracks: 60,
            checker: Checker::Bound,
            momentum_cap: None,
            target_ratio: 1e-6,
            workers: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return cfg(format!("nu must lie in (0, 1), got {}", self.nu));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return cfg(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return cfg(format!("epsilon0 must be positive, got {}", self.epsilon0));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return cfg(format!("tau must be positive, got {t}"));
            }
        }
        if let Some(c) = self.momentum_cap {
            if !(0.0..1.0).contains(&c) {
                return cfg(format!("momentum_cap must lie in [0, 1), got {c}"));
            }
        }
        if self.budget_multiplier == 0 {
            return cfg("budget_multiplier must be positive".into());
        }
        if !(self.noise_amplitude > 0.0 && self.noise_amplitude.is_finite()) {
            return cfg("noise_amplitude must be positive".into());
        }
        if !(self.target_ratio > 0.0 && self.target_ratio < 1.0) {
            return cfg("target_ratio must lie in (0, 1)".into());
        }
        Ok(())
    }
}
