//! JSON run configuration shared by all subcommands.

use crate::analytic::Method;
use crate::error::{invalid, Result};
use crate::gd::StepRule;
use crate::model::{ProblemInstance, Rho};
use crate::tuners::{self, Schedule};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Signals {
    Same(f64),
    PerClass(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub d: usize,
    pub n: Vec<usize>,
    pub s: Signals,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// N_i = ⌊N_max R^{−(c−i+1)/c}⌋
    #[default]
    Exponential,
    /// N_i = ⌊N_max R^{−(c−i)/(c−1)}⌋, minority N_max/R and majority N_max
    Endpoint,
    Cifar10Longtail,
    Cifar10Modified,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default)]
    pub kind: ProfileKind,
    #[serde(default)]
    pub c: Option<usize>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub s: Option<Signals>,
}

impl ProfileSpec {
    pub fn sizes(&self) -> Result<Vec<usize>> {
        match self.kind {
            ProfileKind::Cifar10Longtail => Ok(tuners::CIFAR10_LONGTAIL_PRESET.to_vec()),
            ProfileKind::Cifar10Modified => Ok(tuners::CIFAR10_MODIFIED_PRESET.to_vec()),
            kind => {
                let (Some(c), Some(n_max), Some(ratio)) = (self.c, self.n_max, self.ratio) else {
                    return invalid("profile needs c, n_max and ratio");
                };
                if kind == ProfileKind::Exponential {
                    tuners::exp_longtail_profile(c, n_max, ratio)
                } else {
                    tuners::endpoint_longtail_profile(c, n_max, ratio)
                }
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    Name(Method),
    WithRho { method: Method, rho: Rho },
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Name(m) | MethodSpec::WithRho { method: m, .. } => *m,
        }
    }

    pub fn rho(&self, default: Rho) -> Rho {
        match self {
            MethodSpec::Name(_) => default,
            MethodSpec::WithRho { rho, .. } => *rho,
        }
    }

    /// Label for the CSV `method` column.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Name(m) => m.name().to_string(),
            MethodSpec::WithRho { method, rho } => format!("{}_rho={rho}", method.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    /// MA δ = (δ*)^γ, LA ι = τι*, CDT δ = N^{−γ}
    #[default]
    Theoretical,
    /// MA δ = N^{−γ}, LA ι = τ log N, CDT δ = N^{−γ}
    Standard,
    /// MA δ = N^{−γ}, LA ι = τ N/ΣN, CDT δ = N^{−γ}
    EqualSignal,
}

impl Tuning {
    pub fn schedule(self, method: Method, param: f64) -> Schedule {
        match (self, method) {
            (_, Method::Mm) => Schedule::SizePower(0.0),
            (_, Method::Cdt) => Schedule::SizePower(param),
            (Tuning::Theoretical, Method::Ma) => Schedule::MaStarPower(param),
            (Tuning::Theoretical, Method::La) => Schedule::LaStarScaled(param),
            (_, Method::Ma) => Schedule::SizePower(param),
            (Tuning::Standard, Method::La) => Schedule::LogSize(param),
            (Tuning::EqualSignal, Method::La) => Schedule::SizeFraction(param),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn linear(from: f64, to: f64, steps: usize) -> Self {
        Grid { from, to, steps, log: false }
    }

    pub fn logarithmic(from: f64, to: f64, steps: usize) -> Self {
        Grid { from, to, steps, log: true }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return invalid("grid is empty (steps = 0)");
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return invalid("grid bounds must be finite");
        }
        if self.log && !(self.from > 0.0 && self.to > 0.0) {
            return invalid("log grid bounds must be positive");
        }
        if self.steps == 1 {
            return Ok(vec![self.from]);
        }
        let m = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                let t = i as f64 / m;
                if self.log {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    /// Exact margin solver.
    #[default]
    Margin,
    /// Gradient descent on the matching loss.
    Gd,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Sufficient-statistics sampler (cost independent of d).
    #[default]
    Gram,
    /// Materialised d-dimensional points.
    Dataset,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdOptions {
    #[serde(default = "default_gd_steps")]
    pub steps: usize,
    #[serde(default)]
    pub step_rule: StepRule,
}

impl Default for GdOptions {
    fn default() -> Self {
        GdOptions { steps: default_gd_steps(), step_rule: StepRule::default() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ProfileOrSizes {
    Sizes(Vec<usize>),
    Profile(ProfileSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub classes: Option<usize>,
    /// Per-class training sizes; the full training file when absent.
    #[serde(default)]
    pub profile: Option<ProfileOrSizes>,
    #[serde(default)]
    pub zetas: Option<Vec<f64>>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub profile: Option<ProfileSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub tuning: Tuning,
    #[serde(default)]
    pub grid: Option<Grid>,
    /// Hyperparameter used by scans that do not sweep it.
    #[serde(default = "default_param")]
    pub param: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_rho")]
    pub rho: Rho,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_test")]
    pub test_per_class: usize,
    #[serde(default)]
    pub trainer: Trainer,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub gd: GdOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dims: Option<Grid>,
    #[serde(default)]
    pub rhos: Option<Grid>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
}

fn default_methods() -> Vec<MethodSpec> {
    [Method::Mm, Method::Ma, Method::La, Method::Cdt].into_iter().map(MethodSpec::Name).collect()
}
fn default_param() -> f64 {
    1.0
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_rho() -> Rho {
    Rho::Infinite
}
fn default_mc() -> usize {
    10_000
}
fn default_test() -> usize {
    500
}
fn default_gd_steps() -> usize {
    20_000
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.instance.is_some() && self.profile.is_some() {
            return invalid("give either instance or profile, not both");
        }
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty");
        }
        if self.methods.is_empty() {
            return invalid("methods must not be empty");
        }
        if self.mc_samples == 0 || self.test_per_class == 0 {
            return invalid("mc_samples and test_per_class must be positive");
        }
        Ok(())
    }

    /// Hyperparameter grid; γ, τ ∈ [0, 2] with 21 points by default.
    pub fn grid_points(&self) -> Result<Vec<f64>> {
        self.grid.unwrap_or(Grid::linear(0.0, 2.0, 21)).points()
    }

    /// The instance described by `instance` or `profile`, with the given seed.
    pub fn instance(&self, seed: u64) -> Result<ProblemInstance> {
        let (d, n, s) = match (&self.instance, &self.profile) {
            (Some(spec), _) => (spec.d, spec.n.clone(), spec.s.clone()),
            (None, Some(p)) => {
                let Some(d) = p.d else { return invalid("profile needs d") };
                let Some(s) = p.s.clone() else { return invalid("profile needs s") };
                (d, p.sizes()?, s)
            }
            (None, None) => return invalid("config needs an instance or a profile"),
        };
        let c = n.len();
        let s = match s {
            Signals::Same(v) => vec![v; c],
            Signals::PerClass(v) => v,
        };
        ProblemInstance::new(c, d, n, s, seed)
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf).or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"))
    }
}
