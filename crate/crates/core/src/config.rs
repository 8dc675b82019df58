//! Declarative run configuration: one TOML document (JSON accepted as an
//! alternative encoding of the same schema), resolved into kernels,
//! coefficients and study settings.

use crate::coefficients::{make_builtin_coefficient, BuiltinCoefficient, PeriodicCoefficient};
use crate::harness::{
    AssemblyParamsConfig, DiagnosticsToggles, EpsRatio, ProbeSettings, RhsSpec, StudySettings,
};
use crate::kernels::{families, BuiltinKernel, JumpKernel, ValidationBudget};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Coefficient(#[from] crate::coefficients::CoefficientError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSection {
    pub family: String,
    pub d: usize,
    pub alpha: f64,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Anisotropy amplitude for anisotropic-pareto.
    #[serde(default)]
    pub anisotropy: Option<f64>,
    /// "auto" (family default), "plain", or "slowly-varying"; only the
    /// log-perturbed family distinguishes them.
    #[serde(default)]
    pub mode: Option<String>,
    /// Amplitude of bounded even noise on the plateau (stress test).
    #[serde(default)]
    pub irregular_core: Option<f64>,
}

fn default_r0() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    pub side: f64,
    #[serde(default = "default_rho")]
    pub rho: usize,
}

fn default_rho() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySection {
    #[serde(default = "default_m")]
    pub m: f64,
    pub eps: Vec<EpsRatio>,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    #[serde(default)]
    pub precondition: bool,
    #[serde(default)]
    pub acceptance_threshold: Option<f64>,
    #[serde(default)]
    pub skip_kernel_validation: bool,
    #[serde(default = "default_n_quad_mean")]
    pub n_quad_mean: usize,
    #[serde(default = "default_n_angular")]
    pub n_angular: usize,
    #[serde(default)]
    pub mass_escape_radii: Option<Vec<f64>>,
    #[serde(default)]
    pub translation_shifts: Option<Vec<i64>>,
    pub rhs: RhsSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
    #[serde(default)]
    pub assembly: AssemblyParamsConfig,
}

fn default_m() -> f64 {
    1.0
}
fn default_cg_tol() -> f64 {
    1e-8
}
fn default_cg_max_iter() -> usize {
    50_000
}
fn default_n_quad_mean() -> usize {
    64
}
fn default_n_angular() -> usize {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileConfig {
    pub kernel: KernelSection,
    pub coefficient: BuiltinCoefficient,
    pub grid: GridSection,
    pub study: StudySection,
    #[serde(default)]
    pub validation: ValidationBudget,
    #[serde(default)]
    pub probe: Option<ProbeSettings>,
    #[serde(default)]
    pub output: OutputSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
        }
    }

    pub fn builtin_kernel(&self) -> Result<BuiltinKernel, ConfigError> {
        let k = &self.kernel;
        let mode = k.mode.as_deref().unwrap_or("auto");
        match k.family.as_str() {
            "pareto" => Ok(BuiltinKernel::Pareto { r0: k.r0 }),
            "anisotropic-pareto" => Ok(BuiltinKernel::AnisotropicPareto {
                r0: k.r0,
                anisotropy: k.anisotropy.ok_or_else(|| {
                    ConfigError::Invalid("anisotropic-pareto needs `anisotropy`".into())
                })?,
            }),
            "log-perturbed" => Ok(BuiltinKernel::LogPerturbed {
                r0: k.r0,
                plain_mode: match mode {
                    "plain" => true,
                    "auto" | "slowly-varying" => false,
                    other => {
                        return Err(ConfigError::Invalid(format!(
                            "unknown kernel mode `{other}` (expected auto, plain, slowly-varying)"
                        )))
                    }
                },
            }),
            "oscillation-violator" => Ok(BuiltinKernel::OscillationViolator { r0: k.r0 }),
            other => Err(ConfigError::Invalid(format!(
                "unknown kernel family `{other}`"
            ))),
        }
    }

    fn settings(&self) -> StudySettings {
        let side = self.grid.side;
        StudySettings {
            m: self.study.m,
            side,
            rho: self.grid.rho,
            eps_schedule: self.study.eps.clone(),
            rhs: self.study.rhs.clone(),
            cg_tol: self.study.cg_tol,
            cg_max_iter: self.study.cg_max_iter,
            precondition: self.study.precondition,
            assembly: self.study.assembly,
            n_quad_mean: self.study.n_quad_mean,
            n_angular: self.study.n_angular,
            diagnostics: self.study.diagnostics,
            mass_escape_radii: self
                .study
                .mass_escape_radii
                .clone()
                .unwrap_or_else(|| vec![side / 8.0, side / 4.0]),
            translation_shifts: self
                .study
                .translation_shifts
                .clone()
                .unwrap_or_else(|| vec![1, 2, 4, 8, 16]),
            acceptance_threshold: self.study.acceptance_threshold,
            skip_kernel_validation: self.study.skip_kernel_validation,
            validation: self.validation.clone(),
            probe: self.probe.unwrap_or_default(),
        }
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if !(self.grid.side > 0.0) {
            return Err(ConfigError::Invalid("grid.side must be positive".into()));
        }
        if self.study.eps.is_empty() {
            return Err(ConfigError::Invalid("study.eps must be nonempty".into()));
        }
        let family = self.builtin_kernel()?;
        match self.kernel.d {
            1 => Ok(Resolved::D1(Bundle {
                kernel: families::make_builtin::<f64, 1>(
                    &family,
                    self.kernel.alpha,
                    self.kernel.irregular_core,
                )?,
                coefficient: make_builtin_coefficient::<f64, 1>(&self.coefficient)?,
                settings: self.settings(),
            })),
            2 => Ok(Resolved::D2(Bundle {
                kernel: families::make_builtin::<f64, 2>(
                    &family,
                    self.kernel.alpha,
                    self.kernel.irregular_core,
                )?,
                coefficient: make_builtin_coefficient::<f64, 2>(&self.coefficient)?,
                settings: self.settings(),
            })),
            d => Err(ConfigError::Invalid(format!(
                "dimension must be 1 or 2, got {d}"
            ))),
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

pub struct Bundle<const D: usize> {
    pub kernel: JumpKernel<f64, D>,
    pub coefficient: PeriodicCoefficient<f64, D>,
    pub settings: StudySettings,
}

pub enum Resolved {
    D1(Bundle<1>),
    D2(Bundle<2>),
}
