//! The study report and its serialized forms.
//!
//! JSON is the full record; the CSV carries the per-eps table with the fixed
//! column set `eps,N,error,iterations,c1_ratio,c2_ratio,energy`. Everything
//! except the `timing` block is deterministic for a fixed config and seed.

use crate::coefficients::CoefficientReport;
use crate::kernels::KernelComplianceReport;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationRow {
    pub shift_cells: i64,
    pub shift_length: f64,
    pub modulus: f64,
    /// modulus / |shift|^alpha; bounded across the schedule when the
    /// translation estimates hold.
    pub ratio_to_alpha_power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassEscapeRow {
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassEscapeSup {
    pub radius: f64,
    pub sup_over_eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakProbeRow {
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// True when psi integrated to zero and the ratio is reported as exact 1.
    pub sentinel: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub per_record_ms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsRecord {
    pub eps: String,
    pub eps_value: f64,
    pub n: usize,
    /// Relative L2 error against the effective solution.
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub c1_ratio: f64,
    pub c2_ratio: f64,
    pub energy: f64,
    pub fractional_tail: f64,
    /// fractional_tail over its energy bound 2 E / (beta1 gamma1); at most 1
    /// up to discretization slack.
    pub c4_chain_ratio: f64,
    pub tail_estimate: f64,
    pub translation: Vec<TranslationRow>,
    pub mass_escape: Vec<MassEscapeRow>,
    /// Set when the error failed the soft refinement-monotonicity check.
    pub nonmonotone: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub config: serde_json::Value,
    pub dimension: usize,
    pub alpha: f64,
    pub lambda_bar: f64,
    pub c_alpha: f64,
    pub kernel_validation: Option<KernelComplianceReport>,
    pub coefficient_validation: CoefficientReport,
    pub records: Vec<EpsRecord>,
    pub fit: Option<RateFit>,
    pub fit_note: String,
    pub weak_probe: Vec<WeakProbeRow>,
    pub mass_escape_sup: Vec<MassEscapeSup>,
    pub package_version: String,
    /// Wall-clock data; excluded from byte-level determinism comparisons.
    pub timing: Timing,
}

impl ConvergenceReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json_pretty().as_bytes())?;
        f.write_all(b"\n")
    }

    /// The pinned per-eps CSV table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,N,error,iterations,c1_ratio,c2_ratio,energy\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.eps, r.n, r.error, r.iterations, r.c1_ratio, r.c2_ratio, r.energy
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.error)
    }
}
