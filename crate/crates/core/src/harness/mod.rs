//! Study orchestration: eps-sweeps against the effective solution, the
//! diagnostic probes, and rate fitting.
//!
//! The harness works on the concrete `f64` scalar: it owns the serialized
//! tolerances and report formats, while the math it drives stays generic.

mod plot;
mod report;

pub use plot::emit_plot;
pub use report::{
    ConvergenceReport, EpsRecord, MassEscapeRow, MassEscapeSup, RateFit, Timing,
    TranslationRow, WeakProbeRow,
};

use crate::coefficients::{mean_lambda, validate_coefficient, PeriodicCoefficient};
use crate::discretization::{
    assemble_stencil, fractional_energy_tail, AssemblyParams, DiscreteField, TorusGrid,
};
use crate::geom;
use crate::kernels::{validate_kernel, JumpKernel, KernelComplianceReport, ValidationBudget};
use crate::quadrature::gauss_panel;
use crate::solvers::{init_symbol, solve_effective, solve_epsilon, CgParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("kernel failed hypothesis validation ({failed}); pass the override flag to study it anyway")]
    KernelRejected {
        failed: String,
        report: Box<KernelComplianceReport>,
    },
    #[error("coefficient failed validation: worst symmetry {0:.3e}")]
    CoefficientRejected(f64),
    #[error("invalid schedule entry eps = {eps}: {reason}")]
    InvalidSchedule { eps: String, reason: String },
    #[error("probe support violates the domain constraint: |x| + |y| can reach {reach:.3} > 1/delta = {limit:.3}")]
    ProbeSupport { reach: f64, limit: f64 },
    #[error("cutoff {0} does not fit the torus (needs 2L <= T/2)")]
    CutoffTooLarge(f64),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Coefficient(#[from] crate::coefficients::CoefficientError),
    #[error(transparent)]
    Discretization(#[from] crate::discretization::DiscretizationError),
    #[error(transparent)]
    Solver(#[from] crate::solvers::SolverError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A rational eps so commensurability checks stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EpsRatio {
    pub num: u32,
    pub den: u32,
}

impl EpsRatio {
    pub fn new(num: u32, den: u32) -> Result<Self, String> {
        if num == 0 || den == 0 {
            return Err(format!("eps must be a positive rational, got {num}/{den}"));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: u32 = a.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
            let den: u32 = b.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
            return Self::new(num, den);
        }
        let v: f64 = s.parse().map_err(|e| format!("bad eps `{s}`: {e}"))?;
        if !(v > 0.0 && v <= 1.0e6) {
            return Err(format!("eps {v} out of range"));
        }
        // Accept decimals that are exactly representable with a small
        // denominator (dyadics and friends).
        for den in 1..=4096u32 {
            let num = v * den as f64;
            if (num - num.round()).abs() < 1e-12 && num.round() >= 1.0 {
                return Self::new(num.round() as u32, den);
            }
        }
        Err(format!("eps {v} is not a small rational; write it as p/q"))
    }
}

impl std::fmt::Display for EpsRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl TryFrom<String> for EpsRatio {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Self::parse(&s)
    }
}

impl From<EpsRatio> for String {
    fn from(r: EpsRatio) -> String {
        r.to_string()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Right-hand side description; always concentrated in the central quarter of
/// the torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhsSpec {
    /// Periodized Gaussian bump centered at T/2 with the given width.
    GaussianBump { width: f64 },
    /// Mix of cosine harmonics: f = sum a_j cos(2 pi k_j . x / T + phase_j).
    Harmonics {
        modes: Vec<Vec<i64>>,
        amplitudes: Vec<f64>,
        #[serde(default)]
        phases: Vec<f64>,
    },
}

impl RhsSpec {
    pub fn build<const D: usize>(&self, grid: TorusGrid<f64, D>) -> DiscreteField<f64, D> {
        let side = grid.side;
        match self {
            RhsSpec::GaussianBump { width } => {
                let w = *width;
                DiscreteField::from_fn(grid, |x| {
                    let mut total = 0.0;
                    // Far periodization images are below machine precision.
                    crate::harness::image_sum::<D>(3, |img| {
                        let mut r2 = 0.0;
                        for k in 0..D {
                            let dx = x[k] - side / 2.0 + img[k] as f64 * side;
                            r2 += dx * dx;
                        }
                        total += (-r2 / (2.0 * w * w)).exp();
                    });
                    total
                })
            }
            RhsSpec::Harmonics {
                modes,
                amplitudes,
                phases,
            } => DiscreteField::from_fn(grid, |x| {
                let mut total = 0.0;
                for (j, mode) in modes.iter().enumerate() {
                    let amp = amplitudes.get(j).copied().unwrap_or(1.0);
                    let phase = phases.get(j).copied().unwrap_or(0.0);
                    let mut arg = phase;
                    for k in 0..D {
                        arg += std::f64::consts::TAU * mode.get(k).copied().unwrap_or(0) as f64
                            * x[k]
                            / side;
                    }
                    total += amp * arg.cos();
                }
                total
            }),
        }
    }
}

pub(crate) fn image_sum<const D: usize>(r: i64, mut f: impl FnMut([i64; D])) {
    let mut idx = [-r; D];
    'outer: loop {
        f(idx);
        for k in (0..D).rev() {
            idx[k] += 1;
            if idx[k] <= r {
                continue 'outer;
            }
            idx[k] = -r;
        }
        break;
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsToggles {
    pub translation: bool,
    pub mass_escape: bool,
    pub fractional_tail: bool,
    pub weak_probe: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        Self {
            translation: true,
            mass_escape: true,
            fractional_tail: true,
            weak_probe: false,
        }
    }
}

/// Geometry of the weak-convergence test function psi(x, y) =
/// B1(|x - T-center|-free x) B2(|x - y|); both factors are polynomial bumps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub delta: f64,
    pub x_halfwidth: f64,
    pub z_max: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            delta: 0.5,
            x_halfwidth: 0.5,
            z_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySettings {
    pub m: f64,
    pub side: f64,
    /// Cells per eps: h = eps / rho.
    pub rho: usize,
    pub eps_schedule: Vec<EpsRatio>,
    pub rhs: RhsSpec,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub precondition: bool,
    pub assembly: AssemblyParamsConfig,
    pub n_quad_mean: usize,
    pub n_angular: usize,
    pub diagnostics: DiagnosticsToggles,
    /// Cutoff radii L for the mass-escape diagnostic (default T/8 and T/4).
    pub mass_escape_radii: Vec<f64>,
    /// Translation shifts in grid cells (powers of two by default).
    pub translation_shifts: Vec<i64>,
    pub acceptance_threshold: Option<f64>,
    pub skip_kernel_validation: bool,
    pub validation: ValidationBudget,
    pub probe: ProbeSettings,
}

/// Serializable mirror of [`AssemblyParams`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyParamsConfig {
    pub image_radius: usize,
    pub subsample: usize,
    pub tail_cap: f64,
    pub sv_direct_radius: usize,
}

impl Default for AssemblyParamsConfig {
    fn default() -> Self {
        let d = AssemblyParams::default();
        Self {
            image_radius: d.image_radius,
            subsample: d.subsample,
            tail_cap: d.tail_cap,
            sv_direct_radius: d.sv_direct_radius,
        }
    }
}

impl From<AssemblyParamsConfig> for AssemblyParams {
    fn from(c: AssemblyParamsConfig) -> Self {
        AssemblyParams {
            image_radius: c.image_radius,
            subsample: c.subsample,
            tail_cap: c.tail_cap,
            sv_direct_radius: c.sv_direct_radius,
        }
    }
}

impl StudySettings {
    pub fn baseline(side: f64) -> Self {
        Self {
            m: 1.0,
            side,
            rho: 8,
            eps_schedule: vec![
                EpsRatio::new(1, 2).unwrap(),
                EpsRatio::new(1, 4).unwrap(),
                EpsRatio::new(1, 8).unwrap(),
                EpsRatio::new(1, 16).unwrap(),
            ],
            rhs: RhsSpec::GaussianBump { width: 0.5 },
            cg_tol: 1e-8,
            cg_max_iter: 50_000,
            precondition: false,
            assembly: AssemblyParamsConfig::default(),
            n_quad_mean: 64,
            n_angular: 4096,
            diagnostics: DiagnosticsToggles::default(),
            mass_escape_radii: vec![side / 8.0, side / 4.0],
            translation_shifts: vec![1, 2, 4, 8, 16],
            acceptance_threshold: None,
            skip_kernel_validation: false,
            validation: ValidationBudget::default(),
            probe: ProbeSettings::default(),
        }
    }

    /// Grid size for one schedule entry; must come out a power of two.
    pub fn grid_points(&self, eps: EpsRatio) -> Result<usize, StudyError> {
        let n_f = self.side * self.rho as f64 * eps.den as f64 / eps.num as f64;
        let n = n_f.round();
        if (n_f - n).abs() > 1e-9 || n < 4.0 {
            return Err(StudyError::InvalidSchedule {
                eps: eps.to_string(),
                reason: format!("implied N = {n_f} is not an integer >= 4"),
            });
        }
        let n = n as usize;
        if !n.is_power_of_two() {
            return Err(StudyError::InvalidSchedule {
                eps: eps.to_string(),
                reason: format!("implied N = {n} is not a power of two"),
            });
        }
        Ok(n)
    }
}

/// The tightness diagnostic: h^d sum phi_L(x) u(x)^2 with the piecewise-linear
/// ramp phi_L (0 inside radius L from the torus center, 1 beyond 2L).
pub fn mass_escape<const D: usize>(
    u: &DiscreteField<f64, D>,
    radius: f64,
) -> Result<f64, StudyError> {
    let side = u.grid.side;
    if !(radius > 0.0 && 2.0 * radius <= side / 2.0 + 1e-12) {
        return Err(StudyError::CutoffTooLarge(radius));
    }
    let mut acc = 0.0;
    for i in 0..u.grid.node_count() {
        let x = u.grid.coords(i);
        let mut r2 = 0.0;
        for c in x.iter() {
            let mut d = (c - side / 2.0).abs();
            if d > side / 2.0 {
                d = side - d;
            }
            r2 += d * d;
        }
        let dist = r2.sqrt();
        let phi = ((dist - radius) / radius).clamp(0.0, 1.0);
        acc += phi * u.values[i] * u.values[i];
    }
    Ok(acc * u.cell_volume())
}

/// Ordinary least squares on (log eps, log error). Returns None below two
/// usable points.
pub fn fit_rate(points: &[(f64, f64)]) -> Option<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, err)| *e > 0.0 && *err > 0.0)
        .map(|(e, err)| (e.ln(), err.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = usable
        .iter()
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Some(RateFit {
        slope,
        intercept,
        residual,
        points_used: usable.len(),
    })
}

/// For each eps: the ratio of
/// `int int_{G} eps^{-d-a} p((x-y)/eps) Lambda(x/eps, y/eps) psi dx dy`
/// to its weak limit `mean(Lambda) int int_{G} k |x-y|^{-d-a} psi dx dy`,
/// computed on one shared quadrature grid.
pub fn weak_convergence_probe<const D: usize>(
    kernel: &JumpKernel<f64, D>,
    coeff: &PeriodicCoefficient<f64, D>,
    lambda_bar: f64,
    eps_list: &[f64],
    probe: &ProbeSettings,
) -> Result<Vec<WeakProbeRow>, StudyError> {
    let reach = 2.0 * probe.x_halfwidth + probe.z_max;
    let limit = 1.0 / probe.delta;
    if reach > limit + 1e-12 {
        return Err(StudyError::ProbeSupport { reach, limit });
    }
    let bump = |t: f64| -> f64 {
        let s = 1.0 - t * t;
        if s <= 0.0 {
            0.0
        } else {
            s * s * s
        }
    };
    let b1 = |x: &[f64]| -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        bump(r / probe.x_halfwidth)
    };
    let zmid = 0.5 * (probe.delta + probe.z_max);
    let zhalf = 0.5 * (probe.z_max - probe.delta);
    let b2 = |z: &[f64]| -> f64 {
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        bump((r - zmid) / zhalf)
    };

    let min_eps = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha = kernel.alpha;
    let dpa = D as f64 + alpha;

    // Shared panel layout resolving the finest coefficient oscillation.
    let panel_w = (min_eps / 2.0).min(0.25);
    let order = if D == 1 { 16 } else { 8 };
    let axis_panels = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let count = ((hi - lo) / panel_w).ceil().max(1.0) as usize;
        (0..count)
            .map(|i| {
                (
                    lo + (hi - lo) * i as f64 / count as f64,
                    lo + (hi - lo) * (i + 1) as f64 / count as f64,
                )
            })
            .collect()
    };

    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        // Tensor quadrature: for each x panel node, integrate over z.
        let x_panels = axis_panels(-probe.x_halfwidth, probe.x_halfwidth);
        let z_panels = axis_panels(probe.delta, probe.z_max);
        if D == 1 {
            // Both sides on the same nodes; for an exact power tail and
            // constant Lambda the integrands coincide pointwise.
            let axis = |v: f64| -> [f64; D] {
                let mut out = [0.0f64; D];
                out[0] = v;
                out
            };
            let z_integrals = |x: f64| -> (f64, f64) {
                let mut il = 0.0;
                let mut ir = 0.0;
                for (za, zb) in &z_panels {
                    for sign in [1.0, -1.0] {
                        il += gauss_panel(
                            &mut |z: f64| {
                                let zz = sign * z;
                                b2(&[zz])
                                    * kernel.rescaled(eps, axis(zz))
                                    * coeff.eval(axis(x / eps), axis((x - zz) / eps))
                            },
                            *za,
                            *zb,
                            order,
                        );
                        ir += gauss_panel(
                            &mut |z: f64| {
                                let zz = sign * z;
                                let dir = geom::sphere_point::<f64, D>(if zz >= 0.0 {
                                    0.0
                                } else {
                                    1.0
                                });
                                b2(&[zz])
                                    * lambda_bar
                                    * kernel.tail_coefficient(dir)
                                    * z.abs().powf(-dpa)
                            },
                            *za,
                            *zb,
                            order,
                        );
                    }
                }
                (il, ir)
            };
            for (xa, xb) in &x_panels {
                lhs += gauss_panel(
                    &mut |x: f64| {
                        let w1 = b1(&[x]);
                        if w1 == 0.0 {
                            return 0.0;
                        }
                        z_integrals(x).0 * w1
                    },
                    *xa,
                    *xb,
                    16,
                );
                rhs += gauss_panel(
                    &mut |x: f64| {
                        let w1 = b1(&[x]);
                        if w1 == 0.0 {
                            return 0.0;
                        }
                        z_integrals(x).1 * w1
                    },
                    *xa,
                    *xb,
                    16,
                );
            }
        } else {
            // d = 2: tensor panels on both 2-d blocks at smoke accuracy.
            let mut lhs2 = 0.0;
            let mut rhs2 = 0.0;
            for (x1a, x1b) in &x_panels {
                for (x2a, x2b) in &x_panels {
                    let mut block = 0.0;
                    let mut block_r = 0.0;
                    let nodes = 4usize;
                    for i in 0..nodes {
                        for j in 0..nodes {
                            let x = [
                                x1a + (x1b - x1a) * (i as f64 + 0.5) / nodes as f64,
                                x2a + (x2b - x2a) * (j as f64 + 0.5) / nodes as f64,
                            ];
                            let w1 = b1(&x);
                            if w1 == 0.0 {
                                continue;
                            }
                            let cell = (x1b - x1a) * (x2b - x2a) / (nodes * nodes) as f64;
                            let (zl, zr) = probe_z_integral_2d(
                                kernel, coeff, lambda_bar, eps, &x, &b2, probe, panel_w,
                            );
                            block += w1 * zl * cell;
                            block_r += w1 * zr * cell;
                        }
                    }
                    lhs2 += block;
                    rhs2 += block_r;
                }
            }
            lhs = lhs2;
            rhs = rhs2;
        }
        let sentinel = rhs.abs() < 1e-300;
        rows.push(WeakProbeRow {
            eps,
            lhs,
            rhs,
            ratio: if sentinel { 1.0 } else { lhs / rhs },
            sentinel,
        });
    }
    Ok(rows)
}

/// Run the full eps-sweep study: validate the inputs, solve the effective
/// problem spectrally, then for each eps assemble, solve by CG, and record
/// errors and diagnostics. `config_echo` is embedded verbatim in the report.
pub fn run_study<const D: usize>(
    kernel: &JumpKernel<f64, D>,
    coeff: &PeriodicCoefficient<f64, D>,
    settings: &StudySettings,
    config_echo: serde_json::Value,
) -> Result<ConvergenceReport, StudyError> {
    let t_start = std::time::Instant::now();

    let coeff_report = validate_coefficient(coeff, 1024, settings.validation.seed);
    if !coeff_report.pass {
        return Err(StudyError::CoefficientRejected(coeff_report.symmetry.worst));
    }
    let kernel_report = if settings.skip_kernel_validation {
        None
    } else {
        let report = validate_kernel(kernel, &settings.validation);
        if !report.pass {
            let failed = report
                .failed_verdicts()
                .iter()
                .map(|v| v.name.clone())
                .collect::<Vec<_>>()
                .join(", ");
            return Err(StudyError::KernelRejected {
                failed,
                report: Box::new(report),
            });
        }
        Some(report)
    };

    let lambda_bar = mean_lambda(coeff, settings.n_quad_mean);
    let sym = init_symbol(kernel.alpha, lambda_bar, &kernel.angular, settings.n_angular)?;
    let cg = CgParams {
        tol: settings.cg_tol,
        max_iter: settings.cg_max_iter,
        precondition: settings.precondition,
    };
    let assembly: AssemblyParams = settings.assembly.into();
    let m = settings.m;

    let mut records: Vec<EpsRecord> = Vec::new();
    let mut per_record_ms = Vec::new();
    for &eps in &settings.eps_schedule {
        let t_rec = std::time::Instant::now();
        let n = settings.grid_points(eps)?;
        let grid = TorusGrid::<f64, D>::new(n, settings.side)?;
        let f = settings.rhs.build(grid);
        let u_ref = solve_effective(grid, m, &f, &sym)?;
        let stencil = assemble_stencil(grid, kernel, coeff, eps.value(), &assembly)?;
        let res = solve_epsilon(&stencil, m, &f, &cg)?;

        let mut diff = res.solution.clone();
        for (d, r) in diff.values.iter_mut().zip(u_ref.values.iter()) {
            *d -= *r;
        }
        let error = diff.norm_l2() / u_ref.norm_l2();

        let h = grid.spacing();
        let translation = if settings.diagnostics.translation {
            settings
                .translation_shifts
                .iter()
                .filter(|&&s| (s.unsigned_abs() as usize) < n)
                .map(|&s| {
                    let mut shift = [0i64; D];
                    shift[0] = s;
                    let modulus = res.solution.translation_modulus(shift);
                    let len = (s.abs() as f64) * h;
                    TranslationRow {
                        shift_cells: s,
                        shift_length: len,
                        modulus,
                        ratio_to_alpha_power: modulus / len.powf(kernel.alpha),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let mass_rows = if settings.diagnostics.mass_escape {
            settings
                .mass_escape_radii
                .iter()
                .map(|&l| {
                    mass_escape(&res.solution, l).map(|value| MassEscapeRow { radius: l, value })
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };

        let (fractional_tail, c4_chain_ratio) = if settings.diagnostics.fractional_tail {
            let cutoff = (kernel.tail_radius * eps.value()).max(2.0 * h);
            if 2.0 * cutoff <= settings.side {
                let ft = fractional_energy_tail(
                    &res.solution,
                    kernel.alpha,
                    cutoff,
                    settings.assembly.image_radius,
                )?;
                let bound = 2.0 * res.energy / (kernel.beta1 * coeff.gamma1);
                (ft, if bound > 0.0 { ft / bound } else { 0.0 })
            } else {
                (f64::NAN, f64::NAN)
            }
        } else {
            (f64::NAN, f64::NAN)
        };

        records.push(EpsRecord {
            eps: eps.to_string(),
            eps_value: eps.value(),
            n,
            error,
            iterations: res.iterations,
            converged: res.converged,
            residual: res.residual,
            c1_ratio: res.c1_ratio,
            c2_ratio: res.c2_ratio,
            energy: res.energy,
            fractional_tail,
            c4_chain_ratio,
            tail_estimate: stencil.tail_estimate,
            translation,
            mass_escape: mass_rows,
            nonmonotone: false,
        });
        per_record_ms.push(t_rec.elapsed().as_secs_f64() * 1e3);
    }

    // Soft monotonicity check: flag, never fail.
    for i in 1..records.len() {
        if records[i].converged
            && records[i - 1].converged
            && records[i].error > records[i - 1].error + 10.0 * settings.cg_tol
        {
            records[i].nonmonotone = true;
        }
    }

    let fit_points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.eps_value, r.error))
        .collect();
    let fit = fit_rate(&fit_points);
    let fit_note = match (&fit, records.len()) {
        (None, 1) => "slope unavailable: a single point cannot be fitted".to_string(),
        (None, _) => "slope unavailable: fewer than two converged records".to_string(),
        (Some(_), _) => String::new(),
    };

    let weak_probe = if settings.diagnostics.weak_probe {
        let eps_values: Vec<f64> = settings.eps_schedule.iter().map(|e| e.value()).collect();
        weak_convergence_probe(kernel, coeff, lambda_bar, &eps_values, &settings.probe)?
    } else {
        Vec::new()
    };

    let mass_escape_sup: Vec<MassEscapeSup> = settings
        .mass_escape_radii
        .iter()
        .enumerate()
        .map(|(j, &l)| MassEscapeSup {
            radius: l,
            sup_over_eps: records
                .iter()
                .filter_map(|r| r.mass_escape.get(j).map(|row| row.value))
                .fold(0.0, f64::max),
        })
        .collect();

    Ok(ConvergenceReport {
        schema: "levylab-report-v1".into(),
        config: config_echo,
        dimension: D,
        alpha: kernel.alpha,
        lambda_bar,
        c_alpha: sym.c_alpha,
        kernel_validation: kernel_report,
        coefficient_validation: coeff_report,
        records,
        fit,
        fit_note,
        weak_probe,
        mass_escape_sup,
        package_version: env!("CARGO_PKG_VERSION").into(),
        timing: Timing {
            total_ms: t_start.elapsed().as_secs_f64() * 1e3,
            per_record_ms,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn probe_z_integral_2d<const D: usize>(
    kernel: &JumpKernel<f64, D>,
    coeff: &PeriodicCoefficient<f64, D>,
    lambda_bar: f64,
    eps: f64,
    x: &[f64; 2],
    b2: &dyn Fn(&[f64]) -> f64,
    probe: &ProbeSettings,
    panel_w: f64,
) -> (f64, f64) {
    let dpa = 2.0 + kernel.alpha;
    let count = ((2.0 * probe.z_max) / panel_w).ceil().max(4.0) as usize;
    let nodes = 3usize;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let cell = (2.0 * probe.z_max / count as f64).powi(2) / (nodes * nodes) as f64;
    for p1 in 0..count {
        for p2 in 0..count {
            for i in 0..nodes {
                for j in 0..nodes {
                    let z = [
                        -probe.z_max
                            + 2.0 * probe.z_max * (p1 as f64 + (i as f64 + 0.5) / nodes as f64)
                                / count as f64,
                        -probe.z_max
                            + 2.0 * probe.z_max * (p2 as f64 + (j as f64 + 0.5) / nodes as f64)
                                / count as f64,
                    ];
                    let w2 = b2(&z);
                    if w2 == 0.0 {
                        continue;
                    }
                    let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
                    let mut zt = [0.0f64; D];
                    zt[0] = z[0];
                    zt[1 % D] = z[1];
                    let mut xt = [0.0f64; D];
                    xt[0] = x[0] / eps;
                    xt[1 % D] = x[1] / eps;
                    let mut yt = [0.0f64; D];
                    yt[0] = (x[0] - z[0]) / eps;
                    yt[1 % D] = (x[1] - z[1]) / eps;
                    lhs += w2 * kernel.rescaled(eps, zt) * coeff.eval(xt, yt) * cell;
                    let mut s = [0.0f64; D];
                    s[0] = z[0] / r;
                    s[1 % D] = z[1] / r;
                    rhs += w2 * lambda_bar * kernel.tail_coefficient(s) * r.powf(-dpa) * cell;
                }
            }
        }
    }
    (lhs, rhs)
}
