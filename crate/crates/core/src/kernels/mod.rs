//! Heavy-tailed jump densities and the hypotheses they must satisfy.
//!
//! A [`JumpKernel`] is a symmetric probability density p on R^d whose tail is
//! comparable to k(z/|z|) |z|^{-d-alpha} (optionally times a slowly varying
//! factor). This module holds the kernel type, its angular density, tail-mass
//! and local-oscillation measurements, and normalization. Builtin families
//! live in [`families`]; the hypothesis validator lives in [`validate`].

use crate::geom;
use crate::quadrature::{self, integrate, integrate_radial_tail, QuadResult, TailParams};
use crate::scalar::{real, to_f64, Real};
use std::sync::Arc;
use thiserror::Error;

pub mod families;
pub mod validate;

pub use families::{make_builtin, BuiltinKernel};
pub use validate::{validate_kernel, KernelComplianceReport, ValidationBudget, Verdict};

pub type PointFn<T, const D: usize> = Arc<dyn Fn([T; D]) -> T + Send + Sync>;
pub type RadialFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("unknown kernel family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` requires dimension {expected}, got {got}")]
    DimensionMismatch {
        family: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("quadrature reached relative error {achieved:.3e}, wanted {wanted:.3e}")]
    QuadratureTolerance { achieved: f64, wanted: f64 },
    #[error("density vanished at a sampled point with |z| = {radius:.6e}; relative oscillation is undefined there")]
    ZeroDensity { radius: f64 },
    #[error("sector is incompatible with dimension {dim}")]
    SectorDimension { dim: usize },
}

/// Tail scaling mode: plain `|z|^{-d-alpha}` or with a slowly varying factor.
#[derive(Clone)]
pub enum KernelMode<T: Real> {
    Plain,
    SlowlyVarying { factor: RadialFn<T> },
}

impl<T: Real> KernelMode<T> {
    /// The slowly varying factor L(r); identically 1 in plain mode.
    pub fn factor_at(&self, r: T) -> T {
        match self {
            KernelMode::Plain => T::one(),
            KernelMode::SlowlyVarying { factor } => factor(r),
        }
    }

    pub fn is_slowly_varying(&self) -> bool {
        matches!(self, KernelMode::SlowlyVarying { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            KernelMode::Plain => "plain",
            KernelMode::SlowlyVarying { .. } => "slowly-varying",
        }
    }
}

/// Directional weight k on the unit sphere S^{d-1}.
///
/// For d = 1 the sphere is the two-point set {-1, +1} with counting measure.
#[derive(Clone)]
pub struct AngularDensity<T: Real, const D: usize> {
    eval: PointFn<T, D>,
    pub beta1: T,
    pub beta2: T,
}

impl<T: Real, const D: usize> AngularDensity<T, D> {
    pub fn new(eval: PointFn<T, D>, beta1: T, beta2: T) -> Self {
        Self { eval, beta1, beta2 }
    }

    pub fn constant(value: T) -> Self {
        Self {
            eval: Arc::new(move |_| value),
            beta1: value,
            beta2: value,
        }
    }

    pub fn eval(&self, s: [T; D]) -> T {
        (self.eval)(s)
    }

    /// k scaled by a positive factor (used when the kernel is renormalized).
    pub fn scaled(&self, factor: T) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |s| inner(s) * factor),
            beta1: self.beta1 * factor,
            beta2: self.beta2 * factor,
        }
    }

    /// Integral of k over a sector of the sphere.
    pub fn sector_integral(&self, sector: &Sector) -> Result<T, KernelError> {
        match sector {
            Sector::Points { plus, minus } => {
                if D != 1 {
                    return Err(KernelError::SectorDimension { dim: D });
                }
                let mut s = T::zero();
                if *plus {
                    s = s + self.eval(geom::sphere_point(0.0));
                }
                if *minus {
                    s = s + self.eval(geom::sphere_point(1.0));
                }
                Ok(s)
            }
            Sector::Arc { from, to } => {
                if D != 2 {
                    return Err(KernelError::SectorDimension { dim: D });
                }
                let q = integrate(
                    |t: T| self.eval(geom::sphere_point(to_f64(t))),
                    real(*from),
                    real(*to),
                    1e-12,
                    &[],
                );
                Ok(q.value)
            }
        }
    }
}

/// An angular sector of S^{d-1} with boundary of measure zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Sector {
    /// d = 1: which of the two directions are included.
    Points { plus: bool, minus: bool },
    /// d = 2: the arc [from, to] in radians, to - from <= 2 pi.
    Arc { from: f64, to: f64 },
}

impl Sector {
    pub fn full(d: usize) -> Self {
        match d {
            1 => Sector::Points {
                plus: true,
                minus: true,
            },
            _ => Sector::Arc {
                from: 0.0,
                to: std::f64::consts::TAU,
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Sector::Points { plus, minus } => match (plus, minus) {
                (true, true) => "{+1,-1}".into(),
                (true, false) => "{+1}".into(),
                (false, true) => "{-1}".into(),
                (false, false) => "{}".into(),
            },
            Sector::Arc { from, to } => format!("arc[{from:.4},{to:.4}]"),
        }
    }
}

/// A heavy-tailed jump density with its tail metadata.
#[derive(Clone)]
pub struct JumpKernel<T: Real, const D: usize> {
    eval: PointFn<T, D>,
    pub alpha: T,
    pub beta1: T,
    pub beta2: T,
    /// Radius M >= 1 beyond which the tail envelope holds.
    pub tail_radius: T,
    pub angular: AngularDensity<T, D>,
    pub mode: KernelMode<T>,
    pub normalized: bool,
    /// Radial breakpoints (e.g. plateau edges) that quadrature should split at.
    pub radial_hints: Vec<T>,
    pub name: String,
}

impl<T: Real, const D: usize> JumpKernel<T, D> {
    pub fn dimension(&self) -> usize {
        D
    }

    /// The density p(z).
    pub fn density(&self, z: [T; D]) -> T {
        (self.eval)(z)
    }

    pub fn density_fn(&self) -> PointFn<T, D> {
        self.eval.clone()
    }

    /// Radial evaluation along a unit direction.
    pub fn density_radial(&self, r: T, dir: [T; D]) -> T {
        self.density(geom::scale(dir, r))
    }

    /// The rescaled density eps^{-d-alpha} p(z/eps), divided by L(1/eps) in
    /// slowly varying mode.
    pub fn rescaled(&self, eps: T, z: [T; D]) -> T {
        debug_assert!(eps > T::zero() && eps <= T::one());
        let dpa = real::<T>(D as f64) + self.alpha;
        let scale = eps.powf(-dpa);
        let val = scale * self.density(geom::scale(z, T::one() / eps));
        match &self.mode {
            KernelMode::Plain => val,
            KernelMode::SlowlyVarying { factor } => val / factor(T::one() / eps),
        }
    }

    /// Asymptotic tail coefficient in direction `dir`: the factor multiplying
    /// |z|^{-d-alpha} (times L in slowly varying mode). This is the angular
    /// density k.
    pub fn tail_coefficient(&self, dir: [T; D]) -> T {
        self.angular.eval(dir)
    }

    /// Largest radius below which the density may be irregular.
    pub fn core_radius(&self) -> T {
        let mut r = self.tail_radius;
        for h in &self.radial_hints {
            r = r.max(*h);
        }
        r
    }

    /// Total mass by radial(-angular) quadrature with tail extrapolation.
    pub fn total_mass(&self, rel_tol: f64) -> QuadResult<T> {
        let r_in = self.core_radius().max(T::one());
        let alpha_f = to_f64(self.alpha);
        let tail_params = TailParams::new(alpha_f, rel_tol * 0.5);
        if D == 1 {
            let inner = integrate(
                |r: T| self.density_radial(r, geom::sphere_point(0.0)),
                T::zero(),
                r_in,
                rel_tol * 0.3,
                &self.radial_hints,
            );
            let tail = integrate_radial_tail(
                |r: T| self.density_radial(r, geom::sphere_point(0.0)),
                r_in,
                &tail_params,
            );
            QuadResult {
                value: (inner.value + tail.value) * real(2.0),
                abs_err: (inner.abs_err + tail.abs_err) * real(2.0),
            }
        } else {
            let shell = |r: T| self.angular_mean(r) * r * real::<T>(std::f64::consts::TAU);
            let inner = integrate(shell, T::zero(), r_in, rel_tol * 0.3, &self.radial_hints);
            let tail = integrate_radial_tail(shell, r_in, &tail_params);
            QuadResult {
                value: inner.value + tail.value,
                abs_err: inner.abs_err + tail.abs_err,
            }
        }
    }

    /// Mean of p over the sphere of radius r (periodic trapezoid; spectrally
    /// accurate for the smooth angular profiles used here).
    fn angular_mean(&self, r: T) -> T {
        const N_ANG: usize = 64;
        let mut acc = T::zero();
        for j in 0..N_ANG {
            let theta = std::f64::consts::TAU * (j as f64 + 0.5) / N_ANG as f64;
            acc = acc + self.density_radial(r, geom::sphere_point(theta));
        }
        acc / real(N_ANG as f64)
    }

    /// Mass of the tail {|z| > n, z/|z| in sector} together with the limit
    /// target (1/(alpha n^alpha)) int_sector k (times L(n) in slowly varying
    /// mode).
    pub fn tail_mass(&self, n: T, sector: &Sector, rel_tol: f64) -> Result<TailMass<T>, KernelError> {
        if n < self.tail_radius {
            return Err(KernelError::InvalidParam {
                name: "n",
                reason: format!(
                    "tail radius n = {} must be >= M = {}",
                    to_f64(n),
                    to_f64(self.tail_radius)
                ),
            });
        }
        let alpha_f = to_f64(self.alpha);
        let params = TailParams::new(alpha_f, rel_tol);
        let (mass, abs_err) = match sector {
            Sector::Points { plus, minus } => {
                if D != 1 {
                    return Err(KernelError::SectorDimension { dim: D });
                }
                let mut mass = T::zero();
                let mut err = T::zero();
                if *plus {
                    let q = integrate_radial_tail(
                        |r: T| self.density_radial(r, geom::sphere_point(0.0)),
                        n,
                        &params,
                    );
                    mass = mass + q.value;
                    err = err + q.abs_err;
                }
                if *minus {
                    let q = integrate_radial_tail(
                        |r: T| self.density_radial(r, geom::sphere_point(1.0)),
                        n,
                        &params,
                    );
                    mass = mass + q.value;
                    err = err + q.abs_err;
                }
                (mass, err)
            }
            Sector::Arc { from, to } => {
                if D != 2 {
                    return Err(KernelError::SectorDimension { dim: D });
                }
                // Fixed Gauss panels over the arc (smooth in theta), embedded
                // coarse pass for the angular error estimate.
                let radial = |theta: f64, tol: f64| -> QuadResult<T> {
                    let dir = geom::sphere_point::<T, D>(theta);
                    integrate_radial_tail(
                        |r: T| self.density_radial(r, dir) * r,
                        n,
                        &TailParams::new(alpha_f, tol),
                    )
                };
                let arc_quad = |panels: usize, tol: f64| -> (T, T) {
                    let mut total = T::zero();
                    let mut err = T::zero();
                    for p in 0..panels {
                        let a = from + (to - from) * p as f64 / panels as f64;
                        let b = from + (to - from) * (p + 1) as f64 / panels as f64;
                        let q = crate::quadrature::gauss_panel(
                            &mut |t: T| {
                                let q = radial(to_f64(t), tol);
                                q.value
                            },
                            real(a),
                            real(b),
                            16,
                        );
                        total = total + q;
                        let _ = &mut err;
                    }
                    (total, err)
                };
                let (fine, _) = arc_quad(8, rel_tol * 0.2);
                let (coarse, _) = arc_quad(4, rel_tol * 0.2);
                (fine, (fine - coarse).abs() + fine.abs() * real(rel_tol * 0.4))
            }
        };
        let k_int = self.angular.sector_integral(sector)?;
        let target =
            k_int / (self.alpha * n.powf(self.alpha)) * self.mode.factor_at(n);
        Ok(TailMass {
            mass,
            target,
            abs_err,
        })
    }

    /// Sampled oscillation functional phi_K(r): the maximum of
    /// |p(z + gamma) - p(z)| / p(z) over |gamma| <= K and lattice radii
    /// |z| in [r, budget.r_max].
    pub fn oscillation_phi(
        &self,
        shift_radius: T,
        r: T,
        budget: &OscillationBudget,
    ) -> Result<T, KernelError> {
        Ok(self.phi_profile(shift_radius, &[r], budget)?[0])
    }

    /// phi_K at several radii from one shared sample sweep. The radius lattice
    /// is anchored at `budget.r_max`, so values are nonincreasing in r by
    /// construction; the gamma lattice is absolute, so enlarging K only adds
    /// samples.
    pub fn phi_profile(
        &self,
        shift_radius: T,
        radii: &[T],
        budget: &OscillationBudget,
    ) -> Result<Vec<T>, KernelError> {
        let k_shift = to_f64(shift_radius);
        assert!(k_shift > 0.0, "shift radius K must be positive");
        let r_min = radii
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| a.min(b));
        assert!(r_min > T::zero(), "inner radius r must be positive");
        let r_max = budget.r_max.max(to_f64(r_min) * 2.0);

        // Anchored radius lattice: r_max * g^{-i}.
        let g = 2.0_f64.powf(1.0 / budget.radius_refinement as f64);
        let mut lattice_radii = Vec::new();
        let mut rho = r_max;
        let r_min_f = to_f64(r_min);
        while rho >= r_min_f * (1.0 - 1e-12) {
            lattice_radii.push(rho);
            rho /= g;
        }

        // Absolute gamma magnitude lattice.
        let mut gamma_mags = Vec::new();
        let mut m = budget.gamma_step;
        while m <= k_shift * (1.0 + 1e-12) {
            gamma_mags.push(m.min(k_shift));
            m += budget.gamma_step;
        }
        if gamma_mags.is_empty() {
            gamma_mags.push(k_shift);
        }

        // Sample positions: (radius, z-angle) pairs; lattice plus Kronecker
        // refinement quantized back onto the radius lattice.
        let z_angles: Vec<f64> = if D == 1 {
            vec![0.0]
        } else {
            (0..budget.z_directions)
                .map(|l| std::f64::consts::PI * l as f64 / budget.z_directions as f64)
                .collect()
        };
        let mut positions: Vec<(f64, f64)> = Vec::new();
        for &rad in &lattice_radii {
            for &ang in &z_angles {
                positions.push((rad, ang));
            }
        }
        for k in 0..budget.refine as u64 {
            let (u, v) = quadrature::kronecker2(k, budget.seed);
            let idx = (u * lattice_radii.len() as f64) as usize;
            let rad = lattice_radii[idx.min(lattice_radii.len() - 1)];
            let ang = if D == 1 { 0.0 } else { std::f64::consts::PI * v };
            positions.push((rad, ang));
        }

        // Gamma directions relative to the z direction.
        let gamma_dirs: Vec<f64> = if D == 1 {
            vec![std::f64::consts::PI, 0.0] // antiparallel first: the worst case
        } else {
            (0..8)
                .map(|l| std::f64::consts::PI * (1.0 + l as f64 / 4.0))
                .collect()
        };

        let mut samples: Vec<(f64, T)> = Vec::with_capacity(positions.len());
        for &(rad, ang) in &positions {
            let zdir = if D == 1 {
                geom::sphere_point::<T, D>(0.0)
            } else {
                geom::sphere_point::<T, D>(ang)
            };
            let z = geom::scale(zdir, real(rad));
            let pz = self.density(z);
            if !(pz > T::zero()) {
                return Err(KernelError::ZeroDensity { radius: rad });
            }
            let mut worst = T::zero();
            for &mag in &gamma_mags {
                for &gd in &gamma_dirs {
                    let gdir = if D == 1 {
                        geom::sphere_point::<T, D>(if gd > 1.0 { 1.0 } else { 0.0 })
                    } else {
                        geom::sphere_point::<T, D>(ang + gd)
                    };
                    let zg = geom::add(z, geom::scale(gdir, real(mag)));
                    let val = ((self.density(zg) - pz) / pz).abs();
                    worst = worst.max(val);
                }
            }
            samples.push((rad, worst));
        }

        // Suffix maxima over the shared sample set.
        samples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut order: Vec<usize> = (0..radii.len()).collect();
        order.sort_by(|&i, &j| to_f64(radii[j]).partial_cmp(&to_f64(radii[i])).unwrap());
        let mut out = vec![T::zero(); radii.len()];
        let mut running = T::zero();
        let mut cursor = 0usize;
        for &ri in &order {
            let limit = to_f64(radii[ri]) * (1.0 - 1e-12);
            while cursor < samples.len() && samples[cursor].0 >= limit {
                running = running.max(samples[cursor].1);
                cursor += 1;
            }
            out[ri] = running;
        }
        Ok(out)
    }
}

/// Result of a tail-mass evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TailMass<T> {
    pub mass: T,
    /// The asymptotic prediction the mass is compared against.
    pub target: T,
    pub abs_err: T,
}

impl<T: Real> TailMass<T> {
    pub fn ratio(&self) -> T {
        self.mass / self.target
    }
}

/// Sampling controls for the oscillation functional.
#[derive(Debug, Clone)]
pub struct OscillationBudget {
    pub r_max: f64,
    /// Radius lattice points per octave.
    pub radius_refinement: usize,
    /// z directions on the half-sphere (d = 2).
    pub z_directions: usize,
    /// Absolute step of the gamma magnitude lattice.
    pub gamma_step: f64,
    /// Extra Kronecker-sequence sample positions.
    pub refine: usize,
    pub seed: u64,
}

impl Default for OscillationBudget {
    fn default() -> Self {
        Self {
            r_max: 1e4,
            radius_refinement: 16,
            z_directions: 16,
            gamma_step: 0.25,
            refine: 256,
            seed: 0,
        }
    }
}

/// The default shift radius K = 2 sqrt(d).
pub fn default_shift_radius<T: Real>(d: usize) -> T {
    real(2.0 * (d as f64).sqrt())
}

/// Renormalize a kernel to unit mass with default per-dimension tolerances
/// (1e-10 for d = 1, 1e-7 for d = 2).
pub fn normalize<T: Real, const D: usize>(
    kernel: &JumpKernel<T, D>,
) -> Result<JumpKernel<T, D>, KernelError> {
    let tol = if D == 1 { 1e-10 } else { 1e-7 };
    normalize_with(kernel, tol)
}

/// Renormalize a kernel to unit mass, requiring the mass quadrature to reach
/// `rel_tol` relative accuracy.
pub fn normalize_with<T: Real, const D: usize>(
    kernel: &JumpKernel<T, D>,
    rel_tol: f64,
) -> Result<JumpKernel<T, D>, KernelError> {
    let q = kernel.total_mass(rel_tol * 0.5);
    let achieved = to_f64(q.rel_err());
    if achieved > rel_tol {
        return Err(KernelError::QuadratureTolerance {
            achieved,
            wanted: rel_tol,
        });
    }
    let mass = q.value;
    let inv = T::one() / mass;
    let inner = kernel.eval.clone();
    Ok(JumpKernel {
        eval: Arc::new(move |z| inner(z) * inv),
        alpha: kernel.alpha,
        beta1: kernel.beta1 * inv,
        beta2: kernel.beta2 * inv,
        tail_radius: kernel.tail_radius,
        angular: kernel.angular.scaled(inv),
        mode: kernel.mode.clone(),
        normalized: true,
        radial_hints: kernel.radial_hints.clone(),
        name: kernel.name.clone(),
    })
}
