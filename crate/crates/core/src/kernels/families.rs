//! Builtin kernel families with documented analytic properties.
//!
//! All families are constant on a plateau |z| < r0 (continuously matched to
//! the tail) and carry exact normalization constants, so `total_mass` is a
//! cross-check rather than part of the construction.

use super::{AngularDensity, JumpKernel, KernelError, KernelMode};
use crate::quadrature::{integrate_radial_tail, sin_power_tail, TailParams};
use crate::scalar::{real, Real};
use std::f64::consts::{E, PI};
use std::sync::Arc;

/// Radius up to which the plain-mode log-perturbed family declares its tail
/// envelope; beyond it the logarithm outgrows any constant bound.
pub const PLAIN_LOG_ENVELOPE_RADIUS: f64 = 1e4;

/// Declarative description of a builtin family.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinKernel {
    /// c |z|^{-d-alpha} outside r0, constant plateau inside. Satisfies every
    /// tail hypothesis with beta1 = beta2 = k = c.
    Pareto { r0: f64 },
    /// c k0(z/|z|) |z|^{-d-alpha} outside r0 with k0 = 1 + a cos(2 theta).
    /// d = 2 only.
    AnisotropicPareto { r0: f64, anisotropy: f64 },
    /// Tail L(|z|) |z|^{-d-alpha} with L(r) = log(e + r). Slowly varying mode
    /// by default; `plain_mode` validates it against the unmodified
    /// hypotheses instead (where the tail-mass asymptotics fail).
    LogPerturbed { r0: f64, plain_mode: bool },
    /// Tail (2 + sin |z|) |z|^{-d-alpha}: keeps the envelope and tail-mass
    /// asymptotics (k = 2c) but its relative local oscillation never decays.
    OscillationViolator { r0: f64 },
}

impl BuiltinKernel {
    pub fn family_name(&self) -> &'static str {
        match self {
            BuiltinKernel::Pareto { .. } => "pareto",
            BuiltinKernel::AnisotropicPareto { .. } => "anisotropic-pareto",
            BuiltinKernel::LogPerturbed { .. } => "log-perturbed",
            BuiltinKernel::OscillationViolator { .. } => "oscillation-violator",
        }
    }
}

/// Surface measure of S^{d-1} (counting measure for d = 1).
fn sphere_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => unreachable!("only d in {{1, 2}} is supported"),
    }
}

/// Mass of a unit-coefficient radial profile rho(r) r^{d-1} integrated over
/// R^d: plateau rho(r0) on [0, r0], tail integral given by the caller.
fn radial_mass(d: usize, r0: f64, plateau: f64, tail_integral: f64) -> f64 {
    let inner = plateau * r0.powi(d as i32) / d as f64;
    sphere_measure(d) * (inner + tail_integral)
}

fn check_common(d: usize, alpha: f64, r0: f64) -> Result<(), KernelError> {
    if !(d == 1 || d == 2) {
        return Err(KernelError::InvalidParam {
            name: "d",
            reason: format!("dimension must be 1 or 2, got {d}"),
        });
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(KernelError::InvalidParam {
            name: "alpha",
            reason: format!("stability index must lie in (0, 2), got {alpha}"),
        });
    }
    if !(r0 > 0.0) {
        return Err(KernelError::InvalidParam {
            name: "r0",
            reason: format!("inner radius must be positive, got {r0}"),
        });
    }
    Ok(())
}

/// Build a builtin kernel; `irregular_core` adds bounded even multiplicative
/// noise on the plateau (followed by renormalization by quadrature).
pub fn make_builtin<T: Real, const D: usize>(
    family: &BuiltinKernel,
    alpha: f64,
    irregular_core: Option<f64>,
) -> Result<JumpKernel<T, D>, KernelError> {
    let kernel = match *family {
        BuiltinKernel::Pareto { r0 } => pareto::<T, D>(alpha, r0)?,
        BuiltinKernel::AnisotropicPareto { r0, anisotropy } => {
            if D != 2 {
                return Err(KernelError::DimensionMismatch {
                    family: "anisotropic-pareto",
                    expected: 2,
                    got: D,
                });
            }
            anisotropic_pareto::<T, D>(alpha, r0, anisotropy)?
        }
        BuiltinKernel::LogPerturbed { r0, plain_mode } => log_perturbed::<T, D>(alpha, r0, plain_mode)?,
        BuiltinKernel::OscillationViolator { r0 } => oscillation_violator::<T, D>(alpha, r0)?,
    };
    match irregular_core {
        Some(a) if a != 0.0 => with_irregular_core(kernel, a),
        _ => Ok(kernel),
    }
}

/// Isotropic pure power tail with plateau: p = c r0^{-d-alpha} inside r0,
/// c |z|^{-d-alpha} outside; c makes the total mass exactly 1.
pub fn pareto<T: Real, const D: usize>(alpha: f64, r0: f64) -> Result<JumpKernel<T, D>, KernelError> {
    check_common(D, alpha, r0)?;
    // Unit-coefficient mass: |S^{d-1}| (r0^{-alpha}/d + r0^{-alpha}/alpha).
    let tail_integral = r0.powf(-alpha) / alpha;
    let mass_unit = radial_mass(D, r0, r0.powf(-(D as f64) - alpha), tail_integral);
    let c = 1.0 / mass_unit;
    let (ct, r0t, dpa) = (real::<T>(c), real::<T>(r0), real::<T>(D as f64 + alpha));
    let plateau = ct * r0t.powf(-dpa);
    let eval = Arc::new(move |z: [T; D]| {
        let r = crate::geom::norm(z);
        if r < r0t {
            plateau
        } else {
            ct * r.powf(-dpa)
        }
    });
    Ok(JumpKernel {
        eval,
        alpha: real(alpha),
        beta1: ct,
        beta2: ct,
        tail_radius: real(r0.max(1.0)),
        angular: AngularDensity::constant(ct),
        mode: KernelMode::Plain,
        normalized: true,
        radial_hints: vec![real(r0)],
        name: "pareto".into(),
    })
}

/// Anisotropic power tail (d = 2): p = c (1 + a cos 2 theta) |z|^{-2-alpha}
/// outside r0, angular-modulated plateau inside. The cos 2 theta modulation
/// has zero angular mean, so c is the same as for the isotropic family.
pub fn anisotropic_pareto<T: Real, const D: usize>(
    alpha: f64,
    r0: f64,
    anisotropy: f64,
) -> Result<JumpKernel<T, D>, KernelError> {
    check_common(D, alpha, r0)?;
    if !(anisotropy.abs() < 1.0) {
        return Err(KernelError::InvalidParam {
            name: "anisotropy",
            reason: format!("|a| must be < 1 to keep k positive, got {anisotropy}"),
        });
    }
    let tail_integral = r0.powf(-alpha) / alpha;
    let mass_unit = radial_mass(D, r0, r0.powf(-(D as f64) - alpha), tail_integral);
    let c = 1.0 / mass_unit;
    let (ct, at, r0t, dpa) = (
        real::<T>(c),
        real::<T>(anisotropy),
        real::<T>(r0),
        real::<T>(D as f64 + alpha),
    );
    // cos 2 theta = sx^2 - sy^2 on the unit circle.
    let modulation = move |s: [T; D]| T::one() + at * (s[0] * s[0] - s[1 % D] * s[1 % D]);
    let eval = Arc::new(move |z: [T; D]| {
        let r = crate::geom::norm(z);
        if r == T::zero() {
            return ct * r0t.powf(-dpa);
        }
        let s = crate::geom::scale(z, T::one() / r);
        let ang = modulation(s);
        if r < r0t {
            ct * ang * r0t.powf(-dpa)
        } else {
            ct * ang * r.powf(-dpa)
        }
    });
    let kang = Arc::new(move |s: [T; D]| ct * (T::one() + at * (s[0] * s[0] - s[1 % D] * s[1 % D])));
    Ok(JumpKernel {
        eval,
        alpha: real(alpha),
        beta1: ct * (T::one() - at.abs()),
        beta2: ct * (T::one() + at.abs()),
        tail_radius: real(r0.max(1.0)),
        angular: AngularDensity::new(kang, ct * (T::one() - at.abs()), ct * (T::one() + at.abs())),
        mode: KernelMode::Plain,
        normalized: true,
        radial_hints: vec![real(r0)],
        name: "anisotropic-pareto".into(),
    })
}

/// Slowly varying tail L(r) = log(e + r). The mass uses the by-parts identity
/// int_{r0}^inf L r^{-1-a} dr = L(r0) r0^{-a}/a + (1/a) int_{r0}^inf r^{-a}/(e+r) dr,
/// with the second integral by tail quadrature.
pub fn log_perturbed<T: Real, const D: usize>(
    alpha: f64,
    r0: f64,
    plain_mode: bool,
) -> Result<JumpKernel<T, D>, KernelError> {
    check_common(D, alpha, r0)?;
    let boundary = (E + r0).ln() * r0.powf(-alpha) / alpha;
    let correction = integrate_radial_tail(
        |r: f64| r.powf(-alpha) / (E + r),
        r0,
        &TailParams::new(alpha, 1e-13),
    );
    let tail_integral = boundary + correction.value / alpha;
    let plateau_unit = (E + r0).ln() * r0.powf(-(D as f64) - alpha);
    let mass_unit = radial_mass(D, r0, plateau_unit, tail_integral);
    let c = 1.0 / mass_unit;

    let (ct, r0t, dpa) = (real::<T>(c), real::<T>(r0), real::<T>(D as f64 + alpha));
    let et = real::<T>(E);
    let plateau = ct * (et + r0t).ln() * r0t.powf(-dpa);
    let eval = Arc::new(move |z: [T; D]| {
        let r = crate::geom::norm(z);
        if r < r0t {
            plateau
        } else {
            ct * (et + r).ln() * r.powf(-dpa)
        }
    });
    let m = r0.max(1.0);
    let (mode, beta1, beta2, name) = if plain_mode {
        // Without the slowly varying factor the envelope only holds on the
        // documented sampling range [M, PLAIN_LOG_ENVELOPE_RADIUS].
        (
            KernelMode::Plain,
            real::<T>(c * (E + m).ln()),
            real::<T>(c * (E + PLAIN_LOG_ENVELOPE_RADIUS).ln() * (1.0 + 1e-6)),
            "log-perturbed (plain validation)".to_string(),
        )
    } else {
        (
            KernelMode::SlowlyVarying {
                factor: Arc::new(move |r: T| (et + r).ln()),
            },
            ct,
            ct,
            "log-perturbed".to_string(),
        )
    };
    Ok(JumpKernel {
        eval,
        alpha: real(alpha),
        beta1,
        beta2,
        tail_radius: real(m),
        angular: AngularDensity::constant(ct),
        mode,
        normalized: true,
        radial_hints: vec![real(r0)],
        name,
    })
}

/// Tail (2 + sin r) r^{-d-alpha}: the fixed-amplitude relative oscillation
/// never decays, while the tail mass still satisfies the asymptotics with
/// k = 2c. The oscillatory part of the mass comes from the contour integral
/// int_{r0}^inf sin(r) r^{-1-alpha} dr.
pub fn oscillation_violator<T: Real, const D: usize>(
    alpha: f64,
    r0: f64,
) -> Result<JumpKernel<T, D>, KernelError> {
    check_common(D, alpha, r0)?;
    let s_osc = sin_power_tail(r0, 1.0 + alpha);
    let tail_integral = 2.0 * r0.powf(-alpha) / alpha + s_osc;
    let plateau_unit = (2.0 + r0.sin()) * r0.powf(-(D as f64) - alpha);
    let mass_unit = radial_mass(D, r0, plateau_unit, tail_integral);
    let c = 1.0 / mass_unit;

    let (ct, r0t, dpa) = (real::<T>(c), real::<T>(r0), real::<T>(D as f64 + alpha));
    let two = real::<T>(2.0);
    let plateau = ct * (two + r0t.sin()) * r0t.powf(-dpa);
    let eval = Arc::new(move |z: [T; D]| {
        let r = crate::geom::norm(z);
        if r < r0t {
            plateau
        } else {
            ct * (two + r.sin()) * r.powf(-dpa)
        }
    });
    Ok(JumpKernel {
        eval,
        alpha: real(alpha),
        beta1: ct,
        beta2: ct * real(3.0),
        tail_radius: real(r0.max(1.0)),
        angular: AngularDensity::constant(ct * two),
        mode: KernelMode::Plain,
        normalized: true,
        radial_hints: vec![real(r0)],
        name: "oscillation-violator".into(),
    })
}

/// Stress-test decorator: bounded even multiplicative noise on the plateau
/// region, then renormalization by quadrature.
pub fn with_irregular_core<T: Real, const D: usize>(
    kernel: JumpKernel<T, D>,
    amplitude: f64,
) -> Result<JumpKernel<T, D>, KernelError> {
    if !(amplitude.abs() < 1.0) {
        return Err(KernelError::InvalidParam {
            name: "irregular_core",
            reason: format!("noise amplitude must satisfy |a| < 1, got {amplitude}"),
        });
    }
    let r0 = kernel
        .radial_hints
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let inner = kernel.density_fn();
    let amp = real::<T>(amplitude);
    let c43 = real::<T>(43.0);
    let c17 = real::<T>(17.0);
    let three = real::<T>(3.0);
    let eval = Arc::new(move |z: [T; D]| {
        let r = crate::geom::norm(z);
        let base = inner(z);
        if r < r0 {
            // Even in z (depends on |z|^2 only), bounded by 1 +/- |amp|.
            let u = (r / r0) * (r / r0);
            base * (T::one() + amp * (c43 * u + three * (c17 * u).sin()).sin())
        } else {
            base
        }
    });
    let rough = JumpKernel {
        eval,
        normalized: false,
        name: format!("{} + irregular core", kernel.name),
        ..kernel
    };
    super::normalize(&rough)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Sector;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_kernels_are_even_by_construction() {
        let kernels: Vec<JumpKernel<f64, 1>> = vec![
            pareto(0.7, 0.5).unwrap(),
            log_perturbed(1.3, 1.0, false).unwrap(),
            oscillation_violator(0.5, 1.0).unwrap(),
        ];
        for k in &kernels {
            for z in [0.1_f64, 0.9, 3.7, 120.0] {
                assert_eq!(k.density([z]), k.density([-z]), "kernel {}", k.name);
            }
        }
        let k2: JumpKernel<f64, 2> = anisotropic_pareto(1.0, 1.0, 0.4).unwrap();
        for z in [[0.3, -0.2], [2.0, 1.0], [-5.0, 0.1]] {
            assert_eq!(k2.density(z), k2.density([-z[0], -z[1]]));
        }
    }

    #[test]
    fn violator_mass_is_one_by_independent_quadrature() {
        // The construction uses the contour integral; check against direct
        // oscillation-resolving summation at moderate accuracy.
        let k: JumpKernel<f64, 1> = oscillation_violator(0.5, 1.0).unwrap();
        let q = k.total_mass(1e-7);
        assert_relative_eq!(q.value, 1.0, epsilon = 2e-6);
    }

    #[test]
    fn violator_envelope_within_declared_bounds() {
        let k: JumpKernel<f64, 1> = oscillation_violator(0.5, 1.0).unwrap();
        for r in [1.0_f64, 3.3, 10.0, 271.8, 9000.0] {
            let v = k.density([r]) * r.powf(1.5);
            assert!(v >= k.beta1 * (1.0 - 1e-12) && v <= k.beta2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn violator_tail_mass_meets_asymptotics_with_doubled_k() {
        let k: JumpKernel<f64, 1> = oscillation_violator(0.5, 1.0).unwrap();
        let tm = k.tail_mass(1e4, &Sector::full(1), 1e-5).unwrap();
        assert_relative_eq!(tm.ratio(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn log_kernel_mass_and_tail_targets() {
        let k: JumpKernel<f64, 1> = log_perturbed(1.5, 1.0, false).unwrap();
        let q = k.total_mass(1e-11);
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-9);
        // Slowly varying target: ratio -> 1 like 1/(alpha log n).
        let tm = k.tail_mass(1e4, &Sector::full(1), 1e-7).unwrap();
        assert!((tm.ratio() - 1.0).abs() < 0.1, "ratio {}", tm.ratio());
        // Plain target drifts like log n.
        let kp: JumpKernel<f64, 1> = log_perturbed(1.5, 1.0, true).unwrap();
        let tmp = kp.tail_mass(1e4, &Sector::full(1), 1e-7).unwrap();
        assert!(tmp.ratio() > 5.0, "plain ratio {}", tmp.ratio());
    }

    #[test]
    fn anisotropic_sector_masses_follow_the_angular_density() {
        let k: JumpKernel<f64, 2> = anisotropic_pareto(1.0, 1.0, 0.5).unwrap();
        let q = k.total_mass(1e-9);
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-7);
        // Quarter arc around theta = 0 carries more mass than around pi/2.
        let hot = k
            .tail_mass(
                10.0,
                &Sector::Arc {
                    from: -0.4,
                    to: 0.4,
                },
                1e-8,
            )
            .unwrap();
        let cold = k
            .tail_mass(
                10.0,
                &Sector::Arc {
                    from: std::f64::consts::FRAC_PI_2 - 0.4,
                    to: std::f64::consts::FRAC_PI_2 + 0.4,
                },
                1e-8,
            )
            .unwrap();
        assert!(hot.mass > cold.mass * 1.5);
        assert_relative_eq!(hot.ratio(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(cold.ratio(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn violator_oscillation_never_decays() {
        let k: JumpKernel<f64, 1> = oscillation_violator(0.5, 1.0).unwrap();
        let budget = crate::kernels::OscillationBudget::default();
        let profile = k
            .phi_profile(2.0, &[10.0, 100.0, 1000.0, 9000.0], &budget)
            .unwrap();
        for phi in profile {
            assert!(phi >= 0.3, "phi = {phi}");
        }
    }

    #[test]
    fn irregular_core_keeps_mass_and_evenness() {
        let base: JumpKernel<f64, 1> = pareto(0.8, 0.5).unwrap();
        let rough = with_irregular_core(base, 0.5).unwrap();
        let q = rough.total_mass(1e-10);
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-8);
        for z in [0.05_f64, 0.2, 0.45] {
            assert_eq!(rough.density([z]), rough.density([-z]));
        }
    }

    #[test]
    fn family_errors_are_reported() {
        assert!(pareto::<f64, 1>(2.5, 1.0).is_err());
        assert!(pareto::<f64, 1>(1.0, -1.0).is_err());
        assert!(anisotropic_pareto::<f64, 2>(1.0, 1.0, 1.5).is_err());
        let err = make_builtin::<f64, 1>(
            &BuiltinKernel::AnisotropicPareto {
                r0: 1.0,
                anisotropy: 0.3,
            },
            1.0,
            None,
        );
        assert!(matches!(err, Err(KernelError::DimensionMismatch { .. })));
    }
}
