//! The periodic symmetric coefficient Lambda(x, y) and its effective mean.

use crate::scalar::{real, to_f64, Real};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub type CoefficientFn<T, const D: usize> = Arc<dyn Fn([T; D], [T; D]) -> T + Send + Sync>;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Lambda(x, y), 1-periodic in every coordinate of both arguments, with
/// declared bounds 0 < gamma1 <= Lambda <= gamma2.
#[derive(Clone)]
pub struct PeriodicCoefficient<T: Real, const D: usize> {
    eval: CoefficientFn<T, D>,
    pub gamma1: T,
    pub gamma2: T,
    pub name: String,
}

impl<T: Real, const D: usize> PeriodicCoefficient<T, D> {
    pub fn new(eval: CoefficientFn<T, D>, gamma1: T, gamma2: T, name: impl Into<String>) -> Self {
        Self {
            eval,
            gamma1,
            gamma2,
            name: name.into(),
        }
    }

    pub fn eval(&self, x: [T; D], y: [T; D]) -> T {
        (self.eval)(x, y)
    }
}

/// Declarative description of a builtin coefficient family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BuiltinCoefficient {
    /// Lambda == value.
    Constant { value: f64 },
    /// (1 + a sin 2 pi x_1)(1 + a sin 2 pi y_1), |a| < 1; mean 1.
    SeparableTrig { amplitude: f64 },
    /// 1 + a sin 2 pi (x_1 + y_1), |a| < 1; mean 1.
    AdditiveTrig { amplitude: f64 },
}

pub fn make_builtin_coefficient<T: Real, const D: usize>(
    family: &BuiltinCoefficient,
) -> Result<PeriodicCoefficient<T, D>, CoefficientError> {
    match *family {
        BuiltinCoefficient::Constant { value } => {
            if !(value > 0.0) {
                return Err(CoefficientError::InvalidParam {
                    name: "value",
                    reason: format!("coefficient must be positive, got {value}"),
                });
            }
            let v = real::<T>(value);
            Ok(PeriodicCoefficient::new(
                Arc::new(move |_, _| v),
                v,
                v,
                format!("constant {value}"),
            ))
        }
        BuiltinCoefficient::SeparableTrig { amplitude } => {
            check_amplitude(amplitude)?;
            let a = real::<T>(amplitude);
            let tau = real::<T>(std::f64::consts::TAU);
            let eval: CoefficientFn<T, D> = Arc::new(move |x, y| {
                (T::one() + a * (tau * x[0]).sin()) * (T::one() + a * (tau * y[0]).sin())
            });
            let lo = (1.0 - amplitude.abs()).powi(2);
            let hi = (1.0 + amplitude.abs()).powi(2);
            Ok(PeriodicCoefficient::new(
                eval,
                real(lo),
                real(hi),
                format!("separable-trig a={amplitude}"),
            ))
        }
        BuiltinCoefficient::AdditiveTrig { amplitude } => {
            check_amplitude(amplitude)?;
            let a = real::<T>(amplitude);
            let tau = real::<T>(std::f64::consts::TAU);
            let eval: CoefficientFn<T, D> =
                Arc::new(move |x, y| T::one() + a * (tau * (x[0] + y[0])).sin());
            Ok(PeriodicCoefficient::new(
                eval,
                real(1.0 - amplitude.abs()),
                real(1.0 + amplitude.abs()),
                format!("additive-trig a={amplitude}"),
            ))
        }
    }
}

fn check_amplitude(a: f64) -> Result<(), CoefficientError> {
    if a.abs() < 1.0 {
        Ok(())
    } else {
        Err(CoefficientError::InvalidParam {
            name: "amplitude",
            reason: format!("|a| must be < 1 to keep Lambda positive, got {a}"),
        })
    }
}

/// Mean of Lambda over the torus T^{2d} by tensor midpoint quadrature;
/// exact for trigonometric polynomials once n_quad exceeds the bandwidth.
/// Compensated (Neumaier) accumulation keeps the result at one rounding of
/// the true sum, so coefficients with equal means share the mean bit-for-bit.
pub fn mean_lambda<T: Real, const D: usize>(
    coeff: &PeriodicCoefficient<T, D>,
    n_quad: usize,
) -> T {
    assert!(n_quad >= 2, "n_quad must be at least 2");
    let n = n_quad;
    let h = T::one() / real::<T>(n as f64);
    let half = h * real(0.5);
    let total = n.pow(2 * D as u32);
    let mut acc = T::zero();
    let mut comp = T::zero();
    for flat in 0..total {
        let mut rem = flat;
        let mut x = [T::zero(); D];
        let mut y = [T::zero(); D];
        for x_i in x.iter_mut() {
            *x_i = real::<T>((rem % n) as f64) * h + half;
            rem /= n;
        }
        for y_i in y.iter_mut() {
            *y_i = real::<T>((rem % n) as f64) * h + half;
            rem /= n;
        }
        let value = coeff.eval(x, y);
        let t = acc + value;
        if acc.abs() >= value.abs() {
            comp = comp + ((acc - t) + value);
        } else {
            comp = comp + ((value - t) + acc);
        }
        acc = t;
    }
    (acc + comp) / real(total as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientVerdict {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub threshold: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub coefficient: String,
    pub pass: bool,
    pub symmetry: CoefficientVerdict,
    pub bounds: CoefficientVerdict,
    pub periodicity: CoefficientVerdict,
    pub samples: usize,
    pub seed: u64,
}

/// Check symmetry, bounds and periodicity on a sampled set of pairs.
pub fn validate_coefficient<T: Real, const D: usize>(
    coeff: &PeriodicCoefficient<T, D>,
    samples: usize,
    seed: u64,
) -> CoefficientReport {
    let tol = 1e-12_f64;
    let mut worst_sym = 0.0_f64;
    let mut sym_witness = None;
    let mut worst_bounds = 0.0_f64;
    let mut bounds_witness = None;
    let mut worst_per = 0.0_f64;
    let mut per_witness = None;
    let g1 = to_f64(coeff.gamma1);
    let g2 = to_f64(coeff.gamma2);

    let mut points = Vec::with_capacity(samples);
    for k in 0..samples as u64 {
        let (u, v) = crate::quadrature::kronecker2(k, seed);
        let (u2, v2) = crate::quadrature::kronecker2(k, seed ^ 0x5EED);
        let mut x = [T::zero(); D];
        let mut y = [T::zero(); D];
        x[0] = real(u);
        y[0] = real(v);
        if D == 2 {
            x[1] = real(u2);
            y[1] = real(v2);
        }
        points.push((x, y));
    }

    for (x, y) in &points {
        let a = to_f64(coeff.eval(*x, *y));
        let b = to_f64(coeff.eval(*y, *x));
        let rel = (a - b).abs() / a.abs().max(1e-300);
        if rel > worst_sym {
            worst_sym = rel;
            sym_witness = Some(witness(x, y));
        }
        let viol = ((g1 - a) / g1).max((a - g2) / g2).max(0.0);
        if viol > worst_bounds {
            worst_bounds = viol;
            bounds_witness = Some(witness(x, y));
        }
        for axis in 0..D {
            let mut xs = *x;
            xs[axis] = xs[axis] + T::one();
            let c = to_f64(coeff.eval(xs, *y));
            let rel = (a - c).abs() / a.abs().max(1e-300);
            if rel > worst_per {
                worst_per = rel;
                per_witness = Some(witness(x, y));
            }
        }
    }

    let symmetry = CoefficientVerdict {
        name: "symmetry".into(),
        pass: worst_sym <= tol,
        worst: worst_sym,
        threshold: tol,
        witness: sym_witness,
    };
    let bounds = CoefficientVerdict {
        name: "bounds".into(),
        pass: worst_bounds <= 1e-9,
        worst: worst_bounds,
        threshold: 1e-9,
        witness: bounds_witness,
    };
    let periodicity = CoefficientVerdict {
        name: "periodicity".into(),
        pass: worst_per <= tol,
        worst: worst_per,
        threshold: tol,
        witness: per_witness,
    };
    let pass = symmetry.pass && bounds.pass && periodicity.pass;
    CoefficientReport {
        coefficient: coeff.name.clone(),
        pass,
        symmetry,
        bounds,
        periodicity,
        samples,
        seed,
    }
}

fn witness<T: Real, const D: usize>(x: &[T; D], y: &[T; D]) -> (Vec<f64>, Vec<f64>) {
    (
        x.iter().map(|v| to_f64(*v)).collect(),
        y.iter().map(|v| to_f64(*v)).collect(),
    )
}
