//! Shared quadrature machinery.
//!
//! Gauss-Legendre panels with adaptive bisection, heavy-tail radial integrals
//! with geometric-series extrapolation, oscillatory power tails via contour
//! rotation, and Hurwitz-zeta style lattice tail sums. Everything here is
//! deterministic: same inputs, same bits.

use crate::scalar::{real, to_f64, Real};
use num_complex::Complex;
use std::sync::OnceLock;

/// Value plus an absolute error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: T,
}

impl<T: Real> QuadResult<T> {
    pub fn rel_err(&self) -> T {
        let scale = self.value.abs().max(T::min_positive_value());
        self.abs_err / scale
    }
}

fn gauss_legendre_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n from the Chebyshev initial guess.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = -p1 / dp;
            x += dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| gauss_legendre_f64(8))
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| gauss_legendre_f64(16))
}

/// Fixed-order Gauss-Legendre rule on [a, b].
pub fn gauss_panel<T: Real>(f: &mut dyn FnMut(T) -> T, a: T, b: T, order: usize) -> T {
    let (nodes, weights) = match order {
        8 => gl8(),
        _ => gl16(),
    };
    let half = (b - a) * real(0.5);
    let mid = (a + b) * real(0.5);
    let mut acc = T::zero();
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc = acc + real::<T>(*w) * f(mid + half * real(*x));
    }
    acc * half
}

fn adaptive_rec<T: Real>(
    f: &mut dyn FnMut(T) -> T,
    a: T,
    b: T,
    tol: T,
    depth: usize,
    out_err: &mut T,
) -> T {
    let coarse = gauss_panel(f, a, b, 8);
    let fine = gauss_panel(f, a, b, 16);
    let err = (fine - coarse).abs();
    if err <= tol || depth == 0 {
        *out_err = *out_err + err;
        return fine;
    }
    let mid = (a + b) * real(0.5);
    let half_tol = tol * real(0.5);
    adaptive_rec(f, a, mid, half_tol, depth - 1, out_err)
        + adaptive_rec(f, mid, b, half_tol, depth - 1, out_err)
}

/// Adaptive integral of `f` on [a, b], splitting first at `breakpoints`.
pub fn integrate<T: Real>(
    mut f: impl FnMut(T) -> T,
    a: T,
    b: T,
    rel_tol: f64,
    breakpoints: &[T],
) -> QuadResult<T> {
    if b <= a {
        return QuadResult {
            value: T::zero(),
            abs_err: T::zero(),
        };
    }
    let mut cuts: Vec<T> = vec![a];
    let mut pts: Vec<T> = breakpoints.iter().copied().filter(|p| *p > a && *p < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.extend(pts);
    cuts.push(b);

    // First pass for a tolerance scale.
    let mut rough = T::zero();
    for w in cuts.windows(2) {
        rough = rough + gauss_panel(&mut f, w[0], w[1], 16).abs();
    }
    let tol_abs = real::<T>(rel_tol) * rough.max(T::min_positive_value());

    let total_len = b - a;
    let mut value = T::zero();
    let mut abs_err = T::zero();
    for w in cuts.windows(2) {
        let frac = (w[1] - w[0]) / total_len;
        value = value + adaptive_rec(&mut f, w[0], w[1], tol_abs * frac, 42, &mut abs_err);
    }
    QuadResult { value, abs_err }
}

/// Controls for [`integrate_radial_tail`].
#[derive(Debug, Clone, Copy)]
pub struct TailParams {
    /// Declared decay exponent: the integrand behaves like r^{-1-decay}
    /// (times a slowly varying or bounded oscillating factor).
    pub decay: f64,
    pub rel_tol: f64,
    pub max_octaves: usize,
}

impl TailParams {
    pub fn new(decay: f64, rel_tol: f64) -> Self {
        Self {
            decay,
            rel_tol,
            max_octaves: 60,
        }
    }
}

/// Integral of `f` over [a, infinity) for integrands with a power-law-ish tail.
///
/// Octave panels [a 2^j, a 2^{j+1}] are integrated adaptively; once the
/// measured panel ratio settles near the declared 2^{-decay}, the remainder is
/// added by the geometric series (exact for a pure power law). The error
/// estimate tracks both panel quadrature error and how far the measured ratio
/// is from the model.
pub fn integrate_radial_tail<T: Real>(
    mut f: impl FnMut(T) -> T,
    a: T,
    p: &TailParams,
) -> QuadResult<T> {
    let two = real::<T>(2.0);
    let ratio_model = real::<T>(2.0_f64.powf(-p.decay));
    let one_minus = T::one() - ratio_model;

    let mut total = T::zero();
    let mut abs_err = T::zero();
    let mut lo = a;
    let mut prev_panel: Option<T> = None;

    for octave in 0..p.max_octaves {
        let hi = lo * two;
        let panel = integrate(&mut f, lo, hi, p.rel_tol * 0.1, &[]);
        total = total + panel.value;
        abs_err = abs_err + panel.abs_err;

        let remainder = panel.value * ratio_model / one_minus;
        let tol_abs = real::<T>(p.rel_tol) * total.abs().max(T::min_positive_value());

        if octave >= 1 {
            let mismatch = match prev_panel {
                Some(prev) if prev.abs() > T::min_positive_value() => {
                    ((panel.value / prev - ratio_model) / ratio_model).abs()
                }
                _ => T::one(),
            };
            let rem_err = remainder.abs() * (mismatch * two / one_minus).min(T::one());
            if rem_err <= tol_abs || remainder.abs() <= tol_abs {
                return QuadResult {
                    value: total + remainder,
                    abs_err: abs_err + rem_err,
                };
            }
        }
        prev_panel = Some(panel.value);
        lo = hi;
    }
    // Ran out of octaves: extrapolate anyway and report the uncertainty.
    let last = prev_panel.unwrap_or(T::zero());
    let remainder = last * ratio_model / one_minus;
    QuadResult {
        value: total + remainder,
        abs_err: abs_err + remainder.abs(),
    }
}

/// Integral over the whole real tail of an even integrand: 2 * [a, inf).
pub fn integrate_even_tail<T: Real>(
    f: impl FnMut(T) -> T,
    a: T,
    p: &TailParams,
) -> QuadResult<T> {
    let r = integrate_radial_tail(f, a, p);
    QuadResult {
        value: r.value * real(2.0),
        abs_err: r.abs_err * real(2.0),
    }
}

/// The oscillatory power tail `int_a^inf e^{it} t^{-s} dt` for a > 0, s in (0, 3),
/// evaluated on the rotated contour t = a + iu:
/// `i e^{ia} int_0^inf e^{-u} (a + iu)^{-s} du`.
pub fn exp_power_tail(a: f64, s: f64) -> Complex<f64> {
    assert!(a > 0.0 && s > 0.0);
    let g = |u: f64| -> Complex<f64> {
        let base = Complex::new(a, u);
        (-u).exp() * base.powf(-s)
    };
    // Panels chasing the e^{-u} decay; 16-node GL per panel is ample.
    let edges = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
    let (nodes, weights) = gl16();
    let mut total = Complex::new(0.0, 0.0);
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        let mut panel = Complex::new(0.0, 0.0);
        for (x, wgt) in nodes.iter().zip(weights.iter()) {
            panel += *wgt * g(mid + half * x);
        }
        total += panel * half;
    }
    Complex::new(0.0, 1.0) * Complex::new(a.cos(), a.sin()) * total
}

/// `int_a^inf cos(t) t^{-s} dt`.
pub fn cos_power_tail(a: f64, s: f64) -> f64 {
    exp_power_tail(a, s).re
}

/// `int_a^inf sin(t) t^{-s} dt`.
pub fn sin_power_tail(a: f64, s: f64) -> f64 {
    exp_power_tail(a, s).im
}

/// Hurwitz zeta `sum_{k=0}^inf (a + k)^{-s}` for s > 1, a > 0, by
/// Euler-Maclaurin with enough leading terms summed directly.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0);
    let k = if a >= 12.0 { 4 } else { (14.0 - a).ceil() as usize };
    let mut sum = 0.0;
    for j in 0..k {
        sum += (a + j as f64).powf(-s);
    }
    let big_a = a + k as f64;
    sum += big_a.powf(1.0 - s) / (s - 1.0);
    sum += 0.5 * big_a.powf(-s);
    // Bernoulli corrections B2, B4, B6.
    let mut pochhammer = s;
    sum += (1.0 / 12.0) * pochhammer * big_a.powf(-s - 1.0);
    pochhammer *= (s + 1.0) * (s + 2.0);
    sum -= (1.0 / 720.0) * pochhammer * big_a.powf(-s - 3.0);
    pochhammer *= (s + 3.0) * (s + 4.0);
    sum += (1.0 / 30240.0) * pochhammer * big_a.powf(-s - 5.0);
    sum
}

/// Quasi-random refinement: the k-th point of a Kronecker (golden ratio)
/// sequence in [0,1)^2, with a deterministic seed offset.
pub fn kronecker2(k: u64, seed: u64) -> (f64, f64) {
    // splitmix64 on the seed gives the sequence offsets.
    let mut z = seed.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    let off1 = (z >> 11) as f64 / (1u64 << 53) as f64;
    let off2 = ((z.wrapping_mul(0x2545F4914F6CDD1D)) >> 11) as f64 / (1u64 << 53) as f64;
    const A1: f64 = 0.754877666246693; // 1/plastic number
    const A2: f64 = 0.569840290998053; // 1/plastic^2
    let x = (off1 + A1 * k as f64).fract();
    let y = (off2 + A2 * k as f64).fract();
    (x, y)
}

/// Convert a quad result into f64 space for reporting.
pub fn quad_to_f64<T: Real>(q: QuadResult<T>) -> (f64, f64) {
    (to_f64(q.value), to_f64(q.abs_err))
}
