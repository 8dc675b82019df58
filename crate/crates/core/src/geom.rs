//! Small fixed-dimension vector helpers for points in R^d, d in {1, 2}.

use crate::scalar::Real;

#[inline]
pub fn dot<T: Real, const D: usize>(a: [T; D], b: [T; D]) -> T {
    let mut s = T::zero();
    for i in 0..D {
        s = s + a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm<T: Real, const D: usize>(a: [T; D]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn add<T: Real, const D: usize>(a: [T; D], b: [T; D]) -> [T; D] {
    let mut out = a;
    for i in 0..D {
        out[i] = a[i] + b[i];
    }
    out
}

#[inline]
pub fn sub<T: Real, const D: usize>(a: [T; D], b: [T; D]) -> [T; D] {
    let mut out = a;
    for i in 0..D {
        out[i] = a[i] - b[i];
    }
    out
}

#[inline]
pub fn scale<T: Real, const D: usize>(a: [T; D], c: T) -> [T; D] {
    let mut out = a;
    for i in 0..D {
        out[i] = a[i] * c;
    }
    out
}

#[inline]
pub fn neg<T: Real, const D: usize>(a: [T; D]) -> [T; D] {
    let mut out = a;
    for i in 0..D {
        out[i] = -a[i];
    }
    out
}

/// Unit vector along `a`; `a` must be nonzero.
#[inline]
pub fn unit<T: Real, const D: usize>(a: [T; D]) -> [T; D] {
    let n = norm(a);
    scale(a, T::one() / n)
}

/// Point on the unit sphere S^{d-1} from an angle parameter.
/// For d = 1 the parameter picks the sign (theta < 0.5 -> +1); for d = 2 it is
/// the polar angle in radians.
#[inline]
pub fn sphere_point<T: Real, const D: usize>(theta: f64) -> [T; D] {
    let mut out = [T::zero(); D];
    if D == 1 {
        out[0] = if theta < 0.5 { T::one() } else { -T::one() };
    } else {
        out[0] = crate::scalar::real(theta.cos());
        out[1] = crate::scalar::real(theta.sin());
    }
    out
}
