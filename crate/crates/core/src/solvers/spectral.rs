//! Spectral solution of the effective problem and its quadrature cross-check.
//!
//! On the torus the periodized translation-invariant kernel has complex
//! exponentials as eigenfunctions with eigenvalue equal to the whole-space
//! symbol at lattice frequencies, so the Fourier route is exact on
//! band-limited data. The principal-value quadrature route exists to check
//! the symbol, not to solve.

use super::symbol::EffectiveSymbol;
use super::SolverError;
use crate::discretization::{DiscreteField, TorusGrid};
use crate::geom;
use crate::quadrature::gauss_panel;
use crate::scalar::{real, to_f64, Real};
use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use std::sync::Arc;

fn plan<T: FftNum>(n: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// In-place d-dimensional FFT over a node-major buffer (axis 0 slowest).
fn fft_nd<T: Real, const D: usize>(data: &mut [Complex<T>], n: usize, inverse: bool) {
    let fft = plan::<T>(n, inverse);
    if D == 1 {
        fft.process(data);
    } else {
        // Rows (axis 1 contiguous), then columns via transpose.
        for row in data.chunks_exact_mut(n) {
            fft.process(row);
        }
        transpose_square(data, n);
        for row in data.chunks_exact_mut(n) {
            fft.process(row);
        }
        transpose_square(data, n);
    }
}

fn transpose_square<T: Copy>(data: &mut [T], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed lattice frequency of index k: 2 pi k' / T with k' in [-N/2, N/2).
#[inline]
fn frequency(k: usize, n: usize, side: f64) -> f64 {
    let signed = if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    };
    std::f64::consts::TAU * signed as f64 / side
}

fn frequency_vector<T: Real, const D: usize>(grid: &TorusGrid<T, D>, flat: usize) -> [T; D] {
    let idx = grid.multi_index(flat);
    let side = to_f64(grid.side);
    let mut xi = [T::zero(); D];
    for k in 0..D {
        xi[k] = real(frequency(idx[k], grid.n, side));
    }
    xi
}

/// Solve (m - L_eff) u = f through the Fourier multiplier m + sigma(xi).
pub fn solve_effective<T: Real, const D: usize>(
    grid: TorusGrid<T, D>,
    m: T,
    f: &DiscreteField<T, D>,
    sym: &EffectiveSymbol<T, D>,
) -> Result<DiscreteField<T, D>, SolverError> {
    if !(m > T::zero()) {
        return Err(SolverError::NonPositiveMass(to_f64(m)));
    }
    if f.grid != grid {
        return Err(crate::discretization::DiscretizationError::GridMismatch.into());
    }
    multiplier_apply(grid, f, |xi| {
        let s = sym.value(xi);
        debug_assert!(m + s > T::zero());
        T::one() / (m + s)
    })
}

/// Apply (m - L_eff) u through the multiplier m + sigma(xi); the exact inverse
/// of [`solve_effective`] on the dual lattice.
pub fn apply_effective_symbol<T: Real, const D: usize>(
    grid: TorusGrid<T, D>,
    m: T,
    u: &DiscreteField<T, D>,
    sym: &EffectiveSymbol<T, D>,
) -> Result<DiscreteField<T, D>, SolverError> {
    if u.grid != grid {
        return Err(crate::discretization::DiscretizationError::GridMismatch.into());
    }
    multiplier_apply(grid, u, |xi| m + sym.value(xi))
}

fn multiplier_apply<T: Real, const D: usize>(
    grid: TorusGrid<T, D>,
    f: &DiscreteField<T, D>,
    factor: impl Fn([T; D]) -> T,
) -> Result<DiscreteField<T, D>, SolverError> {
    let n = grid.n;
    let count = grid.node_count();
    let mut buf: Vec<Complex<T>> = f
        .values
        .iter()
        .map(|v| Complex::new(*v, T::zero()))
        .collect();
    fft_nd::<T, D>(&mut buf, n, false);
    for (flat, value) in buf.iter_mut().enumerate() {
        let xi = frequency_vector(&grid, flat);
        *value = *value * factor(xi);
    }
    fft_nd::<T, D>(&mut buf, n, true);
    let scale = T::one() / real::<T>(count as f64);
    let mut imag2 = T::zero();
    let mut f2 = T::zero();
    for v in f.values.iter() {
        f2 = f2 + *v * *v;
    }
    let values: Vec<T> = buf
        .iter()
        .map(|c| {
            imag2 = imag2 + c.im * c.im;
            c.re * scale
        })
        .collect();
    let imag_ratio = to_f64((imag2.sqrt() * scale) / (f2.sqrt().max(T::min_positive_value())));
    if imag_ratio > 1e-12 {
        return Err(SolverError::NonRealOutput { imag_ratio });
    }
    Ok(DiscreteField { grid, values })
}

/// Evaluate L_eff u by symmetric-pair quadrature with lattice images: paired
/// +/- offsets enter through second differences, cells inside `pv_radius` use
/// an O(|z|^2)-weighted second difference so the near-singularity cancels,
/// far cells carry exact (d = 1) or midpoint (d = 2) kernel cell integrals.
pub fn apply_effective_quadrature<T: Real, const D: usize>(
    u: &DiscreteField<T, D>,
    sym: &EffectiveSymbol<T, D>,
    pv_radius: T,
    image_radius: usize,
) -> DiscreteField<T, D> {
    let grid = u.grid;
    let n = grid.n;
    let alpha = to_f64(sym.alpha);
    let lam = to_f64(sym.lambda_bar);
    let side = to_f64(grid.side);
    let h = to_f64(grid.spacing());
    let pv = to_f64(pv_radius).max(2.0 * h);

    if D == 1 {
        let k0 = to_f64(sym.angular.eval(geom::sphere_point(0.0)));
        let coef = lam * k0;
        // Weight per paired offset j = 1..n/2.
        let mut w = vec![0.0f64; n / 2 + 1];
        for (j, w_j) in w.iter_mut().enumerate().skip(1) {
            let z = j as f64 * h;
            let mut acc = if z < pv {
                // (1/z^2) int_cell zeta^2 |zeta|^{-1-alpha} d zeta.
                let hi = (z + h / 2.0).powf(2.0 - alpha);
                let lo = (z - h / 2.0).powf(2.0 - alpha);
                (hi - lo) / ((2.0 - alpha) * z * z)
            } else {
                cell_integral_1d(z, h, alpha)
            };
            if j == 1 {
                // Fold the zero cell onto the first second difference.
                acc += (h / 2.0).powf(2.0 - alpha) / ((2.0 - alpha) * h * h);
            }
            // Lattice images: direct, then integral + Euler-Maclaurin tail.
            let n_direct = 512usize.max(image_radius);
            for img in 1..=n_direct {
                let base = img as f64 * side;
                acc += cell_integral_1d(base + z, h, alpha) + cell_integral_1d(base - z, h, alpha);
            }
            acc += cell_image_tail_1d(z, h, side, alpha, n_direct)
                + cell_image_tail_1d(-z, h, side, alpha, n_direct);
            *w_j = coef * acc;
        }
        let vals = &u.values;
        let values: Vec<T> = (0..n)
            .map(|i| {
                let ui = to_f64(vals[i]);
                let mut acc = 0.0;
                for (j, w_j) in w.iter().enumerate().skip(1) {
                    let up = to_f64(vals[(i + j) % n]);
                    let um = to_f64(vals[(i + n - j) % n]);
                    let dd = up - 2.0 * ui + um;
                    // The half-grid offset is its own mirror.
                    let scale = if j == n / 2 { 0.5 } else { 1.0 };
                    acc += scale * w_j * dd;
                }
                real::<T>(acc)
            })
            .collect();
        DiscreteField { grid, values }
    } else {
        // d = 2: canonical half-plane offsets with second differences.
        let count = grid.node_count();
        let m_alpha = {
            let mut total = 0.0;
            for p in 0..8 {
                let a = -std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_4 * p as f64;
                let b = a + std::f64::consts::FRAC_PI_4;
                total += gauss_panel(
                    &mut |t: f64| {
                        let mm = t.cos().abs().max(t.sin().abs());
                        to_f64(sym.angular.eval(geom::sphere_point::<T, D>(t))) * mm.powf(alpha)
                    },
                    a,
                    b,
                    16,
                );
            }
            total
        };
        let far_const = lam * m_alpha * (side * (image_radius as f64 + 0.5)).powf(-alpha)
            / (alpha * side * side);
        let kernel_at = |p: [f64; 2]| -> f64 {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let mut s = [T::zero(); D];
            s[0] = real(p[0] / r);
            s[1 % D] = real(p[1] / r);
            lam * to_f64(sym.angular.eval(s)) * r.powf(-2.0 - alpha)
        };
        let mut weights = vec![0.0f64; count];
        // Zero-cell contribution folded onto the axis-neighbor second
        // differences with O(|zeta|^2) weighting, as in d = 1.
        {
            let fold = |component: usize| -> f64 {
                let mut total = 0.0;
                for p in 0..8 {
                    let a = -std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_4 * p as f64;
                    let b = a + std::f64::consts::FRAC_PI_4;
                    total += gauss_panel(
                        &mut |t: f64| {
                            let mm = t.cos().abs().max(t.sin().abs());
                            let trig2 = if component == 0 {
                                t.cos() * t.cos()
                            } else {
                                t.sin() * t.sin()
                            };
                            to_f64(sym.angular.eval(geom::sphere_point::<T, D>(t)))
                                * trig2
                                * (h / (2.0 * mm)).powf(2.0 - alpha)
                                / (2.0 - alpha)
                        },
                        a,
                        b,
                        16,
                    );
                }
                lam * total / (h * h)
            };
            weights[grid.flat_index({
                let mut e = [0usize; D];
                e[0] = 1;
                e
            })] += fold(0);
            weights[grid.flat_index({
                let mut e = [0usize; D];
                e[1 % D] = 1;
                e
            })] += fold(1);
        }
        let zero_cell = std::mem::take(&mut weights);
        weights = vec![0.0f64; count];
        for flat in 1..count {
            if grid.mirror(flat) < flat {
                continue;
            }
            let zc = grid.centered_offset(flat);
            let z = [to_f64(zc[0]), to_f64(zc[1])];
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            let mut acc = 0.0;
            if r < pv {
                // O(|z|^2)-weighted 4x4 cell quadrature of |zeta|^2 k |zeta|^{-2-alpha}.
                let s = 4;
                for a in 0..s {
                    for b in 0..s {
                        let p = [
                            z[0] + ((a as f64 + 0.5) / s as f64 - 0.5) * h,
                            z[1] + ((b as f64 + 0.5) / s as f64 - 0.5) * h,
                        ];
                        let rr2 = p[0] * p[0] + p[1] * p[1];
                        acc += kernel_at(p) * rr2 / (r * r) * (h * h) / (s * s) as f64;
                    }
                }
            } else {
                acc += kernel_at(z) * h * h;
            }
            for n1 in -(image_radius as i64)..=(image_radius as i64) {
                for n2 in -(image_radius as i64)..=(image_radius as i64) {
                    if n1 == 0 && n2 == 0 {
                        continue;
                    }
                    acc += kernel_at([z[0] + n1 as f64 * side, z[1] + n2 as f64 * side]) * h * h;
                }
            }
            acc += far_const * h * h + zero_cell[flat];
            weights[flat] = acc;
            weights[grid.mirror(flat)] = acc;
        }
        let vals = &u.values;
        let values: Vec<T> = (0..count)
            .map(|i| {
                let ui = to_f64(vals[i]);
                let i1 = i / n;
                let i2 = i % n;
                let mut acc = 0.0;
                for flat in 1..count {
                    let mir = grid.mirror(flat);
                    if mir < flat {
                        continue;
                    }
                    let d1 = flat / n;
                    let d2 = flat % n;
                    let jp = ((i1 + d1) % n) * n + (i2 + d2) % n;
                    let jm = ((i1 + n - d1) % n) * n + (i2 + n - d2) % n;
                    let dd = to_f64(vals[jp]) - 2.0 * ui + to_f64(vals[jm]);
                    let scale = if mir == flat { 0.5 } else { 1.0 };
                    acc += scale * weights[flat] * dd;
                }
                real::<T>(acc)
            })
            .collect();
        DiscreteField { grid, values }
    }
}

/// Exact integral of |zeta|^{-1-alpha} over the cell [c - h/2, c + h/2],
/// valid for c - h/2 > 0.
fn cell_integral_1d(center: f64, h: f64, alpha: f64) -> f64 {
    ((center - h / 2.0).powf(-alpha) - (center + h / 2.0).powf(-alpha)) / alpha
}

/// Tail sum over images n > n_direct of the exact cell integrals at
/// c = n side + z: midpoint-rule integral in closed form plus the leading
/// Euler-Maclaurin correction.
fn cell_image_tail_1d(z: f64, h: f64, side: f64, alpha: f64, n_direct: usize) -> f64 {
    let g = |x: f64| -> f64 { cell_integral_1d(x * side + z, h, alpha) };
    let x0 = n_direct as f64 + 0.5;
    let (lo, hi) = (x0 * side + z - h / 2.0, x0 * side + z + h / 2.0);
    let integral = if (alpha - 1.0).abs() < 1e-9 {
        (hi / lo).ln() / side
    } else {
        (hi.powf(1.0 - alpha) - lo.powf(1.0 - alpha)) / (alpha * side * (1.0 - alpha))
    };
    let eps_d = 1e-4;
    let dg = (g(x0 + eps_d) - g(x0 - eps_d)) / (2.0 * eps_d);
    integral + dg / 24.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::AngularDensity;
    use crate::solvers::init_symbol;
    use approx::assert_relative_eq;

    fn symbol_1d(alpha: f64, lam: f64, k0: f64) -> EffectiveSymbol<f64, 1> {
        init_symbol(alpha, lam, &AngularDensity::constant(k0), 16).unwrap()
    }

    #[test]
    fn single_harmonic_is_solved_exactly() {
        let grid = TorusGrid::<f64, 1>::new(64, 8.0).unwrap();
        let sym = symbol_1d(1.0, 1.0, 0.25);
        let xi = std::f64::consts::TAU * 3.0 / 8.0;
        let f = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos());
        let m = 1.0;
        let u = solve_effective(grid, m, &f, &sym).unwrap();
        let sig = sym.value([xi]);
        for (uv, fv) in u.values.iter().zip(f.values.iter()) {
            assert_relative_eq!(*uv, fv / (m + sig), max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_rhs_and_mass_bound() {
        let grid = TorusGrid::<f64, 1>::new(64, 8.0).unwrap();
        let sym = symbol_1d(0.5, 1.0, 0.25);
        let zero = DiscreteField::zeros(grid);
        let u = solve_effective(grid, 1.0, &zero, &sym).unwrap();
        assert_eq!(u.norm_l2(), 0.0);
        // m |u| <= |f| for band-limited pseudo-random data: sigma >= 0.
        let f = DiscreteField::from_fn(grid, |x| {
            (std::f64::consts::TAU * x[0] / 8.0).cos() + 0.3 * (std::f64::consts::TAU * 3.0 * x[0] / 8.0).sin()
        });
        let m = 2.0;
        let u = solve_effective(grid, m, &f, &sym).unwrap();
        assert!(m * u.norm_l2() <= f.norm_l2() * (1.0 + 1e-13));
    }

    #[test]
    fn solve_then_apply_returns_the_data() {
        let grid = TorusGrid::<f64, 1>::new(128, 8.0).unwrap();
        let sym = symbol_1d(1.5, 1.3, 0.3);
        let f = DiscreteField::from_fn(grid, |x| (-((x[0] - 4.0) / 0.6).powi(2)).exp());
        let u = solve_effective(grid, 1.0, &f, &sym).unwrap();
        let back = apply_effective_symbol(grid, 1.0, &u, &sym).unwrap();
        let err: f64 = back
            .values
            .iter()
            .zip(f.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "round trip error {err}");
        // Determinism: a second run is bit-identical.
        let u2 = solve_effective(grid, 1.0, &f, &sym).unwrap();
        assert_eq!(u.values, u2.values);
    }

    #[test]
    fn quadrature_route_matches_symbol_on_harmonics() {
        let grid = TorusGrid::<f64, 1>::new(1024, 8.0).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let sym = symbol_1d(alpha, 1.0, 0.25);
            let xi = std::f64::consts::TAU * 2.0 / 8.0;
            let u = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos());
            let lu = apply_effective_quadrature(&u, &sym, 0.25, 8);
            let sig = sym.value([xi]);
            let err: f64 = lu
                .values
                .iter()
                .zip(u.values.iter())
                .map(|(a, b)| (a + sig * b).abs())
                .fold(0.0, f64::max);
            assert!(
                err / sig <= 1e-3,
                "alpha {alpha}: relative deviation {}",
                err / sig
            );
        }
    }

    #[test]
    fn quadrature_route_error_halves_with_resolution() {
        let sym = symbol_1d(1.5, 1.0, 0.25);
        let xi = std::f64::consts::TAU * 2.0 / 8.0;
        let sig = sym.value([xi]);
        let mut errs = Vec::new();
        for n in [256usize, 512, 1024] {
            let grid = TorusGrid::<f64, 1>::new(n, 8.0).unwrap();
            let u = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos());
            let lu = apply_effective_quadrature(&u, &sym, 0.25, 8);
            let err: f64 = lu
                .values
                .iter()
                .zip(u.values.iter())
                .map(|(a, b)| (a + sig * b).abs())
                .fold(0.0, f64::max);
            errs.push(err / sig);
        }
        assert!(errs[1] <= errs[0] / 2.0 * 1.05, "errors {errs:?}");
        assert!(errs[2] <= errs[1] / 2.0 * 1.05, "errors {errs:?}");
    }

    #[test]
    fn quadrature_route_annihilates_constants_and_preserves_parity() {
        let grid = TorusGrid::<f64, 1>::new(256, 8.0).unwrap();
        let sym = symbol_1d(0.8, 1.0, 0.25);
        let ones = DiscreteField::from_fn(grid, |_| 1.0);
        let lu = apply_effective_quadrature(&ones, &sym, 0.25, 8);
        for v in lu.values {
            assert!(v.abs() < 1e-12);
        }
        // Odd data about the torus center maps to odd output.
        let odd = DiscreteField::from_fn(grid, |x| (std::f64::consts::TAU * (x[0] - 4.0) / 8.0).sin());
        let lodd = apply_effective_quadrature(&odd, &sym, 0.25, 8);
        let nn = grid.n;
        for i in 1..nn {
            let j = nn - i;
            assert!(
                (lodd.values[i] + lodd.values[j]).abs() <= 1e-12,
                "parity violated at {i}"
            );
        }
    }

    #[test]
    fn two_dimensional_spectral_solve_smoke() {
        let grid = TorusGrid::<f64, 2>::new(32, 4.0).unwrap();
        let sym = init_symbol(1.0, 1.0, &AngularDensity::<f64, 2>::constant(0.2), 256).unwrap();
        let xi = [std::f64::consts::TAU / 4.0, std::f64::consts::TAU / 4.0];
        let f = DiscreteField::from_fn(grid, |x| (xi[0] * x[0] + xi[1] * x[1]).cos());
        let u = solve_effective(grid, 1.0, &f, &sym).unwrap();
        let sig = sym.value(xi);
        for (uv, fv) in u.values.iter().zip(f.values.iter()) {
            assert_relative_eq!(*uv, fv / (1.0 + sig), epsilon = 1e-12);
        }
        // Quadrature cross-check at smoke tolerance.
        let lu = apply_effective_quadrature(&u, &sym, 0.5, 8);
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in lu.values.iter().zip(u.values.iter()) {
            num += (a + sig * b) * (a + sig * b);
            den += (sig * b) * (sig * b);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "d=2 quadrature deviation {rel}");
    }
}
