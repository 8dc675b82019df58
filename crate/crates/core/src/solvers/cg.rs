//! Matrix-free conjugate gradient on the shifted operator m - L_eps.

use super::SolverError;
use crate::discretization::{DiscreteField, EpsilonStencil};
use crate::scalar::{real, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct CgParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal preconditioner 1 / (m + row rate).
    pub precondition: bool,
}

impl Default for CgParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
            precondition: false,
        }
    }
}

/// Outcome of a resolvent solve, with the a-priori bound ratios recorded.
pub struct ResolventSolveResult<T: Real, const D: usize> {
    pub solution: DiscreteField<T, D>,
    pub iterations: usize,
    /// Final true relative residual |(m - L) u - f| / |f|.
    pub residual: T,
    pub converged: bool,
    /// m |u| / |f|; at most 1 up to solver tolerance.
    pub c1_ratio: T,
    /// energy / (|f|^2 / m); at most 1 up to solver tolerance.
    pub c2_ratio: T,
    pub energy: T,
    /// CG objective (1/2)<A u, u> - <f, u> per iteration; nonincreasing.
    pub objective_trace: Vec<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

/// Solve (m - L_eps) u = f by conjugate gradient. Non-convergence within
/// `max_iter` is not an error: the best iterate comes back flagged.
pub fn solve_epsilon<T: Real, const D: usize>(
    stencil: &EpsilonStencil<T, D>,
    m: T,
    f: &DiscreteField<T, D>,
    params: &CgParams,
) -> Result<ResolventSolveResult<T, D>, SolverError> {
    if !(m > T::zero()) {
        return Err(SolverError::NonPositiveMass(to_f64(m)));
    }
    let grid = stencil.grid;
    if f.grid != grid {
        return Err(crate::discretization::DiscretizationError::GridMismatch.into());
    }

    let apply_a = |u: &DiscreteField<T, D>| -> Result<DiscreteField<T, D>, SolverError> {
        let lu = stencil.apply(u)?;
        let values = u
            .values
            .iter()
            .zip(lu.values.iter())
            .map(|(ui, lui)| m * *ui - *lui)
            .collect();
        Ok(DiscreteField { grid, values })
    };

    let f_norm2 = dot(&f.values, &f.values);
    if f_norm2 == T::zero() {
        return Ok(ResolventSolveResult {
            solution: DiscreteField::zeros(grid),
            iterations: 0,
            residual: T::zero(),
            converged: true,
            c1_ratio: T::zero(),
            c2_ratio: T::zero(),
            energy: T::zero(),
            objective_trace: vec![],
        });
    }
    let tol = real::<T>(params.tol);
    let target2 = tol * tol * f_norm2;

    let inv_diag: Option<Vec<T>> = params.precondition.then(|| {
        stencil
            .row_rates()
            .into_iter()
            .map(|r| T::one() / (m + r))
            .collect()
    });
    let precondition = |r: &[T]| -> Vec<T> {
        match &inv_diag {
            Some(d) => r.iter().zip(d.iter()).map(|(ri, di)| *ri * *di).collect(),
            None => r.to_vec(),
        }
    };

    let mut x = DiscreteField::zeros(grid);
    let mut r = f.clone();
    let mut z = precondition(&r.values);
    let mut p = DiscreteField {
        grid,
        values: z.clone(),
    };
    let mut rz = dot(&r.values, &z);
    let mut objective = T::zero();
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    'outer: for _restart in 0..3 {
        while iterations < params.max_iter {
            let ap = apply_a(&p)?;
            let pap = dot(&p.values, &ap.values);
            if !(pap > T::zero()) {
                // The operator is positive definite; a nonpositive curvature
                // means we ran into rounding noise. Stop here.
                break 'outer;
            }
            let alpha = rz / pap;
            for i in 0..x.values.len() {
                x.values[i] = x.values[i] + alpha * p.values[i];
                r.values[i] = r.values[i] - alpha * ap.values[i];
            }
            // Exact CG descent of the quadratic objective: -(1/2) alpha <r, z>.
            objective = objective - alpha * rz * real(0.5);
            trace.push(objective);
            iterations += 1;
            let rr = dot(&r.values, &r.values);
            if rr <= target2 {
                break;
            }
            z = precondition(&r.values);
            let rz_new = dot(&r.values, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.values.len() {
                p.values[i] = z[i] + beta * p.values[i];
            }
        }
        // Verify against the true residual; rounding drift restarts the
        // recurrence from scratch.
        let ax = apply_a(&x)?;
        let mut true_r = f.clone();
        for i in 0..true_r.values.len() {
            true_r.values[i] = true_r.values[i] - ax.values[i];
        }
        let rr = dot(&true_r.values, &true_r.values);
        if rr <= target2 * real(1.1) {
            converged = true;
            r = true_r;
            break;
        }
        if iterations >= params.max_iter {
            converged = false;
            r = true_r;
            break;
        }
        converged = false;
        r = true_r;
        z = precondition(&r.values);
        p = DiscreteField {
            grid,
            values: z.clone(),
        };
        rz = dot(&r.values, &z);
    }

    let residual = (dot(&r.values, &r.values) / f_norm2).sqrt();
    let energy = stencil.energy_form(&x)?;
    let f_l2 = f.norm_l2();
    let c1_ratio = m * x.norm_l2() / f_l2;
    let c2_ratio = energy * m / (f_l2 * f_l2);
    Ok(ResolventSolveResult {
        solution: x,
        iterations,
        residual,
        converged,
        c1_ratio,
        c2_ratio,
        energy,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_builtin_coefficient, BuiltinCoefficient};
    use crate::discretization::{assemble_stencil, AssemblyParams, TorusGrid};
    use crate::kernels::families;
    use approx::assert_relative_eq;

    fn setup(
        alpha: f64,
        eps: f64,
        n: usize,
    ) -> (TorusGrid<f64, 1>, EpsilonStencil<f64, 1>) {
        let grid = TorusGrid::<f64, 1>::new(n, 8.0).unwrap();
        let kernel = families::pareto::<f64, 1>(alpha, 0.5).unwrap();
        let coeff = make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::SeparableTrig {
            amplitude: 0.5,
        })
        .unwrap();
        let st = assemble_stencil(grid, &kernel, &coeff, eps, &AssemblyParams::default()).unwrap();
        (grid, st)
    }

    #[test]
    fn zero_rhs_gives_zero_solution_immediately() {
        let (grid, st) = setup(0.5, 0.5, 64);
        let f = DiscreteField::zeros(grid);
        let res = solve_epsilon(&st, 1.0, &f, &CgParams::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.solution.norm_l2(), 0.0);
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let (grid, st) = setup(0.5, 0.5, 64);
        let f = DiscreteField::from_fn(grid, |x| (x[0] - 4.0).exp());
        assert!(matches!(
            solve_epsilon(&st, 0.0, &f, &CgParams::default()),
            Err(SolverError::NonPositiveMass(_))
        ));
    }

    #[test]
    fn residual_and_a_priori_bounds_hold() {
        let (grid, st) = setup(1.5, 0.5, 128);
        let f = DiscreteField::from_fn(grid, |x| (-((x[0] - 4.0) / 0.5).powi(2)).exp());
        let params = CgParams {
            tol: 1e-10,
            ..Default::default()
        };
        let res = solve_epsilon(&st, 1.0, &f, &params).unwrap();
        assert!(res.converged);
        assert!(res.residual <= 1e-10 * 1.1);
        assert!(res.c1_ratio <= 1.0 + 1e-9, "c1 = {}", res.c1_ratio);
        assert!(res.c2_ratio <= 1.0 + 1e-9, "c2 = {}", res.c2_ratio);
        // Discrete Green identity: m|u|^2 + energy = <f, u> to solver slack.
        let m_u2 = res.solution.inner(&res.solution);
        let fu = f.inner(&res.solution);
        assert!((m_u2 + res.energy - fu).abs() <= 10.0 * 1e-10 * f.inner(&f));
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        let (grid, st) = setup(0.5, 0.25, 128);
        let f = DiscreteField::from_fn(grid, |x| (std::f64::consts::TAU * x[0] / 8.0).cos());
        let res = solve_epsilon(&st, 1.0, &f, &CgParams::default()).unwrap();
        assert!(res.converged);
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
    }

    #[test]
    fn preconditioned_run_agrees_with_plain() {
        let (grid, st) = setup(1.5, 0.5, 128);
        let f = DiscreteField::from_fn(grid, |x| (-((x[0] - 4.0) / 0.7).powi(2)).exp());
        let plain = solve_epsilon(&st, 1.0, &f, &CgParams { tol: 1e-11, ..Default::default() }).unwrap();
        let pre = solve_epsilon(
            &st,
            1.0,
            &f,
            &CgParams {
                tol: 1e-11,
                precondition: true,
                ..Default::default()
            },
        )
        .unwrap();
        let diff = plain
            .solution
            .values
            .iter()
            .zip(pre.solution.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-9, "solutions differ by {diff}");
    }

    #[test]
    fn maxit_flags_nonconvergence_but_returns_iterate() {
        let (grid, st) = setup(1.5, 0.5, 128);
        let f = DiscreteField::from_fn(grid, |x| (-((x[0] - 4.0) / 0.5).powi(2)).exp());
        let res = solve_epsilon(
            &st,
            1.0,
            &f,
            &CgParams {
                tol: 1e-14,
                max_iter: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert!(res.solution.norm_l2() > 0.0);
    }

    #[test]
    fn matches_discrete_symbol_closed_form_for_constant_coefficient() {
        // Lambda == 1 makes harmonics exact eigenvectors of the stencil with
        // eigenvalue -s_eps(xi) = -sum_z q(z) (1 - cos xi z) h.
        let grid = TorusGrid::<f64, 1>::new(128, 8.0).unwrap();
        let kernel = families::pareto::<f64, 1>(1.0, 0.5).unwrap();
        let coeff =
            make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::Constant { value: 1.0 })
                .unwrap();
        let st = assemble_stencil(grid, &kernel, &coeff, 0.25, &AssemblyParams::default()).unwrap();
        let xi = std::f64::consts::TAU * 2.0 / 8.0;
        let f = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos());
        let h = grid.spacing();
        let mut s_eps = 0.0;
        for off in 0..grid.node_count() {
            let z = grid.centered_offset(off)[0];
            s_eps += st.offset_weight(off) * (1.0 - (xi * z).cos()) * h;
        }
        let m = 1.0;
        let res = solve_epsilon(
            &st,
            m,
            &f,
            &CgParams {
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        let expected = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos() / (m + s_eps));
        let err = res
            .solution
            .values
            .iter()
            .zip(expected.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err <= 1e-10, "max deviation {err}");
        let _ = assert_relative_eq!(res.c1_ratio, m / (m + s_eps), max_relative = 1e-9);
    }
}
