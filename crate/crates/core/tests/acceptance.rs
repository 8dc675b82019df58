//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The baseline study (d = 1, T = 8, alpha in {0.5, 1.5}, m = 1, pareto
//! kernel with r0 = 0.5, separable-trig coefficient with a = 0.5, Gaussian
//! right-hand side of width 0.5, eps in {1/2, 1/4, 1/8, 1/16}, h = eps/8) is
//! computed once and shared across criteria.

use levylab::coefficients::{make_builtin_coefficient, mean_lambda, BuiltinCoefficient};
use levylab::discretization::{assemble_stencil, AssemblyParams, DiscreteField, TorusGrid};
use levylab::harness::{
    mass_escape, run_study, weak_convergence_probe, ConvergenceReport, EpsRatio, ProbeSettings,
    StudySettings,
};
use levylab::kernels::{families, validate_kernel, AngularDensity, ValidationBudget};
use levylab::solvers::{
    init_symbol, reference_symbol, solve_effective, solve_epsilon, CgParams,
};
use std::sync::OnceLock;

const SIDE: f64 = 8.0;
const ALPHAS: [f64; 2] = [0.5, 1.5];

fn baseline_settings(side: f64) -> StudySettings {
    let mut s = StudySettings::baseline(side);
    s.validation.m2_r_max = 1e5;
    s
}

fn baseline_kernel(alpha: f64) -> levylab::Kernel1 {
    families::pareto::<f64, 1>(alpha, 0.5).unwrap()
}

fn osc_coefficient() -> levylab::Coefficient1 {
    make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::SeparableTrig { amplitude: 0.5 })
        .unwrap()
}

struct Fixtures {
    /// (alpha, side) -> study report with the oscillating coefficient.
    studies: Vec<((f64, f64), ConvergenceReport)>,
}

impl Fixtures {
    fn study(&self, alpha: f64, side: f64) -> &ConvergenceReport {
        &self
            .studies
            .iter()
            .find(|((a, s), _)| *a == alpha && *s == side)
            .expect("fixture study")
            .1
    }
}

fn fixtures() -> &'static Fixtures {
    static CELL: OnceLock<Fixtures> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut studies = Vec::new();
        for &alpha in &ALPHAS {
            for &side in &[SIDE, 2.0 * SIDE] {
                let kernel = baseline_kernel(alpha);
                let coeff = osc_coefficient();
                let settings = baseline_settings(side);
                let report = run_study(&kernel, &coeff, &settings, serde_json::json!({}))
                    .expect("baseline study runs");
                studies.push(((alpha, side), report));
            }
        }
        Fixtures { studies }
    })
}

fn pseudo_field(grid: TorusGrid<f64, 1>, seed: u64) -> DiscreteField<f64, 1> {
    let values = (0..grid.node_count())
        .map(|i| {
            let (a, b) = levylab::quadrature::kronecker2(i as u64, seed);
            a - 0.5 + 0.25 * (b - 0.5)
        })
        .collect();
    DiscreteField { grid, values }
}

#[test]
fn acceptance_1_apriori_bounds() {
    for &alpha in &ALPHAS {
        let report = fixtures().study(alpha, SIDE);
        assert!(report.all_converged(), "alpha {alpha}: non-converged record");
        for r in &report.records {
            assert!(
                r.c1_ratio <= 1.0 + 1e-6,
                "alpha {alpha}, eps {}: c1 = {}",
                r.eps,
                r.c1_ratio
            );
            assert!(
                r.c2_ratio <= 1.0 + 1e-6,
                "alpha {alpha}, eps {}: c2 = {}",
                r.eps,
                r.c2_ratio
            );
        }
        assert!(
            report.timing.total_ms <= 120_000.0,
            "alpha {alpha}: study took {} ms",
            report.timing.total_ms
        );
    }
    println!("ACCEPTANCE 1 (a-priori bound suite): PASS");
}

#[test]
fn acceptance_2_operator_algebra() {
    let grid = TorusGrid::<f64, 1>::new(128, SIDE).unwrap();
    let kernel = baseline_kernel(1.5);
    let coeff = osc_coefficient();
    let stencil =
        assemble_stencil(grid, &kernel, &coeff, 0.5, &AssemblyParams::default()).unwrap();
    let rates = stencil.row_rates();
    let op_scale = rates.iter().copied().fold(0.0f64, f64::max) * 2.0;

    let ones = DiscreteField::from_fn(grid, |_| 1.0);
    let annihilated = stencil.apply(&ones).unwrap();
    for v in &annihilated.values {
        assert!(v.abs() <= 1e-12 * op_scale, "constant not annihilated: {v}");
    }

    for pair in 0..20u64 {
        let u = pseudo_field(grid, 2 * pair + 1);
        let v = pseudo_field(grid, 9000 + pair);
        let lu = stencil.apply(&u).unwrap();
        let lv = stencil.apply(&v).unwrap();
        let asym = (lu.inner(&v) - u.inner(&lv)).abs();
        assert!(
            asym <= 1e-12 * u.norm_l2() * v.norm_l2() * op_scale,
            "self-adjointness violated: {asym}"
        );
        let quad = -lu.inner(&u);
        assert!(
            quad >= -1e-12 * u.norm_l2() * u.norm_l2() * op_scale,
            "negative-semidefiniteness violated: {quad}"
        );
        let energy = stencil.energy_form(&u).unwrap();
        let rel = (energy - quad).abs() / energy.abs().max(1e-300);
        assert!(rel <= 1e-12, "energy_form vs pairing: rel {rel}");
    }
    println!("ACCEPTANCE 2 (operator algebra): PASS");
}

#[test]
fn acceptance_3_symbol_oracle() {
    // Pinned value: d = 1, alpha = 1, k == 1, lambda_bar = 1.
    let sym = init_symbol(1.0, 1.0, &AngularDensity::<f64, 1>::constant(1.0), 16).unwrap();
    for xi in [0.4, 1.0, 3.7, 52.0] {
        let ratio = sym.value([xi]) / xi;
        assert!(
            (ratio - std::f64::consts::PI).abs() <= 1e-8,
            "sigma/|xi| = {ratio}"
        );
    }

    // d = 1 oracle equivalence at 10 pseudo-random frequencies per alpha.
    for &(alpha, tol) in &[(0.5_f64, 1e-6), (1.5, 1e-6), (0.1, 1e-4), (1.9, 1e-4)] {
        let kernel = baseline_kernel(alpha.clamp(0.2, 1.8));
        // the angular density scale comes from a real kernel; alpha is free
        let angular = kernel.angular.clone();
        let sym = init_symbol(alpha, 1.3, &angular, 16).unwrap();
        for k in 0..10u64 {
            let (u, v) = levylab::quadrature::kronecker2(k, 42);
            let mag = 0.2 * 50.0f64.powf(u);
            let xi = if v < 0.5 { mag } else { -mag };
            let got = sym.value([xi]);
            let want = reference_symbol(alpha, 1.3, &angular, [xi]);
            let rel = (got - want).abs() / want.abs();
            assert!(rel <= tol, "alpha {alpha}, xi {xi}: rel {rel}");
        }
    }

    // d = 2 anisotropic angular density.
    let kernel2 = families::anisotropic_pareto::<f64, 2>(1.2, 0.5, 0.4).unwrap();
    let sym2 = init_symbol(1.2, 0.9, &kernel2.angular, 4096).unwrap();
    for k in 0..10u64 {
        let (u, v) = levylab::quadrature::kronecker2(k, 7);
        let mag = 0.3 * 20.0f64.powf(u);
        let ang = std::f64::consts::TAU * v;
        let xi = [mag * ang.cos(), mag * ang.sin()];
        let got = sym2.value(xi);
        let want = reference_symbol(1.2, 0.9, &kernel2.angular, xi);
        let rel = (got - want).abs() / want.abs();
        assert!(rel <= 1e-6, "d=2 xi {xi:?}: rel {rel}");
    }
    println!("ACCEPTANCE 3 (symbol oracle equivalence): PASS");
}

#[test]
fn acceptance_4_spectral_exactness() {
    let grid = TorusGrid::<f64, 1>::new(256, SIDE).unwrap();
    let kernel = baseline_kernel(1.5);
    let lam_bar = 1.0;
    let sym = init_symbol(kernel.alpha, lam_bar, &kernel.angular, 16).unwrap();
    let m = 1.0;

    // Effective solve on a single harmonic is diagonal to machine precision.
    let xi = std::f64::consts::TAU * 3.0 / SIDE;
    let f = DiscreteField::from_fn(grid, |x| (xi * x[0]).cos());
    let u = solve_effective(grid, m, &f, &sym).unwrap();
    let sig = sym.value([xi]);
    for (uv, fv) in u.values.iter().zip(f.values.iter()) {
        assert!(
            (uv - fv / (m + sig)).abs() <= 1e-13,
            "harmonic response off: {uv} vs {}",
            fv / (m + sig)
        );
    }

    // CG with a constant coefficient matches the discrete-symbol closed form.
    let coeff =
        make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::Constant { value: 1.0 }).unwrap();
    let stencil =
        assemble_stencil(grid, &kernel, &coeff, 0.5, &AssemblyParams::default()).unwrap();
    let h = grid.spacing();
    let mut s_eps = 0.0;
    for off in 0..grid.node_count() {
        let z = grid.centered_offset(off)[0];
        s_eps += stencil.offset_weight(off) * (1.0 - (xi * z).cos()) * h;
    }
    let tol = 1e-11;
    let res = solve_epsilon(
        &stencil,
        m,
        &f,
        &CgParams {
            tol,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(res.converged);
    let mut worst = 0.0f64;
    for (got, fv) in res.solution.values.iter().zip(f.values.iter()) {
        worst = worst.max((got - fv / (m + s_eps)).abs());
    }
    assert!(
        worst <= 50.0 * tol,
        "CG vs discrete symbol closed form: {worst}"
    );
    println!("ACCEPTANCE 4 (spectral exactness): PASS");
}

#[test]
fn acceptance_5_theorem_at_desk_scale() {
    for &alpha in &ALPHAS {
        let report = fixtures().study(alpha, SIDE);
        let errors: Vec<f64> = report.records.iter().map(|r| r.error).collect();
        for w in errors.windows(2) {
            assert!(
                w[1] < w[0],
                "alpha {alpha}: errors not strictly decreasing: {errors:?}"
            );
        }
        let last = *errors.last().unwrap();
        assert!(last <= 0.05, "alpha {alpha}: final error {last}");

        // Periodization control: doubling T moves the final error by <= 20%.
        let doubled = fixtures().study(alpha, 2.0 * SIDE);
        let last2 = doubled.final_error().unwrap();
        let change = (last2 - last).abs() / last;
        assert!(
            change <= 0.20,
            "alpha {alpha}: T-doubling changed the final error by {change}"
        );
        println!(
            "  alpha {alpha}: errors {errors:?}, T-doubling change {:.3}",
            change
        );
    }
    println!("ACCEPTANCE 5 (strong resolvent convergence at desk scale): PASS");
}

#[test]
fn acceptance_6_mean_invariance() {
    let osc = osc_coefficient();
    let constant =
        make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::Constant { value: 1.0 }).unwrap();
    let m_osc = mean_lambda(&osc, 64);
    let m_const = mean_lambda(&constant, 64);
    assert_eq!(m_osc.to_bits(), m_const.to_bits(), "means differ in bits");

    for &alpha in &ALPHAS {
        let kernel = baseline_kernel(alpha);
        let eps = 1.0 / 16.0;
        let n = (SIDE * 8.0 / eps) as usize;
        let grid = TorusGrid::<f64, 1>::new(n, SIDE).unwrap();
        let f = levylab::harness::RhsSpec::GaussianBump { width: 0.5 }.build(grid);
        let m = 1.0;

        // Bit-identical effective solutions.
        let sym_osc = init_symbol(kernel.alpha, m_osc, &kernel.angular, 16).unwrap();
        let sym_const = init_symbol(kernel.alpha, m_const, &kernel.angular, 16).unwrap();
        let u_osc = solve_effective(grid, m, &f, &sym_osc).unwrap();
        let u_const = solve_effective(grid, m, &f, &sym_const).unwrap();
        for (a, b) in u_osc.values.iter().zip(u_const.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "effective solutions differ");
        }

        // The eps-solutions approach each other.
        let cg = CgParams::default();
        let st_osc =
            assemble_stencil(grid, &kernel, &osc, eps, &AssemblyParams::default()).unwrap();
        let st_const =
            assemble_stencil(grid, &kernel, &constant, eps, &AssemblyParams::default()).unwrap();
        let res_osc = solve_epsilon(&st_osc, m, &f, &cg).unwrap();
        let res_const = solve_epsilon(&st_const, m, &f, &cg).unwrap();
        let mut diff = res_osc.solution.clone();
        for (d, c) in diff.values.iter_mut().zip(res_const.solution.values.iter()) {
            *d -= *c;
        }
        let rel = diff.norm_l2() / u_osc.norm_l2();
        assert!(rel <= 0.05, "alpha {alpha}: |u_osc - u_const|/|u| = {rel}");
        println!("  alpha {alpha}: eps-solution distance {rel:.4}");
    }
    println!("ACCEPTANCE 6 (mean-invariance of the limit): PASS");
}

#[test]
fn acceptance_7_validator_discrimination() {
    let budget = ValidationBudget {
        m2_r_max: 1e4,
        ..Default::default()
    };

    let pareto = baseline_kernel(0.8);
    let report = validate_kernel(&pareto, &budget);
    assert!(report.pass, "pareto failed: {:?}", report.failed_verdicts());

    let aniso = families::anisotropic_pareto::<f64, 2>(1.2, 0.5, 0.4).unwrap();
    let budget2 = ValidationBudget {
        m2_r_max: 1e4,
        m2_quad_rel_tol: 1e-3,
        envelope_radii: 80,
        ..Default::default()
    };
    let report = validate_kernel(&aniso, &budget2);
    assert!(
        report.pass,
        "anisotropic-pareto failed: {:?}",
        report.failed_verdicts()
    );

    let violator = families::oscillation_violator::<f64, 1>(0.5, 1.0).unwrap();
    let report = validate_kernel(&violator, &budget);
    assert!(!report.pass);
    assert!(report.symmetry.pass && report.normalization.pass);
    assert!(report.tail_bounds.pass && report.tail_asymptotics.pass);
    assert!(!report.oscillation_decay.pass, "expected the oscillation verdict to fail");
    for row in &report.oscillation_rows {
        assert!(row.phi >= 0.3, "phi({}) = {}", row.r, row.phi);
    }

    let log_plain = families::log_perturbed::<f64, 1>(1.5, 1.0, true).unwrap();
    let report = validate_kernel(&log_plain, &budget);
    assert!(!report.tail_asymptotics.pass, "plain-mode log kernel must fail the tail asymptotics");

    let log_sv = families::log_perturbed::<f64, 1>(1.5, 1.0, false).unwrap();
    let deep = ValidationBudget {
        m2_r_max: 1e8,
        ..Default::default()
    };
    let report = validate_kernel(&log_sv, &deep);
    assert!(
        report.pass,
        "slowly-varying log kernel failed: {:?}",
        report.failed_verdicts()
    );
    println!("ACCEPTANCE 7 (validator discrimination): PASS");
}

#[test]
fn acceptance_8_diagnostic_probes() {
    // Exact power law with constant coefficient: ratios equal 1 to 1e-3.
    let kernel = baseline_kernel(0.5);
    let constant =
        make_builtin_coefficient::<f64, 1>(&BuiltinCoefficient::Constant { value: 1.0 }).unwrap();
    let eps_list = [0.5, 0.25, 0.125, 0.0625];
    let rows = weak_convergence_probe(
        &kernel,
        &constant,
        1.0,
        &eps_list,
        &ProbeSettings::default(),
    )
    .unwrap();
    for row in &rows {
        assert!(
            (row.ratio - 1.0).abs() <= 1e-3,
            "constant-coefficient ratio {} at eps {}",
            row.ratio,
            row.eps
        );
    }

    // Oscillating coefficient: |ratio - 1| nonincreasing along halving eps.
    let rows = weak_convergence_probe(
        &kernel,
        &osc_coefficient(),
        1.0,
        &eps_list,
        &ProbeSettings::default(),
    )
    .unwrap();
    let devs: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    for w in devs.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "probe deviations increased: {devs:?}");
    }

    // Mass escape: sup over eps nonincreasing from L = T/8 to L = T/4.
    for &alpha in &ALPHAS {
        let report = fixtures().study(alpha, SIDE);
        let sup: Vec<(f64, f64)> = report
            .mass_escape_sup
            .iter()
            .map(|r| (r.radius, r.sup_over_eps))
            .collect();
        assert_eq!(sup.len(), 2);
        assert!(
            sup[1].1 <= sup[0].1 + 1e-15,
            "alpha {alpha}: mass escape sup increased with L: {sup:?}"
        );
    }
    println!("ACCEPTANCE 8 (diagnostic probes): PASS");
}

#[test]
fn acceptance_9_determinism() {
    let kernel = baseline_kernel(0.5);
    let coeff = osc_coefficient();
    let mut settings = baseline_settings(SIDE);
    settings.eps_schedule = vec![EpsRatio::new(1, 2).unwrap(), EpsRatio::new(1, 4).unwrap()];
    let r1 = run_study(&kernel, &coeff, &settings, serde_json::json!({"run": "same"})).unwrap();
    let r2 = run_study(&kernel, &coeff, &settings, serde_json::json!({"run": "same"})).unwrap();
    let strip = |r: &ConvergenceReport| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string_pretty(&v).unwrap()
    };
    assert_eq!(strip(&r1), strip(&r2), "reports differ beyond timing");

    // Byte-identical solution payloads.
    let grid = TorusGrid::<f64, 1>::new(512, SIDE).unwrap();
    let f = levylab::harness::RhsSpec::GaussianBump { width: 0.5 }.build(grid);
    let st = assemble_stencil(grid, &kernel, &coeff, 0.125, &AssemblyParams::default()).unwrap();
    let a = solve_epsilon(&st, 1.0, &f, &CgParams::default()).unwrap();
    let b = solve_epsilon(&st, 1.0, &f, &CgParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.bin");
    let pb = dir.path().join("b.bin");
    a.solution.write_binary(&pa, 0.125).unwrap();
    b.solution.write_binary(&pb, 0.125).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    // The mass-escape diagnostic agrees with its definition on the payload.
    let m1 = mass_escape(&a.solution, 1.0).unwrap();
    let m2 = mass_escape(&b.solution, 1.0).unwrap();
    assert_eq!(m1.to_bits(), m2.to_bits());
    println!("ACCEPTANCE 9 (determinism): PASS");
}
