//! Command-line entry points with a stable exit-code contract:
//! 0 success, 1 operational error, 2 verdict/threshold failure, 3 solver
//! non-convergence.

use crate::config::{Bundle, FileConfig, Resolved};
use crate::discretization::{assemble_stencil, TorusGrid};
use crate::harness::{
    emit_plot, run_study, weak_convergence_probe, EpsRatio, StudyError,
};
use crate::kernels::validate_kernel;
use crate::solvers::{init_symbol, solve_effective, solve_epsilon, CgParams};
use crate::coefficients::mean_lambda;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OPERATIONAL: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "LEVYLAB_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "levylab",
    about = "Homogenization laboratory for heavy-tailed nonlocal operators",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Path to the TOML (or JSON) run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides config and LEVYLAB_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tabular output encoding for solve artifacts.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Rayon thread count (0 = default).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the sampling validators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print progress to stderr.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every declared kernel hypothesis and write the compliance report.
    ValidateKernel,
    /// Solve the eps-problem for one eps (from --eps or the first schedule entry).
    SolveEps {
        /// Scale parameter as a rational, e.g. 1/4.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Solve the effective fractional problem on the finest schedule grid.
    SolveEff,
    /// Run the full eps-sweep convergence study.
    Study,
    /// Tabulate the weak-convergence probe ratios.
    ProbeWeak,
}

pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        if threads > 0 {
            // Ignore the error when a pool already exists (tests, repeat calls).
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config <path> is required");
            return EXIT_OPERATIONAL;
        }
    };
    let mut config = match FileConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    if let Some(seed) = cli.seed {
        config.validation.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var(OUT_DIR_ENV).ok().map(PathBuf::from))
        .or_else(|| config.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory {}: {e}", out_dir.display());
        return EXIT_OPERATIONAL;
    }
    let resolved = match config.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    let ctx = Ctx {
        config,
        out_dir,
        format: cli.format.unwrap_or(FormatArg::All),
        verbose: cli.verbose,
    };
    match resolved {
        Resolved::D1(bundle) => dispatch(&ctx, &cli.command, bundle),
        Resolved::D2(bundle) => dispatch(&ctx, &cli.command, bundle),
    }
}

struct Ctx {
    config: FileConfig,
    out_dir: PathBuf,
    format: FormatArg,
    verbose: u8,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn say(&self, msg: &str) {
        if self.verbose > 0 {
            eprintln!("levylab: {msg}");
        }
    }
}

fn dispatch<const D: usize>(ctx: &Ctx, command: &Command, bundle: Bundle<D>) -> i32 {
    match command {
        Command::ValidateKernel => cmd_validate_kernel(ctx, bundle),
        Command::SolveEps { eps } => cmd_solve_eps(ctx, bundle, eps.as_deref()),
        Command::SolveEff => cmd_solve_eff(ctx, bundle),
        Command::Study => cmd_study(ctx, bundle),
        Command::ProbeWeak => cmd_probe_weak(ctx, bundle),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(value).unwrap()))
}

fn cmd_validate_kernel<const D: usize>(ctx: &Ctx, bundle: Bundle<D>) -> i32 {
    let report = validate_kernel(&bundle.kernel, &bundle.settings.validation);
    let mut doc = serde_json::to_value(&report).unwrap();
    doc.as_object_mut()
        .unwrap()
        .insert("config".into(), ctx.config.echo());
    let path = ctx.path("kernel_report.json");
    if let Err(e) = write_json(&path, &doc) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_OPERATIONAL;
    }
    ctx.say(&format!("validation report written to {}", path.display()));
    if report.pass {
        println!("kernel `{}`: all hypothesis verdicts pass", report.kernel);
        EXIT_OK
    } else {
        let failed: Vec<&str> = report
            .failed_verdicts()
            .iter()
            .map(|v| v.name.as_str())
            .collect();
        println!(
            "kernel `{}`: failed verdicts: {}",
            report.kernel,
            failed.join(", ")
        );
        EXIT_VERDICT
    }
}

fn cmd_solve_eps<const D: usize>(ctx: &Ctx, bundle: Bundle<D>, eps_flag: Option<&str>) -> i32 {
    let settings = &bundle.settings;
    let eps = match eps_flag {
        Some(s) => match EpsRatio::parse(s) {
            Ok(e) => e,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_OPERATIONAL;
            }
        },
        None => settings.eps_schedule[0],
    };
    let n = match settings.grid_points(eps) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    let run = || -> Result<(crate::solvers::ResolventSolveResult<f64, D>, TorusGrid<f64, D>), StudyError> {
        let grid = TorusGrid::<f64, D>::new(n, settings.side)?;
        let f = settings.rhs.build(grid);
        let stencil = assemble_stencil(
            grid,
            &bundle.kernel,
            &bundle.coefficient,
            eps.value(),
            &settings.assembly.into(),
        )?;
        let cg = CgParams {
            tol: settings.cg_tol,
            max_iter: settings.cg_max_iter,
            precondition: settings.precondition,
        };
        Ok((solve_epsilon(&stencil, settings.m, &f, &cg)?, grid))
    };
    let (res, _grid) = match run() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    let field_path = ctx.path(&format!("u_eps_{}_{}.bin", eps.num, eps.den));
    if let Err(e) = res.solution.write_binary(&field_path, eps.value()) {
        eprintln!("error: cannot write {}: {e}", field_path.display());
        return EXIT_OPERATIONAL;
    }
    if matches!(ctx.format, FormatArg::Csv | FormatArg::All) {
        let _ = res
            .solution
            .write_csv(&ctx.path(&format!("u_eps_{}_{}.csv", eps.num, eps.den)));
    }
    let sidecar = serde_json::json!({
        "eps": eps.to_string(),
        "n": n,
        "iterations": res.iterations,
        "converged": res.converged,
        "residual": res.residual,
        "c1_ratio": res.c1_ratio,
        "c2_ratio": res.c2_ratio,
        "energy": res.energy,
        "config": ctx.config.echo(),
    });
    let sidecar_path = ctx.path(&format!("u_eps_{}_{}.json", eps.num, eps.den));
    if let Err(e) = write_json(&sidecar_path, &sidecar) {
        eprintln!("error: cannot write {}: {e}", sidecar_path.display());
        return EXIT_OPERATIONAL;
    }
    println!(
        "eps = {eps}: {} iterations, residual {:.3e}, c1 {:.6}",
        res.iterations, res.residual, res.c1_ratio
    );
    if res.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    }
}

fn cmd_solve_eff<const D: usize>(ctx: &Ctx, bundle: Bundle<D>) -> i32 {
    let settings = &bundle.settings;
    // Finest grid in the schedule resolves the effective field best.
    let finest = settings
        .eps_schedule
        .iter()
        .copied()
        .max_by(|a, b| a.den.cmp(&b.den).then(b.num.cmp(&a.num)));
    let eps = match finest {
        Some(e) => e,
        None => {
            eprintln!("error: empty eps schedule");
            return EXIT_OPERATIONAL;
        }
    };
    let run = || -> Result<crate::discretization::DiscreteField<f64, D>, StudyError> {
        let n = settings.grid_points(eps)?;
        let grid = TorusGrid::<f64, D>::new(n, settings.side)?;
        let f = settings.rhs.build(grid);
        let lambda_bar = mean_lambda(&bundle.coefficient, settings.n_quad_mean);
        let sym = init_symbol(
            bundle.kernel.alpha,
            lambda_bar,
            &bundle.kernel.angular,
            settings.n_angular,
        )?;
        Ok(solve_effective(grid, settings.m, &f, &sym)?)
    };
    let u = match run() {
        Ok(u) => u,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    let path = ctx.path("u_effective.bin");
    if let Err(e) = u.write_binary(&path, 0.0) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_OPERATIONAL;
    }
    if matches!(ctx.format, FormatArg::Csv | FormatArg::All) {
        let _ = u.write_csv(&ctx.path("u_effective.csv"));
    }
    let sidecar = serde_json::json!({
        "n": u.grid.n,
        "norm": u.norm_l2(),
        "config": ctx.config.echo(),
    });
    if let Err(e) = write_json(&ctx.path("u_effective.json"), &sidecar) {
        eprintln!("error: cannot write sidecar: {e}");
        return EXIT_OPERATIONAL;
    }
    println!("effective solution written ({} nodes per axis)", u.grid.n);
    EXIT_OK
}

fn cmd_study<const D: usize>(ctx: &Ctx, bundle: Bundle<D>) -> i32 {
    ctx.say("running study");
    let report = match run_study(
        &bundle.kernel,
        &bundle.coefficient,
        &bundle.settings,
        ctx.config.echo(),
    ) {
        Ok(r) => r,
        Err(StudyError::KernelRejected { failed, report }) => {
            // The compliance report is still an artifact.
            let _ = write_json(
                &ctx.path("kernel_report.json"),
                &serde_json::to_value(&*report).unwrap(),
            );
            println!("kernel rejected by validation: {failed}");
            return EXIT_VERDICT;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    if let Err(e) = report.write_json(&ctx.path("report.json")) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_OPERATIONAL;
    }
    if let Err(e) = report.write_csv(&ctx.path("report.csv")) {
        eprintln!("error: cannot write csv: {e}");
        return EXIT_OPERATIONAL;
    }
    if let Err(e) = emit_plot(&report, &ctx.path("report.svg")) {
        eprintln!("error: cannot write plot: {e}");
        return EXIT_OPERATIONAL;
    }
    for r in &report.records {
        println!(
            "eps = {:>6}: N = {:>5}, error = {:.6e}, iters = {:>5}, c1 = {:.6}{}",
            r.eps,
            r.n,
            r.error,
            r.iterations,
            r.c1_ratio,
            if r.converged { "" } else { "  [not converged]" }
        );
    }
    if let Some(fit) = &report.fit {
        println!("fitted log-log slope: {:.4} (residual {:.2e})", fit.slope, fit.residual);
    } else {
        println!("{}", report.fit_note);
    }
    let all_converged = report.all_converged();
    let below_threshold = match bundle.settings.acceptance_threshold {
        Some(thr) => report.final_error().map(|e| e <= thr).unwrap_or(false),
        None => true,
    };
    if all_converged && below_threshold {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

fn cmd_probe_weak<const D: usize>(ctx: &Ctx, bundle: Bundle<D>) -> i32 {
    if ctx.config.probe.is_none() {
        eprintln!("error: probe-weak needs a [probe] section (delta, x_halfwidth, z_max)");
        return EXIT_OPERATIONAL;
    }
    let settings = &bundle.settings;
    let lambda_bar = mean_lambda(&bundle.coefficient, settings.n_quad_mean);
    let eps_values: Vec<f64> = settings.eps_schedule.iter().map(|e| e.value()).collect();
    let rows = match weak_convergence_probe(
        &bundle.kernel,
        &bundle.coefficient,
        lambda_bar,
        &eps_values,
        &settings.probe,
    ) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OPERATIONAL;
        }
    };
    let doc = serde_json::json!({
        "lambda_bar": lambda_bar,
        "rows": rows,
        "config": ctx.config.echo(),
    });
    if let Err(e) = write_json(&ctx.path("weak_probe.json"), &doc) {
        eprintln!("error: cannot write probe table: {e}");
        return EXIT_OPERATIONAL;
    }
    for row in &rows {
        println!("eps = {:>8.5}: ratio = {:.8}{}", row.eps, row.ratio, if row.sentinel { " (sentinel)" } else { "" });
    }
    EXIT_OK
}
