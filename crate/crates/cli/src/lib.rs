//! Command-line driver: binds matrix files and structure choices to solver
//! runs and writes the standard artifact set (summary, traces, optimizer).

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eigopt::io::{
    self, build_structure, read_factors_json, read_inner_trace_csv, read_matrix_market,
    write_plot_data, write_results, Mode, RunArtifacts, RunSummary, SolverEcho,
    StructureSpecFile,
};
use eigopt::linalg::random::{dense_complex, Rng64};
use eigopt::linalg::{re_inner, EigEngine};
use eigopt::objective::{Objective, ObjectiveKind};
use eigopt::outer::{find_epsilon_star, NearnessProblem, OuterConfig};
use eigopt::rank1::inner_minimize;
use eigopt::solver::SolverConfig;
use eigopt::structure::FieldKind;
use eigopt::{Matrix64, StructureSpace64, TargetSelector64};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "eigopt",
    about = "Structured eigenvalue optimization: pseudospectral extrema and matrix nearness",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Structured eps-pseudospectral abscissa at fixed eps.
    Psa(SolveArgs),
    /// Structured eps-pseudospectral radius at fixed eps.
    Psr(SolveArgs),
    /// Structured distance to instability (smallest eps with abscissa 0).
    Dist2inst(SolveArgs),
    /// Structured distance to singularity.
    Dist2sing(SolveArgs),
    /// Run the structure-projection invariant suite on a matrix.
    ProjectCheck(ProjectCheckArgs),
    /// Convert an inner-trace CSV into plot-ready monotone-decay columns.
    TracePlotData(TracePlotArgs),
}

#[derive(Args)]
pub struct SolveArgs {
    /// Matrix Market file with the base matrix A.
    #[arg(long)]
    pub matrix: PathBuf,

    /// Structure class: sparsity-of-input | toeplitz | hankel | hamiltonian
    /// | range-corange | full.
    #[arg(long, default_value = "sparsity-of-input")]
    pub structure: String,

    /// Real-linear structure space (default).
    #[arg(long, conflicts_with = "complex")]
    pub real: bool,

    /// Complex-linear structure space.
    #[arg(long)]
    pub complex: bool,

    /// Range factor B (Matrix Market), for --structure range-corange.
    #[arg(long = "B")]
    pub b: Option<PathBuf>,

    /// Co-range factor C (Matrix Market), for --structure range-corange.
    #[arg(long = "C")]
    pub c: Option<PathBuf>,

    /// Perturbation size (psa/psr); initial guess for the nearness modes.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Target level for the nearness modes (default 0).
    #[arg(long)]
    pub r: Option<f64>,

    /// Objective: neg-real-part | real-part | modulus-squared |
    /// neg-modulus-squared | distance-to-point-squared:RE,IM.
    #[arg(long)]
    pub objective: Option<String>,

    /// Target eigenvalue: rightmost | leftmost | largest-modulus |
    /// smallest-modulus | closest-to:RE,IM.
    #[arg(long)]
    pub selector: Option<String>,

    #[arg(long)]
    pub h0: Option<f64>,

    #[arg(long)]
    pub theta: Option<f64>,

    #[arg(long)]
    pub tol_f: Option<f64>,

    #[arg(long)]
    pub tol_stat: Option<f64>,

    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Output directory for summary.json, traces and the optimizer.
    #[arg(long, default_value = "eigopt-out")]
    pub out_dir: PathBuf,

    /// factors.json from a previous run to warm-start the inner iteration.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,

    /// Seed for randomized harness components (unused by the solver).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ProjectCheckArgs {
    #[arg(long)]
    pub matrix: PathBuf,

    #[arg(long, default_value = "sparsity-of-input")]
    pub structure: String,

    #[arg(long, conflicts_with = "complex")]
    pub real: bool,

    #[arg(long)]
    pub complex: bool,

    #[arg(long = "B")]
    pub b: Option<PathBuf>,

    #[arg(long = "C")]
    pub c: Option<PathBuf>,

    /// Seed for the random test matrices.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of random test matrices.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Args)]
pub struct TracePlotArgs {
    /// inner_trace.csv produced by a solver run.
    pub trace: PathBuf,

    /// Output CSV (default: plot_data.csv next to the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the CLI; returns the process exit code
/// (0 converged, 2 partial/status-flagged, 1 error).
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successful exits.
            if e.use_stderr() {
                eprint!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Psa(args) => solve(Mode::Psa, args),
        Command::Psr(args) => solve(Mode::Psr, args),
        Command::Dist2inst(args) => solve(Mode::Dist2inst, args),
        Command::Dist2sing(args) => solve(Mode::Dist2sing, args),
        Command::ProjectCheck(args) => project_check(args),
        Command::TracePlotData(args) => trace_plot_data(args),
    }
}

fn field_of(real: bool, complex: bool) -> FieldKind {
    if complex && !real {
        FieldKind::ComplexLinear
    } else {
        FieldKind::RealLinear
    }
}

fn load_problem(
    matrix: &Path,
    structure: &str,
    field: FieldKind,
    b: &Option<PathBuf>,
    c: &Option<PathBuf>,
) -> Result<(Matrix64, StructureSpace64)> {
    let a = read_matrix_market::<f64>(matrix)
        .with_context(|| format!("reading {}", matrix.display()))?;
    if !a.is_square() {
        bail!("matrix must be square, got {}x{}", a.nrows(), a.ncols());
    }
    let spec = StructureSpecFile {
        kind: structure.to_string(),
        field: Some(field.name().to_string()),
        pattern: None,
        b: b.as_ref().map(|p| p.display().to_string()),
        c: c.as_ref().map(|p| p.display().to_string()),
    };
    let s = build_structure(&spec, &a, Path::new("."))
        .with_context(|| format!("building structure '{structure}'"))?;
    Ok((a, s))
}

fn default_objective(mode: Mode) -> (&'static str, &'static str) {
    match mode {
        Mode::Psa | Mode::Dist2inst => ("neg-real-part", "rightmost"),
        Mode::Psr => ("neg-modulus-squared", "largest-modulus"),
        Mode::Dist2sing => ("modulus-squared", "smallest-modulus"),
        Mode::FixedEps => ("neg-real-part", "rightmost"),
    }
}

/// Mode-specific headline value derived from the minimized functional.
fn result_value(mode: Mode, kind: &ObjectiveKind<f64>, f_star: f64, eps_star: Option<f64>) -> f64 {
    match mode {
        Mode::Psa => match kind {
            // alpha_eps = max Re lambda = -min(-Re lambda) = -f*.
            ObjectiveKind::NegRealPart => -f_star,
            _ => f_star,
        },
        Mode::Psr => match kind {
            // radius = sqrt(max |lambda|^2) = sqrt(-f*).
            ObjectiveKind::NegModulusSquared => (-f_star).max(0.0).sqrt(),
            _ => f_star,
        },
        Mode::Dist2inst | Mode::Dist2sing => eps_star.unwrap_or(f64::NAN),
        Mode::FixedEps => f_star,
    }
}

fn solve(mode: Mode, args: SolveArgs) -> Result<i32> {
    let field = field_of(args.real, args.complex);
    let (a, s) = load_problem(&args.matrix, &args.structure, field, &args.b, &args.c)?;
    let (obj_default, sel_default) = default_objective(mode);
    let kind = io::parse_objective_kind::<f64>(args.objective.as_deref().unwrap_or(obj_default))?;
    let selector: TargetSelector64 =
        io::parse_selector(args.selector.as_deref().unwrap_or(sel_default))?;
    let obj = Objective::new(kind, selector);

    let mut cfg = SolverConfig::<f64>::default();
    if let Some(v) = args.h0 {
        cfg.h0 = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.tol_f {
        cfg.tol_f = v;
    }
    if let Some(v) = args.tol_stat {
        cfg.tol_stat = v;
    }
    if let Some(v) = args.max_iter {
        cfg.max_iter = v;
    }

    let warm = match &args.warm_start {
        Some(p) => {
            let (u, v, _rho) = read_factors_json::<f64>(p)
                .with_context(|| format!("reading warm start {}", p.display()))?;
            Some((u, v))
        }
        None => None,
    };

    let engine = EigEngine::<f64>::default();
    let mut summary = RunSummary {
        mode: mode.name().to_string(),
        matrix: args.matrix.display().to_string(),
        structure: s.kind_name().to_string(),
        field: s.field().name().to_string(),
        objective: args.objective.clone().unwrap_or_else(|| obj_default.to_string()),
        selector: args.selector.clone().unwrap_or_else(|| sel_default.to_string()),
        n: a.nrows(),
        structure_dim: s.dim(),
        eps: None,
        eps_star: None,
        r: None,
        f_star: f64::NAN,
        lambda_re: f64::NAN,
        lambda_im: f64::NAN,
        result_value: f64::NAN,
        n_eig: 0,
        status: String::new(),
        monotone: true,
        stationarity: None,
        tangent_residual: None,
        solver: SolverEcho::from_config(&cfg),
    };

    if mode.is_nearness() {
        let r = args.r.unwrap_or(0.0);
        let eps0 = args.eps.unwrap_or_else(|| {
            // Scale-aware default initial guess for the growth phase.
            0.01 * (1.0 + a.frobenius_norm() / (a.nrows() as f64).sqrt())
        });
        let outer_cfg = OuterConfig {
            inner: cfg.clone(),
            warm_start: args.warm_start.is_none(),
            ..Default::default()
        };
        let problem = NearnessProblem {
            a: &a,
            s: &s,
            obj,
            r,
            eps0,
            bracket: None,
        };
        let res = find_epsilon_star(&problem, &outer_cfg, &engine)?;
        summary.r = Some(r);
        summary.eps_star = Some(res.eps_star);
        summary.f_star = res.phi_at_star;
        summary.lambda_re = res.inner.triplet.lambda.re;
        summary.lambda_im = res.inner.triplet.lambda.im;
        summary.result_value = result_value(mode, &kind, res.phi_at_star, Some(res.eps_star));
        summary.n_eig = res.n_eig_total;
        summary.status = if res.converged {
            "converged".to_string()
        } else {
            "max-outer-iterations".to_string()
        };
        summary.monotone = res.inner.monotone;
        summary.stationarity = res.inner.stationarity;
        summary.tangent_residual = res.inner.tangent_residual;
        summary.solver.tol_r = Some(outer_cfg.tol_r);
        summary.solver.tol_eps = Some(outer_cfg.tol_eps);
        summary.solver.warm_start = Some(outer_cfg.warm_start);

        let e_star = res.inner.e_star.clone();
        write_results(
            &args.out_dir,
            &RunArtifacts {
                summary: &summary,
                inner_trace: &res.inner.trace,
                outer_trace: Some(&res.trace),
                e_star: Some(&e_star),
                factors: Some((&res.inner.pert.u, &res.inner.pert.v, res.inner.pert.rho)),
            },
        )?;
        println!(
            "{}: eps* = {:.9e}, phi(eps*) = {:.3e}, n_eig = {}, status = {} -> {}",
            mode.name(),
            res.eps_star,
            res.phi_at_star,
            res.n_eig_total,
            summary.status,
            args.out_dir.display()
        );
        Ok(if res.converged { 0 } else { 2 })
    } else {
        let eps = args
            .eps
            .ok_or_else(|| anyhow!("mode {} requires --eps", mode.name()))?;
        let res = inner_minimize(
            &a,
            eps,
            &s,
            &obj,
            &cfg,
            &engine,
            warm.as_ref().map(|(u, v)| (u.as_slice(), v.as_slice())),
        )?;
        summary.eps = Some(eps);
        summary.f_star = res.f_star;
        summary.lambda_re = res.triplet.lambda.re;
        summary.lambda_im = res.triplet.lambda.im;
        summary.result_value = result_value(mode, &kind, res.f_star, None);
        summary.n_eig = res.n_eig;
        summary.status = res.status.name().to_string();
        summary.monotone = res.monotone;
        summary.stationarity = res.stationarity;
        summary.tangent_residual = res.tangent_residual;

        write_results(
            &args.out_dir,
            &RunArtifacts {
                summary: &summary,
                inner_trace: &res.trace,
                outer_trace: None,
                e_star: Some(&res.e_star),
                factors: Some((&res.pert.u, &res.pert.v, res.pert.rho)),
            },
        )?;
        println!(
            "{}: value = {:.12e} (f* = {:.12e}, lambda = {:.9e} {:+.9e}i), n_eig = {}, status = {} -> {}",
            mode.name(),
            summary.result_value,
            res.f_star,
            res.triplet.lambda.re,
            res.triplet.lambda.im,
            res.n_eig,
            summary.status,
            args.out_dir.display()
        );
        Ok(if res.status.is_partial() { 2 } else { 0 })
    }
}

fn project_check(args: ProjectCheckArgs) -> Result<i32> {
    let field = field_of(args.real, args.complex);
    let (a, s) = load_problem(&args.matrix, &args.structure, field, &args.b, &args.c)?;
    let n = a.nrows();
    let mut rng = Rng64::seeded(args.seed);
    let tol = 1e-12;
    let mut worst_idem = 0.0f64;
    let mut worst_adj = 0.0f64;
    let mut worst_expand = 0.0f64;
    let mut members = true;
    for _ in 0..args.samples {
        let z = Matrix64::Dense(dense_complex::<f64>(n, n, &mut rng));
        let w = Matrix64::Dense(dense_complex::<f64>(n, n, &mut rng));
        let pz = s.project(&z)?;
        let ppz = s.project(&pz)?;
        let mut diff = ppz.to_dense();
        diff.axpy(eigopt::C64::new(-1.0, 0.0), &pz.to_dense());
        worst_idem = worst_idem.max(diff.max_abs());
        let pw = s.project(&w)?;
        worst_adj = worst_adj.max((re_inner(&pz, &w)? - re_inner(&z, &pw)?).abs());
        let expand = pz.frobenius_norm() - z.frobenius_norm();
        worst_expand = worst_expand.max(expand);
        members &= s.is_member(&pz, tol);
    }
    let line = |name: &str, ok: bool, detail: String| {
        println!("{} {:14} {}", if ok { "PASS" } else { "FAIL" }, name, detail);
        ok
    };
    let mut all = true;
    all &= line("idempotency", worst_idem <= tol, format!("max defect {worst_idem:.2e}"));
    all &= line("self-adjoint", worst_adj <= 1e-11, format!("max defect {worst_adj:.2e}"));
    all &= line(
        "nonexpansive",
        worst_expand <= tol,
        format!("max norm growth {worst_expand:.2e}"),
    );
    all &= line("membership", members, format!("{} samples", args.samples));
    println!(
        "structure {} ({}), n = {}, dim = {}",
        s.kind_name(),
        s.field().name(),
        n,
        s.dim()
    );
    Ok(if all { 0 } else { 2 })
}

fn trace_plot_data(args: TracePlotArgs) -> Result<i32> {
    let rows = read_inner_trace_csv(&args.trace)?;
    let out = args.out.unwrap_or_else(|| {
        args.trace
            .parent()
            .unwrap_or(Path::new("."))
            .join("plot_data.csv")
    });
    write_plot_data(&out, &rows)?;
    let accepted = rows.iter().filter(|r| r.accepted).count();
    println!(
        "wrote {} accepted-step rows ({} trials total) -> {}",
        accepted,
        rows.len(),
        out.display()
    );
    Ok(0)
}
