use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnhybrid::bounds::{absorbing_bounds, hybrid_error_bound, pn_error_bound, BoundInputs, Scheme};
use pnhybrid::harness::config::{parse_config, RunSpec};
use pnhybrid::harness::fit::fit_and_check;
use pnhybrid::harness::manufactured::manufactured;
use pnhybrid::harness::measure::{measure, reference};
use pnhybrid::harness::plot::{emit_plot, PlotKind};
use pnhybrid::harness::sweep::{read_csv, run_sweep, to_csv_string, SweepRow};
use pnhybrid::harness::{full_audit, SolverKind};
use pnhybrid::hybrid::run_hybrid;
use pnhybrid::transport::solve_pn;
use pnhybrid::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pnhybrid",
    version,
    about = "P_N and hybrid transport solvers with error-bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized audits.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Monolithic P_N solve of the configured problem.
    SolvePn,
    /// Hybrid solve of the configured problem.
    SolveHybrid,
    /// Run the configured sweep and write sweep.csv.
    Sweep,
    /// Run the sweep and fit one constant per family against the bounds.
    VerifyBounds,
    /// Inequality, operator, kernel and coupling audits.
    Audit,
    /// Render a sweep CSV as SVG and a text table.
    Plot {
        /// Sweep CSV; defaults to OUT/sweep.csv.
        csv: Option<PathBuf>,
        /// Horizontal axis: n, dt, eps or sigma_t.
        #[arg(long)]
        kind: Option<PlotKind>,
    },
}

enum Failure {
    Usage(Error),
    Conformance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    spec: RunSpec,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli, need_config: bool) -> Result<Self> {
        let mut spec = match &cli.config {
            Some(p) => parse_config(p)?,
            None if need_config => {
                return Err(Error::Config {
                    line: None,
                    msg: "--config is required".into(),
                })
            }
            None => RunSpec::default(),
        };
        if let Some(j) = cli.jobs {
            spec.jobs = Some(j);
        }
        if let Some(s) = cli.seed {
            spec.seed = s;
        }
        let out = cli
            .out
            .clone()
            .or_else(|| spec.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self { spec, out })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn lines(rows: Vec<String>) -> String {
    rows.into_iter().map(|r| r + "\n").collect()
}

fn schedule(spec: &RunSpec) -> Result<Vec<f64>> {
    let m = pnhybrid::transport::schedule_steps(spec.params.t_final, spec.params.dt)?;
    Ok((1..=m)
        .map(|i| spec.params.t_final * i as f64 / m as f64)
        .collect())
}

fn print_error(ctx: &Ctx, solver: SolverKind) -> Result<()> {
    let spec = &ctx.spec;
    let m = manufactured(&spec.problem, &spec.params)?;
    let r = if m.exact.is_none() && solver != SolverKind::Diffusion {
        Some(reference(
            &m,
            spec.oracle.reference_degree(spec.n, m.data_degree),
            spec.oracle.richardson,
        )?)
    } else {
        None
    };
    let meas = measure(&m, solver, spec.n, &spec.oracle, r.as_ref())?;
    println!(
        "error at T: {:.6e} (oracle uncertainty {:.3e}{})",
        meas.error,
        meas.uncertainty,
        if meas.flagged() { ", flagged" } else { "" }
    );
    Ok(())
}

fn solve_pn_cmd(ctx: &Ctx) -> Outcome {
    let spec = &ctx.spec;
    let m = manufactured(&spec.problem, &spec.params)?;
    let traj = solve_pn(&m.spec, spec.n, &schedule(spec)?)?;
    let path = ctx.write("pn_trajectory.csv", &lines(traj.diagnostics_csv()))?;
    println!(
        "P_{} on {}: final norm {:.6e}",
        spec.n,
        spec.problem,
        traj.norms.last().unwrap_or(&0.0)
    );
    print_error(ctx, SolverKind::Pn)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn solve_hybrid_cmd(ctx: &Ctx) -> Outcome {
    let spec = &ctx.spec;
    let m = manufactured(&spec.problem, &spec.params)?;
    let n_ref = spec.oracle.reference_degree(spec.n, m.data_degree);
    let run = run_hybrid(&m.spec, spec.n, spec.oracle.polar_order(&m, n_ref), None)?;
    let path = ctx.write(
        "hybrid_intervals.csv",
        &lines(run.diagnostics.to_csv_rows()),
    )?;
    println!(
        "hybrid N={} on {}: {} intervals, final norm {:.6e}",
        spec.n,
        spec.problem,
        run.diagnostics.intervals.len(),
        run.total.l2_norm()
    );
    print_error(ctx, SolverKind::Hybrid)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep_rows(ctx: &Ctx) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(&ctx.spec)?;
    let path = ctx.write("sweep.csv", &to_csv_string(&rows)?)?;
    let flagged = rows.iter().filter(|r| r.flagged()).count();
    println!(
        "{} rows ({} flagged) -> {}",
        rows.len(),
        flagged,
        path.display()
    );
    if let Some(kind) = ctx.spec.plot {
        write_plot(ctx, &rows, kind)?;
    }
    Ok(rows)
}

fn write_plot(ctx: &Ctx, rows: &[SweepRow], kind: PlotKind) -> Result<()> {
    let p = emit_plot(rows, kind)?;
    let svg = ctx.write("plot.svg", &p.svg)?;
    ctx.write("plot.txt", &p.table)?;
    print!("{}", p.table);
    println!("wrote {}", svg.display());
    Ok(())
}

fn verify_bounds_cmd(ctx: &Ctx) -> Outcome {
    let spec = &ctx.spec;
    let m = manufactured(&spec.problem, &spec.params)?;
    let inp = BoundInputs::from_spec(&m.spec, spec.params.s, spec.n)?;
    let scheme = if spec.solver == SolverKind::Hybrid {
        Scheme::Hybrid
    } else {
        Scheme::Pn
    };
    let rep = match (scheme, inp.sigma_a == 0.0) {
        (Scheme::Pn, true) => pn_error_bound(&inp)?,
        (Scheme::Hybrid, true) => hybrid_error_bound(&inp)?,
        (s, false) => absorbing_bounds(&inp, s)?,
    };
    print!("{}", rep.to_text());
    ctx.write("bound.csv", &lines(rep.to_csv_rows()))?;
    if spec.sweep.is_empty() {
        return Ok(());
    }
    let rows = sweep_rows(ctx)?;
    let conf = fit_and_check(&rows)?;
    let text = conf.to_text();
    ctx.write("conformance.txt", &text)?;
    print!("{text}");
    if conf.passed() {
        Ok(())
    } else {
        Err(Failure::Conformance("bound conformance failed".into()))
    }
}

fn audit_cmd(ctx: &Ctx) -> Outcome {
    let report = full_audit(ctx.spec.seed);
    let text = report.to_text();
    print!("{text}");
    if ctx.out != Path::new("out") || ctx.spec.out_dir.is_some() {
        ctx.write("audit.txt", &text)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Conformance("audit found violations".into()))
    }
}

fn plot_cmd(ctx: &Ctx, csv: Option<&Path>, kind: Option<PlotKind>) -> Outcome {
    let path = csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out.join("sweep.csv"));
    let file = fs::File::open(&path).map_err(|e| Error::Config {
        line: None,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    let rows = read_csv(file)?;
    write_plot(ctx, &rows, kind.or(ctx.spec.plot).unwrap_or(PlotKind::N))?;
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::SolvePn => solve_pn_cmd(&Ctx::new(cli, true)?),
        Command::SolveHybrid => solve_hybrid_cmd(&Ctx::new(cli, true)?),
        Command::Sweep => sweep_rows(&Ctx::new(cli, true)?)
            .map(|_| ())
            .map_err(Failure::from),
        Command::VerifyBounds => verify_bounds_cmd(&Ctx::new(cli, true)?),
        Command::Audit => audit_cmd(&Ctx::new(cli, false)?),
        Command::Plot { csv, kind } => plot_cmd(&Ctx::new(cli, false)?, csv.as_deref(), *kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Conformance(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
