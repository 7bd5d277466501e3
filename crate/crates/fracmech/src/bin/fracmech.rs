//! Command-line front end: derivation, constraint analysis, numeric solve,
//! invariant checks and a classical-limit study for fractional constrained
//! variational problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracmech::canonical::derive_system;
use fracmech::constraints::run_constraint_algorithm;
use fracmech::error::{Error, Result};
use fracmech::fracnum::{gamma, left_rl_apply, FracOrder, SampledFunction, UniformGrid};
use fracmech::fracsolve::{
    assemble, check_constraint_preservation, reduce_for_numerics, solve, trajectory_csv,
    Trajectory,
};
use fracmech::problem::{problem_from_file, ProblemFile};
use fracmech::report::{constraints_section, derivation_section, Report, SolveSection};
use fracmech::symcore::{rat_to_f64, ratio};
use fracmech::varproblem::ProblemSpec;

#[derive(Parser)]
#[command(name = "fracmech", about = "Fractional constrained variational problems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct Common {
    /// Problem file (JSON)
    problem: PathBuf,
    /// Override the fractional order
    #[arg(long)]
    alpha: Option<String>,
    /// Output directory for reports
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Derive momenta, Hamiltonian and canonical equations
    Derive(Common),
    /// Run the constraint-consistency algorithm
    Constraints(Common),
    /// Discretize and solve; writes a trajectory CSV
    Solve {
        #[command(flatten)]
        common: Common,
        /// Grid intervals
        #[arg(long, default_value_t = 256)]
        m: usize,
    },
    /// Re-run invariant suites on this problem
    Check(Common),
    /// Sweep alpha toward 1 and tabulate deviation from the classical solve
    #[command(name = "limit-study")]
    LimitStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 128)]
        m: usize,
    },
}

fn load_spec(common: &Common) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(&common.problem)
        .map_err(|e| Error::Parse(format!("{}: {e}", common.problem.display())))?;
    let mut file: ProblemFile = serde_json::from_str(&text)?;
    if let Some(alpha) = &common.alpha {
        FracOrder::parse(alpha)?.check_numeric()?;
        file.alpha = alpha.clone();
    }
    problem_from_file(&file)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_report(common: &Common, spec: &ProblemSpec, report: &Report) -> Result<PathBuf> {
    let path = common.out.join(format!("{}.report.json", spec.name));
    write_atomic(&path, &report.to_json()?)?;
    Ok(path)
}

fn cmd_derive(common: &Common) -> Result<()> {
    let spec = load_spec(common)?;
    let (_, sys) = derive_system(&spec)?;
    let mut report = Report::new(&spec);
    report.derivation = Some(derivation_section(&spec, &sys)?);
    let path = write_report(common, &spec, &report)?;
    match common.format {
        Format::Json => print!("{}", report.to_json()?),
        Format::Text => {
            let d = report.derivation.as_ref().unwrap();
            println!("problem {} (alpha = {})", report.name, report.alpha);
            println!("hessian rank: {}", d.hessian_rank);
            for m in &d.momenta {
                println!("momentum {} = {}", m.symbol, m.expr);
            }
            println!("H = {}", d.hamiltonian);
            for id in &d.momentum_identities {
                println!("identity {} = {}", id.symbol, id.expr);
            }
            for p in &d.primary_constraints {
                println!("primary constraint: {} = 0", p);
            }
            for e in &d.equations {
                println!("[{}] {} = {}", e.kind, e.lhs, e.rhs);
            }
            for r in &d.reduced_equations {
                println!("reduced: {r}");
            }
            if common.verbose {
                println!("report written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn cmd_constraints(common: &Common) -> Result<()> {
    let spec = load_spec(common)?;
    let (_, sys) = derive_system(&spec)?;
    let creport = run_constraint_algorithm(&sys, &spec)?;
    let mut report = Report::new(&spec);
    report.constraints = Some(constraints_section(&creport));
    let path = write_report(common, &spec, &report)?;
    match common.format {
        Format::Json => print!("{}", report.to_json()?),
        Format::Text => {
            let c = report.constraints.as_ref().unwrap();
            println!("problem {} (alpha = {})", report.name, report.alpha);
            println!(
                "{} primary, {} secondary, closed = {}, passes = {}",
                c.primary.len(),
                c.secondary.len(),
                c.closed,
                c.passes
            );
            for e in c.primary.iter().chain(&c.secondary) {
                println!("{} [gen {}]: {} = 0", e.class, e.generation, e.expr);
            }
            for m in &c.multiplier_values {
                println!("{} = {}", m.symbol, m.expr);
            }
            if common.verbose {
                for line in &c.log {
                    println!("  {line}");
                }
                println!("report written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn run_solve(spec: &ProblemSpec, m: usize) -> Result<(Trajectory, Vec<String>, Option<f64>)> {
    let (_, sys) = derive_system(spec)?;
    let creport = run_constraint_algorithm(&sys, spec)?;
    let num = reduce_for_numerics(&sys, &creport)?;
    let grid = UniformGrid::new(rat_to_f64(&spec.a), rat_to_f64(&spec.b), m)?;
    let ds = assemble(&num, spec, &grid)?;
    let traj = solve(&ds, &num)?;
    let violation = if creport.constraints.is_empty() {
        None
    } else {
        Some(check_constraint_preservation(&traj, &creport, &sys, spec)?)
    };
    // declared variables first, then the remaining series sorted by name
    let mut order: Vec<String> = spec
        .variables
        .iter()
        .filter(|v| traj.series.contains_key(*v))
        .cloned()
        .collect();
    for name in traj.series.keys() {
        if !order.contains(name) {
            order.push(name.clone());
        }
    }
    Ok((traj, order, violation))
}

fn cmd_solve(common: &Common, m: usize) -> Result<()> {
    if !(2..=65536).contains(&m) {
        return Err(Error::Spec(format!("--m must lie in [2, 65536], got {m}")));
    }
    let spec = load_spec(common)?;
    let (traj, order, violation) = run_solve(&spec, m)?;
    let csv = trajectory_csv(&traj, &order)?;
    let csv_path = common.out.join(format!("{}.trajectory.csv", spec.name));
    write_atomic(&csv_path, &csv)?;
    let mut report = Report::new(&spec);
    report.solve = Some(SolveSection {
        m,
        alpha: spec.alpha.render(),
        fields: order.clone(),
        residual: traj.residual,
        constraint_violation: violation,
        trajectory_file: csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    });
    write_report(common, &spec, &report)?;
    match common.format {
        Format::Json => print!("{}", report.to_json()?),
        Format::Text => {
            println!(
                "solved {} at alpha = {}, m = {}: max residual {:.3e}",
                spec.name,
                spec.alpha.render(),
                m,
                traj.residual
            );
            if let Some(v) = violation {
                println!("max constraint violation {v:.3e}");
            }
            println!("trajectory written to {}", csv_path.display());
        }
    }
    Ok(())
}

fn cmd_check(common: &Common) -> Result<()> {
    let spec = load_spec(common)?;
    let mut ok = true;
    let mut verdict = |name: &str, pass: bool, detail: String| {
        println!("{}: {name} ({detail})", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    // operator convergence: GL derivative of t^2 at alpha = 1/2
    let alpha = FracOrder::new(ratio(1, 2))?;
    let mut errs = Vec::new();
    for m in [64usize, 128, 256] {
        let grid = UniformGrid::new(0.0, 1.0, m)?;
        let f = SampledFunction::from_fn(grid, |t| t * t);
        let d = left_rl_apply(&f, &alpha)?;
        let mut emax = 0.0f64;
        for k in 1..m {
            let t = grid.node(k);
            emax = emax.max((d.values[k] - 2.0 / gamma(2.5) * t.powf(1.5)).abs());
        }
        errs.push(emax);
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    verdict(
        "operator convergence",
        ratios.iter().all(|r| (1.6..=2.4).contains(r)),
        format!("error ratios {ratios:.3?}"),
    );

    // bracket algebra on this problem's canonical pairs
    let (_, sys) = derive_system(&spec)?;
    let mut bracket_ok = true;
    for var in &spec.variables {
        let q = fracmech::symcore::QuadForm::from_lin(fracmech::symcore::LinExpr::from_atom(
            fracmech::symcore::Atom::coord(var),
        ));
        let p = fracmech::symcore::QuadForm::from_lin(fracmech::symcore::LinExpr::from_atom(
            fracmech::symcore::Atom::momentum(var, 0, fracmech::symcore::OpSide::Left),
        ));
        let qp = fracmech::canonical::poisson_bracket(&q, &p)?;
        let one = fracmech::symcore::QuadForm::from_lin(fracmech::symcore::LinExpr::constant(
            fracmech::symcore::rat(1),
        ));
        bracket_ok &= fracmech::symcore::equal_quad(&qp, &one);
        let qh = fracmech::canonical::poisson_bracket(&q, &sys.hamiltonian)?;
        let hq = fracmech::canonical::poisson_bracket(&sys.hamiltonian, &q)?;
        bracket_ok &= fracmech::symcore::equal_quad(
            &qh,
            &hq.scale(&fracmech::symcore::rat(-1)),
        );
    }
    verdict("bracket algebra", bracket_ok, format!("{} pairs", spec.variables.len()));

    // constraint preservation on a small solve
    let creport = run_constraint_algorithm(&sys, &spec)?;
    if creport.constraints.is_empty() {
        verdict("constraint preservation", true, "no constraints".into());
    } else {
        let (traj, _, _) = run_solve(&spec, 64)?;
        let v = check_constraint_preservation(&traj, &creport, &sys, &spec)?;
        verdict("constraint preservation", v <= 1e-8, format!("max violation {v:.3e}"));
    }

    if ok {
        Ok(())
    } else {
        Err(Error::Evaluation("one or more invariant checks failed".into()))
    }
}

fn cmd_limit_study(common: &Common, m: usize) -> Result<()> {
    let spec = load_spec(common)?;
    let mut classical = spec.clone();
    classical.alpha = FracOrder::parse("1")?;
    classical.beta = FracOrder::parse("1")?;
    let (base, _, _) = run_solve(&classical, m)?;

    let mut csv = String::from("alpha,max_deviation\n");
    for alpha_s in ["0.7", "0.8", "0.9", "0.99"] {
        let mut frac = spec.clone();
        frac.alpha = FracOrder::parse(alpha_s)?;
        frac.beta = frac.alpha.clone();
        let (traj, _, _) = run_solve(&frac, m)?;
        let mut dev = 0.0f64;
        for var in &spec.variables {
            let (Some(a), Some(b)) = (traj.series.get(var), base.series.get(var)) else {
                continue;
            };
            for (x, y) in a.iter().zip(b) {
                dev = dev.max((x - y).abs());
            }
        }
        csv.push_str(&format!("{alpha_s},{dev:.16e}\n"));
        if common.format == Format::Text {
            println!("alpha = {alpha_s}: max deviation from classical {dev:.6e}");
        }
    }
    let path = common.out.join(format!("{}.limit.csv", spec.name));
    write_atomic(&path, &csv)?;
    if common.verbose {
        println!("limit table written to {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Derive(c) => cmd_derive(c),
        Command::Constraints(c) => cmd_constraints(c),
        Command::Solve { common, m } => cmd_solve(common, *m),
        Command::Check(c) => cmd_check(c),
        Command::LimitStudy { common, m } => cmd_limit_study(common, *m),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
