//! Command-line interface: certify, complete, parametrize, factorize and
//! deflate discrete-time all-pass functions given as JSON problem files.
//!
//! Results go to standard output as a JSON envelope; diagnostics go to
//! standard error. Exit codes: 0 on success, 1 when a mathematical
//! precondition fails, 2 on I/O or parse errors.

use allpass::io::{IoError, ProblemFile, ResultEnvelope};
use allpass::linalg::{eigenvalues, sym_rank, Subspace};
use allpass::realization::{allpass_defect_detail, minimal_realization, StateSpace};
use allpass::{cert, deflate, factor, lmi, Tol};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "allpass",
    version,
    about = "Certify, complete, parametrize, factorize and deflate discrete-time all-pass matrix functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Relative tolerance (beats the ALLPASS_TOL environment variable and
    /// the problem file's own override; default 1e-9)
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Number of unit-circle grid points for defect checks
    #[arg(long, global = true, default_value_t = 64)]
    grid: usize,

    /// Seed for the randomized off-circle probe points
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the all-pass property; emit verdict, certificate and defect
    Check { file: PathBuf },
    /// Complete partial data (A,B), (A,C) or (A,B,C) to an all-pass quadruple
    Complete {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: CompleteMode,
    },
    /// Solutions of the constrained LMIs from a subspace, a delta, or by enumeration
    Lmi {
        file: PathBuf,
        #[arg(long, value_enum)]
        side: LmiSide,
        /// Enumerate the family over all Schur-derived invariant subspaces
        #[arg(long)]
        enumerate: bool,
        /// Cap on enumerated solutions
        #[arg(long, default_value_t = 64)]
        max: usize,
    },
    /// Minimal all-pass factorizations at an invariant subspace
    Factor {
        file: PathBuf,
        /// Enumerate factorizations over all Schur-derived invariant subspaces
        #[arg(long)]
        enumerate: bool,
        /// Also emit the biproper closed-form divisors and their gauge distance
        #[arg(long)]
        biproper: bool,
        /// Cap on enumerated factorizations
        #[arg(long, default_value_t = 64)]
        max: usize,
    },
    /// Deflate a function singular at infinity into a biproper core and delay factors
    Deflate { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum CompleteMode {
    FromB,
    FromC,
    FromBc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LmiSide {
    P,
    Q,
}

enum CliError {
    Io(IoError),
    Math(allpass::Error),
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e)
    }
}

impl From<allpass::Error> for CliError {
    fn from(e: allpass::Error) -> Self {
        CliError::Math(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(envelope) => {
            println!("{}", envelope.to_json());
            ExitCode::SUCCESS
        }
        Err(CliError::Math(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve_tol(cli: &Cli, file: &ProblemFile) -> Tol {
    if let Some(t) = cli.tol {
        return Tol(t);
    }
    if let Ok(var) = std::env::var("ALLPASS_TOL") {
        if let Ok(t) = var.trim().parse::<f64>() {
            return Tol(t);
        }
    }
    file.tol.map(Tol).unwrap_or_default()
}

fn run(cli: &Cli) -> Result<ResultEnvelope, CliError> {
    let path = match &cli.command {
        Command::Check { file }
        | Command::Complete { file, .. }
        | Command::Lmi { file, .. }
        | Command::Factor { file, .. }
        | Command::Deflate { file } => file.clone(),
    };
    let (problem, digest) = ProblemFile::load(&path)?;
    let tol = resolve_tol(cli, &problem);
    match &cli.command {
        Command::Check { .. } => cmd_check(cli, &problem, &digest, tol),
        Command::Complete { mode, .. } => cmd_complete(cli, &problem, &digest, tol, *mode),
        Command::Lmi {
            side,
            enumerate,
            max,
            ..
        } => cmd_lmi(cli, &problem, &digest, tol, *side, *enumerate, *max),
        Command::Factor {
            enumerate,
            biproper,
            max,
            ..
        } => cmd_factor(cli, &problem, &digest, tol, *enumerate, *biproper, *max),
        Command::Deflate { .. } => cmd_deflate(cli, &problem, &digest, tol),
    }
}

fn residuals_json(res: &cert::EquationResiduals) -> serde_json::Value {
    json!({
        "p_stein": res.p_stein,
        "p_cross": res.p_cross,
        "p_feed": res.p_feed,
        "q_stein": res.q_stein,
        "q_cross": res.q_cross,
        "q_feed": res.q_feed,
    })
}

fn cmd_check(
    cli: &Cli,
    problem: &ProblemFile,
    digest: &str,
    tol: Tol,
) -> Result<ResultEnvelope, CliError> {
    let sys = problem.state_space()?;
    let verdict = cert::is_allpass(&sys, cli.grid, tol);
    let mut env = ResultEnvelope::new("check", digest, tol, cli.grid, cli.seed);
    env.insert("is_allpass", json!(verdict.is_allpass));
    env.insert("defect", json!(verdict.defect));
    env.insert("mcmillan_degree", json!(verdict.report.mcmillan));
    env.insert("minimal", json!(verdict.report.minimal));
    env.insert("residuals", residuals_json(&verdict.residuals));
    if let Some(c) = &verdict.certificate {
        env.insert_matrix("p0", c.p0());
        env.insert_matrix("q0", c.q0());
    }
    if !verdict.report.minimal {
        env.warn(format!(
            "realization is not minimal; certificate refers to the reduced realization of degree {}",
            verdict.report.mcmillan
        ));
        env.insert_system("minimal_realization", &verdict.minimal);
    }
    Ok(env)
}

/// Emits the system's grid defect and fails the command when it exceeds the
/// tolerance, so no command ever reports a non-all-pass quadruple as a result.
fn insert_verified_defect(
    env: &mut ResultEnvelope,
    key: &str,
    sys: &StateSpace,
    grid: usize,
    tol: Tol,
) -> Result<(), CliError> {
    let (defect, skipped) = allpass_defect_detail(sys, grid);
    env.insert(key, json!(defect));
    if skipped > 0 {
        env.warn(format!("{skipped} grid points skipped near poles for '{key}'"));
    }
    if defect > tol.abs_for(1.0) * 100.0 {
        return Err(CliError::Math(allpass::Error::NotAllPass(defect)));
    }
    Ok(())
}

fn cmd_complete(
    cli: &Cli,
    problem: &ProblemFile,
    digest: &str,
    tol: Tol,
    mode: CompleteMode,
) -> Result<ResultEnvelope, CliError> {
    let mut env = ResultEnvelope::new("complete", digest, tol, cli.grid, cli.seed);
    let a = problem.require("a")?;
    let sys = match mode {
        CompleteMode::FromB => {
            let b = problem.require("b")?;
            let p = problem.require("p")?;
            let (c, d) = cert::complete_from_b(&a, &b, &p, tol)?;
            env.insert_matrix("c", &c);
            env.insert_matrix("d", &d);
            StateSpace::new(a, b, c, d)?
        }
        CompleteMode::FromC => {
            let c = problem.require("c")?;
            let q = problem.require("q")?;
            let (b, d) = cert::complete_from_c(&a, &c, &q, tol)?;
            env.insert_matrix("b", &b);
            env.insert_matrix("d", &d);
            StateSpace::new(a, b, c, d)?
        }
        CompleteMode::FromBc => {
            let b = problem.require("b")?;
            let c = problem.require("c")?;
            let p = problem.require("p")?;
            let q = problem.require("q")?;
            let d = cert::complete_from_bc(&a, &b, &c, &p, &q, tol)?;
            env.insert_matrix("d", &d);
            StateSpace::new(a, b, c, d)?
        }
    };
    insert_verified_defect(&mut env, "defect", &sys, cli.grid, tol)?;
    Ok(env)
}

fn lmi_solution_p_json(env: &mut ResultEnvelope, prefix: &str, sol: &lmi::LmiSolutionP) {
    env.insert(
        prefix,
        json!({
            "p": allpass::io::rows_from_matrix(&sol.p),
            "kernel_basis": allpass::io::rows_from_matrix(sol.kernel.basis()),
            "g": allpass::io::rows_from_matrix(&sol.g),
            "l": allpass::io::rows_from_matrix(&sol.l),
        }),
    );
}

fn lmi_solution_q_json(env: &mut ResultEnvelope, prefix: &str, sol: &lmi::LmiSolutionQ) {
    env.insert(
        prefix,
        json!({
            "q": allpass::io::rows_from_matrix(&sol.q),
            "kernel_basis": allpass::io::rows_from_matrix(sol.kernel.basis()),
            "h": allpass::io::rows_from_matrix(&sol.h),
            "j": allpass::io::rows_from_matrix(&sol.j),
        }),
    );
}

fn cmd_lmi(
    cli: &Cli,
    problem: &ProblemFile,
    digest: &str,
    tol: Tol,
    side: LmiSide,
    enumerate: bool,
    max: usize,
) -> Result<ResultEnvelope, CliError> {
    let sys = problem.state_space()?;
    let certificate = cert::certificate(&sys, tol)?;
    let mut env = ResultEnvelope::new("lmi", digest, tol, cli.grid, cli.seed);
    let n = sys.state_dim();
    let a_nonsingular = {
        let eigs = eigenvalues(sys.a());
        eigs.iter().all(|l| l.norm() > tol.abs_for(1.0))
    };

    if enumerate {
        match side {
            LmiSide::P => {
                let sols = lmi::enumerate_solutions_p(&sys, &certificate, max, tol);
                let mut items = Vec::new();
                for (y, sol) in &sols {
                    let mut item = json!({
                        "subspace_dim": y.dim(),
                        "p": allpass::io::rows_from_matrix(&sol.p),
                        "rank": sym_rank(&sol.p, tol),
                        "g": allpass::io::rows_from_matrix(&sol.g),
                        "l": allpass::io::rows_from_matrix(&sol.l),
                    });
                    if a_nonsingular {
                        let res = lmi::riccati_residual_p(&sol.p, sys.a(), sys.c(), tol)?;
                        item["riccati_residual"] = json!(res);
                    }
                    items.push(item);
                }
                env.insert("solutions", json!(items));
            }
            LmiSide::Q => {
                let sols = lmi::enumerate_solutions_q(&sys, &certificate, max, tol);
                let mut items = Vec::new();
                for (x, sol) in &sols {
                    let mut item = json!({
                        "subspace_dim": x.dim(),
                        "q": allpass::io::rows_from_matrix(&sol.q),
                        "rank": sym_rank(&sol.q, tol),
                        "h": allpass::io::rows_from_matrix(&sol.h),
                        "j": allpass::io::rows_from_matrix(&sol.j),
                    });
                    if a_nonsingular {
                        let res = lmi::riccati_residual_q(&sol.q, sys.a(), sys.b(), tol)?;
                        item["riccati_residual"] = json!(res);
                    }
                    items.push(item);
                }
                env.insert("solutions", json!(items));
            }
        }
        return Ok(env);
    }

    // single solution from a delta direction or an invariant subspace
    // (default: the zero subspace, i.e. the nonsingular certificate solution)
    let delta = problem.optional("delta")?;
    match side {
        LmiSide::P => {
            let sol = if let Some(delta) = delta {
                let p = lmi::family_member_p(sys.a(), &certificate, &delta, tol)?;
                lmi::lmi_solution_p(&sys, &p, tol)?
            } else {
                let y = if problem.subspace.is_some() {
                    problem.subspace(n, tol)?
                } else {
                    Subspace::zero(n)
                };
                lmi::solution_from_subspace_p(&sys, certificate.p0(), &y, tol)?
            };
            lmi_solution_p_json(&mut env, "solution", &sol);
            if a_nonsingular {
                env.insert(
                    "riccati_residual",
                    json!(lmi::riccati_residual_p(&sol.p, sys.a(), sys.c(), tol)?),
                );
            }
        }
        LmiSide::Q => {
            let sol = if let Some(delta) = delta {
                let q = lmi::family_member_q(sys.a(), &certificate, &delta, tol)?;
                lmi::lmi_solution_q(&sys, &q, tol)?
            } else {
                let x = if problem.subspace.is_some() {
                    problem.subspace(n, tol)?
                } else {
                    Subspace::zero(n)
                };
                lmi::solution_from_subspace_q(&sys, certificate.q0(), &x, tol)?
            };
            lmi_solution_q_json(&mut env, "solution", &sol);
            if a_nonsingular {
                env.insert(
                    "riccati_residual",
                    json!(lmi::riccati_residual_q(&sol.q, sys.a(), sys.b(), tol)?),
                );
            }
        }
    }
    Ok(env)
}

fn divisor_json(div: &factor::Divisor) -> serde_json::Value {
    json!({
        "degree": div.degree,
        "b": allpass::io::rows_from_matrix(div.sys.b()),
        "d": allpass::io::rows_from_matrix(div.sys.d()),
        "minimal": {
            "a": allpass::io::rows_from_matrix(div.minimal_sys.a()),
            "b": allpass::io::rows_from_matrix(div.minimal_sys.b()),
            "c": allpass::io::rows_from_matrix(div.minimal_sys.c()),
            "d": allpass::io::rows_from_matrix(div.minimal_sys.d()),
        },
    })
}

fn factorization_json(
    cli: &Cli,
    env: &mut ResultEnvelope,
    fact: &factor::Factorization,
    tol: Tol,
) -> Result<serde_json::Value, CliError> {
    let (left_defect, _) = allpass_defect_detail(&fact.left.minimal_sys, cli.grid);
    let (right_defect, _) = allpass_defect_detail(&fact.right.minimal_sys, cli.grid);
    if left_defect.max(right_defect) > tol.abs_for(1.0) * 100.0 {
        return Err(CliError::Math(allpass::Error::NotAllPass(
            left_defect.max(right_defect),
        )));
    }
    let _ = env;
    Ok(json!({
        "left": divisor_json(&fact.left),
        "right": divisor_json(&fact.right),
        "product_defect": fact.product_defect,
        "left_defect": left_defect,
        "right_defect": right_defect,
        "complementary": factor::complementary_pair_check(fact, tol),
    }))
}

fn cmd_factor(
    cli: &Cli,
    problem: &ProblemFile,
    digest: &str,
    tol: Tol,
    enumerate: bool,
    biproper: bool,
    max: usize,
) -> Result<ResultEnvelope, CliError> {
    let sys = problem.state_space()?;
    let mut env = ResultEnvelope::new("factor", digest, tol, cli.grid, cli.seed);

    if enumerate {
        let facts = factor::enumerate_divisors(&sys, max, cli.grid, tol)?;
        let mut items = Vec::new();
        for fact in &facts {
            items.push(factorization_json(cli, &mut env, fact, tol)?);
        }
        env.insert("factorizations", json!(items));
        return Ok(env);
    }

    let x = if problem.subspace.is_some() {
        problem.subspace(sys.state_dim(), tol)?
    } else {
        Subspace::zero(sys.state_dim())
    };
    let fact = factor::factorize(&sys, &x, cli.grid, tol)?;
    let fact_json = factorization_json(cli, &mut env, &fact, tol)?;
    env.insert("factorization", fact_json);

    if biproper {
        // closed-form divisors from the same LMI solutions, plus their
        // gauge distance to the factorization-path divisors
        let (sol_p, sol_q) = match (&fact.left.source, &fact.right.source) {
            (factor::DivisorSource::P(p), factor::DivisorSource::Q(q)) => (p, q),
            _ => unreachable!("factorize always pairs a P-source left with a Q-source right"),
        };
        let closed_left = factor::biproper_left_divisor(&sys, &sol_p.p, tol)?;
        let closed_right = factor::biproper_right_divisor(&sys, &sol_q.q, tol)?;
        let grid = allpass::realization::unit_circle_grid(cli.grid.max(8));
        let (_, dist_left) =
            factor::align_right_gauge(&fact.left.minimal_sys, &closed_left.sys, &grid)?;
        let (_, dist_right) =
            factor::align_left_gauge(&fact.right.minimal_sys, &closed_right.sys, &grid)?;
        env.insert("biproper_left", divisor_json(&closed_left));
        env.insert("biproper_right", divisor_json(&closed_right));
        env.insert("biproper_gauge_distance_left", json!(dist_left));
        env.insert("biproper_gauge_distance_right", json!(dist_right));
    }
    Ok(env)
}

fn cmd_deflate(
    cli: &Cli,
    problem: &ProblemFile,
    digest: &str,
    tol: Tol,
) -> Result<ResultEnvelope, CliError> {
    let sys = problem.state_space()?;
    let out = deflate::deflate_at_infinity(&sys, tol)?;
    let mut env = ResultEnvelope::new("deflate", digest, tol, cli.grid, cli.seed);
    for w in &out.warnings {
        env.warn(w.clone());
    }
    env.insert_system("q0", &out.q0);
    let (q0_min, _) = minimal_realization(&out.q0, tol);
    env.insert_system("q0_minimal", &q0_min);
    env.insert(
        "steps",
        json!(out
            .steps
            .iter()
            .map(|s| json!({
                "u": allpass::io::rows_from_matrix(&s.u),
                "p": s.p,
            }))
            .collect::<Vec<_>>()),
    );
    insert_verified_defect(&mut env, "q0_defect", &out.q0, cli.grid, tol)?;

    // independent recomposition defect over the grid
    let m = sys.io_dim();
    let qbars: Vec<StateSpace> = out
        .steps
        .iter()
        .map(|s| deflate::qbar_realization(s, m))
        .collect::<Result<_, _>>()
        .map_err(CliError::Math)?;
    let mut defect: f64 = 0.0;
    for z in allpass::realization::unit_circle_grid(cli.grid.max(8)) {
        let (Ok(original), Ok(mut value)) = (sys.evaluate(z), out.q0.evaluate(z)) else {
            continue;
        };
        for qb in &qbars {
            value *= qb.evaluate(z).map_err(CliError::Math)?;
        }
        defect = defect.max(allpass::realization::spectral_norm(&(value - original)));
    }
    env.insert("recomposition_defect", json!(defect));
    if defect > tol.abs_for(1.0) * 100.0 {
        return Err(CliError::Math(allpass::Error::Precondition(format!(
            "recomposition defect {defect:.3e} exceeds tolerance"
        ))));
    }
    Ok(env)
}
