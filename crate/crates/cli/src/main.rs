//! `polymin`: global minimization of polynomials from problem files.

mod document;
mod problem;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use polymin::minimizer::{lower_bound_at_degree, minimize, MinimizerError, MinimizerOptions};
use serde::Serialize;

use document::{check, ResultDocument};
use problem::ProblemFile;

const EXIT_PARSE: u8 = 2;
const EXIT_T_MAX: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_MISMATCH: u8 = 5;
const EXIT_IO: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "polymin", version, about = "Global minimization of real polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the minimum, the minimizer ideal and the minimizers.
    Minimize {
        file: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// Write every relaxation in SDPA format into this directory.
        #[arg(long, value_name = "DIR")]
        dump_sdpa: Option<PathBuf>,
        /// Print the result document instead of a summary.
        #[arg(long)]
        json: bool,
        /// Also write the result document here.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Solve the single relaxation of order `t` on the gradient ideal.
    Bound {
        file: PathBuf,
        #[arg(long)]
        degree: u32,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_name = "DIR")]
        dump_sdpa: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Re-verify a result document against the problem it references.
    Check { result: PathBuf },
}

/// Overrides of the problem file options.
#[derive(Args, Debug)]
struct Tuning {
    #[arg(long)]
    t_max: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relative eigenvalue threshold for Hankel ranks.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Relative duality gap above which a relaxation is flagged.
    #[arg(long)]
    tol_gap: Option<f64>,
    /// Relative tolerance for two relaxation values to be equal.
    #[arg(long)]
    tol_min: Option<f64>,
}

fn options(p: &ProblemFile, tuning: &Tuning, dump: &Option<PathBuf>) -> MinimizerOptions {
    let mut opts = MinimizerOptions::default();
    if let Some(v) = tuning.t_max.or(p.options.t_max) {
        opts.t_max = v;
    }
    if let Some(v) = tuning.seed.or(p.options.seed) {
        opts.seed = v;
    }
    if let Some(v) = tuning.tol_rank.or(p.options.tol_rank) {
        opts.tau_rank = v;
    }
    if let Some(v) = tuning.tol_gap.or(p.options.tol_gap) {
        opts.sdp.tol_gap = v;
    }
    if let Some(v) = tuning.tol_min.or(p.options.tol_min) {
        opts.tol_min = v;
    }
    opts.dump_sdpa = dump.clone();
    opts
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load(file: &Path) -> Result<ProblemFile, Failure> {
    ProblemFile::read(file).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", file.display())))
}

fn prepare_dump(dump: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)
            .map_err(|e| fail(EXIT_IO, format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn summary(doc: &ResultDocument) -> String {
    let mut s = String::new();
    match doc.minimum {
        Some(m) => s += &format!("minimum         {m}\n"),
        None => s += &format!("minimum         not reached ({})\n", doc.status),
    }
    if let Some(lb) = doc.lower_bound {
        s += &format!("lower bound     {lb}\n");
    }
    if !doc.quotient_basis.is_empty() {
        s += &format!("quotient basis  {{{}}}\n", doc.quotient_basis.join(", "));
    }
    for g in &doc.generators {
        s += &format!("generator       {g}\n");
    }
    for (z, c) in doc.points.iter().zip(&doc.certificates) {
        let coords: Vec<String> = z.iter().map(|x| format!("{x:.8}")).collect();
        s += &format!(
            "point           ({})  f = {:.8}  |grad f| = {:.1e}\n",
            coords.join(", "),
            c.value,
            c.gradient_norm
        );
    }
    s += "\n   t  stage        size       objective  gap    kernel        ms\n";
    for r in &doc.trace {
        let kernel = r.kernel_dim.map_or("-".to_string(), |k| k.to_string());
        s += &format!(
            "{:>4}  {:<11} {:>5}  {:>14.8}  {:<5} {:>6}  {:>8.1}\n",
            r.t, r.stage, r.hankel_size, r.objective, r.gap_flag, kernel, r.wall_ms
        );
    }
    s
}

fn run_minimize(
    file: &Path,
    tuning: &Tuning,
    dump: &Option<PathBuf>,
    json: bool,
    out: &Option<PathBuf>,
) -> Result<u8, Failure> {
    let problem = load(file)?;
    prepare_dump(dump)?;
    let opts = options(&problem, tuning, dump);
    let name = file.display().to_string();
    let (doc, code) = match minimize(&problem.objective, &opts) {
        Ok(res) => (ResultDocument::solved(&name, &problem.vars, &res), 0),
        Err(MinimizerError::TMaxExceeded { trace, t_max, .. }) => {
            eprintln!("t_max = {t_max} reached before the minimizer ideal was found");
            (ResultDocument::unfinished(&name, &problem.vars, &trace), EXIT_T_MAX)
        }
        Err(e @ MinimizerError::ConstantObjective) => return Err(fail(EXIT_PARSE, e.to_string())),
        Err(e @ MinimizerError::Dump { .. }) => return Err(fail(EXIT_IO, e.to_string())),
        Err(e) => return Err(fail(EXIT_NUMERICAL, e.to_string())),
    };
    let text = doc.to_json();
    if let Some(path) = out {
        write(path, &text)?;
        info!("result written to {}", path.display());
    }
    if json {
        print!("{text}");
    } else {
        print!("{}", summary(&doc));
    }
    Ok(code)
}

#[derive(Serialize)]
struct BoundDocument {
    problem: String,
    vars: Vec<String>,
    t: u32,
    hankel_size: usize,
    objective: f64,
    dual_objective: f64,
    status: String,
    gap_flag: bool,
}

fn run_bound(
    file: &Path,
    degree: u32,
    tuning: &Tuning,
    dump: &Option<PathBuf>,
    json: bool,
) -> Result<u8, Failure> {
    let problem = load(file)?;
    prepare_dump(dump)?;
    let opts = options(&problem, tuning, dump);
    let lb = lower_bound_at_degree(&problem.objective, degree, &opts).map_err(|e| match e {
        MinimizerError::ConstantObjective => fail(EXIT_PARSE, e.to_string()),
        MinimizerError::Dump { .. } => fail(EXIT_IO, e.to_string()),
        _ => fail(EXIT_NUMERICAL, e.to_string()),
    })?;
    let doc = BoundDocument {
        problem: file.display().to_string(),
        vars: problem.vars.clone(),
        t: lb.t,
        hankel_size: lb.hankel_size,
        objective: lb.objective,
        dual_objective: lb.dual_objective,
        status: format!("{:?}", lb.status),
        gap_flag: lb.gap,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("documents serialize"));
    } else {
        println!("t               {}", doc.t);
        println!("hankel size     {}", doc.hankel_size);
        println!("lower bound     {}", doc.objective);
        println!("dual objective  {}", doc.dual_objective);
        println!("status          {}", doc.status);
        println!("gap flag        {}", doc.gap_flag);
    }
    Ok(0)
}

/// The referenced problem file, taken relative to the working directory
/// and otherwise to the directory of the result document.
fn locate_problem(result: &Path, problem: &str) -> PathBuf {
    let p = PathBuf::from(problem);
    if p.is_relative() && !p.exists() {
        if let Some(dir) = result.parent() {
            let beside = dir.join(&p);
            if beside.exists() {
                return beside;
            }
        }
    }
    p
}

fn run_check(result: &Path) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(result)
        .map_err(|e| fail(EXIT_PARSE, format!("cannot read {}: {e}", result.display())))?;
    let doc: ResultDocument = serde_json::from_str(&text)
        .map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", result.display())))?;
    let problem = load(&locate_problem(result, &doc.problem))?;
    let failures = check(&doc, &problem);
    if failures.is_empty() {
        println!("ok: {} points verified", doc.points.len());
        Ok(0)
    } else {
        for f in &failures {
            eprintln!("FAIL {f}");
        }
        Ok(EXIT_MISMATCH)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Minimize {
            file,
            tuning,
            dump_sdpa,
            json,
            out,
        } => run_minimize(file, tuning, dump_sdpa, *json, out),
        Command::Bound {
            file,
            degree,
            tuning,
            dump_sdpa,
            json,
        } => run_bound(file, *degree, tuning, dump_sdpa, *json),
        Command::Check { result } => run_check(result),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("polymin: {message}");
            ExitCode::from(code)
        }
    }
}
