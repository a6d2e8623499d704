use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpseries_cli::commands::{
    certify_problem, check_arith, reduce_json, solve_json, ArithKind, ArithRequest, CommandError, RunConfig,
};
use gpseries_cli::corpus::{bundled_dir, run_corpus, to_json};
use gpseries_cli::source::{Env, EquationSource, Loaded};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "gpseries", version, about = "Generalized power series solutions of functional equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Working precision in bits.
    #[arg(long, default_value_t = 192)]
    precision: usize,
    /// Solved levels, or Bruno terms for check-arith.
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Drop terms whose exponent has a larger real part.
    #[arg(long)]
    trunc_re: Option<f64>,
    /// Bound on |m| for Diophantine and Siegel scans.
    #[arg(long, default_value_t = 200)]
    scan_bound: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compact single-line JSON.
    #[arg(long)]
    json: bool,
}

impl Common {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            precision_bits: self.precision,
            depth: self.depth,
            trunc_re: self.trunc_re,
            scan_bound: self.scan_bound,
            sector_center: 0.0,
        }
    }
}

#[derive(Args, Clone)]
struct Input {
    /// Equation file.
    #[arg(long = "eq")]
    eq: PathBuf,
    /// Parameter override NAME=VALUE; VALUE is a constant expression.
    #[arg(long = "param")]
    params: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Diophantine,
    Siegel,
    Bruno,
}

#[derive(Subcommand)]
enum Command {
    /// Formal solution with its solver transcript.
    Solve {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Reduction of the equation along the leading terms of its solution.
    Reduce {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        /// Number of solution terms taken as the known prefix.
        #[arg(long, default_value_t = 1)]
        terms: usize,
    },
    /// Convergence certificate for the solution.
    Certify {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Siegel, Diophantine or Bruno condition on a multiplier.
    CheckArith {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Rotation number; q = exp(2 pi i omega) unless --q is given.
        #[arg(long)]
        omega: Option<String>,
        #[arg(long)]
        q: Option<String>,
        /// Lattice generator (repeatable); defaults to 1.
        #[arg(long = "gen")]
        generators: Vec<String>,
        /// Root a of L (repeatable); defaults to 1.
        #[arg(long = "root")]
        roots: Vec<String>,
        #[arg(long)]
        c: Option<f64>,
        /// gamma for the Diophantine condition, nu for the Siegel condition.
        #[arg(long)]
        exponent: Option<f64>,
        #[arg(long = "param")]
        params: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the bundled examples against their stored expectations.
    Corpus {
        #[arg(long)]
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn split_params(raw: &[String]) -> Result<Vec<(String, String)>, CommandError> {
    raw.iter()
        .map(|p| {
            p.split_once('=')
                .map(|(n, v)| (n.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CommandError::Validation(format!("--param expects NAME=VALUE, got `{p}`")))
        })
        .collect()
}

fn load(input: &Input, cfg: &RunConfig) -> Result<Loaded, CommandError> {
    let text = std::fs::read_to_string(&input.eq)
        .map_err(|e| CommandError::Validation(format!("{}: {e}", input.eq.display())))?;
    let src = EquationSource { text, params: split_params(&input.params)? };
    Ok(src.load(cfg.precision_bits)?)
}

fn emit(common: &Common, v: &Value) -> Result<(), CommandError> {
    let text = if common.json { serde_json::to_string(v) } else { serde_json::to_string_pretty(v) }
        .map_err(|e| CommandError::Computation(e.to_string()))?;
    match &common.out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CommandError::Validation(format!("{}: {e}", p.display()))),
        None => match writeln!(std::io::stdout(), "{text}") {
            // a closed pipe on stdout is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CommandError::Validation(e.to_string())),
            _ => Ok(()),
        },
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Solve { input, common } => {
            let cfg = common.run_config();
            cfg.validate()?;
            emit(&common, &solve_json(&load(&input, &cfg)?, &cfg)?)
        }
        Command::Reduce { input, common, terms } => {
            let cfg = common.run_config();
            cfg.validate()?;
            emit(&common, &reduce_json(&load(&input, &cfg)?, &cfg, terms)?)
        }
        Command::Certify { input, common } => {
            let cfg = common.run_config();
            cfg.validate()?;
            emit(&common, &certify_problem(&load(&input, &cfg)?, &cfg)?.to_json())
        }
        Command::CheckArith { kind, omega, q, generators, roots, c, exponent, params, common } => {
            let cfg = common.run_config();
            cfg.validate()?;
            let mut env = Env::new(cfg.precision_bits);
            for (name, value) in split_params(&params)? {
                let v = env.constant(&gpseries_cli::dsl::parse_expr(&value).map_err(|e| CommandError::Validation(e.to_string()))?)?;
                env.values.insert(name, v);
            }
            let kind = match kind {
                Kind::Diophantine => ArithKind::Diophantine,
                Kind::Siegel => ArithKind::Siegel,
                Kind::Bruno => ArithKind::Bruno,
            };
            let req = ArithRequest {
                kind,
                omega,
                q,
                generators,
                roots,
                c,
                exponent,
                bound: Some(cfg.scan_bound),
                depth: Some(cfg.depth),
            };
            let rep = check_arith(&req, &env, &cfg)?;
            emit(&common, &serde_json::to_value(&rep).map_err(|e| CommandError::Computation(e.to_string()))?)
        }
        Command::Corpus { dir, common } => {
            let cfg = common.run_config();
            cfg.validate()?;
            let dir = dir.unwrap_or_else(bundled_dir);
            let report = run_corpus(&dir, &cfg)?;
            emit(&common, &to_json(&report))?;
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<&str> =
                    report.entries.iter().filter(|e| !e.passed()).map(|e| e.name.as_str()).collect();
                Err(CommandError::Mismatch(format!("corpus mismatch: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    // usage errors are validation errors
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
