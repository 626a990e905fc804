//! `radul`: verification suites, index computations and residues from JSON.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or input error, 3 a check
//! could not run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use radul_core::cyclic_index::KClass;
use radul_core::symbol_algebra::{FormalSymbol, SymbolBackend};
use radul_core::verify::{
    conventions_report, germ_report, index_report, residue_report, run_verify, Suite, VerifyConfig, DEFAULT_PRECISION,
};
use radul_core::zeta_laurent::LaurentGerm;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "radul", version, about = "Heisenberg symbol calculus: identity checks, residues and indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run identity suites and emit a JSON report.
    Verify(VerifyArgs),
    /// Index of a K-class from its JSON description.
    Index {
        #[arg(long)]
        kclass: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Residue of a symbol, or a higher residue of a Laurent germ.
    Residue {
        #[arg(long, required_unless_present = "germ")]
        symbol: Option<PathBuf>,
        #[arg(long, conflicts_with = "symbol")]
        germ: Option<PathBuf>,
        /// Pole order read from the germ; 0 gives the finite part.
        #[arg(long, default_value_t = 1, requires = "germ")]
        order: usize,
    },
    /// The computed sign conventions.
    Conventions,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// torus, gaussian or two_sheet; defaults to two_sheet at n = 1 and torus at n = 2.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<SymbolBackend>,
    /// Working precision in decimal digits.
    #[arg(long, env = "RADUL_PRECISION", default_value_t = DEFAULT_PRECISION)]
    precision: u32,
    /// Truncation degree of random symbols; defaults to −ν − 4.
    #[arg(long, allow_hyphen_values = true)]
    cutoff: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    zorder: usize,
    #[arg(long, default_value_t = 12)]
    xorder: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Radul,
    Top,
    Both,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::parse(s).map_err(|e| e.to_string())
}

fn parse_backend(s: &str) -> Result<SymbolBackend, String> {
    SymbolBackend::parse(s).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Internal(String),
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(v: &Value, report: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    if let Some(p) = report {
        std::fs::write(p, format!("{text}\n")).map_err(|e| Failure::Internal(format!("{}: {e}", p.display())))?;
    }
    println!("{text}");
    Ok(())
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn verify(a: VerifyArgs) -> Result<u8, Failure> {
    let cfg = VerifyConfig {
        suite: a.suite,
        n: a.n,
        p: a.p,
        backend: a.backend,
        precision: a.precision,
        cutoff: a.cutoff,
        seed: a.seed,
        zorder: a.zorder,
        xorder: a.xorder,
    };
    let rep = run_verify(&cfg).map_err(usage)?;
    for r in &rep.records {
        let status = match (&r.error, r.pass) {
            (Some(_), _) => "ERROR",
            (None, true) => "pass",
            (None, false) => "FAIL",
        };
        eprintln!("{status:5} {:44} {:>10.3}s", r.name, r.runtime.as_secs_f64());
    }
    emit(&rep.to_json(), a.report.as_deref())?;
    Ok(rep.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Verify(a) => verify(a),
        Command::Index { kclass, method, report } => {
            let kc = KClass::from_json(&read_json(&kclass)?).map_err(usage)?;
            let (r, t) = match method {
                Method::Radul => (true, false),
                Method::Top => (false, true),
                Method::Both => (true, true),
            };
            emit(&index_report(&kc, r, t).map_err(usage)?, report.as_deref())?;
            Ok(0)
        }
        Command::Residue { symbol, germ, order } => {
            let v = match (symbol, germ) {
                (Some(s), _) => {
                    residue_report(&FormalSymbol::from_json(&read_json(&s)?).map_err(usage)?).map_err(usage)?
                }
                (None, Some(g)) => germ_report(&LaurentGerm::from_json(&read_json(&g)?).map_err(usage)?, order),
                (None, None) => return Err(Failure::Usage("--symbol or --germ is required".into())),
            };
            emit(&v, None)?;
            Ok(0)
        }
        Command::Conventions => {
            emit(&conventions_report().map_err(|e| Failure::Internal(e.to_string()))?, None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
