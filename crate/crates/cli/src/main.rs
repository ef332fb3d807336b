//! `walklab`: drift, entropy, quasi-harmonic, boundary and G-space reports as JSON.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use walklab::{Error, Result};

use config::{Defaults, Flags, RunConfig};

pub const SCHEMA: &str = "walklab.report/1";

#[derive(Parser, Debug)]
#[command(name = "walklab", version, about = "Random walks on groups: drift, boundaries and stationary spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact partial drifts a_n and the certified bound; Monte Carlo with --trajectories
    Drift,
    /// Shannon entropies H_n of the convolution powers
    Entropy,
    /// Averaged functions phi_n and their distortion
    Phi,
    /// Poisson cocycle identity and normalization on the free-group boundary
    Cocycle,
    /// Poisson semi-norm on a ball, with the semi-norm axioms
    PoissonNorm,
    /// The additive sequence c_n
    CSeq,
    /// Rank of the span of Poisson cocycles on cylinder functions
    SpanRank,
    /// Stationary measure of a finite G-space
    Stationary { space: String },
    /// Ergodicity of the diagonal action on X x Y
    Ergodicity { x: String, y: String },
    /// Factor map p_f for an invariant function on X x Y
    Factor { x: String, y: String },
    /// The exact identity suite
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Drift => "drift",
            Command::Entropy => "entropy",
            Command::Phi => "phi",
            Command::Cocycle => "cocycle",
            Command::PoissonNorm => "poisson-norm",
            Command::CSeq => "c-seq",
            Command::SpanRank => "span-rank",
            Command::Stationary { .. } => "stationary",
            Command::Ergodicity { .. } => "ergodicity",
            Command::Factor { .. } => "factor",
            Command::Selftest => "selftest",
        }
    }

    fn inputs(&self) -> Vec<String> {
        match self {
            Command::Stationary { space } => vec![space.clone()],
            Command::Ergodicity { x, y } | Command::Factor { x, y } => vec![x.clone(), y.clone()],
            _ => Vec::new(),
        }
    }

    fn defaults(&self) -> Defaults {
        let (mode, n_max, radius, level) = match self {
            Command::Drift | Command::Entropy => ("exact", 8, 3, 3),
            Command::Phi => ("exact", 8, 4, 3),
            Command::Cocycle => ("exact", 3, 3, 8),
            Command::PoissonNorm => ("exact", 1, 5, 1),
            Command::CSeq => ("exact", 5, 1, 1),
            Command::SpanRank => ("exact", 1, 2, 2),
            Command::Stationary { .. } | Command::Ergodicity { .. } | Command::Factor { .. } => ("float", 1, 1, 1),
            Command::Selftest => ("exact", 1, 1, 1),
        };
        Defaults { mode, n_max, radius, level }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Overflow(_) => "overflow",
        Error::Parse(_) => "parse",
        Error::OutOfRange { .. } => "out_of_range",
        Error::SupportEscapes { .. } => "support_escapes",
        Error::LevelTooShallow { .. } => "level_too_shallow",
        Error::Resource { .. } => "resource",
        Error::Precondition(_) => "precondition",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Io(_) => "io",
    }
}

fn fail(command: Option<&str>, kind: &str, message: String, code: u8) -> ExitCode {
    let body = json!({
        "schema": SCHEMA,
        "command": command,
        "error": {"kind": kind, "message": message},
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn emit(cfg: &RunConfig, result: Value) {
    let report = json!({
        "schema": SCHEMA,
        "command": cfg.command,
        "config": cfg,
        "result": result,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<(Value, bool)> {
    let ok = |v: Value| Ok((v, true));
    match command {
        Command::Drift => ok(commands::drift(cfg)?),
        Command::Entropy => ok(commands::entropy(cfg)?),
        Command::Phi => ok(commands::phi(cfg)?),
        Command::Cocycle => ok(commands::cocycle(cfg)?),
        Command::PoissonNorm => ok(commands::poisson_norm(cfg)?),
        Command::CSeq => ok(commands::c_seq(cfg)?),
        Command::SpanRank => ok(commands::span_rank(cfg)?),
        Command::Stationary { .. } => ok(commands::stationary(cfg)?),
        Command::Ergodicity { .. } => ok(commands::ergodicity(cfg)?),
        Command::Factor { .. } => ok(commands::factor(cfg)?),
        Command::Selftest => {
            let outcome = commands::selftest(cfg)?;
            for c in &outcome.cases {
                eprintln!("{:<4} {:<34} {}  {}", c.id, c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
            let all = outcome.failed == 0;
            Ok((serde_json::to_value(outcome).expect("serializable"), all))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(None, "usage", e.to_string().trim().to_string(), 1);
        }
    };
    let name = cli.command.name();
    let cfg = match RunConfig::resolve(name, cli.flags, cli.command.inputs(), cli.command.defaults()) {
        Ok(cfg) => cfg,
        Err(e) => return fail(Some(name), error_kind(&e), e.to_string(), 1),
    };
    match execute(&cli.command, &cfg) {
        Ok((result, passed)) => {
            emit(&cfg, result);
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let code = if e.is_resource() { 2 } else { 1 };
            fail(Some(name), error_kind(&e), e.to_string(), code)
        }
    }
}
