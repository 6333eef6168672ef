use std::path::PathBuf;
use std::process::ExitCode;

use calderon_cli::config::parse_kschedule;
use calderon_cli::{execute, output_dir, Command, RunConfig};
use clap::{Parser, Subcommand};

/// Forward solvers, isotropization and CGO recovery for planar anisotropic
/// conductivities.
#[derive(Debug, Parser)]
#[command(name = "calderon", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root; defaults to the config value, then $CALDERON_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long, global = true)]
    modes: Option<usize>,

    /// Comma-separated |k| values, e.g. `1,2,4,8`.
    #[arg(long, global = true)]
    kschedule: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// DtN matrix of the configured geometry.
    ForwardDtn,
    /// Principal map and isotropic conductivity.
    Isotropize,
    /// Exterior recovery of the map from CGO solutions, and the full loop.
    CgoRecover,
    /// Partial-boundary Cauchy data and the reflected full-disc operator.
    PartialData,
    /// Half-plane operator carried to the disc.
    Halfplane,
    /// Exterior operator through inversion.
    Exterior,
    /// Invariant suite.
    Verify,
}

fn configure(cli: &Cli) -> Result<RunConfig, Vec<String>> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut errors = Vec::new();
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(m) = cli.modes {
        cfg.modes = m;
    }
    if let Some(k) = &cli.kschedule {
        match parse_kschedule(k) {
            Ok(v) => cfg.kschedule = v,
            Err(e) => errors.push(format!("--kschedule: {e}")),
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    for kv in &cli.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = cfg.set(k.trim(), v.trim()) {
                    errors.push(format!("--set {kv}: {e}"));
                }
            }
            None => errors.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::ForwardDtn => Command::ForwardDtn,
        Cmd::Isotropize => Command::Isotropize,
        Cmd::CgoRecover => Command::CgoRecover,
        Cmd::PartialData => Command::PartialData,
        Cmd::Halfplane => Command::HalfPlane,
        Cmd::Exterior => Command::Exterior,
        Cmd::Verify => Command::Verify,
    };
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("invalid configuration:");
            for e in errors {
                eprintln!("  {e}");
            }
            return ExitCode::from(2);
        }
    };
    match execute(command, &cfg) {
        Ok(report) => {
            print!("{}", report.to_text());
            println!("times {}", report.timings());
            println!("output {}", output_dir(&cfg, command).display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed: {}", report.failures().join(", "));
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprint!("{f}");
            if !f.to_string().ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
