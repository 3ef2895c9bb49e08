//! `tllsize`: size, build, compile and audit TLL controllers from a JSON
//! run configuration.
//!
//! Exit codes: 0 pass, 1 audit failure, 2 config error, 3 numerical error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use tllsize_cli::commands::{self, Context, Outcome};
use tllsize_cli::config::RunConfig;
use tllsize_cli::error::CliError;

#[derive(Parser)]
#[command(name = "tllsize", version, about = "Size, build and audit two-level-lattice ReLU controllers")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Probe seed; overrides `probes.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for probe-parallel work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for artifacts and reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyTarget {
    Approx,
    Lipschitz,
    Continuity,
    TllEquiv,
    Regions,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditTarget {
    Invariance,
    Gronwall,
    Sysid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Network,
    Expanded,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

#[derive(Subcommand)]
enum Cmd {
    /// Budget to mu, eta and network sizes.
    Size,
    /// Build the eta-grid on X and check coverage.
    Grid,
    /// Sample the controller on the grid and build the interpolant.
    Build,
    /// Compile the interpolant into a TLL network.
    Compile,
    /// Audit the interpolant and network.
    Verify {
        /// Audits to run (comma separated); all when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        which: Vec<VerifyTarget>,
    },
    /// Closed-loop audits against the model.
    Audit {
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        which: Vec<AuditTarget>,
    },
    /// Abstract-disturbance simulation check between two transition systems.
    AdsCheck,
    /// Interpolate the model's vector field on X x U and compile it.
    Sysid,
    /// Write the network, or its explicit ReLU expansion.
    Export {
        #[arg(long, value_enum, default_value = "expanded")]
        format: ExportFormat,
    },
}

#[derive(Serialize)]
struct Timing {
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct Report {
    command: String,
    tool_version: &'static str,
    config: Value,
    seed: u64,
    results: Value,
    pass: bool,
    timing: Timing,
}

fn run(cli: &Cli) -> Result<(String, Report), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    let seed = cli.seed.unwrap_or(cfg.probes.seed);
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let ctx = Context {
        cfg,
        config_dir: path.parent().map(PathBuf::from).unwrap_or_default(),
        out: cli.out.clone(),
        seed,
    };
    let start = Instant::now();
    let (name, outcome): (String, Outcome) = match &cli.command {
        Cmd::Size => ("size".into(), commands::size(&ctx)?),
        Cmd::Grid => ("grid".into(), commands::grid(&ctx)?),
        Cmd::Build => ("build".into(), commands::build(&ctx)?),
        Cmd::Compile => ("compile".into(), commands::compile(&ctx)?),
        Cmd::Verify { which } => {
            let all = VerifyTarget::value_variants();
            let list: Vec<String> = if which.is_empty() { all } else { which.as_slice() }
                .iter()
                .map(value_name)
                .collect();
            ("verify".into(), commands::verify(&ctx, &list)?)
        }
        Cmd::Audit { which } => {
            let list: Vec<String> = which.iter().map(value_name).collect();
            ("audit".into(), commands::audit(&ctx, &list)?)
        }
        Cmd::AdsCheck => ("ads-check".into(), commands::ads_check(&ctx)?),
        Cmd::Sysid => ("sysid".into(), commands::sysid(&ctx)?),
        Cmd::Export { format } => (
            "export".into(),
            commands::export(&ctx, matches!(format, ExportFormat::Expanded))?,
        ),
    };
    let report = Report {
        command: name.clone(),
        tool_version: env!("CARGO_PKG_VERSION"),
        config: echo,
        seed,
        results: outcome.results,
        pass: outcome.pass,
        timing: Timing {
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    };
    Ok((name, report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((name, report)) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            let path = cli.out.join(format!("{name}.report.json"));
            if let Err(e) = std::fs::write(&path, &text) {
                eprintln!("config error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            // a closed stdout (e.g. piped into `head`) is not a failure
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(if report.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
