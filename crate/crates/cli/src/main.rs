use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hopf_kbm::change_of_vars::DegreeChoice;
use hopf_kbm::definition::SystemDefinition;
use hopf_kbm::kbm::Variant;
use hopf_kbm::pipeline::{alpha_grid, run_analyze, run_sweep, sweep_csv, threads_from_env, AnalyzeOptions, Arithmetic};
use hopf_kbm::report::{render_text, to_json, write_analysis};
use hopf_kbm::scalar::{parse_rational, Rational};

/// Limit cycles near Hopf points of planar polynomial systems, predicted by
/// averaging and checked by numerical integration.
#[derive(Parser, Debug)]
#[command(name = "hopf-kbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze one parameter value.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Analyze an evenly spaced grid of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        alpha_from: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha_to: String,
        /// Number of grid points, both ends included.
        #[arg(long)]
        steps: usize,
        /// Worker threads; defaults to the HOPF_KBM_THREADS environment variable.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// System definition file (JSON).
    #[arg(long)]
    system: PathBuf,
    /// Degree of the change of variables: `auto` or an integer >= 2.
    #[arg(long, default_value = "auto")]
    m: String,
    #[arg(long, value_enum, default_value_t = ArithmeticArg::Exact)]
    arithmetic: ArithmeticArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Rederived)]
    variant: VariantArg,
    /// Skip the numerical cycle measurement.
    #[arg(long)]
    no_verify: bool,
    /// Directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArithmeticArg {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Paper,
    Rederived,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Text,
    Json,
}

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<hopf_kbm::error::Error> for Failure {
    fn from(e: hopf_kbm::error::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.into())
        } else {
            Failure::Internal(e.into())
        }
    }
}

fn input(msg: String) -> Failure {
    Failure::Input(anyhow::anyhow!(msg))
}

fn parse_alpha(flag: &str, text: &str) -> Result<Rational, Failure> {
    parse_rational(text).ok_or_else(|| input(format!("{flag}: not a number: {text:?}")))
}

fn options(common: &Common) -> Result<AnalyzeOptions, Failure> {
    let degree = match common.m.as_str() {
        "auto" => DegreeChoice::Auto,
        s => match s.parse::<usize>() {
            Ok(m) if m >= 2 => DegreeChoice::Fixed(m),
            _ => return Err(input(format!("--m: expected `auto` or an integer >= 2, got {s:?}"))),
        },
    };
    Ok(AnalyzeOptions {
        degree,
        arithmetic: match common.arithmetic {
            ArithmeticArg::Exact => Arithmetic::Exact,
            ArithmeticArg::Float => Arithmetic::Float,
        },
        variant: match common.variant {
            VariantArg::Paper => Variant::Paper,
            VariantArg::Rederived => Variant::Rederived,
        },
        verify: !common.no_verify,
        ..AnalyzeOptions::default()
    })
}

fn load(path: &Path) -> Result<SystemDefinition, Failure> {
    Ok(SystemDefinition::from_path(path)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { common, alpha, format } => {
            let opts = options(&common)?;
            let def = load(&common.system)?;
            let alpha = parse_alpha("--alpha", &alpha)?;
            let report = run_analyze(&def, &alpha, &opts)?;
            if let Some(dir) = &common.out {
                write_analysis(dir, &report)?;
            }
            match format {
                Format::Text => print!("{}", render_text(&report)),
                Format::Json => print!("{}", to_json(&report)),
            }
        }
        Command::Sweep { common, alpha_from, alpha_to, steps, threads } => {
            let opts = options(&common)?;
            if steps == 0 {
                return Err(input("--steps must be at least 1".into()));
            }
            let def = load(&common.system)?;
            let from = parse_alpha("--alpha-from", &alpha_from)?;
            let to = parse_alpha("--alpha-to", &alpha_to)?;
            let grid = alpha_grid(&from, &to, steps)?;
            let rows = run_sweep(&def, &grid, &opts, threads.or_else(threads_from_env))?;
            let csv = sweep_csv(&rows);
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))
                    .map_err(Failure::Input)?;
                let json = serde_json::to_string_pretty(&rows).context("serializing sweep").map_err(Failure::Internal)?;
                for (name, body) in [("sweep.csv", csv.clone()), ("sweep.json", json + "\n")] {
                    let path = dir.join(name);
                    std::fs::write(&path, body)
                        .with_context(|| format!("writing {}", path.display()))
                        .map_err(Failure::Input)?;
                }
            }
            print!("{csv}");
            for row in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("alpha = {}: {}", row.alpha, row.error.as_deref().unwrap_or_default());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Input(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(e))) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
