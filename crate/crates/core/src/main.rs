use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fiducial_string::cli::{self, CliError, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "fidstring",
    version,
    about = "Fiducial distributions restricted to a curve"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Name {
    Seidenfeld,
    Line,
    Circle,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, tabulate and sample the restricted fiducial.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo conditioning oracle named in the config.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write config.json for a built-in scenario.
    Scenario {
        #[arg(long)]
        name: Name,
        /// Observation `x1,x2`.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0], allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Seidenfeld: half-width of the parameter interval.
        #[arg(long, default_value_t = 2.0)]
        t_bound: f64,
        /// Line: base point `p1,p2`.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0], allow_hyphen_values = true)]
        p0: Vec<f64>,
        /// Line: unit direction `e1,e2`.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.0], allow_hyphen_values = true)]
        e: Vec<f64>,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        t_max: f64,
        /// Circle: radius.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn pair(v: &[f64], flag: &str) -> Result<[f64; 2], CliError> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::Config(format!("--{flag}: expected 2 numbers"))),
    }
}

fn dispatch(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Run { config, out } => cli::run(&config, &out),
        Command::Oracle { config, out } => cli::oracle_cmd(&config, &out),
        Command::Scenario {
            name,
            x,
            t_bound,
            p0,
            e,
            t_min,
            t_max,
            r,
            out,
        } => {
            let x = pair(&x, "x")?;
            let spec = match name {
                Name::Seidenfeld => ScenarioSpec::Seidenfeld { x, t_bound },
                Name::Line => ScenarioSpec::Line {
                    p0: pair(&p0, "p0")?,
                    e: pair(&e, "e")?,
                    t_min,
                    t_max,
                    x,
                },
                Name::Circle => ScenarioSpec::Circle { r, x },
            };
            cli::scenario_cmd(&spec, &out)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
