use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nls_cascade::runner::{self, Mode, RunOptions, DEFAULT_CONFIG_TOML};

#[derive(Parser)]
#[command(name = "nls-cascade", version, about = "Energy-cascade experiments for the cubic NLS on the two-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Substitute the small NLS parameters used by the test suite.
    #[arg(long)]
    desk_scale: bool,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Resonance tables and mode sets.
    Resonances(RunArgs),
    /// Integrate the resonant system.
    EvolveResonant(RunArgs),
    /// Run the split-step NLS solver.
    EvolveNls(RunArgs),
    /// Wiener distance between NLS and the approximant over several eps.
    Compare(RunArgs),
    /// Power laws, ignition and remainder constants.
    CascadeReport(RunArgs),
    /// Axis modes (0,n) from the five-mode datum.
    Figure1(RunArgs),
    /// Control run from the square datum.
    Figure2(RunArgs),
    /// Print the annotated default config.
    DefaultConfig,
    /// Check a config and list every problem.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mode to validate for; the config's own mode when omitted.
        #[arg(long)]
        mode: Option<String>,
    },
}

fn parse_mode(name: &str) -> Option<Mode> {
    [
        Mode::Resonances,
        Mode::EvolveResonant,
        Mode::EvolveNls,
        Mode::Compare,
        Mode::CascadeReport,
        Mode::Figure1,
        Mode::Figure2,
    ]
    .into_iter()
    .find(|m| m.name() == name)
}

fn execute(mode: Mode, args: RunArgs) -> ExitCode {
    let mut config = match runner::load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    config.mode = mode;
    let opts = RunOptions {
        desk_scale: args.desk_scale,
        out_dir: args.out,
    };
    match runner::run(&config, &opts) {
        Ok(outcome) => {
            for (name, pass) in &outcome.manifest.pass_flags {
                println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
            }
            println!("artifacts in {}", outcome.out_dir.display());
            if outcome.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Resonances(a) => execute(Mode::Resonances, a),
        Command::EvolveResonant(a) => execute(Mode::EvolveResonant, a),
        Command::EvolveNls(a) => execute(Mode::EvolveNls, a),
        Command::Compare(a) => execute(Mode::Compare, a),
        Command::CascadeReport(a) => execute(Mode::CascadeReport, a),
        Command::Figure1(a) => execute(Mode::Figure1, a),
        Command::Figure2(a) => execute(Mode::Figure2, a),
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG_TOML}");
            ExitCode::SUCCESS
        }
        Command::Validate { config, mode } => {
            let mut c = match runner::load_config(config.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(m) = mode {
                match parse_mode(&m) {
                    Some(m) => c.mode = m,
                    None => {
                        eprintln!("error: unknown mode `{m}`");
                        return ExitCode::from(2);
                    }
                }
            }
            let diags = c.validate();
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
