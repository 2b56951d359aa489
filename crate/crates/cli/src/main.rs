use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topodeflate::config::{RunConfig, OUTPUT_ENV_VAR, PRESETS};
use topodeflate::runner::{run, RunOptions};

#[derive(Parser)]
#[command(name = "topodeflate", version, about = "Find multiple local minimizers of flow topology optimization problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a deflation search from a config file or a named preset.
    Run(RunArgs),
    /// Print a preset as a config file.
    ShowPreset { name: String },
    /// List the available presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; takes precedence over the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Total number of deflation iterations.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// VTK file with a `psi` point field to use as the initial level set.
    #[arg(long)]
    seed_init: Option<PathBuf>,
}

fn execute(args: RunArgs) -> topodeflate::Result<usize> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::from_file(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    if let Some(out) = args.out {
        config.output.dir = out;
    } else if let Some(dir) = std::env::var_os(OUTPUT_ENV_VAR) {
        config.output.dir = dir.into();
    }
    let opts = RunOptions { max_rounds: args.max_rounds, seed_init: args.seed_init };
    let summary = run(&config, &opts, &mut std::io::stderr())?;
    println!("{}", summary.out_dir.display());
    Ok(summary.minimizers)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            ExitCode::SUCCESS
        }
        Command::ShowPreset { name } => match RunConfig::preset(&name).and_then(|c| c.resolved().to_toml_string()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run(args) => match execute(args) {
            Ok(n) if n > 0 => ExitCode::SUCCESS,
            Ok(_) => {
                eprintln!("error: no minimizer found");
                ExitCode::FAILURE
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
