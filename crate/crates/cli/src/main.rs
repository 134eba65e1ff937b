use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lipflow_cli::commands::{self, CommandOutput};
use lipflow_cli::{load_config, CliError, Globals};

#[derive(Debug, Parser)]
#[command(name = "lipflow", version, about = "Lipschitz discriminators, exact W1 and particle flows")]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = "lipflow-out")]
    out_dir: PathBuf,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact W1 between two point-cloud CSV files, with dual potentials.
    Ot { real: PathBuf, fake: PathBuf },
    /// Checks an objective against the family conditions.
    Family { name: String, param: Option<f64> },
    /// Runs particle flows (or closed-form fields); several configs run in parallel.
    Flow {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Runs the theorem suite on a config's scenario.
    Verify { config: PathBuf },
    /// Value surfaces over an activation x learning-rate x depth grid.
    Surface { config: PathBuf },
}

fn emit(out: &CommandOutput, dir: &std::path::Path, g: &Globals) -> Result<(), CliError> {
    print!("{}", out.stdout);
    if !out.files.is_empty() {
        let written = out.files.write_to(dir)?;
        g.progress(format!("wrote {} files to {}", written.len(), dir.display()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let g = Globals {
        seed: cli.seed,
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    let mut ok = true;
    match cli.command {
        Command::Ot { real, fake } => {
            let out = commands::ot(&real, &fake, &g)?;
            emit(&out, &g.out_dir, &g)?;
            ok &= !out.failed;
        }
        Command::Family { name, param } => {
            let out = commands::family(&name, param, &g)?;
            emit(&out, &g.out_dir, &g)?;
        }
        Command::Flow { configs } => {
            // parse everything first so a bad config writes nothing
            let manifests = configs.iter().map(|p| load_config(p, g.seed)).collect::<Result<Vec<_>, _>>()?;
            let results = commands::flow_many(&manifests, &g);
            for (m, res) in manifests.iter().zip(results) {
                match res {
                    Ok(out) => emit(&out, &g.out_dir.join(&m.output.name), &g)?,
                    Err(e) => {
                        eprintln!("error: {}: {e}", m.output.name);
                        ok = false;
                    }
                }
            }
        }
        Command::Verify { config } => {
            let m = load_config(&config, g.seed)?;
            let out = commands::verify(&m, &g)?;
            emit(&out, &g.out_dir.join(&m.output.name), &g)?;
            ok &= !out.failed;
        }
        Command::Surface { config } => {
            let m = load_config(&config, g.seed)?;
            let out = commands::surface(&m, &g)?;
            emit(&out, &g.out_dir.join(&m.output.name), &g)?;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
