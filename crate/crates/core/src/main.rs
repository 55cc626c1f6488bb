use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alnls::cli_io::{self, Command, Overrides, MANIFEST_FILE};
use alnls::Error;

#[derive(Parser)]
#[command(name = "alnls", version, about = "Damped and forced Ablowitz-Ladik / discrete NLS lattice toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate one trajectory and write its diagnostics as CSV.
    Simulate(RunArgs),
    /// Sweep ε and fit the closeness exponent between the two lattices.
    Closeness(RunArgs),
    /// Check absorbing-ball entry and Gronwall envelopes on an ensemble.
    Absorbing(RunArgs),
    /// Find tail cut-offs for the requested thresholds.
    Tails(RunArgs),
    /// Compare post-transient clouds of the two lattices across ε.
    Congruence(RunArgs),
    /// Sample Lipschitz ratios of the nonlinearity on a ball.
    Lipschitz(RunArgs),
    /// Check the monotone norm bound on a forced Ablowitz-Ladik ensemble.
    Uniform(RunArgs),
    /// Operator identities and conservative-limit drift.
    Validate(RunArgs),
    /// Re-run a manifest and compare every output byte for byte.
    Replay {
        /// Path to a manifest.json written by an earlier run.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "n-half")]
    n_half: Option<usize>,
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot configure {k} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Closeness(a) => (Command::Closeness, a),
        Sub::Absorbing(a) => (Command::Absorbing, a),
        Sub::Tails(a) => (Command::Tails, a),
        Sub::Congruence(a) => (Command::Congruence, a),
        Sub::Lipschitz(a) => (Command::Lipschitz, a),
        Sub::Uniform(a) => (Command::Uniform, a),
        Sub::Validate(a) => (Command::Validate, a),
        Sub::Replay { manifest, out, threads } => {
            set_threads(threads)?;
            let m = cli_io::read_manifest(&manifest)?;
            let report = cli_io::replay(&m, &out)?;
            for name in &report.matched {
                println!("identical  {name}");
            }
            for name in &report.mismatched {
                println!("DIFFERENT  {name}");
            }
            return if report.identical() {
                Ok(())
            } else {
                Err(Error::Failed(format!("{} output(s) differ", report.mismatched.len())))
            };
        }
    };
    set_threads(args.threads)?;
    let overrides = Overrides {
        seed: args.seed,
        n_half: args.n_half,
    };
    let config = cli_io::parse_config(&args.config, overrides)?;
    let (manifest, failure) = cli_io::run_with_manifest(command, &config, &args.out, args.threads)?;
    for o in &manifest.outputs {
        println!("wrote {}", args.out.join(&o.path).display());
    }
    println!("wrote {}", args.out.join(MANIFEST_FILE).display());
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
