use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use markov_girsanov::cli::{self, Law, Payoff, Suite, EXIT_USAGE};
use markov_girsanov::par;

#[derive(Parser)]
#[command(
    name = "girsanov",
    version,
    about = "Likelihood ratios and martingale checks for Markov chains"
)]
struct Args {
    /// Worker threads for sampling (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every matrix, distribution and control in a config.
    Validate { config: PathBuf },
    /// Sample paths and write one CSV row per sample.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        samples: usize,
        /// `reference` or `target`.
        #[arg(long, default_value = "reference")]
        law: Law,
    },
    /// Run check suites: girsanov, martingale, representation or all.
    Verify {
        config: PathBuf,
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Importance-sampling estimate of a terminal payoff under the target law.
    Estimate {
        config: PathBuf,
        /// `indicator:J` or `vector:v1,v2,...`.
        #[arg(long)]
        payoff: Payoff,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE as u8);
        }
        if let Err(e) = par::set_num_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match args.command {
        Command::Validate { config } => cli::cmd_validate(&config, &mut out, &mut err),
        Command::Simulate {
            config,
            out: csv,
            seed,
            samples,
            law,
        } => cli::cmd_simulate(&config, &csv, seed, samples, law, &mut err),
        Command::Verify { config, suite } => cli::cmd_verify(&config, suite, &mut out, &mut err),
        Command::Estimate {
            config,
            payoff,
            seed,
            samples,
        } => cli::cmd_estimate(&config, &payoff, seed, samples, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
