//! Command-line front end: argument parsing, model files, reports.

pub mod args;
pub mod commands;
pub mod error;
pub mod metrics;
pub mod model_file;
pub mod pgm;

pub use args::{Cli, Command};
pub use error::{CliError, Result};

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Validation("--workers must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match &cli.command {
        Command::Train(a) => {
            let r = commands::train(a)?;
            println!("trained on {} samples, training accuracy {:.4}", r.samples, r.training_accuracy);
        }
        Command::Evaluate(a) => {
            let r = commands::evaluate(a)?;
            println!("accuracy {:.4} ({}/{})", r.metrics.accuracy, r.metrics.correct, r.metrics.samples);
        }
        Command::Confusion(a) => {
            let r = commands::confusion(a)?;
            println!("accuracy {:.4}", r.accuracy);
        }
        Command::Classify(a) => {
            for p in commands::classify(a)? {
                let flag = if p.no_evidence { "\tno-evidence" } else { "" };
                println!("{}\t{}\t{}{flag}", p.source, p.predicted, p.name);
            }
        }
        Command::Sensitivity(a) => {
            let r = commands::sensitivity(a)?;
            println!("wrote {} maps to {}", r.maps.len(), a.out.display());
        }
    }
    Ok(())
}
