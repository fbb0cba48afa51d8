mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CompareArgs, DecomposeArgs, KmArgs, LabArgs, TrainArgs};

/// Concordance decomposition, encoder-decoder survival training and
/// size/censoring experiments.
#[derive(Parser, Debug)]
#[command(name = "survdecomp", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose the C-index of a prediction file into event-event and
    /// event-censored parts.
    Decompose(DecomposeArgs),
    /// Train the encoder-decoder model and write checkpoint, predictions and log.
    Train(TrainArgs),
    /// Run a size/censoring experiment grid.
    Lab(LabArgs),
    /// Compare fold-level results of two or more models.
    Compare(CompareArgs),
    /// Kaplan-Meier survival curve of a dataset.
    Km(KmArgs),
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<survdecomp::Error> for CliError {
    fn from(e: survdecomp::Error) -> Self {
        if e.is_numerical() {
            if let survdecomp::Error::TrainingDiverged { dump: Some(p), .. } = &e {
                return CliError::Numerical(format!("{e} (state dumped to {})", p.display()));
            }
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::Train(a) => commands::train(a),
        Command::Lab(a) => commands::lab(a),
        Command::Compare(a) => commands::compare(a),
        Command::Km(a) => commands::km(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
