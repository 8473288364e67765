//! Command line front end. Exit codes: 0 success, 1 empty/no-result
//! conditions, 2 input or validation errors, 3 numerical failure.

mod args;
mod commands;
mod vectors;

use clap::Parser;
use recipe_retrieval::Error;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Build(a) => commands::cmd_build(a),
        Command::Train(a) => commands::cmd_train(a),
        Command::Query(a) => commands::cmd_query(a),
        Command::Eval(a) => commands::cmd_eval(a),
        Command::Add(a) => commands::cmd_add(a),
    };
    match outcome {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EmptyLibrary => 1,
        Error::NonFiniteLoss { .. } => 3,
        _ => 2,
    }
}
