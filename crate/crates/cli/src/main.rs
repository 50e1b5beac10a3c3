//! `corona`: simulate CEUS data, run L+S solvers and baselines, train and
//! evaluate the unfolded network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;

use clap::{Parser, Subcommand};

use commands::{eval, label, simulate, solve, train};

#[derive(Debug, Parser)]
#[command(name = "corona", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate simulated D/L/S movie triples.
    Simulate(simulate::SimulateArgs),
    /// Decompose or filter one movie.
    Solve(solve::SolveArgs),
    /// Train the unfolded network.
    Train(train::TrainArgs),
    /// Images, contrast metrics and MSE curves.
    Eval(eval::EvalArgs),
    /// Label movies with solver outputs for stage-2 training.
    Label(label::LabelArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Solve(a) => solve::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Label(a) => label::run(a),
    };
    if let Err(e) = res {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
