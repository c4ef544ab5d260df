use clap::{Parser, Subcommand};

use crate::commands::{
    evaluate_cmd, gradcheck, predict, prepare, similar, synth, train, EvaluateArgs, GradcheckArgs, PredictArgs,
    PrepareArgs, SimilarArgs, SynthArgs, TrainArgs,
};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "transnets", version, about = "Review-based rating prediction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw review export into a split dataset directory
    Prepare(PrepareArgs),
    /// Train a model (or sweep transform depths) on a prepared dataset
    Train(Box<TrainArgs>),
    /// MSE of a checkpoint on one split
    Evaluate(EvaluateArgs),
    /// Predict the rating of one (user, item) pair
    Predict(PredictArgs),
    /// Rank an item's training reviews by closeness to the predicted review
    Similar(SimilarArgs),
    /// Finite-difference gradient checks at tiny sizes
    Gradcheck(GradcheckArgs),
    /// Write the synthetic mood/quality corpus as JSON lines
    Synth(SynthArgs),
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Similar(a) => similar(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Synth(a) => synth(a),
    }
}
