//! Batch operator surface: synthetic data, manifests, codec passes,
//! tokenization, tokenizer/LM training, generation, evaluation and file
//! inspection. Every run writes a JSON metadata sidecar so it can be
//! reproduced from its arguments and seed alone; failures emit machine
//! readable JSON on stderr and a nonzero exit code.

mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "social-motion", version, about = "Multi-person motion-language toolkit")]
struct Cli {
    /// Print machine-readable JSON to stdout instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic captioned multi-person scene corpus.
    SynthData(commands::SynthDataArgs),
    /// Scan a scene directory, split it and fit bins plus feature stats.
    BuildManifest(commands::BuildManifestArgs),
    /// Encode a scene file into canonical features plus relative poses.
    Encode(commands::EncodeArgs),
    /// Decode a feature document back into a scene file.
    Decode(commands::DecodeArgs),
    /// Turn a scene into motion tokens and relative-pose bins.
    Tokenize(commands::TokenizeArgs),
    /// Reconstruct a scene from a token document.
    Detokenize(commands::DetokenizeArgs),
    /// Train the motion tokenizer on a manifest's training split.
    TrainVq(commands::TrainVqArgs),
    /// Train the language model (pretraining or instruction stage).
    TrainLm(commands::TrainLmArgs),
    /// Autoregressive generation from a text prompt.
    Generate(commands::GenerateArgs),
    /// Compute evaluation metrics between two scene sets.
    Evaluate(commands::EvaluateArgs),
    /// Summarize a scene, checkpoint, manifest or vocabulary file.
    Inspect(commands::InspectArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(args) => commands::synth_data(args, cli.json),
        Command::BuildManifest(args) => commands::build_manifest(args, cli.json),
        Command::Encode(args) => commands::encode(args, cli.json),
        Command::Decode(args) => commands::decode(args, cli.json),
        Command::Tokenize(args) => commands::tokenize(args, cli.json),
        Command::Detokenize(args) => commands::detokenize(args, cli.json),
        Command::TrainVq(args) => commands::train_vq(args, cli.json),
        Command::TrainLm(args) => commands::train_lm(args, cli.json),
        Command::Generate(args) => commands::generate(args, cli.json),
        Command::Evaluate(args) => commands::evaluate(args, cli.json),
        Command::Inspect(args) => commands::inspect(args, cli.json),
    };
    if let Err(err) = result {
        let payload = serde_json::json!({
            "error": format!("{err:#}"),
            "kind": err.root_cause().to_string(),
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
