//! Command-line front end: configuration, checkpoints, graph bundles and the
//! synthetic fixture generator.

pub mod bundle;
pub mod checkpoint;
mod commands;
pub mod config;
pub mod gradcheck;
pub mod synth;

pub use commands::{
    load_bundle, load_checkpoint, load_embedding_file, metrics_jsonl, run, train_from_files, Cli, Command,
};
