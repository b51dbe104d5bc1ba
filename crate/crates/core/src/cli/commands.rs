use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evalkit::{self, parse_analogy_dataset, ModelEncoder};
use crate::lexicon::{load_embeddings, parse_lexicon, parse_relation_triples, EmbeddingTable};
use crate::model::{RelationModel, SememeKnowledge, WordPair};
use crate::textenc::Vocabulary;
use crate::training::{self, load_relation_data, ScoringMode, TrainConfig};

use super::bundle::GraphBundle;
use super::checkpoint::Checkpoint;
use super::config::{resolve_config, SEED_ENV};
use super::synth::{self, SynthOptions};

#[derive(Parser, Debug)]
#[command(
    name = "sememelm",
    version,
    about = "Sememe-graph enhanced relation representations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    VectorOffset,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the sememe graph bundle from a lexicon and relation triples.
    BuildGraph {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the augmented subgraph of a word pair as JSON.
    InspectPair {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        head: String,
        #[arg(long)]
        tail: String,
        #[arg(long, default_value_t = 0)]
        hops: usize,
    },
    /// Train a model and write a checkpoint plus per-epoch metrics.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        relations: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the checkpoint path with `.metrics.jsonl` appended.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Answer an analogy dataset and write a JSON report.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Needed for graph-based scoring modes.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        scoring: Option<String>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Append a one-line TSV summary to this file.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Print the relation vector of one pair as JSON.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        head: String,
        #[arg(long)]
        tail: String,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        scoring: Option<String>,
    },
    /// Compare tape gradients with central differences on a random fixture.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Generate the synthetic fixture.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Errors are reported with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { what, line, message } => Error::Parse {
            what,
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn load_bundle(path: &Path) -> Result<GraphBundle> {
    in_file(path, GraphBundle::from_json(&read_text(path)?))
}

pub fn load_embedding_file(path: &Path) -> Result<EmbeddingTable> {
    in_file(path, load_embeddings(open(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&read_text(path)?)
}

fn knowledge_for(
    graph: Option<&Path>,
    embeddings: Option<&Path>,
    config: &TrainConfig,
) -> Result<Option<SememeKnowledge>> {
    match (graph, embeddings) {
        (Some(g), Some(e)) => Ok(Some(
            load_bundle(g)?.into_knowledge(load_embedding_file(e)?, config)?,
        )),
        (None, None) => Ok(None),
        _ => Err(Error::Config(
            "--graph and --embeddings must be given together".into(),
        )),
    }
}

fn scoring_for(flag: Option<&str>, config: &TrainConfig) -> Result<ScoringMode> {
    flag.map_or(Ok(config.scoring), str::parse)
}

/// Builds, trains and checkpoints a model from files on disk.
pub fn train_from_files(
    graph: &Path,
    relations: &Path,
    embeddings: &Path,
    config: &TrainConfig,
) -> Result<(Checkpoint, training::TrainReport)> {
    let knowledge = load_bundle(graph)?.into_knowledge(load_embedding_file(embeddings)?, config)?;
    let data = in_file(relations, load_relation_data(open(relations)?, config.seed))?;
    let words = knowledge
        .lexicon
        .entries()
        .iter()
        .map(|e| e.word.as_str())
        .chain(data.words());
    let vocab = Vocabulary::build(words);
    let mut model = RelationModel::init(config.model_config(), vocab, config.seed)?;
    let report = training::train(&mut model, Some(&knowledge), &data, config)?;
    Ok((
        Checkpoint {
            config: config.clone(),
            model,
        },
        report,
    ))
}

pub fn metrics_jsonl(report: &training::TrainReport) -> Result<String> {
    let mut s = String::new();
    for m in &report.metrics {
        s.push_str(&serde_json::to_string(m)?);
        s.push('\n');
    }
    Ok(s)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::BuildGraph {
            lexicon,
            triples,
            out: dest,
        } => {
            let (mut inventory, lex) = in_file(&lexicon, parse_lexicon(open(&lexicon)?))?;
            let trip = in_file(&triples, parse_relation_triples(open(&triples)?, &mut inventory))?;
            let bundle = GraphBundle::new(inventory, lex, &trip)?;
            write_text(&dest, &bundle.to_json()?)?;
            writeln!(out, "{}", serde_json::to_string(&bundle.counts())?)?;
        }
        Command::InspectPair {
            graph,
            head,
            tail,
            hops,
        } => {
            let bundle = load_bundle(&graph)?;
            let knowledge_config = TrainConfig {
                hops,
                ..TrainConfig::default()
            };
            let dim = knowledge_config.graph_dim;
            let inventory = bundle.inventory.clone();
            let k = bundle.into_knowledge(EmbeddingTable::new(dim)?, &knowledge_config)?;
            match k.pair_subgraph(&WordPair::new(head, tail))? {
                Some(sg) => writeln!(out, "{}", serde_json::to_string_pretty(&sg.to_json(&inventory))?)?,
                None => writeln!(out, "{{\"degenerate\": true}}")?,
            }
        }
        Command::Train {
            graph,
            relations,
            embeddings,
            config,
            overrides,
            out: dest,
            metrics,
        } => {
            let file_text = config.as_deref().map(read_text).transpose()?;
            let env_seed = std::env::var(SEED_ENV).ok();
            let config = resolve_config(file_text.as_deref(), env_seed.as_deref(), &overrides)?;
            let (checkpoint, report) = train_from_files(&graph, &relations, &embeddings, &config)?;
            write_text(&dest, &checkpoint.to_json()?)?;
            let metrics_path = metrics.unwrap_or_else(|| {
                let mut p = dest.clone().into_os_string();
                p.push(".metrics.jsonl");
                PathBuf::from(p)
            });
            write_text(&metrics_path, &metrics_jsonl(&report)?)?;
            writeln!(
                out,
                "trained {} steps; checkpoint {}; metrics {}",
                report.steps(),
                dest.display(),
                metrics_path.display()
            )?;
        }
        Command::Eval {
            checkpoint,
            dataset,
            report,
            graph,
            embeddings,
            scoring,
            baseline,
            tsv,
        } => {
            let questions = in_file(&dataset, parse_analogy_dataset(open(&dataset)?))?;
            let name = dataset
                .file_stem()
                .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
            let result = match baseline {
                Some(Baseline::VectorOffset) => {
                    let path = embeddings.as_deref().ok_or_else(|| {
                        Error::Config("the vector-offset baseline needs --embeddings".into())
                    })?;
                    evalkit::vector_offset_baseline(&load_embedding_file(path)?, &name, &questions)?
                }
                None => {
                    let path = checkpoint
                        .as_deref()
                        .ok_or_else(|| Error::Config("eval needs --checkpoint".into()))?;
                    let ck = load_checkpoint(path)?;
                    let knowledge = knowledge_for(graph.as_deref(), embeddings.as_deref(), &ck.config)?;
                    let encoder = ModelEncoder {
                        model: &ck.model,
                        knowledge: knowledge.as_ref(),
                        scoring: scoring_for(scoring.as_deref(), &ck.config)?,
                    };
                    evalkit::evaluate(&encoder, &name, &questions)?
                }
            };
            write_text(&report, &(result.to_json()? + "\n"))?;
            if let Some(tsv) = tsv {
                let mut f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&tsv)
                    .map_err(|source| Error::Io {
                        path: tsv.clone(),
                        source,
                    })?;
                result.write_tsv_line(&mut f)?;
            }
            writeln!(out, "accuracy {:.4} over {} questions", result.accuracy, result.n)?;
        }
        Command::Embed {
            checkpoint,
            head,
            tail,
            graph,
            embeddings,
            scoring,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let knowledge = knowledge_for(graph.as_deref(), embeddings.as_deref(), &ck.config)?;
            let pair = WordPair::new(head, tail);
            let v = evalkit::relation_representation(
                &ck.model,
                knowledge.as_ref(),
                &pair,
                scoring_for(scoring.as_deref(), &ck.config)?,
            )?;
            writeln!(
                out,
                "{}",
                serde_json::json!({ "pair": pair.to_string(), "vector": v })
            )?;
        }
        Command::Gradcheck {
            seed,
            nodes,
            dim,
            eps,
            tolerance,
        } => {
            let r = super::gradcheck::run(seed, nodes, dim, eps)?;
            let pass = r.max_rel_error < tolerance;
            let worst = r.worst.as_ref().map(|(n, k)| format!("{n}[{k}]"));
            writeln!(
                out,
                "{}",
                serde_json::json!({
                    "seed": seed,
                    "nodes": nodes,
                    "dim": dim,
                    "coordinates": r.coordinates,
                    "max_rel_error": r.max_rel_error,
                    "worst": worst,
                    "pass": pass,
                })
            )?;
            if !pass {
                return Ok(1);
            }
        }
        Command::Synth { seed, out: dir } => {
            let fixture = synth::generate(&SynthOptions {
                seed,
                ..SynthOptions::default()
            })?;
            fixture.write_to(&dir)?;
            writeln!(out, "wrote {} files to {}", fixture.files.len(), dir.display())?;
        }
    }
    Ok(0)
}

/// Parses arguments, runs one command and returns the process exit code.
///
/// Failures print a single `error: <kind>: <message>` line to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            2
        }
    }
}
