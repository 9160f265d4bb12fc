//! `jointtag train | predict | eval`.
//!
//! Exit codes: 0 on success, 1 when a command fails while running, 2 for
//! usage problems such as bad flags or unreadable input files.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bundle::{history_line, load_bundle, parse_config, save_bundle, ConfigFile};
use crate::conllu::{merge_predictions, parse_conllu_bytes, serialize_conllu, Document};
use crate::embeddings::EmbeddingTable;
use crate::metrics::evaluate;
use crate::training::train;

#[derive(Debug, Parser)]
#[command(name = "jointtag", version, about = "Joint lemmatizer, POS tagger and morphological feature tagger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to a directory.
    Train(Box<TrainArgs>),
    /// Replace LEMMA, UPOS and FEATS of every word with model predictions.
    Predict(PredictArgs),
    /// Score predicted CoNLL-U against gold annotation.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "CONLLU")]
    pub train: PathBuf,
    #[arg(long, value_name = "CONLLU")]
    pub dev: PathBuf,
    /// Word vectors in text format: optional "count dim" header, then a word and its values per line.
    #[arg(long, value_name = "VEC")]
    pub embeddings: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// `key = value` file with training and model settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda_lemma: Option<f64>,
    #[arg(long)]
    pub lambda_pos: Option<f64>,
    /// Default weight of every feature head.
    #[arg(long)]
    pub lambda_feats: Option<f64>,
    /// Weight of one feature head, as KEY=WEIGHT. Repeatable.
    #[arg(long, value_name = "KEY=WEIGHT", value_parser = parse_key_weight)]
    pub lambda_feat: Vec<(String, f64)>,
    #[arg(long)]
    pub lr_initial: Option<f64>,
    #[arg(long)]
    pub lr_decayed: Option<f64>,
    /// First epoch trained with the decayed learning rate.
    #[arg(long)]
    pub lr_decay_epoch: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub rmsprop_rho: Option<f64>,
    #[arg(long)]
    pub rmsprop_epsilon: Option<f64>,
    /// Global gradient norm limit; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    #[arg(long, value_name = "CONLLU")]
    pub input: PathBuf,
    #[arg(long, value_name = "CONLLU")]
    pub output: PathBuf,
    /// Word vectors to use instead of the ones recorded in the model.
    #[arg(long, value_name = "VEC")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "CONLLU")]
    pub gold: PathBuf,
    #[arg(long, value_name = "CONLLU")]
    pub pred: PathBuf,
    /// Print `key=value` records instead of a table.
    #[arg(long)]
    pub records: bool,
}

fn parse_key_weight(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected KEY=WEIGHT, got {s:?}"))?;
    let value = value.parse().map_err(|e| format!("{value:?}: {e}"))?;
    Ok((key.to_owned(), value))
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_conllu(path: &Path) -> Result<Document, CliError> {
    parse_conllu_bytes(&read_input(path)?).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read_embeddings(path: &Path) -> Result<EmbeddingTable, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    EmbeddingTable::read_text(BufReader::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Defaults, then the config file, then command-line flags.
fn resolve_config(args: &TrainArgs) -> Result<ConfigFile, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let t = &mut cfg.training;
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field {
                t.$field = v;
            })*
        };
    }
    apply!(
        seed,
        lambda_lemma,
        lambda_pos,
        lambda_feats,
        lr_initial,
        lr_decayed,
        lr_decay_epoch,
        patience,
        batch_size,
        max_epochs,
        rmsprop_rho,
        rmsprop_epsilon,
        clip_norm
    );
    for (key, weight) in &args.lambda_feat {
        t.lambda_feat.insert(key.clone(), *weight);
    }
    t.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(args)?;
    let train_bytes = read_input(&args.train)?;
    let dev_bytes = read_input(&args.dev)?;
    let embeddings = read_embeddings(&args.embeddings)?;
    let train_doc = parse_conllu_bytes(&train_bytes).map_err(|e| runtime(format!("{}: {e}", args.train.display())))?;
    let dev_doc = parse_conllu_bytes(&dev_bytes).map_err(|e| runtime(format!("{}: {e}", args.dev.display())))?;

    if !cfg.word_dim_set {
        cfg.model.word_dim = embeddings.dim();
    }
    let stdout = io::stdout();
    let mut on_epoch = |record: &crate::training::EpochRecord| {
        let mut out = stdout.lock();
        // a closed stdout must not abort training
        let _ = writeln!(out, "{}", history_line(record));
    };
    let output = train(&train_doc, &dev_doc, &embeddings, &cfg.model, &cfg.training, &mut on_epoch).map_err(runtime)?;

    let embeddings_path = fs::canonicalize(&args.embeddings).unwrap_or_else(|_| args.embeddings.clone());
    save_bundle(
        &args.out,
        &output.tagger,
        &cfg.training,
        Some(&embeddings_path),
        &output.history,
    )
    .map_err(runtime)?;
    log::info!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    if !args.model.is_dir() {
        return Err(CliError::Usage(format!("model directory {} does not exist", args.model.display())));
    }
    let input = read_conllu(&args.input)?;
    let bundle = load_bundle(&args.model).map_err(runtime)?;
    let embeddings_path = args
        .embeddings
        .clone()
        .or(bundle.embeddings)
        .ok_or_else(|| CliError::Usage("the model records no embeddings file; pass --embeddings".into()))?;
    let embeddings = read_embeddings(&embeddings_path)?;
    let predictions = bundle
        .tagger
        .predict_sentences(&input.sentences, &embeddings, args.batch_size)
        .map_err(runtime)?;
    let merged = merge_predictions(&input, &predictions).map_err(runtime)?;
    fs::write(&args.output, serialize_conllu(&merged))
        .map_err(|e| runtime(format!("cannot write {}: {e}", args.output.display())))
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let gold = read_conllu(&args.gold)?;
    let pred = read_conllu(&args.pred)?;
    let report = evaluate(&gold, &pred).map_err(runtime)?;
    if args.records {
        print!("{}", report.to_records());
    } else {
        println!("{report}");
        println!("{}", report.summary());
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
