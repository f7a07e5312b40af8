//! Command-line surface: vocabulary construction, training, evaluation,
//! pruning, querying, and row-norm export, glued from the library modules.
//!
//! Everything that affects results is a flag with a deterministic default,
//! and `train` echoes the full resolved configuration into a manifest, so
//! a run can be reproduced byte-for-byte from its output directory alone.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, Vocabulary};
use crate::error::{Error, Result};
use crate::network::{self, HiddenLayer, ModelParams};
use crate::prox::{self, RegularizerKind, RegularizerSpec};
use crate::pruning;
use crate::textio;
use crate::trainer::{self, TrainConfig};

#[derive(Parser)]
#[command(
    name = "autosize-nnlm",
    about = "Feedforward n-gram language models whose hidden layers shrink themselves during training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a text corpus and write a frequency-ranked vocabulary file.
    BuildVocab {
        /// Corpus file: one sentence per line, whitespace-tokenized.
        #[arg(long)]
        corpus: PathBuf,
        /// Cap on vocabulary size, reserved tokens included.
        #[arg(long, default_value_t = 100_000)]
        max_size: usize,
        /// Output vocabulary file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes model.txt, history.csv and manifest.txt.
    Train(TrainArgs),
    /// Print the perplexity of a model on a text file.
    Perplexity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Text to score, one sentence per line.
        #[arg(long)]
        text: PathBuf,
    },
    /// Remove exactly-zero hidden units and write the compacted model.
    Prune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the most likely next words after a context.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Context words, space-separated; padded or truncated on the left
        /// to the model's context width.
        #[arg(long)]
        context: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Write per-unit incoming-group norms of one hidden layer as CSV.
    ExportWeights {
        #[arg(long)]
        model: PathBuf,
        /// Hidden layer to export: 1 or 2.
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus: one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary file from build-vocab.
    #[arg(long)]
    vocab: PathBuf,
    /// Directory for model.txt, history.csv and manifest.txt.
    #[arg(long)]
    out_dir: PathBuf,
    /// N-gram order (model sees n-1 context words).
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Word embedding dimension.
    #[arg(long, default_value_t = 50)]
    embed_dim: usize,
    /// Hidden layer widths.
    #[arg(long, num_args = 2, value_names = ["H1", "H2"], default_values_t = [1000, 50])]
    hidden: Vec<usize>,
    /// Group regularizer: none, l1, l21 or linf1.
    #[arg(long, default_value = "none")]
    reg: RegularizerKind,
    /// Regularizer strength on the per-example average loss scale.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Constant learning rate.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Minibatch size.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Number of training epochs.
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Seed for initialization, shuffling and proximal pivot choices.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Hold out the last sentences totalling at least this many tokens as
    /// a validation set; 0 trains on everything.
    #[arg(long, default_value_t = 5000)]
    val_tokens: usize,
    /// Structurally remove zero units before saving the model.
    #[arg(long)]
    compact_on_finish: bool,
}

/// Resolved run configuration as key=value lines, written next to the
/// model so the run can be reproduced exactly.
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new() -> Self {
        RunManifest { entries: Vec::new() }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            out.push_str(key);
            out.push('=');
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_atomic(path, &self.to_text())
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}

/// Parses arguments and runs one command. Parse failures (and --help)
/// print through clap and exit the process; everything else reports
/// through the library error type.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match cli.command {
        Command::BuildVocab { corpus, max_size, out } => cmd_build_vocab(&corpus, max_size, &out),
        Command::Train(args) => cmd_train(args),
        Command::Perplexity { model, vocab, text } => cmd_perplexity(&model, &vocab, &text),
        Command::Prune { model, out } => cmd_prune(&model, &out),
        Command::Query { model, vocab, context, top_k } => cmd_query(&model, &vocab, &context, top_k),
        Command::ExportWeights { model, layer, out } => cmd_export_weights(&model, layer, &out),
    }
}

fn cmd_build_vocab(corpus_path: &Path, max_size: usize, out: &Path) -> Result<()> {
    let text = textio::read_to_string(corpus_path)?;
    let vocab = Vocabulary::build(text.lines().map(corpus::tokenize_line), max_size)?;
    vocab.save(out)?;
    println!("{}", vocab.size());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let [h1, h2] = args.hidden[..] else {
        return Err(Error::Config("--hidden takes exactly two widths".to_string()));
    };
    let vocab = Vocabulary::load(&args.vocab)?;
    let sentences = corpus::load_corpus_ids(&args.corpus, &vocab)?;
    let corpus_sentences = sentences.len();
    let corpus_tokens: usize = sentences.iter().map(Vec::len).sum();
    let (train_sents, val_sents) = corpus::split_validation(sentences, args.val_tokens)?;
    let train_sentences = train_sents.len();
    let train_data = corpus::extract_ngrams(train_sents, args.n, &vocab)?;
    let validation = if val_sents.is_empty() {
        None
    } else {
        Some(corpus::extract_ngrams(val_sents, args.n, &vocab)?)
    };

    let spec = RegularizerSpec::new(args.reg, args.lambda)?;
    let config = TrainConfig {
        epochs: args.epochs,
        eta: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        validation,
    };

    let mut manifest = RunManifest::new();
    manifest.push("command", "train");
    manifest.push("corpus", args.corpus.display());
    manifest.push("vocab", args.vocab.display());
    manifest.push("out_dir", args.out_dir.display());
    manifest.push("n", args.n);
    manifest.push("embed_dim", args.embed_dim);
    manifest.push("hidden1", h1);
    manifest.push("hidden2", h2);
    manifest.push("reg", args.reg);
    manifest.push("lambda", textio::fmt_f64(args.lambda));
    manifest.push("lr", textio::fmt_f64(args.lr));
    manifest.push("batch", args.batch);
    manifest.push("epochs", args.epochs);
    manifest.push("seed", args.seed);
    manifest.push("val_tokens", args.val_tokens);
    manifest.push("compact_on_finish", args.compact_on_finish);
    manifest.push("vocab_size", vocab.size());
    manifest.push("corpus_sentences", corpus_sentences);
    manifest.push("corpus_tokens", corpus_tokens);
    manifest.push("train_sentences", train_sentences);
    manifest.push("train_examples", train_data.len());
    manifest.push(
        "val_examples",
        config.validation.as_ref().map_or(0, |v| v.len()),
    );
    manifest.push("conventions", "natural_log,predict_eos,bos_padding");

    let mut params = network::init_params(args.n, vocab.size(), args.embed_dim, h1, h2, args.seed)?;
    let history = trainer::train(&mut params, &train_data, &config, &spec)?;

    if let Some(record) = history.records.last() {
        let val = match record.val_perplexity {
            Some(p) => format!(", val perplexity {p:.3}"),
            None => String::new(),
        };
        println!(
            "epoch {}: active units {}/{} and {}/{}, train nll/token {:.4}{}",
            record.epoch, record.active_h1, h1, record.active_h2, h2, record.train_nll_per_token, val
        );
    }
    if args.compact_on_finish {
        let (compacted, report) = pruning::compact(&params);
        params = compacted;
        print!("{report}");
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    params.save(&args.out_dir.join("model.txt"))?;
    history.save(&args.out_dir.join("history.csv"))?;
    manifest.save(&args.out_dir.join("manifest.txt"))?;
    println!("wrote model.txt, history.csv, manifest.txt to {}", args.out_dir.display());
    Ok(())
}

fn load_model_and_vocab(model: &Path, vocab_path: &Path) -> Result<(ModelParams, Vocabulary)> {
    let params = ModelParams::load(model)?;
    let vocab = Vocabulary::load(vocab_path)?;
    if params.vocab_size() != vocab.size() {
        return Err(Error::Input(format!(
            "model expects a vocabulary of {} entries but {} has {}",
            params.vocab_size(),
            vocab_path.display(),
            vocab.size()
        )));
    }
    Ok((params, vocab))
}

fn cmd_perplexity(model: &Path, vocab: &Path, text: &Path) -> Result<()> {
    let (params, vocab) = load_model_and_vocab(model, vocab)?;
    let sentences = corpus::load_corpus_ids(text, &vocab)?;
    let data = corpus::extract_ngrams(sentences, params.n, &vocab)?;
    let ppl = network::perplexity(&params, &data)?;
    println!("{}", textio::fmt_f64(ppl));
    Ok(())
}

fn cmd_prune(model: &Path, out: &Path) -> Result<()> {
    let params = ModelParams::load(model)?;
    let (compacted, report) = pruning::compact(&params);
    compacted.save(out)?;
    print!("{report}");
    Ok(())
}

fn cmd_query(model: &Path, vocab: &Path, context: &str, top_k: usize) -> Result<()> {
    let (params, vocab) = load_model_and_vocab(model, vocab)?;
    let ids = vocab.numberize(&corpus::tokenize_line(context));
    let mut ctx = vec![vocab.bos_id(); params.context_len()];
    for (dst, &src) in ctx.iter_mut().rev().zip(ids.iter().rev()) {
        *dst = src;
    }
    let logprobs = network::forward(&params, &ctx)?;
    let mut ranked: Vec<(usize, f64)> = logprobs.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite log-probs").then(a.0.cmp(&b.0)));
    for &(id, lp) in ranked.iter().take(top_k) {
        println!("{} {}", vocab.token(id), textio::fmt_f64(lp));
    }
    Ok(())
}

fn cmd_export_weights(model: &Path, layer: usize, out: &Path) -> Result<()> {
    let layer = match layer {
        1 => HiddenLayer::First,
        2 => HiddenLayer::Second,
        other => {
            return Err(Error::Config(format!("layer must be 1 or 2, got {other}")));
        }
    };
    let params = ModelParams::load(model)?;
    let mut norms = prox::row_group_norms(&params, layer);
    norms.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite norms"));
    let zero_rows = norms.iter().filter(|(linf, _)| *linf == 0.0).count();
    let mut csv = String::from("linf_norm,l2_norm\n");
    for (linf, l2) in &norms {
        csv.push_str(&format!("{},{}\n", textio::fmt_f64(*linf), textio::fmt_f64(*l2)));
    }
    csv.push_str(&format!("zero_rows,{zero_rows}\n"));
    textio::write_atomic(out, &csv)
}
