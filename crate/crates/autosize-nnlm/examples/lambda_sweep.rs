//! Sweeps the regularizer strength on a teacher-student setup and prints
//! how the student's first hidden layer shrinks as lambda grows.
//!
//! A small teacher network (8 first-layer units) generates the corpus, so
//! the needed capacity is known. Students start four times wider; group
//! regularization should discover that most of the width is surplus while
//! validation perplexity stays near the unregularized run.
//!
//!     cargo run --example lambda_sweep -- 0 0.001 0.01 0.1

use clap::Parser;

use autosize_nnlm::corpus::{extract_ngrams, split_validation, tokenize_line};
use autosize_nnlm::network::{init_params, perplexity};
use autosize_nnlm::prox::{RegularizerKind, RegularizerSpec};
use autosize_nnlm::synthetic::{sample_corpus, teacher_params, word_vocabulary};
use autosize_nnlm::trainer::{train, TrainConfig};
use autosize_nnlm::Result;

#[derive(Parser)]
struct Opts {
    /// Regularizer strengths to sweep, in the order given.
    #[arg(required = true)]
    lambdas: Vec<f64>,
    /// Group norm to penalize: l21 or linf1.
    #[arg(long, default_value = "linf1")]
    reg: RegularizerKind,
    /// Non-reserved word types in the synthetic vocabulary.
    #[arg(long, default_value_t = 194)]
    words: usize,
    /// Sentences to sample for the corpus.
    #[arg(long, default_value_t = 18_000)]
    sentences: usize,
    /// Teacher hidden widths (the "true" capacity).
    #[arg(long, default_value_t = 8)]
    teacher_h1: usize,
    #[arg(long, default_value_t = 8)]
    teacher_h2: usize,
    /// Teacher weight gain; larger means sharper conditionals.
    #[arg(long, default_value_t = 4.0)]
    gain: f64,
    /// Student hidden widths.
    #[arg(long, default_value_t = 64)]
    student_h1: usize,
    #[arg(long, default_value_t = 16)]
    student_h2: usize,
    #[arg(long, default_value_t = 16)]
    embed_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> Result<()> {
    let opts = Opts::parse();
    let n = 3;

    let vocab = word_vocabulary(opts.words)?;
    let teacher = teacher_params(
        n,
        vocab.size(),
        opts.embed_dim,
        opts.teacher_h1,
        opts.teacher_h2,
        opts.seed,
        opts.gain,
        11.0,
    )?;
    let lines = sample_corpus(&teacher, &vocab, opts.sentences, 40, opts.seed.wrapping_add(1))?;
    let sentences: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| vocab.numberize(&tokenize_line(l)))
        .collect();
    let (train_sents, val_sents) = split_validation(sentences, 5000)?;
    let train_data = extract_ngrams(train_sents, n, &vocab)?;
    let val_data = extract_ngrams(val_sents, n, &vocab)?;
    let teacher_ppl = perplexity(&teacher, &val_data)?;
    println!(
        "corpus: {} train examples, {} val examples, vocab {}; teacher val perplexity {:.3}",
        train_data.len(),
        val_data.len(),
        vocab.size(),
        teacher_ppl
    );
    println!(
        "student: h1 {} h2 {} embed {} lr {} batch 64 epochs {} reg {}",
        opts.student_h1, opts.student_h2, opts.embed_dim, opts.lr, opts.epochs, opts.reg
    );

    println!("{:>10} {:>9} {:>9} {:>12} {:>9}  active_h1 by epoch", "lambda", "active_h1", "active_h2", "val_ppl", "nll/tok");
    for &lambda in &opts.lambdas {
        let spec = RegularizerSpec::new(opts.reg, lambda)?;
        let config = TrainConfig {
            epochs: opts.epochs,
            eta: opts.lr,
            batch_size: 64,
            seed: opts.seed,
            validation: Some(val_data.clone()),
        };
        let mut student = init_params(
            n,
            vocab.size(),
            opts.embed_dim,
            opts.student_h1,
            opts.student_h2,
            opts.seed,
        )?;
        let history = train(&mut student, &train_data, &config, &spec)?;
        let last = history.records.last().expect("at least one epoch");
        let trajectory: Vec<String> = history
            .records
            .iter()
            .map(|r| r.active_h1.to_string())
            .collect();
        println!(
            "{:>10} {:>9} {:>9} {:>12.4} {:>9.4}  {}",
            lambda,
            last.active_h1,
            last.active_h2,
            last.val_perplexity.expect("validation configured"),
            last.train_nll_per_token,
            trajectory.join(" ")
        );
    }
    Ok(())
}
