//! Width recovery on synthetic data: a small teacher network generates a
//! corpus, then a four-times-wider student trains twice, with and without
//! max-norm group regularization. The regularized run should shed most of
//! its surplus first-layer units while staying close to the baseline's
//! validation perplexity.
//!
//!     cargo run --example teacher_student
//!     cargo run --example teacher_student -- --lambda 0.02 --epochs 12

use clap::Parser;

use autosize_nnlm::corpus::{extract_ngrams, split_validation, tokenize_line};
use autosize_nnlm::network::{init_params, perplexity};
use autosize_nnlm::prox::{RegularizerKind, RegularizerSpec};
use autosize_nnlm::synthetic::{sample_corpus, teacher_params, word_vocabulary};
use autosize_nnlm::trainer::{train, TrainConfig, TrainingHistory};
use autosize_nnlm::Result;

#[derive(Parser)]
struct Opts {
    /// Regularizer strength for the second run.
    #[arg(long, default_value_t = 0.02)]
    lambda: f64,
    /// Teacher first-layer width the student should rediscover.
    #[arg(long, default_value_t = 8)]
    teacher_h1: usize,
    /// Student first-layer width at initialization.
    #[arg(long, default_value_t = 32)]
    student_h1: usize,
    #[arg(long, default_value_t = 4000)]
    sentences: usize,
    #[arg(long, default_value_t = 8)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn run_student(
    opts: &Opts,
    vocab_size: usize,
    train_data: &autosize_nnlm::corpus::NGramDataset,
    val_data: &autosize_nnlm::corpus::NGramDataset,
    lambda: f64,
) -> Result<TrainingHistory> {
    let spec = RegularizerSpec::new(RegularizerKind::Linf1, lambda)?;
    let config = TrainConfig {
        epochs: opts.epochs,
        eta: 0.05,
        batch_size: 64,
        seed: opts.seed,
        validation: Some(val_data.clone()),
    };
    let mut student = init_params(3, vocab_size, 12, opts.student_h1, 8, opts.seed)?;
    train(&mut student, train_data, &config, &spec)
}

fn main() -> Result<()> {
    let opts = Opts::parse();
    let vocab = word_vocabulary(60)?;
    let teacher = teacher_params(3, vocab.size(), 12, opts.teacher_h1, 4, opts.seed, 3.0, 9.0)?;
    let lines = sample_corpus(&teacher, &vocab, opts.sentences, 30, opts.seed.wrapping_add(1))?;
    let sentences: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| vocab.numberize(&tokenize_line(l)))
        .collect();
    let (train_sents, val_sents) = split_validation(sentences, 2000)?;
    let train_data = extract_ngrams(train_sents, 3, &vocab)?;
    let val_data = extract_ngrams(val_sents, 3, &vocab)?;

    println!(
        "teacher: {} first-layer units, val perplexity {:.2} (vocabulary {})",
        opts.teacher_h1,
        perplexity(&teacher, &val_data)?,
        vocab.size()
    );
    println!(
        "student: {} first-layer units, {} train examples\n",
        opts.student_h1,
        train_data.len()
    );

    let baseline = run_student(&opts, vocab.size(), &train_data, &val_data, 0.0)?;
    let regularized = run_student(&opts, vocab.size(), &train_data, &val_data, opts.lambda)?;

    println!(
        "{:>5}  {:>22}  {:>22}",
        "",
        "lambda = 0",
        format!("lambda = {}", opts.lambda)
    );
    println!(
        "{:>5}  {:>10} {:>11}  {:>10} {:>11}",
        "epoch", "active_h1", "val_ppl", "active_h1", "val_ppl"
    );
    for (b, r) in baseline.records.iter().zip(&regularized.records) {
        println!(
            "{:>5}  {:>10} {:>11.3}  {:>10} {:>11.3}",
            b.epoch,
            b.active_h1,
            b.val_perplexity.expect("validation configured"),
            r.active_h1,
            r.val_perplexity.expect("validation configured"),
        );
    }

    let b = baseline.records.last().expect("epochs > 0");
    let r = regularized.records.last().expect("epochs > 0");
    println!(
        "\nregularized run kept {} of {} units (teacher used {}) at {:+.1}% perplexity",
        r.active_h1,
        opts.student_h1,
        opts.teacher_h1,
        100.0 * (r.val_perplexity.unwrap() / b.val_perplexity.unwrap() - 1.0)
    );
    Ok(())
}
