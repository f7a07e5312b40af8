//! Structural pruning: train with an aggressive penalty so whole rows go
//! to zero, remove the dead units from the parameter arrays, and confirm
//! the compacted model predicts exactly the same distributions.
//!
//!     cargo run --example prune_and_query

use autosize_nnlm::corpus::{extract_ngrams, tokenize_line};
use autosize_nnlm::network::{forward, init_params, perplexity, HiddenLayer};
use autosize_nnlm::prox::{RegularizerKind, RegularizerSpec};
use autosize_nnlm::pruning::{compact, zero_units};
use autosize_nnlm::synthetic::{sample_corpus, teacher_params, word_vocabulary};
use autosize_nnlm::trainer::{train, TrainConfig};
use autosize_nnlm::Result;

fn param_count(p: &autosize_nnlm::network::ModelParams) -> usize {
    p.embed.len()
        + p.hidden1.iter().map(|b| b.len()).sum::<usize>()
        + p.bias1.len()
        + p.hidden2.len()
        + p.bias2.len()
        + p.output.len()
        + p.output_bias.len()
}

fn main() -> Result<()> {
    let vocab = word_vocabulary(40)?;
    let teacher = teacher_params(3, vocab.size(), 10, 4, 4, 5, 4.0, 8.0)?;
    let lines = sample_corpus(&teacher, &vocab, 2500, 25, 6)?;
    let sentences: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| vocab.numberize(&tokenize_line(l)))
        .collect();
    let data = extract_ngrams(sentences, 3, &vocab)?;

    let mut params = init_params(3, vocab.size(), 10, 24, 8, 5)?;
    let spec = RegularizerSpec::new(RegularizerKind::Linf1, 0.05)?;
    let config = TrainConfig {
        epochs: 6,
        eta: 0.05,
        batch_size: 64,
        seed: 5,
        validation: None,
    };
    train(&mut params, &data, &config, &spec)?;

    println!(
        "after training: layer-1 zero rows {:?}, layer-2 zero rows {:?}",
        zero_units(&params, HiddenLayer::First),
        zero_units(&params, HiddenLayer::Second)
    );

    let (compacted, report) = compact(&params);
    print!("{report}");
    println!(
        "parameters {} -> {}",
        param_count(&params),
        param_count(&compacted)
    );

    // Dead units contribute nothing, so removal is exact, not approximate.
    let contexts = [
        vocab.numberize(&["w005", "w012"]),
        vocab.numberize(&["w000", "w001"]),
        vec![vocab.bos_id(), vocab.bos_id()],
    ];
    let mut worst = 0.0f64;
    for ctx in &contexts {
        let before = forward(&params, ctx)?;
        let after = forward(&compacted, ctx)?;
        for (a, b) in before.iter().zip(after.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    println!(
        "max log-probability change across {} contexts: {worst:.2e}",
        contexts.len()
    );
    println!(
        "perplexity before {:.6}, after {:.6}\n",
        perplexity(&params, &data)?,
        perplexity(&compacted, &data)?
    );

    let context = vocab.numberize(&["w005", "w012"]);
    let logprobs = forward(&compacted, &context)?;
    let mut ranked: Vec<usize> = (0..vocab.size()).collect();
    ranked.sort_by(|&a, &b| logprobs[b].partial_cmp(&logprobs[a]).unwrap().then(a.cmp(&b)));
    println!("top continuations of \"w005 w012\" under the compacted model:");
    for &id in ranked.iter().take(5) {
        println!("  {:<8} log p = {:+.4}", vocab.token(id), logprobs[id]);
    }
    Ok(())
}
