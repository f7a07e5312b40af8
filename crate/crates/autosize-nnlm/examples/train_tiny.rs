//! Minimal end-to-end run on a hand-written corpus: build a vocabulary,
//! extract trigram examples, train a small network, and query it.
//!
//!     cargo run --example train_tiny

use autosize_nnlm::corpus::{extract_ngrams, tokenize_line, Vocabulary};
use autosize_nnlm::network::{forward, init_params, perplexity};
use autosize_nnlm::prox::RegularizerSpec;
use autosize_nnlm::trainer::{train, TrainConfig};
use autosize_nnlm::Result;

const CORPUS: &str = "\
the cat sat on the mat
the dog sat on the rug
the cat slept on the rug
the dog slept on the mat
a cat sat on a mat
a dog slept on a rug
the cat chased the dog
the dog chased the cat
a cat chased a mouse
the mouse ran under the rug
the mouse slept under the mat
a mouse ran under a rug
the cat watched the mouse
the dog watched the cat
a dog watched a mouse
";

fn main() -> Result<()> {
    let lines: Vec<Vec<&str>> = CORPUS.lines().map(tokenize_line).collect();
    let vocab = Vocabulary::build(lines.iter().map(|l| l.iter().copied()), 100)?;
    let sentences: Vec<Vec<usize>> = lines.iter().map(|l| vocab.numberize(l)).collect();
    let n = 3;
    let data = extract_ngrams(sentences, n, &vocab)?;
    println!(
        "corpus: {} sentences, vocabulary {}, {} trigram examples",
        CORPUS.lines().count(),
        vocab.size(),
        data.len()
    );

    let mut params = init_params(n, vocab.size(), 8, 16, 8, 42)?;
    println!(
        "untrained perplexity {:.2} (uniform would be {})",
        perplexity(&params, &data)?,
        vocab.size()
    );

    let config = TrainConfig {
        epochs: 60,
        eta: 0.1,
        batch_size: 16,
        seed: 42,
        validation: None,
    };
    let history = train(&mut params, &data, &config, &RegularizerSpec::none())?;
    for record in history.records.iter().step_by(10) {
        println!(
            "epoch {:>2}: train nll/token {:.4}",
            record.epoch, record.train_nll_per_token
        );
    }
    println!("trained perplexity {:.2}\n", perplexity(&params, &data)?);

    // The corpus always continues "sat on" with an article, never with a
    // noun or verb; the model should agree.
    let context: Vec<usize> = vocab.numberize(&["sat", "on"]);
    let logprobs = forward(&params, &context)?;
    let mut ranked: Vec<usize> = (0..vocab.size()).collect();
    ranked.sort_by(|&a, &b| logprobs[b].partial_cmp(&logprobs[a]).unwrap().then(a.cmp(&b)));
    println!("most likely words after \"sat on\":");
    for &id in ranked.iter().take(4) {
        println!("  {:<8} p = {:.3}", vocab.token(id), logprobs[id].exp());
    }
    Ok(())
}
