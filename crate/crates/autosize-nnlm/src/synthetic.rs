//! Synthetic corpora drawn from a randomly initialized "teacher" network.
//!
//! Sampling text from a small teacher model gives a corpus whose true
//! conditional distribution is exactly representable by this model family,
//! with a known sufficient hidden width. That makes it possible to test
//! capacity questions (does a student with extra units match the teacher's
//! perplexity? does regularization shed the surplus?) without shipping a
//! real-text corpus.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Vocabulary, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};
use crate::network::{init_params, ModelParams, Workspace};

const UNK_ID: usize = 0;
const BOS_ID: usize = 1;
const EOS_ID: usize = 2;

/// A vocabulary of `words` interchangeable word types named `w000`,
/// `w001`, ... after the three reserved tokens.
pub fn word_vocabulary(words: usize) -> Result<Vocabulary> {
    let mut tokens = vec![
        UNK_TOKEN.to_string(),
        BOS_TOKEN.to_string(),
        EOS_TOKEN.to_string(),
    ];
    tokens.extend((0..words).map(|i| format!("w{i:03}")));
    Vocabulary::from_tokens(tokens)
}

/// A randomly initialized model shaped into a usable data generator.
///
/// Weight matrices are scaled by `gain`: plain initialization keeps
/// pre-activations small, so sampled text would be nearly uniform noise;
/// a gain of 3 to 6 sharpens the conditionals enough that context
/// genuinely matters. The three reserved tokens get fixed output rows so
/// that sampling the teacher's own full softmax yields well-formed text:
/// `<unk>` and `<s>` carry ~e^-40 probability, and `</s>` has a
/// context-independent logit calibrated so sentences average about
/// `mean_sentence_len` words. Sampled corpora therefore follow the
/// teacher's distribution exactly, end-of-sentence included, which makes
/// the teacher's own perplexity a meaningful reference for students.
#[allow(clippy::too_many_arguments)]
pub fn teacher_params(
    n: usize,
    vocab_size: usize,
    embed_dim: usize,
    h1: usize,
    h2: usize,
    seed: u64,
    gain: f64,
    mean_sentence_len: f64,
) -> Result<ModelParams> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::Config(format!(
            "teacher gain must be finite and > 0, got {gain}"
        )));
    }
    if !(mean_sentence_len > 1.0 && mean_sentence_len.is_finite()) {
        return Err(Error::Config(format!(
            "mean sentence length must be finite and > 1, got {mean_sentence_len}"
        )));
    }
    if vocab_size <= 3 {
        return Err(Error::Config(
            "teacher needs at least one non-reserved word".to_string(),
        ));
    }
    let mut params = init_params(n, vocab_size, embed_dim, h1, h2, seed)?;
    params.embed.mapv_inplace(|w| w * gain);
    for block in params.hidden1.iter_mut() {
        block.mapv_inplace(|w| w * gain);
    }
    params.hidden2.mapv_inplace(|w| w * gain);
    params.output.mapv_inplace(|w| w * gain);
    for id in [UNK_ID, BOS_ID, EOS_ID] {
        params.output.row_mut(id).fill(0.0);
    }
    params.output_bias[UNK_ID] = -40.0;
    params.output_bias[BOS_ID] = -40.0;
    // Words sit near logit 0 on average, so odds of (vocab_size - 3) : x
    // give roughly one end-of-sentence per mean_sentence_len draws.
    params.output_bias[EOS_ID] = ((vocab_size - 3) as f64 / (mean_sentence_len - 1.0)).ln();
    Ok(params)
}

/// Samples `sentences` lines from the model by walking its own conditional
/// distributions, starting each sentence from the beginning-of-sentence
/// context. Every draw comes from the full softmax; drawing `</s>` ends
/// the sentence (a sentence can come out empty), and `max_words` caps
/// run-ons. The n-gram extraction convention (predict each word, then
/// `</s>`, given the previous words with `<s>` padding) reconstructs
/// exactly the conditionals sampled here, so the sampler's model is also
/// the optimal model of its output. Fully deterministic in the seed.
pub fn sample_corpus(
    params: &ModelParams,
    vocab: &Vocabulary,
    sentences: usize,
    max_words: usize,
    seed: u64,
) -> Result<Vec<String>> {
    if vocab.size() != params.vocab_size() {
        return Err(Error::Input(format!(
            "vocabulary has {} entries but model expects {}",
            vocab.size(),
            params.vocab_size()
        )));
    }
    if vocab.size() <= 3 {
        return Err(Error::Input(
            "sampling needs at least one non-reserved word".to_string(),
        ));
    }
    if max_words == 0 {
        return Err(Error::Input("max_words must be at least 1".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Workspace::new(params);
    let bos = vocab.id(BOS_TOKEN).expect("reserved token");
    let mut lines = Vec::with_capacity(sentences);
    let mut context = vec![bos; params.context_len()];

    for _ in 0..sentences {
        context.fill(bos);
        let mut line = String::new();
        for w in 0..max_words {
            let word = sample_word(params, &mut ws, &context, &mut rng)?;
            if word == EOS_ID {
                break;
            }
            if w > 0 {
                line.push(' ');
            }
            line.push_str(vocab.token(word));
            if !context.is_empty() {
                context.rotate_left(1);
                *context.last_mut().expect("nonempty context") = word;
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

/// One draw from the model's next-token distribution by inverse CDF over
/// the unnormalized softmax weights.
fn sample_word(
    params: &ModelParams,
    ws: &mut Workspace,
    context: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    ws.forward_raw(params, context);
    let weights = ws.softmax_weights();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Input(format!(
            "degenerate sampling distribution (mass {total})"
        )));
    }
    let mut remaining = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        remaining -= w;
        last = i;
        if remaining <= 0.0 {
            return Ok(i);
        }
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_ngrams, tokenize_line};
    use crate::network;

    #[test]
    fn word_vocabulary_counts_and_names() {
        let vocab = word_vocabulary(5).unwrap();
        assert_eq!(vocab.size(), 8);
        assert_eq!(vocab.token(3), "w000");
        assert_eq!(vocab.token(7), "w004");
        assert!(word_vocabulary(0).unwrap().size() == 3);
    }

    #[test]
    fn sampling_is_deterministic_and_well_formed() {
        let vocab = word_vocabulary(11).unwrap();
        let teacher = teacher_params(3, vocab.size(), 6, 4, 4, 7, 4.0, 6.0).unwrap();
        let a = sample_corpus(&teacher, &vocab, 40, 12, 99).unwrap();
        let b = sample_corpus(&teacher, &vocab, 40, 12, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        let mut capped = 0;
        for line in &a {
            let tokens = tokenize_line(line);
            assert!(tokens.len() <= 12);
            if tokens.len() == 12 {
                capped += 1;
            }
            for t in tokens {
                let id = vocab.id(t).unwrap();
                assert!(id >= 3, "reserved token {t} sampled");
            }
        }
        // End-of-sentence draws actually end sentences.
        assert!(capped < 40);
        let c = sample_corpus(&teacher, &vocab, 40, 12, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn samples_feed_back_through_the_pipeline() {
        let vocab = word_vocabulary(9).unwrap();
        let teacher = teacher_params(2, vocab.size(), 4, 3, 3, 2, 3.0, 5.0).unwrap();
        let lines = sample_corpus(&teacher, &vocab, 8, 20, 5).unwrap();
        let sentences: Vec<Vec<usize>> = lines
            .iter()
            .map(|l| vocab.numberize(&tokenize_line(l)))
            .collect();
        let expected: usize = sentences.iter().map(|s| s.len() + 1).sum();
        let data = extract_ngrams(sentences, 2, &vocab).unwrap();
        assert_eq!(data.len(), expected);
        let ppl = network::perplexity(&teacher, &data).unwrap();
        assert!(ppl.is_finite() && ppl > 1.0);
    }

    #[test]
    fn gain_sharpens_the_conditionals() {
        let vocab = word_vocabulary(30).unwrap();
        let flat = teacher_params(3, vocab.size(), 8, 6, 6, 11, 1e-9, 9.0).unwrap();
        let sharp = teacher_params(3, vocab.size(), 8, 6, 6, 11, 5.0, 9.0).unwrap();
        // Perplexity of each teacher on its own samples: the near-zero-gain
        // teacher is uniform over words, the gained one is peaked.
        let eval = |teacher: &ModelParams| {
            let lines = sample_corpus(teacher, &vocab, 128, 40, 42).unwrap();
            let sentences: Vec<Vec<usize>> =
                lines.iter().map(|l| vocab.numberize(&tokenize_line(l))).collect();
            let data = extract_ngrams(sentences, 3, &vocab).unwrap();
            network::perplexity(teacher, &data).unwrap()
        };
        let flat_ppl = eval(&flat);
        let sharp_ppl = eval(&sharp);
        assert!(sharp_ppl < 0.8 * flat_ppl, "{sharp_ppl} vs {flat_ppl}");
        assert!(teacher_params(3, 10, 4, 3, 3, 1, 0.0, 9.0).is_err());
        assert!(teacher_params(3, 10, 4, 3, 3, 1, 2.0, 1.0).is_err());
        assert!(teacher_params(3, 3, 4, 3, 3, 1, 2.0, 9.0).is_err());
    }
}
