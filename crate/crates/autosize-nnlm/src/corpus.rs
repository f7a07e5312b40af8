//! Corpus ingestion: tokenization, frequency-capped vocabularies, and
//! n-gram example extraction.
//!
//! Corpora are plain UTF-8 text, one sentence per line, whitespace
//! tokenized. A [`Vocabulary`] assigns dense ids with three special tokens
//! always present; everything else maps to `<unk>` once the frequency cap
//! is hit. [`extract_ngrams`] turns id sequences into `(context, target)`
//! training examples, padding with `<s>` on the left and predicting `</s>`
//! at the end of every sentence so each token has a probability.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

const SPECIALS: [&str; 3] = [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN];

/// Splits a line on runs of Unicode whitespace. Never yields empty tokens.
pub fn tokenize_line(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Bidirectional token/id map. Ids are dense `0..size`; the first three are
/// always `<unk>`, `<s>`, `</s>` in that order, and the remaining tokens are
/// sorted by descending corpus frequency with ties broken by first
/// occurrence, so construction is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from a stream of tokenized lines, keeping at most
    /// `max_size` entries (the three specials included).
    pub fn build<I, L, S>(lines: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = L>,
        L: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 3 {
            return Err(Error::Config(format!(
                "vocabulary size {max_size} leaves no room for the special tokens (need at least 3)"
            )));
        }
        // token -> (count, first-occurrence rank)
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        let mut seen = 0usize;
        for line in lines {
            for token in line {
                let token = token.as_ref();
                if SPECIALS.contains(&token) {
                    continue;
                }
                match counts.get_mut(token) {
                    Some(entry) => entry.0 += 1,
                    None => {
                        counts.insert(token.to_string(), (1, seen));
                    }
                }
                seen += 1;
            }
        }
        let mut ranked: Vec<(String, (u64, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        ranked.truncate(max_size - 3);

        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens_unchecked(tokens))
    }

    /// Reconstructs a vocabulary from an explicit id-ordered token list,
    /// validating the invariants a vocabulary file must satisfy.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != UNK_TOKEN || tokens[1] != BOS_TOKEN || tokens[2] != EOS_TOKEN
        {
            return Err(Error::Config(format!(
                "vocabulary must start with the special tokens {UNK_TOKEN}, {BOS_TOKEN}, {EOS_TOKEN}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "token {id:?} is empty or contains whitespace"
                )));
            }
            if index.insert(token.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate token {token:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(id, t)| (t.clone(), id))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk_id(&self) -> usize {
        0
    }

    pub fn bos_id(&self) -> usize {
        1
    }

    pub fn eos_id(&self) -> usize {
        2
    }

    /// Id of a token if present.
    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token for an id; panics if out of range.
    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Maps tokens to ids, sending out-of-vocabulary tokens to `<unk>`.
    pub fn numberize<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(self.unk_id()))
            .collect()
    }

    /// Writes the vocabulary file: one token per line in id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for token in &self.tokens {
            out.push_str(token);
            out.push('\n');
        }
        textio::write_atomic(path, &out)
    }

    /// Loads a vocabulary file written by [`Vocabulary::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = textio::read_to_string(path)?;
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        Self::from_tokens(tokens).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, 0, msg),
            other => other,
        })
    }
}

/// Flat store of `(context, target)` training examples for one n-gram order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramDataset {
    n: usize,
    contexts: Vec<usize>,
    targets: Vec<usize>,
}

impl NGramDataset {
    /// Empty dataset for `n`-grams. `n` must be at least 2.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "n-gram order must be at least 2");
        NGramDataset {
            n,
            contexts: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(&mut self, context: &[usize], target: usize) {
        assert_eq!(context.len(), self.n - 1, "context width must be n-1");
        self.contexts.extend_from_slice(context);
        self.targets.push(target);
    }

    pub fn context(&self, i: usize) -> &[usize] {
        let w = self.n - 1;
        &self.contexts[i * w..(i + 1) * w]
    }

    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }

    pub fn examples(&self) -> impl Iterator<Item = (&[usize], usize)> {
        (0..self.len()).map(|i| (self.context(i), self.target(i)))
    }
}

/// Slides an n-gram window over each sentence of word ids. Sentences are
/// padded with `n-1` leading `<s>` ids and one trailing `</s>`, so a
/// sentence of `T` tokens yields exactly `T+1` examples and `<s>` is never
/// a target.
pub fn extract_ngrams<I>(sentences: I, n: usize, vocab: &Vocabulary) -> Result<NGramDataset>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    if n < 2 {
        return Err(Error::Config(format!("n-gram order {n} must be at least 2")));
    }
    let bos = vocab.bos_id();
    let eos = vocab.eos_id();
    let mut dataset = NGramDataset::new(n);
    let mut padded: Vec<usize> = Vec::new();
    for sentence in sentences {
        debug_assert!(sentence.iter().all(|&id| id < vocab.size()));
        padded.clear();
        padded.extend(std::iter::repeat_n(bos, n - 1));
        padded.extend_from_slice(&sentence);
        padded.push(eos);
        for window in padded.windows(n) {
            dataset.push(&window[..n - 1], window[n - 1]);
        }
    }
    Ok(dataset)
}

/// A corpus as per-sentence lists of token ids.
pub type Sentences = Vec<Vec<usize>>;

/// Reads an entire corpus file into per-sentence id lists.
pub fn load_corpus_ids(path: &Path, vocab: &Vocabulary) -> Result<Sentences> {
    let text = textio::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|line| vocab.numberize(&tokenize_line(line)))
        .collect())
}

/// Splits sentences into a training prefix and a validation suffix. The
/// suffix is the smallest run of whole sentences, counted from the end,
/// holding at least `min_tokens` raw word tokens. `min_tokens = 0` keeps
/// everything for training; it is an error for the holdout to consume the
/// entire corpus.
pub fn split_validation(
    mut sentences: Sentences,
    min_tokens: usize,
) -> Result<(Sentences, Sentences)> {
    if min_tokens == 0 {
        return Ok((sentences, Vec::new()));
    }
    let mut held = 0usize;
    let mut cut = sentences.len();
    while cut > 0 && held < min_tokens {
        cut -= 1;
        held += sentences[cut].len();
    }
    if held < min_tokens {
        return Err(Error::Input(format!(
            "corpus has only {held} tokens, fewer than the {min_tokens} requested for validation"
        )));
    }
    if cut == 0 {
        return Err(Error::Input(format!(
            "holding out {min_tokens} validation tokens leaves no training sentences"
        )));
    }
    let validation = sentences.split_off(cut);
    Ok((sentences, validation))
}
