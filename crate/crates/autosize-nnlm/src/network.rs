//! Feedforward n-gram language model: parameters, forward probabilities,
//! negative log-likelihood, and exact backpropagation gradients.
//!
//! The architecture is embedding lookups for the n-1 context words, two
//! ReLU hidden layers, and a full softmax over the vocabulary:
//!
//! ```text
//! x^k    = embed[w_k]                      (k = 1..n-1)
//! y      = relu(sum_k hidden1[k] x^k + bias1)
//! z      = relu(hidden2 y + bias2)
//! logits = output z + output_bias
//! ```
//!
//! Everything is 64-bit. The log-softmax is max-shifted, the ReLU
//! subgradient at exactly 0 is 0 (a dead unit stays dead), and a unit
//! whose incoming weights and bias are all zero contributes nothing for
//! any input, which is what makes pruning exact.

use std::path::Path;

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::NGramDataset;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::textio;

const MODEL_MAGIC: &str = "AUTOSIZE-NNLM 1";

/// Selects one of the two hidden layers for group operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenLayer {
    First,
    Second,
}

impl HiddenLayer {
    pub const BOTH: [HiddenLayer; 2] = [HiddenLayer::First, HiddenLayer::Second];

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            1 => Ok(HiddenLayer::First),
            2 => Ok(HiddenLayer::Second),
            other => Err(Error::Config(format!(
                "layer must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            HiddenLayer::First => 1,
            HiddenLayer::Second => 2,
        }
    }
}

/// All trainable parameters. Dimensions must stay mutually consistent:
/// `hidden1` holds n-1 matrices of shape h1 x embed_dim, `hidden2` is
/// h2 x h1, `output` is vocab x h2, and each bias matches its layer.
/// h1 = 0 or h2 = 0 are legal (a fully pruned layer).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub embed: Array2<f64>,
    pub hidden1: Vec<Array2<f64>>,
    pub bias1: Array1<f64>,
    pub hidden2: Array2<f64>,
    pub bias2: Array1<f64>,
    pub output: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl ModelParams {
    pub fn vocab_size(&self) -> usize {
        self.embed.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn h1(&self) -> usize {
        self.bias1.len()
    }

    pub fn h2(&self) -> usize {
        self.bias2.len()
    }

    pub fn context_len(&self) -> usize {
        self.n - 1
    }

    pub fn layer_units(&self, layer: HiddenLayer) -> usize {
        match layer {
            HiddenLayer::First => self.h1(),
            HiddenLayer::Second => self.h2(),
        }
    }

    /// Copies one hidden unit's incoming weights and bias into `buf` as a
    /// single flat group: all hidden1 block rows concatenated (or the
    /// hidden2 row) followed by the bias entry.
    pub fn gather_group(&self, layer: HiddenLayer, unit: usize, buf: &mut Vec<f64>) {
        buf.clear();
        match layer {
            HiddenLayer::First => {
                for block in &self.hidden1 {
                    buf.extend(block.row(unit).iter().copied());
                }
                buf.push(self.bias1[unit]);
            }
            HiddenLayer::Second => {
                buf.extend(self.hidden2.row(unit).iter().copied());
                buf.push(self.bias2[unit]);
            }
        }
    }

    /// Writes a flat group produced by [`ModelParams::gather_group`] back.
    pub fn scatter_group(&mut self, layer: HiddenLayer, unit: usize, group: &[f64]) {
        match layer {
            HiddenLayer::First => {
                let width = self.embed_dim();
                assert_eq!(group.len(), self.hidden1.len() * width + 1);
                for (block, chunk) in self.hidden1.iter_mut().zip(group.chunks(width.max(1))) {
                    if width > 0 {
                        for (dst, &src) in block.row_mut(unit).iter_mut().zip(chunk) {
                            *dst = src;
                        }
                    }
                }
                self.bias1[unit] = *group.last().expect("group includes bias");
            }
            HiddenLayer::Second => {
                assert_eq!(group.len(), self.h1() + 1);
                for (dst, &src) in self.hidden2.row_mut(unit).iter_mut().zip(group) {
                    *dst = src;
                }
                self.bias2[unit] = group[group.len() - 1];
            }
        }
    }

    /// Writes the versioned text format: magic line, dimension line, then
    /// the matrices in fixed order (embeddings, hidden1 blocks, bias1,
    /// hidden2, bias2, output, output bias), one row per line with entries
    /// printed at 17 significant digits so reloads are bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(MODEL_MAGIC);
        out.push('\n');
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            self.n,
            self.vocab_size(),
            self.embed_dim(),
            self.h1(),
            self.h2()
        ));
        push_matrix(&mut out, &self.embed);
        for block in &self.hidden1 {
            push_matrix(&mut out, block);
        }
        push_row(&mut out, self.bias1.iter().copied());
        push_matrix(&mut out, &self.hidden2);
        push_row(&mut out, self.bias2.iter().copied());
        push_matrix(&mut out, &self.output);
        push_row(&mut out, self.output_bias.iter().copied());
        textio::write_atomic(path, &out)
    }

    /// Loads a model written by [`ModelParams::save`], rejecting unknown
    /// versions, inconsistent dimensions, malformed rows, and non-finite
    /// entries.
    pub fn load(path: &Path) -> Result<Self> {
        let text = textio::read_to_string(path)?;
        let mut reader = RowReader {
            path,
            lines: text.lines().enumerate(),
        };
        let (lineno, magic) = reader.next_line()?;
        if magic != MODEL_MAGIC {
            return Err(Error::format(
                path,
                lineno,
                format!("unsupported model header {magic:?} (expected {MODEL_MAGIC:?})"),
            ));
        }
        let (lineno, dims_line) = reader.next_line()?;
        let dims: Vec<usize> = dims_line
            .split_whitespace()
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, lineno, format!("bad dimension line: {e}")))?;
        let [n, vocab_size, embed_dim, h1, h2] = dims[..] else {
            return Err(Error::format(
                path,
                lineno,
                format!("expected 5 dimensions, got {}", dims.len()),
            ));
        };
        if n < 2 {
            return Err(Error::format(path, lineno, format!("n must be >= 2, got {n}")));
        }
        if vocab_size == 0 {
            return Err(Error::format(path, lineno, "vocab size must be >= 1".to_string()));
        }

        let embed = reader.matrix(vocab_size, embed_dim)?;
        let hidden1 = (0..n - 1)
            .map(|_| reader.matrix(h1, embed_dim))
            .collect::<Result<Vec<_>>>()?;
        let bias1 = reader.vector(h1)?;
        let hidden2 = reader.matrix(h2, h1)?;
        let bias2 = reader.vector(h2)?;
        let output = reader.matrix(vocab_size, h2)?;
        let output_bias = reader.vector(vocab_size)?;
        reader.expect_end()?;

        Ok(ModelParams {
            n,
            embed,
            hidden1,
            bias1,
            hidden2,
            bias2,
            output,
            output_bias,
        })
    }
}

fn push_matrix(out: &mut String, m: &Array2<f64>) {
    for row in m.rows() {
        push_row(out, row.iter().copied());
    }
}

fn push_row(out: &mut String, row: impl Iterator<Item = f64>) {
    for (i, x) in row.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&textio::fmt_f64(x));
    }
    out.push('\n');
}

struct RowReader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> RowReader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, line)) => Ok((i + 1, line)),
            None => Err(Error::format(self.path, 0, "unexpected end of file".to_string())),
        }
    }

    fn row(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (lineno, line) = self.next_line()?;
        let mut values = Vec::with_capacity(expected);
        for field in line.split_whitespace() {
            let x: f64 = field
                .parse()
                .map_err(|e| Error::format(self.path, lineno, format!("bad float {field:?}: {e}")))?;
            if !x.is_finite() {
                return Err(Error::format(
                    self.path,
                    lineno,
                    format!("non-finite entry {field:?}"),
                ));
            }
            values.push(x);
        }
        if values.len() != expected {
            return Err(Error::format(
                self.path,
                lineno,
                format!("expected {expected} entries, got {}", values.len()),
            ));
        }
        Ok(values)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches data"))
    }

    fn vector(&mut self, len: usize) -> Result<Array1<f64>> {
        Ok(Array1::from_vec(self.row(len)?))
    }

    fn expect_end(&mut self) -> Result<()> {
        for (i, line) in self.lines.by_ref() {
            if !line.trim().is_empty() {
                return Err(Error::format(self.path, i + 1, "unexpected trailing content".to_string()));
            }
        }
        Ok(())
    }
}

/// Gradients with the same shapes as the parameters they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embed: Array2<f64>,
    pub hidden1: Vec<Array2<f64>>,
    pub bias1: Array1<f64>,
    pub hidden2: Array2<f64>,
    pub bias2: Array1<f64>,
    pub output: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            embed: Array2::zeros(params.embed.raw_dim()),
            hidden1: params
                .hidden1
                .iter()
                .map(|b| Array2::zeros(b.raw_dim()))
                .collect(),
            bias1: Array1::zeros(params.bias1.len()),
            hidden2: Array2::zeros(params.hidden2.raw_dim()),
            bias2: Array1::zeros(params.bias2.len()),
            output: Array2::zeros(params.output.raw_dim()),
            output_bias: Array1::zeros(params.output_bias.len()),
        }
    }

    pub(crate) fn zero(&mut self) {
        self.embed.fill(0.0);
        for block in &mut self.hidden1 {
            block.fill(0.0);
        }
        self.bias1.fill(0.0);
        self.hidden2.fill(0.0);
        self.bias2.fill(0.0);
        self.output.fill(0.0);
        self.output_bias.fill(0.0);
    }
}

/// Uniform(-r, r) with r = sqrt(6 / (rows + cols)) per weight matrix;
/// biases start at zero. Fully determined by the seed.
pub fn init_params(
    n: usize,
    vocab_size: usize,
    embed_dim: usize,
    h1: usize,
    h2: usize,
    seed: u64,
) -> Result<ModelParams> {
    if n < 2 {
        return Err(Error::Config(format!("n-gram order {n} must be at least 2")));
    }
    if vocab_size == 0 {
        return Err(Error::Config("vocabulary size must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embed = uniform_matrix(&mut rng, vocab_size, embed_dim);
    let hidden1 = (0..n - 1)
        .map(|_| uniform_matrix(&mut rng, h1, embed_dim))
        .collect();
    let hidden2 = uniform_matrix(&mut rng, h2, h1);
    let output = uniform_matrix(&mut rng, vocab_size, h2);
    Ok(ModelParams {
        n,
        embed,
        hidden1,
        bias1: Array1::zeros(h1),
        hidden2,
        bias2: Array1::zeros(h2),
        output,
        output_bias: Array1::zeros(vocab_size),
    })
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    if rows == 0 || cols == 0 {
        return Array2::zeros((rows, cols));
    }
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new(-r, r);
    let data: Vec<f64> = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data")
}

/// Reusable per-example buffers for the forward and backward passes.
pub(crate) struct Workspace {
    sum_in1: Array1<f64>,
    y: Array1<f64>,
    sum_in2: Array1<f64>,
    z: Array1<f64>,
    logits: Array1<f64>,
    exps: Array1<f64>,
    dz: Array1<f64>,
    dy: Array1<f64>,
    dx: Array1<f64>,
    sum_exp: f64,
    log_z: f64,
}

impl Workspace {
    pub(crate) fn new(params: &ModelParams) -> Self {
        Workspace {
            sum_in1: Array1::zeros(params.h1()),
            y: Array1::zeros(params.h1()),
            sum_in2: Array1::zeros(params.h2()),
            z: Array1::zeros(params.h2()),
            logits: Array1::zeros(params.vocab_size()),
            exps: Array1::zeros(params.vocab_size()),
            dz: Array1::zeros(params.h2()),
            dy: Array1::zeros(params.h1()),
            dx: Array1::zeros(params.embed_dim()),
            sum_exp: 0.0,
            log_z: 0.0,
        }
    }

    /// Runs the forward pass for one context, leaving activations, logits,
    /// shifted exponentials, and the log partition value in the buffers.
    pub(crate) fn forward_raw(&mut self, params: &ModelParams, context: &[usize]) {
        debug_assert_eq!(context.len(), params.context_len());
        debug_assert!(context.iter().all(|&w| w < params.vocab_size()));

        self.sum_in1.assign(&params.bias1);
        for (block, &w) in params.hidden1.iter().zip(context) {
            general_mat_vec_mul(1.0, block, &params.embed.row(w), 1.0, &mut self.sum_in1);
        }
        relu_into(&self.sum_in1, &mut self.y);

        self.sum_in2.assign(&params.bias2);
        general_mat_vec_mul(1.0, &params.hidden2, &self.y, 1.0, &mut self.sum_in2);
        relu_into(&self.sum_in2, &mut self.z);

        self.logits.assign(&params.output_bias);
        general_mat_vec_mul(1.0, &params.output, &self.z, 1.0, &mut self.logits);

        let max = self.logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for (e, &l) in self.exps.iter_mut().zip(&self.logits) {
            *e = (l - max).exp();
            sum += *e;
        }
        self.sum_exp = sum;
        self.log_z = max + sum.ln();
    }

    pub(crate) fn target_logprob(&self, target: usize) -> f64 {
        self.logits[target] - self.log_z
    }

    /// Unnormalized softmax weights (exp of shifted logits) left behind by
    /// the last forward pass; probabilities after dividing by their sum.
    pub(crate) fn softmax_weights(&self) -> &Array1<f64> {
        &self.exps
    }

    #[cfg(test)]
    pub(crate) fn hidden1_activation(&self, unit: usize) -> f64 {
        self.y[unit]
    }

    /// Adds this example's NLL gradients onto `grads`. Must run directly
    /// after [`Workspace::forward_raw`] for the same context.
    fn accumulate_grads(
        &mut self,
        params: &ModelParams,
        grads: &mut Gradients,
        context: &[usize],
        target: usize,
    ) {
        // dL/dlogits = softmax(logits) - onehot(target), reusing the
        // shifted exponentials already in `exps`.
        let scale = 1.0 / self.sum_exp;
        self.exps.mapv_inplace(|e| e * scale);
        self.exps[target] -= 1.0;
        let dlogits = &self.exps;

        grads.output_bias.scaled_add(1.0, dlogits);
        for (i, &d) in dlogits.iter().enumerate() {
            grads.output.row_mut(i).scaled_add(d, &self.z);
        }

        general_mat_vec_mul(1.0, &params.output.t(), dlogits, 0.0, &mut self.dz);
        for (g, &s) in self.dz.iter_mut().zip(&self.sum_in2) {
            if s <= 0.0 {
                *g = 0.0;
            }
        }

        grads.bias2.scaled_add(1.0, &self.dz);
        for (i, &d) in self.dz.iter().enumerate() {
            grads.hidden2.row_mut(i).scaled_add(d, &self.y);
        }

        general_mat_vec_mul(1.0, &params.hidden2.t(), &self.dz, 0.0, &mut self.dy);
        for (g, &s) in self.dy.iter_mut().zip(&self.sum_in1) {
            if s <= 0.0 {
                *g = 0.0;
            }
        }

        grads.bias1.scaled_add(1.0, &self.dy);
        for (k, &w) in context.iter().enumerate() {
            let x = params.embed.row(w);
            for (i, &d) in self.dy.iter().enumerate() {
                grads.hidden1[k].row_mut(i).scaled_add(d, &x);
            }
            general_mat_vec_mul(1.0, &params.hidden1[k].t(), &self.dy, 0.0, &mut self.dx);
            grads.embed.row_mut(w).scaled_add(1.0, &self.dx);
        }
    }
}

fn relu_into(pre: &Array1<f64>, post: &mut Array1<f64>) {
    for (out, &s) in post.iter_mut().zip(pre) {
        *out = if s > 0.0 { s } else { 0.0 };
    }
}

fn validate_context(params: &ModelParams, context: &[usize]) -> Result<()> {
    if context.len() != params.context_len() {
        return Err(Error::Input(format!(
            "context has {} ids, model expects {}",
            context.len(),
            params.context_len()
        )));
    }
    if let Some(&bad) = context.iter().find(|&&w| w >= params.vocab_size()) {
        return Err(Error::Input(format!(
            "word id {bad} out of range (vocab size {})",
            params.vocab_size()
        )));
    }
    Ok(())
}

pub(crate) fn check_dataset(params: &ModelParams, dataset: &NGramDataset) -> Result<()> {
    if dataset.n() != params.n {
        return Err(Error::Input(format!(
            "dataset is {}-gram but model is {}-gram",
            dataset.n(),
            params.n
        )));
    }
    let v = params.vocab_size();
    for (context, target) in dataset.examples() {
        if target >= v || context.iter().any(|&w| w >= v) {
            return Err(Error::Input(format!(
                "word id out of range (vocab size {v})"
            )));
        }
    }
    Ok(())
}

/// Log-probability vector over the vocabulary for one context.
pub fn forward(params: &ModelParams, context: &[usize]) -> Result<Array1<f64>> {
    validate_context(params, context)?;
    let mut ws = Workspace::new(params);
    ws.forward_raw(params, context);
    let log_z = ws.log_z;
    Ok(ws.logits.mapv(|l| l - log_z))
}

/// Total negative log-likelihood (natural log) of a dataset, summed over
/// examples with pairwise summation. Empty datasets score 0.
pub fn nll(params: &ModelParams, dataset: &NGramDataset) -> Result<f64> {
    check_dataset(params, dataset)?;
    let mut ws = Workspace::new(params);
    let mut losses = Vec::with_capacity(dataset.len());
    for (context, target) in dataset.examples() {
        ws.forward_raw(params, context);
        losses.push(-ws.target_logprob(target));
    }
    Ok(pairwise_sum(&losses))
}

/// exp(mean per-example NLL). Equals the vocabulary size for a uniform
/// (all-zero) model.
pub fn perplexity(params: &ModelParams, dataset: &NGramDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Input("cannot compute perplexity of an empty dataset".to_string()));
    }
    Ok((nll(params, dataset)? / dataset.len() as f64).exp())
}

/// Gradient of the summed NLL over the given examples with respect to
/// every parameter.
pub fn backward(params: &ModelParams, dataset: &NGramDataset, indices: &[usize]) -> Result<Gradients> {
    if indices.is_empty() {
        return Err(Error::Input("minibatch is empty".to_string()));
    }
    check_dataset(params, dataset)?;
    let mut ws = Workspace::new(params);
    let mut grads = Gradients::zeros_like(params);
    for &i in indices {
        ws.forward_raw(params, dataset.context(i));
        ws.accumulate_grads(params, &mut grads, dataset.context(i), dataset.target(i));
    }
    Ok(grads)
}

/// Accumulates summed-NLL gradients for a minibatch into `grads` (zeroed
/// first) and appends each example's NLL to `losses`. Returns the
/// minibatch's summed loss.
pub(crate) fn minibatch_grad(
    params: &ModelParams,
    dataset: &NGramDataset,
    indices: &[usize],
    ws: &mut Workspace,
    grads: &mut Gradients,
    losses: &mut Vec<f64>,
) -> f64 {
    grads.zero();
    let start = losses.len();
    for &i in indices {
        let context = dataset.context(i);
        ws.forward_raw(params, context);
        losses.push(-ws.target_logprob(dataset.target(i)));
        ws.accumulate_grads(params, grads, context, dataset.target(i));
    }
    pairwise_sum(&losses[start..])
}

/// params -= step * grads across every parameter array.
pub(crate) fn apply_gradient_step(params: &mut ModelParams, grads: &Gradients, step: f64) {
    params.embed.scaled_add(-step, &grads.embed);
    for (block, g) in params.hidden1.iter_mut().zip(&grads.hidden1) {
        block.scaled_add(-step, g);
    }
    params.bias1.scaled_add(-step, &grads.bias1);
    params.hidden2.scaled_add(-step, &grads.hidden2);
    params.bias2.scaled_add(-step, &grads.bias2);
    params.output.scaled_add(-step, &grads.output);
    params.output_bias.scaled_add(-step, &grads.output_bias);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(n: usize, vocab: usize, d: usize, h1: usize, h2: usize) -> ModelParams {
        ModelParams {
            n,
            embed: Array2::zeros((vocab, d)),
            hidden1: (0..n - 1).map(|_| Array2::zeros((h1, d))).collect(),
            bias1: Array1::zeros(h1),
            hidden2: Array2::zeros((h2, h1)),
            bias2: Array1::zeros(h2),
            output: Array2::zeros((vocab, h2)),
            output_bias: Array1::zeros(vocab),
        }
    }

    fn dataset_from(n: usize, examples: &[(&[usize], usize)]) -> NGramDataset {
        let mut d = NGramDataset::new(n);
        for (ctx, t) in examples {
            d.push(ctx, *t);
        }
        d
    }

    fn param_slices_mut(p: &mut ModelParams) -> Vec<&mut [f64]> {
        let ModelParams {
            embed,
            hidden1,
            bias1,
            hidden2,
            bias2,
            output,
            output_bias,
            ..
        } = p;
        let mut out: Vec<&mut [f64]> = vec![embed.as_slice_mut().unwrap()];
        for block in hidden1 {
            out.push(block.as_slice_mut().unwrap());
        }
        out.push(bias1.as_slice_mut().unwrap());
        out.push(hidden2.as_slice_mut().unwrap());
        out.push(bias2.as_slice_mut().unwrap());
        out.push(output.as_slice_mut().unwrap());
        out.push(output_bias.as_slice_mut().unwrap());
        out
    }

    fn grad_slices(g: &Gradients) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![g.embed.as_slice().unwrap()];
        for block in &g.hidden1 {
            out.push(block.as_slice().unwrap());
        }
        out.push(g.bias1.as_slice().unwrap());
        out.push(g.hidden2.as_slice().unwrap());
        out.push(g.bias2.as_slice().unwrap());
        out.push(g.output.as_slice().unwrap());
        out.push(g.output_bias.as_slice().unwrap());
        out
    }

    #[test]
    fn init_is_seed_determined() {
        let a = init_params(3, 11, 4, 5, 3, 42).unwrap();
        let b = init_params(3, 11, 4, 5, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = init_params(3, 11, 4, 5, 3, 43).unwrap();
        assert_ne!(a, c);
        assert!(a.bias1.iter().all(|&x| x == 0.0));
        assert!(a.output_bias.iter().all(|&x| x == 0.0));
        assert_eq!(a.hidden1.len(), 2);
        assert!(init_params(1, 11, 4, 5, 3, 0).is_err());
        assert!(init_params(3, 0, 4, 5, 3, 0).is_err());
    }

    #[test]
    fn zero_model_is_exactly_uniform() {
        let p = zero_params(3, 197, 4, 5, 3);
        let lp = forward(&p, &[0, 1]).unwrap();
        let expected = -(197.0f64).ln();
        for &v in lp.iter() {
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn forward_normalizes_for_random_models() {
        for seed in 0..5 {
            let p = init_params(3, 23, 6, 8, 4, seed).unwrap();
            let lp = forward(&p, &[seed as usize % 23, 7]).unwrap();
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() <= 1e-12, "seed {seed}: {total}");
        }
    }

    #[test]
    fn degenerate_shapes_still_normalize() {
        for (d, h1, h2) in [(0, 5, 3), (4, 0, 3), (4, 5, 0), (0, 0, 0)] {
            let p = init_params(3, 9, d, h1, h2, 1).unwrap();
            let lp = forward(&p, &[2, 3]).unwrap();
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() <= 1e-12, "({d},{h1},{h2}): {total}");
        }
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let p = zero_params(3, 9, 2, 2, 2);
        assert!(matches!(forward(&p, &[0]), Err(Error::Input(_))));
        assert!(matches!(forward(&p, &[0, 9]), Err(Error::Input(_))));
    }

    #[test]
    fn nll_matches_forward_and_counts() {
        let p = init_params(3, 9, 3, 4, 3, 5).unwrap();
        let d = dataset_from(3, &[(&[1, 2], 7)]);
        let total = nll(&p, &d).unwrap();
        let lp = forward(&p, &[1, 2]).unwrap();
        assert_eq!(total, -lp[7]);

        assert_eq!(nll(&p, &NGramDataset::new(3)).unwrap(), 0.0);

        let z = zero_params(3, 197, 2, 2, 2);
        let d4 = dataset_from(3, &[(&[0, 1], 2), (&[3, 4], 5), (&[6, 7], 8), (&[0, 0], 0)]);
        assert_eq!(nll(&z, &d4).unwrap(), 4.0 * (197.0f64).ln());

        let mismatched = dataset_from(2, &[(&[0], 1)]);
        assert!(nll(&p, &mismatched).is_err());
    }

    #[test]
    fn uniform_perplexity_equals_vocab_size_exactly() {
        let v = 197usize;
        let p = zero_params(3, v, 2, 2, 2);
        let mut d = NGramDataset::new(3);
        for i in 0..8 {
            d.push(&[i % v, (i * 3) % v], (i * 7) % v);
        }
        assert_eq!(perplexity(&p, &d).unwrap(), v as f64);
        assert!(perplexity(&p, &NGramDataset::new(3)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..2 {
            let mut p = init_params(3, 9, 3, 4, 3, seed).unwrap();
            let d = dataset_from(3, &[(&[1, 2], 7), (&[0, 8], 3), (&[5, 5], 0)]);
            let indices: Vec<usize> = (0..d.len()).collect();
            let grads = backward(&p, &d, &indices).unwrap();
            let grad_flat: Vec<Vec<f64>> =
                grad_slices(&grads).into_iter().map(|s| s.to_vec()).collect();

            for (a, garr) in grad_flat.iter().enumerate() {
                for (i, &g) in garr.iter().enumerate() {
                    let orig = param_slices_mut(&mut p)[a][i];
                    param_slices_mut(&mut p)[a][i] = orig + h;
                    let up = nll(&p, &d).unwrap();
                    param_slices_mut(&mut p)[a][i] = orig - h;
                    let down = nll(&p, &d).unwrap();
                    param_slices_mut(&mut p)[a][i] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                    assert!(rel <= 1e-4, "seed {seed} array {a} entry {i}: {g} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn duplicated_example_doubles_gradient_exactly() {
        let p = init_params(3, 9, 3, 4, 3, 2).unwrap();
        let d = dataset_from(3, &[(&[1, 2], 7)]);
        let single = backward(&p, &d, &[0]).unwrap();
        let double = backward(&p, &d, &[0, 0]).unwrap();
        for (s, t) in grad_slices(&single).iter().zip(grad_slices(&double).iter()) {
            for (a, b) in s.iter().zip(t.iter()) {
                assert_eq!(2.0 * a, *b);
            }
        }
    }

    #[test]
    fn zero_model_output_bias_gradient_is_softmax_minus_onehot() {
        let v = 9usize;
        let p = zero_params(3, v, 2, 2, 2);
        let d = dataset_from(3, &[(&[0, 1], 4)]);
        let grads = backward(&p, &d, &[0]).unwrap();
        let uniform = 1.0 / v as f64;
        for (i, &g) in grads.output_bias.iter().enumerate() {
            let expected = if i == 4 { uniform - 1.0 } else { uniform };
            assert_eq!(g, expected);
        }
    }

    #[test]
    fn zeroed_group_silences_its_unit() {
        let mut p = init_params(3, 9, 3, 4, 3, 6).unwrap();
        for block in p.hidden1.iter_mut() {
            block.row_mut(1).fill(0.0);
        }
        p.bias1[1] = 0.0;
        let mut ws = Workspace::new(&p);
        for ctx in [[0usize, 1], [5, 8], [3, 3]] {
            ws.forward_raw(&p, &ctx);
            assert_eq!(ws.hidden1_activation(1), 0.0);
        }
    }

    #[test]
    fn gather_scatter_round_trip() {
        let mut p = init_params(3, 9, 3, 4, 3, 8).unwrap();
        let mut buf = Vec::new();
        p.gather_group(HiddenLayer::First, 2, &mut buf);
        assert_eq!(buf.len(), 2 * 3 + 1);
        let copy = buf.clone();
        p.scatter_group(HiddenLayer::First, 2, &copy);
        let mut buf2 = Vec::new();
        p.gather_group(HiddenLayer::First, 2, &mut buf2);
        assert_eq!(buf, buf2);

        p.gather_group(HiddenLayer::Second, 0, &mut buf);
        assert_eq!(buf.len(), 4 + 1);
    }

    #[test]
    fn model_file_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let p = init_params(3, 11, 4, 5, 3, 77).unwrap();
        p.save(&path).unwrap();
        let loaded = ModelParams::load(&path).unwrap();
        assert_eq!(p, loaded);
        let again = dir.path().join("model2.txt");
        loaded.save(&again).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    #[test]
    fn degenerate_model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let p = zero_params(2, 3, 0, 0, 2);
        p.save(&path).unwrap();
        let loaded = ModelParams::load(&path).unwrap();
        assert_eq!(p, loaded);
    }

    #[test]
    fn loader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let p = init_params(2, 4, 2, 2, 2, 1).unwrap();
        p.save(&path).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        let cases: Vec<String> = vec![
            good.replacen("AUTOSIZE-NNLM 1", "AUTOSIZE-NNLM 2", 1),
            good.replacen("2 4 2 2 2", "2 4 2 2", 1),
            good.replacen("2 4 2 2 2", "1 4 2 2 2", 1),
            good.lines().take(5).collect::<Vec<_>>().join("\n"),
            format!("{good}1.0 2.0\n"),
            good.replacen("e0", "e0 0.0", 1),
        ];
        for (i, text) in cases.iter().enumerate() {
            std::fs::write(&path, text).unwrap();
            assert!(ModelParams::load(&path).is_err(), "case {i} should fail");
        }

        let nan_text = {
            let mut lines: Vec<String> = good.lines().map(str::to_string).collect();
            lines[2] = "NaN 0.0".to_string();
            lines.join("\n")
        };
        std::fs::write(&path, nan_text).unwrap();
        assert!(ModelParams::load(&path).is_err());
    }

    #[test]
    fn gradient_step_with_zero_rate_is_identity() {
        let mut p = init_params(3, 9, 3, 4, 3, 4).unwrap();
        let reference = p.clone();
        let d = dataset_from(3, &[(&[1, 2], 7)]);
        let grads = backward(&p, &d, &[0]).unwrap();
        apply_gradient_step(&mut p, &grads, 0.0);
        assert_eq!(p, reference);
    }
}
