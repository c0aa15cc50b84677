//! One-layer LSTM language model: embedding → LSTM cell → softmax projection.
//!
//! Training is plain SGD over truncated BPTT windows with global
//! gradient-norm clipping; see [`train`]. Everything is deterministic given
//! (corpus, config, seed). Gradients are hand-derived; [`grad_probe`] exposes
//! the magnitude of the error gradient backpropagated through time.

mod checkpoint;
mod train;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use train::{
    grad_probe, span_grad_probe, train, window_loss_and_grads, EpochMetrics, LstmGrads,
    TrainConfig,
};
pub use vocab::{Vocab, ALPHA_ID, ALPHA_TOKEN, OMEGA_ID, OMEGA_TOKEN, UNK_ID, UNK_TOKEN};

use crate::math::{log_softmax, matvec_into, sigmoid, softmax, tanh_act, Mat64, Rng, Vec64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("token id {id} out of range for vocabulary of {vocab} entries")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("corpus of {len} tokens is too short; need at least {need}")]
    CorpusTooShort { len: usize, need: usize },
    #[error("empty context")]
    EmptyContext,
    #[error("dimension must be positive: {0}")]
    ZeroDimension(&'static str),
    #[error("state dimension {got} does not match model hidden dimension {expected}")]
    StateDimMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("non-finite loss at epoch {epoch}, window starting at token {window_start}")]
    NonFiniteLoss { epoch: usize, window_start: usize },
    #[error("gradient probe range invalid: t={t}, k={k}, sequence length {len}")]
    ProbeOutOfRange { t: usize, k: usize, len: usize },
    #[error("duplicate token in vocabulary: {0}")]
    DuplicateToken(String),
    #[error("vocabulary JSON: {0}")]
    VocabJson(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
}

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

/// All weights of the model.
///
/// Gate order everywhere in this crate is `i` (input), `f` (forget),
/// `o` (output), `g` (candidate). The flat tensor order used by
/// [`LstmParams::tensor_slices`], checkpoints, and initialization is:
/// `embed, w_i, v_i, b_i, w_f, v_f, b_f, w_o, v_o, b_o, w_g, v_g, b_g,
/// w_out, b_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// Embedding matrix, vocab × embed.
    pub embed: Mat64,
    pub w_i: Mat64,
    pub v_i: Mat64,
    pub b_i: Vec64,
    pub w_f: Mat64,
    pub v_f: Mat64,
    pub b_f: Vec64,
    pub w_o: Mat64,
    pub v_o: Mat64,
    pub b_o: Vec64,
    pub w_g: Mat64,
    pub v_g: Mat64,
    pub b_g: Vec64,
    /// Output projection, vocab × hidden.
    pub w_out: Mat64,
    pub b_out: Vec64,
}

impl LstmParams {
    pub fn zeros(dims: Dims) -> Self {
        let (v, d, h) = (dims.vocab, dims.embed, dims.hidden);
        LstmParams {
            embed: Mat64::zeros(v, d),
            w_i: Mat64::zeros(h, d),
            v_i: Mat64::zeros(h, h),
            b_i: Vec64::zeros(h),
            w_f: Mat64::zeros(h, d),
            v_f: Mat64::zeros(h, h),
            b_f: Vec64::zeros(h),
            w_o: Mat64::zeros(h, d),
            v_o: Mat64::zeros(h, h),
            b_o: Vec64::zeros(h),
            w_g: Mat64::zeros(h, d),
            v_g: Mat64::zeros(h, h),
            b_g: Vec64::zeros(h),
            w_out: Mat64::zeros(v, h),
            b_out: Vec64::zeros(v),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            vocab: self.embed.rows(),
            embed: self.embed.cols(),
            hidden: self.v_i.rows(),
        }
    }

    /// All tensors in the documented fixed order.
    pub fn tensor_slices(&self) -> [&[f64]; 15] {
        [
            self.embed.as_slice(),
            self.w_i.as_slice(),
            self.v_i.as_slice(),
            self.b_i.as_slice(),
            self.w_f.as_slice(),
            self.v_f.as_slice(),
            self.b_f.as_slice(),
            self.w_o.as_slice(),
            self.v_o.as_slice(),
            self.b_o.as_slice(),
            self.w_g.as_slice(),
            self.v_g.as_slice(),
            self.b_g.as_slice(),
            self.w_out.as_slice(),
            self.b_out.as_slice(),
        ]
    }

    pub fn tensor_slices_mut(&mut self) -> [&mut [f64]; 15] {
        [
            self.embed.as_mut_slice(),
            self.w_i.as_mut_slice(),
            self.v_i.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.v_f.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.v_o.as_mut_slice(),
            self.b_o.as_mut_slice(),
            self.w_g.as_mut_slice(),
            self.v_g.as_mut_slice(),
            self.b_g.as_mut_slice(),
            self.w_out.as_mut_slice(),
            self.b_out.as_mut_slice(),
        ]
    }

    /// Concatenation of all tensors in the fixed order.
    pub fn to_flat_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.tensor_slices() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Inverse of [`LstmParams::to_flat_vec`].
    pub fn from_flat_vec(dims: Dims, flat: &[f64]) -> Result<Self, LmError> {
        let mut p = LstmParams::zeros(dims);
        let mut offset = 0;
        for s in p.tensor_slices_mut() {
            let next = offset + s.len();
            if next > flat.len() {
                return Err(LmError::CheckpointFormat(format!(
                    "flat parameter vector too short: {} < {}",
                    flat.len(),
                    next
                )));
            }
            s.copy_from_slice(&flat[offset..next]);
            offset = next;
        }
        if offset != flat.len() {
            return Err(LmError::CheckpointFormat(format!(
                "flat parameter vector too long: {} > {}",
                flat.len(),
                offset
            )));
        }
        Ok(p)
    }

    pub fn num_params(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }

    fn check_token(&self, tok: u32) -> Result<(), LmError> {
        if (tok as usize) < self.embed.rows() {
            Ok(())
        } else {
            Err(LmError::TokenOutOfRange {
                id: tok,
                vocab: self.embed.rows(),
            })
        }
    }
}

/// Hidden and cell vectors. Every entry of `h` stays in (−1, 1) because the
/// output gate lies in (0,1) and tanh of the cell in (−1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec64,
    pub c: Vec64,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Vec64::zeros(hidden),
            c: Vec64::zeros(hidden),
        }
    }
}

/// Gate activations of one step; kept for backpropagation and analysis.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub tok: u32,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl StepCache {
    pub fn zeros(hidden: usize) -> Self {
        StepCache {
            tok: 0,
            i: vec![0.0; hidden],
            f: vec![0.0; hidden],
            o: vec![0.0; hidden],
            g: vec![0.0; hidden],
            c: vec![0.0; hidden],
            tanh_c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// One LSTM cell step writing all activations into `out`; the hot path
/// shared by forward, training, and the gradient probe.
pub(crate) fn cell_step(
    p: &LstmParams,
    h_prev: &[f64],
    c_prev: &[f64],
    tok: u32,
    out: &mut StepCache,
) {
    let x = p.embed.row(tok as usize);
    out.tok = tok;
    // preactivations a_g = W_g x + V_g h_prev + b_g, then the nonlinearity
    gate_preact(&mut out.i, &p.w_i, &p.v_i, &p.b_i, x, h_prev);
    gate_preact(&mut out.f, &p.w_f, &p.v_f, &p.b_f, x, h_prev);
    gate_preact(&mut out.o, &p.w_o, &p.v_o, &p.b_o, x, h_prev);
    gate_preact(&mut out.g, &p.w_g, &p.v_g, &p.b_g, x, h_prev);
    for j in 0..h_prev.len() {
        out.i[j] = sigmoid(out.i[j]);
        out.f[j] = sigmoid(out.f[j]);
        out.o[j] = sigmoid(out.o[j]);
        out.g[j] = tanh_act(out.g[j]);
        out.c[j] = out.f[j] * c_prev[j] + out.i[j] * out.g[j];
        out.tanh_c[j] = tanh_act(out.c[j]);
        out.h[j] = out.o[j] * out.tanh_c[j];
    }
}

fn gate_preact(out: &mut [f64], w: &Mat64, v: &Mat64, b: &Vec64, x: &[f64], h: &[f64]) {
    matvec_into(out, w, x);
    for (i, o) in out.iter_mut().enumerate() {
        let row = v.row(i);
        let mut acc = *o + b[i];
        for (a, hh) in row.iter().zip(h.iter()) {
            acc += a * hh;
        }
        *o = acc;
    }
}

pub(crate) fn logits_into(out: &mut [f64], p: &LstmParams, h: &[f64]) {
    matvec_into(out, &p.w_out, h);
    for (o, b) in out.iter_mut().zip(p.b_out.iter()) {
        *o += b;
    }
}

/// Advances the model by one token, returning the new state and the logits.
pub fn forward_step(
    p: &LstmParams,
    s: &LstmState,
    tok: u32,
) -> Result<(LstmState, Vec64), LmError> {
    p.check_token(tok)?;
    let h = p.dims().hidden;
    if s.h.len() != h || s.c.len() != h {
        return Err(LmError::StateDimMismatch {
            expected: h,
            got: s.h.len(),
        });
    }
    let mut cache = StepCache::zeros(h);
    cell_step(p, s.h.as_slice(), s.c.as_slice(), tok, &mut cache);
    let mut logits = Vec64::zeros(p.dims().vocab);
    logits_into(logits.as_mut_slice(), p, &cache.h);
    let state = LstmState {
        h: Vec64::from_fn(h, |j| cache.h[j]),
        c: Vec64::from_fn(h, |j| cache.c[j]),
    };
    Ok((state, logits))
}

/// Runs the model over `context` from the zero state and returns the final
/// hidden state.
pub fn run_sequence(p: &LstmParams, context: &[u32]) -> Result<LstmState, LmError> {
    let h = p.dims().hidden;
    let mut cache = StepCache::zeros(h);
    let mut state = LstmState::zeros(h);
    for &tok in context {
        p.check_token(tok)?;
        cell_step(p, state.h.as_slice(), state.c.as_slice(), tok, &mut cache);
        state.h.as_mut_slice().copy_from_slice(&cache.h);
        state.c.as_mut_slice().copy_from_slice(&cache.c);
    }
    Ok(state)
}

/// Probability of `target` as the next token after `context` (zero initial
/// state, softmax of the logits at the final context position).
pub fn eval_next_token_prob(p: &LstmParams, context: &[u32], target: u32) -> Result<f64, LmError> {
    if context.is_empty() {
        return Err(LmError::EmptyContext);
    }
    p.check_token(target)?;
    let state = run_sequence(p, context)?;
    let mut logits = Vec64::zeros(p.dims().vocab);
    logits_into(logits.as_mut_slice(), p, state.h.as_slice());
    let probs = softmax(&logits).expect("vocab is nonempty");
    Ok(probs[target as usize])
}

/// Mean cross-entropy (nats/token) of the model on `corpus`, zero start.
pub fn mean_cross_entropy(p: &LstmParams, corpus: &[u32]) -> Result<f64, LmError> {
    if corpus.len() < 2 {
        return Err(LmError::CorpusTooShort {
            len: corpus.len(),
            need: 2,
        });
    }
    let h = p.dims().hidden;
    let mut cache = StepCache::zeros(h);
    let mut state = LstmState::zeros(h);
    let mut logits = vec![0.0; p.dims().vocab];
    let mut total = 0.0;
    for w in corpus.windows(2) {
        let (tok, target) = (w[0], w[1]);
        p.check_token(tok)?;
        p.check_token(target)?;
        cell_step(p, state.h.as_slice(), state.c.as_slice(), tok, &mut cache);
        state.h.as_mut_slice().copy_from_slice(&cache.h);
        state.c.as_mut_slice().copy_from_slice(&cache.c);
        logits_into(&mut logits, p, &cache.h);
        total -= log_softmax(&logits)[target as usize];
    }
    Ok(total / (corpus.len() - 1) as f64)
}

/// Initializes parameters: weights uniform in [−1/√h, +1/√h], biases zero
/// except the forget-gate bias. Tensors are drawn in the documented fixed
/// order, so the result is a pure function of `(dims, seed, forget_bias)`.
pub fn init_params_with(dims: Dims, seed: u64, forget_bias: f64) -> Result<LstmParams, LmError> {
    if dims.vocab == 0 {
        return Err(LmError::ZeroDimension("vocab"));
    }
    if dims.embed == 0 {
        return Err(LmError::ZeroDimension("embed"));
    }
    if dims.hidden == 0 {
        return Err(LmError::ZeroDimension("hidden"));
    }
    let bound = 1.0 / (dims.hidden as f64).sqrt();
    let mut rng = Rng::for_purpose(seed, "lm.init");
    let mut p = LstmParams::zeros(dims);
    for s in [
        p.embed.as_mut_slice(),
        p.w_i.as_mut_slice(),
        p.v_i.as_mut_slice(),
        p.w_f.as_mut_slice(),
        p.v_f.as_mut_slice(),
        p.w_o.as_mut_slice(),
        p.v_o.as_mut_slice(),
        p.w_g.as_mut_slice(),
        p.v_g.as_mut_slice(),
        p.w_out.as_mut_slice(),
    ] {
        for x in s.iter_mut() {
            *x = rng.uniform(-bound, bound);
        }
    }
    for x in p.b_f.as_mut_slice() {
        *x = forget_bias;
    }
    Ok(p)
}

/// [`init_params_with`] with the default forget-gate bias of 1.0.
pub fn init_params(dims: Dims, seed: u64) -> Result<LstmParams, LmError> {
    init_params_with(dims, seed, 1.0)
}
