//! SGD training over truncated BPTT windows, and the gradient probe.

use serde::{Deserialize, Serialize};

use super::{
    cell_step, logits_into, Checkpoint, Dims, LmError, LstmParams, LstmState, StepCache, Vocab,
};
use crate::math::{matvec_t_add, outer_add, Mat64, Vec64};

/// Training hyperparameters. Plain SGD; momentum and weight decay exist as
/// fields for the record but must stay 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub bptt_len: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub seed: u64,
    /// Initial forget-gate bias (1.0 eases long-range learning; set 0 to
    /// disable the deviation).
    #[serde(default = "default_forget_bias")]
    pub forget_bias: f64,
}

fn default_forget_bias() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            clip_norm: 0.25,
            epochs: 1,
            bptt_len: 35,
            hidden_dim: 128,
            embed_dim: 64,
            momentum: 0.0,
            weight_decay: 0.0,
            seed: 0,
            forget_bias: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        if !(self.learning_rate > 0.0) {
            return Err(LmError::BadConfig("learning_rate must be > 0".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(LmError::BadConfig("clip_norm must be > 0".into()));
        }
        if self.bptt_len == 0 {
            return Err(LmError::BadConfig("bptt_len must be >= 1".into()));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(LmError::BadConfig("dimensions must be positive".into()));
        }
        if self.momentum != 0.0 || self.weight_decay != 0.0 {
            return Err(LmError::BadConfig(
                "momentum and weight decay are fixed at 0".into(),
            ));
        }
        Ok(())
    }

    pub fn dims(&self, vocab_size: usize) -> Dims {
        Dims {
            vocab: vocab_size,
            embed: self.embed_dim,
            hidden: self.hidden_dim,
        }
    }
}

/// Per-epoch training metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// Mean cross-entropy per token, nats.
    pub train_loss: f64,
}

/// Gradients for every model tensor, in the same shapes as [`LstmParams`].
#[derive(Debug, Clone)]
pub struct LstmGrads {
    g: LstmParams,
}

impl LstmGrads {
    pub fn zeros(dims: Dims) -> Self {
        LstmGrads {
            g: LstmParams::zeros(dims),
        }
    }

    pub fn zero_out(&mut self) {
        for s in self.g.tensor_slices_mut() {
            s.fill(0.0);
        }
    }

    pub fn as_params(&self) -> &LstmParams {
        &self.g
    }

    pub fn to_flat_vec(&self) -> Vec<f64> {
        self.g.to_flat_vec()
    }

    /// Euclidean norm over every gradient entry.
    pub fn global_norm(&self) -> f64 {
        self.g
            .tensor_slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.g.tensor_slices_mut() {
            for x in s.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// Rescales so the global norm does not exceed `clip_norm`.
    pub fn clip_global_norm(&mut self, clip_norm: f64) {
        let norm = self.global_norm();
        if norm > clip_norm {
            self.scale(clip_norm / norm);
        }
    }
}

fn apply_sgd(p: &mut LstmParams, grads: &LstmGrads, lr: f64) {
    let gs = grads.g.tensor_slices();
    for (ps, g) in p.tensor_slices_mut().into_iter().zip(gs) {
        for (w, dw) in ps.iter_mut().zip(g.iter()) {
            *w -= lr * dw;
        }
    }
}

/// Reusable backward-pass buffers.
struct Scratch {
    dh: Vec<f64>,
    dc: Vec<f64>,
    dh_prev: Vec<f64>,
    dc_prev: Vec<f64>,
    da_i: Vec<f64>,
    da_f: Vec<f64>,
    da_o: Vec<f64>,
    da_g: Vec<f64>,
    dx: Vec<f64>,
}

impl Scratch {
    fn new(dims: Dims) -> Self {
        Scratch {
            dh: vec![0.0; dims.hidden],
            dc: vec![0.0; dims.hidden],
            dh_prev: vec![0.0; dims.hidden],
            dc_prev: vec![0.0; dims.hidden],
            da_i: vec![0.0; dims.hidden],
            da_f: vec![0.0; dims.hidden],
            da_o: vec![0.0; dims.hidden],
            da_g: vec![0.0; dims.hidden],
            dx: vec![0.0; dims.embed],
        }
    }
}

/// Backpropagates one cell step: consumes (dh, dc) arriving at this step's
/// outputs and leaves the gradients w.r.t. the previous state in their
/// place, optionally accumulating parameter gradients.
fn cell_backward(
    p: &LstmParams,
    cache: &StepCache,
    h_prev: &[f64],
    c_prev: &[f64],
    s: &mut Scratch,
    mut grads: Option<&mut LstmGrads>,
) {
    for j in 0..h_prev.len() {
        let tc = cache.tanh_c[j];
        let d_o = s.dh[j] * tc;
        let d_tc = s.dh[j] * cache.o[j];
        let d_c = s.dc[j] + d_tc * (1.0 - tc * tc);
        let d_i = d_c * cache.g[j];
        let d_g = d_c * cache.i[j];
        let d_f = d_c * c_prev[j];
        s.dc_prev[j] = d_c * cache.f[j];
        s.da_i[j] = d_i * cache.i[j] * (1.0 - cache.i[j]);
        s.da_f[j] = d_f * cache.f[j] * (1.0 - cache.f[j]);
        s.da_o[j] = d_o * cache.o[j] * (1.0 - cache.o[j]);
        s.da_g[j] = d_g * (1.0 - cache.g[j] * cache.g[j]);
    }
    if let Some(grads) = grads.as_deref_mut() {
        let x = p.embed.row(cache.tok as usize);
        accumulate_gate(&mut grads.g.w_i, &mut grads.g.v_i, &mut grads.g.b_i, &s.da_i, x, h_prev);
        accumulate_gate(&mut grads.g.w_f, &mut grads.g.v_f, &mut grads.g.b_f, &s.da_f, x, h_prev);
        accumulate_gate(&mut grads.g.w_o, &mut grads.g.v_o, &mut grads.g.b_o, &s.da_o, x, h_prev);
        accumulate_gate(&mut grads.g.w_g, &mut grads.g.v_g, &mut grads.g.b_g, &s.da_g, x, h_prev);
        s.dx.fill(0.0);
        matvec_t_add(&mut s.dx, &p.w_i, &s.da_i);
        matvec_t_add(&mut s.dx, &p.w_f, &s.da_f);
        matvec_t_add(&mut s.dx, &p.w_o, &s.da_o);
        matvec_t_add(&mut s.dx, &p.w_g, &s.da_g);
        for (e, d) in grads
            .g
            .embed
            .row_mut(cache.tok as usize)
            .iter_mut()
            .zip(s.dx.iter())
        {
            *e += d;
        }
    }
    s.dh_prev.fill(0.0);
    matvec_t_add(&mut s.dh_prev, &p.v_i, &s.da_i);
    matvec_t_add(&mut s.dh_prev, &p.v_f, &s.da_f);
    matvec_t_add(&mut s.dh_prev, &p.v_o, &s.da_o);
    matvec_t_add(&mut s.dh_prev, &p.v_g, &s.da_g);
    std::mem::swap(&mut s.dh, &mut s.dh_prev);
    std::mem::swap(&mut s.dc, &mut s.dc_prev);
}

fn accumulate_gate(
    w: &mut Mat64,
    v: &mut Mat64,
    b: &mut Vec64,
    da: &[f64],
    x: &[f64],
    h_prev: &[f64],
) {
    outer_add(w, da, x);
    outer_add(v, da, h_prev);
    for (bj, d) in b.as_mut_slice().iter_mut().zip(da.iter()) {
        *bj += d;
    }
}

/// Forward + backward over one window. Returns the summed cross-entropy, or
/// a non-finite value if the forward pass diverged (backward is skipped).
#[allow(clippy::too_many_arguments)]
fn window_pass(
    p: &LstmParams,
    h0: &[f64],
    c0: &[f64],
    inputs: &[u32],
    targets: &[u32],
    grads: &mut LstmGrads,
    steps: &mut [StepCache],
    probs: &mut [Vec<f64>],
    s: &mut Scratch,
) -> f64 {
    let t_len = inputs.len();

    let mut loss_sum = 0.0;
    for t in 0..t_len {
        let (done, rest) = steps.split_at_mut(t);
        let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
            (h0, c0)
        } else {
            (&done[t - 1].h, &done[t - 1].c)
        };
        cell_step(p, h_prev, c_prev, inputs[t], &mut rest[0]);
        let buf = &mut probs[t];
        logits_into(buf, p, &rest[0].h);
        let max = buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = buf.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
        loss_sum += lse - buf[targets[t] as usize];
        for x in buf.iter_mut() {
            *x = (*x - lse).exp();
        }
    }
    if !loss_sum.is_finite() {
        return loss_sum;
    }

    // backward with mean reduction over the window
    let inv_t = 1.0 / t_len as f64;
    s.dh.fill(0.0);
    s.dc.fill(0.0);
    for t in (0..t_len).rev() {
        let dlogit = &mut probs[t];
        dlogit[targets[t] as usize] -= 1.0;
        for x in dlogit.iter_mut() {
            *x *= inv_t;
        }
        outer_add(&mut grads.g.w_out, dlogit, &steps[t].h);
        for (bj, d) in grads.g.b_out.as_mut_slice().iter_mut().zip(dlogit.iter()) {
            *bj += d;
        }
        matvec_t_add(&mut s.dh, &p.w_out, dlogit);

        let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
            (h0, c0)
        } else {
            (&steps[t - 1].h, &steps[t - 1].c)
        };
        cell_backward(p, &steps[t], h_prev, c_prev, s, Some(grads));
    }
    loss_sum
}

/// Mean loss and parameter gradients for one window, plus the final carried
/// state. Exposed for gradient checking.
pub fn window_loss_and_grads(
    p: &LstmParams,
    state: &LstmState,
    inputs: &[u32],
    targets: &[u32],
) -> Result<(f64, LstmGrads, LstmState), LmError> {
    assert_eq!(inputs.len(), targets.len());
    if inputs.is_empty() {
        return Err(LmError::EmptyContext);
    }
    for &tok in inputs.iter().chain(targets.iter()) {
        p.check_token(tok)?;
    }
    let dims = p.dims();
    let mut grads = LstmGrads::zeros(dims);
    let mut steps: Vec<StepCache> = (0..inputs.len())
        .map(|_| StepCache::zeros(dims.hidden))
        .collect();
    let mut probs: Vec<Vec<f64>> = (0..inputs.len()).map(|_| vec![0.0; dims.vocab]).collect();
    let mut scratch = Scratch::new(dims);
    let loss_sum = window_pass(
        p,
        state.h.as_slice(),
        state.c.as_slice(),
        inputs,
        targets,
        &mut grads,
        &mut steps,
        &mut probs,
        &mut scratch,
    );
    let last = &steps[inputs.len() - 1];
    let final_state = LstmState {
        h: Vec64::from_fn(dims.hidden, |j| last.h[j]),
        c: Vec64::from_fn(dims.hidden, |j| last.c[j]),
    };
    Ok((loss_sum / inputs.len() as f64, grads, final_state))
}

/// Trains the model on a single token stream and returns one checkpoint per
/// epoch.
///
/// Truncated BPTT over windows of `bptt_len` with hidden-state carryover
/// within an epoch; global gradient-norm clipping; plain SGD; mean loss over
/// window tokens. Deterministic given (corpus, vocab, config).
pub fn train(corpus: &[u32], vocab: &Vocab, cfg: &TrainConfig) -> Result<Vec<Checkpoint>, LmError> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Err(LmError::BadConfig("epochs must be >= 1".into()));
    }
    if corpus.len() < cfg.bptt_len + 1 {
        return Err(LmError::CorpusTooShort {
            len: corpus.len(),
            need: cfg.bptt_len + 1,
        });
    }
    let dims = cfg.dims(vocab.len());
    for &tok in corpus {
        if tok as usize >= dims.vocab {
            return Err(LmError::TokenOutOfRange {
                id: tok,
                vocab: dims.vocab,
            });
        }
    }

    let mut params = super::init_params_with(dims, cfg.seed, cfg.forget_bias)?;
    let mut grads = LstmGrads::zeros(dims);
    let mut steps: Vec<StepCache> = (0..cfg.bptt_len)
        .map(|_| StepCache::zeros(dims.hidden))
        .collect();
    let mut probs: Vec<Vec<f64>> = (0..cfg.bptt_len).map(|_| vec![0.0; dims.vocab]).collect();
    let mut scratch = Scratch::new(dims);
    let mut h0 = vec![0.0; dims.hidden];
    let mut c0 = vec![0.0; dims.hidden];
    let mut checkpoints = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        h0.fill(0.0);
        c0.fill(0.0);
        let mut pos = 0usize;
        let mut loss_total = 0.0;
        let mut tokens = 0usize;
        while pos + 1 < corpus.len() {
            let t_len = cfg.bptt_len.min(corpus.len() - 1 - pos);
            let inputs = &corpus[pos..pos + t_len];
            let targets = &corpus[pos + 1..pos + 1 + t_len];
            grads.zero_out();
            let loss_sum = window_pass(
                &params,
                &h0,
                &c0,
                inputs,
                targets,
                &mut grads,
                &mut steps[..t_len],
                &mut probs[..t_len],
                &mut scratch,
            );
            if !loss_sum.is_finite() {
                return Err(LmError::NonFiniteLoss {
                    epoch,
                    window_start: pos,
                });
            }
            grads.clip_global_norm(cfg.clip_norm);
            apply_sgd(&mut params, &grads, cfg.learning_rate);
            let last = &steps[t_len - 1];
            h0.copy_from_slice(&last.h);
            c0.copy_from_slice(&last.c);
            loss_total += loss_sum;
            tokens += t_len;
            pos += t_len;
        }
        checkpoints.push(Checkpoint {
            params: params.clone(),
            vocab: vocab.clone(),
            config: cfg.clone(),
            epoch,
            metrics: EpochMetrics {
                train_loss: loss_total / tokens as f64,
            },
        });
    }
    Ok(checkpoints)
}

/// Magnitude of the error gradient backpropagated through time.
///
/// `e` is the cross-entropy of `seq[t]` predicted from the state after
/// consuming `seq[..t]`. For each offset `d` in `1..=k` the result holds
/// ‖∂e/∂h at the state reached after consuming `seq[t-k+d-1]`‖₂, so `d = k`
/// is the state feeding the softmax and `d = 1` is `k−1` steps earlier.
/// Only `e` is backpropagated; parameter gradients are not formed.
pub fn grad_probe(p: &LstmParams, seq: &[u32], t: usize, k: usize) -> Result<Vec<f64>, LmError> {
    if k == 0 || t < k || t >= seq.len() {
        return Err(LmError::ProbeOutOfRange {
            t,
            k,
            len: seq.len(),
        });
    }
    for &tok in &seq[..=t] {
        p.check_token(tok)?;
    }
    let dims = p.dims();
    let zeros = vec![0.0; dims.hidden];
    let mut steps: Vec<StepCache> = Vec::with_capacity(t);
    for (j, &tok) in seq[..t].iter().enumerate() {
        let mut cache = StepCache::zeros(dims.hidden);
        {
            let (h_prev, c_prev): (&[f64], &[f64]) = if j == 0 {
                (&zeros, &zeros)
            } else {
                (&steps[j - 1].h, &steps[j - 1].c)
            };
            cell_step(p, h_prev, c_prev, tok, &mut cache);
        }
        steps.push(cache);
    }

    // d e / d logits = softmax - onehot(target)
    let mut dlogit = vec![0.0; dims.vocab];
    logits_into(&mut dlogit, p, &steps[t - 1].h);
    let max = dlogit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = dlogit.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
    for x in dlogit.iter_mut() {
        *x = (*x - lse).exp();
    }
    dlogit[seq[t] as usize] -= 1.0;

    let mut s = Scratch::new(dims);
    matvec_t_add(&mut s.dh, &p.w_out, &dlogit);

    let mut norms = vec![0.0; k];
    for j in (t - k..t).rev() {
        let d = j - (t - k) + 1;
        norms[d - 1] = s.dh.iter().map(|x| x * x).sum::<f64>().sqrt();
        if j > t - k {
            let (h_prev, c_prev): (&[f64], &[f64]) = if j == 0 {
                (&zeros, &zeros)
            } else {
                (&steps[j - 1].h, &steps[j - 1].c)
            };
            cell_backward(p, &steps[j], h_prev, c_prev, &mut s, None);
        }
    }
    Ok(norms)
}

/// Magnitude of the rule-span error gradient backpropagated through time.
///
/// `E` is the summed cross-entropy of predicting `seq[t-k+1]..=seq[t]`, i.e.
/// the span's own tokens through the close symbol, each from the preceding
/// state. For each offset `d` in `1..=k` the result holds ‖∂E/∂h at the
/// state after consuming `seq[t-k+d-1]`‖₂ — the same states as
/// [`grad_probe`], but with every prediction error in the span
/// contributing, so an unpredictable span shows up as large gradient mass
/// at its states.
pub fn span_grad_probe(
    p: &LstmParams,
    seq: &[u32],
    t: usize,
    k: usize,
) -> Result<Vec<f64>, LmError> {
    if k == 0 || t < k || t >= seq.len() {
        return Err(LmError::ProbeOutOfRange {
            t,
            k,
            len: seq.len(),
        });
    }
    for &tok in &seq[..=t] {
        p.check_token(tok)?;
    }
    let dims = p.dims();
    let zeros = vec![0.0; dims.hidden];
    let mut steps: Vec<StepCache> = Vec::with_capacity(t);
    for (j, &tok) in seq[..t].iter().enumerate() {
        let mut cache = StepCache::zeros(dims.hidden);
        {
            let (h_prev, c_prev): (&[f64], &[f64]) = if j == 0 {
                (&zeros, &zeros)
            } else {
                (&steps[j - 1].h, &steps[j - 1].c)
            };
            cell_step(p, h_prev, c_prev, tok, &mut cache);
        }
        steps.push(cache);
    }

    let mut s = Scratch::new(dims);
    let mut dlogit = vec![0.0; dims.vocab];
    let mut norms = vec![0.0; k];
    for m in (t - k..t).rev() {
        // direct error of predicting seq[m+1] from the state at m
        logits_into(&mut dlogit, p, &steps[m].h);
        let max = dlogit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = dlogit.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
        for x in dlogit.iter_mut() {
            *x = (*x - lse).exp();
        }
        dlogit[seq[m + 1] as usize] -= 1.0;
        matvec_t_add(&mut s.dh, &p.w_out, &dlogit);

        let d = m - (t - k) + 1;
        norms[d - 1] = s.dh.iter().map(|x| x * x).sum::<f64>().sqrt();
        if m > t - k {
            let (h_prev, c_prev): (&[f64], &[f64]) = if m == 0 {
                (&zeros, &zeros)
            } else {
                (&steps[m - 1].h, &steps[m - 1].c)
            };
            cell_backward(p, &steps[m], h_prev, c_prev, &mut s, None);
        }
    }
    Ok(norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{init_params, mean_cross_entropy, run_sequence, Vocab};
    use crate::math::Rng;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1.0,
            clip_norm: 0.25,
            epochs: 40,
            bptt_len: 8,
            hidden_dim: 8,
            embed_dim: 4,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn memorizes_two_token_repeating_corpus() {
        let vocab = Vocab::new(vec!["a".into(), "b".into()]).unwrap();
        let corpus: Vec<u32> = (0..400).map(|i| 1 + (i % 2) as u32).collect();
        let cks = train(&corpus, &vocab, &tiny_cfg()).unwrap();
        let p = &cks.last().unwrap().params;
        let ce = mean_cross_entropy(p, &corpus).unwrap();
        assert!(ce < 0.01, "cross-entropy {ce} not < 0.01 nats");
    }

    #[test]
    fn training_is_bit_deterministic() {
        let vocab = Vocab::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let mut rng = Rng::from_seed(1);
        let corpus: Vec<u32> = (0..300).map(|_| 1 + rng.below(3) as u32).collect();
        let mut cfg = tiny_cfg();
        cfg.epochs = 3;
        let a = train(&corpus, &vocab, &cfg).unwrap();
        let b = train(&corpus, &vocab, &cfg).unwrap();
        let fa = a.last().unwrap().params.to_flat_vec();
        let fb = b.last().unwrap().params.to_flat_vec();
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(fb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(
            a.last().unwrap().metrics.train_loss.to_bits(),
            b.last().unwrap().metrics.train_loss.to_bits()
        );
    }

    #[test]
    fn corpus_too_short_rejected() {
        let vocab = Vocab::new(vec!["a".into()]).unwrap();
        let cfg = tiny_cfg();
        let corpus = vec![1u32; cfg.bptt_len]; // need bptt_len + 1
        assert!(matches!(
            train(&corpus, &vocab, &cfg),
            Err(LmError::CorpusTooShort { .. })
        ));
    }

    #[test]
    fn nonzero_momentum_rejected() {
        let vocab = Vocab::new(vec!["a".into()]).unwrap();
        let mut cfg = tiny_cfg();
        cfg.momentum = 0.9;
        assert!(matches!(
            train(&[1, 1, 1, 1, 1, 1, 1, 1, 1], &vocab, &cfg),
            Err(LmError::BadConfig(_))
        ));
    }

    #[test]
    fn diverging_run_reports_non_finite_loss() {
        let vocab = Vocab::new(vec!["a".into(), "b".into()]).unwrap();
        let mut rng = Rng::from_seed(2);
        let corpus: Vec<u32> = (0..200).map(|_| 1 + rng.below(2) as u32).collect();
        let mut cfg = tiny_cfg();
        cfg.learning_rate = 1e308;
        cfg.epochs = 3;
        match train(&corpus, &vocab, &cfg) {
            Err(LmError::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn clipping_caps_global_norm() {
        let dims = Dims {
            vocab: 6,
            embed: 3,
            hidden: 4,
        };
        let p = init_params(dims, 3).unwrap();
        let mut rng = Rng::from_seed(9);
        let seq: Vec<u32> = (0..12).map(|_| rng.below(6) as u32).collect();
        let state = LstmState::zeros(4);
        let (_, mut grads, _) = window_loss_and_grads(&p, &state, &seq[..11], &seq[1..]).unwrap();
        grads.scale(1e6); // force a big norm
        let clip = 0.25;
        grads.clip_global_norm(clip);
        assert!(grads.global_norm() <= clip + 1e-12);
        // a norm already below the clip is untouched
        let before = grads.to_flat_vec();
        grads.clip_global_norm(10.0);
        assert_eq!(before, grads.to_flat_vec());
    }

    fn fd_gradcheck(seed: u64) -> (f64, f64) {
        let mut rng = Rng::from_seed(seed);
        let dims = Dims {
            vocab: 2 + rng.below(5),
            embed: 1 + rng.below(3),
            hidden: 1 + rng.below(4),
        };
        let p = init_params(dims, seed.wrapping_mul(31).wrapping_add(1)).unwrap();
        let len = 3 + rng.below(8);
        let seq: Vec<u32> = (0..len + 1).map(|_| rng.below(dims.vocab) as u32).collect();
        let state = LstmState::zeros(dims.hidden);
        let inputs = &seq[..len];
        let targets = &seq[1..];

        let (_, grads, _) = window_loss_and_grads(&p, &state, inputs, targets).unwrap();
        let analytic = grads.to_flat_vec();

        let flat = p.to_flat_vec();
        let eps = 1e-5;
        let mut fd = vec![0.0; flat.len()];
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += eps;
            let pp = LstmParams::from_flat_vec(dims, &plus).unwrap();
            let (lp, _, _) = window_loss_and_grads(&pp, &state, inputs, targets).unwrap();
            let mut minus = flat.clone();
            minus[i] -= eps;
            let pm = LstmParams::from_flat_vec(dims, &minus).unwrap();
            let (lm, _, _) = window_loss_and_grads(&pm, &state, inputs, targets).unwrap();
            fd[i] = (lp - lm) / (2.0 * eps);
        }
        let diff: f64 = analytic
            .iter()
            .zip(fd.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
        (diff, norm)
    }

    #[test]
    fn bptt_gradients_match_finite_differences() {
        for seed in 0..10 {
            let (diff, norm) = fd_gradcheck(seed);
            assert!(
                diff <= 1e-4 * norm.max(1e-12),
                "seed {seed}: ||analytic-fd|| = {diff}, ||fd|| = {norm}"
            );
        }
    }

    #[test]
    fn grad_probe_zero_recurrence_gives_zero_below_top_offset() {
        let dims = Dims {
            vocab: 5,
            embed: 3,
            hidden: 4,
        };
        let mut p = init_params(dims, 17).unwrap();
        for m in [&mut p.v_i, &mut p.v_f, &mut p.v_o, &mut p.v_g] {
            m.as_mut_slice().fill(0.0);
        }
        let seq = [1u32, 2, 3, 4, 0, 1, 2];
        let k = 4;
        let t = 5;
        let norms = grad_probe(&p, &seq, t, k).unwrap();
        assert_eq!(norms.len(), k);
        for d in 0..k - 1 {
            assert_eq!(norms[d], 0.0, "offset {} should be zero", d + 1);
        }
        assert!(norms[k - 1] > 0.0);
    }

    #[test]
    fn grad_probe_nonnegative_finite_on_random_models() {
        for seed in 0..5 {
            let dims = Dims {
                vocab: 6,
                embed: 3,
                hidden: 4,
            };
            let p = init_params(dims, seed).unwrap();
            let mut rng = Rng::from_seed(seed + 100);
            let seq: Vec<u32> = (0..10).map(|_| rng.below(6) as u32).collect();
            let norms = grad_probe(&p, &seq, 7, 5).unwrap();
            assert!(norms.iter().all(|&x| x.is_finite() && x >= 0.0));
        }
    }

    #[test]
    fn grad_probe_matches_finite_difference_state_perturbation() {
        let dims = Dims {
            vocab: 5,
            embed: 3,
            hidden: 3,
        };
        let p = init_params(dims, 23).unwrap();
        let seq = [2u32, 1, 4, 0, 3, 2, 1];
        let t = 5usize;
        let k = 3usize;
        let norms = grad_probe(&p, &seq, t, k).unwrap();

        // finite differences: perturb h at position j, rerun forward to t,
        // recompute e = -log softmax(logits)[seq[t]]
        let eps = 1e-6;
        let target = seq[t];
        for d in 1..=k {
            let j = t - k + d - 1; // state after consuming seq[j]
            let base = run_sequence(&p, &seq[..=j]).unwrap();
            let mut grad = vec![0.0; dims.hidden];
            for m in 0..dims.hidden {
                let mut run_from = |hm: f64| -> f64 {
                    let mut st = base.clone();
                    st.h[m] = hm;
                    for &tok in &seq[j + 1..t] {
                        let (s1, _) = crate::lm::forward_step(&p, &st, tok).unwrap();
                        st = s1;
                    }
                    let mut logits = vec![0.0; dims.vocab];
                    logits_into(&mut logits, &p, st.h.as_slice());
                    let ls = crate::math::log_softmax(&logits);
                    -ls[target as usize]
                };
                let lp = run_from(base.h[m] + eps);
                let lm = run_from(base.h[m] - eps);
                grad[m] = (lp - lm) / (2.0 * eps);
            }
            let fd_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                (norms[d - 1] - fd_norm).abs() <= 1e-4 * fd_norm.max(1e-12),
                "offset {d}: analytic {} vs fd {}",
                norms[d - 1],
                fd_norm
            );
        }
    }

    #[test]
    fn span_grad_probe_matches_finite_differences() {
        let dims = Dims {
            vocab: 5,
            embed: 3,
            hidden: 3,
        };
        let p = init_params(dims, 29).unwrap();
        let seq = [2u32, 1, 4, 0, 3, 2, 1];
        let t = 5usize;
        let k = 3usize;
        let norms = span_grad_probe(&p, &seq, t, k).unwrap();
        assert_eq!(norms.len(), k);

        // E(h_j) = sum of cross-entropies of seq[j+1..=t] re-evolved from a
        // perturbed state at j
        let eps = 1e-6;
        let energy_from = |j: usize, st: &LstmState| -> f64 {
            let mut st = st.clone();
            let mut total = 0.0;
            for m in j..t {
                let mut logits = vec![0.0; dims.vocab];
                logits_into(&mut logits, &p, st.h.as_slice());
                let ls = crate::math::log_softmax(&logits);
                total -= ls[seq[m + 1] as usize];
                if m + 1 < t {
                    let (s1, _) = crate::lm::forward_step(&p, &st, seq[m + 1]).unwrap();
                    st = s1;
                }
            }
            total
        };
        for d in 1..=k {
            let j = t - k + d - 1;
            let base = run_sequence(&p, &seq[..=j]).unwrap();
            let mut grad = vec![0.0; dims.hidden];
            for m in 0..dims.hidden {
                let mut plus = base.clone();
                plus.h[m] += eps;
                let mut minus = base.clone();
                minus.h[m] -= eps;
                grad[m] = (energy_from(j, &plus) - energy_from(j, &minus)) / (2.0 * eps);
            }
            let fd_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                (norms[d - 1] - fd_norm).abs() <= 1e-4 * fd_norm.max(1e-12),
                "offset {d}: analytic {} vs fd {}",
                norms[d - 1],
                fd_norm
            );
        }
    }

    #[test]
    fn span_grad_probe_nonnegative_and_validated() {
        let dims = Dims {
            vocab: 6,
            embed: 3,
            hidden: 4,
        };
        let p = init_params(dims, 31).unwrap();
        let seq = [1u32, 2, 3, 4, 0, 1, 2, 3];
        let norms = span_grad_probe(&p, &seq, 6, 4).unwrap();
        assert_eq!(norms.len(), 4);
        assert!(norms.iter().all(|&x| x.is_finite() && x >= 0.0));
        assert!(span_grad_probe(&p, &seq, 2, 3).is_err());
        assert!(span_grad_probe(&p, &seq, 8, 2).is_err());
    }

    #[test]
    fn grad_probe_range_validation() {
        let dims = Dims {
            vocab: 4,
            embed: 2,
            hidden: 2,
        };
        let p = init_params(dims, 1).unwrap();
        let seq = [1u32, 2, 3, 0, 1];
        assert!(grad_probe(&p, &seq, 2, 3).is_err()); // t < k
        assert!(grad_probe(&p, &seq, 5, 2).is_err()); // t >= len
        assert!(grad_probe(&p, &seq, 3, 0).is_err()); // k == 0
    }
}
