//! Contextual decomposition of LSTM predictions.
//!
//! A run designates a set of input positions as "in focus" and splits every
//! hidden/cell vector into a relevant part (contribution of the focus set)
//! and an irrelevant part (everything else, including all focus/non-focus
//! interactions). Gate nonlinearities are linearized with a three-player
//! scheme: the bias is a conditioning baseline whose contribution is
//! `act(bias)`, and the remaining two players (relevant and irrelevant
//! preactivations) share the rest by a two-player Shapley average. The three
//! contributions sum to the undecomposed activation exactly, so the final
//! logit reconstruction error stays at float-roundoff level.
//!
//! In the multiplicative cell and output updates, bias shares pair with
//! relevant content into the relevant part (so relevant memory persists
//! through the forget gate across out-of-focus steps), while every cross
//! term between relevant and irrelevant content is irrelevant; see
//! [`decompose_step`].

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::lm::{logits_into, run_sequence, LmError, LstmParams};
use crate::math::{matvec_into, sigmoid, softmax, tanh_act, Vec64};

#[derive(Debug, Error)]
pub enum CdError {
    #[error("focus index {index} out of range for sequence of {len} tokens")]
    FocusOutOfRange { index: usize, len: usize },
    #[error("evaluation timestep {at} out of range for sequence of {len} tokens")]
    AtOutOfRange { at: usize, len: usize },
    #[error("target id {id} out of range for vocabulary of {vocab} entries")]
    TargetOutOfRange { id: u32, vocab: usize },
    #[error("span alpha_pos={alpha_pos} plus k={k} does not fit in sequence of {len} tokens")]
    SpanOutOfRange {
        alpha_pos: usize,
        k: usize,
        len: usize,
    },
    #[error("k must be >= 1")]
    ZeroK,
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Gate nonlinearity selector for [`lin3`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh_act(x),
        }
    }
}

/// Three-player linearization of `act(rel + irr + bias)`.
///
/// Returns `(rel_c, irr_c, bias_c)` with `bias_c = act(bias)` and the
/// relevant/irrelevant shares given by the two-player Shapley average
/// conditioned on the bias being present. The three contributions telescope
/// to `act(rel + irr + bias)` exactly.
pub fn lin3(act: Activation, rel: f64, irr: f64, bias: f64) -> (f64, f64, f64) {
    let bias_c = act.eval(bias);
    let total = act.eval(rel + irr + bias);
    let rel_alone = act.eval(rel + bias);
    let irr_alone = act.eval(irr + bias);
    let rel_c = 0.5 * ((rel_alone - bias_c) + (total - irr_alone));
    let irr_c = 0.5 * ((irr_alone - bias_c) + (total - rel_alone));
    (rel_c, irr_c, bias_c)
}

/// Set of 0-based timestep indices in focus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FocusSet(BTreeSet<usize>);

impl FocusSet {
    pub fn empty() -> Self {
        FocusSet(BTreeSet::new())
    }

    pub fn single(i: usize) -> Self {
        FocusSet(BTreeSet::from([i]))
    }

    /// Inclusive range of positions.
    pub fn span(start: usize, end: usize) -> Self {
        FocusSet((start..=end).collect())
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn insert(&mut self, i: usize) {
        self.0.insert(i);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.iter().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Positions `0..len` not in this set.
    pub fn complement(&self, len: usize) -> FocusSet {
        FocusSet((0..len).filter(|i| !self.contains(*i)).collect())
    }

    pub fn intersects(&self, other: &FocusSet) -> bool {
        self.0.intersection(&other.0).next().is_some()
    }

    pub fn union(&self, other: &FocusSet) -> FocusSet {
        FocusSet(self.0.union(&other.0).copied().collect())
    }
}

impl FromIterator<usize> for FocusSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        FocusSet(iter.into_iter().collect())
    }
}

/// Paired relevant/irrelevant hidden and cell vectors.
///
/// Invariant: `h_rel + h_irr` (and `c_rel + c_irr`) track the undecomposed
/// forward pass to float roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompState {
    pub h_rel: Vec64,
    pub h_irr: Vec64,
    pub c_rel: Vec64,
    pub c_irr: Vec64,
}

impl DecompState {
    pub fn zeros(hidden: usize) -> Self {
        DecompState {
            h_rel: Vec64::zeros(hidden),
            h_irr: Vec64::zeros(hidden),
            c_rel: Vec64::zeros(hidden),
            c_irr: Vec64::zeros(hidden),
        }
    }
}

/// Relevant and irrelevant logits of a decomposition run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdOutput {
    pub v_rel: Vec64,
    pub v_irr: Vec64,
    /// Relative logit reconstruction error against the plain forward pass
    /// (absolute when the plain logits are exactly zero).
    pub approx_err: f64,
}

struct GateSplit {
    rel: Vec<f64>,
    irr: Vec<f64>,
    bias: Vec<f64>,
}

impl GateSplit {
    fn zeros(h: usize) -> Self {
        GateSplit {
            rel: vec![0.0; h],
            irr: vec![0.0; h],
            bias: vec![0.0; h],
        }
    }
}

/// Splits one gate into three parts: relevant player is `V h_rel` plus `W x`
/// when the token is in focus; irrelevant player is `V h_irr` plus `W x`
/// otherwise; the bias part is `act(bias)`.
fn decompose_gate(
    act: Activation,
    w: &crate::math::Mat64,
    v: &crate::math::Mat64,
    b: &Vec64,
    x: &[f64],
    ds: &DecompState,
    in_focus: bool,
    rel_pre: &mut [f64],
    irr_pre: &mut [f64],
    wx: &mut [f64],
    out: &mut GateSplit,
) {
    matvec_into(rel_pre, v, ds.h_rel.as_slice());
    matvec_into(irr_pre, v, ds.h_irr.as_slice());
    matvec_into(wx, w, x);
    let wx_target: &mut [f64] = if in_focus { rel_pre } else { irr_pre };
    for (t, a) in wx_target.iter_mut().zip(wx.iter()) {
        *t += a;
    }
    for j in 0..out.rel.len() {
        let (rel_c, irr_c, bias_c) = lin3(act, rel_pre[j], irr_pre[j], b[j]);
        out.rel[j] = rel_c;
        out.irr[j] = irr_c;
        out.bias[j] = bias_c;
    }
}

/// Advances a decomposed state by one token.
///
/// Products of decomposed factors are allocated so that cross terms between
/// genuinely relevant and genuinely irrelevant content always land in the
/// irrelevant part, while products of a bias share with relevant content stay
/// relevant (a bias supports whatever content is present, so relevant memory
/// survives the forget gate through out-of-focus steps). The pure bias×bias
/// product in `i ⊙ g̃` joins the side the current token belongs to. The
/// partition is exhaustive, so `rel + irr` tracks the plain forward pass to
/// float roundoff.
pub fn decompose_step(
    p: &LstmParams,
    ds: &DecompState,
    tok: u32,
    in_focus: bool,
) -> Result<DecompState, CdError> {
    let dims = p.dims();
    if tok as usize >= dims.vocab {
        return Err(CdError::Lm(LmError::TokenOutOfRange {
            id: tok,
            vocab: dims.vocab,
        }));
    }
    if ds.h_rel.len() != dims.hidden {
        return Err(CdError::Lm(LmError::StateDimMismatch {
            expected: dims.hidden,
            got: ds.h_rel.len(),
        }));
    }
    let h = dims.hidden;
    let x = p.embed.row(tok as usize);
    let mut rel_pre = vec![0.0; h];
    let mut irr_pre = vec![0.0; h];
    let mut wx = vec![0.0; h];
    let mut gi = GateSplit::zeros(h);
    let mut gf = GateSplit::zeros(h);
    let mut go = GateSplit::zeros(h);
    let mut gg = GateSplit::zeros(h);
    decompose_gate(Activation::Sigmoid, &p.w_i, &p.v_i, &p.b_i, x, ds, in_focus, &mut rel_pre, &mut irr_pre, &mut wx, &mut gi);
    decompose_gate(Activation::Sigmoid, &p.w_f, &p.v_f, &p.b_f, x, ds, in_focus, &mut rel_pre, &mut irr_pre, &mut wx, &mut gf);
    decompose_gate(Activation::Sigmoid, &p.w_o, &p.v_o, &p.b_o, x, ds, in_focus, &mut rel_pre, &mut irr_pre, &mut wx, &mut go);
    decompose_gate(Activation::Tanh, &p.w_g, &p.v_g, &p.b_g, x, ds, in_focus, &mut rel_pre, &mut irr_pre, &mut wx, &mut gg);

    let mut next = DecompState::zeros(h);
    for j in 0..h {
        // c = f ⊙ c_prev + i ⊙ g̃, expanded over (rel, irr, bias) factors
        let (fr, fi, fb) = (gf.rel[j], gf.irr[j], gf.bias[j]);
        let (ir, ii, ib) = (gi.rel[j], gi.irr[j], gi.bias[j]);
        let (gr, gir, gb) = (gg.rel[j], gg.irr[j], gg.bias[j]);
        let bias_sq = ib * gb;
        let mut ig_rel = (ir + ib) * (gr + gb);
        let mut ig_irr = ii * (gr + gir + gb) + (ir + ib) * gir;
        if !in_focus {
            ig_rel -= bias_sq;
            ig_irr += bias_sq;
        }
        let c_rel = (fr + fb) * ds.c_rel[j] + ig_rel;
        let c_irr = fi * ds.c_rel[j] + (fr + fi + fb) * ds.c_irr[j] + ig_irr;
        next.c_rel[j] = c_rel;
        next.c_irr[j] = c_irr;
        // h = o ⊙ tanh(c), tanh split with a zero bias player
        let (t_rel, t_irr, _) = lin3(Activation::Tanh, c_rel, c_irr, 0.0);
        let (or_, oi, ob) = (go.rel[j], go.irr[j], go.bias[j]);
        next.h_rel[j] = (or_ + ob) * t_rel;
        next.h_irr[j] = oi * t_rel + (or_ + oi + ob) * t_irr;
    }
    Ok(next)
}

/// Runs the decomposition over `seq[..=at]` from the zero state.
///
/// `v_rel = W_out h_rel`; `v_irr = W_out h_irr + b_out` (the output bias is
/// assigned to the irrelevant part so `v_rel` reflects only word
/// contributions). `approx_err` is measured against the plain forward logits.
pub fn cd_run(
    p: &LstmParams,
    seq: &[u32],
    focus: &FocusSet,
    at: usize,
) -> Result<CdOutput, CdError> {
    if at >= seq.len() {
        return Err(CdError::AtOutOfRange { at, len: seq.len() });
    }
    if let Some(max) = focus.max() {
        if max >= seq.len() {
            return Err(CdError::FocusOutOfRange {
                index: max,
                len: seq.len(),
            });
        }
    }
    let dims = p.dims();
    let mut ds = DecompState::zeros(dims.hidden);
    for (t, &tok) in seq.iter().enumerate().take(at + 1) {
        ds = decompose_step(p, &ds, tok, focus.contains(t))?;
    }
    let mut v_rel = Vec64::zeros(dims.vocab);
    matvec_into(v_rel.as_mut_slice(), &p.w_out, ds.h_rel.as_slice());
    let mut v_irr = Vec64::zeros(dims.vocab);
    matvec_into(v_irr.as_mut_slice(), &p.w_out, ds.h_irr.as_slice());
    for (o, b) in v_irr.as_mut_slice().iter_mut().zip(p.b_out.iter()) {
        *o += b;
    }

    // plain forward pass as the reconstruction reference
    let state = run_sequence(p, &seq[..=at])?;
    let mut v = vec![0.0; dims.vocab];
    logits_into(&mut v, p, state.h.as_slice());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..dims.vocab {
        let r = v_rel[i] + v_irr[i] - v[i];
        num += r * r;
        den += v[i] * v[i];
    }
    let num = num.sqrt();
    let den = den.sqrt();
    let approx_err = if den > 0.0 { num / den } else { num };

    Ok(CdOutput {
        v_rel,
        v_irr,
        approx_err,
    })
}

/// Probability of `target` under the relevant logits alone.
pub fn cd_probability(out: &CdOutput, target: u32) -> Result<f64, CdError> {
    if target as usize >= out.v_rel.len() {
        return Err(CdError::TargetOutOfRange {
            id: target,
            vocab: out.v_rel.len(),
        });
    }
    let probs = softmax(&out.v_rel).expect("logits nonempty");
    Ok(probs[target as usize])
}

/// Incremental-prefix decomposition curve.
///
/// The close symbol sits at `alpha_pos + k`; for each `i` in `0..k` the curve
/// holds the CD probability of that symbol with focus
/// `{alpha_pos, …, alpha_pos + i}`, evaluated at the timestep preceding it.
/// `i = 0` isolates the open symbol alone; `i = k-1` covers the open symbol
/// plus the whole conduit.
pub fn prefix_curve(
    p: &LstmParams,
    seq: &[u32],
    alpha_pos: usize,
    k: usize,
) -> Result<Vec<f64>, CdError> {
    if k == 0 {
        return Err(CdError::ZeroK);
    }
    if alpha_pos + k >= seq.len() {
        return Err(CdError::SpanOutOfRange {
            alpha_pos,
            k,
            len: seq.len(),
        });
    }
    let target = seq[alpha_pos + k];
    let at = alpha_pos + k - 1;
    let mut curve = Vec::with_capacity(k);
    for i in 0..k {
        let focus = FocusSet::span(alpha_pos, alpha_pos + i);
        let out = cd_run(p, seq, &focus, at)?;
        curve.push(cd_probability(&out, target)?);
    }
    Ok(curve)
}
