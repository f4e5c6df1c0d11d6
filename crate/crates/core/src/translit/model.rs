//! Character encoder-decoder with bilinear attention under a monotonic mask.
//!
//! Encoder: input embeddings feed a forward and a backward GRU; the two
//! state sequences are concatenated into encoder outputs of width
//! `2 * encoder_hidden_per_direction == decoder_hidden`. The decoder starts
//! from `[last forward state; first backward state]`.
//!
//! Decoder step `t`, input symbol `y[t-1]` (BOS at `t = 0`):
//!
//! ```text
//! s_t     = GRU(embed(y[t-1]), s_{t-1})
//! score_i = s_tᵀ · attn · enc_i            for i >= floor_t, masked otherwise
//! α_t     = softmax(score)                 masked entries are exactly 0
//! ctx_t   = Σ α_ti · enc_i
//! h_t     = tanh(combine · [ctx_t; s_t] + combine_b)
//! p_t     = softmax(out · h_t + out_b)
//! ```
//!
//! `floor_0 = 0` and `floor_t = argmax α_{t-1}`: the decoder can re-attend
//! the previously attended position but nothing to its left.
//!
//! GRU gates follow the common `r, z, n` layout with separate input and
//! hidden biases:
//!
//! ```text
//! r = σ(W_r x + b_r + U_r h + c_r)
//! z = σ(W_z x + b_z + U_z h + c_z)
//! n = tanh(W_n x + b_n + r ⊙ (U_n h + c_n))
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;

use super::tensor::{add_assign, axpy, dot, log_softmax, sigmoid, Matrix};
use super::vocab::{Vocab, BOS, EOS};
use super::TranslitConfig;

/// Weights of one GRU layer; gate blocks are stacked `r, z, n` row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b_x: Matrix,
    pub b_h: Matrix,
}

impl GruParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w_x: Matrix::zeros(3 * hidden, input),
            w_h: Matrix::zeros(3 * hidden, hidden),
            b_x: Matrix::zeros(3 * hidden, 1),
            b_h: Matrix::zeros(3 * hidden, 1),
        }
    }

    fn hidden(&self) -> usize {
        self.w_h.cols()
    }
}

/// All trainable tensors. Also used, zero-initialized, as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub src_embed: Matrix,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    pub tgt_embed: Matrix,
    pub dec: GruParams,
    pub attn: Matrix,
    pub combine_w: Matrix,
    pub combine_b: Matrix,
    pub out_w: Matrix,
    pub out_b: Matrix,
}

pub const TENSOR_COUNT: usize = 19;

impl Params {
    pub fn zeros(input_vocab: usize, output_vocab: usize, config: &TranslitConfig) -> Self {
        let e = config.embedding_dim;
        let h = config.encoder_hidden_per_direction;
        let d = config.decoder_hidden;
        Params {
            src_embed: Matrix::zeros(input_vocab, e),
            enc_fwd: GruParams::zeros(e, h),
            enc_bwd: GruParams::zeros(e, h),
            tgt_embed: Matrix::zeros(output_vocab, e),
            dec: GruParams::zeros(e, d),
            attn: Matrix::zeros(d, 2 * h),
            combine_w: Matrix::zeros(d, 2 * h + d),
            combine_b: Matrix::zeros(d, 1),
            out_w: Matrix::zeros(output_vocab, d),
            out_b: Matrix::zeros(output_vocab, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.as_mut_slice().fill(value);
        }
    }

    /// Named tensors in serialization order.
    pub fn tensors(&self) -> [(&'static str, &Matrix); TENSOR_COUNT] {
        [
            ("src_embed", &self.src_embed),
            ("enc_fwd.w_x", &self.enc_fwd.w_x),
            ("enc_fwd.w_h", &self.enc_fwd.w_h),
            ("enc_fwd.b_x", &self.enc_fwd.b_x),
            ("enc_fwd.b_h", &self.enc_fwd.b_h),
            ("enc_bwd.w_x", &self.enc_bwd.w_x),
            ("enc_bwd.w_h", &self.enc_bwd.w_h),
            ("enc_bwd.b_x", &self.enc_bwd.b_x),
            ("enc_bwd.b_h", &self.enc_bwd.b_h),
            ("tgt_embed", &self.tgt_embed),
            ("dec.w_x", &self.dec.w_x),
            ("dec.w_h", &self.dec.w_h),
            ("dec.b_x", &self.dec.b_x),
            ("dec.b_h", &self.dec.b_h),
            ("attn", &self.attn),
            ("combine_w", &self.combine_w),
            ("combine_b", &self.combine_b),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); TENSOR_COUNT] {
        [
            ("src_embed", &mut self.src_embed),
            ("enc_fwd.w_x", &mut self.enc_fwd.w_x),
            ("enc_fwd.w_h", &mut self.enc_fwd.w_h),
            ("enc_fwd.b_x", &mut self.enc_fwd.b_x),
            ("enc_fwd.b_h", &mut self.enc_fwd.b_h),
            ("enc_bwd.w_x", &mut self.enc_bwd.w_x),
            ("enc_bwd.w_h", &mut self.enc_bwd.w_h),
            ("enc_bwd.b_x", &mut self.enc_bwd.b_x),
            ("enc_bwd.b_h", &mut self.enc_bwd.b_h),
            ("tgt_embed", &mut self.tgt_embed),
            ("dec.w_x", &mut self.dec.w_x),
            ("dec.w_h", &mut self.dec.w_h),
            ("dec.b_x", &mut self.dec.b_x),
            ("dec.b_h", &mut self.dec.b_h),
            ("attn", &mut self.attn),
            ("combine_w", &mut self.combine_w),
            ("combine_b", &mut self.combine_b),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }

    /// Number of scalars across all tensors.
    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.as_slice().iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.as_slice())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(alpha, src.as_slice(), dst.as_mut_slice());
        }
    }
}

/// Closed-form parameter count for vocabulary sizes `vi`/`vo` (reserved
/// symbols included):
///
/// ```text
///   vi·e                        input embedding
/// + 2·(3h·e + 3h·h + 6h)        forward and backward encoder GRUs
/// + vo·e                        decoder input embedding
/// + 3d·e + 3d·d + 6d            decoder GRU
/// + d·2h                        attention
/// + d·(2h + d) + d              combination layer
/// + vo·d + vo                   output projection
/// ```
pub fn parameter_count(vi: usize, vo: usize, config: &TranslitConfig) -> usize {
    let e = config.embedding_dim;
    let h = config.encoder_hidden_per_direction;
    let d = config.decoder_hidden;
    vi * e
        + 2 * (3 * h * e + 3 * h * h + 6 * h)
        + vo * e
        + (3 * d * e + 3 * d * d + 6 * d)
        + d * 2 * h
        + d * (2 * h + d)
        + d
        + vo * d
        + vo
}

struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    // U_n h + c_n, needed for the reset-gate gradient
    hn: Vec<f64>,
    h: Vec<f64>,
}

fn gru_forward(p: &GruParams, x: &[f64], h_prev: &[f64]) -> GruStep {
    let hd = p.hidden();
    let mut gx = p.w_x.matvec(x);
    add_assign(&mut gx, p.b_x.as_slice());
    let mut gh = p.w_h.matvec(h_prev);
    add_assign(&mut gh, p.b_h.as_slice());
    let r: Vec<f64> = (0..hd).map(|k| sigmoid(gx[k] + gh[k])).collect();
    let z: Vec<f64> = (0..hd).map(|k| sigmoid(gx[hd + k] + gh[hd + k])).collect();
    let hn = gh[2 * hd..].to_vec();
    let n: Vec<f64> = (0..hd).map(|k| (gx[2 * hd + k] + r[k] * hn[k]).tanh()).collect();
    let h = (0..hd)
        .map(|k| (1.0 - z[k]) * n[k] + z[k] * h_prev[k])
        .collect();
    GruStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        r,
        z,
        n,
        hn,
        h,
    }
}

/// Backpropagate `dh` through one step. Accumulates into `grads` and `dx`,
/// returns the gradient with respect to the previous state.
fn gru_backward(
    p: &GruParams,
    step: &GruStep,
    dh: &[f64],
    grads: &mut GruParams,
    dx: &mut [f64],
) -> Vec<f64> {
    let hd = p.hidden();
    let mut dgx = vec![0.0; 3 * hd];
    let mut dgh = vec![0.0; 3 * hd];
    let mut dh_prev = vec![0.0; hd];
    for k in 0..hd {
        let (r, z, n) = (step.r[k], step.z[k], step.n[k]);
        let dn_pre = dh[k] * (1.0 - z) * (1.0 - n * n);
        let dz_pre = dh[k] * (step.h_prev[k] - n) * z * (1.0 - z);
        let dr_pre = dn_pre * step.hn[k] * r * (1.0 - r);
        dh_prev[k] = dh[k] * z;
        dgx[k] = dr_pre;
        dgx[hd + k] = dz_pre;
        dgx[2 * hd + k] = dn_pre;
        dgh[k] = dr_pre;
        dgh[hd + k] = dz_pre;
        dgh[2 * hd + k] = dn_pre * r;
    }
    grads.w_x.outer_add(&dgx, &step.x);
    add_assign(grads.b_x.as_mut_slice(), &dgx);
    p.w_x.matvec_t_add(&dgx, dx);
    grads.w_h.outer_add(&dgh, &step.h_prev);
    add_assign(grads.b_h.as_mut_slice(), &dgh);
    p.w_h.matvec_t_add(&dgh, &mut dh_prev);
    dh_prev
}

/// Attention over encoder positions at one decode step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStep {
    /// One weight per encoder position; positions left of `floor` are 0.
    pub weights: Vec<f64>,
    /// First attendable position.
    pub floor: usize,
    /// Most attended position (lowest index on ties).
    pub argmax: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionTrace {
    pub steps: Vec<AttentionStep>,
}

impl AttentionTrace {
    pub fn argmax_path(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.argmax).collect()
    }
}

/// Deliberate gradient corruption, used to check that the gradient checker
/// catches a broken backward pass.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientFault {
    #[default]
    None,
    /// Drop the gradient flowing through the attention scores.
    DropAttentionScores,
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Summed negative log-likelihood of the output symbols, EOS included.
    pub loss: f64,
    pub trace: AttentionTrace,
}

struct DecodeStep {
    input: usize,
    target: usize,
    embed_mask: Option<Vec<f64>>,
    gru: GruStep,
    step: AttentionStep,
    ctx_state: Vec<f64>,
    hidden: Vec<f64>,
    hidden_mask: Option<Vec<f64>>,
    probs: Vec<f64>,
}

fn dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
}

/// Run the model on one `(input ids, output ids)` pair.
///
/// `input` excludes the terminating EOS, which is appended here; `output`
/// likewise. Dropout is applied when `dropout_rng` is given. When `grads` is
/// given the gradient of the loss is accumulated into it.
pub(crate) fn run(
    params: &Params,
    config: &TranslitConfig,
    input: &[usize],
    output: &[usize],
    mut dropout_rng: Option<&mut dyn rand::RngCore>,
    grads: Option<&mut Params>,
    fault: GradientFault,
) -> ForwardOutput {
    let h = config.encoder_hidden_per_direction;
    let d = config.decoder_hidden;
    let e = config.embedding_dim;
    let p_drop = config.dropout;
    let mut mask = |len: usize| -> Option<Vec<f64>> {
        match dropout_rng.as_mut() {
            Some(rng) if p_drop > 0.0 => Some(dropout_mask(len, p_drop, rng)),
            _ => None,
        }
    };

    let src: Vec<usize> = input.iter().copied().chain([EOS]).collect();
    let src_len = src.len();

    // encoder
    let src_masks: Vec<Option<Vec<f64>>> = (0..src_len).map(|_| mask(e)).collect();
    let embedded: Vec<Vec<f64>> = src
        .iter()
        .zip(&src_masks)
        .map(|(&id, m)| {
            let mut x = params.src_embed.row(id).to_vec();
            apply_mask(&mut x, m);
            x
        })
        .collect();
    let mut fwd_steps = Vec::with_capacity(src_len);
    let mut state = vec![0.0; h];
    for x in &embedded {
        let step = gru_forward(&params.enc_fwd, x, &state);
        state = step.h.clone();
        fwd_steps.push(step);
    }
    let mut bwd_steps: Vec<Option<GruStep>> = (0..src_len).map(|_| None).collect();
    let mut state = vec![0.0; h];
    for i in (0..src_len).rev() {
        let step = gru_forward(&params.enc_bwd, &embedded[i], &state);
        state = step.h.clone();
        bwd_steps[i] = Some(step);
    }
    let bwd_steps: Vec<GruStep> = bwd_steps.into_iter().map(Option::unwrap).collect();
    let enc: Vec<Vec<f64>> = (0..src_len)
        .map(|i| [fwd_steps[i].h.as_slice(), bwd_steps[i].h.as_slice()].concat())
        .collect();
    let keys: Vec<Vec<f64>> = enc.iter().map(|v| params.attn.matvec(v)).collect();

    // decoder
    let dec_inputs: Vec<usize> = [BOS].into_iter().chain(output.iter().copied()).collect();
    let dec_targets: Vec<usize> = output.iter().copied().chain([EOS]).collect();
    let mut s = [fwd_steps[src_len - 1].h.as_slice(), bwd_steps[0].h.as_slice()].concat();
    let mut floor = 0;
    let mut loss = 0.0;
    let mut steps: Vec<DecodeStep> = Vec::with_capacity(dec_targets.len());
    for (&input, &target) in dec_inputs.iter().zip(&dec_targets) {
        let embed_mask = mask(e);
        let mut x = params.tgt_embed.row(input).to_vec();
        apply_mask(&mut x, &embed_mask);
        let gru = gru_forward(&params.dec, &x, &s);
        s = gru.h.clone();

        let mut weights = vec![0.0; src_len];
        let scores: Vec<f64> = keys[floor..].iter().map(|k| dot(&s, k)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (w, ex) in weights[floor..].iter_mut().zip(&exps) {
            *w = ex / total;
        }
        let argmax = (floor..src_len)
            .fold(floor, |best, i| if weights[i] > weights[best] { i } else { best });

        let mut ctx_state = vec![0.0; 2 * h + d];
        for (w, v) in weights.iter().zip(&enc).skip(floor) {
            axpy(*w, v, &mut ctx_state[..2 * h]);
        }
        ctx_state[2 * h..].copy_from_slice(&s);
        let mut hidden = params.combine_w.matvec(&ctx_state);
        add_assign(&mut hidden, params.combine_b.as_slice());
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        let hidden_mask = mask(d);
        let mut dropped = hidden.clone();
        apply_mask(&mut dropped, &hidden_mask);
        let mut logits = params.out_w.matvec(&dropped);
        add_assign(&mut logits, params.out_b.as_slice());
        let log_probs = log_softmax(&logits);
        loss -= log_probs[target];

        steps.push(DecodeStep {
            input,
            target,
            embed_mask,
            gru,
            step: AttentionStep {
                weights,
                floor,
                argmax,
            },
            ctx_state,
            hidden,
            hidden_mask,
            probs: log_probs.iter().map(|l| l.exp()).collect(),
        });
        floor = argmax;
    }

    if let Some(grads) = grads {
        backward(
            params, config, &src, &src_masks, &fwd_steps, &bwd_steps, &enc, &keys, &steps, grads,
            fault,
        );
    }

    ForwardOutput {
        loss,
        trace: AttentionTrace {
            steps: steps.into_iter().map(|s| s.step).collect(),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn backward(
    params: &Params,
    config: &TranslitConfig,
    src: &[usize],
    src_masks: &[Option<Vec<f64>>],
    fwd_steps: &[GruStep],
    bwd_steps: &[GruStep],
    enc: &[Vec<f64>],
    keys: &[Vec<f64>],
    steps: &[DecodeStep],
    grads: &mut Params,
    fault: GradientFault,
) {
    let h = config.encoder_hidden_per_direction;
    let d = config.decoder_hidden;
    let e = config.embedding_dim;
    let src_len = src.len();
    let mut d_enc = vec![vec![0.0; 2 * h]; src_len];
    let mut d_keys = vec![vec![0.0; d]; src_len];
    let mut ds_next = vec![0.0; d];

    for st in steps.iter().rev() {
        let mut dlogits = st.probs.clone();
        dlogits[st.target] -= 1.0;
        let mut dropped = st.hidden.clone();
        apply_mask(&mut dropped, &st.hidden_mask);
        grads.out_w.outer_add(&dlogits, &dropped);
        add_assign(grads.out_b.as_mut_slice(), &dlogits);
        let mut dhidden = vec![0.0; d];
        params.out_w.matvec_t_add(&dlogits, &mut dhidden);
        apply_mask(&mut dhidden, &st.hidden_mask);
        let dpre: Vec<f64> = dhidden
            .iter()
            .zip(&st.hidden)
            .map(|(g, v)| g * (1.0 - v * v))
            .collect();
        grads.combine_w.outer_add(&dpre, &st.ctx_state);
        add_assign(grads.combine_b.as_mut_slice(), &dpre);
        let mut dcat = vec![0.0; 2 * h + d];
        params.combine_w.matvec_t_add(&dpre, &mut dcat);
        let (dctx, ds_direct) = dcat.split_at(2 * h);
        let mut ds = ds_direct.to_vec();
        add_assign(&mut ds, &ds_next);

        let s = &st.gru.h;
        let w = &st.step.weights;
        let dw: Vec<f64> = enc.iter().map(|v| dot(dctx, v)).collect();
        let mean: f64 = (st.step.floor..src_len).map(|i| w[i] * dw[i]).sum();
        for i in st.step.floor..src_len {
            axpy(w[i], dctx, &mut d_enc[i]);
            if fault == GradientFault::DropAttentionScores {
                continue;
            }
            let dscore = w[i] * (dw[i] - mean);
            axpy(dscore, &keys[i], &mut ds);
            axpy(dscore, s, &mut d_keys[i]);
        }

        let mut dx = vec![0.0; e];
        ds_next = gru_backward(&params.dec, &st.gru, &ds, &mut grads.dec, &mut dx);
        apply_mask(&mut dx, &st.embed_mask);
        add_assign(grads.tgt_embed.row_mut(st.input), &dx);
    }

    for i in 0..src_len {
        grads.attn.outer_add(&d_keys[i], &enc[i]);
        params.attn.matvec_t_add(&d_keys[i], &mut d_enc[i]);
    }

    let mut d_embed = vec![vec![0.0; e]; src_len];
    // decoder initial state = [last forward; first backward]
    let mut dh = ds_next[..h].to_vec();
    for i in (0..src_len).rev() {
        add_assign(&mut dh, &d_enc[i][..h]);
        dh = gru_backward(&params.enc_fwd, &fwd_steps[i], &dh, &mut grads.enc_fwd, &mut d_embed[i]);
    }
    let mut dh = ds_next[h..].to_vec();
    for i in 0..src_len {
        add_assign(&mut dh, &d_enc[i][h..]);
        dh = gru_backward(&params.enc_bwd, &bwd_steps[i], &dh, &mut grads.enc_bwd, &mut d_embed[i]);
    }
    for ((&id, m), mut g) in src.iter().zip(src_masks).zip(d_embed) {
        apply_mask(&mut g, m);
        add_assign(grads.src_embed.row_mut(id), &g);
    }
}

/// Encoded `(input, output)` ids for a string pair.
pub(crate) fn encode_pair(
    input_vocab: &Vocab,
    output_vocab: &Vocab,
    input: &str,
    output: &str,
) -> (Vec<usize>, Vec<usize>) {
    (input_vocab.encode(input), output_vocab.encode(output))
}
