//! Post-norm transformer encoder with a per-token classification head.
//!
//! ```text
//! ids -> token emb + position emb -> LayerNorm -> dropout
//!     -> [ x = LN(x + drop(MHA(x)));  x = LN(x + drop(W2 gelu(W1 x))) ] x n_layers
//!     -> head (d_model x 4)
//! ```
//!
//! Gradients are derived by hand. Each sequence in a batch is processed on its
//! own with padded keys masked out of attention, so a sequence's logits do not
//! depend on what else is in the batch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::TaggerConfig;
use super::data::Batch;
use super::math::{
    col_sum_acc, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, matmul_nt_acc,
    matmul_tn_acc, softmax_in_place, LnCache, Real,
};
use crate::error::{Error, Result};
use crate::text::PunctLabel;

pub const NUM_LABELS: usize = PunctLabel::COUNT;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    fn normal<R: Rng>(shape: &[usize], rng: &mut R) -> Self {
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        Tensor {
            shape: shape.to_vec(),
            data: (0..shape.iter().product::<usize>())
                .map(|_| F::lit(dist.sample(rng)))
                .collect(),
        }
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::lit(v.f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<F> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
}

impl<F: Real> LayerNormParams<F> {
    fn new(d: usize) -> Self {
        LayerNormParams {
            gamma: Tensor::filled(&[d], F::one()),
            beta: Tensor::zeros(&[d]),
        }
    }
}

/// Weights are stored `(in x out)`, applied as `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<F> {
    pub wq: Tensor<F>,
    pub bq: Tensor<F>,
    pub wk: Tensor<F>,
    pub bk: Tensor<F>,
    pub wv: Tensor<F>,
    pub bv: Tensor<F>,
    pub wo: Tensor<F>,
    pub bo: Tensor<F>,
    pub attn_ln: LayerNormParams<F>,
    pub w1: Tensor<F>,
    pub b1: Tensor<F>,
    pub w2: Tensor<F>,
    pub b2: Tensor<F>,
    pub ffn_ln: LayerNormParams<F>,
}

/// Layer blocks are ordered bottom (input side) to top.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel<F> {
    pub config: TaggerConfig,
    pub tok_emb: Tensor<F>,
    pub pos_emb: Tensor<F>,
    pub emb_ln: LayerNormParams<F>,
    pub layers: Vec<EncoderLayer<F>>,
    pub head_w: Tensor<F>,
    pub head_b: Tensor<F>,
}

macro_rules! named_tensors {
    ($model:expr, $($m:tt)*) => {{
        let model = $model;
        let mut v = Vec::with_capacity(6 + 16 * model.layers.len());
        v.push(("embeddings.token".to_string(), & $($m)* model.tok_emb));
        v.push(("embeddings.position".to_string(), & $($m)* model.pos_emb));
        v.push(("embeddings.ln.gamma".to_string(), & $($m)* model.emb_ln.gamma));
        v.push(("embeddings.ln.beta".to_string(), & $($m)* model.emb_ln.beta));
        for (i, l) in (& $($m)* model.layers).into_iter().enumerate() {
            let p = format!("layers.{i}");
            v.push((format!("{p}.attn.query.weight"), & $($m)* l.wq));
            v.push((format!("{p}.attn.query.bias"), & $($m)* l.bq));
            v.push((format!("{p}.attn.key.weight"), & $($m)* l.wk));
            v.push((format!("{p}.attn.key.bias"), & $($m)* l.bk));
            v.push((format!("{p}.attn.value.weight"), & $($m)* l.wv));
            v.push((format!("{p}.attn.value.bias"), & $($m)* l.bv));
            v.push((format!("{p}.attn.output.weight"), & $($m)* l.wo));
            v.push((format!("{p}.attn.output.bias"), & $($m)* l.bo));
            v.push((format!("{p}.attn.ln.gamma"), & $($m)* l.attn_ln.gamma));
            v.push((format!("{p}.attn.ln.beta"), & $($m)* l.attn_ln.beta));
            v.push((format!("{p}.ffn.inner.weight"), & $($m)* l.w1));
            v.push((format!("{p}.ffn.inner.bias"), & $($m)* l.b1));
            v.push((format!("{p}.ffn.outer.weight"), & $($m)* l.w2));
            v.push((format!("{p}.ffn.outer.bias"), & $($m)* l.b2));
            v.push((format!("{p}.ffn.ln.gamma"), & $($m)* l.ffn_ln.gamma));
            v.push((format!("{p}.ffn.ln.beta"), & $($m)* l.ffn_ln.beta));
        }
        v.push(("head.weight".to_string(), & $($m)* model.head_w));
        v.push(("head.bias".to_string(), & $($m)* model.head_b));
        v
    }};
}

impl<F: Real> EncoderLayer<F> {
    fn new<R: Rng>(c: &TaggerConfig, rng: &mut R) -> Self {
        let (d, ff) = (c.d_model, c.ffn_dim);
        EncoderLayer {
            wq: Tensor::normal(&[d, d], rng),
            bq: Tensor::zeros(&[d]),
            wk: Tensor::normal(&[d, d], rng),
            bk: Tensor::zeros(&[d]),
            wv: Tensor::normal(&[d, d], rng),
            bv: Tensor::zeros(&[d]),
            wo: Tensor::normal(&[d, d], rng),
            bo: Tensor::zeros(&[d]),
            attn_ln: LayerNormParams::new(d),
            w1: Tensor::normal(&[d, ff], rng),
            b1: Tensor::zeros(&[ff]),
            w2: Tensor::normal(&[ff, d], rng),
            b2: Tensor::zeros(&[d]),
            ffn_ln: LayerNormParams::new(d),
        }
    }
}

// Activations of one encoder layer for one sequence.
struct LayerTrace<F> {
    input: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    probs: Vec<F>,
    ctx: Vec<F>,
    drop_attn: Option<Vec<F>>,
    attn_ln: LnCache<F>,
    h1: Vec<F>,
    u: Vec<F>,
    g: Vec<F>,
    drop_ffn: Option<Vec<F>>,
    ffn_ln: LnCache<F>,
}

struct SeqTrace<F> {
    emb_ln: LnCache<F>,
    drop_emb: Option<Vec<F>>,
    layers: Vec<LayerTrace<F>>,
    output: Vec<F>,
}

fn apply_dropout<F: Real>(x: &mut [F], p: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<F>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = F::lit(1.0 / (1.0 - p));
    let mask: Vec<F> = (0..x.len())
        .map(|_| if rng.random::<f64>() < p { F::zero() } else { keep })
        .collect();
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= *m;
    }
    Some(mask)
}

fn mul_mask<F: Real>(x: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

impl<F: Real> EncoderLayer<F> {
    fn forward(
        &self,
        input: Vec<F>,
        mask: &[bool],
        c: &TaggerConfig,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<F>, LayerTrace<F>) {
        let (t, d, ff, nh, dh) = (mask.len(), c.d_model, c.ffn_dim, c.n_heads, c.head_dim());
        let q = linear(&input, &self.wq.data, &self.bq.data, t, d, d);
        let k = linear(&input, &self.wk.data, &self.bk.data, t, d, d);
        let v = linear(&input, &self.wv.data, &self.bv.data, t, d, d);
        let scale = F::lit(1.0 / (dh as f64).sqrt());
        let mut probs = vec![F::zero(); nh * t * t];
        let mut ctx = vec![F::zero(); t * d];
        let any_key = mask.iter().any(|&m| m);
        for h in 0..nh {
            let off = h * dh;
            for i in 0..t {
                let row = &mut probs[(h * t + i) * t..(h * t + i + 1) * t];
                if !any_key {
                    continue;
                }
                let qi = &q[i * d + off..i * d + off + dh];
                for j in 0..t {
                    row[j] = if mask[j] {
                        let kj = &k[j * d + off..j * d + off + dh];
                        qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<F>() * scale
                    } else {
                        F::neg_infinity()
                    };
                }
                softmax_in_place(row);
                let ci = &mut ctx[i * d + off..i * d + off + dh];
                for j in 0..t {
                    let p = row[j];
                    if p == F::zero() {
                        continue;
                    }
                    for (c, &vv) in ci.iter_mut().zip(&v[j * d + off..j * d + off + dh]) {
                        *c += p * vv;
                    }
                }
            }
        }
        let mut a = linear(&ctx, &self.wo.data, &self.bo.data, t, d, d);
        let drop_attn = apply_dropout(&mut a, c.dropout_prob, rng.as_deref_mut());
        for (x, &r) in a.iter_mut().zip(&input) {
            *x += r;
        }
        let (h1, attn_ln) = layer_norm(&a, &self.attn_ln.gamma.data, &self.attn_ln.beta.data, d);
        let u = linear(&h1, &self.w1.data, &self.b1.data, t, d, ff);
        let g: Vec<F> = u.iter().map(|&x| gelu(x)).collect();
        let mut f = linear(&g, &self.w2.data, &self.b2.data, t, ff, d);
        let drop_ffn = apply_dropout(&mut f, c.dropout_prob, rng);
        for (x, &r) in f.iter_mut().zip(&h1) {
            *x += r;
        }
        let (out, ffn_ln) = layer_norm(&f, &self.ffn_ln.gamma.data, &self.ffn_ln.beta.data, d);
        let trace = LayerTrace {
            input,
            q,
            k,
            v,
            probs,
            ctx,
            drop_attn,
            attn_ln,
            h1,
            u,
            g,
            drop_ffn,
            ffn_ln,
        };
        (out, trace)
    }

    /// Accumulates parameter gradients into `gr` and returns the input gradient.
    fn backward(
        &self,
        dout: &[F],
        tr: &LayerTrace<F>,
        c: &TaggerConfig,
        gr: &mut EncoderLayer<F>,
    ) -> Vec<F> {
        let (d, ff, nh, dh) = (c.d_model, c.ffn_dim, c.n_heads, c.head_dim());
        let t = dout.len() / d;

        let dr2 = layer_norm_backward(
            dout,
            &tr.ffn_ln,
            &self.ffn_ln.gamma.data,
            d,
            &mut gr.ffn_ln.gamma.data,
            &mut gr.ffn_ln.beta.data,
        );
        let mut dh1 = dr2.clone();
        let mut df = dr2;
        mul_mask(&mut df, &tr.drop_ffn);
        matmul_tn_acc(&tr.g, &df, t, ff, d, &mut gr.w2.data);
        col_sum_acc(&df, d, &mut gr.b2.data);
        let mut du = vec![F::zero(); t * ff];
        matmul_nt_acc(&df, &self.w2.data, t, d, ff, &mut du);
        for (x, &u) in du.iter_mut().zip(&tr.u) {
            *x *= gelu_grad(u);
        }
        matmul_tn_acc(&tr.h1, &du, t, d, ff, &mut gr.w1.data);
        col_sum_acc(&du, ff, &mut gr.b1.data);
        matmul_nt_acc(&du, &self.w1.data, t, ff, d, &mut dh1);

        let dr1 = layer_norm_backward(
            &dh1,
            &tr.attn_ln,
            &self.attn_ln.gamma.data,
            d,
            &mut gr.attn_ln.gamma.data,
            &mut gr.attn_ln.beta.data,
        );
        let mut dinput = dr1.clone();
        let mut da = dr1;
        mul_mask(&mut da, &tr.drop_attn);
        matmul_tn_acc(&tr.ctx, &da, t, d, d, &mut gr.wo.data);
        col_sum_acc(&da, d, &mut gr.bo.data);
        let mut dctx = vec![F::zero(); t * d];
        matmul_nt_acc(&da, &self.wo.data, t, d, d, &mut dctx);

        let scale = F::lit(1.0 / (dh as f64).sqrt());
        let mut dq = vec![F::zero(); t * d];
        let mut dk = vec![F::zero(); t * d];
        let mut dv = vec![F::zero(); t * d];
        let mut dp = vec![F::zero(); t];
        for h in 0..nh {
            let off = h * dh;
            for i in 0..t {
                let row = &tr.probs[(h * t + i) * t..(h * t + i + 1) * t];
                let dci = &dctx[i * d + off..i * d + off + dh];
                let mut s = F::zero();
                for j in 0..t {
                    let p = row[j];
                    if p == F::zero() {
                        dp[j] = F::zero();
                        continue;
                    }
                    let vj = &tr.v[j * d + off..j * d + off + dh];
                    dp[j] = dci.iter().zip(vj).map(|(&a, &b)| a * b).sum::<F>();
                    s += p * dp[j];
                    for (x, &g) in dv[j * d + off..j * d + off + dh].iter_mut().zip(dci) {
                        *x += p * g;
                    }
                }
                for j in 0..t {
                    let p = row[j];
                    if p == F::zero() {
                        continue;
                    }
                    let ds = p * (dp[j] - s) * scale;
                    for e in 0..dh {
                        dq[i * d + off + e] += ds * tr.k[j * d + off + e];
                        dk[j * d + off + e] += ds * tr.q[i * d + off + e];
                    }
                }
            }
        }
        for (dx, w, gw, gb) in [
            (&dq, &self.wq, &mut gr.wq, &mut gr.bq),
            (&dk, &self.wk, &mut gr.wk, &mut gr.bk),
            (&dv, &self.wv, &mut gr.wv, &mut gr.bv),
        ] {
            matmul_tn_acc(&tr.input, dx, t, d, d, &mut gw.data);
            col_sum_acc(dx, d, &mut gb.data);
            matmul_nt_acc(dx, &w.data, t, d, d, &mut dinput);
        }
        dinput
    }
}

impl<F: Real> TaggerModel<F> {
    /// Seeded initialization: normal(0, 0.02) weights and embeddings, zero
    /// biases, unit layer-norm scales.
    pub fn new(config: TaggerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, v, l) = (config.d_model, config.vocab_size, config.max_seq_len);
        let tok_emb = Tensor::normal(&[v, d], &mut rng);
        let pos_emb = Tensor::normal(&[l, d], &mut rng);
        let layers = (0..config.n_layers)
            .map(|_| EncoderLayer::new(&config, &mut rng))
            .collect();
        let head_w = Tensor::normal(&[d, NUM_LABELS], &mut rng);
        Ok(TaggerModel {
            tok_emb,
            pos_emb,
            emb_ln: LayerNormParams::new(d),
            layers,
            head_w,
            head_b: Tensor::zeros(&[NUM_LABELS]),
            config,
        })
    }

    /// Same shapes as `self`, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = F::zero());
        }
        z
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor<F>)> {
        named_tensors!(self,)
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        named_tensors!(self, mut)
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors()
            .iter()
            .all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<G: Real>(&self) -> TaggerModel<G> {
        let cast_ln = |ln: &LayerNormParams<F>| LayerNormParams {
            gamma: ln.gamma.cast(),
            beta: ln.beta.cast(),
        };
        TaggerModel {
            config: self.config.clone(),
            tok_emb: self.tok_emb.cast(),
            pos_emb: self.pos_emb.cast(),
            emb_ln: cast_ln(&self.emb_ln),
            layers: self
                .layers
                .iter()
                .map(|l| EncoderLayer {
                    wq: l.wq.cast(),
                    bq: l.bq.cast(),
                    wk: l.wk.cast(),
                    bk: l.bk.cast(),
                    wv: l.wv.cast(),
                    bv: l.bv.cast(),
                    wo: l.wo.cast(),
                    bo: l.bo.cast(),
                    attn_ln: cast_ln(&l.attn_ln),
                    w1: l.w1.cast(),
                    b1: l.b1.cast(),
                    w2: l.w2.cast(),
                    b2: l.b2.cast(),
                    ffn_ln: cast_ln(&l.ffn_ln),
                })
                .collect(),
            head_w: self.head_w.cast(),
            head_b: self.head_b.cast(),
        }
    }

    /// Zero head weights and bias: every position predicts uniformly.
    pub fn zero_head(&mut self) {
        self.head_w.data.iter_mut().for_each(|x| *x = F::zero());
        self.head_b.data.iter_mut().for_each(|x| *x = F::zero());
    }

    /// Fresh normal(0, 0.02) head weights and zero bias.
    pub fn reset_head(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.head_w = Tensor::normal(&[self.config.d_model, NUM_LABELS], &mut rng);
        self.head_b = Tensor::zeros(&[NUM_LABELS]);
    }

    /// A `k`-layer model whose embeddings, bottom `k` layer blocks and head
    /// are exact copies of this model's.
    pub fn truncate_layers(&self, k: usize) -> Result<Self> {
        if k < 1 || k > self.config.n_layers {
            return Err(Error::invalid(format!(
                "cannot keep {k} of {} layers",
                self.config.n_layers
            )));
        }
        let mut out = self.clone();
        out.layers.truncate(k);
        out.config.n_layers = k;
        Ok(out)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.ids.len() != batch.batch_size * batch.seq_len || batch.mask.len() != batch.ids.len()
        {
            return Err(Error::LengthMismatch {
                left: batch.ids.len(),
                right: batch.batch_size * batch.seq_len,
            });
        }
        if batch.seq_len > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: batch.seq_len,
                max: self.config.max_seq_len,
            });
        }
        if let Some(&bad) = batch
            .ids
            .iter()
            .find(|&&id| id as usize >= self.config.vocab_size)
        {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn forward_seq(
        &self,
        ids: &[u32],
        mask: &[bool],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> SeqTrace<F> {
        let c = &self.config;
        let d = c.d_model;
        let t = ids.len();
        let mut x = vec![F::zero(); t * d];
        for (p, &id) in ids.iter().enumerate() {
            let tok = &self.tok_emb.data[id as usize * d..(id as usize + 1) * d];
            let pos = &self.pos_emb.data[p * d..(p + 1) * d];
            for ((o, &a), &b) in x[p * d..(p + 1) * d].iter_mut().zip(tok).zip(pos) {
                *o = a + b;
            }
        }
        let (mut h, emb_ln) = layer_norm(&x, &self.emb_ln.gamma.data, &self.emb_ln.beta.data, d);
        let drop_emb = apply_dropout(&mut h, c.dropout_prob, rng.as_deref_mut());
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, tr) = layer.forward(h, mask, c, rng.as_deref_mut());
            layers.push(tr);
            h = out;
        }
        SeqTrace {
            emb_ln,
            drop_emb,
            layers,
            output: h,
        }
    }

    fn head(&self, hidden: &[F]) -> Vec<F> {
        let d = self.config.d_model;
        linear(
            hidden,
            &self.head_w.data,
            &self.head_b.data,
            hidden.len() / d,
            d,
            NUM_LABELS,
        )
    }

    /// Inference-mode logits, laid out `batch x seq_len x 4`.
    pub fn forward(&self, batch: &Batch) -> Result<Vec<F>> {
        self.check_batch(batch)?;
        let mut out = Vec::with_capacity(batch.ids.len() * NUM_LABELS);
        for b in 0..batch.batch_size {
            let (ids, mask) = batch.row(b);
            let tr = self.forward_seq(ids, mask, None);
            out.extend(self.head(&tr.output));
        }
        Ok(out)
    }

    /// Inference-mode activations: entry 0 is the embedding output, entry `i`
    /// the output of layer `i`. Each is laid out `batch x seq_len x d_model`.
    pub fn hidden_states(&self, batch: &Batch) -> Result<Vec<Vec<F>>> {
        self.check_batch(batch)?;
        let mut states = vec![Vec::new(); self.layers.len() + 1];
        for b in 0..batch.batch_size {
            let (ids, mask) = batch.row(b);
            let tr = self.forward_seq(ids, mask, None);
            for (i, l) in tr.layers.iter().enumerate() {
                states[i].extend_from_slice(&l.input);
            }
            states[self.layers.len()].extend_from_slice(&tr.output);
        }
        Ok(states)
    }

    /// Mean cross-entropy over unmasked positions, inference mode.
    pub fn loss(&self, batch: &Batch, labels: &[u8], label_mask: &[bool]) -> Result<F> {
        Ok(self.run(batch, labels, label_mask, None, false)?.0)
    }

    /// Mean cross-entropy over positions where `label_mask` is set, with the
    /// gradient of every parameter. Passing an RNG enables dropout.
    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        labels: &[u8],
        label_mask: &[bool],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(F, TaggerModel<F>)> {
        let (loss, grads) = self.run(batch, labels, label_mask, rng, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    fn run(
        &self,
        batch: &Batch,
        labels: &[u8],
        label_mask: &[bool],
        mut rng: Option<&mut ChaCha8Rng>,
        want_grads: bool,
    ) -> Result<(F, Option<TaggerModel<F>>)> {
        self.check_batch(batch)?;
        let n = batch.ids.len();
        if labels.len() != n || label_mask.len() != n {
            return Err(Error::LengthMismatch {
                left: labels.len().min(label_mask.len()),
                right: n,
            });
        }
        let count = label_mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::AllMasked);
        }
        if let Some(bad) = labels
            .iter()
            .zip(label_mask)
            .find(|&(&l, &m)| m && l as usize >= NUM_LABELS)
        {
            return Err(Error::invalid(format!("label index {} out of range", bad.0)));
        }
        let c = &self.config;
        let (t, d) = (batch.seq_len, c.d_model);
        let inv_n = F::lit(1.0 / count as f64);
        let mut grads = want_grads.then(|| self.zeros_like());
        let mut total = F::zero();
        for b in 0..batch.batch_size {
            let lm = &label_mask[b * t..(b + 1) * t];
            if !lm.iter().any(|&m| m) {
                continue;
            }
            let (ids, mask) = batch.row(b);
            let tr = self.forward_seq(ids, mask, rng.as_deref_mut());
            let logits = self.head(&tr.output);
            let mut dlogits = vec![F::zero(); t * NUM_LABELS];
            for p in 0..t {
                if !lm[p] {
                    continue;
                }
                let row = &logits[p * NUM_LABELS..(p + 1) * NUM_LABELS];
                let mut probs = row.to_vec();
                softmax_in_place(&mut probs);
                let gold = labels[b * t + p] as usize;
                let max = row.iter().copied().fold(F::neg_infinity(), F::max);
                let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<F>().ln();
                total += lse - row[gold];
                for (k, pr) in probs.iter().enumerate() {
                    let target = if k == gold { F::one() } else { F::zero() };
                    dlogits[p * NUM_LABELS + k] = (*pr - target) * inv_n;
                }
            }
            let Some(gr) = grads.as_mut() else { continue };
            matmul_tn_acc(&tr.output, &dlogits, t, d, NUM_LABELS, &mut gr.head_w.data);
            col_sum_acc(&dlogits, NUM_LABELS, &mut gr.head_b.data);
            let mut dh = vec![F::zero(); t * d];
            matmul_nt_acc(&dlogits, &self.head_w.data, t, NUM_LABELS, d, &mut dh);
            for (i, ltr) in tr.layers.iter().enumerate().rev() {
                dh = self.layers[i].backward(&dh, ltr, c, &mut gr.layers[i]);
            }
            mul_mask(&mut dh, &tr.drop_emb);
            let dx = layer_norm_backward(
                &dh,
                &tr.emb_ln,
                &self.emb_ln.gamma.data,
                d,
                &mut gr.emb_ln.gamma.data,
                &mut gr.emb_ln.beta.data,
            );
            for (p, &id) in ids.iter().enumerate() {
                let row = &dx[p * d..(p + 1) * d];
                let tok = &mut gr.tok_emb.data[id as usize * d..(id as usize + 1) * d];
                for (g, &v) in tok.iter_mut().zip(row) {
                    *g += v;
                }
                let pos = &mut gr.pos_emb.data[p * d..(p + 1) * d];
                for (g, &v) in pos.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        Ok((total * inv_n, grads))
    }
}

/// Index of the largest logit per position; ties pick the lower index.
pub fn argmax_labels<F: Real>(logits: &[F]) -> Vec<PunctLabel> {
    logits
        .chunks_exact(NUM_LABELS)
        .map(|row| {
            let mut best = 0;
            for k in 1..NUM_LABELS {
                if row[k] > row[best] {
                    best = k;
                }
            }
            PunctLabel::from_index(best).expect("label index in range")
        })
        .collect()
}


#[cfg(test)]
mod gradcheck {
    use super::*;

    #[test]
    fn sampled_coordinates_match_finite_differences() {
        let mut m = TaggerModel::<f64>::new(TaggerConfig {
            vocab_size: 12,
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            ffn_dim: 12,
            max_seq_len: 6,
            dropout_prob: 0.0,
            seed: 11,
        })
        .unwrap();
        // larger head weights make the loss sensitive to every layer
        m.head_w.data.iter_mut().for_each(|w| *w *= 20.0);
        let b = Batch::from_sequences(&[vec![1u32, 4, 7, 2, 9], vec![3, 5, 8]]);
        let labels = [0u8, 3, 1, 2, 3, 1, 0, 2, 0, 0];
        let (_, g) = m.loss_and_grads(&b, &labels, &b.mask, None).unwrap();
        let names: Vec<String> = m.named_tensors().into_iter().map(|(n, _)| n).collect();
        let h = 1e-5;
        for (ti, name) in names.iter().enumerate() {
            let n = g.named_tensors()[ti].1.data.len();
            for c in [0, n / 3, n - 1] {
                let analytic = g.named_tensors()[ti].1.data[c];
                let mut plus = m.clone();
                plus.named_tensors_mut()[ti].1.data[c] += h;
                let mut minus = m.clone();
                minus.named_tensors_mut()[ti].1.data[c] -= h;
                let fd = (plus.loss(&b, &labels, &b.mask).unwrap()
                    - minus.loss(&b, &labels, &b.mask).unwrap())
                    / (2.0 * h);
                let err = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
                assert!(err < 1e-4 || (analytic - fd).abs() < 1e-9, "{name}[{c}]: {analytic} vs {fd}");
            }
        }
    }
}
