//! Parameter layout, forward pass and backpropagation through time for the
//! embedding → GRU encoder → GRU decoder → softmax network.
//!
//! All parameters live in one flat `f64` buffer so that SGD, clipping,
//! finite-difference probing and weight dumps treat them uniformly. Matrices
//! are row-major. Gate order inside a GRU block is update (z), reset (r),
//! candidate (n):
//!
//! ```text
//! z  = σ(Wz x + Uz h + bz)
//! r  = σ(Wr x + Ur h + br)
//! n  = tanh(Wn x + Un (r ⊙ h) + bn)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GruBlock {
    /// `3H x E` input weights.
    pub w: usize,
    /// `3H x H` recurrent weights.
    pub u: usize,
    /// `3H` biases.
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    /// `V x E` embedding table.
    pub emb: usize,
    pub enc: GruBlock,
    pub dec: GruBlock,
    /// `V x H` output projection.
    pub w_out: usize,
    pub b_out: usize,
    pub total: usize,
}

/// Named parameter groups, used to spread gradient-check probes.
pub(crate) struct Group {
    pub start: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let s = at;
            at += n;
            s
        };
        let emb = take(vocab * embed);
        let block = |take: &mut dyn FnMut(usize) -> usize| GruBlock {
            w: take(3 * hidden * embed),
            u: take(3 * hidden * hidden),
            b: take(3 * hidden),
        };
        let enc = block(&mut take);
        let dec = block(&mut take);
        let w_out = take(vocab * hidden);
        let b_out = take(vocab);
        Layout { vocab, embed, hidden, emb, enc, dec, w_out, b_out, total: at }
    }

    pub fn groups(&self) -> Vec<Group> {
        let (v, e, h) = (self.vocab, self.embed, self.hidden);
        let mut g = vec![Group { start: self.emb, len: v * e }];
        for blk in [self.enc, self.dec] {
            g.push(Group { start: blk.w, len: 3 * h * e });
            g.push(Group { start: blk.u, len: 3 * h * h });
            g.push(Group { start: blk.b, len: 3 * h });
        }
        g.push(Group { start: self.w_out, len: v * h });
        g.push(Group { start: self.b_out, len: v });
        g
    }

    pub fn bias_ranges(&self) -> [core::ops::Range<usize>; 3] {
        let h3 = 3 * self.hidden;
        [
            self.enc.b..self.enc.b + h3,
            self.dec.b..self.dec.b + h3,
            self.b_out..self.b_out + self.vocab,
        ]
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `out[i] += Σ_j m[i*cols + j] * v[j]`
#[inline]
fn gemv_acc(out: &mut [f64], m: &[f64], cols: usize, v: &[f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out[j] += Σ_i m[i*cols + j] * v[i]`
#[inline]
fn gemv_t_acc(out: &mut [f64], m: &[f64], cols: usize, v: &[f64]) {
    for (row, &vi) in m.chunks_exact(cols).zip(v) {
        if vi != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
    }
}

/// `m[i*cols + j] += u[i] * v[j]`
#[inline]
fn outer_acc(m: &mut [f64], cols: usize, u: &[f64], v: &[f64]) {
    for (row, &ui) in m.chunks_exact_mut(cols).zip(u) {
        if ui != 0.0 {
            for (a, b) in row.iter_mut().zip(v) {
                *a += ui * b;
            }
        }
    }
}

/// Cached activations of one GRU step, stored flat: `[h_prev, z, r, n, h]`.
struct Steps {
    hidden: usize,
    inputs: Vec<u32>,
    data: Vec<f64>,
}

impl Steps {
    fn new(hidden: usize, capacity: usize) -> Self {
        Steps { hidden, inputs: Vec::with_capacity(capacity), data: Vec::with_capacity(capacity * 5 * hidden) }
    }

    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn step(&self, t: usize) -> [&[f64]; 5] {
        let h = self.hidden;
        let base = &self.data[t * 5 * h..(t + 1) * 5 * h];
        [&base[..h], &base[h..2 * h], &base[2 * h..3 * h], &base[3 * h..4 * h], &base[4 * h..]]
    }

    fn last_hidden(&self) -> Option<&[f64]> {
        (self.len() > 0).then(|| self.step(self.len() - 1)[4])
    }
}

fn gru_forward(p: &[f64], l: &Layout, blk: GruBlock, x_tok: u32, h_prev: &[f64], steps: &mut Steps) {
    let (e, h) = (l.embed, l.hidden);
    let x = &p[l.emb + x_tok as usize * e..][..e];
    let w = &p[blk.w..blk.w + 3 * h * e];
    let u = &p[blk.u..blk.u + 3 * h * h];
    let b = &p[blk.b..blk.b + 3 * h];

    let mut a = b.to_vec();
    gemv_acc(&mut a, w, e, x);
    // z and r see h directly.
    gemv_acc(&mut a[..2 * h], &u[..2 * h * h], h, h_prev);
    let z: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    gemv_acc(&mut a[2 * h..], &u[2 * h * h..], h, &rh);
    let n: Vec<f64> = a[2 * h..].iter().map(|&v| libm::tanh(v)).collect();

    steps.inputs.push(x_tok);
    steps.data.extend_from_slice(h_prev);
    steps.data.extend_from_slice(&z);
    steps.data.extend_from_slice(&r);
    steps.data.extend_from_slice(&n);
    steps.data.extend((0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]));
}

/// Backpropagates `dh` through step `t`, accumulating parameter gradients.
/// Returns the gradient w.r.t. the previous hidden state.
fn gru_backward(p: &[f64], g: &mut [f64], l: &Layout, blk: GruBlock, steps: &Steps, t: usize, dh: &[f64]) -> Vec<f64> {
    let (e, h) = (l.embed, l.hidden);
    let [h_prev, z, r, n, _] = steps.step(t);
    let x_tok = steps.inputs[t] as usize;
    let x = &p[l.emb + x_tok * e..][..e];
    let u = &p[blk.u..blk.u + 3 * h * h];

    let mut da = vec![0.0; 3 * h];
    let mut dh_prev = vec![0.0; h];
    for i in 0..h {
        let dn = dh[i] * (1.0 - z[i]);
        let dz = dh[i] * (h_prev[i] - n[i]);
        dh_prev[i] = dh[i] * z[i];
        da[i] = dz * z[i] * (1.0 - z[i]);
        da[2 * h + i] = dn * (1.0 - n[i] * n[i]);
    }
    // Through Un (r ⊙ h).
    let mut drh = vec![0.0; h];
    gemv_t_acc(&mut drh, &u[2 * h * h..], h, &da[2 * h..]);
    for i in 0..h {
        let dr = drh[i] * h_prev[i];
        dh_prev[i] += drh[i] * r[i];
        da[h + i] = dr * r[i] * (1.0 - r[i]);
    }
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();

    outer_acc(&mut g[blk.u..blk.u + 2 * h * h], h, &da[..2 * h], h_prev);
    outer_acc(&mut g[blk.u + 2 * h * h..blk.u + 3 * h * h], h, &da[2 * h..], &rh);
    gemv_t_acc(&mut dh_prev, &u[..2 * h * h], h, &da[..2 * h]);

    outer_acc(&mut g[blk.w..blk.w + 3 * h * e], e, &da, x);
    for (gb, d) in g[blk.b..blk.b + 3 * h].iter_mut().zip(&da) {
        *gb += d;
    }
    let mut dx = vec![0.0; e];
    gemv_t_acc(&mut dx, &p[blk.w..blk.w + 3 * h * e], e, &da);
    for (ge, d) in g[l.emb + x_tok * e..][..e].iter_mut().zip(&dx) {
        *ge += d;
    }
    dh_prev
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// How decoder inputs after `BOS` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DecoderInput {
    /// The true previous token.
    TeacherForced,
    /// The decoder's own previous argmax prediction.
    FreeRunning,
}

/// Mean per-token cross-entropy of reconstructing `ids` followed by `EOS`.
///
/// When `grad` is given, the gradient of `scale * loss` is accumulated into it.
pub(crate) fn sequence_loss(
    p: &[f64],
    l: &Layout,
    ids: &[u32],
    mode: DecoderInput,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let h = l.hidden;
    let zeros = vec![0.0; h];

    let mut enc = Steps::new(h, ids.len());
    for &tok in ids {
        let prev = enc.last_hidden().unwrap_or(&zeros).to_vec();
        gru_forward(p, l, l.enc, tok, &prev, &mut enc);
    }
    let context = enc.last_hidden().unwrap_or(&zeros).to_vec();

    let targets: Vec<u32> = ids.iter().copied().chain(core::iter::once(EOS)).collect();
    let steps = targets.len();
    let mut dec = Steps::new(h, steps);
    let mut probs: Vec<f64> = Vec::with_capacity(steps * l.vocab);
    let mut loss = 0.0;
    let mut input = BOS;
    for (t, &target) in targets.iter().enumerate() {
        let prev = if t == 0 { context.clone() } else { dec.last_hidden().unwrap().to_vec() };
        gru_forward(p, l, l.dec, input, &prev, &mut dec);
        let hid = dec.last_hidden().unwrap();
        let mut logits = p[l.b_out..l.b_out + l.vocab].to_vec();
        gemv_acc(&mut logits, &p[l.w_out..l.w_out + l.vocab * h], h, hid);
        softmax_in_place(&mut logits);
        loss -= libm::log(logits[target as usize].max(f64::MIN_POSITIVE));
        input = match mode {
            DecoderInput::TeacherForced => target,
            DecoderInput::FreeRunning => argmax(&logits),
        };
        probs.extend_from_slice(&logits);
    }
    let loss = loss / steps as f64;

    if let Some((g, scale)) = grad {
        let coef = scale / steps as f64;
        let mut dh_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let mut dlogits = probs[t * l.vocab..(t + 1) * l.vocab].to_vec();
            dlogits[targets[t] as usize] -= 1.0;
            for d in dlogits.iter_mut() {
                *d *= coef;
            }
            let hid = dec.step(t)[4];
            outer_acc(&mut g[l.w_out..l.w_out + l.vocab * h], h, &dlogits, hid);
            for (gb, d) in g[l.b_out..l.b_out + l.vocab].iter_mut().zip(&dlogits) {
                *gb += d;
            }
            let mut dh = dh_next;
            gemv_t_acc(&mut dh, &p[l.w_out..l.w_out + l.vocab * h], h, &dlogits);
            dh_next = gru_backward(p, g, l, l.dec, &dec, t, &dh);
        }
        // dh_next is now the gradient w.r.t. the encoder's final state.
        for t in (0..enc.len()).rev() {
            dh_next = gru_backward(p, g, l, l.enc, &enc, t, &dh_next);
        }
    }
    loss
}

fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as u32
}
