use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::tape::{NodeId, Tape};
use super::{NnError, TransformerConfig};
use crate::masking::PAD;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Gain,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: TensorKind,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone, Copy)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone)]
struct Layout {
    specs: Vec<TensorSpec>,
    embed: usize,
    enc: Vec<EncLayer>,
    enc_norm: Norm,
    dec: Vec<DecLayer>,
    dec_norm: Norm,
    out_bias: usize,
}

struct LayoutBuilder {
    specs: Vec<TensorSpec>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, rows: usize, cols: usize, kind: TensorKind) -> usize {
        self.specs.push(TensorSpec { name, rows, cols, kind });
        self.specs.len() - 1
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            g: self.add(format!("{prefix}.gain"), 1, d, TensorKind::Gain),
            b: self.add(format!("{prefix}.bias"), 1, d, TensorKind::Bias),
        }
    }

    fn attn(&mut self, prefix: &str, d: usize) -> Attn {
        let mut pair = |p: &str| {
            (
                self.add(format!("{prefix}.w{p}"), d, d, TensorKind::Weight),
                self.add(format!("{prefix}.b{p}"), 1, d, TensorKind::Bias),
            )
        };
        let (wq, bq) = pair("q");
        let (wk, bk) = pair("k");
        let (wv, bv) = pair("v");
        let (wo, bo) = pair("o");
        Attn {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, d_ff: usize) -> Ffn {
        Ffn {
            w1: self.add(format!("{prefix}.w1"), d, d_ff, TensorKind::Weight),
            b1: self.add(format!("{prefix}.b1"), 1, d_ff, TensorKind::Bias),
            w2: self.add(format!("{prefix}.w2"), d_ff, d, TensorKind::Weight),
            b2: self.add(format!("{prefix}.b2"), 1, d, TensorKind::Bias),
        }
    }
}

impl Layout {
    fn new(c: &TransformerConfig) -> Self {
        let d = c.d_model;
        let mut b = LayoutBuilder { specs: Vec::new() };
        let embed = b.add("embed".into(), c.vocab_size, d, TensorKind::Weight);
        let enc = (0..c.encoder_layers)
            .map(|l| EncLayer {
                ln1: b.norm(&format!("enc.{l}.ln1"), d),
                attn: b.attn(&format!("enc.{l}.attn"), d),
                ln2: b.norm(&format!("enc.{l}.ln2"), d),
                ffn: b.ffn(&format!("enc.{l}.ffn"), d, c.d_ff),
            })
            .collect();
        let enc_norm = b.norm("enc.ln", d);
        let dec = (0..c.decoder_layers)
            .map(|l| DecLayer {
                ln1: b.norm(&format!("dec.{l}.ln1"), d),
                self_attn: b.attn(&format!("dec.{l}.self"), d),
                ln2: b.norm(&format!("dec.{l}.ln2"), d),
                cross: b.attn(&format!("dec.{l}.cross"), d),
                ln3: b.norm(&format!("dec.{l}.ln3"), d),
                ffn: b.ffn(&format!("dec.{l}.ffn"), d, c.d_ff),
            })
            .collect();
        let dec_norm = b.norm("dec.ln", d);
        let out_bias = b.add("out.bias".into(), 1, c.vocab_size, TensorKind::Bias);
        Self {
            specs: b.specs,
            embed,
            enc,
            enc_norm,
            dec,
            dec_norm,
            out_bias,
        }
    }
}

/// All trainable tensors plus the fixed sinusoidal position table.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: TransformerConfig,
    layout: Layout,
    tensors: Vec<Matrix>,
    positions: Matrix,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors == other.tensors
    }
}

impl ModelParams {
    /// Assembles parameters from tensors in [`ModelParams::specs`] order.
    pub fn from_tensors(config: TransformerConfig, tensors: Vec<Matrix>) -> Result<Self, NnError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if tensors.len() != layout.specs.len() {
            return Err(NnError::Checkpoint(format!(
                "expected {} tensors, got {}",
                layout.specs.len(),
                tensors.len()
            )));
        }
        for (spec, t) in layout.specs.iter().zip(&tensors) {
            if t.shape() != (spec.rows, spec.cols) {
                return Err(NnError::Checkpoint(format!(
                    "tensor {} has shape {:?}, expected ({}, {})",
                    spec.name,
                    t.shape(),
                    spec.rows,
                    spec.cols
                )));
            }
        }
        let positions = sinusoid_table(config.max_len, config.d_model);
        Ok(Self {
            config,
            layout,
            tensors,
            positions,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.layout.specs
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.layout
            .specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| &self.tensors[i])
    }

    pub fn positions(&self) -> &Matrix {
        &self.positions
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.layout
            .specs
            .iter()
            .zip(&self.tensors)
            .find(|(_, t)| !t.is_finite())
            .map(|(s, _)| s.name.as_str())
    }
}

/// Tensor names and shapes implied by a configuration, in storage order.
pub fn init_shapes(config: &TransformerConfig) -> Vec<(String, usize, usize)> {
    Layout::new(config)
        .specs
        .into_iter()
        .map(|s| (s.name, s.rows, s.cols))
        .collect()
}

/// `pe[p][2i] = sin(p / 10000^(2i/d))`, `pe[p][2i+1] = cos(..)`.
pub fn sinusoid_table(len: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(len, d);
    for p in 0..len {
        for i in 0..d {
            let expo = (2 * (i / 2)) as f64 / d as f64;
            let angle = p as f64 / libm::pow(10_000.0, expo);
            m.set(p, i, if i % 2 == 0 { libm::sin(angle) } else { libm::cos(angle) });
        }
    }
    m
}

/// Xavier-uniform weights, unit gains and zero biases, drawn from a ChaCha8
/// stream seeded by `config.seed`.
pub fn init_params(config: &TransformerConfig) -> Result<ModelParams, NnError> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tensors = layout
        .specs
        .iter()
        .map(|s| match s.kind {
            TensorKind::Gain => Matrix::filled(s.rows, s.cols, 1.0),
            TensorKind::Bias => Matrix::zeros(s.rows, s.cols),
            TensorKind::Weight => {
                let a = libm::sqrt(6.0 / (s.rows + s.cols) as f64);
                let data = (0..s.rows * s.cols).map(|_| rng.random_range(-a..=a)).collect();
                Matrix::from_vec(s.rows, s.cols, data)
            }
        })
        .collect();
    ModelParams::from_tensors(config.clone(), tensors)
}

pub(crate) fn validate_ids(side: &'static str, ids: &[u32], config: &TransformerConfig) -> Result<(), NnError> {
    if ids.is_empty() {
        return Err(NnError::EmptySequence { side });
    }
    if ids.len() > config.max_len {
        return Err(NnError::TooLong {
            side,
            len: ids.len(),
            max: config.max_len,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= config.vocab_size) {
        return Err(NnError::IdOutOfRange {
            side,
            id,
            vocab: config.vocab_size,
        });
    }
    Ok(())
}

pub(crate) fn validate_source(ids: &[u32], config: &TransformerConfig) -> Result<(), NnError> {
    validate_ids("source", ids, config)?;
    if ids.iter().all(|&id| id == PAD) {
        return Err(NnError::AllPadSource);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    Encoder,
    DecoderSelf,
    DecoderCross,
}

/// Attention probabilities of one head (query rows by key columns).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub kind: AttentionKind,
    pub layer: usize,
    pub head: usize,
    pub weights: Matrix,
}

/// One forward computation recorded on a tape.
pub(crate) struct Graph<'p> {
    pub tape: Tape<'p>,
    params: &'p ModelParams,
    nodes: Vec<NodeId>,
    dropout: Option<(f64, ChaCha8Rng)>,
    attention: Option<Vec<AttentionMap>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        let mut tape = Tape::new();
        let nodes = params.tensors.iter().enumerate().map(|(i, t)| tape.param(i, t)).collect();
        Self {
            tape,
            params,
            nodes,
            dropout: None,
            attention: None,
        }
    }

    pub fn with_dropout(mut self, seed: u64) -> Self {
        let rate = self.params.config.dropout_rate;
        if rate > 0.0 {
            self.dropout = Some((rate, ChaCha8Rng::seed_from_u64(seed)));
        }
        self
    }

    pub fn recording_attention(mut self) -> Self {
        self.attention = Some(Vec::new());
        self
    }

    pub fn take_attention(&mut self) -> Vec<AttentionMap> {
        self.attention.take().unwrap_or_default()
    }

    fn p(&self, i: usize) -> NodeId {
        self.nodes[i]
    }

    fn dropout_node(&mut self, x: NodeId) -> NodeId {
        let Some((rate, rng)) = &mut self.dropout else {
            return x;
        };
        let (rows, cols) = self.tape.value(x).shape();
        let keep = 1.0 / (1.0 - *rate);
        let data = (0..rows * cols)
            .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep })
            .collect();
        self.tape.mul_const(x, Matrix::from_vec(rows, cols, data))
    }

    fn embed(&mut self, ids: &[u32]) -> NodeId {
        let d = self.params.config.d_model;
        let rows = ids.iter().map(|&i| i as usize).collect();
        let g = self.tape.gather_rows(self.p(self.params.layout.embed), rows);
        let s = self.tape.scale(g, libm::sqrt(d as f64));
        let mut pos = Matrix::zeros(ids.len(), d);
        for r in 0..ids.len() {
            pos.row_mut(r).copy_from_slice(self.params.positions.row(r));
        }
        let pos = self.tape.constant(pos);
        let x = self.tape.add(s, pos);
        self.dropout_node(x)
    }

    fn norm(&mut self, x: NodeId, n: Norm) -> NodeId {
        self.tape.layer_norm(x, self.p(n.g), self.p(n.b))
    }

    fn linear(&mut self, x: NodeId, w: usize, b: usize) -> NodeId {
        let y = self.tape.matmul(x, self.p(w));
        self.tape.add_row(y, self.p(b))
    }

    fn attention(&mut self, a: Attn, q_in: NodeId, kv_in: NodeId, allowed: &[bool], kind: AttentionKind, layer: usize) -> NodeId {
        let c = &self.params.config;
        let (heads, dk) = (c.heads, c.head_dim());
        let q = self.linear(q_in, a.wq, a.bq);
        let k = self.linear(kv_in, a.wk, a.bk);
        let v = self.linear(kv_in, a.wv, a.bv);
        let inv = 1.0 / libm::sqrt(dk as f64);
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * dk, dk);
            let kh = self.tape.slice_cols(k, h * dk, dk);
            let vh = self.tape.slice_cols(v, h * dk, dk);
            let s = self.tape.matmul_bt(qh, kh);
            let s = self.tape.scale(s, inv);
            let p = self.tape.softmax(s, Some(allowed));
            if let Some(rec) = &mut self.attention {
                rec.push(AttentionMap {
                    kind,
                    layer,
                    head: h,
                    weights: self.tape.value(p).clone(),
                });
            }
            outs.push(self.tape.matmul(p, vh));
        }
        let cat = if heads == 1 { outs[0] } else { self.tape.concat_cols(outs) };
        self.linear(cat, a.wo, a.bo)
    }

    fn ffn(&mut self, x: NodeId, f: Ffn) -> NodeId {
        let h = self.linear(x, f.w1, f.b1);
        let h = self.tape.relu(h);
        self.linear(h, f.w2, f.b2)
    }

    fn residual(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let y = self.dropout_node(y);
        self.tape.add(x, y)
    }

    /// Encoder output for a validated source.
    pub fn encode(&mut self, src: &[u32]) -> NodeId {
        let n = src.len();
        let allowed: Vec<bool> = (0..n).flat_map(|_| src.iter().map(|&t| t != PAD)).collect();
        let mut x = self.embed(src);
        let layers = self.params.layout.enc.clone();
        for (l, layer) in layers.iter().enumerate() {
            let h = self.norm(x, layer.ln1);
            let a = self.attention(layer.attn, h, h, &allowed, AttentionKind::Encoder, l);
            x = self.residual(x, a);
            let h = self.norm(x, layer.ln2);
            let f = self.ffn(h, layer.ffn);
            x = self.residual(x, f);
        }
        self.norm(x, self.params.layout.enc_norm)
    }

    /// Next-token logits for every prefix position.
    pub fn decode(&mut self, memory: NodeId, src: &[u32], prefix: &[u32]) -> NodeId {
        let n = prefix.len();
        let causal: Vec<bool> = (0..n).flat_map(|i| (0..n).map(move |j| j <= i)).collect();
        let cross: Vec<bool> = (0..n).flat_map(|_| src.iter().map(|&t| t != PAD)).collect();
        let mut x = self.embed(prefix);
        let layers = self.params.layout.dec.clone();
        for (l, layer) in layers.iter().enumerate() {
            let h = self.norm(x, layer.ln1);
            let a = self.attention(layer.self_attn, h, h, &causal, AttentionKind::DecoderSelf, l);
            x = self.residual(x, a);
            let h = self.norm(x, layer.ln2);
            let a = self.attention(layer.cross, h, memory, &cross, AttentionKind::DecoderCross, l);
            x = self.residual(x, a);
            let h = self.norm(x, layer.ln3);
            let f = self.ffn(h, layer.ffn);
            x = self.residual(x, f);
        }
        let h = self.norm(x, self.params.layout.dec_norm);
        let logits = self.tape.matmul_bt(h, self.p(self.params.layout.embed));
        self.tape.add_row(logits, self.p(self.params.layout.out_bias))
    }
}

/// Logits of shape `(prefix.len(), vocab_size)`.
pub fn forward(params: &ModelParams, source: &[u32], prefix: &[u32]) -> Result<Matrix, NnError> {
    forward_inner(params, source, prefix, false).map(|(m, _)| m)
}

/// [`forward`] plus the attention probabilities of every head.
pub fn forward_with_attention(
    params: &ModelParams,
    source: &[u32],
    prefix: &[u32],
) -> Result<(Matrix, Vec<AttentionMap>), NnError> {
    forward_inner(params, source, prefix, true)
}

fn forward_inner(
    params: &ModelParams,
    source: &[u32],
    prefix: &[u32],
    record: bool,
) -> Result<(Matrix, Vec<AttentionMap>), NnError> {
    validate_source(source, &params.config)?;
    validate_ids("target", prefix, &params.config)?;
    let mut g = Graph::new(params);
    if record {
        g = g.recording_attention();
    }
    let memory = g.encode(source);
    let logits = g.decode(memory, source, prefix);
    let out = g.tape.value(logits).clone();
    Ok((out, g.take_attention()))
}
