#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::Rng as _;

use super::{LayerKind, ModelGraph, NnError, NodeShape, Scalar, Tensor};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything backward needs from one sample's forward pass.
pub struct SampleContext<T: Scalar> {
    pub(crate) activations: Vec<Vec<T>>,
    pub(crate) dropout_masks: Vec<Option<Vec<T>>>,
    pub(crate) pool_argmax: Vec<Option<Vec<usize>>>,
    pub(crate) mode: Mode,
}

impl<T: Scalar> SampleContext<T> {
    /// Activation of a node by name (used for fusion parity checks and
    /// heatmap extraction).
    pub fn activation(&self, graph: &ModelGraph<T>, name: &str) -> Option<&[T]> {
        graph.node_index(name).map(|i| self.activations[i].as_slice())
    }

    pub fn output(&self, graph: &ModelGraph<T>) -> T {
        let idx = graph.node_index(graph.output_node()).expect("output exists");
        self.activations[idx][0]
    }
}

/// Per-weight gradients keyed by weight name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar = f32> {
    pub(crate) map: BTreeMap<String, Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(graph: &ModelGraph<T>) -> Self {
        let map = graph
            .weights()
            .iter()
            .map(|(name, t)| (name.clone(), vec![T::zero(); t.numel()]))
            .collect();
        Self { map }
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.map.get(name).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<T>)> {
        self.map.iter()
    }

    fn buf_mut(&mut self, name: &str) -> &mut [T] {
        self.map.get_mut(name).expect("gradient buffer exists").as_mut_slice()
    }

    /// Write each gradient into the matching weight tensor's grad slot.
    pub fn store_into(&self, graph: &mut ModelGraph<T>) -> Result<(), NnError> {
        for (name, g) in &self.map {
            let w = graph
                .weights_mut()
                .get_mut(name)
                .ok_or_else(|| NnError::WeightMismatch {
                    name: name.clone(),
                    detail: "gradient for unknown weight".into(),
                })?;
            w.set_grad(g.clone())?;
        }
        Ok(())
    }
}

/// Run a batch through the graph. `batch` is `[n, c, h, w]`; the result is
/// `[n, 1]`. Dropout is active only in train mode, with masks derived from
/// `(seed, node name, sample position)`.
pub fn forward<T: Scalar>(
    graph: &ModelGraph<T>,
    batch: &Tensor<T>,
    mode: Mode,
    seed: u64,
) -> Result<Tensor<T>, NnError> {
    let (out, _) = forward_with_contexts(graph, batch, mode, seed)?;
    Ok(out)
}

/// Like [`forward`], also returning per-sample contexts for [`backward`].
pub fn forward_with_contexts<T: Scalar>(
    graph: &ModelGraph<T>,
    batch: &Tensor<T>,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor<T>, Vec<SampleContext<T>>), NnError> {
    let [c, h, w] = graph.input_shape();
    let sample_len = c * h * w;
    if batch.shape().len() != 4 || batch.shape()[1..] != [c, h, w] {
        return Err(NnError::Shape {
            node: graph.input_node().to_string(),
            detail: format!(
                "batch shape {:?} does not match graph input [n, {c}, {h}, {w}]",
                batch.shape()
            ),
        });
    }
    let n = batch.shape()[0];
    let mut outputs = Vec::with_capacity(n);
    let mut contexts = Vec::with_capacity(n);
    for i in 0..n {
        let sample = &batch.data()[i * sample_len..(i + 1) * sample_len];
        let ctx = forward_sample(graph, sample, mode, seed, i as u64)?;
        outputs.push(ctx.output(graph));
        contexts.push(ctx);
    }
    Ok((Tensor::new(vec![n, 1], outputs)?, contexts))
}

pub(crate) fn forward_sample<T: Scalar>(
    graph: &ModelGraph<T>,
    input: &[T],
    mode: Mode,
    seed: u64,
    sample_index: u64,
) -> Result<SampleContext<T>, NnError> {
    let nodes = graph.nodes();
    let shapes = graph.shapes();
    let deps = graph.input_indices();
    let mut ctx = SampleContext {
        activations: vec![Vec::new(); nodes.len()],
        dropout_masks: vec![None; nodes.len()],
        pool_argmax: vec![None; nodes.len()],
        mode,
    };
    for idx in 0..nodes.len() {
        let node = &nodes[idx];
        let out = match &node.kind {
            LayerKind::Input => input.to_vec(),
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                pad,
            } => {
                let src = deps[idx][0];
                let (ic, ih, iw) = expect_map(shapes[src]);
                let (oc, oh, ow) = expect_map(shapes[idx]);
                debug_assert_eq!(oc, *out_channels);
                let weight = graph.weight(&format!("{}.w", node.name)).expect("conv weight");
                let bias = graph.weight(&format!("{}.b", node.name)).expect("conv bias");
                let geom = ConvGeom {
                    ic,
                    ih,
                    iw,
                    oc,
                    oh,
                    ow,
                    kernel: *kernel,
                    stride: *stride,
                    pad: *pad,
                };
                conv_forward(&geom, &ctx.activations[src], weight.data(), bias.data())
            }
            LayerKind::MaxPool { kernel, stride } => {
                let src = deps[idx][0];
                let (c, ih, iw) = expect_map(shapes[src]);
                let (_, oh, ow) = expect_map(shapes[idx]);
                let x = &ctx.activations[src];
                let mut out = vec![T::zero(); c * oh * ow];
                let mut argmax = vec![0usize; c * oh * ow];
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = T::neg_infinity();
                            let mut best_idx = 0usize;
                            for ky in 0..*kernel {
                                let iy = oy * stride + ky;
                                for kx in 0..*kernel {
                                    let ix = ox * stride + kx;
                                    let flat = (ch * ih + iy) * iw + ix;
                                    // strict greater keeps the first of tied maxima
                                    if x[flat] > best {
                                        best = x[flat];
                                        best_idx = flat;
                                    }
                                }
                            }
                            let o = (ch * oh + oy) * ow + ox;
                            out[o] = best;
                            argmax[o] = best_idx;
                        }
                    }
                }
                ctx.pool_argmax[idx] = Some(argmax);
                out
            }
            LayerKind::Concat => {
                let mut out = Vec::with_capacity(shapes[idx].numel());
                for &src in &deps[idx] {
                    out.extend_from_slice(&ctx.activations[src]);
                }
                out
            }
            LayerKind::Dense { units } => {
                let src = deps[idx][0];
                let f = ctx.activations[src].len();
                let weight = graph.weight(&format!("{}.w", node.name)).expect("dense weight");
                let bias = graph.weight(&format!("{}.b", node.name)).expect("dense bias");
                let mut out = bias.data().to_vec();
                let x = &ctx.activations[src];
                for fi in 0..f {
                    let xv = x[fi];
                    if xv == T::zero() {
                        continue;
                    }
                    let w_row = &weight.data()[fi * units..(fi + 1) * units];
                    for (o, &wv) in out.iter_mut().zip(w_row) {
                        *o = xv.mul_add(wv, *o);
                    }
                }
                out
            }
            LayerKind::Relu => ctx.activations[deps[idx][0]]
                .iter()
                .map(|&v| if v > T::zero() { v } else { T::zero() })
                .collect(),
            LayerKind::Sigmoid => ctx.activations[deps[idx][0]]
                .iter()
                .map(|&v| T::one() / (T::one() + (-v).exp()))
                .collect(),
            LayerKind::Dropout { p } => {
                let src = deps[idx][0];
                match mode {
                    Mode::Eval => ctx.activations[src].clone(),
                    Mode::Train => {
                        let mut rng = seeds::rng(seeds::derive_indexed(
                            seed,
                            &format!("dropout:{}", node.name),
                            sample_index,
                        ));
                        let keep_scale = T::from_f64(1.0 / (1.0 - p));
                        let mask: Vec<T> = (0..ctx.activations[src].len())
                            .map(|_| {
                                if rng.random::<f64>() < *p {
                                    T::zero()
                                } else {
                                    keep_scale
                                }
                            })
                            .collect();
                        let out = ctx.activations[src]
                            .iter()
                            .zip(&mask)
                            .map(|(&v, &m)| v * m)
                            .collect();
                        ctx.dropout_masks[idx] = Some(mask);
                        out
                    }
                }
            }
            LayerKind::GlobalAvgPool => {
                let src = deps[idx][0];
                let (c, h, w) = expect_map(shapes[src]);
                let x = &ctx.activations[src];
                let inv = T::from_f64(1.0 / (h * w) as f64);
                (0..c)
                    .map(|ch| {
                        let mut acc = T::zero();
                        for &v in &x[ch * h * w..(ch + 1) * h * w] {
                            acc = acc + v;
                        }
                        acc * inv
                    })
                    .collect()
            }
            LayerKind::Flatten => ctx.activations[deps[idx][0]].clone(),
        };
        debug_assert_eq!(out.len(), shapes[idx].numel(), "node {}", node.name);
        ctx.activations[idx] = out;
    }
    Ok(ctx)
}

/// Mean-squared-error backward pass over a batch of forward contexts.
///
/// Returns the batch loss and the gradients of the loss with respect to
/// every weight, accumulated over samples in batch order.
pub fn backward<T: Scalar>(
    graph: &ModelGraph<T>,
    contexts: &[SampleContext<T>],
    targets: &Tensor<T>,
) -> Result<(f64, Gradients<T>), NnError> {
    let n = contexts.len();
    if targets.shape() != [n, 1] {
        return Err(NnError::Tensor(format!(
            "targets shape {:?} does not match batch of {n}",
            targets.shape()
        )));
    }
    if n == 0 {
        return Err(NnError::Dataset("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(graph);
    let mut loss = 0.0f64;
    let inv_n = 1.0 / n as f64;
    for (i, ctx) in contexts.iter().enumerate() {
        if ctx.mode != Mode::Train {
            return Err(NnError::Graph(
                "backward requires contexts from a train-mode forward pass".into(),
            ));
        }
        let pred = ctx.output(graph).as_f64();
        let t = targets.data()[i].as_f64();
        loss += (pred - t) * (pred - t) * inv_n;
        let dpred = T::from_f64(2.0 * (pred - t) * inv_n);
        backward_sample(graph, ctx, dpred, &mut grads);
    }
    Ok((loss, grads))
}

fn backward_sample<T: Scalar>(
    graph: &ModelGraph<T>,
    ctx: &SampleContext<T>,
    d_output: T,
    grads: &mut Gradients<T>,
) {
    let nodes = graph.nodes();
    let shapes = graph.shapes();
    let deps = graph.input_indices();
    let mut node_grads: Vec<Option<Vec<T>>> = vec![None; nodes.len()];
    let out_idx = graph.node_index(graph.output_node()).expect("output exists");
    node_grads[out_idx] = Some(vec![d_output]);

    for idx in (0..nodes.len()).rev() {
        let Some(dout) = node_grads[idx].take() else {
            continue;
        };
        let node = &nodes[idx];
        match &node.kind {
            LayerKind::Input => {}
            LayerKind::Conv2d { kernel, stride, pad, .. } => {
                let src = deps[idx][0];
                let (ic, ih, iw) = expect_map(shapes[src]);
                let (oc, oh, ow) = expect_map(shapes[idx]);
                let s = oh * ow;
                let weight = graph.weight(&format!("{}.w", node.name)).expect("conv weight");

                // bias gradient: row sums of dout
                {
                    let db = grads.buf_mut(&format!("{}.b", node.name));
                    for ch in 0..oc {
                        let mut acc = T::zero();
                        for &v in &dout[ch * s..(ch + 1) * s] {
                            acc = acc + v;
                        }
                        db[ch] = db[ch] + acc;
                    }
                }

                let geom = ConvGeom {
                    ic,
                    ih,
                    iw,
                    oc,
                    oh,
                    ow,
                    kernel: *kernel,
                    stride: *stride,
                    pad: *pad,
                };
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                conv_backward(
                    &geom,
                    &ctx.activations[src],
                    weight.data(),
                    &dout,
                    grads.buf_mut(&format!("{}.w", node.name)),
                    dx,
                );
            }
            LayerKind::MaxPool { .. } => {
                let src = deps[idx][0];
                let argmax = ctx.pool_argmax[idx].as_ref().expect("pool context");
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                for (o, &flat) in argmax.iter().enumerate() {
                    dx[flat] = dx[flat] + dout[o];
                }
            }
            LayerKind::Concat => {
                let mut offset = 0;
                for &src in &deps[idx] {
                    let len = shapes[src].numel();
                    let dx = acc_buffer(&mut node_grads[src], len);
                    for (d, &g) in dx.iter_mut().zip(&dout[offset..offset + len]) {
                        *d = *d + g;
                    }
                    offset += len;
                }
            }
            LayerKind::Dense { units } => {
                let src = deps[idx][0];
                let x = &ctx.activations[src];
                let f = x.len();
                let weight = graph.weight(&format!("{}.w", node.name)).expect("dense weight");
                {
                    let db = grads.buf_mut(&format!("{}.b", node.name));
                    for (d, &g) in db.iter_mut().zip(&dout) {
                        *d = *d + g;
                    }
                }
                {
                    let dw = grads.buf_mut(&format!("{}.w", node.name));
                    for fi in 0..f {
                        let xv = x[fi];
                        if xv == T::zero() {
                            continue;
                        }
                        let row = &mut dw[fi * units..(fi + 1) * units];
                        for (d, &g) in row.iter_mut().zip(&dout) {
                            *d = xv.mul_add(g, *d);
                        }
                    }
                }
                let dx = acc_buffer(&mut node_grads[src], f);
                for fi in 0..f {
                    let w_row = &weight.data()[fi * units..(fi + 1) * units];
                    let mut acc = T::zero();
                    for (&wv, &g) in w_row.iter().zip(&dout) {
                        acc = wv.mul_add(g, acc);
                    }
                    dx[fi] = dx[fi] + acc;
                }
            }
            LayerKind::Relu => {
                let src = deps[idx][0];
                let y = &ctx.activations[idx];
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                for i in 0..dx.len() {
                    if y[i] > T::zero() {
                        dx[i] = dx[i] + dout[i];
                    }
                }
            }
            LayerKind::Sigmoid => {
                let src = deps[idx][0];
                let y = &ctx.activations[idx];
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                for i in 0..dx.len() {
                    let s = y[i];
                    dx[i] = dx[i] + dout[i] * s * (T::one() - s);
                }
            }
            LayerKind::Dropout { .. } => {
                let src = deps[idx][0];
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                match (ctx.mode, ctx.dropout_masks[idx].as_ref()) {
                    (Mode::Train, Some(mask)) => {
                        for i in 0..dx.len() {
                            dx[i] = dout[i].mul_add(mask[i], dx[i]);
                        }
                    }
                    _ => {
                        for i in 0..dx.len() {
                            dx[i] = dx[i] + dout[i];
                        }
                    }
                }
            }
            LayerKind::GlobalAvgPool => {
                let src = deps[idx][0];
                let (c, h, w) = expect_map(shapes[src]);
                let inv = T::from_f64(1.0 / (h * w) as f64);
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                for ch in 0..c {
                    let g = dout[ch] * inv;
                    for d in &mut dx[ch * h * w..(ch + 1) * h * w] {
                        *d = *d + g;
                    }
                }
            }
            LayerKind::Flatten => {
                let src = deps[idx][0];
                let dx = acc_buffer(&mut node_grads[src], shapes[src].numel());
                for (d, &g) in dx.iter_mut().zip(&dout) {
                    *d = *d + g;
                }
            }
        }
    }
}

fn acc_buffer<T: Scalar>(slot: &mut Option<Vec<T>>, len: usize) -> &mut [T] {
    slot.get_or_insert_with(|| vec![T::zero(); len]).as_mut_slice()
}

fn expect_map(shape: NodeShape) -> (usize, usize, usize) {
    match shape {
        NodeShape::Map { c, h, w } => (c, h, w),
        NodeShape::Vector { .. } => unreachable!("validated at graph build"),
    }
}

struct ConvGeom {
    ic: usize,
    ih: usize,
    iw: usize,
    oc: usize,
    oh: usize,
    ow: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn k2(&self) -> usize {
        self.ic * self.kernel * self.kernel
    }

    /// Output rows per tile, sized so one unfolded row strip (~512
    /// values) stays register/L1 resident.
    fn tile_rows(&self) -> usize {
        (512 / self.ow).clamp(1, self.oh)
    }
}

/// Implicit-GEMM convolution: per output-row strip, each unfolded row of
/// the input is built into a small cache-resident tile and immediately
/// consumed by all output channels, so the full unfolded matrix never
/// materializes.
fn conv_forward<T: Scalar>(geom: &ConvGeom, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let (oc, oh, ow) = (geom.oc, geom.oh, geom.ow);
    let k2 = geom.k2();
    let s = oh * ow;
    let strip = geom.tile_rows();
    let jw_max = strip * ow;
    let mut tile = vec![T::zero(); jw_max];
    let mut acc = vec![T::zero(); oc * jw_max];
    let mut out = vec![T::zero(); oc * s];
    let mut oy0 = 0;
    while oy0 < oh {
        let oy1 = (oy0 + strip).min(oh);
        let jw = (oy1 - oy0) * ow;
        acc[..oc * jw].fill(T::zero());
        for l in 0..k2 {
            unfold_row(geom, input, l, oy0, oy1, &mut tile[..jw]);
            for (r, row) in acc.chunks_exact_mut(jw).take(oc).enumerate() {
                let wv = weight[r * k2 + l];
                if wv == T::zero() {
                    continue;
                }
                for (x, &bv) in row.iter_mut().zip(&tile[..jw]) {
                    *x = wv.mul_add(bv, *x);
                }
            }
        }
        for ch in 0..oc {
            let b = bias[ch];
            let dst = &mut out[ch * s + oy0 * ow..ch * s + oy0 * ow + jw];
            for (o, &x) in dst.iter_mut().zip(&acc[ch * jw..(ch + 1) * jw]) {
                *o = x + b;
            }
        }
        oy0 = oy1;
    }
    out
}

/// Fused backward, same tiling as the forward pass. Per unfolded row l:
/// `dW[r][l] += dot(dout row r, tile)` and
/// `dx += fold(sum_r w[r][l] * dout row r)`.
fn conv_backward<T: Scalar>(
    geom: &ConvGeom,
    input: &[T],
    weight: &[T],
    dout: &[T],
    dw: &mut [T],
    dx: &mut [T],
) {
    let (oc, oh, ow) = (geom.oc, geom.oh, geom.ow);
    let k2 = geom.k2();
    let s = oh * ow;
    let strip = geom.tile_rows();
    let jw_max = strip * ow;
    let mut tile = vec![T::zero(); jw_max];
    let mut dtile = vec![T::zero(); jw_max];
    let mut oy0 = 0;
    while oy0 < oh {
        let oy1 = (oy0 + strip).min(oh);
        let jw = (oy1 - oy0) * ow;
        for l in 0..k2 {
            unfold_row(geom, input, l, oy0, oy1, &mut tile[..jw]);
            dtile[..jw].fill(T::zero());
            for r in 0..oc {
                let g_seg = &dout[r * s + oy0 * ow..r * s + oy0 * ow + jw];
                dw[r * k2 + l] = dw[r * k2 + l] + dot(g_seg, &tile[..jw]);
                let wv = weight[r * k2 + l];
                if wv != T::zero() {
                    for (d, &g) in dtile[..jw].iter_mut().zip(g_seg) {
                        *d = wv.mul_add(g, *d);
                    }
                }
            }
            fold_row(geom, &dtile[..jw], l, oy0, oy1, dx);
        }
        oy0 = oy1;
    }
}

/// Sixteen-lane partial-sum dot product with a fixed reduction order.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 16];
    let chunks = a.len() / 16;
    for c in 0..chunks {
        let ac = &a[c * 16..c * 16 + 16];
        let bc = &b[c * 16..c * 16 + 16];
        for lane in 0..16 {
            acc[lane] = ac[lane].mul_add(bc[lane], acc[lane]);
        }
    }
    let mut tail = T::zero();
    for idx in chunks * 16..a.len() {
        tail = a[idx].mul_add(b[idx], tail);
    }
    let mut width = 8;
    while width > 0 {
        for lane in 0..width {
            acc[lane] = acc[lane] + acc[lane + width];
        }
        width /= 2;
    }
    acc[0] + tail
}

/// Build one row of the implicitly unfolded input for output rows
/// `oy0..oy1`: row `l` indexes `(channel, ky, kx)` of the kernel window.
fn unfold_row<T: Scalar>(geom: &ConvGeom, input: &[T], l: usize, oy0: usize, oy1: usize, tile: &mut [T]) {
    let ConvGeom {
        ic: _,
        ih,
        iw,
        ow,
        kernel: k,
        stride,
        pad,
        ..
    } = *geom;
    let kx = l % k;
    let ky = (l / k) % k;
    let c = l / (k * k);
    for oy in oy0..oy1 {
        let local = oy - oy0;
        let iy = (oy * stride + ky) as isize - pad as isize;
        let dst = &mut tile[local * ow..(local + 1) * ow];
        if iy < 0 || iy >= ih as isize {
            dst.fill(T::zero());
            continue;
        }
        let iy = iy as usize;
        if stride == 1 {
            // contiguous span with zero fringes
            let shift = kx as isize - pad as isize;
            let ox_lo = (-shift).max(0) as usize;
            let ox_hi = ((iw as isize - shift).clamp(0, ow as isize)) as usize;
            dst[..ox_lo.min(ow)].fill(T::zero());
            if ox_lo < ox_hi {
                let src_start = (ox_lo as isize + shift) as usize;
                let src = &input[(c * ih + iy) * iw + src_start..];
                dst[ox_lo..ox_hi].copy_from_slice(&src[..ox_hi - ox_lo]);
            }
            if ox_hi < ow {
                dst[ox_hi.max(ox_lo)..].fill(T::zero());
            }
        } else {
            for ox in 0..ow {
                let ix = (ox * stride + kx) as isize - pad as isize;
                dst[ox] = if ix >= 0 && ix < iw as isize {
                    input[(c * ih + iy) * iw + ix as usize]
                } else {
                    T::zero()
                };
            }
        }
    }
}

/// Scatter-add one unfolded gradient row back onto the input raster.
fn fold_row<T: Scalar>(geom: &ConvGeom, dtile: &[T], l: usize, oy0: usize, oy1: usize, dx: &mut [T]) {
    let ConvGeom {
        ih,
        iw,
        ow,
        kernel: k,
        stride,
        pad,
        ..
    } = *geom;
    let kx = l % k;
    let ky = (l / k) % k;
    let c = l / (k * k);
    for oy in oy0..oy1 {
        let local = oy - oy0;
        let iy = (oy * stride + ky) as isize - pad as isize;
        if iy < 0 || iy >= ih as isize {
            continue;
        }
        let iy = iy as usize;
        let src = &dtile[local * ow..(local + 1) * ow];
        if stride == 1 {
            let shift = kx as isize - pad as isize;
            let ox_lo = (-shift).max(0) as usize;
            let ox_hi = ((iw as isize - shift).clamp(0, ow as isize)) as usize;
            if ox_lo < ox_hi {
                let dst_start = (ox_lo as isize + shift) as usize;
                let dst = &mut dx[(c * ih + iy) * iw + dst_start..];
                for (d, &g) in dst[..ox_hi - ox_lo].iter_mut().zip(&src[ox_lo..ox_hi]) {
                    *d = *d + g;
                }
            }
        } else {
            for ox in 0..ow {
                let ix = (ox * stride + kx) as isize - pad as isize;
                if ix >= 0 && ix < iw as isize {
                    let flat = (c * ih + iy) * iw + ix as usize;
                    dx[flat] = dx[flat] + src[ox];
                }
            }
        }
    }
}
