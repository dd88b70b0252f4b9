//! Forward and analytic backward passes over a validated layer stack.
//!
//! Convolutions lower each sample to an im2col matrix and run a row-blocked
//! product; every reduction has a fixed order, so results are bit-identical
//! between runs.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

use super::params::{Gradients, LayerParams, Parameters};
use super::spec::{ActShape, LayerSpec, NetworkSpec};
use super::tensor::Tensor;

/// Per-layer state retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Conv { cols: Vec<T>, c: usize, h: usize, w: usize, oh: usize, ow: usize },
    Relu { mask: Vec<bool> },
    Pool { argmax: Vec<u32>, in_len: usize },
    Flatten { in_shape: Vec<usize> },
    Dense { input: Vec<T> },
}

#[derive(Debug, Clone)]
pub struct Cache<T> {
    batch: usize,
    kinds: Vec<&'static str>,
    layers: Vec<LayerCache<T>>,
}

impl<T> Cache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// ReLU masks and max-pool routes: the piecewise-linear region the forward pass landed in.
    pub fn activation_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerCache::Relu { mask } => out.extend(mask.iter().map(|&b| b as u32)),
                LayerCache::Pool { argmax, .. } => out.extend_from_slice(argmax),
                _ => {}
            }
        }
        out
    }
}

fn check_params<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>) -> Result<()> {
    let learnable: Vec<usize> = spec.layers.iter().enumerate().filter(|(_, l)| l.is_learnable()).map(|(i, _)| i).collect();
    if learnable.len() != params.layers.len() {
        return Err(Error::ShapeMismatch {
            layer: learnable.get(params.layers.len()).copied().unwrap_or(spec.layers.len()),
            detail: format!("spec has {} learnable layers, parameters have {}", learnable.len(), params.layers.len()),
        });
    }
    for (&i, p) in learnable.iter().zip(&params.layers) {
        let (w, b, _) = spec.layers[i].param_shapes().expect("learnable");
        if p.layer != i || p.weight.shape() != w.as_slice() || p.bias.shape() != b.as_slice() {
            return Err(Error::ShapeMismatch {
                layer: i,
                detail: format!("expected weight {w:?} bias {b:?}, got {:?} {:?}", p.weight.shape(), p.bias.shape()),
            });
        }
    }
    Ok(())
}

fn check_input<T: Scalar>(spec: &NetworkSpec, batch: &Tensor<T>) -> Result<()> {
    let [c, h, w] = spec.input;
    if batch.shape().len() != 4 || batch.shape()[1..] != [c, h, w] {
        return Err(Error::ShapeMismatch {
            layer: 0,
            detail: format!("input batch {:?} does not match [B, {c}, {h}, {w}]", batch.shape()),
        });
    }
    Ok(())
}

/// Runs the network; `logits` has shape `[B, classes]`.
pub fn forward<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, batch: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
    let (out, cache) = run(spec, params, batch, true, None)?;
    Ok((out, cache.expect("cache requested")))
}

/// Forward pass without retaining backward state.
pub fn infer<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(run(spec, params, batch, false, None)?.0)
}

/// Output of every layer (index `i` holds the output of layer `i`).
pub fn forward_trace<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, batch: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let mut trace = Vec::with_capacity(spec.layers.len());
    run(spec, params, batch, false, Some(&mut trace))?;
    Ok(trace)
}

fn run<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    batch: &Tensor<T>,
    keep: bool,
    mut trace: Option<&mut Vec<Tensor<T>>>,
) -> Result<(Tensor<T>, Option<Cache<T>>)> {
    let shapes = spec.validate()?;
    check_params(spec, params)?;
    check_input(spec, batch)?;
    let b = batch.batch();
    let mut caches = Vec::with_capacity(if keep { spec.layers.len() } else { 0 });
    let mut x = batch.clone();
    let mut in_shape = spec.input_shape();
    let mut pi = 0;
    for (i, layer) in spec.layers.iter().enumerate() {
        let p = if layer.is_learnable() {
            pi += 1;
            Some(&params.layers[pi - 1])
        } else {
            None
        };
        let (y, cache) = layer_forward(layer, p, x, in_shape, shapes[i], b, keep)?;
        if let Some(c) = cache {
            caches.push(c);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(y.clone());
        }
        x = y;
        in_shape = shapes[i];
    }
    let cache = keep.then(|| Cache { batch: b, kinds: spec.layers.iter().map(LayerSpec::kind).collect(), layers: caches });
    Ok((x, cache))
}

#[allow(clippy::too_many_arguments)]
fn layer_forward<T: Scalar>(
    layer: &LayerSpec,
    p: Option<&LayerParams<T>>,
    x: Tensor<T>,
    in_shape: ActShape,
    out_shape: ActShape,
    b: usize,
    keep: bool,
) -> Result<(Tensor<T>, Option<LayerCache<T>>)> {
    match *layer {
        LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            let p = p.expect("conv params");
            let (ActShape::Spatial { h, w, .. }, ActShape::Spatial { h: oh, w: ow, .. }) = (in_shape, out_shape) else {
                unreachable!("validated")
            };
            let kk = in_ch * kernel * kernel;
            let np = oh * ow;
            let in_len = in_ch * h * w;
            let mut out = vec![T::zero(); b * out_ch * np];
            let mut cols = vec![T::zero(); if keep { b * kk * np } else { kk * np }];
            for s in 0..b {
                let cs = if keep { &mut cols[s * kk * np..(s + 1) * kk * np] } else { &mut cols[..] };
                im2col(&x.data()[s * in_len..(s + 1) * in_len], in_ch, h, w, kernel, stride, padding, oh, ow, cs);
                let o = &mut out[s * out_ch * np..(s + 1) * out_ch * np];
                for (co, row) in o.chunks_exact_mut(np).enumerate() {
                    row.fill(p.bias.data()[co]);
                }
                gemm_acc(p.weight.data(), cs, o, out_ch, kk, np);
            }
            let cache = keep.then_some(LayerCache::Conv { cols, c: in_ch, h, w, oh, ow });
            Ok((Tensor::new(out_shape.batched(b), out)?, cache))
        }
        LayerSpec::Relu => {
            let shape = x.shape().to_vec();
            let mut data = x.into_data();
            let mask = keep.then(|| data.iter().map(|v| *v > T::zero()).collect());
            for v in data.iter_mut() {
                if !(*v > T::zero()) {
                    *v = T::zero();
                }
            }
            Ok((Tensor::new(shape, data)?, mask.map(|mask| LayerCache::Relu { mask })))
        }
        LayerSpec::MaxPool2 => {
            let (ActShape::Spatial { c, h, w }, ActShape::Spatial { h: oh, w: ow, .. }) = (in_shape, out_shape) else {
                unreachable!("validated")
            };
            let xd = x.data();
            let mut out = vec![T::zero(); b * c * oh * ow];
            let mut argmax = vec![0u32; if keep { out.len() } else { 0 }];
            let mut o = 0;
            for plane in 0..b * c {
                let base = plane * h * w;
                for y in 0..oh {
                    for xx in 0..ow {
                        let i0 = base + 2 * y * w + 2 * xx;
                        // row-major window scan; ties keep the first index
                        let mut best = i0;
                        for cand in [i0 + 1, i0 + w, i0 + w + 1] {
                            if xd[cand] > xd[best] {
                                best = cand;
                            }
                        }
                        out[o] = xd[best];
                        if keep {
                            argmax[o] = best as u32;
                        }
                        o += 1;
                    }
                }
            }
            let cache = keep.then(|| LayerCache::Pool { argmax, in_len: x.len() });
            Ok((Tensor::new(out_shape.batched(b), out)?, cache))
        }
        LayerSpec::Flatten => {
            let in_shape = x.shape().to_vec();
            let y = x.reshape(out_shape.batched(b))?;
            Ok((y, keep.then_some(LayerCache::Flatten { in_shape })))
        }
        LayerSpec::Dense { in_dim, out_dim } => {
            let p = p.expect("dense params");
            let wd = p.weight.data();
            let mut out = vec![T::zero(); b * out_dim];
            for o in 0..out_dim {
                let wr = &wd[o * in_dim..(o + 1) * in_dim];
                let bias = p.bias.data()[o];
                for s in 0..b {
                    out[s * out_dim + o] = dot(wr, x.row(s)) + bias;
                }
            }
            let cache = keep.then(|| LayerCache::Dense { input: x.into_data() });
            Ok((Tensor::new(vec![b, out_dim], out)?, cache))
        }
    }
}

/// Exact gradients of the loss whose logit gradient is `dlogits`.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    cache: &Cache<T>,
    dlogits: &Tensor<T>,
) -> Result<Gradients<T>> {
    let shapes = spec.validate()?;
    check_params(spec, params)?;
    let kinds: Vec<&str> = spec.layers.iter().map(LayerSpec::kind).collect();
    if cache.kinds != kinds || cache.layers.len() != spec.layers.len() {
        return Err(Error::StaleCache("cache was produced by a different network spec".into()));
    }
    let b = cache.batch;
    let out_dim = shapes.last().map(|s| s.size()).unwrap_or(0);
    if dlogits.shape() != [b, out_dim] {
        return Err(Error::StaleCache(format!(
            "dlogits shape {:?} does not match cached batch [{b}, {out_dim}]",
            dlogits.shape()
        )));
    }

    let mut grads = Parameters::<T>::zeros_like(spec)?;
    let mut dy = dlogits.data().to_vec();
    let mut gi = grads.layers.len();
    for i in (0..spec.layers.len()).rev() {
        let need_dx = i > 0;
        let layer = &spec.layers[i];
        match (layer, &cache.layers[i]) {
            (&LayerSpec::Conv2d { out_ch, kernel, stride, padding, .. }, LayerCache::Conv { cols, c, h, w, oh, ow }) => {
                gi -= 1;
                let p = &params.layers[gi];
                let g = &mut grads.layers[gi];
                let (c, h, w, oh, ow) = (*c, *h, *w, *oh, *ow);
                let kk = c * kernel * kernel;
                let np = oh * ow;
                let in_len = c * h * w;
                let mut dx = if need_dx { vec![T::zero(); b * in_len] } else { Vec::new() };
                let mut dcols = vec![T::zero(); if need_dx { kk * np } else { 0 }];
                for s in 0..b {
                    let cs = &cols[s * kk * np..(s + 1) * kk * np];
                    let d = &dy[s * out_ch * np..(s + 1) * out_ch * np];
                    for (co, drow) in d.chunks_exact(np).enumerate() {
                        g.bias.data_mut()[co] += drow.iter().copied().sum::<T>();
                    }
                    gemm_nt_acc(d, cs, g.weight.data_mut(), out_ch, kk, np);
                    if need_dx {
                        dcols.fill(T::zero());
                        gemm_tn_acc(p.weight.data(), d, &mut dcols, out_ch, kk, np);
                        col2im(&dcols, c, h, w, kernel, stride, padding, oh, ow, &mut dx[s * in_len..(s + 1) * in_len]);
                    }
                }
                dy = dx;
            }
            (LayerSpec::Relu, LayerCache::Relu { mask }) => {
                for (v, &m) in dy.iter_mut().zip(mask) {
                    if !m {
                        *v = T::zero();
                    }
                }
            }
            (LayerSpec::MaxPool2, LayerCache::Pool { argmax, in_len }) => {
                let mut dx = vec![T::zero(); *in_len];
                for (&idx, &g) in argmax.iter().zip(&dy) {
                    dx[idx as usize] += g;
                }
                dy = dx;
            }
            (LayerSpec::Flatten, LayerCache::Flatten { .. }) => {}
            (&LayerSpec::Dense { in_dim, out_dim }, LayerCache::Dense { input }) => {
                gi -= 1;
                let p = &params.layers[gi];
                let g = &mut grads.layers[gi];
                let wd = p.weight.data();
                let mut dx = if need_dx { vec![T::zero(); b * in_dim] } else { Vec::new() };
                for o in 0..out_dim {
                    let gw = &mut g.weight.data_mut()[o * in_dim..(o + 1) * in_dim];
                    let mut gb = T::zero();
                    for s in 0..b {
                        let d = dy[s * out_dim + o];
                        gb += d;
                        axpy(d, &input[s * in_dim..(s + 1) * in_dim], gw);
                    }
                    g.bias.data_mut()[o] += gb;
                }
                if need_dx {
                    for s in 0..b {
                        let dxs = &mut dx[s * in_dim..(s + 1) * in_dim];
                        for o in 0..out_dim {
                            axpy(dy[s * out_dim + o], &wd[o * in_dim..(o + 1) * in_dim], dxs);
                        }
                    }
                }
                dy = dx;
            }
            _ => return Err(Error::StaleCache(format!("cache entry {i} does not match layer kind"))),
        }
    }
    Ok(grads)
}

/// Lowers one `[c, h, w]` sample to a `[c·k·k, oh·ow]` patch matrix (zero padding).
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, oh: usize, ow: usize, cols: &mut [T]) {
    let np = oh * ow;
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * np..][..np];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a patch-matrix gradient back onto the `[c, h, w]` input gradient.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(dcols: &[T], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, oh: usize, ow: usize, dx: &mut [T]) {
    let np = oh * ow;
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &dcols[((ci * k + ky) * k + kx) * np..][..np];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &g) in row[oy * ow..(oy + 1) * ow].iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`, four output rows per pass over `b`.
fn gemm_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    let mut r = 0;
    while r + 4 <= m {
        let (o0, rest) = out[r * n..].split_at_mut(n);
        let (o1, rest) = rest.split_at_mut(n);
        let (o2, rest) = rest.split_at_mut(n);
        let o3 = &mut rest[..n];
        for kk in 0..k {
            let (a0, a1, a2, a3) = (a[r * k + kk], a[(r + 1) * k + kk], a[(r + 2) * k + kk], a[(r + 3) * k + kk]);
            let bk = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                let v = bk[j];
                o0[j] += a0 * v;
                o1[j] += a1 * v;
                o2[j] += a2 * v;
                o3[j] += a3 * v;
            }
        }
        r += 4;
    }
    for r in r..m {
        let o = &mut out[r * n..(r + 1) * n];
        for kk in 0..k {
            axpy(a[r * k + kk], &b[kk * n..(kk + 1) * n], o);
        }
    }
}

/// `out[m×k] += a[m×n] · b[k×n]ᵀ` (row-by-row dot products).
fn gemm_nt_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let ar = &a[r * n..(r + 1) * n];
        for kk in 0..k {
            out[r * k + kk] += dot(ar, &b[kk * n..(kk + 1) * n]);
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`, four `b` rows per pass over each output row.
fn gemm_tn_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let o = &mut out[kk * n..(kk + 1) * n];
        let mut r = 0;
        while r + 4 <= m {
            let (a0, a1, a2, a3) = (a[r * k + kk], a[(r + 1) * k + kk], a[(r + 2) * k + kk], a[(r + 3) * k + kk]);
            let b0 = &b[r * n..(r + 1) * n];
            let b1 = &b[(r + 1) * n..(r + 2) * n];
            let b2 = &b[(r + 2) * n..(r + 3) * n];
            let b3 = &b[(r + 3) * n..(r + 4) * n];
            for j in 0..n {
                o[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
            }
            r += 4;
        }
        for r in r..m {
            axpy(a[r * k + kk], &b[r * n..(r + 1) * n], o);
        }
    }
}
