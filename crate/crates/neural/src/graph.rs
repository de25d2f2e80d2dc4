// SPDX-License-Identifier: Apache-2.0

//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every operation appends a node; [`Graph::backward`] walks the tape in
//! reverse. Values that do not depend on a tracked leaf carry no gradient.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

struct ConvGeom {
    n: usize,
    h: usize,
    w: usize,
    ci: usize,
    ho: usize,
    wo: usize,
    co: usize,
    stride: usize,
}

enum Op {
    Leaf,
    Conv {
        x: usize,
        w: usize,
        b: usize,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    Linear {
        x: usize,
        w: usize,
        b: usize,
    },
    Silu(usize),
    Clamp {
        x: usize,
        lo: f64,
        hi: f64,
    },
    /// Forward value replaced, gradient passed through unchanged.
    StraightThrough(usize),
    Add(usize, usize),
    LinComb {
        a: usize,
        ca: f64,
        b: usize,
        cb: f64,
    },
    ChannelBias {
        x: usize,
        bias: usize,
    },
    Upsample {
        x: usize,
    },
    Concat {
        a: usize,
        b: usize,
    },
    AvgPool(usize),
    SquaredError {
        x: usize,
        target: Vec<f64>,
        scale: f64,
    },
}

struct Node {
    value: Tensor,
    tracked: bool,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every tracked node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads[v.0].take()
    }
}

/// `c[m, n] = a[m, k] · b[k, n] + beta · c` with arbitrary input strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the caller passes slices covering every element addressed by
    // the given dimensions and strides; `c` is exclusive and contiguous.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let k = 9 * g.ci;
    let mut cols = vec![0.0; g.n * g.ho * g.wo * k];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let row = ((n * g.ho + oy) * g.wo + ox) * k;
                for ky in 0..3 {
                    let iy = (oy * g.stride + ky) as isize - 1;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * g.stride + kx) as isize - 1;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let src = ((n * g.h + iy as usize) * g.w + ix as usize) * g.ci;
                        let dst = row + (ky * 3 + kx) * g.ci;
                        cols[dst..dst + g.ci].copy_from_slice(&x[src..src + g.ci]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let k = 9 * g.ci;
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let row = ((n * g.ho + oy) * g.wo + ox) * k;
                for ky in 0..3 {
                    let iy = (oy * g.stride + ky) as isize - 1;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * g.stride + kx) as isize - 1;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let dst = ((n * g.h + iy as usize) * g.w + ix as usize) * g.ci;
                        let src = row + (ky * 3 + kx) * g.ci;
                        for c in 0..g.ci {
                            dx[dst + c] += cols[src + c];
                        }
                    }
                }
            }
        }
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

fn accumulate_owned(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, inputs: &[usize], op: Op) -> Var {
        let tracked = inputs.iter().any(|&i| self.nodes[i].tracked);
        self.nodes.push(Node { value, tracked, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf; gradients are only propagated towards tracked leaves.
    pub fn leaf(&mut self, value: Tensor, tracked: bool) -> Var {
        self.nodes.push(Node {
            value,
            tracked,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// 3×3 convolution with zero padding 1. `x: [N, H, W, Ci]`,
    /// `w: [Co, 3, 3, Ci]`, `b: [Co]`.
    pub fn conv3x3(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if xs.len() != 4 || ws.len() != 4 || ws[1] != 3 || ws[2] != 3 || ws[3] != xs[3] || stride == 0 {
            return Err(Error::Shape(format!("conv3x3 input {xs:?} with kernel {ws:?}")));
        }
        if self.shape(b) != [ws[0]] {
            return Err(Error::Shape(format!("conv bias {:?} for {} outputs", self.shape(b), ws[0])));
        }
        let geom = ConvGeom {
            n: xs[0],
            h: xs[1],
            w: xs[2],
            ci: xs[3],
            ho: (xs[1] - 1) / stride + 1,
            wo: (xs[2] - 1) / stride + 1,
            co: ws[0],
            stride,
        };
        let cols = im2col(&self.value(x).data, &geom);
        let rows = geom.n * geom.ho * geom.wo;
        let k = 9 * geom.ci;
        let bias = &self.value(b).data;
        let mut out = Vec::with_capacity(rows * geom.co);
        for _ in 0..rows {
            out.extend_from_slice(bias);
        }
        gemm(rows, k, geom.co, &cols, (k, 1), &self.value(w).data, (1, k), 1.0, &mut out);
        let value = Tensor {
            shape: vec![geom.n, geom.ho, geom.wo, geom.co],
            data: out,
        };
        Ok(self.push(
            value,
            &[x.0, w.0, b.0],
            Op::Conv {
                x: x.0,
                w: w.0,
                b: b.0,
                geom,
                cols,
            },
        ))
    }

    /// `x: [N, F]`, `w: [O, F]`, `b: [O]` to `[N, O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if xs.len() != 2 || ws.len() != 2 || ws[1] != xs[1] || self.shape(b) != [ws[0]] {
            return Err(Error::Shape(format!("linear input {xs:?} with weight {ws:?}")));
        }
        let (n, f, o) = (xs[0], xs[1], ws[0]);
        let bias = &self.value(b).data;
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(bias);
        }
        gemm(n, f, o, &self.value(x).data, (f, 1), &self.value(w).data, (1, f), 1.0, &mut out);
        Ok(self.push(Tensor { shape: vec![n, o], data: out }, &[x.0, w.0, b.0], Op::Linear { x: x.0, w: w.0, b: b.0 }))
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| a * sigmoid(a)).collect(),
        };
        self.push(value, &[x.0], Op::Silu(x.0))
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient is zero where the
    /// input lies outside.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(x);
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| a.clamp(lo, hi)).collect(),
        };
        self.push(value, &[x.0], Op::Clamp { x: x.0, lo, hi })
    }

    /// Clamp in the forward pass, identity in the backward pass.
    pub fn clamp_straight_through(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(x);
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| a.clamp(lo, hi)).collect(),
        };
        self.push(value, &[x.0], Op::StraightThrough(x.0))
    }

    /// Sets the entries flagged in `pinned` to `value` in the forward pass
    /// (one flag per item element, repeated over the batch); identity in the
    /// backward pass.
    pub fn pin_straight_through(&mut self, x: Var, pinned: &[bool], value: f64) -> Result<Var> {
        let v = self.value(x);
        if pinned.is_empty() || !v.data.len().is_multiple_of(pinned.len()) {
            return Err(Error::Shape(format!("{} flags for {} values", pinned.len(), v.data.len())));
        }
        let data = v
            .data
            .iter()
            .zip(pinned.iter().cycle())
            .map(|(&a, &p)| if p { value } else { a })
            .collect();
        let value = Tensor { shape: v.shape.clone(), data };
        Ok(self.push(value, &[x.0], Op::StraightThrough(x.0)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(a, 1.0, b, 1.0)
    }

    /// `ca · a + cb · b`.
    pub fn lincomb(&mut self, a: Var, ca: f64, b: Var, cb: f64) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let value = Tensor {
            shape: va.shape.clone(),
            data: va.data.iter().zip(&vb.data).map(|(x, y)| ca * x + cb * y).collect(),
        };
        let op = if ca == 1.0 && cb == 1.0 {
            Op::Add(a.0, b.0)
        } else {
            Op::LinComb { a: a.0, ca, b: b.0, cb }
        };
        Ok(self.push(value, &[a.0, b.0], op))
    }

    /// Adds a per-sample, per-channel bias: `x: [N, ..., C]`, `bias: [N, C]`.
    pub fn channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x);
        let bs = self.shape(bias);
        if bs.len() != 2 || xs[0] != bs[0] || xs[xs.len() - 1] != bs[1] {
            return Err(Error::Shape(format!("channel bias {bs:?} for {xs:?}")));
        }
        let (n, c) = (bs[0], bs[1]);
        let per = self.value(x).row_len();
        let bv = &self.value(bias).data;
        let mut data = self.value(x).data.clone();
        for i in 0..n {
            for (k, v) in data[i * per..(i + 1) * per].iter_mut().enumerate() {
                *v += bv[i * c + k % c];
            }
        }
        let value = Tensor {
            shape: self.shape(x).to_vec(),
            data,
        };
        Ok(self.push(value, &[x.0, bias.0], Op::ChannelBias { x: x.0, bias: bias.0 }))
    }

    /// Nearest-neighbour 2× upsampling cropped to `h × w`.
    pub fn upsample2(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || h > 2 * s[1] || w > 2 * s[2] {
            return Err(Error::Shape(format!("upsample {s:?} to {h}x{w}")));
        }
        let (n, ih, iw, c) = (s[0], s[1], s[2], s[3]);
        let src = &self.value(x).data;
        let mut data = Vec::with_capacity(n * h * w * c);
        for b in 0..n {
            for y in 0..h {
                for xx in 0..w {
                    let off = ((b * ih + y / 2) * iw + xx / 2) * c;
                    data.extend_from_slice(&src[off..off + c]);
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![n, h, w, c], data }, &[x.0], Op::Upsample { x: x.0 }))
    }

    /// Concatenates along the last (channel) axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::Shape(format!("concat {sa:?} with {sb:?}")));
        }
        let (ca, cb) = (sa[sa.len() - 1], sb[sb.len() - 1]);
        let pixels = self.value(a).len() / ca;
        let (va, vb) = (&self.value(a).data, &self.value(b).data);
        let mut data = Vec::with_capacity(pixels * (ca + cb));
        for p in 0..pixels {
            data.extend_from_slice(&va[p * ca..(p + 1) * ca]);
            data.extend_from_slice(&vb[p * cb..(p + 1) * cb]);
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = ca + cb;
        Ok(self.push(Tensor { shape, data }, &[a.0, b.0], Op::Concat { a: a.0, b: b.0 }))
    }

    /// Mean over the spatial axes: `[N, H, W, C]` to `[N, C]`.
    pub fn avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::Shape(format!("avg_pool on {s:?}")));
        }
        let (n, p, c) = (s[0], s[1] * s[2], s[3]);
        let v = &self.value(x).data;
        let mut data = vec![0.0; n * c];
        for b in 0..n {
            for q in 0..p {
                for k in 0..c {
                    data[b * c + k] += v[(b * p + q) * c + k];
                }
            }
        }
        data.iter_mut().for_each(|d| *d /= p as f64);
        Ok(self.push(Tensor { shape: vec![n, c], data }, &[x.0], Op::AvgPool(x.0)))
    }

    /// `Σ (x - target)²`, divided by the element count when `mean`.
    pub fn squared_error(&mut self, x: Var, target: &[f64], mean: bool) -> Result<Var> {
        let v = &self.value(x).data;
        if v.len() != target.len() {
            return Err(Error::Shape(format!("{} predictions vs {} targets", v.len(), target.len())));
        }
        let scale = if mean { 1.0 / v.len() as f64 } else { 1.0 };
        let loss = scale * v.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        Ok(self.push(
            Tensor::scalar(loss),
            &[x.0],
            Op::SquaredError {
                x: x.0,
                target: target.to_vec(),
                scale,
            },
        ))
    }

    /// Elementwise sign (`x >= 0` maps to 1). It has no useful gradient, so
    /// applying it to a value that depends on a tracked leaf is rejected.
    pub fn sign(&mut self, x: Var) -> Result<Var> {
        if self.nodes[x.0].tracked {
            return Err(Error::NonDifferentiable("sign"));
        }
        let v = self.value(x);
        let value = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| if a >= 0.0 { 1.0 } else { -1.0 }).collect(),
        };
        Ok(self.leaf(value, false))
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!("backward from non-scalar {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let needs = |i: usize| self.nodes[i].tracked;
            match &node.op {
                Op::Leaf => {}
                Op::Conv { x, w, b, geom, cols } => {
                    let rows = geom.n * geom.ho * geom.wo;
                    let k = 9 * geom.ci;
                    if needs(*w) {
                        let mut dw = vec![0.0; geom.co * k];
                        gemm(geom.co, rows, k, &g, (1, geom.co), cols, (k, 1), 0.0, &mut dw);
                        accumulate_owned(&mut grads[*w], dw);
                    }
                    if needs(*b) {
                        let mut db = vec![0.0; geom.co];
                        for r in 0..rows {
                            for c in 0..geom.co {
                                db[c] += g[r * geom.co + c];
                            }
                        }
                        accumulate_owned(&mut grads[*b], db);
                    }
                    if needs(*x) {
                        let mut dcols = vec![0.0; rows * k];
                        let wv = &self.nodes[*w].value.data;
                        gemm(rows, geom.co, k, &g, (geom.co, 1), wv, (k, 1), 0.0, &mut dcols);
                        let mut dx = vec![0.0; self.nodes[*x].value.len()];
                        col2im(&dcols, geom, &mut dx);
                        accumulate_owned(&mut grads[*x], dx);
                    }
                }
                Op::Linear { x, w, b } => {
                    let xs = &self.nodes[*x].value.shape;
                    let (n, f) = (xs[0], xs[1]);
                    let o = self.nodes[*w].value.shape[0];
                    if needs(*w) {
                        let mut dw = vec![0.0; o * f];
                        gemm(o, n, f, &g, (1, o), &self.nodes[*x].value.data, (f, 1), 0.0, &mut dw);
                        accumulate_owned(&mut grads[*w], dw);
                    }
                    if needs(*b) {
                        let mut db = vec![0.0; o];
                        for r in 0..n {
                            for c in 0..o {
                                db[c] += g[r * o + c];
                            }
                        }
                        accumulate_owned(&mut grads[*b], db);
                    }
                    if needs(*x) {
                        let mut dx = vec![0.0; n * f];
                        gemm(n, o, f, &g, (o, 1), &self.nodes[*w].value.data, (f, 1), 0.0, &mut dx);
                        accumulate_owned(&mut grads[*x], dx);
                    }
                }
                Op::Silu(x) => {
                    let xv = &self.nodes[*x].value.data;
                    let dx = xv
                        .iter()
                        .zip(&g)
                        .map(|(&a, &gy)| {
                            let s = sigmoid(a);
                            gy * s * (1.0 + a * (1.0 - s))
                        })
                        .collect();
                    accumulate_owned(&mut grads[*x], dx);
                }
                Op::StraightThrough(x) => {
                    accumulate(&mut grads[*x], &g);
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = &self.nodes[*x].value.data;
                    let dx = xv
                        .iter()
                        .zip(&g)
                        .map(|(&a, &gy)| if a >= *lo && a <= *hi { gy } else { 0.0 })
                        .collect();
                    accumulate_owned(&mut grads[*x], dx);
                }
                Op::Add(a, b) => {
                    if needs(*a) {
                        accumulate(&mut grads[*a], &g);
                    }
                    if needs(*b) {
                        accumulate(&mut grads[*b], &g);
                    }
                }
                Op::LinComb { a, ca, b, cb } => {
                    if needs(*a) {
                        accumulate_owned(&mut grads[*a], g.iter().map(|v| ca * v).collect());
                    }
                    if needs(*b) {
                        accumulate_owned(&mut grads[*b], g.iter().map(|v| cb * v).collect());
                    }
                }
                Op::ChannelBias { x, bias } => {
                    if needs(*x) {
                        accumulate(&mut grads[*x], &g);
                    }
                    if needs(*bias) {
                        let bs = &self.nodes[*bias].value.shape;
                        let (n, c) = (bs[0], bs[1]);
                        let per = g.len() / n;
                        let mut db = vec![0.0; n * c];
                        for i in 0..n {
                            for (k, v) in g[i * per..(i + 1) * per].iter().enumerate() {
                                db[i * c + k % c] += v;
                            }
                        }
                        accumulate_owned(&mut grads[*bias], db);
                    }
                }
                Op::Upsample { x } => {
                    let s = &self.nodes[*x].value.shape;
                    let (ih, iw, c) = (s[1], s[2], s[3]);
                    let os = &node.value.shape;
                    let (h, w) = (os[1], os[2]);
                    let mut dx = vec![0.0; self.nodes[*x].value.len()];
                    for b in 0..s[0] {
                        for y in 0..h {
                            for xx in 0..w {
                                let dst = ((b * ih + y / 2) * iw + xx / 2) * c;
                                let src = ((b * h + y) * w + xx) * c;
                                for k in 0..c {
                                    dx[dst + k] += g[src + k];
                                }
                            }
                        }
                    }
                    accumulate_owned(&mut grads[*x], dx);
                }
                Op::Concat { a, b } => {
                    let ca = *self.nodes[*a].value.shape.last().unwrap();
                    let cb = *self.nodes[*b].value.shape.last().unwrap();
                    let pixels = g.len() / (ca + cb);
                    if needs(*a) {
                        let da = (0..pixels)
                            .flat_map(|p| g[p * (ca + cb)..p * (ca + cb) + ca].iter().copied())
                            .collect();
                        accumulate_owned(&mut grads[*a], da);
                    }
                    if needs(*b) {
                        let db = (0..pixels)
                            .flat_map(|p| g[p * (ca + cb) + ca..(p + 1) * (ca + cb)].iter().copied())
                            .collect();
                        accumulate_owned(&mut grads[*b], db);
                    }
                }
                Op::AvgPool(x) => {
                    let s = &self.nodes[*x].value.shape;
                    let (n, p, c) = (s[0], s[1] * s[2], s[3]);
                    let mut dx = vec![0.0; n * p * c];
                    for b in 0..n {
                        for q in 0..p {
                            for k in 0..c {
                                dx[(b * p + q) * c + k] = g[b * c + k] / p as f64;
                            }
                        }
                    }
                    accumulate_owned(&mut grads[*x], dx);
                }
                Op::SquaredError { x, target, scale } => {
                    let xv = &self.nodes[*x].value.data;
                    let dx = xv
                        .iter()
                        .zip(target)
                        .map(|(a, t)| 2.0 * scale * (a - t) * g[0])
                        .collect();
                    accumulate_owned(&mut grads[*x], dx);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut g = Graph::new();
        let x: Vec<f64> = (0..2 * 4 * 3 * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..3 * 9 * 2).map(|i| (i as f64 * 0.11).cos()).collect();
        let xv = g.leaf(t(&[2, 4, 3, 2], x.clone()), false);
        let wv = g.leaf(t(&[3, 3, 3, 2], w.clone()), false);
        let bv = g.leaf(t(&[3], vec![0.1, 0.2, 0.3]), false);
        for stride in [1, 2] {
            let y = g.conv3x3(xv, wv, bv, stride).unwrap();
            let out = g.value(y).clone();
            let (ho, wo) = (out.shape[1], out.shape[2]);
            for n in 0..2 {
                for oy in 0..ho {
                    for ox in 0..wo {
                        for co in 0..3 {
                            let mut acc = [0.1, 0.2, 0.3][co];
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * stride + ky) as isize - 1;
                                    let ix = (ox * stride + kx) as isize - 1;
                                    if !(0..4).contains(&iy) || !(0..3).contains(&ix) {
                                        continue;
                                    }
                                    for ci in 0..2 {
                                        acc += x[((n * 4 + iy as usize) * 3 + ix as usize) * 2 + ci]
                                            * w[((co * 3 + ky) * 3 + kx) * 2 + ci];
                                    }
                                }
                            }
                            let got = out.data[((n * ho + oy) * wo + ox) * 3 + co];
                            assert!((got - acc).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn quadratic_gradient() {
        // d/dx Σ (2x - 1)² = 4 (2x - 1)
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], vec![0.0, 0.5, 2.0]), true);
        let zero = g.leaf(t(&[3], vec![0.0; 3]), false);
        let y = g.lincomb(x, 2.0, zero, 0.0).unwrap();
        let l = g.squared_error(y, &[1.0, 1.0, 1.0], false).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[-4.0, 0.0, 12.0]);
        assert!(grads.get(zero).is_none());
    }

    #[test]
    fn clamp_blocks_saturated_gradients() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], vec![-2.0, 0.5, 3.0]), true);
        let y = g.clamp(x, -1.0, 1.0);
        assert_eq!(g.value(y).data, vec![-1.0, 0.5, 1.0]);
        let l = g.squared_error(y, &[0.0; 3], false).unwrap();
        assert_eq!(g.backward(l).unwrap().get(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn straight_through_clamp_passes_gradients() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], vec![-2.0, 0.5]), true);
        let y = g.clamp_straight_through(x, -1.0, 1.0);
        let l = g.squared_error(y, &[0.0; 2], false).unwrap();
        assert_eq!(g.backward(l).unwrap().get(x).unwrap(), &[-2.0, 1.0]);
    }

    #[test]
    fn pinned_entries_repeat_per_item() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2, 2], vec![0.5, 0.25, 2.0, 3.0]), true);
        let y = g.pin_straight_through(x, &[false, true], -1.0).unwrap();
        assert_eq!(g.value(y).data, vec![0.5, -1.0, 2.0, -1.0]);
        let l = g.squared_error(y, &[0.0; 4], false).unwrap();
        assert_eq!(g.backward(l).unwrap().get(x).unwrap(), &[1.0, -2.0, 4.0, -2.0]);
        assert!(g.pin_straight_through(x, &[true; 3], 0.0).is_err());
    }

    #[test]
    fn sign_rejects_tracked_values() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(0.3), true);
        assert!(matches!(g.sign(x), Err(Error::NonDifferentiable("sign"))));
        let c = g.leaf(Tensor::scalar(-0.3), false);
        let s = g.sign(c).unwrap();
        assert_eq!(g.value(s).data, vec![-1.0]);
    }
}
