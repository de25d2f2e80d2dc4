// SPDX-License-Identifier: Apache-2.0

//! Denoiser and cost predictor networks over `[N, H, W, C]` design tensors.
//!
//! Both append two coordinate channels (row and column position in
//! `[-1, 1]`) to the input, so convolutions can tell columns and stages
//! apart.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Shape of one design tensor as `[channels, height, width]`.
pub type ItemShape = [usize; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub base_channels: usize,
    /// Width of the sinusoidal timestep embedding (denoiser only).
    pub time_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            base_channels: 32,
            time_dim: 32,
        }
    }
}

/// Named parameter tensors in a fixed creation order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    fn add(&mut self, name: String, t: Tensor) -> usize {
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// One leaf per tensor; `tracked` leaves receive gradients.
    pub fn bind(&self, g: &mut Graph, tracked: bool) -> Vec<Var> {
        self.tensors.iter().map(|t| g.leaf(t.clone(), tracked)).collect()
    }

    /// Replaces all tensors, checking names and shapes.
    pub fn load(&mut self, other: &ParamSet) -> Result<()> {
        if other.names != self.names {
            return Err(Error::Checkpoint("parameter names differ from the network layout".into()));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.shape != b.shape {
                return Err(Error::Checkpoint(format!("parameter shape {:?} vs {:?}", b.shape, a.shape)));
            }
        }
        self.tensors = other.tensors.clone();
        Ok(())
    }
}

fn uniform(rng: &mut dyn RngCore, shape: Vec<usize>, bound: f64) -> Tensor {
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor { shape, data }
}

#[derive(Clone, Copy, Debug)]
struct Conv {
    w: usize,
    b: usize,
}

impl Conv {
    fn new(ps: &mut ParamSet, name: &str, ci: usize, co: usize, rng: &mut dyn RngCore, zero: bool) -> Self {
        let bound = 1.0 / ((9 * ci) as f64).sqrt();
        let w = if zero {
            Tensor::zeros(vec![co, 3, 3, ci])
        } else {
            uniform(rng, vec![co, 3, 3, ci], bound)
        };
        let b = if zero {
            Tensor::zeros(vec![co])
        } else {
            uniform(rng, vec![co], bound)
        };
        Conv {
            w: ps.add(format!("{name}.w"), w),
            b: ps.add(format!("{name}.b"), b),
        }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], x: Var, stride: usize) -> Result<Var> {
        g.conv3x3(x, p[self.w], p[self.b], stride)
    }
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
}

impl Dense {
    fn new(ps: &mut ParamSet, name: &str, fi: usize, fo: usize, rng: &mut dyn RngCore) -> Self {
        let bound = 1.0 / (fi as f64).sqrt();
        Dense {
            w: ps.add(format!("{name}.w"), uniform(rng, vec![fo, fi], bound)),
            b: ps.add(format!("{name}.b"), uniform(rng, vec![fo], bound)),
        }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        g.linear(x, p[self.w], p[self.b])
    }
}

/// `x + conv(silu(conv(silu(x)) + cond))`, with an optional per-sample
/// channel bias `cond` projected from the timestep embedding.
#[derive(Clone, Copy, Debug)]
struct ResBlock {
    conv1: Conv,
    conv2: Conv,
    cond: Option<Dense>,
}

impl ResBlock {
    fn new(ps: &mut ParamSet, name: &str, c: usize, cond_dim: Option<usize>, rng: &mut dyn RngCore) -> Self {
        ResBlock {
            conv1: Conv::new(ps, &format!("{name}.conv1"), c, c, rng, false),
            conv2: Conv::new(ps, &format!("{name}.conv2"), c, c, rng, false),
            cond: cond_dim.map(|d| Dense::new(ps, &format!("{name}.cond"), d, c, rng)),
        }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], x: Var, emb: Option<Var>) -> Result<Var> {
        let h = g.silu(x);
        let mut h = self.conv1.apply(g, p, h, 1)?;
        if let (Some(cond), Some(e)) = (self.cond, emb) {
            let bias = cond.apply(g, p, e)?;
            h = g.channel_bias(h, bias)?;
        }
        let h = g.silu(h);
        let h = self.conv2.apply(g, p, h, 1)?;
        g.add(x, h)
    }
}

fn coordinate_leaf(g: &mut Graph, n: usize, h: usize, w: usize) -> Var {
    let pos = |i: usize, len: usize| if len > 1 { 2.0 * i as f64 / (len - 1) as f64 - 1.0 } else { 0.0 };
    let mut data = Vec::with_capacity(n * h * w * 2);
    for _ in 0..n {
        for y in 0..h {
            for x in 0..w {
                data.push(pos(y, h));
                data.push(pos(x, w));
            }
        }
    }
    g.leaf(
        Tensor {
            shape: vec![n, h, w, 2],
            data,
        },
        false,
    )
}

fn check_input(g: &Graph, x: Var, shape: &ItemShape) -> Result<usize> {
    let s = &g.value(x).shape;
    if s.len() != 4 || s[1] != shape[1] || s[2] != shape[2] || s[3] != shape[0] {
        return Err(Error::Shape(format!(
            "network expects [N, {}, {}, {}], got {s:?}",
            shape[1], shape[2], shape[0]
        )));
    }
    Ok(s[0])
}

/// Sinusoidal embedding of (possibly fractional) timesteps.
pub fn timestep_embedding(t: &[f64], dim: usize) -> Tensor {
    let half = dim / 2;
    let mut data = Vec::with_capacity(t.len() * dim);
    for &step in t {
        for k in 0..half {
            let f = (-(10000f64.ln()) * k as f64 / half as f64).exp();
            data.push((step * f).sin());
        }
        for k in 0..half {
            let f = (-(10000f64.ln()) * k as f64 / half as f64).exp();
            data.push((step * f).cos());
        }
        data.extend(std::iter::repeat_n(0.0, dim - 2 * half));
    }
    Tensor {
        shape: vec![t.len(), dim],
        data,
    }
}

/// Noise predictor: a two-level encoder-decoder with one skip connection and
/// timestep-conditioned residual blocks. Output shape equals input shape.
#[derive(Clone, Debug)]
pub struct DenoiserNet {
    pub config: NetConfig,
    pub shape: ItemShape,
    pub params: ParamSet,
    /// Row elements that sat at -1 in every training row; clipping pins them
    /// there.
    pub inactive: Option<Vec<bool>>,
    temb1: Dense,
    temb2: Dense,
    conv_in: Conv,
    res1: ResBlock,
    down: Conv,
    res2: ResBlock,
    up: Conv,
    merge: Conv,
    res3: ResBlock,
    conv_out: Conv,
}

impl DenoiserNet {
    /// The output convolution starts at zero, so an untrained net predicts
    /// zero noise.
    pub fn new(shape: ItemShape, config: NetConfig, rng: &mut dyn RngCore) -> Result<Self> {
        if shape.contains(&0) || config.base_channels == 0 || config.time_dim < 2 {
            return Err(Error::InvalidArgument(format!("bad denoiser layout {shape:?} / {config:?}")));
        }
        let c = config.base_channels;
        let e = 4 * c;
        let mut ps = ParamSet::default();
        let temb1 = Dense::new(&mut ps, "temb1", config.time_dim, e, rng);
        let temb2 = Dense::new(&mut ps, "temb2", e, e, rng);
        let conv_in = Conv::new(&mut ps, "conv_in", shape[0] + 2, c, rng, false);
        let res1 = ResBlock::new(&mut ps, "res1", c, Some(e), rng);
        let down = Conv::new(&mut ps, "down", c, 2 * c, rng, false);
        let res2 = ResBlock::new(&mut ps, "res2", 2 * c, Some(e), rng);
        let up = Conv::new(&mut ps, "up", 2 * c, c, rng, false);
        let merge = Conv::new(&mut ps, "merge", 2 * c, c, rng, false);
        let res3 = ResBlock::new(&mut ps, "res3", c, Some(e), rng);
        let conv_out = Conv::new(&mut ps, "conv_out", c, shape[0], rng, true);
        Ok(DenoiserNet {
            config,
            shape,
            params: ps,
            inactive: None,
            temb1,
            temb2,
            conv_in,
            res1,
            down,
            res2,
            up,
            merge,
            res3,
            conv_out,
        })
    }

    /// Predicted noise for `x: [N, H, W, C]` at timesteps `t` (one per row).
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, t: &[f64]) -> Result<Var> {
        let n = check_input(g, x, &self.shape)?;
        if t.len() != n {
            return Err(Error::Shape(format!("{} timesteps for batch of {n}", t.len())));
        }
        let (h, w) = (self.shape[1], self.shape[2]);
        let temb = g.leaf(timestep_embedding(t, self.config.time_dim), false);
        let e = self.temb1.apply(g, p, temb)?;
        let e = g.silu(e);
        let e = self.temb2.apply(g, p, e)?;
        let e = g.silu(e);

        let coords = coordinate_leaf(g, n, h, w);
        let xin = g.concat(x, coords)?;
        let h0 = self.conv_in.apply(g, p, xin, 1)?;
        let h1 = self.res1.apply(g, p, h0, Some(e))?;
        let d = self.down.apply(g, p, h1, 2)?;
        let d = self.res2.apply(g, p, d, Some(e))?;
        let u = g.upsample2(d, h, w)?;
        let u = self.up.apply(g, p, u, 1)?;
        let m = g.concat(u, h1)?;
        let m = self.merge.apply(g, p, m, 1)?;
        let m = self.res3.apply(g, p, m, Some(e))?;
        let m = g.silu(m);
        self.conv_out.apply(g, p, m, 1)
    }
}

/// Scalar cost regressor: three residual blocks, global average pooling and
/// a linear head. Outputs are de-standardized with the stored label
/// statistics.
#[derive(Clone, Debug)]
pub struct PredictorNet {
    pub config: NetConfig,
    pub shape: ItemShape,
    pub params: ParamSet,
    /// Label mean and standard deviation used for de-standardization.
    pub label_mean: f64,
    pub label_std: f64,
    conv_in: Conv,
    blocks: [ResBlock; 3],
    head: Dense,
}

impl PredictorNet {
    pub fn new(shape: ItemShape, config: NetConfig, rng: &mut dyn RngCore) -> Result<Self> {
        if shape.contains(&0) || config.base_channels == 0 {
            return Err(Error::InvalidArgument(format!("bad predictor layout {shape:?} / {config:?}")));
        }
        let c = config.base_channels;
        let mut ps = ParamSet::default();
        let conv_in = Conv::new(&mut ps, "conv_in", shape[0] + 2, c, rng, false);
        let blocks = [
            ResBlock::new(&mut ps, "block1", c, None, rng),
            ResBlock::new(&mut ps, "block2", c, None, rng),
            ResBlock::new(&mut ps, "block3", c, None, rng),
        ];
        let head = Dense::new(&mut ps, "head", c, 1, rng);
        Ok(PredictorNet {
            config,
            shape,
            params: ps,
            label_mean: 0.0,
            label_std: 1.0,
            conv_in,
            blocks,
            head,
        })
    }

    /// Standardized prediction `[N, 1]`.
    pub fn forward_standardized(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let n = check_input(g, x, &self.shape)?;
        let coords = coordinate_leaf(g, n, self.shape[1], self.shape[2]);
        let xin = g.concat(x, coords)?;
        let mut h = self.conv_in.apply(g, p, xin, 1)?;
        for b in &self.blocks {
            h = b.apply(g, p, h, None)?;
        }
        let h = g.silu(h);
        let pooled = g.avg_pool(h)?;
        self.head.apply(g, p, pooled)
    }

    /// Predicted cost `[N, 1]` in label units.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let z = self.forward_standardized(g, p, x)?;
        let n = g.value(z).shape[0];
        let ones = g.leaf(
            Tensor {
                shape: vec![n, 1],
                data: vec![1.0; n],
            },
            false,
        );
        g.lincomb(z, self.label_std, ones, self.label_mean)
    }

    /// Convenience inference without gradients.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.leaf(x.clone(), false);
        let y = self.forward(&mut g, &p, xv)?;
        Ok(g.value(y).data.clone())
    }
}
