//! Neural Kantorovich potentials and the neural semi-dual estimator.
//!
//! The network maps `x ∈ [0,1]^{d_max}` to a scalar through
//!
//! 1. an optional per-axis embedding `e_{ij} = θ_{ij} x_i` (width `d'`),
//! 2. optional channel layers applied to every axis with shared weights
//!    (`1×1` convolutions over the axis index), ReLU after each,
//! 3. flattening of the per-axis features, or their sum over axes,
//! 4. dense ReLU layers and a final affine output.
//!
//! All parameters live in one flat vector so optimizers and clamping act on
//! a single slice. The output layer starts at zero, so a fresh network is the
//! zero potential and its transport map is the identity.

use std::f64::consts::PI;
use std::sync::OnceLock;

use log::debug;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{conjugate_batch, ConjugateConfig};
use crate::error::{Error, Result};
use crate::gamma::{SmoothnessMap, WeightRule};
use crate::potential::{clip_unit, half_sq_norm, Brenier, Potential};
use crate::rng::{named_seed, stream_rng};

/// Layer shapes of an [`MlpPotential`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Number of leading input coordinates the network reads (`d_max`).
    pub input_dim: usize,
    /// Embedding width `d'`, if the embedding is used.
    #[serde(default)]
    pub embedding: Option<usize>,
    /// Widths of the shared per-axis channel layers; requires an embedding.
    #[serde(default)]
    pub channels: Vec<usize>,
    /// Widths of the dense hidden layers.
    pub hidden: Vec<usize>,
    /// How per-axis features enter the dense stage.
    #[serde(default)]
    pub pooling: Pooling,
}

/// Reduction of the `d × c` per-axis features before the dense layers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Concatenate all axes (`d·c` dense inputs).
    #[default]
    Flatten,
    /// Sum over axes (`c` dense inputs); every weight after the embedding is shared by all axes.
    Sum,
}

impl Architecture {
    pub fn dense(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_dim,
            embedding: None,
            channels: Vec::new(),
            hidden,
            pooling: Pooling::Flatten,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("network input dimension is 0".into()));
        }
        if self.embedding == Some(0) {
            return Err(Error::InvalidArgument("embedding width is 0".into()));
        }
        if !self.channels.is_empty() && self.embedding.is_none() {
            return Err(Error::InvalidArgument(
                "channel layers require an embedding".into(),
            ));
        }
        if self.pooling == Pooling::Sum && self.embedding.is_none() {
            return Err(Error::InvalidArgument(
                "sum pooling requires an embedding".into(),
            ));
        }
        if self.channels.contains(&0) || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("layer of width 0".into()));
        }
        Ok(())
    }

    /// Channels per axis entering the dense stage (0 without an embedding).
    fn axis_width(&self) -> usize {
        match (self.channels.last(), self.embedding) {
            (Some(&c), _) => c,
            (None, Some(e)) => e,
            (None, None) => 0,
        }
    }

    fn dense_input(&self) -> usize {
        match (self.embedding, self.pooling) {
            (Some(_), Pooling::Flatten) => self.input_dim * self.axis_width(),
            (Some(_), Pooling::Sum) => self.axis_width(),
            (None, _) => self.input_dim,
        }
    }

    fn layout(&self) -> Layout {
        let mut off = 0;
        let theta = self.embedding.map(|e| {
            let r = off;
            off += self.input_dim * e;
            r
        });
        let mut channels = Vec::new();
        let mut c_in = self.embedding.unwrap_or(0);
        for &c in &self.channels {
            channels.push(Affine::at(&mut off, c_in, c));
            c_in = c;
        }
        let mut dense = Vec::new();
        let mut n_in = self.dense_input();
        for &w in &self.hidden {
            dense.push(Affine::at(&mut off, n_in, w));
            n_in = w;
        }
        dense.push(Affine::at(&mut off, n_in, 1));
        Layout {
            theta,
            channels,
            dense,
            total: off,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().total
    }
}

/// Offsets of one affine map `out × in` (row-major) followed by its bias.
#[derive(Debug, Clone, Copy)]
struct Affine {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

impl Affine {
    fn at(off: &mut usize, n_in: usize, n_out: usize) -> Self {
        let a = Self {
            w: *off,
            b: *off + n_in * n_out,
            n_in,
            n_out,
        };
        *off += n_in * n_out + n_out;
        a
    }

    fn apply(&self, p: &[f64], input: &[f64], out: &mut [f64]) {
        let w = &p[self.w..self.b];
        let b = &p[self.b..self.b + self.n_out];
        for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(self.n_in).zip(b)) {
            *o = bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
        }
    }

    /// `d_in += Wᵀ d_out`, and parameter gradients `weight · (d_out ⊗ input, d_out)` if requested.
    fn backward(
        &self,
        p: &[f64],
        input: &[f64],
        d_out: &[f64],
        d_in: &mut [f64],
        grads: Option<(&mut [f64], f64)>,
    ) {
        let w = &p[self.w..self.b];
        for (row, &g) in w.chunks_exact(self.n_in).zip(d_out) {
            if g == 0.0 {
                continue;
            }
            for (di, a) in d_in.iter_mut().zip(row) {
                *di += a * g;
            }
        }
        if let Some((gp, weight)) = grads {
            let (gw, gb) = gp[self.w..self.b + self.n_out].split_at_mut(self.n_in * self.n_out);
            for ((row, gbias), &g) in gw.chunks_exact_mut(self.n_in).zip(gb).zip(d_out) {
                if g == 0.0 {
                    continue;
                }
                let g = g * weight;
                *gbias += g;
                for (r, x) in row.iter_mut().zip(input) {
                    *r += g * x;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    theta: Option<usize>,
    channels: Vec<Affine>,
    dense: Vec<Affine>,
    total: usize,
}

#[inline]
fn relu(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        0.0
    }
}

/// ReLU derivative with the convention `1` at exactly `0`.
#[inline]
fn relu_gate(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Intermediate values of one forward pass.
#[derive(Default)]
struct Trace {
    /// Per channel layer: pre-activations, `d × c`.
    channel_pre: Vec<Vec<f64>>,
    /// Input of the dense stage.
    dense_in: Vec<f64>,
    /// Per hidden dense layer: pre-activations.
    dense_pre: Vec<Vec<f64>>,
}

/// ReLU network potential on `[0,1]^{d_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct MlpPotential {
    arch: Architecture,
    params: Vec<f64>,
    /// Max-abs parameter bound `B`.
    bound: f64,
    #[serde(skip)]
    layout: LayoutCache,
    /// `W₁θ_i` per axis, the first channel layer applied to the rank-one embedding.
    #[serde(skip)]
    fold: FoldCache,
}

#[derive(Debug, Clone, Default)]
struct FoldCache(OnceLock<Vec<f64>>);

impl PartialEq for FoldCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Default)]
struct LayoutCache(Option<Layout>);

impl PartialEq for LayoutCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Serialized form of an [`MlpPotential`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpRecord {
    pub architecture: Architecture,
    pub bound: f64,
    pub params: Vec<f64>,
}

impl TryFrom<MlpRecord> for MlpPotential {
    type Error = Error;
    fn try_from(r: MlpRecord) -> Result<Self> {
        Self::from_params(r.architecture, r.params, r.bound)
    }
}

impl From<MlpPotential> for MlpRecord {
    fn from(m: MlpPotential) -> Self {
        MlpRecord {
            architecture: m.arch,
            bound: m.bound,
            params: m.params,
        }
    }
}

impl MlpPotential {
    /// All-zero network.
    pub fn zeros(arch: Architecture, bound: f64) -> Result<Self> {
        arch.validate()?;
        let n = arch.parameter_count();
        Self::from_params(arch, vec![0.0; n], bound)
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>, bound: f64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                expected: layout.total,
                got: params.len(),
            });
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidArgument(format!("parameter bound {bound} must be positive")));
        }
        if let Some(v) = params.iter().find(|v| !v.is_finite() || v.abs() > bound) {
            return Err(Error::InvalidArgument(format!(
                "parameter {v} violates the bound {bound}"
            )));
        }
        Ok(Self {
            arch,
            params,
            bound,
            layout: LayoutCache(Some(layout)),
            fold: FoldCache::default(),
        })
    }

    /// Random hidden layers (uniform He scaling), embedding entries in `[-1, 1]`,
    /// and a zero output layer.
    pub fn init(arch: Architecture, bound: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut net = Self::zeros(arch, bound)?;
        let layout = net.layout().clone();
        let p = &mut net.params;
        if let Some(t) = layout.theta {
            let e = net.arch.embedding.unwrap_or(0);
            for v in &mut p[t..t + net.arch.input_dim * e] {
                *v = rng.random_range(-1.0..=1.0);
            }
            if net.arch.pooling == Pooling::Sum {
                // Pooled networks start from one feature map shared by all axes.
                let (first, rest) = p[t..t + net.arch.input_dim * e].split_at_mut(e);
                for chunk in rest.chunks_exact_mut(e) {
                    chunk.copy_from_slice(first);
                }
            }
        }
        let last = layout.dense.len() - 1;
        for (k, a) in layout.channels.iter().chain(&layout.dense).enumerate() {
            if k == layout.channels.len() + last {
                break;
            }
            let limit = (6.0 / a.n_in as f64).sqrt();
            for v in &mut p[a.w..a.b] {
                *v = rng.random_range(-limit..=limit);
            }
            for v in &mut p[a.b..a.b + a.n_out] {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
        net.clamp();
        Ok(net)
    }

    fn layout(&self) -> &Layout {
        self.layout.0.as_ref().expect("layout is set at construction")
    }

    /// `W₁θ_i` for every axis `i`, computed once per parameter state.
    fn fold(&self) -> &[f64] {
        self.fold.0.get_or_init(|| {
            let layout = self.layout();
            let (Some(t), Some(e), Some(a)) = (layout.theta, self.arch.embedding, layout.channels.first())
            else {
                return Vec::new();
            };
            let w = &self.params[a.w..a.b];
            let mut out = Vec::with_capacity(self.arch.input_dim * a.n_out);
            for i in 0..self.arch.input_dim {
                let theta = &self.params[t + i * e..t + (i + 1) * e];
                out.extend(w.chunks_exact(e).map(|row| row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()));
            }
            out
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Number of nonzero parameters (the sparsity budget `R` is reported, not enforced).
    pub fn nonzero_count(&self) -> usize {
        self.params.iter().filter(|v| **v != 0.0).count()
    }

    /// Sets `b_L`, the output bias.
    pub fn set_output_bias(&mut self, c: f64) {
        self.fold = FoldCache::default();
        let a = *self.layout().dense.last().expect("output layer");
        self.params[a.b] = c.clamp(-self.bound, self.bound);
    }

    /// Mutable access to the raw parameters; callers should [`clamp`](Self::clamp) afterwards.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.fold = FoldCache::default();
        &mut self.params
    }

    pub fn clamp(&mut self) {
        self.fold = FoldCache::default();
        let b = self.bound;
        for v in &mut self.params {
            *v = v.clamp(-b, b);
        }
    }

    fn run(&self, x: &[f64], trace: &mut Trace) -> f64 {
        let d = self.arch.input_dim;
        assert!(x.len() >= d, "point shorter than the network input");
        let layout = self.layout();
        let p = &self.params;
        trace.channel_pre.clear();
        trace.dense_pre.clear();
        match (layout.theta, self.arch.embedding) {
            (Some(t), Some(e)) => {
                let mut cur: Vec<f64>;
                let mut width;
                match layout.channels.first() {
                    Some(a) => {
                        let fold = self.fold();
                        let b = &p[a.b..a.b + a.n_out];
                        let mut pre = Vec::with_capacity(d * a.n_out);
                        for i in 0..d {
                            let row = &fold[i * a.n_out..(i + 1) * a.n_out];
                            pre.extend(row.iter().zip(b).map(|(w, bias)| w * x[i] + bias));
                        }
                        cur = pre.iter().map(|&v| relu(v)).collect();
                        trace.channel_pre.push(pre);
                        width = a.n_out;
                    }
                    None => {
                        cur = Vec::with_capacity(d * e);
                        for i in 0..d {
                            cur.extend(p[t + i * e..t + (i + 1) * e].iter().map(|th| th * x[i]));
                        }
                        width = e;
                    }
                }
                for a in layout.channels.iter().skip(1) {
                    let mut pre = vec![0.0; d * a.n_out];
                    for i in 0..d {
                        a.apply(
                            p,
                            &cur[i * width..(i + 1) * width],
                            &mut pre[i * a.n_out..(i + 1) * a.n_out],
                        );
                    }
                    cur = pre.iter().map(|&v| relu(v)).collect();
                    trace.channel_pre.push(pre);
                    width = a.n_out;
                }
                trace.dense_in = match self.arch.pooling {
                    Pooling::Flatten => cur,
                    Pooling::Sum => {
                        let mut pooled = vec![0.0; width];
                        for f in cur.chunks_exact(width) {
                            for (acc, v) in pooled.iter_mut().zip(f) {
                                *acc += v;
                            }
                        }
                        pooled
                    }
                };
            }
            _ => {
                trace.dense_in.clear();
                trace.dense_in.extend_from_slice(&x[..d]);
            }
        }
        let (last, hidden) = layout.dense.split_last().expect("output layer");
        let mut act = trace.dense_in.clone();
        for a in hidden {
            let mut pre = vec![0.0; a.n_out];
            a.apply(p, &act, &mut pre);
            act = pre.iter().map(|&v| relu(v)).collect();
            trace.dense_pre.push(pre);
        }
        let mut out = [0.0];
        last.apply(p, &act, &mut out);
        out[0]
    }

    /// Reverse pass. Writes `∂f/∂x` (first `d` coordinates) into `dx` and,
    /// if `grads` is given, adds `weight · ∂f/∂params` to it.
    fn backprop(
        &self,
        x: &[f64],
        trace: &Trace,
        dx: &mut [f64],
        mut grads: Option<(&mut [f64], f64)>,
    ) {
        let d = self.arch.input_dim;
        let layout = self.layout();
        let p = &self.params;
        let (last, hidden) = layout.dense.split_last().expect("output layer");

        let act_of = |k: usize| -> Vec<f64> {
            if k == 0 {
                trace.dense_in.clone()
            } else {
                trace.dense_pre[k - 1].iter().map(|&v| relu(v)).collect()
            }
        };
        let mut d_act = vec![0.0; last.n_in];
        let top_in = act_of(hidden.len());
        last.backward(
            p,
            &top_in,
            &[1.0],
            &mut d_act,
            grads.as_mut().map(|(g, w)| (&mut **g, *w)),
        );
        for k in (0..hidden.len()).rev() {
            let a = &hidden[k];
            let d_pre: Vec<f64> = d_act
                .iter()
                .zip(&trace.dense_pre[k])
                .map(|(g, &z)| g * relu_gate(z))
                .collect();
            let mut d_in = vec![0.0; a.n_in];
            a.backward(
                p,
                &act_of(k),
                &d_pre,
                &mut d_in,
                grads.as_mut().map(|(g, w)| (&mut **g, *w)),
            );
            d_act = d_in;
        }

        match (layout.theta, self.arch.embedding) {
            (Some(t), Some(e)) => {
                if self.arch.pooling == Pooling::Sum {
                    // Every axis receives the gradient of the pooled features.
                    d_act = d_act.repeat(d);
                }
                // d_act is the gradient w.r.t. the flattened axis features.
                let embed = |i: usize| -> Vec<f64> { p[t + i * e..t + (i + 1) * e].iter().map(|th| th * x[i]).collect() };
                for k in (0..layout.channels.len()).rev() {
                    let a = &layout.channels[k];
                    let pre = &trace.channel_pre[k];
                    let gated: Vec<f64> = d_act
                        .iter()
                        .zip(pre)
                        .map(|(g, &z)| g * relu_gate(z))
                        .collect();
                    if k == 0 && grads.is_none() {
                        // Input gradient only: go straight through the folded first layer.
                        let fold = self.fold();
                        for i in 0..d {
                            dx[i] = gated[i * a.n_out..(i + 1) * a.n_out]
                                .iter()
                                .zip(&fold[i * a.n_out..(i + 1) * a.n_out])
                                .map(|(g, w)| g * w)
                                .sum();
                        }
                        return;
                    }
                    let mut d_in = vec![0.0; d * a.n_in];
                    for i in 0..d {
                        let input = if k == 0 {
                            embed(i)
                        } else {
                            trace.channel_pre[k - 1][i * a.n_in..(i + 1) * a.n_in]
                                .iter()
                                .map(|&v| relu(v))
                                .collect()
                        };
                        a.backward(
                            p,
                            &input,
                            &gated[i * a.n_out..(i + 1) * a.n_out],
                            &mut d_in[i * a.n_in..(i + 1) * a.n_in],
                            grads.as_mut().map(|(g, w)| (&mut **g, *w)),
                        );
                    }
                    d_act = d_in;
                }
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..e {
                        let g = d_act[i * e + j];
                        s += g * p[t + i * e + j];
                        if let Some((gp, w)) = grads.as_mut() {
                            gp[t + i * e + j] += *w * g * x[i];
                        }
                    }
                    dx[i] = s;
                }
            }
            _ => dx[..d].copy_from_slice(&d_act[..d]),
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.run(x, &mut Trace::default())
    }

    /// Exact gradient of [`forward`](Self::forward) in `x` (length `d_max`).
    pub fn input_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        self.run(x, &mut t);
        let mut g = vec![0.0; self.arch.input_dim];
        self.backprop(x, &t, &mut g, None);
        g
    }

    /// Adds `weight · ∂f(x)/∂params` to `acc`.
    pub fn accumulate_param_grad(&self, x: &[f64], weight: f64, acc: &mut [f64]) {
        let mut t = Trace::default();
        self.run(x, &mut t);
        let mut g = vec![0.0; self.arch.input_dim];
        self.backprop(x, &t, &mut g, Some((acc, weight)));
    }

    /// Clipped transport of a full-length point: the first `d_max` coordinates
    /// move by `x − ∇φ̃(x)` and are clipped; later coordinates pass through.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        let d = self.arch.input_dim;
        let mut out = x.to_vec();
        let g = self.input_grad(x);
        for i in 0..d {
            out[i] = x[i] - g[i];
        }
        clip_unit(&mut out[..d]);
        out
    }
}

impl Potential for MlpPotential {
    fn dim(&self) -> usize {
        self.arch.input_dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.forward(x)
    }

    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut t = Trace::default();
        let v = self.run(x, &mut t);
        self.backprop(x, &t, grad, None);
        v
    }
}

/// Coordinate truncation `ι` to the first `d_max` axes and its zero-padding inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub d_max: usize,
}

impl Truncation {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x[..self.d_max.min(x.len())].to_vec()
    }

    /// Zero-pads a truncated point back to length `d`.
    pub fn inverse(&self, z: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        let k = z.len().min(d);
        out[..k].copy_from_slice(&z[..k]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd {
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Training configuration for [`train_nn`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnConfig {
    pub architecture: Architecture,
    /// Max-abs parameter bound `B`.
    pub bound: f64,
    /// Sparsity budget `R`; reported alongside the fitted network, never enforced.
    pub nonzero_budget: f64,
    /// Budget `J` the shapes were derived from (informational).
    #[serde(rename = "J")]
    pub j: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    #[serde(default)]
    pub conjugate: ConjugateConfig,
}

/// Preset parameter families for [`NnConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Shapes from the approximation theorem, dense layers only.
    Theory,
    /// The simulation architecture: embedding and shared channel layers.
    Sim7,
}

/// Unclamped theorem-scale network parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryScales {
    pub j: f64,
    pub q: f64,
    pub width: f64,
    pub depth: f64,
    pub nonzero: f64,
    pub bound: f64,
}

/// Growth exponent `q` of the weights (`a_i ≍ i^q`); `+∞` for geometric weights
/// and for the finite-dimensional Sobolev family.
pub fn growth_exponent(map: &SmoothnessMap) -> f64 {
    match map {
        SmoothnessMap::SobolevDk { .. } => f64::INFINITY,
        SmoothnessMap::Mixed { weights } | SmoothnessMap::Anisotropic { weights } => {
            match weights {
                WeightRule::Power { .. } | WeightRule::Geometric { .. } => weights.growth_exponent(),
            }
        }
    }
}

/// `W, L, R, B` from the approximation theorem at sample size `n`, with unit constants.
pub fn theory_scales(map: &SmoothnessMap, n: usize) -> Result<TheoryScales> {
    let alpha = map.finite_alpha()?;
    let j = map.select_j(n)? as f64;
    let q = growth_exponent(map);
    let inv_q = if q.is_finite() && q > 0.0 { 1.0 / q } else { 0.0 };
    let expo = 2f64.powf(alpha / (1.0 + 2.0 * alpha) * j);
    Ok(TheoryScales {
        j,
        q,
        width: j.powf(inv_q) * expo,
        depth: j.powf(2.0 + 2.0 * inv_q),
        nonzero: j.powf(2.0 + 4.0 * inv_q) * expo,
        bound: 2f64.powf(j.powf(inv_q) / 2.0),
    })
}

/// Hard caps on the network size at desk scale.
pub const MAX_WIDTH: usize = 512;
pub const MAX_DEPTH: usize = 8;
/// Cap on the parameter bound `B`, which overflows for slowly growing weights.
pub const MAX_BOUND: f64 = 100.0;
/// Sample size at which the proportionality constants are calibrated.
pub const CALIBRATION_N: usize = 10_000;

/// Theorem-shaped configuration for sample size `n` and input dimension `d`.
///
/// Width and depth are the theorem's rates times constants chosen so that
/// the values at `n = 10^4` meet the caps `W ≤ 512`, `L ≤ 8`.
pub fn default_config(map: &SmoothnessMap, n: usize, d: usize, seed: u64) -> Result<NnConfig> {
    let s = theory_scales(map, n)?;
    let reference = theory_scales(map, CALIBRATION_N.max(n))?;
    let cw = (MAX_WIDTH as f64 / reference.width).min(1.0);
    let cl = (MAX_DEPTH as f64 / reference.depth).min(1.0);
    let width = ((cw * s.width).round() as usize).clamp(2, MAX_WIDTH);
    let depth = ((cl * s.depth).round() as usize).clamp(1, MAX_DEPTH);
    let d_max = map.d_max(s.j)?.min(d).max(1);
    Ok(NnConfig {
        architecture: Architecture::dense(d_max, vec![width; depth]),
        bound: s.bound.min(MAX_BOUND),
        nonzero_budget: s.nonzero.min(f64::MAX),
        j: s.j,
        learning_rate: 1e-2,
        iterations: 175,
        batch_size: 100,
        optimizer: Optimizer::Sgd { momentum: 0.0 },
        seed,
        conjugate: ConjugateConfig {
            seed,
            ..ConjugateConfig::default()
        },
    })
}

/// Configuration for a named preset.
pub fn preset_config(
    preset: Preset,
    map: &SmoothnessMap,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<NnConfig> {
    let base = default_config(map, n, d, seed)?;
    Ok(match preset {
        Preset::Theory => base,
        Preset::Sim7 => sim7_config(d, seed, base),
    })
}

/// The simulation network: a 20-dim embedding per axis, two shared layers of
/// 10 channels, and a sum over axes straight into the output unit. The fitted
/// potential is therefore separable across axes.
fn sim7_config(d: usize, seed: u64, base: NnConfig) -> NnConfig {
    NnConfig {
        architecture: Architecture {
            input_dim: d,
            embedding: Some(20),
            channels: vec![10, 10],
            hidden: Vec::new(),
            pooling: Pooling::Sum,
        },
        bound: base.bound.max(8.0),
        optimizer: Optimizer::Sgd { momentum: 0.0 },
        // Pooling sums d per-axis gradients into every shared weight.
        learning_rate: (0.5 / d as f64).min(0.03),
        iterations: 175,
        batch_size: 100,
        conjugate: ConjugateConfig {
            starts: 1,
            max_iter: 50,
            seed,
            ..ConjugateConfig::default()
        },
        ..base
    }
}

/// Result of [`train_nn`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedNn {
    pub net: MlpPotential,
    /// Mean of `φ̃` over the training sources; subtracting it centers the potential.
    pub offset: f64,
    /// Per-iteration mini-batch semi-dual objective.
    pub objective_trace: Vec<f64>,
    pub config: NnConfig,
}

impl TrainedNn {
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        self.net.transport(x)
    }
}

/// Clipped transport map of a network, applied to a full-length point.
pub fn transport_nn(net: &MlpPotential, x: &[f64]) -> Vec<f64> {
    net.transport(x)
}

fn truncated_rows(m: ArrayView2<'_, f64>, d: usize) -> Result<Vec<Vec<f64>>> {
    if m.ncols() < d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.ncols(),
        });
    }
    Ok(m.rows()
        .into_iter()
        .map(|r| r.iter().take(d).copied().collect())
        .collect())
}

struct OptimizerState {
    first: Vec<f64>,
    second: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, opt: Optimizer, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match opt {
            Optimizer::Sgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(&mut self.first) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Indices of the next mini-batch, drawn as consecutive slices of per-epoch shuffles.
struct Batcher {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, rng: ChaCha8Rng) -> Self {
        let mut b = Self {
            order: (0..n).collect(),
            pos: n,
            rng,
        };
        b.reshuffle_if_needed(n);
        b
    }

    fn reshuffle_if_needed(&mut self, want: usize) {
        if self.pos + want > self.order.len() {
            // Fisher–Yates with the stream generator keeps batches reproducible.
            for i in (1..self.order.len()).rev() {
                let j = self.rng.random_range(0..=i);
                self.order.swap(i, j);
            }
            self.pos = 0;
        }
    }

    fn next(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.order.len());
        self.reshuffle_if_needed(size);
        let out = self.order[self.pos..self.pos + size].to_vec();
        self.pos += size;
        out
    }
}

/// Sum of `weight · ∂f(x_k)/∂params` over points, reduced in index order.
fn param_grad_sum(net: &MlpPotential, points: &[&[f64]], weight: f64) -> Vec<f64> {
    let n = net.parameter_count();
    let parts: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let mut g = vec![0.0; n];
            net.accumulate_param_grad(x, weight, &mut g);
            g
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Trains a network potential by mini-batch semi-dual minimization.
///
/// Each step solves the conjugates of the current Brenier potential at the
/// target batch, then moves the parameters along
/// `mean ∇_θ φ̃(x*_i) − mean ∇_θ φ̃(X_i)` with the argmaxes held fixed.
pub fn train_nn(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &NnConfig) -> Result<TrainedNn> {
    let d = cfg.architecture.input_dim;
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("sample"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size is 0".into()));
    }
    let xs = truncated_rows(x, d)?;
    let ys = truncated_rows(y, d)?;
    let mut init_rng = stream_rng(named_seed(cfg.seed, "nn-init"), 0);
    let mut net = MlpPotential::init(cfg.architecture.clone(), cfg.bound, &mut init_rng)?;
    let mut xb = Batcher::new(xs.len(), stream_rng(named_seed(cfg.seed, "nn-batch-x"), 0));
    let mut yb = Batcher::new(ys.len(), stream_rng(named_seed(cfg.seed, "nn-batch-y"), 0));
    let mut warm: Vec<Vec<f64>> = ys.clone();
    let mut state = OptimizerState::new(net.parameter_count());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut running_mean = 0.0;
    let mut initial: Option<f64> = None;

    for step in 0..cfg.iterations {
        let lr = cfg.learning_rate * 0.5 * (1.0 + (PI * step as f64 / cfg.iterations as f64).cos());
        let bx = xb.next(cfg.batch_size);
        let by = yb.next(cfg.batch_size);
        let batch_x: Vec<&[f64]> = bx.iter().map(|&i| xs[i].as_slice()).collect();
        let mean_x = batch_x.iter().map(|r| net.forward(r)).sum::<f64>() / bx.len() as f64;
        running_mean += (mean_x - running_mean) / (step + 1) as f64;

        let y_mat = Array2::from_shape_fn((by.len(), d), |(r, c)| ys[by[r]][c]);
        let starts: Vec<Vec<f64>> = by.iter().map(|&i| warm[i].clone()).collect();
        let conj_cfg = ConjugateConfig {
            seed: named_seed(cfg.conjugate.seed, "nn-conj") ^ step as u64,
            ..cfg.conjugate
        };
        let brenier = Brenier::centered(&net, running_mean);
        let conj = conjugate_batch(&brenier, y_mat.view(), &conj_cfg, Some(&starts))?;

        let energy = batch_x.iter().map(|r| half_sq_norm(r)).sum::<f64>() / bx.len() as f64;
        let dual = conj.iter().map(|r| r.value).sum::<f64>() / by.len() as f64;
        let objective = energy - mean_x + running_mean + dual;
        if !objective.is_finite() {
            return Err(Error::Numerical(format!("objective {objective} at step {step}")));
        }
        let reference = *initial.get_or_insert(objective);
        if objective.abs() > 10.0 * reference.abs().max(1e-12) {
            return Err(Error::Diverged {
                step,
                objective,
                initial: reference,
            });
        }
        trace.push(objective);

        let argmax: Vec<&[f64]> = conj.iter().map(|r| r.argmax.as_slice()).collect();
        let mut grad = param_grad_sum(&net, &argmax, 1.0 / by.len() as f64);
        let neg = param_grad_sum(&net, &batch_x, 1.0 / bx.len() as f64);
        for (g, s) in grad.iter_mut().zip(&neg) {
            *g -= s;
        }
        state.step(cfg.optimizer, lr, net.params_mut(), &grad);
        net.clamp();
        for (&i, r) in by.iter().zip(conj) {
            warm[i] = r.argmax;
        }
        if step % 25 == 0 {
            debug!("nn step {step}: objective {objective:.6e} lr {lr:.2e}");
        }
    }

    let offset = xs.iter().map(|r| net.forward(r)).sum::<f64>() / xs.len() as f64;
    Ok(TrainedNn {
        net,
        offset,
        objective_trace: trace,
        config: cfg.clone(),
    })
}
