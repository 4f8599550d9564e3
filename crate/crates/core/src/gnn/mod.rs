//! Local extremum convolution backbone and sigmoid scheduling head.
//!
//! Layer `l` maps node features `x` to
//!
//! ```text
//! x'_v = leaky( x_v T1 + sum_{u -> v} e_uv (x_v T2 - x_u T3) )
//! ```
//!
//! and the head maps each embedding to `sigmoid(w . x_v + b)`. Gradients are
//! derived by hand in [`backward`]; everything is `f64`.

mod adam;
mod backward;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, OptimizerState, UpdateScope};
pub use backward::{gnn_backward, lec_layer_backward, Upstream};
pub use checkpoint::{ModelCheckpoint, CHECKPOINT_FORMAT};

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;
use crate::rate::Schedule;
use crate::seed::Rng;

pub const DEFAULT_LEAKY_SLOPE: f64 = 1e-2;

/// `(T1, T2, T3)` of one layer, each `F_in x F_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub theta_self: Array2<f64>,
    pub theta_dst: Array2<f64>,
    pub theta_src: Array2<f64>,
}

impl LayerParams {
    pub fn zeros(f_in: usize, f_out: usize) -> Self {
        LayerParams {
            theta_self: Array2::zeros((f_in, f_out)),
            theta_dst: Array2::zeros((f_in, f_out)),
            theta_src: Array2::zeros((f_in, f_out)),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.theta_self.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    /// `[F0, F1, ..., FL]`.
    pub dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub head_w: Array1<f64>,
    pub head_b: f64,
    pub leaky_slope: f64,
}

/// Gradients with the same shapes as [`GnnModel`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerParams>,
    pub head_w: Array1<f64>,
    pub head_b: f64,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Dimension(format!(
            "model needs at least one layer and non-zero widths, got {dims:?}"
        )));
    }
    Ok(())
}

/// Uniform `+-sqrt(6 / (fan_in + fan_out))` for every matrix and the head
/// weights, zero head bias.
pub fn init_model(dims: &[usize], leaky_slope: f64, rng: &mut Rng) -> Result<GnnModel> {
    validate_dims(dims)?;
    let mut uniform = |shape: (usize, usize)| {
        let a = (6.0 / (shape.0 + shape.1) as f64).sqrt();
        Array2::from_shape_simple_fn(shape, || rng.random_range(-a..a))
    };
    let layers = dims
        .windows(2)
        .map(|w| LayerParams {
            theta_self: uniform((w[0], w[1])),
            theta_dst: uniform((w[0], w[1])),
            theta_src: uniform((w[0], w[1])),
        })
        .collect();
    let f_last = *dims.last().unwrap();
    let head_w = uniform((f_last, 1)).column(0).to_owned();
    Ok(GnnModel {
        dims: dims.to_vec(),
        layers,
        head_w,
        head_b: 0.0,
        leaky_slope,
    })
}

impl GnnModel {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn embedding_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter tensors in a fixed order: each layer's `T1, T2, T3`, then
    /// head weights, then head bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.theta_self.as_slice().unwrap());
            out.push(l.theta_dst.as_slice().unwrap());
            out.push(l.theta_src.as_slice().unwrap());
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(std::slice::from_ref(&self.head_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.theta_self.as_slice_mut().unwrap());
            out.push(l.theta_dst.as_slice_mut().unwrap());
            out.push(l.theta_src.as_slice_mut().unwrap());
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(std::slice::from_mut(&mut self.head_b));
        out
    }

    /// Human-readable names matching [`GnnModel::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..self.layers.len() {
            for t in ["theta_self", "theta_dst", "theta_src"] {
                out.push(format!("layer{}.{t}", l + 1));
            }
        }
        out.push("head.w".into());
        out.push("head.b".into());
        out
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.dims)?;
        if self.layers.len() != self.dims.len() - 1 {
            return Err(Error::Dimension("layer count does not match dims".into()));
        }
        for (l, w) in self.layers.iter().zip(self.dims.windows(2)) {
            for t in [&l.theta_self, &l.theta_dst, &l.theta_src] {
                if t.dim() != (w[0], w[1]) {
                    return Err(Error::Dimension(format!(
                        "layer matrix {:?}, expected {:?}",
                        t.dim(),
                        (w[0], w[1])
                    )));
                }
            }
        }
        if self.head_w.len() != self.embedding_dim() {
            return Err(Error::Dimension("head width does not match embedding".into()));
        }
        if self.tensors().iter().any(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numeric("model has non-finite parameters".into()));
        }
        Ok(())
    }
}

impl GradientSet {
    pub fn zeros_like(model: &GnnModel) -> Self {
        GradientSet {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    let (i, o) = l.dims();
                    LayerParams::zeros(i, o)
                })
                .collect(),
            head_w: Array1::zeros(model.head_w.len()),
            head_b: 0.0,
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.theta_self.as_slice().unwrap());
            out.push(l.theta_dst.as_slice().unwrap());
            out.push(l.theta_src.as_slice().unwrap());
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(std::slice::from_ref(&self.head_b));
        out
    }

    /// In-place `self += other`, tensor by tensor in a fixed order.
    pub fn accumulate(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.theta_self += &b.theta_self;
            a.theta_dst += &b.theta_dst;
            a.theta_src += &b.theta_src;
        }
        self.head_w += &other.head_w;
        self.head_b += other.head_b;
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Activations kept by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub input: Array2<f64>,
    pub pre: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub layers: Vec<LayerCache>,
    /// `K x F_L` node embeddings.
    pub embeddings: Array2<f64>,
    pub head_pre: Vec<f64>,
    pub psi: Vec<f64>,
}

#[inline]
pub(crate) fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub(crate) fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One local extremum convolution. Incoming messages are summed in
/// ascending source index.
pub fn lec_layer_forward(
    x_prev: ArrayView2<f64>,
    graph: &InterferenceGraph,
    params: &LayerParams,
    slope: f64,
) -> Result<(Array2<f64>, LayerCache)> {
    let k = graph.n_nodes();
    let (f_in, _) = params.dims();
    if x_prev.dim() != (k, f_in) {
        return Err(Error::Dimension(format!(
            "layer input {:?}, expected {:?}",
            x_prev.dim(),
            (k, f_in)
        )));
    }
    if x_prev.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite layer input".into()));
    }
    let p_self = x_prev.dot(&params.theta_self);
    let p_dst = x_prev.dot(&params.theta_dst);
    let p_src = x_prev.dot(&params.theta_src);
    let adj = graph.adjacency();

    // sum_u e_uv (x_v T2 - x_u T3) = (sum_u e_uv) x_v T2 - sum_u e_uv x_u T3
    let mut pre = p_self;
    for v in 0..k {
        let mut in_weight = 0.0;
        let mut row = pre.row_mut(v);
        for u in 0..k {
            let e = adj[[u, v]];
            if e != 0.0 {
                in_weight += e;
                row.scaled_add(-e, &p_src.row(u));
            }
        }
        row.scaled_add(in_weight, &p_dst.row(v));
    }
    let out = pre.mapv(|z| leaky(z, slope));
    Ok((
        out,
        LayerCache {
            input: x_prev.to_owned(),
            pre,
        },
    ))
}

/// Embeddings only; the head is not evaluated.
pub fn backbone_forward(
    graph: &InterferenceGraph,
    model: &GnnModel,
) -> Result<(Array2<f64>, Vec<LayerCache>)> {
    if graph.feature_dim() != model.dims[0] {
        return Err(Error::Dimension(format!(
            "graph features have width {}, model expects {}",
            graph.feature_dim(),
            model.dims[0]
        )));
    }
    let mut caches = Vec::with_capacity(model.layers.len());
    let mut x = graph.node_features.clone();
    for layer in &model.layers {
        let (next, cache) = lec_layer_forward(x.view(), graph, layer, model.leaky_slope)?;
        caches.push(cache);
        x = next;
    }
    Ok((x, caches))
}

pub fn gnn_forward(graph: &InterferenceGraph, model: &GnnModel) -> Result<ForwardTrace> {
    let (embeddings, layers) = backbone_forward(graph, model)?;
    let head_pre: Vec<f64> = embeddings
        .dot(&model.head_w)
        .iter()
        .map(|z| z + model.head_b)
        .collect();
    let psi = head_pre.iter().map(|&z| sigmoid(z)).collect();
    Ok(ForwardTrace {
        layers,
        embeddings,
        head_pre,
        psi,
    })
}

/// `gamma_v = 1` iff `psi_v >= 0.5`.
pub fn threshold_schedule(psi: &[f64]) -> Schedule {
    let bits: Vec<bool> = psi.iter().map(|&p| p >= 0.5).collect();
    Schedule::binary(&bits)
}
