use ndarray::{Array1, Array2};

use super::{leaky_grad, ForwardTrace, GnnModel, GradientSet, LayerCache, LayerParams};
use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;

/// Where the scalar loss attaches to the network.
#[derive(Clone, Copy, Debug)]
pub enum Upstream<'a> {
    /// `dL/dpsi_v`, one entry per node.
    Psi(&'a [f64]),
    /// `dL/dx_v^L`, `K x F_L`. The head receives no gradient.
    Embeddings(&'a Array2<f64>),
}

/// Backward pass of one layer given `dL/d(output)`. Returns parameter
/// gradients and `dL/d(input)`.
pub fn lec_layer_backward(
    d_out: &Array2<f64>,
    cache: &LayerCache,
    graph: &InterferenceGraph,
    params: &LayerParams,
    slope: f64,
) -> Result<(LayerParams, Array2<f64>)> {
    let k = graph.n_nodes();
    if d_out.dim() != cache.pre.dim() || cache.pre.nrows() != k {
        return Err(Error::State(format!(
            "upstream gradient {:?} does not match cached activations {:?}",
            d_out.dim(),
            cache.pre.dim()
        )));
    }
    let mut d_pre = d_out.clone();
    d_pre.zip_mut_with(&cache.pre, |d, &z| *d *= leaky_grad(z, slope));

    let adj = graph.adjacency();
    // pre_v = x_v T1 + s_v x_v T2 - sum_u e_uv x_u T3, s_v = sum_u e_uv
    let mut d_dst = d_pre.clone();
    let mut d_src = Array2::<f64>::zeros(d_pre.dim());
    for v in 0..k {
        let in_weight: f64 = (0..k).map(|u| adj[[u, v]]).sum();
        d_dst.row_mut(v).mapv_inplace(|g| g * in_weight);
    }
    for u in 0..k {
        let mut row = d_src.row_mut(u);
        for v in 0..k {
            let e = adj[[u, v]];
            if e != 0.0 {
                row.scaled_add(-e, &d_pre.row(v));
            }
        }
    }

    let xt = cache.input.t();
    // Transposed products may come back column-major; parameters are row-major.
    let grad = |d: &Array2<f64>| xt.dot(d).as_standard_layout().into_owned();
    let grads = LayerParams {
        theta_self: grad(&d_pre),
        theta_dst: grad(&d_dst),
        theta_src: grad(&d_src),
    };
    let d_in = d_pre.dot(&params.theta_self.t())
        + d_dst.dot(&params.theta_dst.t())
        + d_src.dot(&params.theta_src.t());
    Ok((grads, d_in))
}

/// Reverse-mode gradients of a scalar loss for one graph. Also returns
/// `dL/d(node features)`.
pub fn gnn_backward(
    trace: &ForwardTrace,
    graph: &InterferenceGraph,
    model: &GnnModel,
    upstream: Upstream<'_>,
) -> Result<(GradientSet, Array2<f64>)> {
    let k = graph.n_nodes();
    if trace.layers.len() != model.layers.len() || trace.embeddings.nrows() != k {
        return Err(Error::State(
            "forward trace does not belong to this model and graph".into(),
        ));
    }
    let mut grads = GradientSet::zeros_like(model);
    let mut d_x = match upstream {
        Upstream::Psi(d_psi) => {
            if d_psi.len() != k {
                return Err(Error::State(format!(
                    "{} psi gradients for {k} nodes",
                    d_psi.len()
                )));
            }
            let d_z: Array1<f64> = d_psi
                .iter()
                .zip(&trace.psi)
                .map(|(d, p)| d * p * (1.0 - p))
                .collect();
            grads.head_w = trace.embeddings.t().dot(&d_z);
            grads.head_b = d_z.sum();
            let d_z = d_z.insert_axis(ndarray::Axis(1));
            let w = model.head_w.view().insert_axis(ndarray::Axis(0));
            d_z.dot(&w)
        }
        Upstream::Embeddings(d_emb) => {
            if d_emb.dim() != trace.embeddings.dim() {
                return Err(Error::State(format!(
                    "embedding gradient {:?}, expected {:?}",
                    d_emb.dim(),
                    trace.embeddings.dim()
                )));
            }
            d_emb.clone()
        }
    };
    for l in (0..model.layers.len()).rev() {
        let (g, d_in) = lec_layer_backward(
            &d_x,
            &trace.layers[l],
            graph,
            &model.layers[l],
            model.leaky_slope,
        )?;
        grads.layers[l] = g;
        d_x = d_in;
    }
    Ok((grads, d_x))
}
