//! Interference graph construction.
//!
//! Node `v` carries `ln(P_max |h_vv|^2 / N) / Z` and the directed edge
//! `(u, v)` carries `ln(P_max |h_vu|^2 / N) / Z` (interference from `Tx_u`
//! at `Rx_v`), where `Z` is the Euclidean norm of all `K^2` log terms,
//! diagonal included. The ratio is independent of the logarithm base.

use ndarray::Array2;

use crate::channel::{ChannelRealization, SystemParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceGraph {
    /// `K x F0` node features.
    pub node_features: Array2<f64>,
    /// `weights[[u, v]]` is the weight of edge `u -> v`; zero where absent.
    weights: Array2<f64>,
    present: Array2<bool>,
    pub norm_z: f64,
}

impl InterferenceGraph {
    /// Assembles a graph from raw parts. Every off-diagonal pair is an edge.
    pub fn complete(node_features: Array2<f64>, weights: Array2<f64>, norm_z: f64) -> Result<Self> {
        let k = node_features.nrows();
        if weights.dim() != (k, k) {
            return Err(Error::Dimension(format!(
                "edge weight matrix {:?} for {k} nodes",
                weights.dim()
            )));
        }
        let present = Array2::from_shape_fn((k, k), |(u, v)| u != v);
        let mut weights = weights;
        for v in 0..k {
            weights[[v, v]] = 0.0;
        }
        Ok(InterferenceGraph {
            node_features,
            weights,
            present,
            norm_z,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.ncols()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.present[[u, v]]
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.present[[u, v]].then(|| self.weights[[u, v]])
    }

    /// Dense weighted adjacency with zeros for missing edges.
    pub fn adjacency(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Edges in ascending `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let k = self.n_nodes();
        (0..k).flat_map(move |u| {
            (0..k).filter_map(move |v| self.edge_weight(u, v).map(|w| (u, v, w)))
        })
    }

    pub fn n_edges(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    pub fn is_complete(&self) -> bool {
        let k = self.n_nodes();
        self.n_edges() == k * (k - 1)
    }

    /// Removes every edge whose weight is at most `threshold`.
    pub fn prune_at_most(&mut self, threshold: f64) {
        let k = self.n_nodes();
        for u in 0..k {
            for v in 0..k {
                if self.present[[u, v]] && self.weights[[u, v]] <= threshold {
                    self.present[[u, v]] = false;
                    self.weights[[u, v]] = 0.0;
                }
            }
        }
    }

    /// Relabels nodes so that node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> InterferenceGraph {
        let k = self.n_nodes();
        let mut x = Array2::zeros(self.node_features.dim());
        let mut w = Array2::zeros((k, k));
        let mut p = Array2::from_elem((k, k), false);
        for i in 0..k {
            x.row_mut(perm[i]).assign(&self.node_features.row(i));
            for j in 0..k {
                w[[perm[i], perm[j]]] = self.weights[[i, j]];
                p[[perm[i], perm[j]]] = self.present[[i, j]];
            }
        }
        InterferenceGraph {
            node_features: x,
            weights: w,
            present: p,
            norm_z: self.norm_z,
        }
    }
}

/// `log_terms[[v, u]] = ln(gain_sq[[v, u]] / (N / P_max))`, i.e. the SNR on
/// the diagonal and the INR from `Tx_u` at `Rx_v` elsewhere.
pub fn log_terms(channel: &ChannelRealization, sys: &SystemParams) -> Result<Array2<f64>> {
    let noise = sys.noise_over_pmax();
    if let Some(g) = channel.gain_sq.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::Domain(format!("cannot take the log of channel gain {g}")));
    }
    Ok(channel.gain_sq.mapv(|g| (g / noise).ln()))
}

pub fn build_graph(channel: &ChannelRealization, sys: &SystemParams) -> Result<InterferenceGraph> {
    let k = channel.k();
    let logs = log_terms(channel, sys)?;
    let norm_z = logs.iter().map(|l| l * l).sum::<f64>().sqrt();
    if norm_z == 0.0 {
        return Err(Error::Domain(
            "degenerate normalisation: every SNR and INR equals one".into(),
        ));
    }
    let node_features = Array2::from_shape_fn((k, 1), |(v, _)| logs[[v, v]] / norm_z);
    let weights = Array2::from_shape_fn((k, k), |(u, v)| logs[[v, u]] / norm_z);
    InterferenceGraph::complete(node_features, weights, norm_z)
}
