//! Views for contrastive pre-training.
//!
//! A view multiplies every `|h_ij|` by an independent factor drawn from
//! `U[low, high]` (so `|h_ij|^2` by its square), rebuilds the normalised
//! graph, and then drops the weakest interference edges: under the
//! treating-interference-as-noise optimality condition weak interferers
//! barely move the optimal schedule, so the two views stay semantically
//! equivalent.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, SystemParams};
use crate::error::{Error, Result};
use crate::graph::{build_graph, InterferenceGraph};
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub perturb_low: f64,
    pub perturb_high: f64,
    pub prune: bool,
    /// Edges at or below this per-graph quantile of edge weights are removed.
    pub prune_quantile: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            perturb_low: 0.9,
            perturb_high: 1.1,
            prune: true,
            prune_quantile: 0.25,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        AugmentConfig {
            perturb_low: 1.0,
            perturb_high: 1.0,
            prune: false,
            prune_quantile: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.perturb_low > 0.0
            && self.perturb_low <= self.perturb_high
            && self.perturb_high.is_finite()
            && (0.0..=1.0).contains(&self.prune_quantile);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid augmentation settings: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPair {
    pub view_a: InterferenceGraph,
    pub view_b: InterferenceGraph,
}

/// Amplitude factor `f ~ U[low, high]`.
pub fn perturb_factor(cfg: &AugmentConfig, rng: &mut Rng) -> f64 {
    if cfg.perturb_low == cfg.perturb_high {
        cfg.perturb_low
    } else {
        rng.random_range(cfg.perturb_low..=cfg.perturb_high)
    }
}

/// Linear-interpolation quantile of `values` (sorted in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

pub fn augment_view(
    channel: &ChannelRealization,
    cfg: &AugmentConfig,
    sys: &SystemParams,
    rng: &mut Rng,
) -> Result<InterferenceGraph> {
    let mut perturbed = channel.clone();
    perturbed.gain_sq.mapv_inplace(|g| {
        let f = perturb_factor(cfg, rng);
        g * f * f
    });
    let mut graph = build_graph(&perturbed, sys)?;
    if cfg.prune && graph.n_edges() > 0 {
        let mut weights: Vec<f64> = graph.edges().map(|e| e.2).collect();
        let cut = quantile(&mut weights, cfg.prune_quantile);
        graph.prune_at_most(cut);
    }
    Ok(graph)
}

/// Two independently drawn views of the same channel.
pub fn augment(
    channel: &ChannelRealization,
    cfg: &AugmentConfig,
    sys: &SystemParams,
    rng: &mut Rng,
) -> Result<AugmentedPair> {
    let view_a = augment_view(channel, cfg, sys, rng)?;
    let view_b = augment_view(channel, cfg, sys, rng)?;
    Ok(AugmentedPair { view_a, view_b })
}
