//! The three training objectives, each returning the batch loss together
//! with its analytic gradient.
//!
//! All three use base-2 logarithms and average over the number of graphs
//! `B` in the batch (not over nodes).

use std::f64::consts::LN_2;

use ndarray::{concatenate, s, Array2, Axis};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

pub const PSI_CLAMP: f64 = 1e-12;

fn check_batch(n: usize, m: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    if n != m {
        return Err(Error::Dimension(format!("{n} graphs but {m} {what}")));
    }
    Ok(())
}

/// Binary cross-entropy against exhaustive-search labels. `psi` is clamped
/// to `[1e-12, 1 - 1e-12]` before the logs; clamped entries get zero
/// gradient.
pub fn supervised_loss(labels: &[&[u8]], psi: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    check_batch(psi.len(), labels.len(), "label vectors")?;
    let b = psi.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(psi.len());
    for (y, p) in labels.iter().zip(psi) {
        if y.len() != p.len() {
            return Err(Error::Dimension(format!("{} labels for {} nodes", y.len(), p.len())));
        }
        let mut g = Vec::with_capacity(p.len());
        for (&yv, &pv) in y.iter().zip(p) {
            if yv > 1 {
                return Err(Error::Domain(format!("label {yv} is not binary")));
            }
            let y = f64::from(yv);
            let pc = pv.clamp(PSI_CLAMP, 1.0 - PSI_CLAMP);
            total += y * pc.log2() + (1.0 - y) * (1.0 - pc).log2();
            let active = pv > PSI_CLAMP && pv < 1.0 - PSI_CLAMP;
            g.push(if active {
                -(y / pc - (1.0 - y) / (1.0 - pc)) / (b * LN_2)
            } else {
                0.0
            });
        }
        grads.push(g);
    }
    Ok((-total / b, grads))
}

/// Negative mean sum-rate with relaxed powers `psi`. The gradient follows
/// both the desired-signal path and every interference path.
pub fn unsupervised_loss(
    channels: &[&ChannelRealization],
    psi: &[Vec<f64>],
    noise_over_pmax: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_batch(psi.len(), channels.len(), "channels")?;
    let b = psi.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(psi.len());
    for (ch, p) in channels.iter().zip(psi) {
        let k = ch.k();
        if p.len() != k {
            return Err(Error::Dimension(format!("{} powers for a {k}-link channel", p.len())));
        }
        let g = &ch.gain_sq;
        let mut d = vec![0.0; k];
        for v in 0..k {
            let mut denom = noise_over_pmax;
            for u in 0..k {
                if u != v {
                    denom += g[[v, u]] * p[u];
                }
            }
            let signal = g[[v, v]] * p[v];
            total += (1.0 + signal / denom).log2();
            // r_v = log2(denom + signal) - log2(denom)
            let inv_total = 1.0 / (denom + signal);
            let inv_denom = 1.0 / denom;
            d[v] -= g[[v, v]] * inv_total / (b * LN_2);
            for u in 0..k {
                if u != v {
                    d[u] -= g[[v, u]] * (inv_total - inv_denom) / (b * LN_2);
                }
            }
        }
        grads.push(d);
    }
    Ok((-total / b, grads))
}

#[derive(Clone, Debug)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_a: Vec<Array2<f64>>,
    pub grad_b: Vec<Array2<f64>>,
}

/// Node-level contrastive loss between two views. Each first-view node is
/// scored against every second-view node of the whole batch, its own
/// counterpart included, at temperature `tau`.
pub fn contrastive_loss(
    view_a: &[Array2<f64>],
    view_b: &[Array2<f64>],
    tau: f64,
) -> Result<ContrastiveOutput> {
    check_batch(view_a.len(), view_b.len(), "second views")?;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
    }
    for (a, b) in view_a.iter().zip(view_b) {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "views disagree: {:?} vs {:?}",
                a.dim(),
                b.dim()
            )));
        }
    }
    let f = view_a[0].ncols();
    if view_a.iter().any(|a| a.ncols() != f) {
        return Err(Error::Dimension("embedding widths differ across the batch".into()));
    }
    let n_graphs = view_a.len() as f64;
    let va: Vec<_> = view_a.iter().map(|a| a.view()).collect();
    let vb: Vec<_> = view_b.iter().map(|b| b.view()).collect();
    let xa = concatenate(Axis(0), &va).map_err(|e| Error::Dimension(e.to_string()))?;
    let xb = concatenate(Axis(0), &vb).map_err(|e| Error::Dimension(e.to_string()))?;

    let logits = xa.dot(&xb.t()) / tau;
    let m = logits.nrows();
    let scale = 1.0 / (n_graphs * LN_2);
    let mut total = 0.0;
    let mut d_logits = Array2::<f64>::zeros((m, m));
    for a in 0..m {
        let row = logits.row(a);
        let max = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
        let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
        let lse = max + sum.ln();
        total += (row[a] - lse) / LN_2;
        let mut d = d_logits.row_mut(a);
        for c in 0..m {
            d[c] = scale * (row[c] - lse).exp();
        }
        d[a] -= scale;
    }
    let ga = d_logits.dot(&xb) / tau;
    let gb = d_logits.t().dot(&xa) / tau;

    let mut grad_a = Vec::with_capacity(view_a.len());
    let mut grad_b = Vec::with_capacity(view_a.len());
    let mut offset = 0;
    for a in view_a {
        let k = a.nrows();
        grad_a.push(ga.slice(s![offset..offset + k, ..]).to_owned());
        grad_b.push(gb.slice(s![offset..offset + k, ..]).to_owned());
        offset += k;
    }
    Ok(ContrastiveOutput {
        loss: -total / n_graphs,
        grad_a,
        grad_b,
    })
}
