//! Independent reference implementations shared by the integration tests.
//! Everything here is written with plain loops over the definitions and
//! shares no code with the library beyond its data types.

#![allow(dead_code)]

use linksched::channel::{generate_sample, ChannelRealization, GeometryParams, PathLossParams, SystemParams};
use linksched::gnn::{init_model, GnnModel};
use linksched::graph::InterferenceGraph;
use linksched::seed;
use ndarray::Array2;
use rand::Rng;

pub fn sys() -> SystemParams {
    SystemParams::default()
}

/// `N / P_max` from the reference constants, in linear units.
pub fn noise_ref() -> f64 {
    let noise_dbm = -174.0 + 10.0 * 1e7f64.log10();
    10f64.powf((noise_dbm - 10.0) / 10.0)
}

pub fn channel(k: usize, s: u64) -> ChannelRealization {
    generate_sample(k, s, &GeometryParams::default(), &PathLossParams::default()).unwrap()
}

pub fn model(dims: &[usize], s: u64) -> GnnModel {
    init_model(dims, 0.01, &mut seed::rng(s)).unwrap()
}

pub fn rate_oracle(g: &Array2<f64>, gamma: &[f64], noise: f64) -> Vec<f64> {
    let k = gamma.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut interference = 0.0;
        for j in 0..k {
            if j != i {
                interference += g[[i, j]] * gamma[j];
            }
        }
        let sinr = g[[i, i]] * gamma[i] / (interference + noise);
        out.push((1.0 + sinr).log2());
    }
    out
}

pub fn sum_rate_oracle(g: &Array2<f64>, gamma: &[f64], noise: f64) -> f64 {
    rate_oracle(g, gamma, noise).iter().sum()
}

/// Full enumeration; link 0 is the most significant bit of the index and
/// the first maximiser in counting order wins.
pub fn enumerate_oracle(g: &Array2<f64>, noise: f64) -> (Vec<u8>, f64) {
    let k = g.nrows();
    let mut best_bits = vec![0u8; k];
    let mut best = f64::NEG_INFINITY;
    for idx in 0u64..(1u64 << k) {
        let bits: Vec<u8> = (0..k).map(|i| ((idx >> (k - 1 - i)) & 1) as u8).collect();
        let gamma: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let r = sum_rate_oracle(g, &gamma, noise);
        if r > best {
            best = r;
            best_bits = bits;
        }
    }
    (best_bits, best)
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

/// One layer in the unfactored message form:
/// `x'_v = leaky(x_v T1 + sum_u e_uv (x_v T2 - x_u T3))`.
pub fn layer_oracle(
    x: &Array2<f64>,
    graph: &InterferenceGraph,
    t1: &Array2<f64>,
    t2: &Array2<f64>,
    t3: &Array2<f64>,
    slope: f64,
) -> Array2<f64> {
    let k = x.nrows();
    let (f_in, f_out) = t1.dim();
    let mut out = Array2::zeros((k, f_out));
    for v in 0..k {
        for o in 0..f_out {
            let mut acc = 0.0;
            for i in 0..f_in {
                acc += x[[v, i]] * t1[[i, o]];
            }
            for u in 0..k {
                if let Some(e) = graph.edge_weight(u, v) {
                    let mut msg = 0.0;
                    for i in 0..f_in {
                        msg += x[[v, i]] * t2[[i, o]] - x[[u, i]] * t3[[i, o]];
                    }
                    acc += e * msg;
                }
            }
            out[[v, o]] = leaky(acc, slope);
        }
    }
    out
}

/// Embeddings and scheduling probabilities by composing [`layer_oracle`].
pub fn forward_oracle(graph: &InterferenceGraph, m: &GnnModel) -> (Array2<f64>, Vec<f64>) {
    let mut x = graph.node_features.clone();
    for l in &m.layers {
        x = layer_oracle(&x, graph, &l.theta_self, &l.theta_dst, &l.theta_src, m.leaky_slope);
    }
    let psi = (0..x.nrows())
        .map(|v| {
            let z: f64 = (0..x.ncols()).map(|f| x[[v, f]] * m.head_w[f]).sum::<f64>() + m.head_b;
            1.0 / (1.0 + (-z).exp())
        })
        .collect();
    (x, psi)
}

pub fn supervised_oracle(labels: &[Vec<u8>], psi: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (y, p) in labels.iter().zip(psi) {
        for (&yv, &pv) in y.iter().zip(p) {
            let pv = pv.clamp(1e-12, 1.0 - 1e-12);
            let y = yv as f64;
            total -= y * pv.log2() + (1.0 - y) * (1.0 - pv).log2();
        }
    }
    total / labels.len() as f64
}

/// Contrastive loss with a denominator over every second-view node of the
/// batch, computed directly without any stabilisation.
pub fn contrastive_oracle(a: &[Array2<f64>], b: &[Array2<f64>], tau: f64) -> f64 {
    let rows = |v: &[Array2<f64>]| -> Vec<Vec<f64>> {
        v.iter().flat_map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>()).collect()
    };
    let (ra, rb) = (rows(a), rows(b));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut total = 0.0;
    for (i, za) in ra.iter().enumerate() {
        let num = (dot(za, &rb[i]) / tau).exp();
        let den: f64 = rb.iter().map(|zb| (dot(za, zb) / tau).exp()).sum();
        total -= (num / den).log2();
    }
    total / a.len() as f64
}

pub fn random_perm<R: Rng>(k: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(rng);
    p
}

/// Synthetic positive gains spanning several orders of magnitude.
pub fn random_gains<R: Rng>(k: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((k, k), || 10f64.powf(rng.random_range(-14.0..-6.0)))
}

/// Central finite-difference gradient of `f` with respect to the given
/// parameter entries `(tensor, index)`.
pub fn finite_diff(
    m: &GnnModel,
    entries: &[(usize, usize)],
    h: f64,
    f: &dyn Fn(&GnnModel) -> f64,
) -> Vec<f64> {
    entries
        .iter()
        .map(|&(t, i)| {
            let mut plus = m.clone();
            plus.tensors_mut()[t][i] += h;
            let mut minus = m.clone();
            minus.tensors_mut()[t][i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor on the denominator. Central differences at
/// `h = 1e-5` carry roundoff of order `eps * |L| / h`, about 1e-10 here, so
/// entries below the floor are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Supervised,
    Unsupervised,
    Contrastive,
}

/// Largest relative error per parameter tensor between analytic and
/// finite-difference gradients of one loss on one random `K = 4` batch.
/// `per_tensor` limits how many entries of each tensor are probed.
pub fn gradient_check(
    kind: LossKind,
    dims: &[usize],
    batch_seed: u64,
    batch: usize,
    per_tensor: Option<usize>,
) -> Vec<(String, f64)> {
    use linksched::rate::exhaustive_search;
    use linksched::train::{augment, contrastive_loss_and_grad, main_loss_and_grad, Example, RegimeKind, TrainingRegime};

    let sys = sys();
    let m = model(dims, batch_seed ^ 0x5eed);
    let examples: Vec<Example> = (0..batch)
        .map(|i| {
            let c = channel(4, batch_seed * 1000 + i as u64);
            let l = exhaustive_search(&c, &sys, 20).unwrap().label;
            Example::new(c, Some(l), &sys).unwrap()
        })
        .collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let aug = TrainingRegime::new(RegimeKind::SslThenSupervised).augment;
    let pairs: Vec<_> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| augment(&e.channel, &aug, &sys, &mut seed::rng(batch_seed + i as u64)).unwrap())
        .collect();
    let tau = 0.1;

    let eval = |m: &GnnModel| -> (f64, linksched::gnn::GradientSet) {
        match kind {
            LossKind::Supervised => main_loss_and_grad(m, &refs, RegimeKind::Supervised, &sys).unwrap(),
            LossKind::Unsupervised => main_loss_and_grad(m, &refs, RegimeKind::Unsupervised, &sys).unwrap(),
            LossKind::Contrastive => contrastive_loss_and_grad(m, &pairs, tau).unwrap(),
        }
    };
    let (_, analytic) = eval(&m);
    let names = m.tensor_names();
    let sizes: Vec<usize> = m.tensors().iter().map(|t| t.len()).collect();
    let mut rng = seed::rng(batch_seed + 77);
    let mut out = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        let idx: Vec<usize> = match per_tensor {
            Some(p) if p < n => (0..p).map(|_| rng.random_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        let entries: Vec<(usize, usize)> = idx.iter().map(|&i| (t, i)).collect();
        let numeric = finite_diff(&m, &entries, 1e-5, &|m| eval(m).0);
        let a = analytic.tensors()[t];
        let worst = idx
            .iter()
            .zip(&numeric)
            .map(|(&i, &n)| rel_err(a[i], n))
            .fold(0.0, f64::max);
        out.push((names[t].clone(), worst));
    }
    out
}
