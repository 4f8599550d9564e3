mod common;

use common::{channel, forward_oracle, layer_oracle, model, random_gains, random_perm, sys};
use linksched::channel::ChannelRealization;
use linksched::gnn::{gnn_forward, lec_layer_forward};
use linksched::graph::build_graph;
use linksched::seed;
use linksched::train::{augment, AugmentConfig};
use ndarray::Array2;
use proptest::prelude::*;

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Graph built with base-10 logarithms, which the norm must cancel.
fn graph_oracle_log10(g: &Array2<f64>, noise: f64) -> (Vec<f64>, Array2<f64>) {
    let k = g.nrows();
    let logs = g.mapv(|v| (v / noise).log10());
    let z = logs.iter().map(|l| l * l).sum::<f64>().sqrt();
    let x = (0..k).map(|v| logs[[v, v]] / z).collect();
    let w = Array2::from_shape_fn((k, k), |(u, v)| logs[[v, u]] / z);
    (x, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_is_base_invariant(k in 1usize..10, s in any::<u64>()) {
        let c = ChannelRealization::from_gains(random_gains(k, &mut seed::rng(s))).unwrap();
        let g = build_graph(&c, &sys()).unwrap();
        let (x, w) = graph_oracle_log10(&c.gain_sq, common::noise_ref());
        for v in 0..k {
            prop_assert!((g.node_features[[v, 0]] - x[v]).abs() < 1e-12);
            for u in (0..k).filter(|&u| u != v) {
                prop_assert!((g.edge_weight(u, v).unwrap() - w[[u, v]]).abs() < 1e-12);
            }
        }
        let norm: f64 = (0..k)
            .flat_map(|u| (0..k).map(move |v| (u, v)))
            .map(|(u, v)| if u == v { g.node_features[[v, 0]].powi(2) } else { g.edge_weight(u, v).unwrap().powi(2) })
            .sum();
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn graph_construction_commutes_with_relabeling(k in 1usize..10, s in any::<u64>(), ps in any::<u64>()) {
        let c = channel(k, s % 10_000);
        let perm = random_perm(k, &mut seed::rng(ps));
        let a = build_graph(&c, &sys()).unwrap().permuted(&perm);
        let b = build_graph(&c.permuted(&perm), &sys()).unwrap();
        prop_assert!(max_abs_diff(&a.node_features, &b.node_features) < 1e-12);
        prop_assert!(max_abs_diff(a.adjacency(), b.adjacency()) < 1e-12);
    }

    #[test]
    fn layer_matches_message_form(k in 1usize..9, s in any::<u64>(), f_in in 1usize..5, f_out in 1usize..6) {
        let g = build_graph(&channel(k, s % 10_000), &sys()).unwrap();
        let m = model(&[f_in, f_out], s);
        let mut rng = seed::rng(s ^ 1);
        let x = random_gains(k, &mut rng).column(0).to_owned();
        let x = Array2::from_shape_fn((k, f_in), |(v, i)| x[v].log10() + i as f64 * 0.3);
        let l = &m.layers[0];
        let (ours, _) = lec_layer_forward(x.view(), &g, l, 0.01).unwrap();
        let oracle = layer_oracle(&x, &g, &l.theta_self, &l.theta_dst, &l.theta_src, 0.01);
        prop_assert!(max_abs_diff(&ours, &oracle) < 1e-12);
    }

    #[test]
    fn forward_matches_composed_oracle_on_pruned_graphs(k in 2usize..9, s in any::<u64>()) {
        let c = channel(k, s % 10_000);
        let pair = augment(&c, &AugmentConfig::default(), &sys(), &mut seed::rng(s)).unwrap();
        let m = model(&[1, 16, 16, 16], s);
        for g in [build_graph(&c, &sys()).unwrap(), pair.view_a, pair.view_b] {
            let t = gnn_forward(&g, &m).unwrap();
            let (emb, psi) = forward_oracle(&g, &m);
            prop_assert!(max_abs_diff(&t.embeddings, &emb) < 1e-12);
            for (a, b) in t.psi.iter().zip(&psi) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_permutation_equivariant(k in 1usize..13, s in any::<u64>(), ps in any::<u64>()) {
        let g = build_graph(&channel(k, s % 10_000), &sys()).unwrap();
        let perm = random_perm(k, &mut seed::rng(ps));
        let m = model(&[1, 32, 32], s);
        let a = gnn_forward(&g, &m).unwrap();
        let b = gnn_forward(&g.permuted(&perm), &m).unwrap();
        for i in 0..k {
            for f in 0..m.embedding_dim() {
                prop_assert!((a.embeddings[[i, f]] - b.embeddings[[perm[i], f]]).abs() < 1e-9);
            }
            prop_assert!((a.psi[i] - b.psi[perm[i]]).abs() < 1e-9);
        }
    }
}

#[test]
fn one_model_runs_on_every_size() {
    let m = model(&[1, 64, 64, 64], 3);
    for k in 1..=16 {
        let t = gnn_forward(&build_graph(&channel(k, k as u64), &sys()).unwrap(), &m).unwrap();
        assert_eq!(t.psi.len(), k);
        assert!(t.psi.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
